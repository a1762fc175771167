use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tica::analytics::{compare_architectures, cost_usd};
use tica::devices::DeviceRole;
use tica::experiment::{self, Axis, ExperimentConfig, ReportFormat, TraceFile};
use tica::report;
use tica::trace::{self, TraceFormat};
use tica::Error;

#[derive(Parser)]
#[command(name = "tica", version, about = "Trace-driven simulator for a DRAM + two-SSD cache in front of an HDD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and print its metric report.
    Run(RunArgs),
    /// Run the cartesian product of one or more axes and print a CSV table.
    Sweep(SweepArgs),
    /// Write a synthetic trace in the native JSON-lines format.
    GenTrace(GenTraceArgs),
    /// Print workload statistics for a trace.
    Stats(StatsArgs),
    /// Print per-operation latencies of each architecture, relative to an RO-SSD read.
    CompareArch(CompareArgs),
    /// Run with every invariant checked and report pass/fail per invariant.
    Audit(AuditArgs),
}

/// Flags that mirror config-file keys. Flags win over the file.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML experiment config.
    #[arg(long, env = "TICA_CONFIG")]
    config: Option<PathBuf>,
    /// Trace file to replay.
    #[arg(long, conflicts_with = "synthetic")]
    trace: Option<PathBuf>,
    /// Trace file format: msr or jsonl.
    #[arg(long, value_parser = parse_trace_format)]
    format: Option<TraceFormat>,
    /// Synthetic workload, e.g. requests=10000,read_fraction=0.7,pages=5000,zipf=0.9.
    #[arg(long)]
    synthetic: Option<String>,
    /// tica, mirrored_wb, single_ssd, raid1_ro, raid1_wo or raid1_mixed.
    #[arg(long)]
    architecture: Option<String>,
    /// ef, wed or adaptive.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ssd_fraction: Option<f64>,
    #[arg(long)]
    dram_fraction: Option<f64>,
    #[arg(long)]
    ssd_pages: Option<u64>,
    #[arg(long)]
    dram_pages: Option<u64>,
    /// closed or open.
    #[arg(long)]
    clock: Option<String>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    /// Fix the DRAM share of dirty-page exposure instead of measuring it.
    #[arg(long)]
    alpha: Option<f64>,
    /// Charge DRAM idle time at the RO-SSD idle power.
    #[arg(long)]
    eq2_verbatim: bool,
    /// Any other config key, e.g. --set thresholds.t-min=0.1 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// json or csv.
    #[arg(long)]
    report_format: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// key=v1,v2,... (repeatable; the grid is their product).
    #[arg(long, required = true)]
    axis: Vec<String>,
}

#[derive(Args)]
struct GenTraceArgs {
    #[arg(long, default_value = "")]
    synthetic: String,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
}

fn parse_trace_format(s: &str) -> Result<TraceFormat, String> {
    match s {
        "msr" | "msr_csv" | "csv" => Ok(TraceFormat::MsrCsv),
        "jsonl" | "native" | "native_json_lines" => Ok(TraceFormat::NativeJsonLines),
        _ => Err(format!("unknown trace format {s:?} (expected msr or jsonl)")),
    }
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(path) = &self.trace {
            cfg.synthetic = None;
            cfg.trace = Some(TraceFile { path: path.clone(), format: TraceFormat::MsrCsv });
        }
        if let Some(fmt) = self.format {
            match cfg.trace.as_mut() {
                Some(t) => t.format = fmt,
                None => return Err(Error::Config("--format needs a trace file".into())),
            }
        }
        if let Some(spec) = &self.synthetic {
            cfg.trace = None;
            cfg.synthetic = Some(experiment::parse_synthetic_arg(spec)?);
        }
        let scalars: [(&str, Option<String>); 11] = [
            ("architecture", self.architecture.clone()),
            ("policy", self.policy.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("ssd_fraction", self.ssd_fraction.map(float)),
            ("dram_fraction", self.dram_fraction.map(float)),
            ("ssd_pages", self.ssd_pages.map(|v| v.to_string())),
            ("dram_pages", self.dram_pages.map(|v| v.to_string())),
            ("clock", self.clock.clone()),
            ("warmup_fraction", self.warmup_fraction.map(float)),
            ("alpha", self.alpha.map(float)),
            ("eq2_verbatim", self.eq2_verbatim.then(|| "true".to_string())),
        ];
        for (key, value) in scalars {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set {kv:?}: expected KEY=VALUE")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

// TOML needs a decimal point to read a float.
fn float(v: f64) -> String {
    format!("{v:?}")
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Error> {
    let mut out = open_output(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn output_path<'a>(flag: &'a OutputArgs, cfg: &'a ExperimentConfig) -> Option<&'a Path> {
    flag.output.as_deref().or(cfg.output.as_deref())
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let mut cfg = args.cfg.build()?;
    if let Some(f) = &args.report_format {
        cfg.set("report_format", f)?;
    }
    let out = experiment::run(&cfg)?;
    let path = output_path(&args.out, &cfg);
    match cfg.report_format {
        ReportFormat::Json => emit(path, &report::to_json(&out.report)?),
        ReportFormat::Csv => {
            let label = cfg.architecture.as_str().to_string();
            report::write_csv(open_output(path)?, &[(0, label, Ok(out.report.metrics))])
        }
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), Error> {
    let cfg = args.cfg.build()?;
    let axes = args.axis.iter().map(|a| a.parse::<Axis>()).collect::<Result<Vec<_>, _>>()?;
    let rows = experiment::sweep(&cfg, &axes)?;
    experiment::write_sweep_csv(open_output(output_path(&args.out, &cfg))?, &rows)?;
    let failed = rows.iter().filter(|r| r.result.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} of {} grid points failed; see the error column", rows.len());
    }
    Ok(())
}

fn cmd_gen_trace(args: &GenTraceArgs) -> Result<(), Error> {
    let mut spec = experiment::parse_synthetic_arg(&args.synthetic)?;
    if let Some(seed) = args.seed {
        spec.rng_seed = seed;
    }
    let requests = trace::gen_synthetic(&spec)?;
    let mut out = open_output(args.out.output.as_deref())?;
    trace::write_jsonl(&mut out, &requests)?;
    out.flush()?;
    Ok(())
}

fn cmd_stats(args: &StatsArgs) -> Result<(), Error> {
    let cfg = args.cfg.build()?;
    let requests = cfg.load_requests()?;
    let ws = trace::trace_stats(&requests, cfg.page_size_bytes);
    emit(output_path(&args.out, &cfg), &report::to_json(&ws)?)
}

fn cmd_compare(args: &CompareArgs) -> Result<(), Error> {
    let cfg = args.cfg.build()?;
    let ro = cfg.devices.get(DeviceRole::RoSsd);
    let wo = cfg.devices.get(DeviceRole::WoSsd);
    let dram = cfg.devices.get(DeviceRole::Dram);
    let doc = serde_json::json!({
        "relative_latency": compare_architectures(&ro, &wo),
        "cost_usd": {
            "tica": cost_usd(&[&dram, &ro, &wo], cfg.page_size_bytes),
            "mirrored_wb": cost_usd(&[&dram, &wo, &wo], cfg.page_size_bytes),
        },
    });
    emit(output_path(&args.out, &cfg), &report::to_json(&doc)?)
}

fn cmd_audit(args: &AuditArgs) -> Result<(), Error> {
    let cfg = args.cfg.build()?;
    let rep = experiment::audit(&cfg)?;
    println!("requests: {}", rep.requests);
    for c in &rep.checks {
        if c.passed {
            println!("[PASS] {}", c.name);
        } else {
            println!("[FAIL] {}: {}", c.name, c.detail);
        }
    }
    if let Some(p) = rep.failing_prefix {
        println!("failing prefix: requests 0..={p}");
    }
    if rep.passed() {
        Ok(())
    } else {
        Err(Error::Accounting("audit failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::GenTrace(a) => cmd_gen_trace(a),
        Command::Stats(a) => cmd_stats(a),
        Command::CompareArch(a) => cmd_compare(a),
        Command::Audit(a) => cmd_audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Invariant { request_index, .. } = &e {
                eprintln!("rerun `tica audit` with the same flags; the first {} requests reproduce it", request_index + 1);
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
