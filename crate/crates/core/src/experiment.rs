//! Experiment configuration, single runs, sweeps and audits.
//!
//! Cache sizes are fractions of the trace's working set, so every run makes
//! a statistics pass over the trace before simulating it.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive::{CapacityRule, Thresholds};
use crate::analytics::{AlphaSource, Architecture, EnergyFormula, MetricReport, RunStats};
use crate::baselines::{BaselineConfig, BaselineEngine};
use crate::cache::{ClockMode, Policy, TicaConfig, TicaEngine};
use crate::devices::{DeviceModel, DeviceRole};
use crate::error::Error;
use crate::report::{self, RunReport};
use crate::trace::{self, MalformedPolicy, Request, SyntheticSpec, TraceFormat, WorkloadStats};

/// Full structural audits run this often during `audit`.
const FULL_AUDIT_INTERVAL: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: TraceFormat,
}

fn default_format() -> TraceFormat {
    TraceFormat::MsrCsv
}

/// Device models; any omitted device uses its default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceModels {
    pub dram: Option<DeviceModel>,
    pub ro_ssd: Option<DeviceModel>,
    pub wo_ssd: Option<DeviceModel>,
    pub hdd: Option<DeviceModel>,
}

impl DeviceModels {
    pub fn get(&self, role: DeviceRole) -> DeviceModel {
        let custom = match role {
            DeviceRole::Dram => &self.dram,
            DeviceRole::RoSsd => &self.ro_ssd,
            DeviceRole::WoSsd => &self.wo_ssd,
            DeviceRole::Hdd => &self.hdd,
        };
        custom.clone().unwrap_or_else(|| DeviceModel::default_for(role))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub trace: Option<TraceFile>,
    pub synthetic: Option<SyntheticSpec>,
    pub architecture: Architecture,
    pub policy: Policy,
    pub devices: DeviceModels,
    /// Each SSD holds this fraction of the working set.
    pub ssd_fraction: f64,
    /// DRAM holds this fraction of the working set.
    pub dram_fraction: f64,
    /// Explicit usable sizes in pages, overriding the fractions.
    pub ssd_pages: Option<u64>,
    pub dram_pages: Option<u64>,
    pub thresholds: Thresholds,
    pub capacity_rule: CapacityRule,
    pub sample_size: Option<u64>,
    pub steps: u64,
    pub def_write_fraction: f64,
    pub min_read_fraction: f64,
    pub reserve_pages: u64,
    pub clock: ClockMode,
    /// Overrides the synthetic generator seed.
    pub seed: Option<u64>,
    pub warmup_fraction: f64,
    /// Fixed share of dirty-page time protected by DRAM; measured if unset.
    pub alpha: Option<f64>,
    pub eq2_verbatim: bool,
    pub page_size_bytes: u64,
    pub malformed: MalformedPolicy,
    pub output: Option<PathBuf>,
    pub report_format: ReportFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trace: None,
            synthetic: None,
            architecture: Architecture::Tica,
            policy: Policy::Adaptive,
            devices: DeviceModels::default(),
            ssd_fraction: 0.10,
            dram_fraction: 0.01,
            ssd_pages: None,
            dram_pages: None,
            thresholds: Thresholds::default(),
            capacity_rule: CapacityRule::default(),
            sample_size: None,
            steps: 4,
            def_write_fraction: 0.2,
            min_read_fraction: 0.1,
            reserve_pages: 4,
            clock: ClockMode::Closed,
            seed: None,
            warmup_fraction: 0.0,
            alpha: None,
            eq2_verbatim: false,
            page_size_bytes: trace::DEFAULT_PAGE_SIZE,
            malformed: MalformedPolicy::default(),
            output: None,
            report_format: ReportFormat::Json,
        }
    }
}

fn toml_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Parse a flag value as a TOML literal, falling back to a bare string.
fn parse_literal(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(toml_err)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, Error> {
        toml::to_string(self).map_err(toml_err)
    }

    /// Set one key, e.g. `policy`, `ssd-fraction` or `thresholds.t-min`.
    /// Dashes map to underscores; values are TOML literals or bare strings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let path: Vec<String> = key.split('.').map(|k| k.replace('-', "_")).collect();
        let mut root = toml::Value::try_from(&*self).map_err(toml_err)?;
        let mut node = &mut root;
        for (i, part) in path.iter().enumerate() {
            let table = node.as_table_mut().ok_or_else(|| Error::Config(format!("{key}: not a table")))?;
            if i + 1 == path.len() {
                table.insert(part.clone(), parse_literal(value));
                break;
            }
            node = table.entry(part.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        *self = root.try_into().map_err(|e| Error::Config(format!("{key}={value}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.trace.is_some() == self.synthetic.is_some() {
            return Err(Error::Config("exactly one of trace or synthetic must be given".into()));
        }
        for (v, n) in [(self.ssd_fraction, "ssd_fraction"), (self.dram_fraction, "dram_fraction")] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{n} {v} outside (0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!("warmup_fraction {} outside [0, 1)", self.warmup_fraction)));
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::Config(format!("alpha {a} outside [0, 1]")));
            }
        }
        if let Some(s) = &self.synthetic {
            s.validate()?;
        }
        Ok(())
    }

    pub fn synthetic_spec(&self) -> Option<SyntheticSpec> {
        self.synthetic.clone().map(|mut s| {
            if let Some(seed) = self.seed {
                s.rng_seed = seed;
            }
            s.page_size_bytes = self.page_size_bytes;
            s
        })
    }

    pub fn load_requests(&self) -> Result<Vec<Request>, Error> {
        self.validate()?;
        match (&self.trace, self.synthetic_spec()) {
            (Some(t), _) => Ok(trace::load_trace(&t.path, t.format, self.page_size_bytes, self.malformed)?.requests),
            (None, Some(spec)) => trace::gen_synthetic(&spec),
            (None, None) => unreachable!("validated"),
        }
    }

    /// Usable (DRAM, SSD) pages for a workload.
    pub fn sizes(&self, ws: &WorkloadStats) -> (u64, u64) {
        let frac = |f: f64| (ws.working_set_pages as f64 * f).ceil() as u64;
        let dram = self.dram_pages.unwrap_or_else(|| frac(self.dram_fraction)).max(2);
        let ssd = self.ssd_pages.unwrap_or_else(|| frac(self.ssd_fraction)).max(1);
        (dram, ssd)
    }

    pub fn tica_config(&self, ws: &WorkloadStats) -> TicaConfig {
        let (dram, ssd) = self.sizes(ws);
        let model = |role| self.devices.get(role);
        TicaConfig {
            dram: model(DeviceRole::Dram).with_capacity(dram + self.reserve_pages),
            ro_ssd: model(DeviceRole::RoSsd).with_capacity(ssd + self.reserve_pages),
            wo_ssd: model(DeviceRole::WoSsd).with_capacity(ssd + self.reserve_pages),
            hdd: model(DeviceRole::Hdd),
            policy: self.policy,
            thresholds: self.thresholds,
            capacity_rule: self.capacity_rule,
            sample_size: self.sample_size,
            steps: self.steps,
            def_write_fraction: self.def_write_fraction,
            min_read_fraction: self.min_read_fraction,
            reserve_pages: self.reserve_pages,
            eq_capacity: None,
            clock: self.clock,
            page_size_bytes: self.page_size_bytes,
        }
    }

    pub fn baseline_config(&self, ws: &WorkloadStats) -> Result<BaselineConfig, Error> {
        let (dram, ssd) = self.sizes(ws);
        let mut cfg = BaselineConfig::new(self.architecture, dram + self.reserve_pages, ssd + self.reserve_pages)?;
        if let Some(d) = &mut cfg.dram {
            *d = self.devices.get(DeviceRole::Dram).with_capacity(d.capacity_pages);
        }
        for (role, m) in &mut cfg.members {
            *m = self.devices.get(*role).with_capacity(m.capacity_pages);
        }
        cfg.hdd = self.devices.get(DeviceRole::Hdd);
        cfg.reserve_pages = self.reserve_pages;
        cfg.clock = self.clock;
        cfg.page_size_bytes = self.page_size_bytes;
        Ok(cfg)
    }

    fn alpha_source(&self) -> AlphaSource {
        self.alpha.map(AlphaSource::Fixed).unwrap_or(AlphaSource::Measured)
    }

    fn energy_formula(&self) -> EnergyFormula {
        if self.eq2_verbatim {
            EnergyFormula::Verbatim
        } else {
            EnergyFormula::Standard
        }
    }
}

/// How much checking a run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditLevel {
    /// Final structural and accounting checks only.
    Final,
    /// Touched pages after every request, full structure periodically.
    Full,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stats: RunStats,
    pub report: RunReport,
    pub workload: WorkloadStats,
}

fn warmup_len(cfg: &ExperimentConfig, n: usize) -> usize {
    (n as f64 * cfg.warmup_fraction).floor() as usize
}

fn run_tica(cfg: &ExperimentConfig, requests: &[Request], ws: &WorkloadStats, level: AuditLevel) -> Result<RunStats, Error> {
    let mut engine = TicaEngine::new(cfg.tica_config(ws))?;
    let warmup = warmup_len(cfg, requests.len());
    let violation = |i: usize, message: String| Error::Invariant { request_index: i, message };
    for (i, req) in requests.iter().enumerate() {
        if i == warmup && warmup > 0 {
            engine.begin_measurement();
        }
        engine.step(req);
        if level == AuditLevel::Full {
            engine.check_touched().map_err(|m| violation(i, m))?;
            if (i + 1) % FULL_AUDIT_INTERVAL == 0 {
                engine.check_invariants().map_err(|m| violation(i, m))?;
            }
        }
    }
    let last = requests.len().saturating_sub(1);
    engine.check_invariants().map_err(|m| violation(last, m))?;
    let stats = engine.finish();
    engine.check_conservation().map_err(Error::Accounting)?;
    Ok(stats)
}

fn run_baseline(cfg: &ExperimentConfig, requests: &[Request], ws: &WorkloadStats) -> Result<RunStats, Error> {
    let mut engine = BaselineEngine::new(cfg.baseline_config(ws)?)?;
    let warmup = warmup_len(cfg, requests.len());
    for (i, req) in requests.iter().enumerate() {
        if i == warmup && warmup > 0 {
            engine.begin_measurement();
        }
        engine.step(req);
    }
    Ok(engine.finish())
}

/// Simulate over already-loaded requests.
pub fn run_requests(cfg: &ExperimentConfig, requests: &[Request], level: AuditLevel) -> Result<RunOutput, Error> {
    cfg.validate()?;
    let ws = trace::trace_stats(requests, cfg.page_size_bytes);
    let stats = match cfg.architecture {
        Architecture::Tica => run_tica(cfg, requests, &ws, level)?,
        _ => run_baseline(cfg, requests, &ws)?,
    };
    let metrics = MetricReport::from_stats(&stats, cfg.architecture, cfg.alpha_source(), cfg.energy_formula())?;
    let (dram_pages, ssd_pages) = cfg.sizes(&ws);
    let mut echo = cfg.clone();
    echo.dram_pages = Some(dram_pages);
    echo.ssd_pages = Some(ssd_pages);
    echo.synthetic = cfg.synthetic_spec();
    let report = RunReport {
        schema_version: report::SCHEMA_VERSION,
        seed: echo.synthetic.as_ref().map(|s| s.rng_seed).or(cfg.seed),
        config: report::to_rounded_value(&echo)?,
        metrics,
        devices: report::to_rounded_value(&stats.devices)?,
    };
    Ok(RunOutput { stats, report, workload: ws })
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, Error> {
    let requests = cfg.load_requests()?;
    run_requests(cfg, &requests, AuditLevel::Final)
}

/// One sweep axis: a config key and the values it takes.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    /// `key=v1,v2,...`
    fn from_str(s: &str) -> Result<Self, Error> {
        let (key, values) = s.split_once('=').ok_or_else(|| Error::Config(format!("axis {s:?} is not key=v1,v2")))?;
        let values: Vec<String> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).map(String::from).collect();
        if key.trim().is_empty() || values.is_empty() {
            return Err(Error::Config(format!("axis {s:?} needs a key and at least one value")));
        }
        Ok(Axis { key: key.trim().to_string(), values })
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub index: usize,
    pub label: String,
    pub result: Result<MetricReport, String>,
}

/// Cartesian product of the axes, in row-major order (last axis fastest).
pub fn grid_points(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

/// Run every grid point, in parallel. Failed points become error rows.
pub fn sweep(base: &ExperimentConfig, axes: &[Axis]) -> Result<Vec<SweepRow>, Error> {
    if axes.is_empty() {
        return Err(Error::Config("sweep needs at least one axis".into()));
    }
    let points = grid_points(axes);
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(index, point)| {
            let label = point.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";");
            let result = (|| {
                let mut cfg = base.clone();
                for (k, v) in point {
                    cfg.set(k, v)?;
                }
                run(&cfg).map(|out| out.report.metrics)
            })()
            // one line per row keeps the CSV greppable
            .map_err(|e| e.to_string().split_whitespace().collect::<Vec<_>>().join(" "));
            SweepRow { index, label, result }
        })
        .collect();
    Ok(rows)
}

pub fn write_sweep_csv<W: std::io::Write>(out: W, rows: &[SweepRow]) -> Result<(), Error> {
    let flat: Vec<_> = rows.iter().map(|r| (r.index, r.label.clone(), r.result.clone())).collect();
    report::write_csv(out, &flat)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub requests: usize,
    pub checks: Vec<AuditCheck>,
    /// Requests up to and including this index reproduce the first failure.
    pub failing_prefix: Option<usize>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

const AUDIT_CHECKS: [&str; 4] = ["structure", "redundancy", "capacity", "conservation"];

fn classify(message: &str) -> &'static str {
    AUDIT_CHECKS.iter().copied().find(|c| message.starts_with(c)).unwrap_or("structure")
}

/// Run with every invariant checked and summarize pass/fail per invariant.
pub fn audit(cfg: &ExperimentConfig) -> Result<AuditReport, Error> {
    if cfg.architecture != Architecture::Tica {
        return Err(Error::Config("audit applies to the three-level cache only".into()));
    }
    let requests = cfg.load_requests()?;
    audit_requests(cfg, &requests)
}

pub fn audit_requests(cfg: &ExperimentConfig, requests: &[Request]) -> Result<AuditReport, Error> {
    let (failed, detail, prefix) = match run_requests(cfg, requests, AuditLevel::Full) {
        Ok(_) => (None, String::new(), None),
        Err(Error::Invariant { request_index, message }) => {
            (Some(classify(&message)), message, Some(request_index))
        }
        Err(Error::Accounting(message)) => (Some("conservation"), message, None),
        Err(e) => return Err(e),
    };
    let checks = AUDIT_CHECKS
        .iter()
        .map(|&name| AuditCheck {
            name,
            passed: failed != Some(name),
            detail: if failed == Some(name) { detail.clone() } else { String::new() },
        })
        .collect();
    Ok(AuditReport { requests: requests.len(), checks, failing_prefix: prefix })
}

/// Parse `key=value,...` into a synthetic spec. Keys: `requests`,
/// `read_fraction`, `pages`, `zipf` (exponent; uniform when absent),
/// `seed`, `interarrival_us`.
pub fn parse_synthetic_arg(arg: &str) -> Result<SyntheticSpec, Error> {
    let mut spec = SyntheticSpec::new(100_000, 0.7, 100_000);
    for kv in arg.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("synthetic: {kv:?} is not key=value")))?;
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("synthetic {k}={v}: {e}"));
        match k.trim().replace('-', "_").as_str() {
            "requests" | "request_count" => spec.request_count = v.parse().map_err(|e| bad(&e))?,
            "read_fraction" => spec.read_fraction = v.parse().map_err(|e| bad(&e))?,
            "pages" | "working_set_pages" => spec.working_set_pages = v.parse().map_err(|e| bad(&e))?,
            "zipf" => spec.locality = trace::Locality::Zipf { s: v.parse().map_err(|e| bad(&e))? },
            "seed" | "rng_seed" => spec.rng_seed = v.parse().map_err(|e| bad(&e))?,
            "interarrival_us" => spec.interarrival_us = v.parse().map_err(|e| bad(&e))?,
            other => return Err(Error::Config(format!("synthetic: unknown key {other:?}"))),
        }
    }
    spec.validate()?;
    Ok(spec)
}
