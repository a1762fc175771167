use std::path::Path;
use std::process::{Command, Output};

fn tica(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tica"))
        .args(args)
        .env_remove("TICA_CONFIG")
        .output()
        .expect("spawn tica")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json report")
}

const SMALL: &str = "requests=3000,pages=600,read_fraction=0.6,seed=11";

#[test]
fn run_prints_a_json_report() {
    let v = json(&tica(&["run", "--synthetic", SMALL]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["metrics"]["user_requests"], 3000);
    assert!(v["metrics"]["hit_ratio"].as_f64().unwrap() >= 0.0);
    assert!(v["devices"].is_array());
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tica(&["run", "--synthetic", SMALL, "--policy", "wed"]);
    let b = tica(&["run", "--synthetic", SMALL, "--policy", "wed"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn msr_trace_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let mut text = String::new();
    for i in 0..200u64 {
        let kind = if i % 3 == 0 { "Write" } else { "Read" };
        text += &format!("{},host,0,{kind},{},4096,100\n", 128_000_000_000u64 + i * 1000, (i % 40) * 4096);
    }
    std::fs::write(&path, text).unwrap();
    let v = json(&tica(&["run", "--trace", path.to_str().unwrap(), "--format", "msr", "--ssd-pages", "64", "--dram-pages", "8"]));
    assert_eq!(v["metrics"]["user_requests"], 200);
    assert!(v["metrics"]["hit_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_flag_writes_file_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = tica(&["run", "--synthetic", SMALL, "--output", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["metrics"]["architecture"], "tica");
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "policy = \"ef\"\narchitecture = \"mirrored_wb\"\n[synthetic]\nrequest_count = 500\nread_fraction = 0.5\nworking_set_pages = 200\n",
    )
    .unwrap();
    let v = json(&tica(&["run", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["metrics"]["architecture"], "mirrored_wb");
    let v = json(&tica(&["run", "--config", cfg.to_str().unwrap(), "--architecture", "tica", "--set", "thresholds.t-min=0.1"]));
    assert_eq!(v["metrics"]["architecture"], "tica");
    assert_eq!(v["config"]["policy"], "ef");

    let o = Command::new(env!("CARGO_BIN_EXE_tica")).args(["run"]).env("TICA_CONFIG", &cfg).output().unwrap();
    assert_eq!(json(&o)["metrics"]["user_requests"], 500);
}

#[test]
fn sweep_emits_one_row_per_grid_point() {
    let o = tica(&["sweep", "--synthetic", SMALL, "--axis", "policy=ef,wed,adaptive", "--axis", "ssd-fraction=0.05,0.1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let recs: Vec<_> = rows.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 6);
    assert!(recs.iter().all(|r| r.get(r.len() - 1) == Some("")));
}

#[test]
fn sweep_keeps_failed_points_as_error_rows() {
    let o = tica(&["sweep", "--synthetic", SMALL, "--axis", "policy=ef,nonsense"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[2].contains("nonsense"));
}

#[test]
fn empty_sweep_is_a_usage_error() {
    assert_eq!(tica(&["sweep", "--synthetic", SMALL, "--axis", "policy="]).status.code(), Some(2));
    assert_eq!(tica(&["sweep", "--synthetic", SMALL]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(tica(&["run", "--synthetic", SMALL, "--ssd-fraction", "1.5"]).status.code(), Some(2));
    assert_eq!(tica(&["run"]).status.code(), Some(2));
    assert_eq!(tica(&["run", "--trace", "/definitely/not/here.csv"]).status.code(), Some(3));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "garbage\nmore garbage\n").unwrap();
    assert_eq!(tica(&["run", "--trace", bad.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn audit_passes_every_invariant() {
    let o = tica(&["audit", "--synthetic", SMALL, "--policy", "adaptive"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in ["structure", "redundancy", "capacity", "conservation"] {
        assert!(text.contains(&format!("[PASS] {name}")), "{text}");
    }
}

#[test]
fn gen_trace_round_trips_through_stats() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let o = tica(&["gen-trace", "--synthetic", "requests=400,pages=100", "--seed", "5", "-o", path.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 400);
    let v = json(&tica(&["stats", "--trace", path.to_str().unwrap(), "--format", "jsonl"]));
    assert_eq!(v["total_requests"], 400);
    assert!(v["working_set_pages"].as_u64().unwrap() <= 100);
    assert!(Path::new(&path).exists());
}

#[test]
fn compare_arch_lists_every_pair() {
    let v = json(&tica(&["compare-arch"]));
    let rows = v["relative_latency"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let tica_row = rows.iter().find(|r| r["architecture"] == "tica").unwrap();
    assert_eq!(tica_row["read_hit"], 1.0);
    assert!(v["cost_usd"]["tica"].as_f64() < v["cost_usd"]["mirrored_wb"].as_f64());
}

#[test]
fn shipped_configs_run_and_audit_clean() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        seen += 1;
        let p = path.to_str().unwrap();
        let v = json(&tica(&["run", "--config", p]));
        if v["metrics"]["architecture"] == "tica" {
            let o = tica(&["audit", "--config", p]);
            assert!(o.status.success(), "{p}: {}", stdout(&o));
        }
    }
    assert!(seen >= 3);
}
