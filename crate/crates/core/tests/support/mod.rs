#![allow(dead_code)]

pub mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tica::analytics::RunStats;
use tica::cache::{ClockMode, Policy, TicaConfig};
use tica::devices::DeviceRole;
use tica::trace::{Op, Request};

use oracle::{OracleConfig, OraclePolicy};

/// One randomized scenario: tiny caches and a short trace.
#[derive(Debug, Clone)]
pub struct Case {
    pub seed: u64,
    pub oracle: OracleConfig,
    pub trace: Vec<Request>,
}

impl Case {
    pub fn engine_config(&self) -> TicaConfig {
        let o = &self.oracle;
        let mut cfg = TicaConfig::with_capacities(o.dram_pages as u64 + 4, o.ro_pages as u64 + 4, o.wo_pages as u64 + 4);
        cfg.policy = match o.policy {
            OraclePolicy::Ef => Policy::Ef,
            OraclePolicy::Wed => Policy::Wed,
            OraclePolicy::Adaptive => Policy::Adaptive,
        };
        cfg.clock = if o.open_clock { ClockMode::Open } else { ClockMode::Closed };
        cfg
    }
}

pub fn random_case(seed: u64, max_len: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dram_pages = rng.gen_range(2..=32);
    let wo_pages = rng.gen_range(1..=128);
    let ro_pages = if rng.gen_bool(0.5) { wo_pages } else { rng.gen_range(wo_pages..=128) };
    let policy = match rng.gen_range(0..3) {
        0 => OraclePolicy::Ef,
        1 => OraclePolicy::Wed,
        _ => OraclePolicy::Adaptive,
    };
    let open_clock = rng.gen_bool(0.25);
    let len = rng.gen_range(1..=max_len);
    let universe = rng.gen_range(1..=3 * (ro_pages + dram_pages) as u64);
    let hot = (universe / 8).max(1);
    let read_fraction: f64 = rng.gen();
    let mut arrival = 0u64;
    let mut trace = Vec::with_capacity(len);
    for _ in 0..len {
        arrival += rng.gen_range(0..2_000);
        let lba = if rng.gen_bool(0.6) { rng.gen_range(0..hot) } else { rng.gen_range(0..universe) };
        let pages = if rng.gen_bool(0.1) { rng.gen_range(1..=3) } else { 1 };
        let op = if rng.gen_bool(read_fraction) { Op::Read } else { Op::Write };
        trace.push(Request { arrival_us: arrival, lba, pages, op });
    }
    Case { seed, oracle: OracleConfig { dram_pages, ro_pages, wo_pages, policy, open_clock }, trace }
}

/// Energy recomputed from the per-access device logs: every logged access
/// at its own power, the rest of the run at idle power.
pub fn energy_from_logs(
    logs: &[(DeviceRole, Vec<tica::devices::AccessRecord>, tica::devices::DeviceModel)],
    total_us: f64,
) -> f64 {
    let mut joules = 0.0;
    for (role, log, model) in logs {
        if *role == DeviceRole::Hdd {
            continue;
        }
        let mut busy = 0.0;
        for rec in log {
            let power = match rec.op {
                Op::Read => model.read_power_w,
                Op::Write => model.write_power_w,
            };
            joules += rec.service_us * power * 1e-6;
            busy += rec.service_us;
        }
        joules += (total_us - busy).max(0.0) * model.idle_power_w * 1e-6;
    }
    joules
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn verdict(name: &str, pass: bool, detail: impl std::fmt::Display) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
}

pub fn wo_writes(stats: &RunStats) -> u64 {
    stats.device("wo_ssd").map(|d| d.state.writes).unwrap_or(0)
}
