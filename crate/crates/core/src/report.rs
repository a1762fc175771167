//! JSON and CSV serialization of metric reports.
//!
//! Floats are rounded to 12 significant digits so that reports are stable
//! across platforms and easy to diff. JSON object keys come out sorted.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::analytics::MetricReport;
use crate::error::Error;

pub const SCHEMA_VERSION: u32 = 1;

/// Round to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serialize anything to a value with floats rounded.
pub fn to_rounded_value<T: Serialize>(doc: &T) -> Result<Value, Error> {
    let mut v = serde_json::to_value(doc).map_err(|e| Error::Accounting(format!("report serialization: {e}")))?;
    round_value(&mut v);
    Ok(v)
}

/// Full single-run document.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub config: Value,
    pub metrics: MetricReport,
    pub devices: Value,
}

pub fn to_json<T: Serialize>(doc: &T) -> Result<String, Error> {
    let v = to_rounded_value(doc)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Accounting(format!("report serialization: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub const CSV_COLUMNS: [&str; 22] = [
    "index",
    "label",
    "architecture",
    "user_requests",
    "user_reads",
    "user_writes",
    "hit_ratio",
    "dram_hits",
    "ro_ssd_hits",
    "wo_ssd_hits",
    "hdd_reads",
    "mean_latency_us",
    "total_sim_us",
    "cwaf",
    "energy_j",
    "ssd_writes_total",
    "alpha",
    "reliability",
    "unreliability",
    "cost_usd",
    "policy_switches",
    "error",
];

fn f(x: f64) -> String {
    round_sig(x).to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

/// One CSV record per run; failed runs keep their index and label and
/// carry the error message.
pub fn csv_record(index: usize, label: &str, result: &Result<MetricReport, String>) -> Vec<String> {
    let mut row = vec![index.to_string(), label.to_string()];
    match result {
        Ok(m) => {
            row.extend([
                m.architecture.clone(),
                m.user_requests.to_string(),
                m.user_reads.to_string(),
                m.user_writes.to_string(),
                opt(m.hit_ratio),
                m.dram_hits.to_string(),
                m.ro_ssd_hits.to_string(),
                m.wo_ssd_hits.to_string(),
                m.hdd_reads.to_string(),
                opt(m.mean_latency_us),
                f(m.total_sim_us),
                opt(m.cwaf),
                f(m.energy_j),
                m.ssd_writes_total.to_string(),
                f(m.alpha),
                f(m.reliability),
                f(m.unreliability),
                f(m.cost_usd),
                m.policy_switches.to_string(),
                String::new(),
            ]);
        }
        Err(e) => {
            row.extend(std::iter::repeat_n(String::new(), CSV_COLUMNS.len() - 3));
            row.push(e.clone());
        }
    }
    row
}

pub fn write_csv<W: Write>(out: W, rows: &[(usize, String, Result<MetricReport, String>)]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for (i, label, res) in rows {
        w.write_record(csv_record(*i, label, res)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
