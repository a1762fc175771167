//! Device models: DRAM, read-optimized SSD, write-optimized SSD and HDD.
//!
//! Every device is a single serial channel. An access starts when both the
//! request has been issued and the previous access on the device has
//! finished, and occupies the device for `pages * latency`.
//!
//! Power, MTTF, cost and endurance defaults come from published device
//! datasheet figures. Latencies are illustrative: they only preserve the
//! orderings the cache design relies on (RO read <= WO read, WO write much
//! faster than RO write, HDD much slower than either SSD). Note that the
//! default RO-SSD and WO-SSD MTTFs are equal (2M hours) even though
//! read-optimized parts are usually described as the less reliable of the
//! two; override `mttf_hours` to model that.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::trace::Op;

/// Simulation time in microseconds.
pub type Micros = f64;

const GIB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceRole {
    Dram,
    RoSsd,
    WoSsd,
    Hdd,
}

impl DeviceRole {
    pub const ALL: [DeviceRole; 4] = [DeviceRole::Dram, DeviceRole::RoSsd, DeviceRole::WoSsd, DeviceRole::Hdd];

    pub fn as_str(self) -> &'static str {
        match self {
            DeviceRole::Dram => "dram",
            DeviceRole::RoSsd => "ro_ssd",
            DeviceRole::WoSsd => "wo_ssd",
            DeviceRole::Hdd => "hdd",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModel {
    pub name: String,
    pub capacity_pages: u64,
    pub read_latency_us: f64,
    pub write_latency_us: f64,
    pub read_power_w: f64,
    pub write_power_w: f64,
    pub idle_power_w: f64,
    pub mttf_hours: f64,
    pub cost_per_gb_usd: f64,
    /// Rated full-device writes per GB of capacity; `None` is unlimited.
    pub endurance_writes_per_gb: Option<f64>,
}

impl DeviceModel {
    pub fn default_for(role: DeviceRole) -> Self {
        match role {
            DeviceRole::Dram => Self {
                name: "DRAM".into(),
                capacity_pages: 1024,
                read_latency_us: 1.0,
                write_latency_us: 1.0,
                read_power_w: 4.0,
                write_power_w: 4.0,
                idle_power_w: 4.0,
                mttf_hours: 4.0e6,
                cost_per_gb_usd: 7.875,
                endurance_writes_per_gb: None,
            },
            DeviceRole::RoSsd => Self {
                name: "RO-SSD".into(),
                capacity_pages: 16384,
                read_latency_us: 90.0,
                write_latency_us: 900.0,
                read_power_w: 3.3,
                write_power_w: 3.4,
                idle_power_w: 0.07,
                mttf_hours: 2.0e6,
                cost_per_gb_usd: 0.74,
                endurance_writes_per_gb: Some(1171.0),
            },
            DeviceRole::WoSsd => Self {
                name: "WO-SSD".into(),
                capacity_pages: 16384,
                read_latency_us: 110.0,
                write_latency_us: 90.0,
                read_power_w: 2.4,
                write_power_w: 3.1,
                idle_power_w: 1.3,
                mttf_hours: 2.0e6,
                cost_per_gb_usd: 0.842,
                endurance_writes_per_gb: Some(6416.0),
            },
            DeviceRole::Hdd => Self {
                name: "HDD".into(),
                capacity_pages: u64::MAX / 2,
                read_latency_us: 5000.0,
                write_latency_us: 5000.0,
                read_power_w: 0.0,
                write_power_w: 0.0,
                idle_power_w: 0.0,
                mttf_hours: 1.2e6,
                cost_per_gb_usd: 0.03,
                endurance_writes_per_gb: None,
            },
        }
    }

    pub fn with_capacity(mut self, capacity_pages: u64) -> Self {
        self.capacity_pages = capacity_pages;
        self
    }

    pub fn latency(&self, op: Op) -> f64 {
        match op {
            Op::Read => self.read_latency_us,
            Op::Write => self.write_latency_us,
        }
    }

    pub fn power(&self, op: Op) -> f64 {
        match op {
            Op::Read => self.read_power_w,
            Op::Write => self.write_power_w,
        }
    }

    pub fn capacity_gb(&self, page_size: u64) -> f64 {
        self.capacity_pages as f64 * page_size as f64 / GIB
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |what: &str| Err(Error::Config(format!("device {}: {what}", self.name)));
        if !(self.read_latency_us > 0.0 && self.read_latency_us.is_finite()) {
            return bad("read_latency_us must be > 0");
        }
        if !(self.write_latency_us > 0.0 && self.write_latency_us.is_finite()) {
            return bad("write_latency_us must be > 0");
        }
        for (p, n) in [
            (self.read_power_w, "read_power_w"),
            (self.write_power_w, "write_power_w"),
            (self.idle_power_w, "idle_power_w"),
        ] {
            if !(p >= 0.0 && p.is_finite()) {
                return bad(&format!("{n} must be >= 0"));
            }
        }
        if !(self.mttf_hours > 0.0) {
            return bad("mttf_hours must be > 0");
        }
        if self.capacity_pages == 0 {
            return bad("capacity_pages must be >= 1");
        }
        if let Some(e) = self.endurance_writes_per_gb {
            if !(e > 0.0) {
                return bad("endurance_writes_per_gb must be > 0");
            }
        }
        Ok(())
    }
}

/// One serviced access, recorded when logging is enabled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessRecord {
    pub op: Op,
    pub pages: u64,
    pub issued_us: Micros,
    pub completion_us: Micros,
    pub service_us: Micros,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceState {
    pub model: DeviceModel,
    pub reads: u64,
    pub writes: u64,
    pub busy_us: Micros,
    pub last_release_us: Micros,
    pub trims: u64,
    #[serde(skip)]
    log: Option<Vec<AccessRecord>>,
}

impl DeviceState {
    pub fn new(model: DeviceModel) -> Self {
        Self { model, reads: 0, writes: 0, busy_us: 0.0, last_release_us: 0.0, trims: 0, log: None }
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log(&self) -> &[AccessRecord] {
        self.log.as_deref().unwrap_or(&[])
    }

    /// Service `pages` pages starting no earlier than `start_us`; returns the
    /// completion time.
    pub fn access(&mut self, op: Op, pages: u64, start_us: Micros) -> Micros {
        debug_assert!(pages >= 1);
        let service = pages as f64 * self.model.latency(op);
        let begin = start_us.max(self.last_release_us);
        let completion = begin + service;
        self.busy_us += service;
        self.last_release_us = completion;
        match op {
            Op::Read => self.reads += pages,
            Op::Write => self.writes += pages,
        }
        if let Some(log) = &mut self.log {
            log.push(AccessRecord { op, pages, issued_us: start_us, completion_us: completion, service_us: service });
        }
        completion
    }

    pub fn trim(&mut self) {
        self.trims += 1;
    }

    pub fn idle_time(&self, total_sim_us: Micros) -> Result<Micros, Error> {
        // Sums of per-access service times can exceed the span by rounding.
        let idle = total_sim_us - self.busy_us;
        if idle < -1e-9 * total_sim_us.max(1.0) {
            return Err(Error::Accounting(format!(
                "{}: busy {} us exceeds simulated time {} us",
                self.model.name, self.busy_us, total_sim_us
            )));
        }
        Ok(idle.max(0.0))
    }

    /// Fraction of rated write endurance consumed; `None` for devices with
    /// unlimited endurance. May exceed 1.
    pub fn endurance_consumed(&self, page_size_bytes: u64) -> Option<f64> {
        let rated = self.model.endurance_writes_per_gb?;
        let written_gb = self.writes as f64 * page_size_bytes as f64 / GIB;
        Some(written_gb / (rated * self.model.capacity_gb(page_size_bytes)))
    }

    /// Counter difference against an earlier snapshot of the same device.
    pub fn since(&self, earlier: &DeviceState) -> DeviceState {
        DeviceState {
            model: self.model.clone(),
            reads: self.reads - earlier.reads,
            writes: self.writes - earlier.writes,
            busy_us: self.busy_us - earlier.busy_us,
            last_release_us: self.last_release_us,
            trims: self.trims - earlier.trims,
            log: None,
        }
    }

    pub fn snapshot(&self) -> DeviceState {
        DeviceState { log: None, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dev(read: f64, write: f64) -> DeviceState {
        let mut m = DeviceModel::default_for(DeviceRole::WoSsd);
        m.read_latency_us = read;
        m.write_latency_us = write;
        DeviceState::new(m)
    }

    #[test]
    fn idle_device_single_read() {
        let mut d = dev(100.0, 50.0);
        assert_eq!(d.access(Op::Read, 1, 0.0), 100.0);
        assert_eq!(d.busy_us, 100.0);
        assert_eq!(d.reads, 1);
    }

    #[test]
    fn back_to_back_writes_serialize() {
        let mut d = dev(100.0, 50.0);
        d.access(Op::Write, 1, 0.0);
        assert_eq!(d.access(Op::Write, 1, 0.0), 100.0);
        assert_eq!(d.writes, 2);
    }

    #[test]
    fn multi_page_access_counts_pages() {
        let mut d = dev(10.0, 20.0);
        assert_eq!(d.access(Op::Write, 3, 5.0), 65.0);
        assert_eq!(d.writes, 3);
    }

    #[test]
    fn busy_time_matches_replay_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut d = dev(7.5, 31.0);
        let mut oracle_busy = 0.0;
        let mut oracle_free = 0.0f64;
        let mut t = 0.0;
        for _ in 0..1000 {
            t += rng.gen_range(0.0..40.0);
            let op = if rng.gen_bool(0.5) { Op::Read } else { Op::Write };
            let pages = rng.gen_range(1..4);
            let service = pages as f64 * if op == Op::Read { 7.5 } else { 31.0 };
            let expected = oracle_free.max(t) + service;
            oracle_free = expected;
            oracle_busy += service;
            assert_eq!(d.access(op, pages, t), expected);
        }
        assert!((d.busy_us - oracle_busy).abs() < 1e-9);
    }

    #[test]
    fn idle_time_cases() {
        let d = dev(1.0, 1.0);
        assert_eq!(d.idle_time(1000.0).unwrap(), 1000.0);
        let mut d = dev(400.0, 1.0);
        d.access(Op::Read, 1, 0.0);
        assert_eq!(d.idle_time(1000.0).unwrap(), 600.0);
        assert!(matches!(d.idle_time(100.0), Err(Error::Accounting(_))));
    }

    #[test]
    fn endurance_fraction() {
        let mut d = DeviceState::new(DeviceModel::default_for(DeviceRole::RoSsd).with_capacity(4));
        assert_eq!(d.endurance_consumed(4096), Some(0.0));
        // Rated total = 1171 writes/GB * capacity = 1171 * 4 pages.
        for _ in 0..1171 * 4 {
            d.access(Op::Write, 1, 0.0);
        }
        let f = d.endurance_consumed(4096).unwrap();
        assert!((f - 1.0).abs() < 1e-12, "{f}");
        let dram = DeviceState::new(DeviceModel::default_for(DeviceRole::Dram));
        assert_eq!(dram.endurance_consumed(4096), None);
    }

    #[test]
    fn default_table_values() {
        let dram = DeviceModel::default_for(DeviceRole::Dram);
        assert_eq!((dram.mttf_hours, dram.cost_per_gb_usd), (4.0e6, 7.875));
        assert_eq!((dram.read_power_w, dram.write_power_w, dram.idle_power_w), (4.0, 4.0, 4.0));
        let ro = DeviceModel::default_for(DeviceRole::RoSsd);
        assert_eq!((ro.mttf_hours, ro.cost_per_gb_usd, ro.endurance_writes_per_gb), (2.0e6, 0.74, Some(1171.0)));
        assert_eq!((ro.read_power_w, ro.write_power_w, ro.idle_power_w), (3.3, 3.4, 0.07));
        let wo = DeviceModel::default_for(DeviceRole::WoSsd);
        assert_eq!((wo.mttf_hours, wo.cost_per_gb_usd, wo.endurance_writes_per_gb), (2.0e6, 0.842, Some(6416.0)));
        assert_eq!((wo.read_power_w, wo.write_power_w, wo.idle_power_w), (2.4, 3.1, 1.3));
        for role in DeviceRole::ALL {
            DeviceModel::default_for(role).validate().unwrap();
        }
    }

    #[test]
    fn validation_rejects_zero_latency() {
        let mut m = DeviceModel::default_for(DeviceRole::Dram);
        m.read_latency_us = 0.0;
        assert!(m.validate().is_err());
    }
}
