//! Run statistics and derived metrics: cache write amplification, energy,
//! reliability, per-operation latency comparison and cost.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::devices::{DeviceModel, DeviceRole, DeviceState, Micros};
use crate::error::Error;

const HOURS_PER_YEAR: f64 = 365.0 * 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    #[default]
    Tica,
    MirroredWb,
    SingleSsd,
    Raid1Ro,
    Raid1Wo,
    Raid1Mixed,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::Tica,
        Architecture::MirroredWb,
        Architecture::SingleSsd,
        Architecture::Raid1Ro,
        Architecture::Raid1Wo,
        Architecture::Raid1Mixed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Tica => "tica",
            Architecture::MirroredWb => "mirrored_wb",
            Architecture::SingleSsd => "single_ssd",
            Architecture::Raid1Ro => "raid1_ro",
            Architecture::Raid1Wo => "raid1_wo",
            Architecture::Raid1Mixed => "raid1_mixed",
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }
}

/// Counters for one device instance at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceSnapshot {
    pub role: DeviceRole,
    /// Unique within a run, e.g. `wo_ssd` or `wo_ssd_b` for a mirror member.
    pub label: String,
    pub state: DeviceState,
}

/// Everything a finished run reports. All counts are page operations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub architecture: String,
    pub user_requests: u64,
    pub user_reads: u64,
    pub user_writes: u64,
    pub dram_hits: u64,
    pub ro_hits: u64,
    pub wo_hits: u64,
    pub hdd_reads: u64,
    pub latency_sum_us: f64,
    pub latency_count: u64,
    pub total_sim_us: Micros,
    pub devices: Vec<DeviceSnapshot>,
    /// Dirty-page time whose second copy was in DRAM.
    pub dram_exposure_us: f64,
    /// Dirty-page time whose second copy was on the RO-SSD.
    pub ro_exposure_us: f64,
    pub policy_switches: u64,
    pub wed_page_ops: u64,
    pub dram_evictions: u64,
    pub ssd_evictions: u64,
    pub page_size_bytes: u64,
}

impl RunStats {
    pub fn device(&self, label: &str) -> Option<&DeviceSnapshot> {
        self.devices.iter().find(|d| d.label == label)
    }

    pub fn devices_with_role(&self, role: DeviceRole) -> impl Iterator<Item = &DeviceSnapshot> {
        self.devices.iter().filter(move |d| d.role == role)
    }

    pub fn cache_devices(&self) -> impl Iterator<Item = &DeviceSnapshot> {
        self.devices.iter().filter(|d| d.role != DeviceRole::Hdd)
    }

    pub fn ssd_devices(&self) -> impl Iterator<Item = &DeviceSnapshot> {
        self.devices.iter().filter(|d| matches!(d.role, DeviceRole::RoSsd | DeviceRole::WoSsd))
    }

    pub fn ssd_writes(&self) -> u64 {
        self.ssd_devices().map(|d| d.state.writes).sum()
    }

    pub fn cache_hits(&self) -> u64 {
        self.dram_hits + self.ro_hits + self.wo_hits
    }

    /// Read hits over read page operations; `None` without reads.
    pub fn hit_ratio(&self) -> Option<f64> {
        (self.user_reads > 0).then(|| self.cache_hits() as f64 / self.user_reads as f64)
    }

    pub fn mean_latency_us(&self) -> Option<f64> {
        (self.latency_count > 0).then(|| self.latency_sum_us / self.latency_count as f64)
    }

    /// Activity after `earlier`, a snapshot of the same run. Devices are
    /// matched by position.
    pub fn since(&self, earlier: &RunStats) -> RunStats {
        RunStats {
            architecture: self.architecture.clone(),
            user_requests: self.user_requests - earlier.user_requests,
            user_reads: self.user_reads - earlier.user_reads,
            user_writes: self.user_writes - earlier.user_writes,
            dram_hits: self.dram_hits - earlier.dram_hits,
            ro_hits: self.ro_hits - earlier.ro_hits,
            wo_hits: self.wo_hits - earlier.wo_hits,
            hdd_reads: self.hdd_reads - earlier.hdd_reads,
            latency_sum_us: self.latency_sum_us - earlier.latency_sum_us,
            latency_count: self.latency_count - earlier.latency_count,
            total_sim_us: self.total_sim_us - earlier.total_sim_us,
            devices: self
                .devices
                .iter()
                .zip(&earlier.devices)
                .map(|(now, then)| DeviceSnapshot {
                    role: now.role,
                    label: now.label.clone(),
                    state: now.state.since(&then.state),
                })
                .collect(),
            dram_exposure_us: self.dram_exposure_us - earlier.dram_exposure_us,
            ro_exposure_us: self.ro_exposure_us - earlier.ro_exposure_us,
            policy_switches: self.policy_switches - earlier.policy_switches,
            wed_page_ops: self.wed_page_ops - earlier.wed_page_ops,
            dram_evictions: self.dram_evictions - earlier.dram_evictions,
            ssd_evictions: self.ssd_evictions - earlier.ssd_evictions,
            page_size_bytes: self.page_size_bytes,
        }
    }
}

/// SSD page writes per user write page operation.
pub fn cwaf(stats: &RunStats) -> Option<f64> {
    (stats.user_writes > 0).then(|| stats.ssd_writes() as f64 / stats.user_writes as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyFormula {
    /// Each device's idle time is charged at its own idle power.
    #[default]
    Standard,
    /// DRAM idle time charged at the RO-SSD idle power.
    Verbatim,
}

fn device_energy_uj(state: &DeviceState, idle_us: f64, idle_power_w: f64) -> f64 {
    let m = &state.model;
    state.reads as f64 * m.read_latency_us * m.read_power_w
        + state.writes as f64 * m.write_latency_us * m.write_power_w
        + idle_us * idle_power_w
}

/// Energy in joules of the cache devices (DRAM and SSDs) over the run.
pub fn energy(stats: &RunStats, formula: EnergyFormula) -> Result<f64, Error> {
    let ro_idle = stats.devices_with_role(DeviceRole::RoSsd).next().map(|d| d.state.model.idle_power_w);
    let mut total_uj = 0.0;
    for d in stats.cache_devices() {
        let idle = d.state.idle_time(stats.total_sim_us)?;
        let ip = match (formula, d.role, ro_idle) {
            (EnergyFormula::Verbatim, DeviceRole::Dram, Some(ip)) => ip,
            _ => d.state.model.idle_power_w,
        };
        total_uj += device_energy_uj(&d.state, idle, ip);
    }
    Ok(total_uj * 1e-6)
}

/// Energy spent in idle power only over `duration_us` for the given models.
pub fn idle_floor_j(models: &[&DeviceModel], duration_us: f64) -> f64 {
    models.iter().map(|m| m.idle_power_w * duration_us).sum::<f64>() * 1e-6
}

/// One-year survival probability of a device with exponential failures.
pub fn device_reliability(mttf_hours: f64) -> f64 {
    (-1.0 / (mttf_hours * HOURS_PER_YEAR)).exp()
}

/// `1 - device_reliability`, computed without cancellation.
pub fn device_unreliability(mttf_hours: f64) -> f64 {
    -(-1.0 / (mttf_hours * HOURS_PER_YEAR)).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reliability {
    pub alpha: f64,
    pub r_tica: f64,
    pub u_tica: f64,
    pub r_mirrored: f64,
    pub u_mirrored: f64,
}

/// Data-loss model of the three-level cache against a pair of mirrored
/// WO-SSDs. Data is lost when the WO-SSD fails together with the device
/// holding the second copy: DRAM for a fraction `alpha` of the time, the
/// RO-SSD otherwise.
pub fn reliability(dram: &DeviceModel, ro: &DeviceModel, wo: &DeviceModel, alpha: f64) -> Result<Reliability, Error> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    let (u_d, u_ro, u_wo) =
        (device_unreliability(dram.mttf_hours), device_unreliability(ro.mttf_hours), device_unreliability(wo.mttf_hours));
    let u_tica = u_wo * (alpha * u_d + (1.0 - alpha) * u_ro);
    let u_mirrored = u_wo * u_wo;
    Ok(Reliability { alpha, r_tica: 1.0 - u_tica, u_tica, r_mirrored: 1.0 - u_mirrored, u_mirrored })
}

/// Unreliability of a set of devices that all have to fail to lose data.
pub fn mirrored_unreliability(members: &[&DeviceModel]) -> f64 {
    members.iter().map(|m| device_unreliability(m.mttf_hours)).product()
}

/// Share of dirty-page exposure time whose second copy was in DRAM.
pub fn alpha_estimate(stats: &RunStats) -> f64 {
    let total = stats.dram_exposure_us + stats.ro_exposure_us;
    if total > 0.0 {
        (stats.dram_exposure_us / total).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Critical-path latency of each cache operation, normalized to the
/// RO-SSD read latency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperationLatencies {
    pub architecture: String,
    pub read_hit: f64,
    pub write: f64,
    pub read_miss_fill: f64,
    pub write_back: f64,
}

/// Mirrored pairs write both members and read the faster one. The
/// three-level design reads from the RO-SSD and writes to the WO-SSD.
pub fn compare_architectures(ro: &DeviceModel, wo: &DeviceModel) -> Vec<OperationLatencies> {
    let base = ro.read_latency_us;
    let pair = |name: &str, a: &DeviceModel, b: &DeviceModel| {
        let read = a.read_latency_us.min(b.read_latency_us);
        let write = a.write_latency_us.max(b.write_latency_us);
        OperationLatencies {
            architecture: name.into(),
            read_hit: read / base,
            write: write / base,
            read_miss_fill: write / base,
            write_back: read / base,
        }
    };
    vec![
        pair("raid1_ro", ro, ro),
        pair("raid1_wo", wo, wo),
        pair("raid1_mixed", ro, wo),
        OperationLatencies {
            architecture: "tica".into(),
            read_hit: ro.read_latency_us / base,
            write: wo.write_latency_us / base,
            read_miss_fill: wo.write_latency_us / base,
            write_back: ro.read_latency_us / base,
        },
    ]
}

/// Purchase cost of the given devices at their configured capacities.
pub fn cost_usd(models: &[&DeviceModel], page_size_bytes: u64) -> f64 {
    models.iter().map(|m| m.capacity_gb(page_size_bytes) * m.cost_per_gb_usd).sum()
}

/// Source of the `alpha` used in the reliability figures.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum AlphaSource {
    #[default]
    Measured,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub architecture: String,
    pub user_requests: u64,
    pub user_reads: u64,
    pub user_writes: u64,
    pub hit_ratio: Option<f64>,
    pub dram_hits: u64,
    pub ro_ssd_hits: u64,
    pub wo_ssd_hits: u64,
    pub hdd_reads: u64,
    pub mean_latency_us: Option<f64>,
    pub total_sim_us: f64,
    pub cwaf: Option<f64>,
    pub energy_j: f64,
    pub ssd_writes: BTreeMap<String, u64>,
    pub ssd_writes_total: u64,
    pub ssd_trims: BTreeMap<String, u64>,
    pub endurance_fraction: BTreeMap<String, f64>,
    pub alpha: f64,
    pub reliability: f64,
    pub unreliability: f64,
    pub cost_usd: f64,
    pub policy_switches: u64,
}

impl MetricReport {
    pub fn from_stats(
        stats: &RunStats,
        arch: Architecture,
        alpha: AlphaSource,
        formula: EnergyFormula,
    ) -> Result<Self, Error> {
        let alpha = match alpha {
            AlphaSource::Measured => alpha_estimate(stats),
            AlphaSource::Fixed(a) => a,
        };
        let model = |role| stats.devices_with_role(role).next().map(|d| &d.state.model);
        let unreliability = match arch {
            Architecture::Tica => {
                let (Some(d), Some(ro), Some(wo)) =
                    (model(DeviceRole::Dram), model(DeviceRole::RoSsd), model(DeviceRole::WoSsd))
                else {
                    return Err(Error::Accounting("three-level run is missing a device".into()));
                };
                reliability(d, ro, wo, alpha)?.u_tica
            }
            _ => {
                let members: Vec<&DeviceModel> = stats.ssd_devices().map(|d| &d.state.model).collect();
                mirrored_unreliability(&members)
            }
        };
        let ssd = || stats.ssd_devices();
        let cache_models: Vec<&DeviceModel> = stats.cache_devices().map(|d| &d.state.model).collect();
        Ok(Self {
            architecture: arch.as_str().into(),
            user_requests: stats.user_requests,
            user_reads: stats.user_reads,
            user_writes: stats.user_writes,
            hit_ratio: stats.hit_ratio(),
            dram_hits: stats.dram_hits,
            ro_ssd_hits: stats.ro_hits,
            wo_ssd_hits: stats.wo_hits,
            hdd_reads: stats.hdd_reads,
            mean_latency_us: stats.mean_latency_us(),
            total_sim_us: stats.total_sim_us,
            cwaf: cwaf(stats),
            energy_j: energy(stats, formula)?,
            ssd_writes: ssd().map(|d| (d.label.clone(), d.state.writes)).collect(),
            ssd_writes_total: stats.ssd_writes(),
            ssd_trims: ssd().map(|d| (d.label.clone(), d.state.trims)).collect(),
            endurance_fraction: ssd()
                .filter_map(|d| Some((d.label.clone(), d.state.endurance_consumed(stats.page_size_bytes)?)))
                .collect(),
            alpha,
            reliability: 1.0 - unreliability,
            unreliability,
            cost_usd: cost_usd(&cache_models, stats.page_size_bytes),
            policy_switches: stats.policy_switches,
        })
    }
}
