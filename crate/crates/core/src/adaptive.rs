//! Adaptive policy selection between endurance-friendly (EF) and
//! write-evicted-data (WED) operation.
//!
//! Two detectors run side by side over the per-page request stream:
//!
//! - [`CapacityWindow`] watches DRAM read hits and hits in the evicted
//!   queue. A high share of evicted-queue hits means DRAM is thrashing.
//! - [`SmbiState`] is a three-state machine that turns WED on while HDD
//!   reads and cache hits are both high, and backs off through a wait state
//!   when hits drop.
//!
//! Both detectors compare ratios (counts divided by the window or sample
//! size) against fractional thresholds and only change their output at
//! window boundaries. [`combine`] selects WED when either detector asks
//! for it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ef,
    Wed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub t_min: f64,
    pub t_max: f64,
    pub t_hdd: f64,
    pub t_read: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { t_min: 0.15, t_max: 0.25, t_hdd: 0.2, t_read: 0.2 }
    }
}

/// Which reading of the DRAM capacity rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityRule {
    /// High combined (DRAM + evicted-queue) hit ratio selects WED.
    #[default]
    AsPrinted,
    /// High DRAM hit ratio alone selects EF regardless of evicted-queue hits.
    Prose,
}

/// What the cache directory looked like for one page operation, sampled
/// before the operation mutates anything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessEvent {
    pub is_read: bool,
    pub hit_dram: bool,
    pub hit_eq: bool,
    /// Data present in DRAM, RO-SSD or WO-SSD. Evicted-queue membership
    /// alone is not a hit.
    pub hit_cache: bool,
}

impl AccessEvent {
    pub fn disk_read(&self) -> bool {
        self.is_read && !self.hit_cache
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityWindow {
    pub window_size: u64,
    pub request_counter: u64,
    pub eq_hit: u64,
    pub dram_read_hit: u64,
    pub mode: Mode,
    pub rule: CapacityRule,
}

impl CapacityWindow {
    pub fn new(window_size: u64, rule: CapacityRule) -> Self {
        assert!(window_size > 0, "window size must be positive");
        Self { window_size, request_counter: 0, eq_hit: 0, dram_read_hit: 0, mode: Mode::Ef, rule }
    }

    /// Count one event. Returns the decided mode when the window closes.
    pub fn observe(&mut self, ev: &AccessEvent, th: &Thresholds) -> Option<Mode> {
        self.request_counter += 1;
        if ev.is_read {
            if ev.hit_dram {
                self.dram_read_hit += 1;
            } else if ev.hit_eq {
                self.eq_hit += 1;
            }
        }
        if self.request_counter < self.window_size {
            return None;
        }
        let n = self.window_size as f64;
        let eq = self.eq_hit as f64 / n;
        let dram = self.dram_read_hit as f64 / n;
        self.mode = match self.rule {
            CapacityRule::AsPrinted => {
                if eq + dram > th.t_max || eq > th.t_min {
                    Mode::Wed
                } else {
                    Mode::Ef
                }
            }
            CapacityRule::Prose => {
                if dram > th.t_max {
                    Mode::Ef
                } else if eq > th.t_min {
                    Mode::Wed
                } else {
                    Mode::Ef
                }
            }
        };
        self.request_counter = 0;
        self.eq_hit = 0;
        self.dram_read_hit = 0;
        Some(self.mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmbiPhase {
    Initial,
    Wed,
    Wait,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmbiState {
    pub phase: SmbiPhase,
    pub counter: u64,
    pub steps: u64,
    pub sample_size: u64,
    pub disk_read: u64,
    pub read_hit: u64,
    pub request_counter: u64,
}

impl SmbiState {
    pub fn new(sample_size: u64, steps: u64) -> Self {
        assert!(sample_size > 0, "sample size must be positive");
        Self {
            phase: SmbiPhase::Initial,
            counter: steps,
            steps,
            sample_size,
            disk_read: 0,
            read_hit: 0,
            request_counter: 0,
        }
    }

    pub fn mode(&self) -> Mode {
        if self.phase == SmbiPhase::Wed {
            Mode::Wed
        } else {
            Mode::Ef
        }
    }

    /// Count one event. Returns the mode the machine switched to, if it
    /// issued a switch at this sample boundary.
    pub fn observe(&mut self, ev: &AccessEvent, th: &Thresholds) -> Option<Mode> {
        self.request_counter += 1;
        if ev.is_read {
            if ev.hit_cache {
                self.read_hit += 1;
            } else {
                self.disk_read += 1;
            }
        }
        if self.request_counter < self.sample_size {
            return None;
        }
        let n = self.sample_size as f64;
        let disk_high = self.disk_read as f64 / n > th.t_hdd;
        let hits_high = self.read_hit as f64 / n > th.t_read;
        let switched = match self.phase {
            SmbiPhase::Initial => {
                if disk_high {
                    self.counter = self.steps.saturating_sub(1);
                    self.phase = SmbiPhase::Wed;
                    Some(Mode::Wed)
                } else {
                    None
                }
            }
            SmbiPhase::Wed => {
                if disk_high {
                    if hits_high {
                        Some(Mode::Wed)
                    } else {
                        self.phase = SmbiPhase::Wait;
                        Some(Mode::Ef)
                    }
                } else if hits_high {
                    self.counter = self.steps;
                    self.phase = SmbiPhase::Initial;
                    Some(Mode::Ef)
                } else {
                    None
                }
            }
            SmbiPhase::Wait => {
                if self.counter == 0 || hits_high {
                    self.counter = self.steps;
                    self.phase = SmbiPhase::Initial;
                    Some(Mode::Ef)
                } else {
                    self.counter -= 1;
                    None
                }
            }
        };
        self.request_counter = 0;
        self.disk_read = 0;
        self.read_hit = 0;
        switched
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionSource {
    Capacity,
    Smbi,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PolicyDecision {
    pub mode: Mode,
    pub source: DecisionSource,
}

pub fn combine(capacity: Mode, smbi: Mode) -> PolicyDecision {
    match (capacity, smbi) {
        (Mode::Wed, _) => PolicyDecision { mode: Mode::Wed, source: DecisionSource::Capacity },
        (Mode::Ef, Mode::Wed) => PolicyDecision { mode: Mode::Wed, source: DecisionSource::Smbi },
        (Mode::Ef, Mode::Ef) => PolicyDecision { mode: Mode::Ef, source: DecisionSource::Default },
    }
}

/// Both detectors plus the combined decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptivePolicy {
    pub capacity: CapacityWindow,
    pub smbi: SmbiState,
    pub thresholds: Thresholds,
    pub decision: PolicyDecision,
}

impl AdaptivePolicy {
    pub fn new(window_size: u64, sample_size: u64, steps: u64, thresholds: Thresholds, rule: CapacityRule) -> Self {
        Self {
            capacity: CapacityWindow::new(window_size, rule),
            smbi: SmbiState::new(sample_size, steps),
            thresholds,
            decision: combine(Mode::Ef, Mode::Ef),
        }
    }

    pub fn observe(&mut self, ev: &AccessEvent) -> PolicyDecision {
        self.capacity.observe(ev, &self.thresholds);
        self.smbi.observe(ev, &self.thresholds);
        self.decision = combine(self.capacity.mode, self.smbi.mode());
        self.decision
    }
}
