//! The three-level cache engine.
//!
//! ## Data flow
//!
//! - Writes go to the DRAM write partition and the WO-SSD in parallel and
//!   are acknowledged when both finish. A background copy to the RO-SSD is
//!   then issued; when it completes the DRAM slot is released.
//! - Reads look up DRAM, then RO-SSD, then WO-SSD. Misses are read from the
//!   HDD into the DRAM read partition.
//! - Pages evicted from the DRAM read partition enter the evicted queue. In
//!   WED mode they are also copied to the WO-SSD.
//! - When the WO-SSD is full its LRU page is dropped from both SSDs, after
//!   a write-back to the HDD if it is dirty.
//!
//! A page stays dirty until written back to the HDD, so every dirty page
//! lives on the WO-SSD plus either DRAM (before its flush completes) or the
//! RO-SSD (after).
//!
//! The engine is single-threaded and deterministic. The background flusher
//! is a queue of device-timeline completions, advanced whenever the clock
//! moves.

mod directory;
mod flush;
mod partition;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use directory::{CacheDirectory, CopyLocation, DirtyPageRecovery, Level, Lookup, RecoverabilityReport};
pub use flush::{FlushEntry, FlushQueue};
pub use partition::DramPartition;

use crate::adaptive::{AccessEvent, AdaptivePolicy, CapacityRule, Mode, Thresholds};
use crate::analytics::{DeviceSnapshot, RunStats};
use crate::devices::{DeviceModel, DeviceRole, DeviceState, Micros};
use crate::error::Error;
use crate::trace::{Op, Page, Request};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Ef,
    Wed,
    Adaptive,
}

/// How request issue times are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    /// Each request issues when the previous one completes.
    #[default]
    Closed,
    /// Requests issue at their trace arrival times.
    Open,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TicaConfig {
    pub dram: DeviceModel,
    pub ro_ssd: DeviceModel,
    pub wo_ssd: DeviceModel,
    pub hdd: DeviceModel,
    pub policy: Policy,
    pub thresholds: Thresholds,
    pub capacity_rule: CapacityRule,
    /// SMBI sample size; defaults to the capacity window (2x DRAM pages).
    pub sample_size: Option<u64>,
    pub steps: u64,
    pub def_write_fraction: f64,
    pub min_read_fraction: f64,
    /// Pages per cache device held back for internal use.
    pub reserve_pages: u64,
    /// Evicted-queue length; defaults to the baseline read partition size.
    pub eq_capacity: Option<usize>,
    pub clock: ClockMode,
    pub page_size_bytes: u64,
}

impl TicaConfig {
    /// Default device models with the given raw capacities (reserve included).
    pub fn with_capacities(dram_pages: u64, ro_pages: u64, wo_pages: u64) -> Self {
        Self {
            dram: DeviceModel::default_for(DeviceRole::Dram).with_capacity(dram_pages),
            ro_ssd: DeviceModel::default_for(DeviceRole::RoSsd).with_capacity(ro_pages),
            wo_ssd: DeviceModel::default_for(DeviceRole::WoSsd).with_capacity(wo_pages),
            hdd: DeviceModel::default_for(DeviceRole::Hdd),
            policy: Policy::Ef,
            thresholds: Thresholds::default(),
            capacity_rule: CapacityRule::AsPrinted,
            sample_size: None,
            steps: 4,
            def_write_fraction: 0.2,
            min_read_fraction: 0.1,
            reserve_pages: 4,
            eq_capacity: None,
            clock: ClockMode::Closed,
            page_size_bytes: crate::trace::DEFAULT_PAGE_SIZE,
        }
    }

    pub fn with_policy(mut self, policy: Policy) -> Self {
        self.policy = policy;
        self
    }

    pub fn usable(&self, model: &DeviceModel) -> u64 {
        model.capacity_pages.saturating_sub(self.reserve_pages)
    }

    pub fn validate(&self) -> Result<(), Error> {
        for m in [&self.dram, &self.ro_ssd, &self.wo_ssd, &self.hdd] {
            m.validate()?;
        }
        if self.usable(&self.dram) < 2 {
            return Err(Error::Config(format!(
                "DRAM needs at least 2 usable pages beyond the {}-page reserve",
                self.reserve_pages
            )));
        }
        if self.usable(&self.wo_ssd) < 1 {
            return Err(Error::Config("WO-SSD has no usable pages beyond the reserve".into()));
        }
        if self.usable(&self.ro_ssd) < self.usable(&self.wo_ssd) {
            return Err(Error::Config("RO-SSD must be at least as large as the WO-SSD".into()));
        }
        let th = &self.thresholds;
        for (v, n) in [(th.t_min, "t_min"), (th.t_max, "t_max"), (th.t_hdd, "t_hdd"), (th.t_read, "t_read")] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("threshold {n}={v} outside [0, 1]")));
            }
        }
        if !(self.def_write_fraction > 0.0 && self.min_read_fraction >= 0.0)
            || self.def_write_fraction + self.min_read_fraction > 1.0
        {
            return Err(Error::Config("DRAM partition fractions must be positive and sum to <= 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.sample_size == Some(0) {
            return Err(Error::Config("sample_size must be >= 1".into()));
        }
        if self.page_size_bytes == 0 {
            return Err(Error::Config("page_size_bytes must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ServedBy {
    DramHit,
    RoSsdHit,
    WoSsdHit,
    HddMiss,
    WriteBuffered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EvictionKind {
    /// Dropped from the DRAM read partition (id kept in the evicted queue).
    DramDiscard,
    /// Dropped from the DRAM read partition and copied to the WO-SSD.
    DramToWoSsd,
    /// Clean page dropped from both SSDs.
    SsdDiscard,
    /// Dirty page written back to the HDD and dropped from both SSDs.
    SsdWriteBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Eviction {
    pub page: Page,
    pub kind: EvictionKind,
}

/// Outcome of one page operation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestResult {
    pub page: Page,
    pub op: Op,
    pub issued_us: Micros,
    pub completion_us: Micros,
    pub latency_us: Micros,
    pub served_by: ServedBy,
    pub mode: Mode,
    pub evictions: Vec<Eviction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub issued_us: Micros,
    pub completion_us: Micros,
    pub pages: Vec<RequestResult>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Exposure {
    Dram(Micros),
    Ro(Micros),
}

#[derive(Debug, Clone, Default)]
struct Counters {
    user_requests: u64,
    user_reads: u64,
    user_writes: u64,
    dram_hits: u64,
    ro_hits: u64,
    wo_hits: u64,
    hdd_reads: u64,
    latency_sum_us: f64,
    latency_count: u64,
    dram_exposure_us: f64,
    ro_exposure_us: f64,
    policy_switches: u64,
    wed_page_ops: u64,
    dram_evictions: u64,
    ssd_evictions: u64,
}

enum PolicyState {
    Fixed(Mode),
    Adaptive(Box<AdaptivePolicy>),
}

type AckObserver = Box<dyn FnMut(&TicaEngine, Page) + Send>;

pub struct TicaEngine {
    cfg: TicaConfig,
    dir: CacheDirectory,
    part: DramPartition,
    ro_cap: usize,
    wo_cap: usize,
    dram: DeviceState,
    ro: DeviceState,
    wo: DeviceState,
    hdd: DeviceState,
    policy: PolicyState,
    mode: Mode,
    clock: Micros,
    exposure: HashMap<Page, Exposure>,
    counters: Counters,
    measure_from: Option<RunStats>,
    pending_evictions: Vec<Eviction>,
    touched: Vec<Page>,
    ack_observer: Option<AckObserver>,
    finished: bool,
}

impl std::fmt::Debug for TicaEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TicaEngine")
            .field("mode", &self.mode)
            .field("clock", &self.clock)
            .field("dram_read", &self.dir.dram_read.len())
            .field("dram_write", &self.dir.dram_write.len())
            .field("ro", &self.dir.ro.len())
            .field("wo", &self.dir.wo.len())
            .finish()
    }
}

impl TicaEngine {
    pub fn new(cfg: TicaConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let dram_usable = cfg.usable(&cfg.dram);
        let part = DramPartition::from_fractions(dram_usable, cfg.def_write_fraction, cfg.min_read_fraction);
        let eq_capacity = cfg.eq_capacity.unwrap_or(part.read_cache_pages());
        let window = 2 * dram_usable;
        let policy = match cfg.policy {
            Policy::Ef => PolicyState::Fixed(Mode::Ef),
            Policy::Wed => PolicyState::Fixed(Mode::Wed),
            Policy::Adaptive => PolicyState::Adaptive(Box::new(AdaptivePolicy::new(
                window,
                cfg.sample_size.unwrap_or(window),
                cfg.steps,
                cfg.thresholds,
                cfg.capacity_rule,
            ))),
        };
        let mode = match &policy {
            PolicyState::Fixed(m) => *m,
            PolicyState::Adaptive(p) => p.decision.mode,
        };
        Ok(Self {
            ro_cap: cfg.usable(&cfg.ro_ssd) as usize,
            wo_cap: cfg.usable(&cfg.wo_ssd) as usize,
            dram: DeviceState::new(cfg.dram.clone()),
            ro: DeviceState::new(cfg.ro_ssd.clone()),
            wo: DeviceState::new(cfg.wo_ssd.clone()),
            hdd: DeviceState::new(cfg.hdd.clone()),
            dir: CacheDirectory::new(eq_capacity),
            part,
            policy,
            mode,
            clock: 0.0,
            exposure: HashMap::new(),
            counters: Counters::default(),
            measure_from: None,
            pending_evictions: Vec::new(),
            touched: Vec::new(),
            ack_observer: None,
            finished: false,
            cfg,
        })
    }

    pub fn config(&self) -> &TicaConfig {
        &self.cfg
    }

    pub fn directory(&self) -> &CacheDirectory {
        &self.dir
    }

    pub fn partition(&self) -> &DramPartition {
        &self.part
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn adaptive_state(&self) -> Option<&AdaptivePolicy> {
        match &self.policy {
            PolicyState::Adaptive(p) => Some(p),
            PolicyState::Fixed(_) => None,
        }
    }

    pub fn clock(&self) -> Micros {
        self.clock
    }

    pub fn device(&self, role: DeviceRole) -> &DeviceState {
        match role {
            DeviceRole::Dram => &self.dram,
            DeviceRole::RoSsd => &self.ro,
            DeviceRole::WoSsd => &self.wo,
            DeviceRole::Hdd => &self.hdd,
        }
    }

    pub fn ro_capacity(&self) -> usize {
        self.ro_cap
    }

    pub fn wo_capacity(&self) -> usize {
        self.wo_cap
    }

    /// Record every device access for offline accounting checks.
    pub fn enable_device_logs(&mut self) {
        for d in [&mut self.dram, &mut self.ro, &mut self.wo, &mut self.hdd] {
            d.enable_log();
        }
    }

    /// Called after every acknowledged write with the written page.
    pub fn set_ack_observer(&mut self, f: AckObserver) {
        self.ack_observer = Some(f);
    }

    pub fn lookup(&self, page: Page) -> Lookup {
        self.dir.lookup(page)
    }

    pub fn fail_device(&self, failed: &[Level]) -> RecoverabilityReport {
        self.dir.fail_devices(failed)
    }

    /// Pages whose state changed during the last step.
    pub fn touched_pages(&self) -> &[Page] {
        &self.touched
    }

    /// Exclude everything so far from the reported statistics while keeping
    /// cache state.
    pub fn begin_measurement(&mut self) {
        self.cut_exposure(self.clock);
        let mut base = self.raw_stats();
        // Later accesses never start before the current clock.
        base.total_sim_us = self.clock;
        self.measure_from = Some(base);
    }

    /// Process one request; its pages are issued together at the request's
    /// issue time and serialize on the devices.
    pub fn step(&mut self, req: &Request) -> StepOutcome {
        assert!(!self.finished, "engine already finished");
        let t = match self.cfg.clock {
            ClockMode::Closed => self.clock,
            ClockMode::Open => (req.arrival_us as f64).max(0.0),
        };
        self.touched.clear();
        self.counters.user_requests += 1;
        let mut pages = Vec::with_capacity(req.pages as usize);
        let mut completion = t;
        for page in req.page_range() {
            let res = self.step_page(page, req.op, t);
            completion = completion.max(res.completion_us);
            pages.push(res);
        }
        self.clock = match self.cfg.clock {
            ClockMode::Closed => completion,
            ClockMode::Open => self.clock.max(t),
        };
        StepOutcome { issued_us: t, completion_us: completion, pages }
    }

    fn step_page(&mut self, page: Page, op: Op, t: Micros) -> RequestResult {
        self.flush_tick(t);
        self.touched.push(page);
        let found = self.dir.lookup(page);
        let event = AccessEvent {
            is_read: op.is_read(),
            hit_dram: found == Lookup::Dram,
            hit_eq: self.dir.eq.contains(page),
            hit_cache: found != Lookup::Miss,
        };
        if let PolicyState::Adaptive(p) = &mut self.policy {
            let next = p.observe(&event).mode;
            if next != self.mode {
                self.counters.policy_switches += 1;
                self.mode = next;
            }
        }
        if self.mode == Mode::Wed {
            self.counters.wed_page_ops += 1;
        }
        self.pending_evictions.clear();
        let (completion, served_by) = match op {
            Op::Write => {
                self.counters.user_writes += 1;
                (self.handle_write(page, t), ServedBy::WriteBuffered)
            }
            Op::Read => {
                self.counters.user_reads += 1;
                self.handle_read(page, t, found)
            }
        };
        let latency = completion - t;
        self.counters.latency_sum_us += latency;
        self.counters.latency_count += 1;
        let evictions = std::mem::take(&mut self.pending_evictions);
        self.touched.extend(evictions.iter().map(|e| e.page));
        let result = RequestResult {
            page,
            op,
            issued_us: t,
            completion_us: completion,
            latency_us: latency,
            served_by,
            mode: self.mode,
            evictions,
        };
        if op == Op::Write {
            if let Some(mut obs) = self.ack_observer.take() {
                obs(self, page);
                self.ack_observer = Some(obs);
            }
        }
        result
    }

    fn handle_write(&mut self, page: Page, t: Micros) -> Micros {
        self.issue_discards(page, t);
        let mut start = t;
        if self.dir.dram_write.len() >= self.part.write_limit() {
            self.part.grow();
            self.evict_read_to_fit(start);
            while self.dir.dram_write.len() >= self.part.write_limit() {
                let head = self.dir.dram_write.front().expect("full write partition has a head").completion_us;
                start = start.max(head);
                self.flush_tick(start);
            }
        }
        if self.dir.wo.len() >= self.wo_cap {
            self.free_wo_ssd(start);
        }
        let dram_done = self.dram.access(Op::Write, 1, start);
        let wo_done = self.wo.access(Op::Write, 1, start);
        let done = dram_done.max(wo_done);
        self.dir.wo.touch(page);
        self.dir.dirty.insert(page);
        self.dir.eq.remove(page);
        self.exposure.insert(page, Exposure::Dram(done));
        self.dram.access(Op::Read, 1, done);
        let flushed = self.ro.access(Op::Write, 1, done);
        self.dir.dram_write.push(FlushEntry { page, acked_us: done, completion_us: flushed, valid: true });
        done
    }

    fn issue_discards(&mut self, page: Page, t: Micros) {
        self.dir.dram_read.remove(page);
        self.dir.dram_write.invalidate(page);
        if self.dir.ro.remove(page) {
            self.ro.trim();
        }
        if self.dir.wo.remove(page) {
            self.wo.trim();
        }
        if self.dir.dirty.remove(&page) {
            self.close_exposure(page, t);
        }
    }

    fn handle_read(&mut self, page: Page, t: Micros, found: Lookup) -> (Micros, ServedBy) {
        match found {
            Lookup::Dram => {
                self.dir.dram_read.refresh(page);
                self.counters.dram_hits += 1;
                (self.dram.access(Op::Read, 1, t), ServedBy::DramHit)
            }
            Lookup::RoSsd => {
                self.dir.ro.refresh(page);
                self.dir.wo.refresh(page);
                self.counters.ro_hits += 1;
                (self.ro.access(Op::Read, 1, t), ServedBy::RoSsdHit)
            }
            Lookup::WoSsd => {
                self.dir.wo.refresh(page);
                self.counters.wo_hits += 1;
                (self.wo.access(Op::Read, 1, t), ServedBy::WoSsdHit)
            }
            Lookup::Miss => {
                self.counters.hdd_reads += 1;
                let fetched = self.hdd.access(Op::Read, 1, t);
                self.make_read_room(t, fetched);
                self.dir.dram_read.touch(page);
                self.dir.eq.remove(page);
                self.dram.access(Op::Write, 1, fetched);
                (fetched, ServedBy::HddMiss)
            }
        }
    }

    /// Free one read-partition slot for a miss whose HDD read finishes at
    /// `fetched`: shrink the write partition, then take whichever comes
    /// first, a completing flush or the read-partition LRU page.
    fn make_read_room(&mut self, t: Micros, fetched: Micros) {
        let read_limit = |s: &Self| s.part.read_limit(s.dir.dram_write.len());
        if self.dir.dram_read.len() < read_limit(self) {
            return;
        }
        if self.part.write_cache_pages() > self.part.def_write_cache_pages() {
            self.part.shrink();
        }
        if self.dir.dram_read.len() < read_limit(self) {
            return;
        }
        let over_target = self.dir.dram_write.len() > self.part.write_limit();
        match self.dir.dram_write.front().map(|e| e.completion_us) {
            Some(head) if over_target && head <= fetched => {
                self.flush_tick(head);
            }
            _ => self.evict_read_tail(t),
        }
    }

    fn evict_read_to_fit(&mut self, at: Micros) {
        while self.dir.dram_read.len() > self.part.read_limit(self.dir.dram_write.len()) {
            self.evict_read_tail(at);
        }
    }

    fn evict_read_tail(&mut self, at: Micros) {
        let Some(victim) = self.dir.dram_read.pop_lru() else {
            return;
        };
        self.counters.dram_evictions += 1;
        self.dir.eq.push(victim);
        match self.mode {
            Mode::Ef => self.pending_evictions.push(Eviction { page: victim, kind: EvictionKind::DramDiscard }),
            Mode::Wed => {
                self.pending_evictions.push(Eviction { page: victim, kind: EvictionKind::DramToWoSsd });
                self.copy_to_wo(victim, at);
            }
        }
    }

    fn copy_to_wo(&mut self, page: Page, at: Micros) {
        if self.dir.wo.contains(page) {
            self.dir.wo.touch(page);
            return;
        }
        if self.dir.wo.len() >= self.wo_cap {
            self.free_wo_ssd(at);
        }
        self.dram.access(Op::Read, 1, at);
        self.wo.access(Op::Write, 1, at);
        self.dir.wo.touch(page);
    }

    /// Drop the WO-SSD LRU page from both SSDs, writing it back first if
    /// dirty.
    pub fn free_wo_ssd(&mut self, at: Micros) -> Option<Page> {
        let victim = self.dir.wo.pop_lru()?;
        self.counters.ssd_evictions += 1;
        if self.dir.dirty.remove(&victim) {
            let read_done = if self.dir.ro.contains(victim) {
                self.ro.access(Op::Read, 1, at)
            } else {
                self.wo.access(Op::Read, 1, at)
            };
            self.hdd.access(Op::Write, 1, read_done);
            self.close_exposure(victim, at);
            self.pending_evictions.push(Eviction { page: victim, kind: EvictionKind::SsdWriteBack });
        } else {
            self.pending_evictions.push(Eviction { page: victim, kind: EvictionKind::SsdDiscard });
        }
        self.dir.ro.remove(victim);
        self.dir.dram_write.invalidate(victim);
        self.wo.trim();
        self.ro.trim();
        Some(victim)
    }

    /// Complete every flush finished by `clock`. Returns the pages that
    /// gained an RO-SSD copy.
    pub fn flush_tick(&mut self, clock: Micros) -> Vec<Page> {
        let mut done = Vec::new();
        while let Some(entry) = self.dir.dram_write.pop_ready(clock) {
            if !entry.valid {
                continue;
            }
            debug_assert!(self.dir.ro.len() < self.ro_cap, "RO-SSD cannot outgrow WO-SSD");
            self.dir.ro.touch(entry.page);
            if let Some(Exposure::Dram(since)) = self.exposure.get(&entry.page).copied() {
                self.counters.dram_exposure_us += (entry.completion_us - since).max(0.0);
                self.exposure.insert(entry.page, Exposure::Ro(entry.completion_us));
            }
            self.touched.push(entry.page);
            done.push(entry.page);
        }
        done
    }

    fn close_exposure(&mut self, page: Page, at: Micros) {
        match self.exposure.remove(&page) {
            Some(Exposure::Dram(since)) => self.counters.dram_exposure_us += (at - since).max(0.0),
            Some(Exposure::Ro(since)) => self.counters.ro_exposure_us += (at - since).max(0.0),
            None => {}
        }
    }

    fn cut_exposure(&mut self, at: Micros) {
        for exp in self.exposure.values_mut() {
            match exp {
                Exposure::Dram(since) => {
                    self.counters.dram_exposure_us += (at - *since).max(0.0);
                    *since = since.max(at);
                }
                Exposure::Ro(since) => {
                    self.counters.ro_exposure_us += (at - *since).max(0.0);
                    *since = since.max(at);
                }
            }
        }
    }

    /// End of simulated time: the last request completion or the last
    /// device release, whichever is later.
    pub fn horizon(&self) -> Micros {
        [&self.dram, &self.ro, &self.wo, &self.hdd]
            .iter()
            .map(|d| d.last_release_us)
            .fold(self.clock, f64::max)
    }

    /// Drain outstanding flushes and close the run.
    pub fn finish(&mut self) -> RunStats {
        if !self.finished {
            self.flush_tick(f64::INFINITY);
            let end = self.horizon();
            self.cut_exposure(end);
            self.clock = end;
            self.finished = true;
        }
        self.stats()
    }

    /// Statistics for the measured span so far.
    pub fn stats(&self) -> RunStats {
        let raw = self.raw_stats();
        match &self.measure_from {
            Some(base) => raw.since(base),
            None => raw,
        }
    }

    fn raw_stats(&self) -> RunStats {
        let c = &self.counters;
        let devices = [&self.dram, &self.ro, &self.wo, &self.hdd]
            .into_iter()
            .zip(DeviceRole::ALL)
            .map(|(d, role)| DeviceSnapshot { role, label: role.as_str().into(), state: d.snapshot() })
            .collect();
        RunStats {
            architecture: "tica".into(),
            user_requests: c.user_requests,
            user_reads: c.user_reads,
            user_writes: c.user_writes,
            dram_hits: c.dram_hits,
            ro_hits: c.ro_hits,
            wo_hits: c.wo_hits,
            hdd_reads: c.hdd_reads,
            latency_sum_us: c.latency_sum_us,
            latency_count: c.latency_count,
            total_sim_us: self.horizon(),
            devices,
            dram_exposure_us: c.dram_exposure_us,
            ro_exposure_us: c.ro_exposure_us,
            policy_switches: c.policy_switches,
            wed_page_ops: c.wed_page_ops,
            dram_evictions: c.dram_evictions,
            ssd_evictions: c.ssd_evictions,
            page_size_bytes: self.cfg.page_size_bytes,
        }
    }

    /// Full structural audit plus capacity and partition bounds.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.dir.check_structure()?;
        self.check_bounds()
    }

    /// Cheap audit restricted to the pages touched by the last step.
    pub fn check_touched(&self) -> Result<(), String> {
        self.dir.check_redundancy(self.touched.iter().copied())?;
        self.check_bounds()
    }

    fn check_bounds(&self) -> Result<(), String> {
        let dram_cap = self.part.capacity() as usize;
        let read = self.dir.dram_read.len();
        let write = self.dir.dram_write.len();
        if read + write > dram_cap {
            return Err(format!("capacity: DRAM holds {read} read + {write} write pages, capacity {dram_cap}"));
        }
        if read > self.part.read_limit(write) {
            return Err(format!("capacity: read partition {read} above limit {}", self.part.read_limit(write)));
        }
        if self.dir.ro.len() > self.ro_cap || self.dir.wo.len() > self.wo_cap {
            return Err(format!(
                "capacity: SSD occupancy ro={} wo={} above {} / {}",
                self.dir.ro.len(),
                self.dir.wo.len(),
                self.ro_cap,
                self.wo_cap
            ));
        }
        let w = self.part.write_cache_pages();
        if w < self.part.def_write_cache_pages() || w > self.part.cap() {
            return Err(format!("partition: write cache size {w} outside bounds"));
        }
        Ok(())
    }

    /// Busy time never exceeds simulated time.
    pub fn check_conservation(&self) -> Result<(), String> {
        let end = self.horizon();
        for d in [&self.dram, &self.ro, &self.wo, &self.hdd] {
            if d.idle_time(end).is_err() {
                return Err(format!("conservation: {} busy {} us beyond horizon {end} us", d.model.name, d.busy_us));
            }
        }
        Ok(())
    }

    /// Fault injection for audit tests: drop the WO-SSD copy of a page
    /// without touching anything else.
    #[doc(hidden)]
    pub fn corrupt_drop_wo_copy(&mut self, page: Page) -> bool {
        self.dir.wo.remove(page)
    }
}
