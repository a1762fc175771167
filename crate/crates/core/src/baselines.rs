//! Reference caches: an optional DRAM front over one or two mirrored
//! write-back SSDs.
//!
//! Every SSD write goes to all members and completes when the slowest one
//! does; reads are served by the member with the lowest read latency. Read
//! misses are filled into DRAM and into the SSDs. The DRAM is one unified
//! LRU; dirty state lives on the SSDs, which write back to the HDD on
//! eviction.

use std::collections::HashSet;

use crate::analytics::{Architecture, DeviceSnapshot, RunStats};
use crate::cache::ClockMode;
use crate::devices::{DeviceModel, DeviceRole, DeviceState, Micros};
use crate::error::Error;
use crate::lru::LruQueue;
use crate::trace::{Op, Page, Request};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub kind: Architecture,
    pub dram: Option<DeviceModel>,
    /// One entry per SSD; mirrored kinds have two.
    pub members: Vec<(DeviceRole, DeviceModel)>,
    pub hdd: DeviceModel,
    pub reserve_pages: u64,
    pub clock: ClockMode,
    pub page_size_bytes: u64,
}

impl BaselineConfig {
    /// Default device models for `kind` with the given raw capacities. The
    /// DRAM size is ignored by kinds without a DRAM front.
    pub fn new(kind: Architecture, dram_pages: u64, ssd_pages: u64) -> Result<Self, Error> {
        let ro = || (DeviceRole::RoSsd, DeviceModel::default_for(DeviceRole::RoSsd).with_capacity(ssd_pages));
        let wo = || (DeviceRole::WoSsd, DeviceModel::default_for(DeviceRole::WoSsd).with_capacity(ssd_pages));
        let dram = Some(DeviceModel::default_for(DeviceRole::Dram).with_capacity(dram_pages));
        let (dram, members) = match kind {
            Architecture::Tica => return Err(Error::Config("the three-level cache is not a baseline".into())),
            Architecture::MirroredWb => (dram, vec![wo(), wo()]),
            Architecture::SingleSsd => (None, vec![wo()]),
            Architecture::Raid1Ro => (None, vec![ro(), ro()]),
            Architecture::Raid1Wo => (None, vec![wo(), wo()]),
            Architecture::Raid1Mixed => (None, vec![ro(), wo()]),
        };
        Ok(Self {
            kind,
            dram,
            members,
            hdd: DeviceModel::default_for(DeviceRole::Hdd),
            reserve_pages: 4,
            clock: ClockMode::Closed,
            page_size_bytes: crate::trace::DEFAULT_PAGE_SIZE,
        })
    }

    fn usable(&self, m: &DeviceModel) -> u64 {
        m.capacity_pages.saturating_sub(self.reserve_pages)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.members.is_empty() {
            return Err(Error::Config("baseline needs at least one SSD".into()));
        }
        for (_, m) in &self.members {
            m.validate()?;
            if self.usable(m) == 0 {
                return Err(Error::Config(format!("{} has no usable pages beyond the reserve", m.name)));
            }
        }
        if let Some(d) = &self.dram {
            d.validate()?;
            if self.usable(d) == 0 {
                return Err(Error::Config("DRAM has no usable pages beyond the reserve".into()));
            }
        }
        self.hdd.validate()
    }
}

#[derive(Debug, Clone)]
pub struct BaselineEngine {
    cfg: BaselineConfig,
    dram: Option<(DeviceState, LruQueue, usize)>,
    members: Vec<DeviceState>,
    ssd: LruQueue,
    ssd_cap: usize,
    dirty: HashSet<Page>,
    hdd: DeviceState,
    /// Member used for reads: lowest read latency, first on ties.
    fastest: usize,
    clock: Micros,
    stats: RunStats,
    measure_from: Option<RunStats>,
}

impl BaselineEngine {
    pub fn new(cfg: BaselineConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let ssd_cap = cfg.members.iter().map(|(_, m)| cfg.usable(m)).min().unwrap_or(0) as usize;
        let mut fastest = 0;
        for (i, (_, m)) in cfg.members.iter().enumerate() {
            if m.read_latency_us < cfg.members[fastest].1.read_latency_us {
                fastest = i;
            }
        }
        let dram = cfg.dram.as_ref().map(|m| (DeviceState::new(m.clone()), LruQueue::new(), cfg.usable(m) as usize));
        let stats = RunStats {
            architecture: cfg.kind.as_str().into(),
            user_requests: 0,
            user_reads: 0,
            user_writes: 0,
            dram_hits: 0,
            ro_hits: 0,
            wo_hits: 0,
            hdd_reads: 0,
            latency_sum_us: 0.0,
            latency_count: 0,
            total_sim_us: 0.0,
            devices: Vec::new(),
            dram_exposure_us: 0.0,
            ro_exposure_us: 0.0,
            policy_switches: 0,
            wed_page_ops: 0,
            dram_evictions: 0,
            ssd_evictions: 0,
            page_size_bytes: cfg.page_size_bytes,
        };
        Ok(Self {
            members: cfg.members.iter().map(|(_, m)| DeviceState::new(m.clone())).collect(),
            hdd: DeviceState::new(cfg.hdd.clone()),
            ssd: LruQueue::new(),
            dirty: HashSet::new(),
            ssd_cap,
            fastest,
            dram,
            clock: 0.0,
            stats,
            measure_from: None,
            cfg,
        })
    }

    pub fn member(&self, i: usize) -> &DeviceState {
        &self.members[i]
    }

    pub fn ssd_len(&self) -> usize {
        self.ssd.len()
    }

    /// Process one request; returns its completion time.
    pub fn step(&mut self, req: &Request) -> Micros {
        let t = match self.cfg.clock {
            ClockMode::Closed => self.clock,
            ClockMode::Open => req.arrival_us as f64,
        };
        self.stats.user_requests += 1;
        let mut completion = t;
        for page in req.page_range() {
            let done = match req.op {
                Op::Write => self.write(page, t),
                Op::Read => self.read(page, t),
            };
            self.stats.latency_sum_us += done - t;
            self.stats.latency_count += 1;
            completion = completion.max(done);
        }
        self.clock = match self.cfg.clock {
            ClockMode::Closed => completion,
            ClockMode::Open => self.clock.max(t),
        };
        completion
    }

    fn write(&mut self, page: Page, t: Micros) -> Micros {
        self.stats.user_writes += 1;
        if !self.ssd.contains(page) && self.ssd.len() >= self.ssd_cap {
            self.evict_ssd(t);
        }
        let mut done = self.write_members(t);
        self.ssd.touch(page);
        self.dirty.insert(page);
        if let Some(d) = self.dram_insert(page) {
            done = done.max(d.access(Op::Write, 1, t));
        }
        done
    }

    fn read(&mut self, page: Page, t: Micros) -> Micros {
        self.stats.user_reads += 1;
        if let Some((dev, lru, _)) = &mut self.dram {
            if lru.refresh(page) {
                self.stats.dram_hits += 1;
                return dev.access(Op::Read, 1, t);
            }
        }
        if self.ssd.refresh(page) {
            match self.cfg.members[self.fastest].0 {
                DeviceRole::RoSsd => self.stats.ro_hits += 1,
                _ => self.stats.wo_hits += 1,
            }
            let done = self.members[self.fastest].access(Op::Read, 1, t);
            if let Some(d) = self.dram_insert(page) {
                d.access(Op::Write, 1, done);
            }
            return done;
        }
        self.stats.hdd_reads += 1;
        let fetched = self.hdd.access(Op::Read, 1, t);
        if let Some(d) = self.dram_insert(page) {
            d.access(Op::Write, 1, fetched);
        }
        if self.ssd.len() >= self.ssd_cap {
            self.evict_ssd(fetched);
        }
        self.write_members(fetched);
        self.ssd.touch(page);
        fetched
    }

    fn write_members(&mut self, at: Micros) -> Micros {
        self.members.iter_mut().map(|m| m.access(Op::Write, 1, at)).fold(at, f64::max)
    }

    /// Insert or refresh `page` in DRAM, dropping the LRU page when full.
    fn dram_insert(&mut self, page: Page) -> Option<&mut DeviceState> {
        let (dev, lru, cap) = self.dram.as_mut()?;
        if !lru.contains(page) && lru.len() >= *cap {
            lru.pop_lru();
            self.stats.dram_evictions += 1;
        }
        lru.touch(page);
        Some(dev)
    }

    fn evict_ssd(&mut self, at: Micros) {
        let Some(victim) = self.ssd.pop_lru() else {
            return;
        };
        self.stats.ssd_evictions += 1;
        if self.dirty.remove(&victim) {
            let read = self.members[self.fastest].access(Op::Read, 1, at);
            self.hdd.access(Op::Write, 1, read);
        }
        for m in &mut self.members {
            m.trim();
        }
    }

    pub fn horizon(&self) -> Micros {
        self.members
            .iter()
            .chain(self.dram.as_ref().map(|d| &d.0))
            .chain([&self.hdd])
            .map(|d| d.last_release_us)
            .fold(self.clock, f64::max)
    }

    /// Exclude everything so far from the reported statistics.
    pub fn begin_measurement(&mut self) {
        let mut base = self.raw_stats();
        base.total_sim_us = self.clock;
        self.measure_from = Some(base);
    }

    pub fn finish(&self) -> RunStats {
        let raw = self.raw_stats();
        match &self.measure_from {
            Some(base) => raw.since(base),
            None => raw,
        }
    }

    fn raw_stats(&self) -> RunStats {
        let mut stats = self.stats.clone();
        stats.total_sim_us = self.horizon();
        if let Some((d, _, _)) = &self.dram {
            stats.devices.push(DeviceSnapshot { role: DeviceRole::Dram, label: "dram".into(), state: d.snapshot() });
        }
        let same_role = self.cfg.members.len() > 1 && self.cfg.members.iter().all(|(r, _)| *r == self.cfg.members[0].0);
        for (i, ((role, _), state)) in self.cfg.members.iter().zip(&self.members).enumerate() {
            let label = if same_role {
                format!("{}_{}", role.as_str(), (b'a' + i as u8) as char)
            } else {
                role.as_str().to_string()
            };
            stats.devices.push(DeviceSnapshot { role: *role, label, state: state.snapshot() });
        }
        stats.devices.push(DeviceSnapshot { role: DeviceRole::Hdd, label: "hdd".into(), state: self.hdd.snapshot() });
        stats
    }
}

pub fn run_baseline(cfg: BaselineConfig, trace: &[Request]) -> Result<RunStats, Error> {
    let mut engine = BaselineEngine::new(cfg)?;
    for req in trace {
        engine.step(req);
    }
    Ok(engine.finish())
}
