//! Brute-force reference model of the three-level cache.
//!
//! Written from the behavioral description only: plain vectors for every
//! queue (front = least recent), linear scans everywhere, its own adaptive
//! detectors. Slow but easy to audit.

#![allow(dead_code)]

use tica::trace::{Op, Request};

type Page = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Served {
    Dram,
    Ro,
    Wo,
    Hdd,
    Buffered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evict {
    DramDrop,
    DramCopy,
    SsdDrop,
    SsdWriteBack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpRecord {
    pub page: Page,
    pub served: Served,
    pub completion: f64,
    pub wed: bool,
    pub evictions: Vec<(Page, Evict)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dev {
    pub read_lat: f64,
    pub write_lat: f64,
    pub reads: u64,
    pub writes: u64,
    pub trims: u64,
    pub busy: f64,
    pub free_at: f64,
}

impl Dev {
    fn new(read_lat: f64, write_lat: f64) -> Self {
        Dev { read_lat, write_lat, ..Default::default() }
    }

    fn io(&mut self, write: bool, at: f64) -> f64 {
        let lat = if write { self.write_lat } else { self.read_lat };
        let start = if self.free_at > at { self.free_at } else { at };
        self.free_at = start + lat;
        self.busy += lat;
        if write {
            self.writes += 1;
        } else {
            self.reads += 1;
        }
        self.free_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OraclePolicy {
    Ef,
    Wed,
    Adaptive,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    pub dram_pages: usize,
    pub ro_pages: usize,
    pub wo_pages: usize,
    pub policy: OraclePolicy,
    pub open_clock: bool,
}

struct Flush {
    page: Page,
    done: f64,
    live: bool,
}

pub struct Oracle {
    cfg: OracleConfig,
    base_w: f64,
    min_read: usize,
    w: f64,
    read_part: Vec<Page>,
    flushes: Vec<Flush>,
    ro: Vec<Page>,
    wo: Vec<Page>,
    dirty: Vec<Page>,
    ghosts: Vec<Page>,
    ghost_cap: usize,
    pub dram: Dev,
    pub ro_dev: Dev,
    pub wo_dev: Dev,
    pub hdd: Dev,
    wed: bool,
    clock: f64,
    // capacity detector
    win: usize,
    win_n: usize,
    win_eq: usize,
    win_dram: usize,
    cap_wed: bool,
    // state machine detector: 0 initial, 1 wed, 2 wait
    smp_n: usize,
    smp_disk: usize,
    smp_hit: usize,
    sm: u8,
    sm_count: u64,
    pub switches: u64,
    pending: Vec<(Page, Evict)>,
    pub records: Vec<OpRecord>,
}

fn pos(v: &[Page], p: Page) -> Option<usize> {
    v.iter().position(|&x| x == p)
}

fn drop_page(v: &mut Vec<Page>, p: Page) -> bool {
    match pos(v, p) {
        Some(i) => {
            v.remove(i);
            true
        }
        None => false,
    }
}

fn to_back(v: &mut Vec<Page>, p: Page) {
    drop_page(v, p);
    v.push(p);
}

impl Oracle {
    pub fn new(cfg: OracleConfig) -> Self {
        let d = cfg.dram_pages;
        let base = ((d as f64 * 0.2).floor() as usize).max(1);
        let min_read = ((d as f64 * 0.1).floor() as usize).max(1);
        Oracle {
            cfg,
            base_w: base as f64,
            min_read,
            w: base as f64,
            read_part: Vec::new(),
            flushes: Vec::new(),
            ro: Vec::new(),
            wo: Vec::new(),
            dirty: Vec::new(),
            ghosts: Vec::new(),
            ghost_cap: d - base,
            dram: Dev::new(1.0, 1.0),
            ro_dev: Dev::new(90.0, 900.0),
            wo_dev: Dev::new(110.0, 90.0),
            hdd: Dev::new(5000.0, 5000.0),
            wed: cfg.policy == OraclePolicy::Wed,
            clock: 0.0,
            win: 2 * d,
            win_n: 0,
            win_eq: 0,
            win_dram: 0,
            cap_wed: false,
            smp_n: 0,
            smp_disk: 0,
            smp_hit: 0,
            sm: 0,
            sm_count: 4,
            switches: 0,
            pending: Vec::new(),
            records: Vec::new(),
        }
    }

    fn wlimit(&self) -> usize {
        self.w.ceil() as usize
    }

    fn rlimit(&self) -> usize {
        let used = self.wlimit().max(self.flushes.len());
        self.cfg.dram_pages - used
    }

    fn buffered(&self, p: Page) -> bool {
        self.flushes.iter().any(|f| f.live && f.page == p)
    }

    fn in_dram(&self, p: Page) -> bool {
        pos(&self.read_part, p).is_some() || self.buffered(p)
    }

    fn kill_flush(&mut self, p: Page) {
        for f in self.flushes.iter_mut() {
            if f.live && f.page == p {
                f.live = false;
            }
        }
    }

    pub fn run(&mut self, trace: &[Request]) {
        for req in trace {
            let t = if self.cfg.open_clock { req.arrival_us as f64 } else { self.clock };
            let mut end = t;
            for page in req.lba..req.lba + req.pages {
                let rec = self.page_op(page, req.op, t);
                if rec.completion > end {
                    end = rec.completion;
                }
                self.records.push(rec);
            }
            self.clock = if self.cfg.open_clock { self.clock.max(t) } else { end };
        }
        self.settle(f64::INFINITY);
    }

    fn settle(&mut self, now: f64) {
        while !self.flushes.is_empty() && self.flushes[0].done <= now {
            let f = self.flushes.remove(0);
            if f.live {
                to_back(&mut self.ro, f.page);
            }
        }
    }

    fn page_op(&mut self, p: Page, op: Op, t: f64) -> OpRecord {
        self.settle(t);
        let is_read = op == Op::Read;
        let hit_dram = self.in_dram(p);
        let hit_any = hit_dram || pos(&self.ro, p).is_some() || pos(&self.wo, p).is_some();
        let hit_ghost = pos(&self.ghosts, p).is_some();
        if self.cfg.policy == OraclePolicy::Adaptive {
            self.detectors(is_read, hit_dram, hit_ghost, hit_any);
        }
        self.pending.clear();
        let (served, completion) = if is_read {
            self.read(p, t)
        } else {
            (Served::Buffered, self.write(p, t))
        };
        OpRecord { page: p, served, completion, wed: self.wed, evictions: std::mem::take(&mut self.pending) }
    }

    fn detectors(&mut self, is_read: bool, hit_dram: bool, hit_ghost: bool, hit_any: bool) {
        let (t_min, t_max, t_hdd, t_read) = (0.15, 0.25, 0.2, 0.2);
        self.win_n += 1;
        if is_read && hit_dram {
            self.win_dram += 1;
        } else if is_read && hit_ghost {
            self.win_eq += 1;
        }
        if self.win_n == self.win {
            let n = self.win as f64;
            let eq = self.win_eq as f64 / n;
            let dr = self.win_dram as f64 / n;
            self.cap_wed = eq + dr > t_max || eq > t_min;
            self.win_n = 0;
            self.win_eq = 0;
            self.win_dram = 0;
        }
        self.smp_n += 1;
        if is_read {
            if hit_any {
                self.smp_hit += 1;
            } else {
                self.smp_disk += 1;
            }
        }
        if self.smp_n == self.win {
            let n = self.win as f64;
            let disk = self.smp_disk as f64 / n > t_hdd;
            let hits = self.smp_hit as f64 / n > t_read;
            match self.sm {
                0 if disk => {
                    self.sm = 1;
                    self.sm_count = 3;
                }
                1 if disk && !hits => self.sm = 2,
                1 if !disk && hits => {
                    self.sm = 0;
                    self.sm_count = 4;
                }
                2 if self.sm_count == 0 || hits => {
                    self.sm = 0;
                    self.sm_count = 4;
                }
                2 => self.sm_count -= 1,
                _ => {}
            }
            self.smp_n = 0;
            self.smp_disk = 0;
            self.smp_hit = 0;
        }
        let wed = self.cap_wed || self.sm == 1;
        if wed != self.wed {
            self.switches += 1;
            self.wed = wed;
        }
    }

    fn write(&mut self, p: Page, t: f64) -> f64 {
        drop_page(&mut self.read_part, p);
        self.kill_flush(p);
        if drop_page(&mut self.ro, p) {
            self.ro_dev.trims += 1;
        }
        if drop_page(&mut self.wo, p) {
            self.wo_dev.trims += 1;
        }
        drop_page(&mut self.dirty, p);

        let mut start = t;
        if self.flushes.len() >= self.wlimit() {
            let w = self.w / self.base_w;
            let grown = (w + 2f64.powf(1.0 - w)) * self.base_w;
            let cap = (self.cfg.dram_pages - self.min_read) as f64;
            self.w = if grown < cap { grown } else { cap };
            while self.read_part.len() > self.rlimit() {
                self.evict_read(start);
            }
            while self.flushes.len() >= self.wlimit() {
                if self.flushes[0].done > start {
                    start = self.flushes[0].done;
                }
                self.settle(start);
            }
        }
        if self.wo.len() >= self.cfg.wo_pages {
            self.free_wo(start);
        }
        let a = self.dram.io(true, start);
        let b = self.wo_dev.io(true, start);
        let acked = if a > b { a } else { b };
        self.wo.push(p);
        self.dirty.push(p);
        drop_page(&mut self.ghosts, p);
        self.dram.io(false, acked);
        let done = self.ro_dev.io(true, acked);
        self.flushes.push(Flush { page: p, done, live: true });
        acked
    }

    fn read(&mut self, p: Page, t: f64) -> (Served, f64) {
        if self.in_dram(p) {
            if pos(&self.read_part, p).is_some() {
                to_back(&mut self.read_part, p);
            }
            return (Served::Dram, self.dram.io(false, t));
        }
        if pos(&self.ro, p).is_some() {
            to_back(&mut self.ro, p);
            to_back(&mut self.wo, p);
            return (Served::Ro, self.ro_dev.io(false, t));
        }
        if pos(&self.wo, p).is_some() {
            to_back(&mut self.wo, p);
            return (Served::Wo, self.wo_dev.io(false, t));
        }
        let h = self.hdd.io(false, t);
        if self.read_part.len() >= self.rlimit() {
            if self.w > self.base_w {
                let w = self.w / self.base_w;
                let shrunk = w - 2f64.powf(w - 1.0);
                self.w = if shrunk > 1.0 { shrunk } else { 1.0 } * self.base_w;
            }
            if self.read_part.len() >= self.rlimit() {
                let over = self.flushes.len() > self.wlimit();
                if over && self.flushes[0].done <= h {
                    let when = self.flushes[0].done;
                    self.settle(when);
                } else {
                    self.evict_read(t);
                }
            }
        }
        self.read_part.push(p);
        drop_page(&mut self.ghosts, p);
        self.dram.io(true, h);
        (Served::Hdd, h)
    }

    fn evict_read(&mut self, at: f64) {
        if self.read_part.is_empty() {
            return;
        }
        let v = self.read_part.remove(0);
        to_back(&mut self.ghosts, v);
        if self.ghosts.len() > self.ghost_cap {
            self.ghosts.remove(0);
        }
        if !self.wed {
            self.pending.push((v, Evict::DramDrop));
            return;
        }
        self.pending.push((v, Evict::DramCopy));
        if pos(&self.wo, v).is_some() {
            to_back(&mut self.wo, v);
            return;
        }
        if self.wo.len() >= self.cfg.wo_pages {
            self.free_wo(at);
        }
        self.dram.io(false, at);
        self.wo_dev.io(true, at);
        self.wo.push(v);
    }

    fn free_wo(&mut self, at: f64) {
        if self.wo.is_empty() {
            return;
        }
        let v = self.wo.remove(0);
        if drop_page(&mut self.dirty, v) {
            let r = if pos(&self.ro, v).is_some() { self.ro_dev.io(false, at) } else { self.wo_dev.io(false, at) };
            self.hdd.io(true, r);
            self.pending.push((v, Evict::SsdWriteBack));
        } else {
            self.pending.push((v, Evict::SsdDrop));
        }
        drop_page(&mut self.ro, v);
        self.kill_flush(v);
        self.ro_dev.trims += 1;
        self.wo_dev.trims += 1;
    }
}
