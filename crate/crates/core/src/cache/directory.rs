use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use super::flush::FlushQueue;
use crate::lru::{GhostQueue, LruQueue};
use crate::trace::Page;

/// Cache level, in read lookup priority order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Dram,
    RoSsd,
    WoSsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Lookup {
    Dram,
    RoSsd,
    WoSsd,
    Miss,
}

/// Where a copy of a page can be found after a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CopyLocation {
    Dram,
    RoSsd,
    WoSsd,
    Hdd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirtyPageRecovery {
    pub page: Page,
    pub survivors: Vec<CopyLocation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecoverabilityReport {
    pub failed: Vec<Level>,
    pub dirty_pages: Vec<DirtyPageRecovery>,
    pub unrecoverable: Vec<Page>,
}

impl RecoverabilityReport {
    pub fn is_safe(&self) -> bool {
        self.unrecoverable.is_empty()
    }
}

/// Presence, recency and dirty state for every cache level.
#[derive(Debug, Clone)]
pub struct CacheDirectory {
    pub dram_read: LruQueue,
    /// DRAM write partition; a page is resident while its flush is valid.
    pub dram_write: FlushQueue,
    pub ro: LruQueue,
    pub wo: LruQueue,
    pub dirty: HashSet<Page>,
    pub eq: GhostQueue,
}

impl CacheDirectory {
    pub fn new(eq_capacity: usize) -> Self {
        Self {
            dram_read: LruQueue::new(),
            dram_write: FlushQueue::new(),
            ro: LruQueue::new(),
            wo: LruQueue::new(),
            dirty: HashSet::new(),
            eq: GhostQueue::new(eq_capacity),
        }
    }

    pub fn in_dram(&self, page: Page) -> bool {
        self.dram_read.contains(page) || self.dram_write.contains(page)
    }

    pub fn lookup(&self, page: Page) -> Lookup {
        if self.in_dram(page) {
            Lookup::Dram
        } else if self.ro.contains(page) {
            Lookup::RoSsd
        } else if self.wo.contains(page) {
            Lookup::WoSsd
        } else {
            Lookup::Miss
        }
    }

    /// Locations holding the newest contents of `page`.
    pub fn copies(&self, page: Page) -> Vec<CopyLocation> {
        let mut out = Vec::with_capacity(4);
        if self.dram_write.contains(page) || self.dram_read.contains(page) {
            out.push(CopyLocation::Dram);
        }
        if self.ro.contains(page) {
            out.push(CopyLocation::RoSsd);
        }
        if self.wo.contains(page) {
            out.push(CopyLocation::WoSsd);
        }
        if !self.dirty.contains(&page) {
            out.push(CopyLocation::Hdd);
        }
        out
    }

    /// Which dirty pages survive the loss of `failed` devices.
    pub fn fail_devices(&self, failed: &[Level]) -> RecoverabilityReport {
        let lost = |loc: CopyLocation| match loc {
            CopyLocation::Dram => failed.contains(&Level::Dram),
            CopyLocation::RoSsd => failed.contains(&Level::RoSsd),
            CopyLocation::WoSsd => failed.contains(&Level::WoSsd),
            CopyLocation::Hdd => false,
        };
        let pages: BTreeSet<Page> = self.dirty.iter().copied().collect();
        let mut dirty_pages = Vec::with_capacity(pages.len());
        let mut unrecoverable = Vec::new();
        for page in pages {
            let survivors: Vec<CopyLocation> = self.copies(page).into_iter().filter(|&l| !lost(l)).collect();
            if survivors.is_empty() {
                unrecoverable.push(page);
            }
            dirty_pages.push(DirtyPageRecovery { page, survivors });
        }
        let mut failed = failed.to_vec();
        failed.sort();
        failed.dedup();
        RecoverabilityReport { failed, dirty_pages, unrecoverable }
    }

    /// Every dirty page has at least two copies.
    pub fn check_redundancy<I: IntoIterator<Item = Page>>(&self, pages: I) -> Result<(), String> {
        for page in pages {
            if self.dirty.contains(&page) {
                let copies = self.copies(page);
                if copies.len() < 2 {
                    return Err(format!("redundancy: dirty page {page} has copies {copies:?}"));
                }
            }
        }
        Ok(())
    }

    /// Structural consistency of queues and presence maps.
    pub fn check_structure(&self) -> Result<(), String> {
        if !self.dram_read.is_consistent() || !self.ro.is_consistent() || !self.wo.is_consistent() {
            return Err("structure: recency queue index out of sync".into());
        }
        if !self.dram_write.is_consistent() {
            return Err("structure: flush queue index out of sync".into());
        }
        let mut dirty: Vec<Page> = self.dirty.iter().copied().collect();
        dirty.sort_unstable();
        if let Some(p) = dirty.iter().find(|&&p| !self.wo.contains(p)) {
            return Err(format!("redundancy: dirty page {p} absent from WO-SSD"));
        }
        self.check_redundancy(dirty)?;
        for e in self.dram_write.iter().filter(|e| e.valid) {
            if self.dram_read.contains(e.page) {
                return Err(format!("structure: page {} in both DRAM partitions", e.page));
            }
            if !self.wo.contains(e.page) {
                return Err(format!("structure: page {} awaiting flush but absent from WO-SSD", e.page));
            }
        }
        if let Some(p) = self.ro.iter().find(|&p| !self.wo.contains(p)) {
            return Err(format!("structure: page {p} in RO-SSD but not WO-SSD"));
        }
        if let Some(p) = self.eq.iter().find(|&p| self.in_dram(p)) {
            return Err(format!("structure: evicted-queue page {p} is resident in DRAM"));
        }
        if self.eq.len() > self.eq.capacity() {
            return Err("structure: evicted queue over capacity".into());
        }
        Ok(())
    }
}
