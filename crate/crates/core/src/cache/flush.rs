use std::collections::{HashMap, VecDeque};

use crate::devices::Micros;
use crate::trace::Page;

/// One asynchronous DRAM -> RO-SSD copy in flight.
///
/// The entry holds a DRAM write-partition slot until `completion_us`. An
/// entry loses `valid` when its page is overwritten or evicted from the
/// SSDs; the slot stays busy but the page no longer counts as cached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlushEntry {
    pub page: Page,
    pub acked_us: Micros,
    pub completion_us: Micros,
    pub valid: bool,
}

/// FIFO of in-flight flushes; it is also the DRAM write partition.
#[derive(Debug, Clone, Default)]
pub struct FlushQueue {
    entries: VecDeque<FlushEntry>,
    valid: HashMap<Page, u64>,
    head_seq: u64,
}

impl FlushQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Slots held, including invalidated entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, page: Page) -> bool {
        self.valid.contains_key(&page)
    }

    pub fn resident_pages(&self) -> usize {
        self.valid.len()
    }

    pub fn front(&self) -> Option<&FlushEntry> {
        self.entries.front()
    }

    pub fn push(&mut self, entry: FlushEntry) {
        let seq = self.head_seq + self.entries.len() as u64;
        if entry.valid {
            let prev = self.valid.insert(entry.page, seq);
            debug_assert!(prev.is_none(), "page {} already has a valid flush", entry.page);
        }
        self.entries.push_back(entry);
    }

    /// Invalidate the page's pending flush. Returns the entry as it was.
    pub fn invalidate(&mut self, page: Page) -> Option<FlushEntry> {
        let seq = self.valid.remove(&page)?;
        let entry = &mut self.entries[(seq - self.head_seq) as usize];
        let before = *entry;
        entry.valid = false;
        Some(before)
    }

    /// Pop the head if it completes by `clock`.
    pub fn pop_ready(&mut self, clock: Micros) -> Option<FlushEntry> {
        if self.entries.front()?.completion_us > clock {
            return None;
        }
        let entry = self.entries.pop_front()?;
        if entry.valid {
            self.valid.remove(&entry.page);
        }
        self.head_seq += 1;
        Some(entry)
    }

    pub fn iter(&self) -> impl Iterator<Item = &FlushEntry> {
        self.entries.iter()
    }

    pub fn is_consistent(&self) -> bool {
        let valid_entries = self.entries.iter().filter(|e| e.valid).count();
        let ordered = self
            .entries
            .iter()
            .zip(self.entries.iter().skip(1))
            .all(|(a, b)| a.completion_us <= b.completion_us);
        valid_entries == self.valid.len()
            && ordered
            && self.valid.iter().all(|(&page, &seq)| {
                seq >= self.head_seq
                    && self.entries.get((seq - self.head_seq) as usize).is_some_and(|e| e.page == page && e.valid)
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(page: Page, completion: f64) -> FlushEntry {
        FlushEntry { page, acked_us: 0.0, completion_us: completion, valid: true }
    }

    #[test]
    fn empty_queue_pops_nothing() {
        let mut q = FlushQueue::new();
        assert!(q.pop_ready(1e9).is_none());
    }

    #[test]
    fn pops_in_order_when_ready() {
        let mut q = FlushQueue::new();
        q.push(entry(1, 10.0));
        q.push(entry(2, 20.0));
        assert!(q.pop_ready(5.0).is_none());
        assert_eq!(q.pop_ready(15.0).unwrap().page, 1);
        assert!(q.pop_ready(15.0).is_none());
        assert!(q.contains(2));
        assert_eq!(q.pop_ready(20.0).unwrap().page, 2);
        assert!(q.is_empty());
    }

    #[test]
    fn invalidated_entry_keeps_slot() {
        let mut q = FlushQueue::new();
        q.push(entry(1, 10.0));
        q.push(entry(2, 20.0));
        assert!(q.invalidate(1).is_some());
        assert!(!q.contains(1));
        assert_eq!(q.len(), 2);
        assert_eq!(q.resident_pages(), 1);
        q.push(entry(1, 30.0));
        assert!(q.is_consistent());
        let first = q.pop_ready(100.0).unwrap();
        assert!(!first.valid);
        // The re-pushed page stays valid after the stale entry leaves.
        assert!(q.contains(1));
        assert!(q.is_consistent());
    }
}
