//! Recency queues used by the cache directory.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::trace::Page;

/// Strict LRU over page ids. Ties cannot occur: every insert or touch takes
/// a fresh sequence number.
#[derive(Debug, Clone, Default)]
pub struct LruQueue {
    by_seq: BTreeMap<u64, Page>,
    seq_of: HashMap<Page, u64>,
    next_seq: u64,
}

impl LruQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.seq_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq_of.is_empty()
    }

    pub fn contains(&self, page: Page) -> bool {
        self.seq_of.contains_key(&page)
    }

    /// Insert at the MRU end, or move there if already present.
    pub fn touch(&mut self, page: Page) {
        if let Some(old) = self.seq_of.insert(page, self.next_seq) {
            self.by_seq.remove(&old);
        }
        self.by_seq.insert(self.next_seq, page);
        self.next_seq += 1;
    }

    /// Move to MRU only if present.
    pub fn refresh(&mut self, page: Page) -> bool {
        if self.contains(page) {
            self.touch(page);
            true
        } else {
            false
        }
    }

    pub fn remove(&mut self, page: Page) -> bool {
        match self.seq_of.remove(&page) {
            Some(seq) => {
                self.by_seq.remove(&seq);
                true
            }
            None => false,
        }
    }

    pub fn pop_lru(&mut self) -> Option<Page> {
        let (_, page) = self.by_seq.pop_first()?;
        self.seq_of.remove(&page);
        Some(page)
    }

    pub fn peek_lru(&self) -> Option<Page> {
        self.by_seq.first_key_value().map(|(_, p)| *p)
    }

    /// Pages from LRU to MRU.
    pub fn iter(&self) -> impl Iterator<Item = Page> + '_ {
        self.by_seq.values().copied()
    }

    /// The two internal indexes agree with each other.
    pub fn is_consistent(&self) -> bool {
        self.by_seq.len() == self.seq_of.len()
            && self.by_seq.iter().all(|(seq, page)| self.seq_of.get(page) == Some(seq))
    }
}

/// Bounded FIFO of page ids without data (the evicted queue).
#[derive(Debug, Clone)]
pub struct GhostQueue {
    order: VecDeque<Page>,
    members: HashSet<Page>,
    capacity: usize,
}

impl GhostQueue {
    pub fn new(capacity: usize) -> Self {
        Self { order: VecDeque::new(), members: HashSet::new(), capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, page: Page) -> bool {
        self.members.contains(&page)
    }

    /// Append `page`, dropping the oldest entry when full. A page already in
    /// the queue moves to the newest position.
    pub fn push(&mut self, page: Page) {
        if self.capacity == 0 {
            return;
        }
        if self.members.contains(&page) {
            self.remove(page);
        }
        while self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.members.remove(&old);
            }
        }
        self.order.push_back(page);
        self.members.insert(page);
    }

    pub fn remove(&mut self, page: Page) -> bool {
        if self.members.remove(&page) {
            if let Some(pos) = self.order.iter().position(|&p| p == page) {
                self.order.remove(pos);
            }
            true
        } else {
            false
        }
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = Page> + '_ {
        self.order.iter().copied()
    }
}
