/// DRAM split into a read partition and an asynchronous write partition.
///
/// Sizes are tracked in pages; the grow/shrink exponents work on the write
/// size normalized by its baseline (`w = size / baseline`), so growth steps
/// are `2^-(w-1)` baselines and shrink steps are `2^(w-1)` baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct DramPartition {
    capacity: u64,
    write_cache_pages: f64,
    def_write_cache_pages: f64,
    min_read_pages: u64,
}

impl DramPartition {
    pub fn new(capacity: u64, def_write_cache_pages: u64, min_read_pages: u64) -> Self {
        assert!(def_write_cache_pages >= 1);
        assert!(
            def_write_cache_pages + min_read_pages <= capacity,
            "baseline write partition and read floor exceed DRAM capacity"
        );
        Self {
            capacity,
            write_cache_pages: def_write_cache_pages as f64,
            def_write_cache_pages: def_write_cache_pages as f64,
            min_read_pages,
        }
    }

    /// Baseline sizes as fractions of DRAM capacity, each at least one page.
    pub fn from_fractions(capacity: u64, def_write_fraction: f64, min_read_fraction: f64) -> Self {
        let def = ((capacity as f64 * def_write_fraction).floor() as u64).max(1);
        let min_read = ((capacity as f64 * min_read_fraction).floor() as u64).max(1);
        Self::new(capacity, def, min_read)
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn write_cache_pages(&self) -> f64 {
        self.write_cache_pages
    }

    pub fn def_write_cache_pages(&self) -> f64 {
        self.def_write_cache_pages
    }

    pub fn min_read_pages(&self) -> u64 {
        self.min_read_pages
    }

    /// Upper bound for the write partition.
    pub fn cap(&self) -> f64 {
        (self.capacity - self.min_read_pages) as f64
    }

    /// Whole pages available to the write partition.
    pub fn write_limit(&self) -> usize {
        self.write_cache_pages.ceil() as usize
    }

    pub fn read_cache_pages(&self) -> usize {
        self.capacity as usize - self.write_limit()
    }

    /// Read pages allowed given the write partition's physical occupancy,
    /// which can temporarily exceed its limit after a shrink.
    pub fn read_limit(&self, write_occupancy: usize) -> usize {
        self.capacity as usize - self.write_limit().max(write_occupancy)
    }

    fn normalized(&self) -> f64 {
        self.write_cache_pages / self.def_write_cache_pages
    }

    pub fn grow(&mut self) -> f64 {
        let w = self.normalized();
        let next = (w + (-(w - 1.0)).exp2()) * self.def_write_cache_pages;
        self.write_cache_pages = next.min(self.cap());
        self.write_cache_pages
    }

    pub fn shrink(&mut self) -> f64 {
        let w = self.normalized();
        let next = (w - (w - 1.0).exp2()).max(1.0);
        self.write_cache_pages = next * self.def_write_cache_pages;
        self.write_cache_pages
    }
}
