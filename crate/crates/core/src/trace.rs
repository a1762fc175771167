//! Block I/O traces: MSR-Cambridge CSV ingestion, the native JSON-lines
//! format, synthetic workload generation and workload statistics.
//!
//! ## MSR-Cambridge format
//!
//! ```text
//! Timestamp,Hostname,DiskNumber,Type,Offset,Size,ResponseTime
//! 128166372003061629,hm,1,Read,8192,4096,559
//! ```
//!
//! Timestamps are Windows filetime ticks (100 ns). Offsets and sizes are in
//! bytes. The response-time column is ignored; latency is simulated.
//!
//! ## Native JSON lines
//!
//! ```text
//! {"arrival_us":0,"lba":2,"pages":1,"op":"R"}
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, ParseErrorKind};

pub const DEFAULT_PAGE_SIZE: u64 = 4096;

/// Page index, in units of the configured page size.
pub type Page = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    #[serde(rename = "R")]
    Read,
    #[serde(rename = "W")]
    Write,
}

impl Op {
    pub fn is_read(self) -> bool {
        matches!(self, Op::Read)
    }
}

/// One block I/O request. The extent is kept intact; the cache engine splits
/// it into per-page operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub arrival_us: u64,
    pub lba: Page,
    pub pages: u64,
    pub op: Op,
}

impl Request {
    pub fn read(arrival_us: u64, lba: Page) -> Self {
        Self { arrival_us, lba, pages: 1, op: Op::Read }
    }

    pub fn write(arrival_us: u64, lba: Page) -> Self {
        Self { arrival_us, lba, pages: 1, op: Op::Write }
    }

    pub fn page_range(&self) -> std::ops::Range<Page> {
        self.lba..self.lba + self.pages
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    MsrCsv,
    NativeJsonLines,
}

/// What to do with a line that fails to parse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedPolicy {
    /// Fail on the first malformed line.
    Abort,
    /// Skip and count every malformed line.
    Skip,
    /// Skip and count, but fail once skipped lines exceed this fraction of
    /// all non-header lines.
    SkipWithLimit(f64),
}

impl Default for MalformedPolicy {
    fn default() -> Self {
        MalformedPolicy::SkipWithLimit(0.01)
    }
}

/// A successfully parsed MSR record: the raw tick count plus the request
/// with its absolute arrival in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MsrRecord {
    pub ticks: u64,
    pub request: Request,
}

/// Parse one MSR-Cambridge CSV line.
///
/// `arrival_us` of the returned request is the absolute tick count divided
/// by ten; readers rebase it against the first record.
pub fn parse_msr_line(line: &str, line_no: usize, page_size: u64) -> Result<MsrRecord, ParseError> {
    let err = |kind| ParseError { line: line_no, kind };
    let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
    if fields.len() != 7 {
        return Err(err(ParseErrorKind::FieldCount(fields.len())));
    }
    let ticks: u64 = fields[0]
        .parse()
        .map_err(|_| err(ParseErrorKind::BadNumber("Timestamp", fields[0].to_string())))?;
    if fields[2].parse::<u64>().is_err() {
        return Err(err(ParseErrorKind::BadNumber("DiskNumber", fields[2].to_string())));
    }
    let op = if fields[3].eq_ignore_ascii_case("read") {
        Op::Read
    } else if fields[3].eq_ignore_ascii_case("write") {
        Op::Write
    } else {
        return Err(err(ParseErrorKind::UnknownOp(fields[3].to_string())));
    };
    let offset: u64 = fields[4]
        .parse()
        .map_err(|_| err(ParseErrorKind::BadNumber("Offset", fields[4].to_string())))?;
    let size: u64 = fields[5]
        .parse()
        .map_err(|_| err(ParseErrorKind::BadNumber("Size", fields[5].to_string())))?;
    if fields[6].parse::<u64>().is_err() {
        return Err(err(ParseErrorKind::BadNumber("ResponseTime", fields[6].to_string())));
    }
    if size == 0 {
        return Err(err(ParseErrorKind::ZeroSize));
    }
    let lba = offset / page_size;
    let pages = (offset % page_size + size).div_ceil(page_size);
    Ok(MsrRecord {
        ticks,
        request: Request { arrival_us: ticks / 10, lba, pages, op },
    })
}

fn parse_jsonl_line(line: &str, line_no: usize) -> Result<Request, ParseError> {
    let req: Request = serde_json::from_str(line).map_err(|e| ParseError {
        line: line_no,
        kind: ParseErrorKind::Json(e.to_string()),
    })?;
    if req.pages == 0 {
        return Err(ParseError { line: line_no, kind: ParseErrorKind::ZeroSize });
    }
    Ok(req)
}

fn is_msr_header(line: &str) -> bool {
    line.split(',')
        .next()
        .map(|f| f.trim().eq_ignore_ascii_case("timestamp"))
        .unwrap_or(false)
}

/// Streaming reader over a trace. Yields requests in file order with
/// arrival times rebased to zero and clamped to be non-decreasing.
pub struct TraceReader<R> {
    reader: R,
    format: TraceFormat,
    page_size: u64,
    policy: MalformedPolicy,
    line: String,
    line_no: usize,
    first_ticks: Option<u64>,
    first_arrival: Option<u64>,
    last_arrival: u64,
    parsed: usize,
    skipped: usize,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R, format: TraceFormat, page_size: u64, policy: MalformedPolicy) -> Self {
        Self {
            reader,
            format,
            page_size,
            policy,
            line: String::new(),
            line_no: 0,
            first_ticks: None,
            first_arrival: None,
            last_arrival: 0,
            parsed: 0,
            skipped: 0,
        }
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn parsed(&self) -> usize {
        self.parsed
    }

    fn rebase(&mut self, raw_ticks: Option<u64>, req: Request) -> Request {
        let arrival = match (self.format, raw_ticks) {
            (TraceFormat::MsrCsv, Some(ticks)) => {
                let first = *self.first_ticks.get_or_insert(ticks);
                ticks.saturating_sub(first) / 10
            }
            _ => {
                let first = *self.first_arrival.get_or_insert(req.arrival_us);
                req.arrival_us.saturating_sub(first)
            }
        };
        let arrival = arrival.max(self.last_arrival);
        self.last_arrival = arrival;
        Request { arrival_us: arrival, ..req }
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<Request, Error>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line.clear();
            match self.reader.read_line(&mut self.line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(Error::Io(e))),
            }
            self.line_no += 1;
            let trimmed = self.line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let parsed = match self.format {
                TraceFormat::MsrCsv => {
                    if self.parsed == 0 && self.skipped == 0 && is_msr_header(trimmed) {
                        continue;
                    }
                    parse_msr_line(trimmed, self.line_no, self.page_size)
                        .map(|rec| (Some(rec.ticks), rec.request))
                }
                TraceFormat::NativeJsonLines => {
                    parse_jsonl_line(trimmed, self.line_no).map(|req| (None, req))
                }
            };
            match parsed {
                Ok((ticks, req)) => {
                    self.parsed += 1;
                    return Some(Ok(self.rebase(ticks, req)));
                }
                Err(e) => match self.policy {
                    MalformedPolicy::Abort => return Some(Err(Error::Parse(e))),
                    MalformedPolicy::Skip | MalformedPolicy::SkipWithLimit(_) => {
                        self.skipped += 1;
                    }
                },
            }
        }
    }
}

/// A fully loaded trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadedTrace {
    pub requests: Vec<Request>,
    pub skipped: usize,
}

/// Read a whole trace file into memory.
pub fn load_trace(
    path: &Path,
    format: TraceFormat,
    page_size: u64,
    policy: MalformedPolicy,
) -> Result<LoadedTrace, Error> {
    let file = File::open(path)?;
    read_trace(BufReader::new(file), format, page_size, policy)
}

pub fn read_trace<R: BufRead>(
    reader: R,
    format: TraceFormat,
    page_size: u64,
    policy: MalformedPolicy,
) -> Result<LoadedTrace, Error> {
    let mut reader = TraceReader::new(reader, format, page_size, policy);
    let mut requests = Vec::new();
    for req in reader.by_ref() {
        requests.push(req?);
    }
    let skipped = reader.skipped();
    if let MalformedPolicy::SkipWithLimit(limit) = policy {
        let total = skipped + requests.len();
        if total > 0 && skipped as f64 / total as f64 > limit {
            return Err(Error::TooManyMalformed { skipped, total, limit });
        }
    }
    Ok(LoadedTrace { requests, skipped })
}

/// Serialize requests as native JSON lines.
pub fn write_jsonl<W: Write>(mut out: W, requests: &[Request]) -> Result<(), Error> {
    for req in requests {
        serde_json::to_writer(&mut out, req).map_err(|e| Error::Io(e.into()))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Locality {
    Uniform,
    Zipf { s: f64 },
}

/// Parameters for a synthetic single-page-request workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub request_count: usize,
    pub read_fraction: f64,
    pub working_set_pages: u64,
    #[serde(default = "default_locality")]
    pub locality: Locality,
    #[serde(default = "default_page_size")]
    pub page_size_bytes: u64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_interarrival")]
    pub interarrival_us: u64,
}

fn default_locality() -> Locality {
    Locality::Uniform
}

fn default_page_size() -> u64 {
    DEFAULT_PAGE_SIZE
}

fn default_interarrival() -> u64 {
    100
}

impl SyntheticSpec {
    pub fn new(request_count: usize, read_fraction: f64, working_set_pages: u64) -> Self {
        Self {
            request_count,
            read_fraction,
            working_set_pages,
            locality: Locality::Uniform,
            page_size_bytes: DEFAULT_PAGE_SIZE,
            rng_seed: 0,
            interarrival_us: default_interarrival(),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.request_count == 0 {
            return Err(Error::Config("synthetic request_count must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.read_fraction) {
            return Err(Error::Config(format!(
                "synthetic read_fraction {} outside [0, 1]",
                self.read_fraction
            )));
        }
        if self.working_set_pages == 0 {
            return Err(Error::Config("synthetic working_set_pages must be >= 1".into()));
        }
        if self.page_size_bytes == 0 {
            return Err(Error::Config("page_size_bytes must be >= 1".into()));
        }
        if let Locality::Zipf { s } = self.locality {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!("zipf exponent {s} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Inverse-CDF sampler over ranks `0..n` with weight `(rank + 1)^-s`.
///
/// Built from a cumulative table and binary search so that the only
/// transcendental call is the per-rank weight, which is exact for `s == 1`.
struct ZipfTable {
    cdf: Vec<f64>,
}

impl ZipfTable {
    fn new(n: u64, s: f64) -> Self {
        let mut cdf = Vec::with_capacity(n as usize);
        let mut acc = 0.0;
        for k in 1..=n {
            let w = if s == 1.0 {
                1.0 / k as f64
            } else if s == 0.0 {
                1.0
            } else {
                (k as f64).powf(-s)
            };
            acc += w;
            cdf.push(acc);
        }
        Self { cdf }
    }

    fn sample(&self, u: f64) -> u64 {
        let total = *self.cdf.last().expect("non-empty table");
        let target = u * total;
        let idx = self.cdf.partition_point(|&c| c <= target);
        idx.min(self.cdf.len() - 1) as u64
    }
}

/// Generate a deterministic synthetic trace. Every request is one page;
/// with Zipf locality page 0 is the most popular.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Vec<Request>, Error> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let zipf = match spec.locality {
        Locality::Zipf { s } => Some(ZipfTable::new(spec.working_set_pages, s)),
        Locality::Uniform => None,
    };
    let mut out = Vec::with_capacity(spec.request_count);
    for i in 0..spec.request_count {
        let is_read = rng.gen::<f64>() < spec.read_fraction;
        let lba = match &zipf {
            Some(table) => table.sample(rng.gen::<f64>()),
            None => rng.gen_range(0..spec.working_set_pages),
        };
        out.push(Request {
            arrival_us: i as u64 * spec.interarrival_us,
            lba,
            pages: 1,
            op: if is_read { Op::Read } else { Op::Write },
        });
    }
    Ok(out)
}

/// Workload characteristics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadStats {
    pub total_requests: u64,
    pub read_requests: u64,
    pub write_requests: u64,
    pub total_bytes: u64,
    pub working_set_pages: u64,
    pub read_working_set_pages: u64,
}

pub fn trace_stats<'a, I>(trace: I, page_size: u64) -> WorkloadStats
where
    I: IntoIterator<Item = &'a Request>,
{
    let mut stats = WorkloadStats::default();
    let mut touched: HashSet<Page> = HashSet::new();
    let mut read: HashSet<Page> = HashSet::new();
    for req in trace {
        stats.total_requests += 1;
        stats.total_bytes += req.pages * page_size;
        match req.op {
            Op::Read => {
                stats.read_requests += 1;
                read.extend(req.page_range());
            }
            Op::Write => stats.write_requests += 1,
        }
        touched.extend(req.page_range());
    }
    stats.working_set_pages = touched.len() as u64;
    stats.read_working_set_pages = read.len() as u64;
    stats
}
