//! Trace-driven simulator for a three-level I/O cache built from DRAM, a
//! read-optimized SSD and a write-optimized SSD in front of an HDD.
//!
//! The [`cache::TicaEngine`] replays block requests one at a time and keeps
//! per-device counters; [`analytics`] turns those into hit ratio, write
//! amplification, energy, reliability and cost figures. [`baselines`]
//! provides mirrored and single-SSD caches that report the same statistics.

pub mod adaptive;
pub mod analytics;
pub mod baselines;
pub mod cache;
pub mod devices;
pub mod error;
pub mod experiment;
pub mod lru;
pub mod report;
pub mod trace;

pub use error::{Error, Result};
