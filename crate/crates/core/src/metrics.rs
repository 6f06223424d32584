//! Hit/miss/write accounting and the two average-latency models.
//!
//! Read latency charges every request the access time of the level that
//! served it (or the miss penalty). Read&write latency additionally charges
//! each write at the access time of the level written. Real systems land
//! somewhere between the two, depending on how much write traffic is hidden
//! behind reads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policies::{AccessOutcome, Classification};

/// Raw per-level counters of one simulation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub requests: u64,
    pub h_l1_window: u64,
    pub h_l1_veterans: u64,
    /// Hits at levels 2..=N; index 0 is L2.
    pub h_level: Vec<u64>,
    pub misses: u64,
    /// Writes at levels 1..=N; index 0 is L1.
    pub w_level: Vec<u64>,
}

impl SimStats {
    pub fn new(levels: usize) -> Self {
        assert!(levels >= 2, "a hierarchy needs at least two levels");
        SimStats {
            requests: 0,
            h_l1_window: 0,
            h_l1_veterans: 0,
            h_level: vec![0; levels - 1],
            misses: 0,
            w_level: vec![0; levels],
        }
    }

    pub fn levels(&self) -> usize {
        self.w_level.len()
    }

    pub fn record(&mut self, outcome: &AccessOutcome) {
        self.requests += 1;
        match outcome.classification {
            Classification::HitL1Window => self.h_l1_window += 1,
            Classification::HitL1Veterans => self.h_l1_veterans += 1,
            Classification::HitLevel(level) => self.h_level[level - 2] += 1,
            Classification::Miss => self.misses += 1,
        }
        for w in &outcome.writes {
            self.w_level[w.level - 1] += u64::from(w.count);
        }
        debug_assert!(self.is_closed(), "accounting closure violated: {self:?}");
    }

    /// Hits served by level `level` (1-based).
    pub fn hits(&self, level: usize) -> u64 {
        match level {
            1 => self.h_l1_window + self.h_l1_veterans,
            l => self.h_level[l - 2],
        }
    }

    pub fn writes(&self, level: usize) -> u64 {
        self.w_level[level - 1]
    }

    pub fn total_hits(&self) -> u64 {
        self.h_l1_window + self.h_l1_veterans + self.h_level.iter().sum::<u64>()
    }

    /// Every request is exactly one hit somewhere or one miss.
    pub fn is_closed(&self) -> bool {
        self.total_hits() + self.misses == self.requests
    }

    pub fn hit_ratio(&self) -> Result<f64> {
        if self.requests == 0 {
            return Err(Error::NoRequests);
        }
        Ok(self.total_hits() as f64 / self.requests as f64)
    }
}

/// Access times in nanoseconds. `level_ns[0]` is L1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyParams {
    pub level_ns: Vec<u64>,
    pub miss_ns: u64,
}

impl Default for LatencyParams {
    /// 100ns DRAM, 200µs SSD, 2ms backing store.
    fn default() -> Self {
        LatencyParams {
            level_ns: vec![100, 200_000],
            miss_ns: 2_000_000,
        }
    }
}

impl LatencyParams {
    pub fn new(level_ns: Vec<u64>, miss_ns: u64) -> Result<Self> {
        let p = LatencyParams { level_ns, miss_ns };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.level_ns.is_empty() || self.level_ns.contains(&0) || self.miss_ns == 0 {
            return Err(Error::InvalidConfig(format!(
                "latencies must be strictly positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Pads (repeating the deepest given level) or checks the level list so
    /// it covers `levels` levels.
    pub fn for_levels(&self, levels: usize) -> Result<Self> {
        if self.level_ns.len() > levels {
            return Err(Error::InvalidConfig(format!(
                "{} level latencies given for a {levels}-level hierarchy",
                self.level_ns.len()
            )));
        }
        let mut level_ns = self.level_ns.clone();
        let last = *level_ns.last().expect("validated non-empty");
        level_ns.resize(levels, last);
        Ok(LatencyParams {
            level_ns,
            miss_ns: self.miss_ns,
        })
    }

    fn level(&self, stats: &SimStats, level: usize) -> Result<u128> {
        self.level_ns
            .get(level - 1)
            .map(|&t| u128::from(t))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "no latency for level {level} of {}",
                    stats.levels()
                ))
            })
    }

    fn read_numerator(&self, stats: &SimStats) -> Result<u128> {
        let mut total = u128::from(self.miss_ns) * u128::from(stats.misses);
        for level in 1..=stats.levels() {
            total += self.level(stats, level)? * u128::from(stats.hits(level));
        }
        Ok(total)
    }

    fn write_numerator(&self, stats: &SimStats) -> Result<u128> {
        let mut total = 0u128;
        for level in 1..=stats.levels() {
            total += self.level(stats, level)? * u128::from(stats.writes(level));
        }
        Ok(total)
    }
}

/// Mean read latency per request, in nanoseconds.
pub fn avg_read_latency(stats: &SimStats, params: &LatencyParams) -> Result<f64> {
    if stats.requests == 0 {
        return Err(Error::NoRequests);
    }
    let num = params.read_numerator(stats)?;
    Ok(num as f64 / stats.requests as f64)
}

/// Mean latency per request when writes are charged too, in nanoseconds.
pub fn avg_rw_latency(stats: &SimStats, params: &LatencyParams) -> Result<f64> {
    if stats.requests == 0 {
        return Err(Error::NoRequests);
    }
    let num = params.read_numerator(stats)? + params.write_numerator(stats)?;
    Ok(num as f64 / stats.requests as f64)
}

pub fn hit_ratio(stats: &SimStats) -> Result<f64> {
    stats.hit_ratio()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level(h1: u64, h2: u64, m: u64, w1: u64, w2: u64) -> SimStats {
        SimStats {
            requests: h1 + h2 + m,
            h_l1_window: h1,
            h_l1_veterans: 0,
            h_level: vec![h2],
            misses: m,
            w_level: vec![w1, w2],
        }
    }

    #[test]
    fn all_l1_hits() {
        let s = two_level(100, 0, 0, 0, 0);
        assert_eq!(
            avg_read_latency(&s, &LatencyParams::default()).unwrap(),
            100.0
        );
    }

    #[test]
    fn worked_read_and_write_example() {
        let p = LatencyParams::default();
        let s = two_level(50, 30, 20, 100, 10);
        assert_eq!(avg_read_latency(&s, &p).unwrap(), 460_050.0);
        assert_eq!(avg_rw_latency(&s, &p).unwrap(), 480_150.0);
    }

    #[test]
    fn all_misses() {
        let s = two_level(0, 0, 7, 0, 0);
        assert_eq!(
            avg_read_latency(&s, &LatencyParams::default()).unwrap(),
            2_000_000.0
        );
        assert_eq!(s.hit_ratio().unwrap(), 0.0);
    }

    #[test]
    fn zero_writes_reduce_to_read() {
        let p = LatencyParams::default();
        let s = two_level(11, 12, 13, 0, 0);
        assert_eq!(
            avg_read_latency(&s, &p).unwrap(),
            avg_rw_latency(&s, &p).unwrap()
        );
    }

    #[test]
    fn write_per_request() {
        let s = two_level(40, 0, 0, 0, 40);
        assert_eq!(
            avg_rw_latency(&s, &LatencyParams::default()).unwrap(),
            200_100.0
        );
    }

    #[test]
    fn hit_ratios() {
        assert_eq!(two_level(100, 0, 0, 0, 0).hit_ratio().unwrap(), 1.0);
        assert_eq!(two_level(40, 25, 35, 0, 0).hit_ratio().unwrap(), 0.65);
    }

    #[test]
    fn empty_run_is_an_error() {
        let s = SimStats::new(2);
        let p = LatencyParams::default();
        assert!(matches!(avg_read_latency(&s, &p), Err(Error::NoRequests)));
        assert!(matches!(avg_rw_latency(&s, &p), Err(Error::NoRequests)));
        assert!(matches!(hit_ratio(&s), Err(Error::NoRequests)));
    }

    #[test]
    fn deeper_levels_use_their_own_latency() {
        let s = SimStats {
            requests: 4,
            h_l1_window: 1,
            h_l1_veterans: 0,
            h_level: vec![1, 1],
            misses: 1,
            w_level: vec![0, 0, 2],
        };
        let p = LatencyParams::new(vec![1, 10, 100], 1000).unwrap();
        assert_eq!(avg_read_latency(&s, &p).unwrap(), 1111.0 / 4.0);
        assert_eq!(avg_rw_latency(&s, &p).unwrap(), 1311.0 / 4.0);
        assert!(avg_read_latency(&s, &LatencyParams::default()).is_err());
        let padded = LatencyParams::default().for_levels(3).unwrap();
        assert_eq!(padded.level_ns, [100, 200_000, 200_000]);
    }

    #[test]
    fn rejects_non_positive_latency() {
        assert!(LatencyParams::new(vec![0, 1], 1).is_err());
        assert!(LatencyParams::new(vec![1, 1], 0).is_err());
    }
}
