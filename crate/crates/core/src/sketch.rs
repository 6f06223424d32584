//! Count-Min frequency sketch with saturating counters and periodic halving.
//!
//! The sketch keeps `depth` rows of `width` small counters. Every recorded
//! request bumps one counter per row; an estimate is the row minimum, so it
//! can overshoot (hash collisions) but never undershoot the true count until
//! aging kicks in. After `sample_size` increments every counter is halved,
//! which lets yesterday's popular items fade out.
//!
//! Counters saturate at `ceil(sample_size / tracked_capacity)`. With the
//! default `sample_size = 10 * capacity` that cap is 10, which fits the
//! 4-bit counter budget.

use crate::error::{Error, Result};
use crate::ItemKey;

/// Shape and aging parameters of a [`FrequencySketch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchConfig {
    /// Increments between two halvings.
    pub sample_size: u64,
    /// Number of items the cache(s) can hold in total.
    pub tracked_capacity: u64,
    pub depth: usize,
    pub width: usize,
    pub counter_bits: u32,
}

impl SketchConfig {
    /// Default sizing for a cache hierarchy holding `capacity` items:
    /// `W = 10·C`, depth 4, width = next power of two ≥ C, 4-bit counters.
    pub fn for_capacity(capacity: u64) -> Self {
        let capacity = capacity.max(1);
        SketchConfig {
            sample_size: capacity.saturating_mul(10),
            tracked_capacity: capacity,
            depth: 4,
            width: (capacity as usize).next_power_of_two(),
            counter_bits: 4,
        }
    }

    pub fn cap(&self) -> u64 {
        self.sample_size.div_ceil(self.tracked_capacity)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(format!("sketch: {msg}")));
        if self.sample_size == 0 || self.tracked_capacity == 0 {
            return bad("sample size and tracked capacity must be positive".into());
        }
        if self.depth == 0 {
            return bad("depth must be at least 1".into());
        }
        if (self.width as u64) < self.tracked_capacity {
            return bad(format!(
                "width {} is smaller than tracked capacity {}",
                self.width, self.tracked_capacity
            ));
        }
        if self.counter_bits == 0 || self.counter_bits > 8 {
            return bad(format!("counter_bits {} outside 1..=8", self.counter_bits));
        }
        let max = (1u64 << self.counter_bits) - 1;
        if self.cap() > max {
            return bad(format!(
                "counter cap {} does not fit in {} bits (max {max})",
                self.cap(),
                self.counter_bits
            ));
        }
        Ok(())
    }
}

/// Approximate per-key request counter used by the admission and promotion
/// filters.
#[derive(Debug, Clone)]
pub struct FrequencySketch {
    config: SketchConfig,
    cap: u8,
    seeds: Vec<u64>,
    counters: Vec<u8>,
    increments_since_reset: u64,
}

impl FrequencySketch {
    /// Builds an empty sketch. Row hash seeds are derived from `seed`.
    pub fn new(config: SketchConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut state = seed;
        let seeds = (0..config.depth).map(|_| splitmix64(&mut state)).collect();
        Ok(FrequencySketch {
            config,
            cap: config.cap() as u8,
            seeds,
            counters: vec![0; config.depth * config.width],
            increments_since_reset: 0,
        })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn cap(&self) -> u64 {
        u64::from(self.cap)
    }

    pub fn increments_since_reset(&self) -> u64 {
        self.increments_since_reset
    }

    /// Column addressed by `key` in `row`.
    pub fn slot(&self, row: usize, key: ItemKey) -> usize {
        let h = mix64(key.0 ^ self.seeds[row]);
        // Lemire's multiply-shift range reduction; width need not be a power of two.
        ((u128::from(h) * self.config.width as u128) >> 64) as usize
    }

    /// Counts one request for `key`; halves the whole sketch once the sample
    /// window fills.
    pub fn record(&mut self, key: ItemKey) {
        let width = self.config.width;
        for row in 0..self.config.depth {
            let idx = row * width + self.slot(row, key);
            let c = &mut self.counters[idx];
            if *c < self.cap {
                *c += 1;
            }
        }
        self.increments_since_reset += 1;
        if self.increments_since_reset >= self.config.sample_size {
            self.halve();
            self.increments_since_reset = 0;
        }
    }

    pub fn estimate(&self, key: ItemKey) -> u64 {
        let width = self.config.width;
        (0..self.config.depth)
            .map(|row| self.counters[row * width + self.slot(row, key)])
            .min()
            .map_or(0, u64::from)
    }

    /// Floor-halves every counter.
    pub fn halve(&mut self) {
        for c in &mut self.counters {
            *c >>= 1;
        }
    }

    /// Raw counter matrix, row-major.
    pub fn counters(&self) -> &[u8] {
        &self.counters
    }
}

pub(crate) fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    mix64(*state)
}

// splitmix64 finalizer
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
