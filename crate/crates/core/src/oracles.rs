//! Brute-force reference implementations used to check the real ones.
//!
//! Nothing here shares code with the production modules, and nothing here
//! is fast.

use std::collections::HashMap;
use std::hash::Hash;

/// Exact occurrence counts of a recorded stream.
#[derive(Debug, Clone)]
pub struct ExactCounter<K> {
    counts: HashMap<K, u64>,
}

impl<K: Hash + Eq> Default for ExactCounter<K> {
    fn default() -> Self {
        ExactCounter {
            counts: HashMap::new(),
        }
    }
}

impl<K: Hash + Eq + Clone> ExactCounter<K> {
    pub fn record(&mut self, key: &K) {
        *self.counts.entry(key.clone()).or_insert(0) += 1;
    }

    pub fn count(&self, key: &K) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &u64)> {
        self.counts.iter()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

impl<K: Hash + Eq + Clone> FromIterator<K> for ExactCounter<K> {
    fn from_iter<I: IntoIterator<Item = K>>(iter: I) -> Self {
        let mut c = ExactCounter::default();
        for k in iter {
            c.record(&k);
        }
        c
    }
}

pub fn exact_count<K: PartialEq>(stream: &[K], key: &K) -> u64 {
    stream.iter().filter(|k| *k == key).count() as u64
}

/// Hit count of a textbook LRU cache of `capacity` items.
pub fn reference_lru_hits<K: PartialEq + Clone>(stream: &[K], capacity: usize) -> u64 {
    assert!(capacity >= 1);
    // front = most recently used
    let mut stack: Vec<K> = Vec::with_capacity(capacity + 1);
    let mut hits = 0;
    for key in stream {
        if let Some(pos) = stack.iter().position(|k| k == key) {
            hits += 1;
            stack.remove(pos);
        } else if stack.len() == capacity {
            stack.pop();
        }
        stack.insert(0, key.clone());
    }
    hits
}

/// Hit count of an LRU cache for each capacity in `1..=max_capacity`, from
/// stack distances.
pub fn reference_lru_hit_curve<K: PartialEq + Clone>(
    stream: &[K],
    max_capacity: usize,
) -> Vec<u64> {
    let mut stack: Vec<K> = Vec::new();
    let mut at_distance = vec![0u64; max_capacity + 1];
    for key in stream {
        if let Some(pos) = stack.iter().position(|k| k == key) {
            if pos < max_capacity {
                at_distance[pos + 1] += 1;
            }
            stack.remove(pos);
        }
        stack.insert(0, key.clone());
    }
    let mut curve = Vec::with_capacity(max_capacity);
    let mut acc = 0;
    for hits in &at_distance[1..] {
        acc += hits;
        curve.push(acc);
    }
    curve
}

/// `cdf[k-1] = Σ_{r≤k} r^-skew / Σ_{r≤n} r^-skew` by direct summation.
pub fn exact_zipf_cdf(ground_set: u64, skew: f64) -> Vec<f64> {
    assert!(ground_set >= 1);
    let weight = |r: u64| 1.0 / (r as f64).powf(skew);
    let total: f64 = (1..=ground_set).map(weight).sum();
    let mut out = Vec::with_capacity(ground_set as usize);
    let mut partial = 0.0;
    for r in 1..=ground_set {
        partial += weight(r);
        out.push(partial / total);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(exact_count(&["a", "a", "b"], &"a"), 2);
        assert_eq!(exact_count::<&str>(&[], &"x"), 0);
        let c: ExactCounter<u32> = [1, 2, 1, 3, 1].into_iter().collect();
        assert_eq!(c.count(&1), 3);
        assert_eq!(c.total(), 5);
    }

    #[test]
    fn lru_hits() {
        assert_eq!(reference_lru_hits(&["a", "b", "a"], 2), 1);
        assert_eq!(reference_lru_hits(&["a", "b", "c", "a"], 2), 0);
        let s = [1, 2, 3, 1, 2, 3, 4, 1];
        // capacity ≥ uniques: only cold misses
        assert_eq!(reference_lru_hits(&s, 4), 8 - 4);
    }

    #[test]
    fn hit_curve_matches_direct_simulation() {
        let s: Vec<u32> = (0..500u32).map(|i| (i * 37 + i / 7) % 19).collect();
        let curve = reference_lru_hit_curve(&s, 20);
        for c in 1..=20 {
            assert_eq!(curve[c - 1], reference_lru_hits(&s, c));
        }
        assert!(curve.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn zipf_cdf() {
        assert_eq!(exact_zipf_cdf(1, 0.5), [1.0]);
        let two = exact_zipf_cdf(2, 0.5);
        assert!((two[0] - 1.0 / (1.0 + 2f64.powf(-0.5))).abs() < 1e-15);
        assert!((two[0] - 0.585_786_437_626_905).abs() < 1e-12);
        let big = exact_zipf_cdf(10_000, 0.8);
        assert!((big.last().unwrap() - 1.0).abs() < 1e-12);
    }
}
