//! Multilevel cache policies.
//!
//! Every policy implements [`MultiLevelPolicy`]: it consumes one request at a
//! time, keeps the levels exclusive (an item lives in at most one space), and
//! reports where the request was served and which levels were written.

mod baselines;
mod bidi;
mod nlevel;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

pub use baselines::{Demote, NaiveLru, Promote};
pub use bidi::BiDiFilter;
pub use nlevel::BiDiFilterN;

use crate::cache_core::CacheSpace;
use crate::error::{Error, Result};
use crate::metrics::SimStats;
use crate::{FxMap, ItemKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    BiDiFilter,
    /// BiDiFilter whose L1 is a single LRU shared by new and promoted items.
    BiDiFilterUnited,
    Demote,
    NaiveLru,
    Promote,
}

impl PolicyKind {
    pub fn is_bidi(self) -> bool {
        matches!(self, PolicyKind::BiDiFilter | PolicyKind::BiDiFilterUnited)
    }
}

/// What to do when candidate and victim have the same frequency estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    #[default]
    Admit,
    Reject,
}

impl TieBreak {
    pub fn admits(self, candidate: u64, victim: u64) -> bool {
        match self {
            TieBreak::Admit => candidate >= victim,
            TieBreak::Reject => candidate > victim,
        }
    }
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieBreak::Admit => "admit",
            TieBreak::Reject => "reject",
        })
    }
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "admit" | "t" | "true" => Ok(TieBreak::Admit),
            "reject" | "f" | "false" => Ok(TieBreak::Reject),
            other => Err(Error::InvalidConfig(format!(
                "unknown tie-break {other:?} (expected admit or reject)"
            ))),
        }
    }
}

/// Full configuration of one policy instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Item capacities of L1..LN.
    pub level_capacities: Vec<usize>,
    /// Window share of L1 (BiDiFilter only).
    pub window_fraction: f64,
    pub tie_break: TieBreak,
    /// Promote: probability that an L2 hit is promoted into L1.
    pub promote_prob: f64,
    /// Promote: probability that an L1 victim is written into L2.
    pub demote_prob: f64,
    pub rng_seed: u64,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, level_capacities: Vec<usize>) -> Self {
        PolicySpec {
            kind,
            level_capacities,
            window_fraction: if kind == PolicyKind::BiDiFilterUnited {
                1.0
            } else {
                0.5
            },
            tie_break: TieBreak::Admit,
            promote_prob: 0.5,
            demote_prob: 0.5,
            rng_seed: 0,
        }
    }

    pub fn bidi(level_capacities: Vec<usize>, window_fraction: f64, tie_break: TieBreak) -> Self {
        PolicySpec {
            window_fraction,
            tie_break,
            ..Self::new(PolicyKind::BiDiFilter, level_capacities)
        }
    }

    pub fn promote(level_capacities: Vec<usize>, promote_prob: f64, demote_prob: f64) -> Self {
        PolicySpec {
            promote_prob,
            demote_prob,
            ..Self::new(PolicyKind::Promote, level_capacities)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn levels(&self) -> usize {
        self.level_capacities.len()
    }

    pub fn total_capacity(&self) -> usize {
        self.level_capacities.iter().sum()
    }

    pub fn effective_window_fraction(&self) -> f64 {
        match self.kind {
            PolicyKind::BiDiFilterUnited => 1.0,
            _ => self.window_fraction,
        }
    }

    /// (window, veterans) capacities of L1.
    pub fn l1_split(&self) -> (usize, usize) {
        let l1 = self.level_capacities[0];
        let window = ((self.effective_window_fraction() * l1 as f64).round() as usize).min(l1);
        (window, l1 - window)
    }

    /// Short label used in result tables, e.g. `BiDiFilter50T`.
    pub fn name(&self) -> String {
        match self.kind {
            PolicyKind::BiDiFilter => format!(
                "BiDiFilter{}{}",
                (self.window_fraction * 100.0).round() as i64,
                match self.tie_break {
                    TieBreak::Admit => 'T',
                    TieBreak::Reject => 'F',
                }
            ),
            PolicyKind::BiDiFilterUnited => "BiDiFilterLRU".into(),
            PolicyKind::Demote => "Demote".into(),
            PolicyKind::NaiveLru => "LRU".into(),
            PolicyKind::Promote => {
                format!("Promote-p{}-q{}", self.promote_prob, self.demote_prob)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.levels() < 2 {
            return bad(format!("need at least 2 levels, got {}", self.levels()));
        }
        if let Some(i) = self.level_capacities.iter().position(|&c| c == 0) {
            return bad(format!("level {} has zero capacity", i + 1));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.window_fraction) {
            return bad(format!(
                "window fraction {} outside [0, 1]",
                self.window_fraction
            ));
        }
        if !unit(self.promote_prob) || !unit(self.demote_prob) {
            return bad(format!(
                "promote/demote probabilities ({}, {}) outside [0, 1]",
                self.promote_prob, self.demote_prob
            ));
        }
        if self.kind == PolicyKind::Promote && self.levels() != 2 {
            return bad("Promote is a two-level policy".into());
        }
        Ok(())
    }
}

/// Where a request was served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    /// Hit in the Window space, or anywhere in L1 for policies without a split L1.
    HitL1Window,
    HitL1Veterans,
    /// Hit at level `i >= 2` (1-based).
    HitLevel(usize),
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelWrite {
    /// 1-based level.
    pub level: usize,
    pub count: u32,
}

/// Result of one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessOutcome {
    pub classification: Classification,
    /// Sorted by level, one entry per written level.
    pub writes: SmallVec<[LevelWrite; 4]>,
}

impl AccessOutcome {
    pub fn new(classification: Classification) -> Self {
        AccessOutcome {
            classification,
            writes: SmallVec::new(),
        }
    }

    pub(crate) fn write(&mut self, level: usize) {
        match self.writes.binary_search_by_key(&level, |w| w.level) {
            Ok(i) => self.writes[i].count += 1,
            Err(i) => self.writes.insert(i, LevelWrite { level, count: 1 }),
        }
    }

    /// `(level, count)` pairs, for terse assertions.
    pub fn write_pairs(&self) -> Vec<(usize, u32)> {
        self.writes.iter().map(|w| (w.level, w.count)).collect()
    }
}

/// Which filter produced a [`FilterDecision`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    /// Candidate moving down into `level`.
    Admission { level: usize },
    /// L(level+1) hit trying to move up into `level`.
    Promotion { level: usize },
}

/// One frequency comparison made against a full destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterDecision {
    pub filter: FilterKind,
    pub candidate: ItemKey,
    pub victim: ItemKey,
    pub candidate_estimate: u64,
    pub victim_estimate: u64,
    pub admitted: bool,
}

/// Read-only view of one space, for invariant checks.
#[derive(Debug, Clone, Copy)]
pub struct SpaceView<'a> {
    pub level: usize,
    pub name: &'static str,
    pub space: &'a CacheSpace,
}

pub trait MultiLevelPolicy: Send {
    fn name(&self) -> String;

    fn levels(&self) -> usize;

    /// Serves one request and updates the policy's statistics.
    fn access(&mut self, key: ItemKey) -> AccessOutcome;

    fn stats(&self) -> &SimStats;

    fn spaces(&self) -> Vec<SpaceView<'_>>;

    /// Level holding `key`, if cached.
    fn level_of(&self, key: ItemKey) -> Option<usize> {
        self.spaces()
            .into_iter()
            .find(|v| v.space.contains(key))
            .map(|v| v.level)
    }
}

/// Builds the policy described by `spec`.
pub fn build(spec: &PolicySpec) -> Result<Box<dyn MultiLevelPolicy>> {
    spec.validate()?;
    Ok(match spec.kind {
        PolicyKind::BiDiFilter | PolicyKind::BiDiFilterUnited if spec.levels() == 2 => {
            Box::new(BiDiFilter::new(spec)?)
        }
        PolicyKind::BiDiFilter | PolicyKind::BiDiFilterUnited => Box::new(BiDiFilterN::new(spec)?),
        PolicyKind::Demote => Box::new(Demote::new(spec)?),
        PolicyKind::NaiveLru => Box::new(NaiveLru::new(spec)?),
        PolicyKind::Promote => Box::new(Promote::new(spec)?),
    })
}

/// A broken structural invariant, as found by [`check_invariants`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvariantViolation {
    #[error("{space} at level {level} holds {len} items, capacity {capacity}")]
    OverCapacity {
        level: usize,
        space: &'static str,
        len: usize,
        capacity: usize,
    },
    #[error("{key:?} present in both {first} and {second}")]
    Duplicate {
        key: ItemKey,
        first: &'static str,
        second: &'static str,
    },
    #[error("level {level}: stats report {reported} writes, spaces saw {inserted} inserts")]
    WriteAccounting {
        level: usize,
        reported: u64,
        inserted: u64,
    },
    #[error("hits plus misses do not add up to requests")]
    Closure,
}

/// Checks capacity, exclusivity, write accounting and stats closure.
pub fn check_invariants(policy: &dyn MultiLevelPolicy) -> Result<(), InvariantViolation> {
    let spaces = policy.spaces();
    let mut seen: FxMap<ItemKey, &'static str> = FxMap::default();
    let mut inserts = vec![0u64; policy.levels()];
    for v in &spaces {
        if v.space.len() > v.space.capacity() {
            return Err(InvariantViolation::OverCapacity {
                level: v.level,
                space: v.name,
                len: v.space.len(),
                capacity: v.space.capacity(),
            });
        }
        for key in v.space.keys() {
            if let Some(first) = seen.insert(key, v.name) {
                return Err(InvariantViolation::Duplicate {
                    key,
                    first,
                    second: v.name,
                });
            }
        }
        inserts[v.level - 1] += v.space.inserts();
    }
    let stats = policy.stats();
    for (i, &inserted) in inserts.iter().enumerate() {
        let reported = stats.writes(i + 1);
        if reported != inserted {
            return Err(InvariantViolation::WriteAccounting {
                level: i + 1,
                reported,
                inserted,
            });
        }
    }
    if !stats.is_closed() {
        return Err(InvariantViolation::Closure);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tie_break_rules() {
        assert!(TieBreak::Admit.admits(3, 3));
        assert!(!TieBreak::Reject.admits(3, 3));
        assert!(TieBreak::Reject.admits(4, 3));
        assert!(!TieBreak::Admit.admits(2, 3));
        assert_eq!("reject".parse::<TieBreak>().unwrap(), TieBreak::Reject);
        assert!("maybe".parse::<TieBreak>().is_err());
    }

    #[test]
    fn names() {
        assert_eq!(
            PolicySpec::bidi(vec![1, 10], 0.5, TieBreak::Admit).name(),
            "BiDiFilter50T"
        );
        assert_eq!(
            PolicySpec::bidi(vec![1, 10], 0.01, TieBreak::Reject).name(),
            "BiDiFilter1F"
        );
        assert_eq!(
            PolicySpec::new(PolicyKind::BiDiFilterUnited, vec![1, 10]).name(),
            "BiDiFilterLRU"
        );
        assert_eq!(
            PolicySpec::new(PolicyKind::NaiveLru, vec![1, 10]).name(),
            "LRU"
        );
    }

    #[test]
    fn l1_split_rounds() {
        let s = |f| PolicySpec::bidi(vec![10, 100], f, TieBreak::Admit).l1_split();
        assert_eq!(s(0.5), (5, 5));
        assert_eq!(s(0.0), (0, 10));
        assert_eq!(s(1.0), (10, 0));
        assert_eq!(s(0.01), (0, 10));
        assert_eq!(s(0.99), (10, 0));
        assert_eq!(
            PolicySpec::bidi(vec![1, 2], 0.5, TieBreak::Admit).l1_split(),
            (1, 0)
        );
    }

    #[test]
    fn validation() {
        assert!(PolicySpec::bidi(vec![1], 0.5, TieBreak::Admit)
            .validate()
            .is_err());
        assert!(PolicySpec::bidi(vec![1, 0], 0.5, TieBreak::Admit)
            .validate()
            .is_err());
        assert!(PolicySpec::bidi(vec![1, 2], 1.5, TieBreak::Admit)
            .validate()
            .is_err());
        assert!(PolicySpec::promote(vec![1, 2], 1.1, 0.0)
            .validate()
            .is_err());
        assert!(PolicySpec::promote(vec![1, 2, 3], 0.5, 0.5)
            .validate()
            .is_err());
        assert!(PolicySpec::new(PolicyKind::Demote, vec![1, 2, 3])
            .validate()
            .is_ok());
    }

    #[test]
    fn outcome_writes_merge_and_sort() {
        let mut o = AccessOutcome::new(Classification::Miss);
        o.write(2);
        o.write(1);
        o.write(2);
        assert_eq!(o.write_pairs(), [(1, 1), (2, 2)]);
    }
}
