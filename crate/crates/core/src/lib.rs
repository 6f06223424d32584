//! Multilevel cache policies and a trace-driven simulator.
//!
//! The centerpiece is [`policies::BiDiFilter`]: the first level is split into
//! a Window space for newcomers and a Veterans space for proven items, and a
//! shared frequency sketch filters traffic in both directions between
//! levels. Items leaving L1 must beat L2's victim to be written to L2, and
//! L2 hits must beat the Veterans victim to be promoted. The baselines
//! ([`policies::Demote`], [`policies::NaiveLru`], [`policies::Promote`]) and
//! an N-level generalization live next to it.
//!
//! [`harness`] replays traces from [`workload`] through any policy and
//! reports hit, write and latency figures computed by [`metrics`].

pub mod cache_core;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracles;
pub mod policies;
pub mod sketch;
pub mod workload;

pub use error::{Error, Result};

/// Opaque identifier of one equal-sized cached item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemKey(pub u64);

impl From<u64> for ItemKey {
    fn from(v: u64) -> Self {
        ItemKey(v)
    }
}

pub(crate) type FxMap<K, V> = rustc_hash::FxHashMap<K, V>;
