//! Baseline policies built from plain LRU levels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache_core::CacheSpace;
use crate::error::Result;
use crate::metrics::SimStats;
use crate::ItemKey;

use super::{AccessOutcome, Classification, MultiLevelPolicy, PolicySpec, SpaceView};

fn lru_levels(spec: &PolicySpec) -> Vec<CacheSpace> {
    spec.level_capacities
        .iter()
        .map(|&c| CacheSpace::lru(c))
        .collect()
}

fn level_spaces(levels: &[CacheSpace]) -> Vec<SpaceView<'_>> {
    levels
        .iter()
        .enumerate()
        .map(|(i, space)| SpaceView {
            level: i + 1,
            name: "lru",
            space,
        })
        .collect()
}

fn hit_class(level: usize) -> Classification {
    if level == 1 {
        Classification::HitL1Window
    } else {
        Classification::HitLevel(level)
    }
}

/// Inserts `key` at the MRU end of L1 and pushes each overflowing LRU item
/// one level down. The last level's victim leaves the cache.
fn push_down(levels: &mut [CacheSpace], key: ItemKey, out: &mut AccessOutcome) {
    let mut carry = key;
    for (i, space) in levels.iter_mut().enumerate() {
        let displaced = if space.is_full() {
            space.remove_victim()
        } else {
            None
        };
        space.insert(carry);
        out.write(i + 1);
        match displaced {
            Some(d) => carry = d,
            None => return,
        }
    }
}

/// Global LRU: the levels form one continuous recency order.
///
/// Every miss and every hit below L1 moves the item to L1's MRU end, so the
/// LRU item of each full level slides one level down.
#[derive(Debug, Clone)]
pub struct Demote {
    levels: Vec<CacheSpace>,
    stats: SimStats,
}

impl Demote {
    pub fn new(spec: &PolicySpec) -> Result<Self> {
        spec.validate()?;
        Ok(Demote {
            levels: lru_levels(spec),
            stats: SimStats::new(spec.levels()),
        })
    }
}

impl MultiLevelPolicy for Demote {
    fn name(&self) -> String {
        "Demote".into()
    }

    fn levels(&self) -> usize {
        self.levels.len()
    }

    fn access(&mut self, key: ItemKey) -> AccessOutcome {
        let out = match self.levels.iter().position(|s| s.contains(key)) {
            Some(0) => {
                self.levels[0].touch(key);
                AccessOutcome::new(Classification::HitL1Window)
            }
            Some(i) => {
                self.levels[i].remove(key);
                let mut out = AccessOutcome::new(hit_class(i + 1));
                push_down(&mut self.levels, key, &mut out);
                out
            }
            None => {
                let mut out = AccessOutcome::new(Classification::Miss);
                push_down(&mut self.levels, key, &mut out);
                out
            }
        };
        self.stats.record(&out);
        out
    }

    fn stats(&self) -> &SimStats {
        &self.stats
    }

    fn spaces(&self) -> Vec<SpaceView<'_>> {
        level_spaces(&self.levels)
    }
}

/// Independent LRU per level; a hit only refreshes the item within its own
/// level, so hits never cause writes.
#[derive(Debug, Clone)]
pub struct NaiveLru {
    levels: Vec<CacheSpace>,
    stats: SimStats,
}

impl NaiveLru {
    pub fn new(spec: &PolicySpec) -> Result<Self> {
        spec.validate()?;
        Ok(NaiveLru {
            levels: lru_levels(spec),
            stats: SimStats::new(spec.levels()),
        })
    }
}

impl MultiLevelPolicy for NaiveLru {
    fn name(&self) -> String {
        "LRU".into()
    }

    fn levels(&self) -> usize {
        self.levels.len()
    }

    fn access(&mut self, key: ItemKey) -> AccessOutcome {
        let out = match self.levels.iter().position(|s| s.contains(key)) {
            Some(i) => {
                self.levels[i].touch(key);
                AccessOutcome::new(hit_class(i + 1))
            }
            None => {
                let mut out = AccessOutcome::new(Classification::Miss);
                push_down(&mut self.levels, key, &mut out);
                out
            }
        };
        self.stats.record(&out);
        out
    }

    fn stats(&self) -> &SimStats {
        &self.stats
    }

    fn spaces(&self) -> Vec<SpaceView<'_>> {
        level_spaces(&self.levels)
    }
}

/// Fixed-probability promote/demote baseline over two LRU levels.
///
/// An L1 victim is written to L2 with probability `q` (otherwise dropped);
/// an L2 hit is promoted into L1 with probability `p` (otherwise refreshed
/// in place). `p = q = 1` behaves like [`Demote`], `p = 0, q = 1` like
/// [`NaiveLru`].
#[derive(Debug, Clone)]
pub struct Promote {
    name: String,
    l1: CacheSpace,
    l2: CacheSpace,
    promote_prob: f64,
    demote_prob: f64,
    rng: ChaCha8Rng,
    stats: SimStats,
}

impl Promote {
    pub fn new(spec: &PolicySpec) -> Result<Self> {
        spec.validate()?;
        Ok(Promote {
            name: spec.name(),
            l1: CacheSpace::lru(spec.level_capacities[0]),
            l2: CacheSpace::lru(spec.level_capacities[1]),
            promote_prob: spec.promote_prob,
            demote_prob: spec.demote_prob,
            rng: ChaCha8Rng::seed_from_u64(spec.rng_seed),
            stats: SimStats::new(2),
        })
    }

    fn insert_l1(&mut self, key: ItemKey, out: &mut AccessOutcome) {
        let victim = if self.l1.is_full() {
            self.l1.remove_victim()
        } else {
            None
        };
        self.l1.insert(key);
        out.write(1);
        if let Some(victim) = victim {
            if self.rng.gen_bool(self.demote_prob) {
                if self.l2.is_full() {
                    self.l2.remove_victim();
                }
                self.l2.insert(victim);
                out.write(2);
            }
        }
    }
}

impl MultiLevelPolicy for Promote {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn levels(&self) -> usize {
        2
    }

    fn access(&mut self, key: ItemKey) -> AccessOutcome {
        let out = if self.l1.contains(key) {
            self.l1.touch(key);
            AccessOutcome::new(Classification::HitL1Window)
        } else if self.l2.contains(key) {
            let mut out = AccessOutcome::new(Classification::HitLevel(2));
            if self.rng.gen_bool(self.promote_prob) {
                self.l2.remove(key);
                self.insert_l1(key, &mut out);
            } else {
                self.l2.touch(key);
            }
            out
        } else {
            let mut out = AccessOutcome::new(Classification::Miss);
            self.insert_l1(key, &mut out);
            out
        };
        self.stats.record(&out);
        out
    }

    fn stats(&self) -> &SimStats {
        &self.stats
    }

    fn spaces(&self) -> Vec<SpaceView<'_>> {
        vec![
            SpaceView {
                level: 1,
                name: "l1",
                space: &self.l1,
            },
            SpaceView {
                level: 2,
                name: "l2",
                space: &self.l2,
            },
        ]
    }
}
