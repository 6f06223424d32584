use crate::cache_core::CacheSpace;
use crate::error::Result;
use crate::metrics::SimStats;
use crate::sketch::{FrequencySketch, SketchConfig};
use crate::ItemKey;

use super::{
    AccessOutcome, Classification, FilterDecision, FilterKind, MultiLevelPolicy, PolicySpec,
    SpaceView, TieBreak,
};

/// Two-level bidirectional frequency filter.
///
/// L1 is split into a Window (new arrivals) and Veterans (items promoted
/// from L2), both LRU. L2 is an SLRU "main" cache. On a miss the item enters
/// the Window; the Window's victim is written to L2 only if its frequency
/// estimate beats L2's victim. On an L2 hit the item is promoted into
/// Veterans only if it beats the Veterans victim, which is then demoted into
/// the slot the promoted item left behind.
///
/// With no Window (`window_fraction = 0`) a missed item competes for
/// Veterans first and, failing that, for L2. With no Veterans
/// (`window_fraction = 1`, also the united-L1 variant) promotions compete
/// against the Window victim.
#[derive(Debug, Clone)]
pub struct BiDiFilter {
    name: String,
    window: CacheSpace,
    veterans: CacheSpace,
    main: CacheSpace,
    sketch: FrequencySketch,
    tie_break: TieBreak,
    stats: SimStats,
    decisions: Option<Vec<FilterDecision>>,
}

impl BiDiFilter {
    pub fn new(spec: &PolicySpec) -> Result<Self> {
        spec.validate()?;
        assert_eq!(spec.levels(), 2, "BiDiFilter is two-level; use BiDiFilterN");
        let (window, veterans) = spec.l1_split();
        let sketch_cfg = SketchConfig::for_capacity(spec.total_capacity() as u64);
        Ok(BiDiFilter {
            name: spec.name(),
            window: CacheSpace::lru(window),
            veterans: CacheSpace::lru(veterans),
            main: CacheSpace::slru(spec.level_capacities[1]),
            sketch: FrequencySketch::new(sketch_cfg, spec.rng_seed)?,
            tie_break: spec.tie_break,
            stats: SimStats::new(2),
            decisions: None,
        })
    }

    /// Starts keeping a log of every filter comparison.
    pub fn log_decisions(&mut self) {
        self.decisions.get_or_insert_with(Vec::new);
    }

    pub fn decisions(&self) -> &[FilterDecision] {
        self.decisions.as_deref().unwrap_or(&[])
    }

    pub fn sketch(&self) -> &FrequencySketch {
        &self.sketch
    }

    pub fn sketch_mut(&mut self) -> &mut FrequencySketch {
        &mut self.sketch
    }

    pub fn window(&self) -> &CacheSpace {
        &self.window
    }

    pub fn veterans(&self) -> &CacheSpace {
        &self.veterans
    }

    pub fn main(&self) -> &CacheSpace {
        &self.main
    }

    fn filter(&mut self, filter: FilterKind, candidate: ItemKey, victim: ItemKey) -> bool {
        let candidate_estimate = self.sketch.estimate(candidate);
        let victim_estimate = self.sketch.estimate(victim);
        let admitted = self.tie_break.admits(candidate_estimate, victim_estimate);
        if let Some(log) = &mut self.decisions {
            log.push(FilterDecision {
                filter,
                candidate,
                victim,
                candidate_estimate,
                victim_estimate,
                admitted,
            });
        }
        admitted
    }

    /// Offers an item leaving L1 to L2. Rejected candidates leave the cache.
    fn admit_to_main(&mut self, candidate: ItemKey, out: &mut AccessOutcome) {
        if !self.main.is_full() {
            self.main.insert(candidate);
            out.write(2);
            return;
        }
        let victim = self.main.peek_victim().expect("full space has a victim");
        if self.filter(FilterKind::Admission { level: 2 }, candidate, victim) {
            self.main.remove(victim);
            self.main.insert(candidate);
            out.write(2);
        }
    }

    fn on_miss(&mut self, key: ItemKey) -> AccessOutcome {
        let mut out = AccessOutcome::new(Classification::Miss);
        if self.window.capacity() > 0 {
            let candidate = if self.window.is_full() {
                self.window.remove_victim()
            } else {
                None
            };
            self.window.insert(key);
            out.write(1);
            if let Some(candidate) = candidate {
                self.admit_to_main(candidate, &mut out);
            }
        } else if !self.veterans.is_full() {
            self.veterans.insert(key);
            out.write(1);
        } else {
            let victim = self
                .veterans
                .peek_victim()
                .expect("full space has a victim");
            if self.filter(FilterKind::Admission { level: 1 }, key, victim) {
                self.veterans.remove(victim);
                self.veterans.insert(key);
                out.write(1);
                self.admit_to_main(victim, &mut out);
            } else {
                self.admit_to_main(key, &mut out);
            }
        }
        out
    }

    fn on_main_hit(&mut self, key: ItemKey) -> AccessOutcome {
        let mut out = AccessOutcome::new(Classification::HitLevel(2));
        let to_veterans = self.veterans.capacity() > 0;
        let target = if to_veterans {
            &self.veterans
        } else {
            &self.window
        };
        if !target.is_full() {
            self.main.remove(key);
            self.l1_target(to_veterans).insert(key);
            out.write(1);
            return out;
        }
        let victim = target.peek_victim().expect("full space has a victim");
        if self.filter(FilterKind::Promotion { level: 1 }, key, victim) {
            let target = self.l1_target(to_veterans);
            target.remove(victim);
            target.insert(key);
            out.write(1);
            self.main.remove(key);
            // The promoted item freed a slot, so the demotion needs no filter.
            self.main.insert(victim);
            out.write(2);
        } else {
            self.main.touch(key);
        }
        out
    }

    fn l1_target(&mut self, to_veterans: bool) -> &mut CacheSpace {
        if to_veterans {
            &mut self.veterans
        } else {
            &mut self.window
        }
    }
}

impl MultiLevelPolicy for BiDiFilter {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn levels(&self) -> usize {
        2
    }

    fn access(&mut self, key: ItemKey) -> AccessOutcome {
        self.sketch.record(key);
        let out = if self.window.contains(key) {
            self.window.touch(key);
            AccessOutcome::new(Classification::HitL1Window)
        } else if self.veterans.contains(key) {
            self.veterans.touch(key);
            AccessOutcome::new(Classification::HitL1Veterans)
        } else if self.main.contains(key) {
            self.on_main_hit(key)
        } else {
            self.on_miss(key)
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
                name: "window",
                space: &self.window,
            },
            SpaceView {
                level: 1,
                name: "veterans",
                space: &self.veterans,
            },
            SpaceView {
                level: 2,
                name: "main",
                space: &self.main,
            },
        ]
    }

    fn level_of(&self, key: ItemKey) -> Option<usize> {
        if self.window.contains(key) || self.veterans.contains(key) {
            Some(1)
        } else if self.main.contains(key) {
            Some(2)
        } else {
            None
        }
    }
}
