use crate::cache_core::CacheSpace;
use crate::error::Result;
use crate::metrics::SimStats;
use crate::sketch::{FrequencySketch, SketchConfig};
use crate::ItemKey;

use super::{
    AccessOutcome, Classification, FilterDecision, FilterKind, MultiLevelPolicy, PolicySpec,
    SpaceView, TieBreak,
};

/// Bidirectional frequency filter over N ≥ 2 levels.
///
/// A filter sits between every pair of adjacent levels. A candidate leaving
/// level i is written to level i+1 only if it beats that level's victim; the
/// displaced victim then becomes the candidate for level i+2, and the
/// victim of the last level leaves the cache. A rejected candidate is
/// dropped on the spot. A hit at level i > 1 is promoted to level i-1 if it
/// beats the victim there, and that victim drops into the freed slot.
#[derive(Debug, Clone)]
pub struct BiDiFilterN {
    name: String,
    window: CacheSpace,
    veterans: CacheSpace,
    /// L2..LN
    lower: Vec<CacheSpace>,
    sketch: FrequencySketch,
    tie_break: TieBreak,
    stats: SimStats,
    decisions: Option<Vec<FilterDecision>>,
}

impl BiDiFilterN {
    pub fn new(spec: &PolicySpec) -> Result<Self> {
        spec.validate()?;
        let (window, veterans) = spec.l1_split();
        let sketch_cfg = SketchConfig::for_capacity(spec.total_capacity() as u64);
        Ok(BiDiFilterN {
            name: spec.name(),
            window: CacheSpace::lru(window),
            veterans: CacheSpace::lru(veterans),
            lower: spec.level_capacities[1..]
                .iter()
                .map(|&c| CacheSpace::slru(c))
                .collect(),
            sketch: FrequencySketch::new(sketch_cfg, spec.rng_seed)?,
            tie_break: spec.tie_break,
            stats: SimStats::new(spec.levels()),
            decisions: None,
        })
    }

    pub fn log_decisions(&mut self) {
        self.decisions.get_or_insert_with(Vec::new);
    }

    pub fn decisions(&self) -> &[FilterDecision] {
        self.decisions.as_deref().unwrap_or(&[])
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

    /// Space of level `level` (≥ 2).
    pub fn level(&self, level: usize) -> &CacheSpace {
        &self.lower[level - 2]
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

    /// Pushes `candidate` down starting at `level` (≥ 2).
    fn cascade(&mut self, mut candidate: ItemKey, mut level: usize, out: &mut AccessOutcome) {
        while level <= self.lower.len() + 1 {
            let space = &self.lower[level - 2];
            if !space.is_full() {
                self.lower[level - 2].insert(candidate);
                out.write(level);
                return;
            }
            let victim = space.peek_victim().expect("full space has a victim");
            if !self.filter(FilterKind::Admission { level }, candidate, victim) {
                return;
            }
            let space = &mut self.lower[level - 2];
            space.remove(victim);
            space.insert(candidate);
            out.write(level);
            candidate = victim;
            level += 1;
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
                self.cascade(candidate, 2, &mut out);
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
                self.cascade(victim, 2, &mut out);
            } else {
                self.cascade(key, 2, &mut out);
            }
        }
        out
    }

    fn on_lower_hit(&mut self, key: ItemKey, level: usize) -> AccessOutcome {
        let mut out = AccessOutcome::new(Classification::HitLevel(level));
        let target_level = level - 1;
        let to_veterans = self.veterans.capacity() > 0;
        let target = self.space(target_level, to_veterans);
        if !target.is_full() {
            self.lower[level - 2].remove(key);
            self.space_mut(target_level, to_veterans).insert(key);
            out.write(target_level);
            return out;
        }
        let victim = target.peek_victim().expect("full space has a victim");
        if self.filter(
            FilterKind::Promotion {
                level: target_level,
            },
            key,
            victim,
        ) {
            let target = self.space_mut(target_level, to_veterans);
            target.remove(victim);
            target.insert(key);
            out.write(target_level);
            let here = &mut self.lower[level - 2];
            here.remove(key);
            here.insert(victim);
            out.write(level);
        } else {
            self.lower[level - 2].touch(key);
        }
        out
    }

    fn space(&self, level: usize, to_veterans: bool) -> &CacheSpace {
        match level {
            1 if to_veterans => &self.veterans,
            1 => &self.window,
            l => &self.lower[l - 2],
        }
    }

    fn space_mut(&mut self, level: usize, to_veterans: bool) -> &mut CacheSpace {
        match level {
            1 if to_veterans => &mut self.veterans,
            1 => &mut self.window,
            l => &mut self.lower[l - 2],
        }
    }
}

impl MultiLevelPolicy for BiDiFilterN {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn levels(&self) -> usize {
        self.lower.len() + 1
    }

    fn access(&mut self, key: ItemKey) -> AccessOutcome {
        self.sketch.record(key);
        let out = if self.window.contains(key) {
            self.window.touch(key);
            AccessOutcome::new(Classification::HitL1Window)
        } else if self.veterans.contains(key) {
            self.veterans.touch(key);
            AccessOutcome::new(Classification::HitL1Veterans)
        } else if let Some(i) = self.lower.iter().position(|s| s.contains(key)) {
            self.on_lower_hit(key, i + 2)
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
        let mut v = vec![
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
        ];
        v.extend(self.lower.iter().enumerate().map(|(i, space)| SpaceView {
            level: i + 2,
            name: "main",
            space,
        }));
        v
    }
}
