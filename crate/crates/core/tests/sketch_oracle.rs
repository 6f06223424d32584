use mlcache::oracles::ExactCounter;
use mlcache::sketch::{FrequencySketch, SketchConfig};
use mlcache::ItemKey;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Large sketch that never halves within `records` increments.
fn wide_sketch(seed: u64) -> FrequencySketch {
    let width = 1 << 16;
    let cfg = SketchConfig {
        sample_size: 15 * width as u64,
        tracked_capacity: width as u64,
        depth: 4,
        width,
        counter_bits: 4,
    };
    FrequencySketch::new(cfg, seed).unwrap()
}

#[test]
fn one_sided_error_and_rare_overestimates() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut sketch = wide_sketch(2);
    let mut exact = ExactCounter::default();
    for _ in 0..100_000 {
        let k = ItemKey(rng.gen_range(0..10_000));
        sketch.record(k);
        exact.record(&k);
    }
    assert_eq!(exact.total(), 100_000);
    let cap = sketch.cap();
    let mut over = 0;
    let mut keys = 0;
    for (k, &c) in exact.iter() {
        let truth = c.min(cap);
        let est = sketch.estimate(*k);
        assert!(est >= truth, "{k:?}: estimate {est} < {truth}");
        keys += 1;
        if est > truth {
            over += 1;
        }
    }
    assert!(
        (over as f64) / (keys as f64) < 0.01,
        "{over} of {keys} overestimated"
    );
}

fn small_config() -> impl Strategy<Value = SketchConfig> {
    (1u64..40, 1usize..4, 0usize..3, 1u64..12).prop_map(|(cap_items, depth, extra, mult)| {
        SketchConfig {
            sample_size: cap_items * mult,
            tracked_capacity: cap_items,
            depth,
            width: cap_items as usize + extra,
            counter_bits: 4,
        }
    })
}

proptest! {
    #[test]
    fn counters_saturate_and_age(cfg in small_config(), seed in any::<u64>(), stream in prop::collection::vec(0u64..64, 0..2000)) {
        let mut s = FrequencySketch::new(cfg, seed).unwrap();
        for k in stream {
            s.record(ItemKey(k));
            prop_assert!(s.counters().iter().all(|&c| u64::from(c) <= s.cap()));
            prop_assert!(s.increments_since_reset() < cfg.sample_size);
        }
    }

    #[test]
    fn never_underestimates_before_halving(seed in any::<u64>(), stream in prop::collection::vec(0u64..200, 0..500)) {
        let cfg = SketchConfig::for_capacity(64);
        let mut s = FrequencySketch::new(cfg, seed).unwrap();
        let mut exact = ExactCounter::default();
        for k in stream {
            s.record(ItemKey(k));
            exact.record(&k);
        }
        // 500 < W = 640: no halving happened
        for (k, &c) in exact.iter() {
            prop_assert!(s.estimate(ItemKey(*k)) >= c.min(s.cap()));
        }
    }

    #[test]
    fn halving_is_monotone(seed in any::<u64>(), stream in prop::collection::vec(0u64..100, 0..300)) {
        let mut s = FrequencySketch::new(SketchConfig::for_capacity(50), seed).unwrap();
        for k in stream {
            s.record(ItemKey(k));
        }
        let before = s.counters().to_vec();
        s.halve();
        for (a, b) in before.iter().zip(s.counters()) {
            prop_assert_eq!(*b, a / 2);
        }
    }
}
