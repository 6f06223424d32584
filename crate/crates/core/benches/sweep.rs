use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mlcache::harness::{run_sweep_with, Execution, PolicyTemplate, SweepSpec};
use mlcache::policies::{PolicyKind, TieBreak};
use mlcache::workload::{SyntheticSpec, TraceSource};

fn grid(length: u64) -> SweepSpec {
    let mut reject = PolicyTemplate::new(PolicyKind::BiDiFilter);
    reject.tie_break = TieBreak::Reject;
    SweepSpec {
        trace: TraceSource::Synthetic(SyntheticSpec::new(length, length / 10, 0.8, 0.2, 1)),
        l2_size_percents: vec![0.05, 0.2, 0.5],
        l1_ratios: vec![0.1, 0.3],
        policies: vec![
            PolicyTemplate::new(PolicyKind::BiDiFilter),
            reject,
            PolicyTemplate::new(PolicyKind::Demote),
            PolicyTemplate::new(PolicyKind::NaiveLru),
        ],
        levels: 2,
        latency: Default::default(),
        seed: 0,
        output: None,
        format: Default::default(),
    }
}

fn sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("sweep_24_cells");
    group.sample_size(10);
    for length in [20_000u64, 200_000] {
        let spec = grid(length);
        for (name, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(name, length), &spec, |b, spec| {
                b.iter(|| run_sweep_with(black_box(spec), exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
