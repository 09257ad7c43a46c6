use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use bifrac::generate::{gen_instance, GenSpec};
use bifrac::par;
use bifrac::testing::{verify_theorem, Instance};

fn batch(count: u64, dim: usize) -> Vec<Instance> {
    (0..count)
        .map(|seed| gen_instance(&GenSpec::new(seed, dim, 1.0)).unwrap().to_instance().unwrap())
        .collect()
}

fn verify_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("verify_batch");
    group.sample_size(10);
    // Optimizer restarts also go through `par`, so the baseline pins everything to one thread.
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    for dim in [1, 2] {
        let instances = batch(64, dim);
        group.bench_with_input(BenchmarkId::new("parallel", dim), &instances, |b, xs| {
            b.iter(|| par::map(xs, |i| verify_theorem(i).n_lower))
        });
        group.bench_with_input(BenchmarkId::new("sequential", dim), &instances, |b, xs| {
            b.iter(|| single.install(|| par::map_seq(xs, |i| verify_theorem(i).n_lower)))
        });
    }
    group.finish();
}

criterion_group!(benches, verify_batch);
criterion_main!(benches);
