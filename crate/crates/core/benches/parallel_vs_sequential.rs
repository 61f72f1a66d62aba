//! Data-parallel against sequential execution of the two Monte Carlo hot
//! loops. Both modes produce identical numbers; only wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use catbond_core::dependence::{ArchimedeanFamily, DependenceModel, NestedCopulaSpec};
use catbond_core::marginals::{BetaParams, GpdParams, SplicedMarginal, ThresholdSpec};
use catbond_core::par::Execution;
use catbond_core::pricer::{price, ModelBundle, PurchaseConvention};
use catbond_core::rates::{mc_discount, CirParams};
use catbond_core::rng::StreamSeed;
use catbond_core::trigger::{BondTerms, RetentionFunctional, TriggerLevels};

fn bundle() -> ModelBundle {
    let m = |a, b, xi, sigma, u, min, n_u| {
        SplicedMarginal::new(
            BetaParams::new(a, b).unwrap(),
            GpdParams::new(xi, sigma).unwrap(),
            ThresholdSpec::new(u, n_u, 245, min).unwrap(),
        )
    };
    let marginals = vec![
        m(1.016, 1.345, 0.197, 173.369, 160.0, 1.6, 95),
        m(1.076, 1.687, 0.341, 11.771, 12.0, 0.005, 76),
        m(0.582, 1.137, 0.492, 23.538, 15.0, 1.011, 69),
    ];
    let trigger = TriggerLevels::new(marginals.iter().map(|m| m.quantile(0.9).unwrap()).collect()).unwrap();
    ModelBundle {
        marginals,
        dependence: DependenceModel::Nested(
            NestedCopulaSpec::same_family(ArchimedeanFamily::Frank, 7.18, 3.77, vec![0, 1], 3).unwrap(),
        ),
        intensities: vec![41.86, 41.56, 39.39],
        cir: CirParams::new(0.2, 0.05, 0.05, 0.02962).unwrap(),
        trigger,
        functional: RetentionFunctional::Average,
        terms: BondTerms::new(100.0, 0.035, 1, 3).unwrap(),
        convention: PurchaseConvention::Seasoned,
        steps_per_year: 252,
    }
}

fn modes() -> [(&'static str, Execution); 2] {
    [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)]
}

fn bench_price(c: &mut Criterion) {
    let b = bundle();
    let mut g = c.benchmark_group("price_2000_reps");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| price(black_box(&b), 2_000, 1, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_discount(c: &mut Criterion) {
    let cir = CirParams::new(0.2, 0.05, 0.05, 0.02962).unwrap();
    let mut g = c.benchmark_group("mc_discount_10k_paths_3y");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |bench, &exec| {
            bench.iter(|| mc_discount(black_box(&cir), 0.0, 3.0, 10_000, 252, StreamSeed::new(1), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench_price, bench_discount);
criterion_main!(benches);
