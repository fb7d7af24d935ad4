use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use lclt_core::montecarlo::{estimate_lclt, HistogramSpec, McConfig, Window};
use lclt_core::renewal_exact::{dp_distribution, StartMode};
use lclt_core::spectral::{eigen_curve, fit_grid, Components, TwistedOperatorModel};
use lclt_core::{classify_case, closure_of_group, MarkovShiftBase, QuadScalar, RenewalBase};

fn groups(c: &mut Criterion) {
    let (z, one) = (QuadScalar::zero, QuadScalar::one);
    let gens = vec![
        [z(), one()],
        [one(), QuadScalar::sqrt(2)],
        [QuadScalar::from_ints(2, -1, 2), QuadScalar::from_ints(-3, 2, 2)],
    ];
    c.bench_function("closure_and_classify", |b| {
        b.iter(|| classify_case(&closure_of_group(black_box(&gens), &[z(), z()]).unwrap()).unwrap())
    });
}

fn renewal_dp(c: &mut Criterion) {
    let base = RenewalBase::counterexample();
    let t = QuadScalar::parse("20.3").unwrap();
    c.bench_function("dp_palm_t20", |b| b.iter(|| dp_distribution(&base, black_box(&t), StartMode::Palm).unwrap()));
}

fn spectral(c: &mut Criterion) {
    let model = TwistedOperatorModel::from_markov(&MarkovShiftBase::pinned_three_state(), Components::PhiTau);
    let grid = fit_grid(2, 8);
    c.bench_function("eigen_curve_fit_grid", |b| b.iter(|| eigen_curve(black_box(&model), &grid)));
}

fn monte_carlo(c: &mut Criterion) {
    let sys = RenewalBase::non_arithmetic();
    let spec = HistogramSpec::new(100.0, vec![Window { w: 0.0, lo: -0.5, hi: 0.5 }]).unwrap();
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("lclt_t100_n20000", |b| b.iter(|| estimate_lclt(&sys, &spec, &McConfig::new(20_000, black_box(1))).unwrap()));
    group.finish();
}

criterion_group!(benches, groups, renewal_dp, spectral, monte_carlo);
criterion_main!(benches);
