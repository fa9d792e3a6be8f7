use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sapinn_bench::{network_for, points_for};
use sapinn_core::losses::{total_loss_with_gradient, LossWeights, Mode};
use sapinn_core::oracles::poisson9_fd_solve;
use sapinn_core::problems::{make_poisson9, make_twophase1d, sample, SamplingCounts, SamplingStrategy};

fn bench_loss_gradient(c: &mut Criterion) {
    let weights = LossWeights::default();

    let p9 = make_poisson9();
    let net9 = network_for(&p9, 0);
    let pts9 = points_for(&p9, 200);
    c.bench_function("loss_gradient_poisson9_sa_200pts", |b| {
        b.iter(|| total_loss_with_gradient(&net9, &p9, black_box(&pts9), &weights, Mode::Sa).unwrap())
    });

    let tp = make_twophase1d();
    let net_tp = network_for(&tp, 0);
    let pts_tp = points_for(&tp, 500);
    c.bench_function("loss_gradient_twophase1d_sa_500pts", |b| {
        b.iter(|| total_loss_with_gradient(&net_tp, &tp, black_box(&pts_tp), &weights, Mode::Sa).unwrap())
    });
}

fn bench_sampling_and_oracle(c: &mut Criterion) {
    let p9 = make_poisson9();
    c.bench_function("latin_hypercube_1000", |b| {
        b.iter(|| {
            sample(
                &p9,
                &SamplingStrategy::LatinHypercube,
                SamplingCounts { interior: 1000, initial: 0, per_boundary: 0 },
                black_box(7),
                false,
                None,
            )
            .unwrap()
        })
    });
    c.bench_function("poisson9_fd_solve_63", |b| {
        b.iter(|| poisson9_fd_solve(black_box(&[1.0; 9]), 63).unwrap())
    });
}

criterion_group!(benches, bench_loss_gradient, bench_sampling_and_oracle);
criterion_main!(benches);
