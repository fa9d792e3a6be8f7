use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use sapinn_bench::network_for;
use sapinn_core::autodiff::{eval_jet, DerivativeRequest};
use sapinn_core::problems::{make_adv_diff, make_poisson9};

fn bench_jets(c: &mut Criterion) {
    let adv = make_adv_diff();
    let net = network_for(&adv, 0);
    let req = DerivativeRequest::new(2)
        .pure(0, 2)
        .unwrap()
        .mixed(&[(0, 2), (1, 1)])
        .unwrap();
    c.bench_function("jet_third_order_adv_diff", |b| {
        b.iter(|| eval_jet(&net, black_box(&[0.4, 0.1]), &req).unwrap())
    });

    let p9 = make_poisson9();
    let net9 = network_for(&p9, 0);
    let mut req9 = DerivativeRequest::new(11).pure(0, 2).unwrap().pure(1, 2).unwrap();
    for slot in 2..11 {
        req9 = req9.mixed(&[(0, 2), (slot, 1)]).unwrap();
        req9 = req9.mixed(&[(1, 2), (slot, 1)]).unwrap();
    }
    let coords: Vec<f64> = [0.3, 0.7].iter().copied().chain(std::iter::repeat(1.0).take(9)).collect();
    c.bench_function("jet_nine_parameter_laplacian", |b| {
        b.iter(|| eval_jet(&net9, black_box(&coords), &req9).unwrap())
    });
}

criterion_group!(benches, bench_jets);
criterion_main!(benches);
