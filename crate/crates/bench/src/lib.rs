//! Shared fixtures for the criterion benchmarks.

use sapinn_core::network::{Activation, Network, NetworkSpec};
use sapinn_core::problems::{sample, CollocationSet, ProblemSpec, SamplingCounts, SamplingStrategy};

/// The benchmark network shape: 5 hidden layers of 20 tanh units.
pub fn network_for(problem: &ProblemSpec, seed: u64) -> Network {
    let mut net = Network::init(NetworkSpec {
        input_layout: problem.layout.clone(),
        hidden_layers: 5,
        hidden_width: 20,
        output_dim: problem.output_dim,
        activation: Activation::Tanh,
        init_seed: seed,
    })
    .unwrap();
    if let Some(w) = problem.wrapper {
        net = net.with_wrapper(w);
    }
    net
}

pub fn points_for(problem: &ProblemSpec, interior: usize) -> CollocationSet {
    sample(
        problem,
        &SamplingStrategy::LatinHypercube,
        SamplingCounts { interior, initial: 50, per_boundary: 25 },
        0,
        false,
        None,
    )
    .unwrap()
}
