//! Full-batch Adam with bias correction.

use std::time::Instant;

use crate::optim::{AdamConfig, Objective, Phase, TraceRecord, TrainStatus, TrainingTrace};

/// Minimize over a flat coordinate vector. Iteration numbers start at
/// `iter_offset + 1`; each record holds the state the step was taken from.
pub fn minimize_adam(
    x0: &[f64],
    obj: &mut dyn Objective,
    cfg: &AdamConfig,
    iter_offset: usize,
) -> (Vec<f64>, TrainingTrace) {
    let start = Instant::now();
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut trace = TrainingTrace {
        records: Vec::with_capacity(cfg.iterations),
        term_names: obj.term_names(),
        status: None,
    };

    for t in 1..=cfg.iterations {
        let eval = obj.eval(&x);
        let grad_norm = eval.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        trace.records.push(TraceRecord {
            iteration: iter_offset + t,
            phase: Phase::Adam,
            loss: eval.value,
            terms: eval.terms,
            grad_norm,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        if !eval.value.is_finite() || !grad_norm.is_finite() {
            trace.status = Some(TrainStatus::Diverged);
            return (x, trace);
        }
        let bc1 = 1.0 - cfg.beta1.powi(t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t as i32);
        for i in 0..n {
            let g = eval.grad[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            x[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    trace.status = Some(TrainStatus::Completed);
    (x, trace)
}
