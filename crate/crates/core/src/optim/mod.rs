//! Loss minimization: full-batch Adam warm-up followed by quasi-Newton
//! refinement with a strong-Wolfe line search.

mod adam;
mod quasi_newton;

pub use adam::minimize_adam;
pub use quasi_newton::minimize_quasi_newton;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::network::Network;

/// A differentiable scalar objective over a flat coordinate vector.
pub trait Objective {
    fn eval(&mut self, x: &[f64]) -> ObjectiveEval;

    /// Names for the auxiliary term values reported per evaluation.
    fn term_names(&self) -> Vec<String> {
        Vec::new()
    }
}

pub struct ObjectiveEval {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Auxiliary per-term values recorded into the training trace.
    pub terms: Vec<f64>,
}

impl<F> Objective for F
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    fn eval(&mut self, x: &[f64]) -> ObjectiveEval {
        let (value, grad) = self(x);
        ObjectiveEval { value, grad, terms: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub iterations: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, iterations: 1000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineSearchKind {
    StrongWolfe,
    /// Two-gradient analytic step, exact for quadratic objectives.
    ExactQuadratic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiNewtonConfig {
    /// Dense inverse-Hessian updates instead of the limited-memory recursion.
    pub full_memory: bool,
    pub memory: usize,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_step_halvings: usize,
    pub line_search: LineSearchKind,
}

impl Default for QuasiNewtonConfig {
    fn default() -> Self {
        QuasiNewtonConfig {
            full_memory: false,
            memory: 20,
            max_iterations: 2000,
            gradient_tolerance: 1e-9,
            c1: 1e-4,
            c2: 0.9,
            max_step_halvings: 30,
            line_search: LineSearchKind::StrongWolfe,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub adam: AdamConfig,
    pub quasi_newton: QuasiNewtonConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { adam: AdamConfig::default(), quasi_newton: QuasiNewtonConfig::default() }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.adam.lr <= 0.0 {
            return Err(CoreError::InvalidOptimizerConfig("adam.lr must be > 0".into()));
        }
        for (name, b) in [("beta1", self.adam.beta1), ("beta2", self.adam.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(CoreError::InvalidOptimizerConfig(format!(
                    "adam.{name} must be in [0, 1)"
                )));
            }
        }
        if self.adam.eps <= 0.0 || self.quasi_newton.gradient_tolerance <= 0.0 {
            return Err(CoreError::InvalidOptimizerConfig("tolerances must be > 0".into()));
        }
        if self.quasi_newton.memory == 0 && !self.quasi_newton.full_memory {
            return Err(CoreError::InvalidOptimizerConfig("memory must be >= 1".into()));
        }
        if !(0.0 < self.quasi_newton.c1 && self.quasi_newton.c1 < self.quasi_newton.c2 && self.quasi_newton.c2 < 1.0) {
            return Err(CoreError::InvalidOptimizerConfig("need 0 < c1 < c2 < 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Adam,
    QuasiNewton,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub loss: f64,
    pub terms: Vec<f64>,
    pub grad_norm: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    Completed,
    GradientConverged,
    MaxIterations,
    /// Line search could not make progress; best-so-far was returned.
    LineSearchStop,
    Diverged,
}

#[derive(Clone, Debug, Default)]
pub struct TrainingTrace {
    pub records: Vec<TraceRecord>,
    pub term_names: Vec<String>,
    pub status: Option<TrainStatus>,
}

impl TrainingTrace {
    pub fn last_iteration(&self) -> usize {
        self.records.last().map(|r| r.iteration).unwrap_or(0)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }

    /// Concatenate a follow-up phase, keeping iterations strictly increasing.
    pub fn extend(&mut self, mut other: TrainingTrace) {
        if self.term_names.is_empty() {
            self.term_names = other.term_names;
        }
        self.records.append(&mut other.records);
        self.status = other.status;
        debug_assert!(self.records.windows(2).all(|w| w[0].iteration < w[1].iteration));
    }
}

/// Adam on a network's weights: standard bias-corrected updates for the
/// configured iteration count, deterministic given its inputs. A non-finite
/// loss aborts with the trace so divergence stays diagnosable.
pub fn adam_run(
    net: &Network,
    objective: &mut dyn Objective,
    cfg: &AdamConfig,
) -> Result<(Network, TrainingTrace)> {
    let (x, trace) = minimize_adam(&net.to_flat(), objective, cfg, 0);
    let mut out = net.clone();
    out.set_from_flat(&x)?;
    Ok((out, trace))
}

/// Quasi-Newton refinement on a network's weights; never returns a worse
/// loss than its input.
pub fn quasi_newton_run(
    net: &Network,
    objective: &mut dyn Objective,
    cfg: &QuasiNewtonConfig,
) -> Result<(Network, TrainingTrace)> {
    let (x, trace) = minimize_quasi_newton(&net.to_flat(), objective, cfg, 0);
    let mut out = net.clone();
    out.set_from_flat(&x)?;
    Ok((out, trace))
}
