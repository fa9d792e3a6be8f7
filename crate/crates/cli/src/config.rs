//! Versioned experiment configuration. Every benchmark-specified value is a
//! per-problem default, so a minimal config like
//! `{"problem": "adv_diff", "mode": "sa", "output_dir": "out/a"}` reproduces
//! the corresponding training setup.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sapinn_core::error::{CoreError, Result};
use sapinn_core::losses::{LossWeights, Mode};
use sapinn_core::optim::OptimizerConfig;
use sapinn_core::problems::catalog::{TwoPhase1dOptions, TwoPhase2dOptions};
use sapinn_core::problems::{
    make_adv_diff, make_poisson9, make_twophase1d_with, make_twophase2d_with, AdaptiveConfig,
    ProblemSpec, SamplingCounts, SamplingStrategy,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    AdvDiff,
    Poisson9,
    Twophase1d,
    Twophase2d,
}

impl ProblemName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProblemName::AdvDiff => "adv_diff",
            ProblemName::Poisson9 => "poisson9",
            ProblemName::Twophase1d => "twophase1d",
            ProblemName::Twophase2d => "twophase2d",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSection {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub init_seed: u64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection { hidden_layers: 5, hidden_width: 20, init_seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingSection {
    pub strategy: String,
    pub interior: usize,
    pub initial: usize,
    pub per_boundary: usize,
    pub adaptive: AdaptiveSection,
    /// Interior point multiplier applied in parametric mode (points are
    /// additionally spread over the swept parameter ranges).
    pub parametric_factor: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveSection {
    pub start: usize,
    pub add: usize,
    pub every: usize,
    pub max_total: usize,
    pub pool_factor: usize,
}

impl From<AdaptiveSection> for AdaptiveConfig {
    fn from(a: AdaptiveSection) -> AdaptiveConfig {
        AdaptiveConfig {
            start: a.start,
            add: a.add,
            every: a.every,
            max_total: a.max_total,
            pool_factor: a.pool_factor,
        }
    }
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        AdaptiveSection { start: 500, add: 500, every: 2000, max_total: 2500, pool_factor: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemOptionsSection {
    pub t_max: Option<f64>,
    pub corner_margin: Option<f64>,
    pub strip_height: Option<f64>,
    pub inlet_extent: Option<f64>,
    pub v_in: Option<f64>,
}

impl Default for ProblemOptionsSection {
    fn default() -> Self {
        ProblemOptionsSection {
            t_max: None,
            corner_margin: None,
            strip_height: None,
            inlet_extent: None,
            v_in: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamOverride {
    pub nominal: Option<f64>,
    pub sweep: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSection {
    pub x: String,
    pub y: String,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSection {
    /// Evaluation grid nodes per spatial axis.
    pub grid: Vec<usize>,
    /// Snapshot times for transient problems.
    pub times: Vec<f64>,
    pub sweeps: Vec<SweepSection>,
    pub contour: Option<ContourSection>,
}

/// Fully-resolved experiment configuration (schema 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub problem: ProblemName,
    pub mode: Mode,
    pub seed: u64,
    pub network: NetworkSection,
    pub optimizer: OptimizerConfig,
    pub loss_weights: LossWeights,
    pub sampling: SamplingSection,
    pub problem_options: ProblemOptionsSection,
    pub param_overrides: BTreeMap<String, ParamOverride>,
    pub evaluation: EvaluationSection,
    pub output_dir: String,
}

/// The on-disk shape: everything except `problem` is optional.
#[derive(Deserialize)]
struct RawConfig {
    schema: Option<u32>,
    problem: ProblemName,
    mode: Option<Mode>,
    seed: Option<u64>,
    network: Option<RawNetwork>,
    optimizer: Option<serde_json::Value>,
    loss_weights: Option<serde_json::Value>,
    sampling: Option<RawSampling>,
    problem_options: Option<ProblemOptionsSection>,
    param_overrides: Option<BTreeMap<String, ParamOverride>>,
    evaluation: Option<RawEvaluation>,
    output_dir: Option<String>,
}

#[derive(Deserialize)]
struct RawNetwork {
    hidden_layers: Option<usize>,
    hidden_width: Option<usize>,
    init_seed: Option<u64>,
}

#[derive(Deserialize)]
struct RawSampling {
    strategy: Option<String>,
    interior: Option<usize>,
    initial: Option<usize>,
    per_boundary: Option<usize>,
    adaptive: Option<AdaptiveSection>,
    parametric_factor: Option<usize>,
}

#[derive(Deserialize)]
struct RawEvaluation {
    grid: Option<Vec<usize>>,
    times: Option<Vec<f64>>,
    sweeps: Option<Vec<SweepSection>>,
    contour: Option<ContourSection>,
}

fn schema_err(msg: impl Into<String>) -> CoreError {
    CoreError::InvalidProblem(format!("config schema: {}", msg.into()))
}

impl ExperimentConfig {
    /// Benchmark defaults for one problem.
    pub fn default_for(problem: ProblemName) -> ExperimentConfig {
        let mut optimizer = OptimizerConfig::default();
        let (strategy, interior, initial, per_boundary) = match problem {
            ProblemName::AdvDiff => {
                optimizer.adam.iterations = 1000;
                optimizer.quasi_newton.max_iterations = 2000;
                ("equispaced", 100, 0, 1)
            }
            ProblemName::Poisson9 => {
                optimizer.adam.iterations = 5000;
                optimizer.quasi_newton.max_iterations = 2000;
                ("latin_hypercube", 1000, 0, 0)
            }
            ProblemName::Twophase1d => {
                optimizer.adam.iterations = 10000;
                optimizer.quasi_newton.max_iterations = 2000;
                ("adaptive_residual", 2500, 150, 100)
            }
            ProblemName::Twophase2d => {
                optimizer.adam.iterations = 10000;
                optimizer.quasi_newton.max_iterations = 1500;
                ("adaptive_residual", 2500, 400, 150)
            }
        };
        let evaluation = match problem {
            ProblemName::AdvDiff => EvaluationSection {
                grid: vec![201],
                times: vec![],
                sweeps: vec![SweepSection { param: "eps".into(), lo: 0.07, hi: 0.13, count: 25 }],
                contour: None,
            },
            ProblemName::Poisson9 => EvaluationSection {
                grid: vec![101, 101],
                times: vec![],
                sweeps: vec![SweepSection { param: "k1".into(), lo: 0.7, hi: 1.3, count: 25 }],
                contour: Some(ContourSection {
                    x: "k1".into(),
                    y: "k2".into(),
                    lo: 0.7,
                    hi: 1.3,
                    count: 21,
                }),
            },
            ProblemName::Twophase1d => EvaluationSection {
                grid: vec![401],
                times: (1..=10).map(|i| i as f64 * 0.05).collect(),
                sweeps: vec![SweepSection { param: "k".into(), lo: 0.7, hi: 1.3, count: 13 }],
                contour: None,
            },
            ProblemName::Twophase2d => EvaluationSection {
                grid: vec![81, 81],
                times: vec![0.25, 0.5, 0.75, 1.0],
                sweeps: vec![],
                contour: None,
            },
        };
        ExperimentConfig {
            schema: 1,
            problem,
            mode: Mode::Sa,
            seed: 0,
            network: NetworkSection::default(),
            optimizer,
            loss_weights: LossWeights::default(),
            sampling: SamplingSection {
                strategy: strategy.to_string(),
                interior,
                initial,
                per_boundary,
                adaptive: AdaptiveSection::default(),
                parametric_factor: 4,
            },
            problem_options: ProblemOptionsSection::default(),
            param_overrides: BTreeMap::new(),
            evaluation,
            output_dir: format!("out/{}", problem.as_str()),
        }
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| schema_err(e.to_string()))?;
        if raw.schema.unwrap_or(1) != 1 {
            return Err(schema_err(format!(
                "unsupported schema version {}",
                raw.schema.unwrap()
            )));
        }
        let mut cfg = ExperimentConfig::default_for(raw.problem);
        if let Some(mode) = raw.mode {
            cfg.mode = mode;
        }
        if let Some(seed) = raw.seed {
            cfg.seed = seed;
        }
        if let Some(n) = raw.network {
            if let Some(v) = n.hidden_layers {
                cfg.network.hidden_layers = v;
            }
            if let Some(v) = n.hidden_width {
                cfg.network.hidden_width = v;
            }
            if let Some(v) = n.init_seed {
                cfg.network.init_seed = v;
            }
        }
        if let Some(o) = raw.optimizer {
            cfg.optimizer = merge_json(&cfg.optimizer, &o)?;
        }
        if let Some(w) = raw.loss_weights {
            cfg.loss_weights = merge_json(&cfg.loss_weights, &w)?;
        }
        if let Some(s) = raw.sampling {
            if let Some(v) = s.strategy {
                cfg.sampling.strategy = v;
            }
            if let Some(v) = s.interior {
                cfg.sampling.interior = v;
            }
            if let Some(v) = s.initial {
                cfg.sampling.initial = v;
            }
            if let Some(v) = s.per_boundary {
                cfg.sampling.per_boundary = v;
            }
            if let Some(v) = s.adaptive {
                cfg.sampling.adaptive = v;
            }
            if let Some(v) = s.parametric_factor {
                cfg.sampling.parametric_factor = v;
            }
        }
        if let Some(p) = raw.problem_options {
            cfg.problem_options = p;
        }
        if let Some(p) = raw.param_overrides {
            cfg.param_overrides = p;
        }
        if let Some(e) = raw.evaluation {
            if let Some(v) = e.grid {
                cfg.evaluation.grid = v;
            }
            if let Some(v) = e.times {
                cfg.evaluation.times = v;
            }
            if let Some(v) = e.sweeps {
                cfg.evaluation.sweeps = v;
            }
            if e.contour.is_some() {
                cfg.evaluation.contour = e.contour;
            }
        }
        if let Some(v) = raw.output_dir {
            cfg.output_dir = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.loss_weights.validate()?;
        self.strategy()?;
        if self.sampling.interior == 0 {
            return Err(schema_err("sampling.interior must be > 0"));
        }
        let problem = self.build_problem()?;
        problem.validate()?;
        for sw in &self.evaluation.sweeps {
            let idx = problem
                .params
                .index_of(&sw.param)
                .ok_or_else(|| CoreError::UnknownParameter(sw.param.clone()))?;
            let nominal = problem.params.defs[idx].nominal;
            if !(sw.lo <= nominal && nominal <= sw.hi) {
                return Err(schema_err(format!(
                    "sweep range for {} does not contain its nominal {}",
                    sw.param, nominal
                )));
            }
        }
        if let Some(c) = &self.evaluation.contour {
            for name in [&c.x, &c.y] {
                if problem.params.index_of(name).is_none() {
                    return Err(CoreError::UnknownParameter(name.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn strategy(&self) -> Result<SamplingStrategy> {
        Ok(match self.sampling.strategy.as_str() {
            "equispaced" => SamplingStrategy::Equispaced,
            "latin_hypercube" => SamplingStrategy::LatinHypercube,
            "adaptive_residual" => SamplingStrategy::AdaptiveResidual(self.sampling.adaptive.into()),
            other => return Err(CoreError::UnknownStrategy(other.to_string())),
        })
    }

    pub fn counts(&self) -> SamplingCounts {
        let factor = if self.mode == Mode::Parametric { self.sampling.parametric_factor.max(1) } else { 1 };
        SamplingCounts {
            interior: self.sampling.interior * factor,
            initial: self.sampling.initial,
            per_boundary: self.sampling.per_boundary,
        }
    }

    /// Build the problem with option and parameter overrides applied.
    pub fn build_problem(&self) -> Result<ProblemSpec> {
        let o = &self.problem_options;
        let mut problem = match self.problem {
            ProblemName::AdvDiff => make_adv_diff(),
            ProblemName::Poisson9 => make_poisson9(),
            ProblemName::Twophase1d => {
                let d = TwoPhase1dOptions::default();
                make_twophase1d_with(TwoPhase1dOptions {
                    t_max: o.t_max.unwrap_or(d.t_max),
                    corner_margin: o.corner_margin.unwrap_or(d.corner_margin),
                })
            }
            ProblemName::Twophase2d => {
                let d = TwoPhase2dOptions::default();
                make_twophase2d_with(TwoPhase2dOptions {
                    t_max: o.t_max.unwrap_or(d.t_max),
                    corner_margin: o.corner_margin.unwrap_or(d.corner_margin),
                    strip_height: o.strip_height.unwrap_or(d.strip_height),
                    inlet_extent: o.inlet_extent.unwrap_or(d.inlet_extent),
                    v_in: o.v_in.unwrap_or(d.v_in),
                })
            }
        };
        for (name, ov) in &self.param_overrides {
            let idx = problem
                .params
                .index_of(name)
                .ok_or_else(|| CoreError::UnknownParameter(name.clone()))?;
            if let Some(v) = ov.nominal {
                problem.params.defs[idx].nominal = v;
            }
            if let Some(sweep) = ov.sweep {
                problem.params.defs[idx].sweep = Some(sweep);
            }
        }
        problem.validate()?;
        Ok(problem)
    }

    /// Stable serialized form of the resolved config.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    /// Provenance hash of the resolved config.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_json().as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{:02x}", b)).collect()
    }
}

/// Overlay a partial JSON object onto a serializable default.
fn merge_json<T: Serialize + for<'de> Deserialize<'de>>(
    base: &T,
    patch: &serde_json::Value,
) -> Result<T> {
    let mut doc = serde_json::to_value(base).map_err(|e| schema_err(e.to_string()))?;
    merge_value(&mut doc, patch)?;
    serde_json::from_value(doc).map_err(|e| schema_err(e.to_string()))
}

fn merge_value(base: &mut serde_json::Value, patch: &serde_json::Value) -> Result<()> {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge_value(slot, v)?,
                    None => return Err(schema_err(format!("unknown field `{}`", k))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v.clone();
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_benchmark_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"problem": "adv_diff"}"#).unwrap();
        assert_eq!(cfg.mode, Mode::Sa);
        assert_eq!(cfg.sampling.strategy, "equispaced");
        assert_eq!(cfg.sampling.interior, 100);
        assert_eq!(cfg.optimizer.adam.iterations, 1000);
        assert_eq!(cfg.loss_weights.residual, 1.0);
        assert_eq!(cfg.loss_weights.sa.residual, 0.1);
        let p9 = ExperimentConfig::from_json(r#"{"problem": "poisson9"}"#).unwrap();
        assert_eq!(p9.sampling.strategy, "latin_hypercube");
        assert_eq!(p9.sampling.interior, 1000);
    }

    #[test]
    fn invalid_mode_and_unknown_fields_are_schema_errors() {
        assert!(ExperimentConfig::from_json(r#"{"problem": "adv_diff", "mode": "bogus"}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"problem": "nope"}"#).is_err());
        assert!(ExperimentConfig::from_json(
            r#"{"problem": "adv_diff", "optimizer": {"adam": {"learning_rate": 0.1}}}"#
        )
        .is_err());
        assert!(ExperimentConfig::from_json(r#"{"problem": "adv_diff", "schema": 2}"#).is_err());
    }

    #[test]
    fn partial_optimizer_patch_keeps_other_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": "poisson9", "optimizer": {"adam": {"iterations": 42}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.optimizer.adam.iterations, 42);
        assert_eq!(cfg.optimizer.adam.lr, 1e-3);
        assert_eq!(cfg.optimizer.quasi_newton.memory, 20);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::from_json(r#"{"problem": "adv_diff"}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{"problem": "adv_diff"}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig::from_json(r#"{"problem": "adv_diff", "seed": 1}"#).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn param_overrides_apply_and_validate() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": "twophase1d", "param_overrides": {"k": {"nominal": 1.2}}}"#,
        )
        .unwrap();
        let p = cfg.build_problem().unwrap();
        assert_eq!(p.params.value("k"), 1.2);
        // Nominal outside the sweep range is rejected.
        assert!(ExperimentConfig::from_json(
            r#"{"problem": "twophase1d", "param_overrides": {"k": {"nominal": 5.0}}}"#
        )
        .is_err());
    }

    #[test]
    fn parametric_mode_scales_interior_points() {
        let cfg = ExperimentConfig::from_json(
            r#"{"problem": "twophase1d", "mode": "parametric", "sampling": {"strategy": "latin_hypercube", "interior": 100}}"#,
        )
        .unwrap();
        assert_eq!(cfg.counts().interior, 400);
    }
}
