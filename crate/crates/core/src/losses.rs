//! Weighted loss assembly: the residual/boundary/initial terms plus the
//! sensitivity extension (mean-squared parameter derivatives of every
//! residual, evaluated at nominal parameter values).

use std::cell::RefCell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::autodiff::{
    loss_weight_gradient, LossProgram, PointClass, SquaredTerm, TaggedPoint, TapeCtx,
    WeightGradient,
};
use crate::error::{CoreError, Result};
use crate::network::Network;
use crate::problems::{CollocationSet, FieldCtx, JetPlan, ProblemSpec};

/// Training / evaluation mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Parameter inputs pinned at nominals, no sensitivity terms.
    Vanilla,
    /// Adds mean-squared parameter-derivative terms at nominal values.
    Sa,
    /// Collocation points drawn in the parametric space, no extra terms.
    Parametric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaWeights {
    pub initial: f64,
    pub dirichlet: f64,
    pub neumann: f64,
    pub residual: f64,
}

impl Default for SaWeights {
    fn default() -> Self {
        SaWeights { initial: 0.1, dirichlet: 0.1, neumann: 0.1, residual: 0.1 }
    }
}

/// Per-term weights; the sensitivity set applies to every flagged parameter
/// unless overridden by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub initial: f64,
    pub dirichlet: f64,
    pub neumann: f64,
    pub residual: f64,
    #[serde(default)]
    pub sa: SaWeights,
    #[serde(default)]
    pub sa_overrides: BTreeMap<String, SaWeights>,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            initial: 1.0,
            dirichlet: 1.0,
            neumann: 1.0,
            residual: 1.0,
            sa: SaWeights::default(),
            sa_overrides: BTreeMap::new(),
        }
    }
}

impl LossWeights {
    fn sa_for(&self, param_name: &str) -> SaWeights {
        self.sa_overrides.get(param_name).copied().unwrap_or(self.sa)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.initial, self.dirichlet, self.neumann, self.residual];
        let sa_all = |s: &SaWeights| [s.initial, s.dirichlet, s.neumann, s.residual];
        if all.iter().any(|w| *w < 0.0)
            || sa_all(&self.sa).iter().any(|w| *w < 0.0)
            || self.sa_overrides.values().any(|s| sa_all(s).iter().any(|w| *w < 0.0))
        {
            return Err(CoreError::InvalidProblem("loss weights must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Initial,
    Dirichlet,
    Neumann,
    Residual,
}

impl TermKind {
    fn of_class(class: PointClass) -> TermKind {
        match class {
            PointClass::Interior => TermKind::Residual,
            PointClass::Initial => TermKind::Initial,
            PointClass::Dirichlet => TermKind::Dirichlet,
            PointClass::Neumann => TermKind::Neumann,
        }
    }
}

/// One (term kind, parameter) entry of a loss breakdown. `param` is `None`
/// for the plain terms and the parameter name for sensitivity terms. `raw`
/// is the mean of squares over the term's point class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LossTerm {
    pub kind: TermKind,
    pub param: Option<String>,
    pub raw: f64,
    pub weight: f64,
}

impl LossTerm {
    pub fn label(&self) -> String {
        let base = match self.kind {
            TermKind::Initial => "initial",
            TermKind::Dirichlet => "dirichlet",
            TermKind::Neumann => "neumann",
            TermKind::Residual => "residual",
        };
        match &self.param {
            None => base.to_string(),
            Some(p) => format!("sa_{}[{}]", base, p),
        }
    }
}

/// Per-term loss values; `total` is the weighted sum of the term means.
#[derive(Clone, Debug, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub terms: Vec<LossTerm>,
    /// Interior residual norms per point, recorded on request (adaptive
    /// sampling diagnostics).
    pub residual_samples: Option<Vec<f64>>,
}

impl LossBreakdown {
    pub fn term(&self, kind: TermKind, param: Option<&str>) -> Option<&LossTerm> {
        self.terms
            .iter()
            .find(|t| t.kind == kind && t.param.as_deref() == param)
    }

    pub fn term_values(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.raw).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.total.is_finite()
    }
}

struct TermSlot {
    kind: TermKind,
    /// Parameter index for sensitivity terms.
    param: Option<usize>,
    weight: f64,
    /// Number of points in the term's class (0 leaves the term empty).
    class_count: usize,
}

/// Precompiled loss program for one (problem, mode, weights, point counts).
pub struct LossPlan<'p> {
    problem: &'p ProblemSpec,
    plan: JetPlan,
    slots: Vec<TermSlot>,
    keep_residual_samples: bool,
    samples: RefCell<Vec<f64>>,
    /// Term filter: emit plain terms, sensitivity terms, or both.
    emit_plain: bool,
    emit_sa: bool,
}

impl<'p> LossPlan<'p> {
    pub fn new(
        problem: &'p ProblemSpec,
        mode: Mode,
        weights: &LossWeights,
        points: &CollocationSet,
    ) -> Result<LossPlan<'p>> {
        Self::with_filter(problem, mode, weights, points, true, mode == Mode::Sa)
    }

    fn with_filter(
        problem: &'p ProblemSpec,
        mode: Mode,
        weights: &LossWeights,
        points: &CollocationSet,
        emit_plain: bool,
        emit_sa: bool,
    ) -> Result<LossPlan<'p>> {
        weights.validate()?;
        let sa_params = if emit_sa {
            let idx = problem.params.sensitive_indices();
            if idx.is_empty() {
                return Err(CoreError::InvalidProblem(
                    "sensitivity mode needs at least one sensitivity-flagged parameter".into(),
                ));
            }
            idx
        } else {
            Vec::new()
        };
        let plan = JetPlan::build(problem, &sa_params)?;
        let (n_f, n_0, n_d, n_n) = points.counts();
        let mut slots = Vec::new();
        for kind in [TermKind::Residual, TermKind::Initial, TermKind::Dirichlet, TermKind::Neumann] {
            let (w, n) = match kind {
                TermKind::Residual => (weights.residual, n_f),
                TermKind::Initial => (weights.initial, n_0),
                TermKind::Dirichlet => (weights.dirichlet, n_d),
                TermKind::Neumann => (weights.neumann, n_n),
            };
            slots.push(TermSlot { kind, param: None, weight: w, class_count: n });
        }
        for &p in &sa_params {
            let name = &problem.params.defs[p].name;
            let sw = weights.sa_for(name);
            for kind in [TermKind::Residual, TermKind::Initial, TermKind::Dirichlet, TermKind::Neumann] {
                let (w, n) = match kind {
                    TermKind::Residual => (sw.residual, n_f),
                    TermKind::Initial => (sw.initial, n_0),
                    TermKind::Dirichlet => (sw.dirichlet, n_d),
                    TermKind::Neumann => (sw.neumann, n_n),
                };
                slots.push(TermSlot { kind, param: Some(p), weight: w, class_count: n });
            }
        }
        let _ = mode;
        Ok(LossPlan {
            problem,
            plan,
            slots,
            keep_residual_samples: false,
            samples: RefCell::new(Vec::new()),
            emit_plain,
            emit_sa,
        })
    }

    pub fn keep_residual_samples(mut self, keep: bool) -> Self {
        self.keep_residual_samples = keep;
        self
    }

    pub fn term_labels(&self) -> Vec<String> {
        self.slots
            .iter()
            .map(|s| {
                LossTerm {
                    kind: s.kind,
                    param: s.param.map(|p| self.problem.params.defs[p].name.clone()),
                    raw: 0.0,
                    weight: s.weight,
                }
                .label()
            })
            .collect()
    }

    fn tag_of(&self, kind: TermKind, param: Option<usize>) -> usize {
        self.slots
            .iter()
            .position(|s| s.kind == kind && s.param == param)
            .expect("term slot")
    }

    fn breakdown(&self, raw_sums: &[f64]) -> LossBreakdown {
        let mut total = 0.0;
        let mut terms = Vec::with_capacity(self.slots.len());
        for (i, s) in self.slots.iter().enumerate() {
            let mean = if s.class_count == 0 { 0.0 } else { raw_sums[i] / s.class_count as f64 };
            total += s.weight * mean;
            terms.push(LossTerm {
                kind: s.kind,
                param: s.param.map(|p| self.problem.params.defs[p].name.clone()),
                raw: mean,
                weight: s.weight,
            });
        }
        LossBreakdown {
            total,
            terms,
            residual_samples: if self.keep_residual_samples {
                Some(self.samples.borrow().clone())
            } else {
                None
            },
        }
    }
}

impl LossProgram for LossPlan<'_> {
    fn term_count(&self) -> usize {
        self.slots.len()
    }

    fn emit_point(&self, ctx: &mut TapeCtx, point: &TaggedPoint) -> Result<Vec<SquaredTerm>> {
        let mut f = FieldCtx::new(ctx, &self.plan, self.problem, point.coords)?;
        let residuals = match point.class {
            PointClass::Interior => self.problem.emit_interior(&mut f)?,
            PointClass::Initial => vec![self.problem.emit_initial(&mut f, point.group)?],
            PointClass::Dirichlet | PointClass::Neumann => {
                vec![self.problem.emit_boundary(&mut f, point.group)?]
            }
        };
        let kind = TermKind::of_class(point.class);
        let mut out = Vec::with_capacity(residuals.len() * (1 + self.plan.sa_params.len()));
        let mut norm_sq = 0.0;
        for r in &residuals {
            if self.emit_plain {
                let tag = self.tag_of(kind, None);
                let slot = &self.slots[tag];
                let w = if slot.class_count == 0 { 0.0 } else { slot.weight / slot.class_count as f64 };
                out.push(SquaredTerm { poly: *r, coeff: 0, weight: w, tag });
            }
            if self.keep_residual_samples && point.class == PointClass::Interior {
                let v = f.tape.coeff_value(*r, 0);
                norm_sq += v * v;
            }
            if self.emit_sa {
                for &(p, _, coeff) in &self.plan.sa_params {
                    let tag = self.tag_of(kind, Some(p));
                    let slot = &self.slots[tag];
                    let w = if slot.class_count == 0 { 0.0 } else { slot.weight / slot.class_count as f64 };
                    out.push(SquaredTerm { poly: *r, coeff, weight: w, tag });
                }
            }
        }
        if self.keep_residual_samples && point.class == PointClass::Interior {
            self.samples.borrow_mut().push(norm_sq.sqrt());
        }
        Ok(out)
    }
}

fn evaluate(
    net: &Network,
    plan: &LossPlan,
    points: &CollocationSet,
    want_gradient: bool,
) -> Result<(LossBreakdown, WeightGradient)> {
    plan.samples.borrow_mut().clear();
    let eval = loss_weight_gradient(net, plan, points.tagged_points(), want_gradient)?;
    Ok((plan.breakdown(&eval.raw_term_sums), eval.gradient))
}

/// The plain weighted loss: mean-squared residuals and boundary/initial
/// mismatches (empty point classes contribute zero).
pub fn pinn_loss(
    net: &Network,
    problem: &ProblemSpec,
    points: &CollocationSet,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let plan = LossPlan::with_filter(problem, Mode::Vanilla, weights, points, true, false)?;
    Ok(evaluate(net, &plan, points, false)?.0)
}

/// The sensitivity extension alone: for each flagged parameter, mean-squared
/// parameter derivatives of every residual/mismatch, evaluated at nominals.
pub fn sa_loss(
    net: &Network,
    problem: &ProblemSpec,
    points: &CollocationSet,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let plan = LossPlan::with_filter(problem, Mode::Sa, weights, points, false, true)?;
    Ok(evaluate(net, &plan, points, false)?.0)
}

/// Mode-dependent total: vanilla/parametric use the plain terms only, the
/// sensitivity mode adds the parameter-derivative terms.
pub fn total_loss(
    net: &Network,
    problem: &ProblemSpec,
    points: &CollocationSet,
    weights: &LossWeights,
    mode: Mode,
) -> Result<LossBreakdown> {
    let plan = LossPlan::new(problem, mode, weights, points)?;
    Ok(evaluate(net, &plan, points, false)?.0)
}

/// Total loss plus its exact weight gradient (single fused pass).
pub fn total_loss_with_gradient(
    net: &Network,
    problem: &ProblemSpec,
    points: &CollocationSet,
    weights: &LossWeights,
    mode: Mode,
) -> Result<(LossBreakdown, WeightGradient)> {
    let plan = LossPlan::new(problem, mode, weights, points)?;
    evaluate(net, &plan, points, true)
}
