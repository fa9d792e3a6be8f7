//! The four benchmark problems: residual functions, boundary/initial data,
//! domains, parameters of interest, and collocation sampling.

pub mod catalog;
pub mod sampling;

pub use catalog::{
    make_adv_diff, make_poisson9, make_twophase1d, make_twophase1d_with, make_twophase2d,
    make_twophase2d_with,
};
pub use sampling::{
    adaptive_extend, residual_norms, sample, AdaptiveConfig, SamplingCounts, SamplingStrategy,
};

use std::collections::HashMap;
use std::sync::Arc;

use crate::autodiff::{
    extraction_map, Basis, BasisId, ExtractionMap, PointClass, PolyId, ScalarFn, Signature,
    TaggedPoint, TapeCtx,
};
use crate::error::{CoreError, Result};
use crate::network::{InputLayout, Wrapper};

/// A named problem parameter. Sensitivity-flagged parameters become network
/// inputs (the parameters of interest); the rest are physical constants.
#[derive(Clone, Debug)]
pub struct ParamDef {
    pub name: String,
    pub nominal: f64,
    pub sensitive: bool,
    /// Range for evaluation sweeps and parametric-mode sampling.
    pub sweep: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Default)]
pub struct ParamVector {
    pub defs: Vec<ParamDef>,
}

impl ParamVector {
    pub fn value(&self, name: &str) -> f64 {
        self.defs
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.nominal)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.defs.iter().position(|d| d.name == name)
    }

    pub fn sensitive_indices(&self) -> Vec<usize> {
        self.defs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.sensitive)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.defs {
            if let Some((lo, hi)) = d.sweep {
                if !(lo < d.nominal && d.nominal < hi) {
                    return Err(CoreError::InvalidProblem(format!(
                        "parameter {} nominal {} not strictly inside sweep range [{}, {}]",
                        d.name, d.nominal, lo, hi
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Geometry of a boundary/initial point set: some slots pinned, some ranged.
/// Parameter slots are never listed; the sampler pins them at nominals (or
/// draws them from sweep ranges in parametric mode).
#[derive(Clone, Debug)]
pub struct Region {
    pub fixed: Vec<(usize, f64)>,
    pub free: Vec<(usize, f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    /// Enforced by the output wrapper; no points are sampled.
    HardConstraint,
}

/// Operator applied at a boundary point, compared against `target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryOp {
    /// u_output.
    Value,
    /// sign * d(u_output)/d(axis).
    NormalGradient { axis: usize, sign: f64 },
    /// sign * (-(k_field/(phi*mu(c))) * dp/d(axis)) — a Darcy velocity
    /// component; `output` must be the pressure output.
    DarcyVelocity { axis: usize, sign: f64 },
}

#[derive(Clone, Debug)]
pub struct BoundarySpec {
    pub name: String,
    pub kind: BoundaryKind,
    pub output: usize,
    pub op: BoundaryOp,
    pub target: f64,
    pub region: Region,
}

#[derive(Clone, Debug)]
pub struct InitialSpec {
    pub output: usize,
    pub value: f64,
    pub region: Region,
}

/// Spatial bounds plus optional time horizon.
#[derive(Clone, Debug)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
    pub t_max: Option<f64>,
}

impl Domain {
    /// Spatial/time containment for a full input-coordinate vector.
    pub fn contains(&self, layout: &InputLayout, coords: &[f64]) -> bool {
        for (slot, s) in layout.slots.iter().enumerate() {
            match s.kind {
                crate::network::SlotKind::Space(axis) => {
                    let (lo, hi) = self.bounds[axis];
                    if coords[slot] < lo - 1e-12 || coords[slot] > hi + 1e-12 {
                        return false;
                    }
                }
                crate::network::SlotKind::Time => {
                    let t = coords[slot];
                    let tmax = self.t_max.unwrap_or(0.0);
                    if t < -1e-12 || t > tmax + 1e-12 {
                        return false;
                    }
                }
                crate::network::SlotKind::Param(_) => {}
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    AdvDiff,
    Poisson9,
    TwoPhase1d,
    TwoPhase2d,
}

/// One benchmark problem: everything the loss assembly and samplers need.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: ProblemKind,
    pub spatial_dim: usize,
    pub time_dependent: bool,
    pub domain: Domain,
    pub params: ParamVector,
    pub output_dim: usize,
    pub boundary_specs: Vec<BoundarySpec>,
    pub initial_specs: Vec<InitialSpec>,
    pub layout: InputLayout,
    /// Hard-constraint wrapper the network should be built with, if any.
    pub wrapper: Option<Wrapper>,
    /// Margin keeping initial/inlet samples away from conflicting corners.
    pub corner_margin: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.output_dim == 0 {
            return Err(CoreError::InvalidProblem("output_dim must be >= 1".into()));
        }
        Ok(())
    }

    /// Slot of a parameter by index into `params.defs`.
    pub fn param_slot(&self, param_idx: usize) -> Option<usize> {
        self.layout.param_slot(param_idx)
    }

    /// Nominal coordinates for every parameter slot.
    pub fn nominal_param_coords(&self) -> Vec<(usize, f64)> {
        self.layout
            .slots
            .iter()
            .enumerate()
            .filter_map(|(slot, s)| match s.kind {
                crate::network::SlotKind::Param(p) => Some((slot, self.params.defs[p].nominal)),
                _ => None,
            })
            .collect()
    }
}

/// Precompiled bases and extraction maps for one (problem, sensitivity set).
pub struct JetPlan {
    pub b_u: Arc<Basis>,
    pub b_r: Arc<Basis>,
    maps: HashMap<Signature, Arc<ExtractionMap>>,
    /// (param index, input slot, coefficient index in b_r) per SA parameter.
    pub sa_params: Vec<(usize, usize, usize)>,
}

impl JetPlan {
    /// `sa_params` lists parameter indices whose first-order directions the
    /// residual basis must carry (empty for vanilla/parametric evaluation).
    pub fn build(problem: &ProblemSpec, sa_params: &[usize]) -> Result<JetPlan> {
        let arity = problem.layout.arity();
        let mut rho: Vec<Signature> = vec![Signature::zero(arity)];
        let mut sa_info = Vec::new();
        for &p in sa_params {
            let slot = problem.param_slot(p).ok_or_else(|| {
                CoreError::UnknownParameter(problem.params.defs[p].name.clone())
            })?;
            rho.push(Signature::single(arity, slot, 1)?);
            sa_info.push((p, slot));
        }
        let b_r = Basis::closure(arity, &rho)?;

        let mut sigmas = problem.jet_requirements()?;
        sigmas.push(Signature::zero(arity));
        let mut u_sigs = Vec::new();
        for s in &sigmas {
            for r in &rho {
                u_sigs.push(s.add(r));
            }
        }
        let b_u = Basis::closure(arity, &u_sigs)?;

        let mut maps = HashMap::new();
        for s in &sigmas {
            maps.insert(s.clone(), Arc::new(extraction_map(&b_u, s, &b_r)?));
        }

        let sa_params = sa_info
            .into_iter()
            .map(|(p, slot)| {
                let coeff = b_r.direction_index(slot).expect("direction in residual basis");
                (p, slot, coeff)
            })
            .collect();

        Ok(JetPlan { b_u, b_r, maps, sa_params })
    }

    pub fn map_for(&self, sig: &Signature) -> Option<&Arc<ExtractionMap>> {
        self.maps.get(sig)
    }
}

/// Per-point emission helper handed to residual/boundary programs: network
/// jets as residual-basis fields plus the arithmetic to combine them.
pub struct FieldCtx<'t, 'a, 'p> {
    pub tape: &'t mut TapeCtx<'a>,
    plan: &'p JetPlan,
    problem: &'p ProblemSpec,
    bu: BasisId,
    br: BasisId,
    outs: Vec<PolyId>,
    cache: Vec<(usize, Signature, PolyId)>,
    pub coords: &'p [f64],
}

impl<'t, 'a, 'p> FieldCtx<'t, 'a, 'p> {
    pub fn new(
        tape: &'t mut TapeCtx<'a>,
        plan: &'p JetPlan,
        problem: &'p ProblemSpec,
        coords: &'p [f64],
    ) -> Result<Self> {
        let bu = tape.register_basis(plan.b_u.clone());
        let br = tape.register_basis(plan.b_r.clone());
        let outs = tape.emit_network(bu, coords)?;
        Ok(FieldCtx { tape, plan, problem, bu, br, outs, cache: Vec::new(), coords })
    }

    pub fn residual_basis(&self) -> BasisId {
        self.br
    }

    pub fn network_basis(&self) -> BasisId {
        self.bu
    }

    /// Derivative field of one output in the residual basis.
    pub fn field(&mut self, output: usize, pairs: &[(usize, u8)]) -> Result<PolyId> {
        let sig = Signature::from_pairs(self.problem.layout.arity(), pairs)?;
        if let Some((_, _, p)) = self
            .cache
            .iter()
            .find(|(o, s, _)| *o == output && s == &sig)
        {
            return Ok(*p);
        }
        let map = self.plan.map_for(&sig).ok_or_else(|| {
            CoreError::InvalidProblem(format!("no extraction map for signature {}", sig))
        })?;
        let p = self.tape.extract(self.outs[output], map, self.br);
        self.cache.push((output, sig, p));
        Ok(p)
    }

    /// Output value field (zero signature).
    pub fn value(&mut self, output: usize) -> Result<PolyId> {
        self.field(output, &[])
    }

    /// Parameter coordinate as a field: nominal (or the point's coordinate)
    /// plus a unit derivative direction when the plan carries it.
    pub fn param_field(&mut self, param_idx: usize) -> Result<PolyId> {
        let slot = self.problem.param_slot(param_idx).ok_or_else(|| {
            CoreError::UnknownParameter(self.problem.params.defs[param_idx].name.clone())
        })?;
        Ok(self.tape.input_field(self.br, slot, self.coords[slot]))
    }

    pub fn param_value(&self, name: &str) -> f64 {
        self.problem.params.value(name)
    }

    pub fn constant(&mut self, v: f64) -> PolyId {
        self.tape.constant(self.br, v)
    }

    pub fn add(&mut self, a: PolyId, b: PolyId) -> PolyId {
        self.tape.add(a, b)
    }

    pub fn sub(&mut self, a: PolyId, b: PolyId) -> PolyId {
        self.tape.sub(a, b)
    }

    pub fn mul(&mut self, a: PolyId, b: PolyId) -> PolyId {
        self.tape.mul(a, b)
    }

    pub fn neg(&mut self, a: PolyId) -> PolyId {
        self.tape.neg(a)
    }

    pub fn scale(&mut self, a: PolyId, c: f64) -> PolyId {
        self.tape.scale(a, c)
    }

    pub fn shift(&mut self, a: PolyId, c: f64) -> PolyId {
        self.tape.shift(a, c)
    }

    pub fn compose(&mut self, f: ScalarFn, a: PolyId) -> PolyId {
        self.tape.compose(f, a)
    }
}

/// Row-major point storage.
#[derive(Clone, Debug, Default)]
pub struct PointBlock {
    pub arity: usize,
    pub data: Vec<f64>,
}

impl PointBlock {
    pub fn new(arity: usize) -> Self {
        PointBlock { arity, data: Vec::new() }
    }

    pub fn len(&self) -> usize {
        if self.arity == 0 {
            0
        } else {
            self.data.len() / self.arity
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.arity..(i + 1) * self.arity]
    }

    pub fn push(&mut self, coords: &[f64]) {
        debug_assert_eq!(coords.len(), self.arity);
        self.data.extend_from_slice(coords);
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.arity.max(1))
    }
}

/// Tagged point sets: interior (N_f), initial (N_0), Dirichlet (N_D),
/// Neumann (N_N), each carrying full input coordinates (parameter
/// coordinates pinned at nominals except in parametric mode).
#[derive(Clone, Debug)]
pub struct CollocationSet {
    pub interior: PointBlock,
    /// (initial spec index, points).
    pub initial: Vec<(usize, PointBlock)>,
    /// (boundary spec index, points).
    pub dirichlet: Vec<(usize, PointBlock)>,
    pub neumann: Vec<(usize, PointBlock)>,
}

impl CollocationSet {
    pub fn empty(arity: usize) -> Self {
        CollocationSet {
            interior: PointBlock::new(arity),
            initial: Vec::new(),
            dirichlet: Vec::new(),
            neumann: Vec::new(),
        }
    }

    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (
            self.interior.len(),
            self.initial.iter().map(|(_, b)| b.len()).sum(),
            self.dirichlet.iter().map(|(_, b)| b.len()).sum(),
            self.neumann.iter().map(|(_, b)| b.len()).sum(),
        )
    }

    /// Fixed-order iteration over all points (interior, initial, Dirichlet,
    /// Neumann) for deterministic reductions.
    pub fn tagged_points(&self) -> impl Iterator<Item = TaggedPoint<'_>> {
        let interior = self.interior.rows().map(|c| TaggedPoint {
            class: PointClass::Interior,
            group: 0,
            coords: c,
        });
        let initial = self.initial.iter().flat_map(|(g, b)| {
            b.rows().map(move |c| TaggedPoint { class: PointClass::Initial, group: *g, coords: c })
        });
        let dirichlet = self.dirichlet.iter().flat_map(|(g, b)| {
            b.rows().map(move |c| TaggedPoint { class: PointClass::Dirichlet, group: *g, coords: c })
        });
        let neumann = self.neumann.iter().flat_map(|(g, b)| {
            b.rows().map(move |c| TaggedPoint { class: PointClass::Neumann, group: *g, coords: c })
        });
        interior.chain(initial).chain(dirichlet).chain(neumann)
    }
}
