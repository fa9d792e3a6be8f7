//! Exact derivatives of network outputs with respect to selected inputs (up
//! to mixed third order) and gradients of scalar losses with respect to all
//! trainable weights, composable as "weight-gradient of a function of
//! input-derivatives".

mod basis;
mod scalar_fn;
mod tape;

pub use basis::{extraction_map, Basis, ExtractionMap, Signature, MAX_INPUT_ORDER};
pub use scalar_fn::ScalarFn;
pub use tape::{BasisId, PolyId, TapeCtx};

use crate::error::{CoreError, Result};
use crate::network::Network;

/// Which input partials a jet evaluation should produce.
#[derive(Clone, Debug)]
pub struct DerivativeRequest {
    arity: usize,
    signatures: Vec<Signature>,
}

impl DerivativeRequest {
    pub fn new(arity: usize) -> Self {
        DerivativeRequest {
            arity,
            signatures: Vec::new(),
        }
    }

    /// Request pure partials of orders 1..=max_order in one input slot.
    pub fn pure(mut self, slot: usize, max_order: u8) -> Result<Self> {
        for o in 1..=max_order {
            let sig = Signature::single(self.arity, slot, o)?;
            if !self.signatures.contains(&sig) {
                self.signatures.push(sig);
            }
        }
        Ok(self)
    }

    /// Request an explicit mixed partial given as (slot, order) pairs.
    pub fn mixed(mut self, pairs: &[(usize, u8)]) -> Result<Self> {
        let sig = Signature::from_pairs(self.arity, pairs)?;
        if !sig.is_zero() && !self.signatures.contains(&sig) {
            self.signatures.push(sig);
        }
        Ok(self)
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

/// A network output value bundled with its requested mixed partials
/// (derivative convention, not Taylor coefficients).
#[derive(Clone, Debug)]
pub struct DerivativeJet {
    pub value: f64,
    partials: Vec<(Signature, f64)>,
}

impl DerivativeJet {
    pub fn partial(&self, sig: &Signature) -> Option<f64> {
        self.partials
            .iter()
            .find(|(s, _)| s == sig)
            .map(|(_, v)| *v)
    }

    pub fn partials(&self) -> &[(Signature, f64)] {
        &self.partials
    }
}

/// Flat gradient aligned with the network's canonical weight ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightGradient(pub Vec<f64>);

impl WeightGradient {
    pub fn zeros(n: usize) -> Self {
        WeightGradient(vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

impl std::ops::Deref for WeightGradient {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Jets for every network output at one point.
pub fn eval_jets(net: &Network, point: &[f64], request: &DerivativeRequest) -> Result<Vec<DerivativeJet>> {
    let arity = net.spec.input_layout.arity();
    if request.arity != arity {
        return Err(CoreError::DimensionMismatch {
            expected: arity,
            got: request.arity,
        });
    }
    if point.len() != arity {
        return Err(CoreError::DimensionMismatch {
            expected: arity,
            got: point.len(),
        });
    }
    let basis = Basis::closure(arity, &request.signatures)?;
    let mut ctx = TapeCtx::new(net);
    let bid = ctx.register_basis(basis.clone());
    let outs = ctx.emit_network(bid, point)?;
    let jets = outs
        .into_iter()
        .map(|p| {
            let value = ctx.coeff_value(p, 0);
            let partials = request
                .signatures
                .iter()
                .map(|sig| {
                    let idx = basis.mono_index(sig).expect("signature in own closure");
                    (sig.clone(), ctx.coeff_value(p, idx) * basis.mono_factorial(idx))
                })
                .collect();
            DerivativeJet { value, partials }
        })
        .collect();
    Ok(jets)
}

/// Jet of the first network output (the common single-output case).
pub fn eval_jet(net: &Network, point: &[f64], request: &DerivativeRequest) -> Result<DerivativeJet> {
    Ok(eval_jets(net, point, request)?.remove(0))
}

/// Collocation point classes shared across the loss machinery.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointClass {
    Interior,
    Initial,
    Dirichlet,
    Neumann,
}

/// A point handed to a loss program: coordinates in network input order plus
/// its class and the index of the boundary/initial group it belongs to.
#[derive(Clone, Copy, Debug)]
pub struct TaggedPoint<'p> {
    pub class: PointClass,
    pub group: usize,
    pub coords: &'p [f64],
}

/// One squared contribution to a loss: `weight * s^2` where `s` is a single
/// polynomial coefficient produced on the tape.
#[derive(Clone, Copy, Debug)]
pub struct SquaredTerm {
    pub poly: PolyId,
    pub coeff: usize,
    pub weight: f64,
    pub tag: usize,
}

/// A scalar loss of the form sum over contributions of `weight * s^2`,
/// expressed through tape programs (network jets plus smooth arithmetic).
pub trait LossProgram {
    fn term_count(&self) -> usize;

    /// Emit the per-point computation and name its squared contributions.
    fn emit_point(&self, ctx: &mut TapeCtx, point: &TaggedPoint) -> Result<Vec<SquaredTerm>>;

    /// Point-independent contributions (e.g. direct weight penalties).
    fn emit_global(&self, _ctx: &mut TapeCtx) -> Result<Vec<SquaredTerm>> {
        Ok(Vec::new())
    }
}

/// Evaluation products of [`loss_weight_gradient`].
pub struct LossEval {
    /// Total loss: sum of weight * s^2 over all contributions.
    pub value: f64,
    pub gradient: WeightGradient,
    /// Raw sum of s^2 per term tag (unweighted).
    pub raw_term_sums: Vec<f64>,
    /// Number of contributions seen per term tag.
    pub term_counts: Vec<usize>,
}

/// Loss value and its exact gradient with respect to every trainable weight.
///
/// The gradient is exact for losses composed of network jets and smooth tape
/// arithmetic; flows through input-derivative terms are included. Points are
/// processed in iteration order with a fixed-order reduction, so the result
/// is deterministic.
pub fn loss_weight_gradient<'p>(
    net: &Network,
    program: &dyn LossProgram,
    points: impl IntoIterator<Item = TaggedPoint<'p>>,
    want_gradient: bool,
) -> Result<LossEval> {
    let mut ctx = TapeCtx::new(net);
    let mut total = 0.0;
    let mut grad = vec![0.0; net.weight_count()];
    let mut raw = vec![0.0; program.term_count()];
    let mut counts = vec![0usize; program.term_count()];
    let mut seeds: Vec<(PolyId, usize, f64)> = Vec::new();

    let consume = |ctx: &mut TapeCtx,
                       terms: Vec<SquaredTerm>,
                       total: &mut f64,
                       raw: &mut [f64],
                       counts: &mut [usize],
                       grad: &mut [f64],
                       seeds: &mut Vec<(PolyId, usize, f64)>| {
        seeds.clear();
        for t in terms {
            let s = ctx.coeff_value(t.poly, t.coeff);
            raw[t.tag] += s * s;
            counts[t.tag] += 1;
            *total += t.weight * s * s;
            if t.weight != 0.0 {
                seeds.push((t.poly, t.coeff, 2.0 * t.weight * s));
            }
        }
        if want_gradient && !seeds.is_empty() {
            ctx.backward(seeds, grad);
        }
    };

    for p in points {
        ctx.reset();
        let terms = program.emit_point(&mut ctx, &p)?;
        consume(&mut ctx, terms, &mut total, &mut raw, &mut counts, &mut grad, &mut seeds);
    }
    ctx.reset();
    let terms = program.emit_global(&mut ctx)?;
    consume(&mut ctx, terms, &mut total, &mut raw, &mut counts, &mut grad, &mut seeds);

    Ok(LossEval {
        value: total,
        gradient: WeightGradient(grad),
        raw_term_sums: raw,
        term_counts: counts,
    })
}
