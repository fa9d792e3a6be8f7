//! Truncated multivariate Taylor bases.
//!
//! A `Basis` is a downward-closed set of monomials in a subset of the network
//! input slots (the differentiation directions). Polynomials truncated to such
//! a basis form a commutative algebra: because every divisor of a basis
//! monomial is itself in the basis, in-basis products are exact for every
//! retained coefficient. Coefficients are stored in Taylor convention
//! (coefficient of the monomial, i.e. mixed partial divided by the factorial
//! of the multi-index); `factorial` converts back to raw derivatives.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{CoreError, Result};

pub const MAX_INPUT_ORDER: usize = 3;

/// Upper bound on network input slots; keeps signatures allocation-free.
pub const MAX_ARITY: usize = 16;

/// Mixed-partial signature: derivative order per network input slot.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Signature {
    orders: [u8; MAX_ARITY],
    arity: u8,
}

impl Signature {
    pub fn zero(arity: usize) -> Self {
        debug_assert!(arity <= MAX_ARITY);
        Signature { orders: [0; MAX_ARITY], arity: arity as u8 }
    }

    /// Build from (slot, order) pairs; repeated slots accumulate.
    pub fn from_pairs(arity: usize, pairs: &[(usize, u8)]) -> Result<Self> {
        if arity > MAX_ARITY {
            return Err(CoreError::UnknownInputSlot { slot: arity, arity: MAX_ARITY });
        }
        let mut sig = Signature::zero(arity);
        for &(slot, order) in pairs {
            if slot >= arity {
                return Err(CoreError::UnknownInputSlot { slot, arity });
            }
            sig.orders[slot] += order;
        }
        if sig.total_order() as usize > MAX_INPUT_ORDER {
            return Err(CoreError::OrderTooHigh {
                order: sig.total_order() as usize,
                max: MAX_INPUT_ORDER,
            });
        }
        Ok(sig)
    }

    pub fn single(arity: usize, slot: usize, order: u8) -> Result<Self> {
        Self::from_pairs(arity, &[(slot, order)])
    }

    pub fn orders(&self) -> &[u8] {
        &self.orders[..self.arity as usize]
    }

    pub fn arity(&self) -> usize {
        self.arity as usize
    }

    pub fn total_order(&self) -> u8 {
        self.orders().iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.orders().iter().all(|&o| o == 0)
    }

    pub fn add(&self, other: &Signature) -> Signature {
        debug_assert_eq!(self.arity, other.arity);
        let mut out = *self;
        for (o, b) in out.orders.iter_mut().zip(other.orders.iter()) {
            *o += b;
        }
        out
    }

    fn factorial(&self) -> f64 {
        self.orders().iter().map(|&o| FACT[o as usize]).product()
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_zero() {
            return write!(f, "value");
        }
        let mut first = true;
        for (slot, &o) in self.orders().iter().enumerate() {
            if o > 0 {
                if !first {
                    write!(f, "*")?;
                }
                write!(f, "d{}", slot)?;
                if o > 1 {
                    write!(f, "^{}", o)?;
                }
                first = false;
            }
        }
        Ok(())
    }
}

const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// Downward-closed monomial set with a precompiled multiplication table.
///
/// Monomials are stored densely over the basis axes (the slots that actually
/// carry a derivative direction), sorted by (total order, lexicographic), so
/// index 0 is always the constant monomial.
pub struct Basis {
    arity: usize,
    /// Slot id per axis.
    dirs: Vec<usize>,
    /// Axis per slot (usize::MAX when the slot carries no direction).
    slot_axis: Vec<usize>,
    monos: Vec<[u8; MAX_ARITY]>,
    index: HashMap<[u8; MAX_ARITY], usize>,
    /// Product table compressed into unit-stride runs (see `MulRun`).
    mul_runs: Vec<MulRun>,
    factorial: Vec<f64>,
    order: Vec<u8>,
}

/// A run of product-table entries with contiguous destination indices:
/// out[dst+t] += a[ai + t*a_step] * b[bi + t*b_step] for t in 0..len, where
/// exactly one of the steps is 1 (the other 0) for len > 1. Monomials are
/// sorted so same-shape parameter monomials sit in contiguous planes, which
/// makes these runs long when many sensitivity parameters are present.
#[derive(Clone, Copy, Debug)]
struct MulRun {
    dst: u32,
    ai: u32,
    bi: u32,
    len: u32,
    a_step: u32,
    b_step: u32,
}

impl Basis {
    /// Downward closure of the given signatures (the zero signature is always
    /// included). All signatures must share `arity`.
    pub fn closure(arity: usize, signatures: &[Signature]) -> Result<Arc<Basis>> {
        let mut dirs: Vec<usize> = Vec::new();
        for sig in signatures {
            if sig.arity() != arity {
                return Err(CoreError::InvalidProblem(
                    "signature arity mismatch while building basis".into(),
                ));
            }
            if sig.total_order() as usize > MAX_INPUT_ORDER {
                return Err(CoreError::OrderTooHigh {
                    order: sig.total_order() as usize,
                    max: MAX_INPUT_ORDER,
                });
            }
            for (slot, &o) in sig.orders().iter().enumerate() {
                if o > 0 && !dirs.contains(&slot) {
                    dirs.push(slot);
                }
            }
        }
        dirs.sort_unstable();

        let mut slot_axis = vec![usize::MAX; arity];
        for (axis, &slot) in dirs.iter().enumerate() {
            slot_axis[slot] = axis;
        }

        // Enumerate all divisors of every signature.
        let n_axes = dirs.len();
        let mut set: Vec<[u8; MAX_ARITY]> = Vec::new();
        let mut seen: HashMap<[u8; MAX_ARITY], ()> = HashMap::new();
        let push = |m: [u8; MAX_ARITY], set: &mut Vec<[u8; MAX_ARITY]>, seen: &mut HashMap<[u8; MAX_ARITY], ()>| {
            if !seen.contains_key(&m) {
                seen.insert(m, ());
                set.push(m);
            }
        };
        push([0; MAX_ARITY], &mut set, &mut seen);
        for sig in signatures {
            let mut dense = [0u8; MAX_ARITY];
            for (axis, &s) in dirs.iter().enumerate() {
                dense[axis] = sig.orders()[s];
            }
            let mut stack = vec![dense];
            while let Some(m) = stack.pop() {
                if seen.contains_key(&m) {
                    continue;
                }
                for axis in 0..n_axes {
                    if m[axis] > 0 {
                        let mut d = m;
                        d[axis] -= 1;
                        stack.push(d);
                    }
                }
                push(m, &mut set, &mut seen);
            }
        }

        set.sort_by(|a, b| {
            let oa: u8 = a.iter().sum();
            let ob: u8 = b.iter().sum();
            oa.cmp(&ob).then(a.cmp(b))
        });

        let index: HashMap<[u8; MAX_ARITY], usize> =
            set.iter().enumerate().map(|(i, m)| (*m, i)).collect();

        // Multiplication table: every ordered pair whose product stays in the
        // basis. Downward closure guarantees exactness of in-basis products.
        let n = set.len();
        let mut entries: Vec<(u32, u32, u32)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut sum = [0u8; MAX_ARITY];
                for a in 0..MAX_ARITY {
                    sum[a] = set[i][a] + set[j][a];
                }
                if let Some(&dst) = index.get(&sum) {
                    entries.push((dst as u32, i as u32, j as u32));
                }
            }
        }
        // Compress into unit-stride runs over consecutive destinations. Two
        // passes: first runs with the left factor fixed (j, dst step
        // together), then runs with the right factor fixed.
        let mut mul_runs: Vec<MulRun> = Vec::new();
        let mut rest: Vec<(u32, u32, u32)> = Vec::new();
        entries.sort_unstable_by_key(|&(dst, i, j)| (i, j, dst));
        for &(dst, i, j) in &entries {
            if let Some(r) = mul_runs.last_mut() {
                let t = r.len;
                if r.a_step == 0 && i == r.ai && j == r.bi + t && dst == r.dst + t {
                    r.b_step = 1;
                    r.len += 1;
                    continue;
                }
            }
            mul_runs.push(MulRun { dst, ai: i, bi: j, len: 1, a_step: 0, b_step: 0 });
        }
        // Singletons get a second chance as fixed-right runs.
        mul_runs.retain(|r| {
            if r.len == 1 {
                rest.push((r.dst, r.ai, r.bi));
                false
            } else {
                true
            }
        });
        rest.sort_unstable_by_key(|&(dst, i, j)| (j, i, dst));
        for &(dst, i, j) in &rest {
            if let Some(r) = mul_runs.last_mut() {
                let t = r.len;
                if r.b_step == 0 && j == r.bi && i == r.ai + t && dst == r.dst + t && (r.len > 1 || r.a_step == 1) {
                    r.len += 1;
                    continue;
                }
                if r.len == 1 && r.b_step == 0 && j == r.bi && i == r.ai + 1 && dst == r.dst + 1 {
                    r.a_step = 1;
                    r.len += 1;
                    continue;
                }
            }
            mul_runs.push(MulRun { dst, ai: i, bi: j, len: 1, a_step: 0, b_step: 0 });
        }

        let factorial: Vec<f64> = set
            .iter()
            .map(|m| m.iter().map(|&o| FACT[o as usize]).product())
            .collect();
        let order: Vec<u8> = set.iter().map(|m| m.iter().sum()).collect();

        Ok(Arc::new(Basis {
            arity,
            dirs,
            slot_axis,
            monos: set,
            index,
            mul_runs,
            factorial,
            order,
        }))
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn max_order(&self) -> u8 {
        self.order.iter().copied().max().unwrap_or(0)
    }

    /// Coefficient index of a slot-space signature, if present.
    pub fn mono_index(&self, sig: &Signature) -> Option<usize> {
        // Any order on a slot without an axis means the monomial is absent.
        for (slot, &o) in sig.orders().iter().enumerate() {
            if o > 0 && self.slot_axis[slot] == usize::MAX {
                return None;
            }
        }
        let mut dense = [0u8; MAX_ARITY];
        for (axis, &s) in self.dirs.iter().enumerate() {
            dense[axis] = sig.orders()[s];
        }
        self.index.get(&dense).copied()
    }

    /// Coefficient index of the first-order monomial in direction `slot`.
    pub fn direction_index(&self, slot: usize) -> Option<usize> {
        let axis = *self.slot_axis.get(slot)?;
        if axis == usize::MAX {
            return None;
        }
        let mut dense = [0u8; MAX_ARITY];
        dense[axis] = 1;
        self.index.get(&dense).copied()
    }

    /// Slot-space signature of coefficient `i`.
    pub fn signature_of(&self, i: usize) -> Signature {
        let mut sig = Signature::zero(self.arity);
        for (axis, &slot) in self.dirs.iter().enumerate() {
            sig.orders[slot] = self.monos[i][axis];
        }
        sig
    }

    /// Factorial of monomial `i` (converts Taylor coefficient to derivative).
    pub fn mono_factorial(&self, i: usize) -> f64 {
        self.factorial[i]
    }

    /// out = a * b (truncated product). `out` must be zeroed by the caller
    /// or freshly allocated; contributions accumulate.
    pub fn mul(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for r in &self.mul_runs {
            let (dst, ai, bi, len) = (r.dst as usize, r.ai as usize, r.bi as usize, r.len as usize);
            match (r.a_step, r.b_step) {
                (0, 1) => {
                    let av = a[ai];
                    for (o, bv) in out[dst..dst + len].iter_mut().zip(&b[bi..bi + len]) {
                        *o += av * bv;
                    }
                }
                (1, 0) => {
                    let bv = b[bi];
                    for (o, av) in out[dst..dst + len].iter_mut().zip(&a[ai..ai + len]) {
                        *o += av * bv;
                    }
                }
                _ => out[dst] += a[ai] * b[bi],
            }
        }
    }

    /// Adjoint of `mul`: given h = a*b and the adjoint `hbar`, accumulate
    /// abar += d<hbar,h>/da and bbar += d<hbar,h>/db.
    pub fn mul_adjoint(
        &self,
        hbar: &[f64],
        a: &[f64],
        b: &[f64],
        abar: &mut [f64],
        bbar: &mut [f64],
    ) {
        for r in &self.mul_runs {
            let (dst, ai, bi, len) = (r.dst as usize, r.ai as usize, r.bi as usize, r.len as usize);
            match (r.a_step, r.b_step) {
                (0, 1) => {
                    let av = a[ai];
                    let mut acc = 0.0;
                    for ((&h, bv), bb) in hbar[dst..dst + len]
                        .iter()
                        .zip(&b[bi..bi + len])
                        .zip(bbar[bi..bi + len].iter_mut())
                    {
                        acc += h * bv;
                        *bb += h * av;
                    }
                    abar[ai] += acc;
                }
                (1, 0) => {
                    let bv = b[bi];
                    let mut acc = 0.0;
                    for ((&h, av), ab) in hbar[dst..dst + len]
                        .iter()
                        .zip(&a[ai..ai + len])
                        .zip(abar[ai..ai + len].iter_mut())
                    {
                        acc += h * av;
                        *ab += h * bv;
                    }
                    bbar[bi] += acc;
                }
                _ => {
                    let h = hbar[dst];
                    abar[ai] += h * b[bi];
                    bbar[bi] += h * a[ai];
                }
            }
        }
    }

    /// Adjoint of `mul` with respect to the first factor only.
    pub fn mul_adjoint_left(&self, hbar: &[f64], b: &[f64], abar: &mut [f64]) {
        for r in &self.mul_runs {
            let (dst, ai, bi, len) = (r.dst as usize, r.ai as usize, r.bi as usize, r.len as usize);
            match (r.a_step, r.b_step) {
                (0, 1) => {
                    let mut acc = 0.0;
                    for (&h, bv) in hbar[dst..dst + len].iter().zip(&b[bi..bi + len]) {
                        acc += h * bv;
                    }
                    abar[ai] += acc;
                }
                (1, 0) => {
                    let bv = b[bi];
                    for (&h, ab) in hbar[dst..dst + len].iter().zip(abar[ai..ai + len].iter_mut()) {
                        *ab += h * bv;
                    }
                }
                _ => abar[ai] += hbar[dst] * b[bi],
            }
        }
    }
}

impl std::fmt::Debug for Basis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Basis(dirs={:?}, {} monomials, {} mul runs)",
            self.dirs,
            self.monos.len(),
            self.mul_runs.len()
        )
    }
}

/// Precompiled coefficient transfer realizing a derivative-field extraction:
/// the field d^sigma(u) of a source polynomial, expressed in a target basis.
#[derive(Debug)]
pub struct ExtractionMap {
    /// (src coefficient, dst coefficient, factor).
    pub entries: Vec<(u32, u32, f64)>,
}

/// Build the map taking the sigma-derivative field of a `src`-basis polynomial
/// into `dst`-basis Taylor coefficients: dst_rho = src_{sigma+rho} * (sigma+rho)!/rho!.
pub fn extraction_map(src: &Basis, sigma: &Signature, dst: &Basis) -> Result<ExtractionMap> {
    let mut entries = Vec::with_capacity(dst.len());
    for d in 0..dst.len() {
        let rho = dst.signature_of(d);
        let combined = sigma.add(&rho);
        let s = src.mono_index(&combined).ok_or_else(|| {
            CoreError::InvalidProblem(format!(
                "source basis lacks monomial {} needed to extract {}",
                combined, sigma
            ))
        })?;
        let factor = combined.factorial() / rho.factorial();
        entries.push((s as u32, d as u32, factor));
    }
    Ok(ExtractionMap { entries })
}
