//! Per-point tape of truncated-Taylor-polynomial operations.
//!
//! The forward pass propagates multivariate Taylor coefficients (the input
//! derivatives) through the network and any residual arithmetic; every
//! operation is recorded so a reverse sweep can accumulate exact gradients
//! with respect to the trainable weights, including flows through
//! input-derivative terms.
//!
//! Evaluation happens at emission time: building the tape *is* the forward
//! pass. `backward` replays the nodes in reverse, pushing coefficient
//! adjoints through the transposed operations and depositing weight/bias
//! gradients into a flat accumulator aligned with `Network::to_flat`.

use std::sync::Arc;

use crate::autodiff::basis::{Basis, ExtractionMap};
use crate::autodiff::scalar_fn::ScalarFn;
use crate::error::{CoreError, Result};
use crate::network::{Network, Wrapper};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PolyId(u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisId(u16);

#[derive(Clone, Copy)]
struct PolyMeta {
    basis: u16,
    off: u32,
    len: u32,
}

enum Node {
    /// Constant with respect to the weights; no adjoint flow.
    Leaf,
    Weight { flat: u32, out: u32 },
    Add { a: u32, b: u32, out: u32 },
    Sub { a: u32, b: u32, out: u32 },
    Mul { a: u32, b: u32, out: u32 },
    Neg { a: u32, out: u32 },
    Scale { a: u32, c: f64, out: u32 },
    /// out = a + c on the constant coefficient.
    Shift { a: u32, out: u32 },
    Compose { src: u32, ut: u32, p2: u32, p3: u32, out: u32, d: [f64; 5] },
    Extract { src: u32, out: u32, map: u32 },
    /// One hidden layer: affine rows followed by activation composition.
    /// Polys z, ut, p2, p3, a live in five contiguous blocks of `width`.
    NetLayer {
        layer: u16,
        in0: u32,
        in_count: u32,
        z0: u32,
        ut0: u32,
        p20: u32,
        p30: u32,
        a0: u32,
        d0: u32,
    },
    /// Final affine (linear) layer.
    NetOut { layer: u16, in0: u32, in_count: u32, out0: u32 },
}

pub struct TapeCtx<'a> {
    net: &'a Network,
    bases: Vec<Arc<Basis>>,
    polys: Vec<PolyMeta>,
    data: Vec<f64>,
    adj: Vec<f64>,
    nodes: Vec<Node>,
    derivs: Vec<f64>,
    maps: Vec<Arc<ExtractionMap>>,
    /// Flat offset of each layer's weight block.
    layer_off: Vec<usize>,
    scratch: Vec<f64>,
    scratch2: Vec<f64>,
}

impl<'a> TapeCtx<'a> {
    pub fn new(net: &'a Network) -> Self {
        let mut layer_off = Vec::with_capacity(net.layers.len());
        let mut off = 0;
        for l in &net.layers {
            layer_off.push(off);
            off += l.w.len() + l.b.len();
        }
        TapeCtx {
            net,
            bases: Vec::new(),
            polys: Vec::new(),
            data: Vec::new(),
            adj: Vec::new(),
            nodes: Vec::new(),
            derivs: Vec::new(),
            maps: Vec::new(),
            layer_off,
            scratch: Vec::new(),
            scratch2: Vec::new(),
        }
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }

    /// Register a basis; ids are stable across `reset`.
    pub fn register_basis(&mut self, basis: Arc<Basis>) -> BasisId {
        for (i, b) in self.bases.iter().enumerate() {
            if Arc::ptr_eq(b, &basis) {
                return BasisId(i as u16);
            }
        }
        self.bases.push(basis);
        BasisId((self.bases.len() - 1) as u16)
    }

    pub fn basis(&self, id: BasisId) -> &Arc<Basis> {
        &self.bases[id.0 as usize]
    }

    /// Drop all per-point state, keeping registered bases and capacity.
    pub fn reset(&mut self) {
        self.polys.clear();
        self.data.clear();
        self.nodes.clear();
        self.derivs.clear();
        self.maps.clear();
    }

    fn alloc(&mut self, basis: BasisId) -> u32 {
        let len = self.bases[basis.0 as usize].len() as u32;
        let off = self.data.len() as u32;
        self.data.resize(self.data.len() + len as usize, 0.0);
        self.polys.push(PolyMeta { basis: basis.0, off, len });
        (self.polys.len() - 1) as u32
    }

    pub fn coeff_value(&self, p: PolyId, coeff: usize) -> f64 {
        let m = self.polys[p.0 as usize];
        debug_assert!(coeff < m.len as usize);
        self.data[m.off as usize + coeff]
    }

    pub fn poly_basis(&self, p: PolyId) -> BasisId {
        BasisId(self.polys[p.0 as usize].basis)
    }

    fn same_basis(&self, a: u32, b: u32) -> u16 {
        let ba = self.polys[a as usize].basis;
        debug_assert_eq!(ba, self.polys[b as usize].basis, "basis mismatch in tape op");
        ba
    }

    // ---- emission API (computes immediately, records for backward) ----

    pub fn constant(&mut self, basis: BasisId, value: f64) -> PolyId {
        let out = self.alloc(basis);
        let off = self.polys[out as usize].off as usize;
        self.data[off] = value;
        self.nodes.push(Node::Leaf);
        PolyId(out)
    }

    /// Field of the raw coordinate at `slot`: value plus a unit first-order
    /// coefficient when the basis carries that direction.
    pub fn input_field(&mut self, basis: BasisId, slot: usize, value: f64) -> PolyId {
        self.seed(basis, slot, value, 1.0)
    }

    fn seed(&mut self, basis: BasisId, slot: usize, value: f64, dcoeff: f64) -> PolyId {
        let dir = self.bases[basis.0 as usize].direction_index(slot);
        let out = self.alloc(basis);
        let off = self.polys[out as usize].off as usize;
        self.data[off] = value;
        if let Some(d) = dir {
            self.data[off + d] = dcoeff;
        }
        self.nodes.push(Node::Leaf);
        PolyId(out)
    }

    /// A single trainable weight (by flat index) as a constant-coefficient
    /// polynomial that participates in the weight gradient.
    pub fn weight(&mut self, basis: BasisId, flat: usize) -> PolyId {
        let net = self.net;
        let mut remaining = flat;
        let mut value = f64::NAN;
        for l in &net.layers {
            if remaining < l.w.len() {
                value = l.w[remaining];
                break;
            }
            remaining -= l.w.len();
            if remaining < l.b.len() {
                value = l.b[remaining];
                break;
            }
            remaining -= l.b.len();
        }
        let out = self.alloc(basis);
        let off = self.polys[out as usize].off as usize;
        self.data[off] = value;
        self.nodes.push(Node::Weight { flat: flat as u32, out });
        PolyId(out)
    }

    pub fn add(&mut self, a: PolyId, b: PolyId) -> PolyId {
        let bid = self.same_basis(a.0, b.0);
        let out = self.alloc(BasisId(bid));
        let (ao, bo, oo, n) = self.meta3(a.0, b.0, out);
        let (head, tail) = self.data.split_at_mut(oo);
        for i in 0..n {
            tail[i] = head[ao + i] + head[bo + i];
        }
        self.nodes.push(Node::Add { a: a.0, b: b.0, out });
        PolyId(out)
    }

    pub fn sub(&mut self, a: PolyId, b: PolyId) -> PolyId {
        let bid = self.same_basis(a.0, b.0);
        let out = self.alloc(BasisId(bid));
        let (ao, bo, oo, n) = self.meta3(a.0, b.0, out);
        let (head, tail) = self.data.split_at_mut(oo);
        for i in 0..n {
            tail[i] = head[ao + i] - head[bo + i];
        }
        self.nodes.push(Node::Sub { a: a.0, b: b.0, out });
        PolyId(out)
    }

    pub fn mul(&mut self, a: PolyId, b: PolyId) -> PolyId {
        let bid = self.same_basis(a.0, b.0);
        let out = self.alloc(BasisId(bid));
        let basis = self.bases[bid as usize].clone();
        let (ao, bo, oo, n) = self.meta3(a.0, b.0, out);
        let (head, tail) = self.data.split_at_mut(oo);
        basis.mul(&head[ao..ao + n], &head[bo..bo + n], &mut tail[..n]);
        self.nodes.push(Node::Mul { a: a.0, b: b.0, out });
        PolyId(out)
    }

    pub fn neg(&mut self, a: PolyId) -> PolyId {
        let out = self.alloc(BasisId(self.polys[a.0 as usize].basis));
        let (ao, oo, n) = self.meta2(a.0, out);
        let (head, tail) = self.data.split_at_mut(oo);
        for i in 0..n {
            tail[i] = -head[ao + i];
        }
        self.nodes.push(Node::Neg { a: a.0, out });
        PolyId(out)
    }

    pub fn scale(&mut self, a: PolyId, c: f64) -> PolyId {
        let out = self.alloc(BasisId(self.polys[a.0 as usize].basis));
        let (ao, oo, n) = self.meta2(a.0, out);
        let (head, tail) = self.data.split_at_mut(oo);
        for i in 0..n {
            tail[i] = c * head[ao + i];
        }
        self.nodes.push(Node::Scale { a: a.0, c, out });
        PolyId(out)
    }

    /// out = a + c (constant coefficient only).
    pub fn shift(&mut self, a: PolyId, c: f64) -> PolyId {
        let out = self.alloc(BasisId(self.polys[a.0 as usize].basis));
        let (ao, oo, n) = self.meta2(a.0, out);
        let (head, tail) = self.data.split_at_mut(oo);
        for i in 0..n {
            tail[i] = head[ao + i];
        }
        tail[0] += c;
        self.nodes.push(Node::Shift { a: a.0, out });
        PolyId(out)
    }

    /// Composition out = f(src) through the truncated algebra.
    pub fn compose(&mut self, f: ScalarFn, src: PolyId) -> PolyId {
        let bid = BasisId(self.polys[src.0 as usize].basis);
        let ut = self.alloc(bid);
        let p2 = self.alloc(bid);
        let p3 = self.alloc(bid);
        let out = self.alloc(bid);
        let basis = self.bases[bid.0 as usize].clone();
        let so = self.polys[src.0 as usize].off as usize;
        let z0 = self.data[so];
        let d = f.derivs(z0);
        self.compose_blocks(&basis, so, ut, p2, p3, out, &d);
        self.nodes.push(Node::Compose { src: src.0, ut, p2, p3, out, d });
        PolyId(out)
    }

    fn compose_blocks(
        &mut self,
        basis: &Basis,
        src_off: usize,
        ut: u32,
        p2: u32,
        p3: u32,
        out: u32,
        d: &[f64; 5],
    ) {
        let n = basis.len();
        let uto = self.polys[ut as usize].off as usize;
        let p2o = self.polys[p2 as usize].off as usize;
        let p3o = self.polys[p3 as usize].off as usize;
        let oo = self.polys[out as usize].off as usize;
        // ut = src with the constant coefficient removed.
        {
            let (head, tail) = self.data.split_at_mut(uto);
            tail[..n].copy_from_slice(&head[src_off..src_off + n]);
            tail[0] = 0.0;
        }
        {
            let (head, tail) = self.data.split_at_mut(p2o);
            let u = &head[uto..uto + n];
            basis.mul(u, u, &mut tail[..n]);
        }
        {
            let (head, tail) = self.data.split_at_mut(p3o);
            basis.mul(&head[p2o..p2o + n], &head[uto..uto + n], &mut tail[..n]);
        }
        {
            let c1 = d[1];
            let c2 = d[2] / 2.0;
            let c3 = d[3] / 6.0;
            let (head, tail) = self.data.split_at_mut(oo);
            for i in 0..n {
                tail[i] = c1 * head[uto + i] + c2 * head[p2o + i] + c3 * head[p3o + i];
            }
            tail[0] = d[0];
        }
    }

    /// Derivative-field extraction between bases via a precompiled map.
    pub fn extract(&mut self, src: PolyId, map: &Arc<ExtractionMap>, dst_basis: BasisId) -> PolyId {
        let out = self.alloc(dst_basis);
        let so = self.polys[src.0 as usize].off as usize;
        let oo = self.polys[out as usize].off as usize;
        let (head, tail) = self.data.split_at_mut(oo);
        for &(s, dd, f) in &map.entries {
            tail[dd as usize] += f * head[so + s as usize];
        }
        self.maps.push(map.clone());
        self.nodes.push(Node::Extract {
            src: src.0,
            out,
            map: (self.maps.len() - 1) as u32,
        });
        PolyId(out)
    }

    /// Taylor-forward pass through the whole network (trunk plus wrapper).
    /// Returns one polynomial per output.
    pub fn emit_network(&mut self, basis: BasisId, coords: &[f64]) -> Result<Vec<PolyId>> {
        let net = self.net;
        let layout = &net.spec.input_layout;
        if coords.len() != layout.arity() {
            return Err(CoreError::DimensionMismatch {
                expected: layout.arity(),
                got: coords.len(),
            });
        }
        // Scaled seeds: the trunk consumes raw*scale, so the first-order
        // coefficient with respect to the raw coordinate is the scale.
        let in0 = self.polys.len() as u32;
        for (slot, s) in layout.slots.iter().enumerate() {
            self.seed(basis, slot, coords[slot] * s.scale, s.scale);
        }
        let mut cur0 = in0;
        let mut cur_count = layout.arity() as u32;
        let n_layers = net.layers.len();
        for li in 0..n_layers {
            let rows = net.layers[li].rows;
            if li + 1 == n_layers {
                let out0 = self.polys.len() as u32;
                for _ in 0..rows {
                    self.alloc(basis);
                }
                self.affine_forward(li, cur0, cur_count, out0);
                self.nodes.push(Node::NetOut {
                    layer: li as u16,
                    in0: cur0,
                    in_count: cur_count,
                    out0,
                });
                cur0 = out0;
                cur_count = rows as u32;
            } else {
                let w = rows;
                let z0 = self.polys.len() as u32;
                for _ in 0..5 * w {
                    self.alloc(basis);
                }
                let ut0 = z0 + w as u32;
                let p20 = ut0 + w as u32;
                let p30 = p20 + w as u32;
                let a0 = p30 + w as u32;
                self.affine_forward(li, cur0, cur_count, z0);
                let d0 = self.derivs.len() as u32;
                let b = self.bases[basis.0 as usize].clone();
                for j in 0..w {
                    let zo = self.polys[(z0 + j as u32) as usize].off as usize;
                    let d = ScalarFn::Tanh.derivs(self.data[zo]);
                    self.derivs.extend_from_slice(&d);
                    self.compose_blocks(
                        &b,
                        zo,
                        ut0 + j as u32,
                        p20 + j as u32,
                        p30 + j as u32,
                        a0 + j as u32,
                        &d,
                    );
                }
                self.nodes.push(Node::NetLayer {
                    layer: li as u16,
                    in0: cur0,
                    in_count: cur_count,
                    z0,
                    ut0,
                    p20,
                    p30,
                    a0,
                    d0,
                });
                cur0 = a0;
                cur_count = w as u32;
            }
        }
        let trunk: Vec<PolyId> = (0..cur_count).map(|j| PolyId(cur0 + j)).collect();
        self.apply_wrapper(basis, coords, trunk)
    }

    fn affine_forward(&mut self, li: usize, in0: u32, in_count: u32, out0: u32) {
        let net = self.net;
        let layer = &net.layers[li];
        let n = self.polys[out0 as usize].len as usize;
        for r in 0..layer.rows {
            let oo = self.polys[(out0 + r as u32) as usize].off as usize;
            let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
            let (head, tail) = self.data.split_at_mut(oo);
            let out = &mut tail[..n];
            out.fill(0.0);
            for i in 0..in_count as usize {
                let ao = self.polys[(in0 + i as u32) as usize].off as usize;
                let w = row[i];
                let a = &head[ao..ao + n];
                for k in 0..n {
                    out[k] += w * a[k];
                }
            }
            out[0] += layer.b[r];
        }
    }

    fn apply_wrapper(
        &mut self,
        basis: BasisId,
        coords: &[f64],
        trunk: Vec<PolyId>,
    ) -> Result<Vec<PolyId>> {
        let wrapper = self.net.wrapper;
        Ok(match wrapper {
            None => trunk,
            Some(Wrapper::UnitSquareZero) => {
                let net = self.net;
                let layout = &net.spec.input_layout;
                let sx = layout.space_slot(0).ok_or_else(|| {
                    CoreError::InvalidNetworkSpec("unit-square wrapper needs an x slot".into())
                })?;
                let sy = layout.space_slot(1).ok_or_else(|| {
                    CoreError::InvalidNetworkSpec("unit-square wrapper needs a y slot".into())
                })?;
                let xf = self.input_field(basis, sx, coords[sx]);
                let yf = self.input_field(basis, sy, coords[sy]);
                let xm = self.shift(xf, -1.0);
                let ym = self.shift(yf, -1.0);
                // Group per axis so truncated products stay exact.
                let ax = self.mul(xf, xm);
                let ay = self.mul(yf, ym);
                let env = self.mul(ax, ay);
                trunk.into_iter().map(|u| self.mul(env, u)).collect()
            }
            Some(Wrapper::ManufacturedAdvDiff) => {
                let xf = self.input_field(basis, 0, coords[0]);
                let ef = self.input_field(basis, 1, coords[1]);
                let inv_eps = self.compose(ScalarFn::Recip, ef);
                let em = self.compose(ScalarFn::Expm1, inv_eps);
                let b = self.compose(ScalarFn::Recip, em);
                let xr = self.mul(xf, inv_eps);
                let ex = self.compose(ScalarFn::Exp, xr);
                let bex = self.mul(b, ex);
                let nb = self.neg(b);
                let t1 = self.add(xf, nb);
                let t2 = self.shift(t1, 1.0);
                vec![self.add(t2, bex)]
            }
            Some(Wrapper::ManufacturedTwoPhaseSteady) => {
                let xf = self.input_field(basis, 0, coords[0]);
                let nx = self.neg(xf);
                let p = self.shift(nx, 1.0);
                let c = self.constant(basis, 1.0);
                vec![p, c]
            }
        })
    }

    /// Reverse sweep. `seeds` assigns adjoints to individual coefficients;
    /// weight/bias gradients accumulate into `grad` (flat network ordering).
    pub fn backward(&mut self, seeds: &[(PolyId, usize, f64)], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.net.weight_count());
        self.adj.clear();
        self.adj.resize(self.data.len(), 0.0);
        for &(p, coeff, v) in seeds {
            let m = self.polys[p.0 as usize];
            self.adj[m.off as usize + coeff] += v;
        }
        for ni in (0..self.nodes.len()).rev() {
            match self.nodes[ni] {
                Node::Leaf => {}
                Node::Weight { flat, out } => {
                    let oo = self.polys[out as usize].off as usize;
                    grad[flat as usize] += self.adj[oo];
                }
                Node::Add { a, b, out } => {
                    let (ao, bo, oo, n) = self.meta3(a, b, out);
                    for i in 0..n {
                        let h = self.adj[oo + i];
                        self.adj[ao + i] += h;
                        self.adj[bo + i] += h;
                    }
                }
                Node::Sub { a, b, out } => {
                    let (ao, bo, oo, n) = self.meta3(a, b, out);
                    for i in 0..n {
                        let h = self.adj[oo + i];
                        self.adj[ao + i] += h;
                        self.adj[bo + i] -= h;
                    }
                }
                Node::Mul { a, b, out } => {
                    let (ao, bo, oo, n) = self.meta3(a, b, out);
                    let basis = self.bases[self.polys[a as usize].basis as usize].clone();
                    self.scratch.resize(n, 0.0);
                    self.scratch.fill(0.0);
                    self.scratch2.resize(n, 0.0);
                    self.scratch2.fill(0.0);
                    basis.mul_adjoint(
                        &self.adj[oo..oo + n],
                        &self.data[ao..ao + n],
                        &self.data[bo..bo + n],
                        &mut self.scratch,
                        &mut self.scratch2,
                    );
                    for i in 0..n {
                        self.adj[ao + i] += self.scratch[i];
                        self.adj[bo + i] += self.scratch2[i];
                    }
                }
                Node::Neg { a, out } => {
                    let (ao, oo, n) = self.meta2(a, out);
                    for i in 0..n {
                        self.adj[ao + i] -= self.adj[oo + i];
                    }
                }
                Node::Scale { a, c, out } => {
                    let (ao, oo, n) = self.meta2(a, out);
                    for i in 0..n {
                        self.adj[ao + i] += c * self.adj[oo + i];
                    }
                }
                Node::Shift { a, out } => {
                    let (ao, oo, n) = self.meta2(a, out);
                    for i in 0..n {
                        self.adj[ao + i] += self.adj[oo + i];
                    }
                }
                Node::Compose { src, ut, p2, p3, out, d } => {
                    self.compose_backward(src, ut, p2, p3, out, &d);
                }
                Node::Extract { src, out, map } => {
                    let so = self.polys[src as usize].off as usize;
                    let oo = self.polys[out as usize].off as usize;
                    let map = self.maps[map as usize].clone();
                    for &(s, dd, f) in &map.entries {
                        self.adj[so + s as usize] += f * self.adj[oo + dd as usize];
                    }
                }
                Node::NetLayer { layer, in0, in_count, z0, ut0, p20, p30, a0, d0 } => {
                    let w = self.net.layers[layer as usize].rows;
                    for j in 0..w {
                        let d: [f64; 5] = self.derivs
                            [(d0 as usize + 5 * j)..(d0 as usize + 5 * j + 5)]
                            .try_into()
                            .unwrap();
                        self.compose_backward(
                            z0 + j as u32,
                            ut0 + j as u32,
                            p20 + j as u32,
                            p30 + j as u32,
                            a0 + j as u32,
                            &d,
                        );
                    }
                    self.affine_backward(layer as usize, in0, in_count, z0, grad);
                }
                Node::NetOut { layer, in0, in_count, out0 } => {
                    self.affine_backward(layer as usize, in0, in_count, out0, grad);
                }
            }
        }
    }

    fn meta2(&self, a: u32, out: u32) -> (usize, usize, usize) {
        let ma = self.polys[a as usize];
        let mo = self.polys[out as usize];
        (ma.off as usize, mo.off as usize, mo.len as usize)
    }

    fn meta3(&self, a: u32, b: u32, out: u32) -> (usize, usize, usize, usize) {
        let ma = self.polys[a as usize];
        let mb = self.polys[b as usize];
        let mo = self.polys[out as usize];
        (ma.off as usize, mb.off as usize, mo.off as usize, mo.len as usize)
    }

    /// Adjoint of out = sum_k (d_k/k!) ut^k. The source picks up the
    /// transposed multiplication by g = d1 + d2*ut + (d3/2)*ut^2 on its
    /// non-constant coefficients, plus the chain through the expansion
    /// coefficients' dependence on the source value (which needs d4).
    fn compose_backward(&mut self, src: u32, ut: u32, p2: u32, p3: u32, out: u32, d: &[f64; 5]) {
        let n = self.polys[out as usize].len as usize;
        let so = self.polys[src as usize].off as usize;
        let uto = self.polys[ut as usize].off as usize;
        let p2o = self.polys[p2 as usize].off as usize;
        let p3o = self.polys[p3 as usize].off as usize;
        let oo = self.polys[out as usize].off as usize;
        let basis = self.bases[self.polys[out as usize].basis as usize].clone();

        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for i in 0..n {
            let h = self.adj[oo + i];
            s1 += h * self.data[uto + i];
            s2 += h * self.data[p2o + i];
            s3 += h * self.data[p3o + i];
        }
        let s0 = self.adj[oo];
        // d/dz0 of the expansion coefficients.
        self.adj[so] += d[1] * s0 + d[2] * s1 + (d[3] / 2.0) * s2 + (d[4] / 6.0) * s3;

        // g = c1 + 2 c2 ut + 3 c3 ut^2.
        self.scratch.resize(n, 0.0);
        for i in 0..n {
            self.scratch[i] = d[2] * self.data[uto + i] + (d[3] / 2.0) * self.data[p2o + i];
        }
        self.scratch[0] += d[1];
        self.scratch2.resize(n, 0.0);
        self.scratch2.fill(0.0);
        basis.mul_adjoint_left(&self.adj[oo..oo + n], &self.scratch, &mut self.scratch2);
        for i in 1..n {
            self.adj[so + i] += self.scratch2[i];
        }
    }

    fn affine_backward(&mut self, li: usize, in0: u32, in_count: u32, z0: u32, grad: &mut [f64]) {
        let net = self.net;
        let layer = &net.layers[li];
        let n = self.polys[z0 as usize].len as usize;
        let goff = self.layer_off[li];
        let boff = goff + layer.w.len();
        for r in 0..layer.rows {
            let zo = self.polys[(z0 + r as u32) as usize].off as usize;
            grad[boff + r] += self.adj[zo];
            let row = &layer.w[r * layer.cols..(r + 1) * layer.cols];
            for i in 0..in_count as usize {
                let ao = self.polys[(in0 + i as u32) as usize].off as usize;
                let w = row[i];
                let mut dotv = 0.0;
                for k in 0..n {
                    let zb = self.adj[zo + k];
                    dotv += zb * self.data[ao + k];
                    self.adj[ao + k] += w * zb;
                }
                grad[goff + r * layer.cols + i] += dotv;
            }
        }
    }
}
