//! Definitions of the four benchmark problems and their residual programs.

use crate::autodiff::{PolyId, ScalarFn, Signature};
use crate::error::{CoreError, Result};
use crate::network::{InputLayout, InputSlot, SlotKind, Wrapper};
use crate::problems::{
    BoundaryKind, BoundaryOp, BoundarySpec, Domain, FieldCtx, InitialSpec, ParamDef, ParamVector,
    ProblemKind, ProblemSpec, Region,
};

/// Steady 1D advection-diffusion: eps*u_xx - u_x + 1 = 0 on [0, 1] with
/// u(0) = 1, u(1) = 3 and one sensitivity parameter eps (nominal 0.1).
pub fn make_adv_diff() -> ProblemSpec {
    let layout = InputLayout::new(vec![
        InputSlot { name: "x".into(), kind: SlotKind::Space(0), scale: 1.0 },
        InputSlot { name: "eps".into(), kind: SlotKind::Param(0), scale: 1.0 },
    ]);
    ProblemSpec {
        name: "adv_diff".into(),
        kind: ProblemKind::AdvDiff,
        spatial_dim: 1,
        time_dependent: false,
        domain: Domain { bounds: vec![(0.0, 1.0)], t_max: None },
        params: ParamVector {
            defs: vec![ParamDef {
                name: "eps".into(),
                nominal: 0.1,
                sensitive: true,
                sweep: Some((0.07, 0.13)),
            }],
        },
        output_dim: 1,
        boundary_specs: vec![
            BoundarySpec {
                name: "left".into(),
                kind: BoundaryKind::Dirichlet,
                output: 0,
                op: BoundaryOp::Value,
                target: 1.0,
                region: Region { fixed: vec![(0, 0.0)], free: vec![] },
            },
            BoundarySpec {
                name: "right".into(),
                kind: BoundaryKind::Dirichlet,
                output: 0,
                op: BoundaryOp::Value,
                target: 3.0,
                region: Region { fixed: vec![(0, 1.0)], free: vec![] },
            },
        ],
        initial_specs: vec![],
        layout,
        wrapper: None,
        corner_margin: 0.0,
    }
}

/// 2D Poisson with nine equal subdomain diffusivities: k*lap(u) = -1 on the
/// unit square, u = 0 on the boundary enforced by the output wrapper.
pub fn make_poisson9() -> ProblemSpec {
    let mut slots = vec![
        InputSlot { name: "x".into(), kind: SlotKind::Space(0), scale: 1.0 },
        InputSlot { name: "y".into(), kind: SlotKind::Space(1), scale: 1.0 },
    ];
    let mut defs = Vec::new();
    for i in 0..9 {
        let name = format!("k{}", i + 1);
        slots.push(InputSlot { name: name.clone(), kind: SlotKind::Param(i), scale: 1.0 });
        defs.push(ParamDef { name, nominal: 1.0, sensitive: true, sweep: Some((0.7, 1.3)) });
    }
    ProblemSpec {
        name: "poisson9".into(),
        kind: ProblemKind::Poisson9,
        spatial_dim: 2,
        time_dependent: false,
        domain: Domain { bounds: vec![(0.0, 1.0), (0.0, 1.0)], t_max: None },
        params: ParamVector { defs },
        output_dim: 1,
        boundary_specs: vec![BoundarySpec {
            name: "boundary".into(),
            kind: BoundaryKind::HardConstraint,
            output: 0,
            op: BoundaryOp::Value,
            target: 0.0,
            region: Region { fixed: vec![], free: vec![] },
        }],
        initial_specs: vec![],
        layout: InputLayout::new(slots),
        wrapper: Some(Wrapper::UnitSquareZero),
        corner_margin: 0.0,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TwoPhase1dOptions {
    pub t_max: f64,
    pub corner_margin: f64,
}

impl Default for TwoPhase1dOptions {
    fn default() -> Self {
        // Sharp-interface fill of the whole unit domain at nominal values
        // arrives at t = 0.5; the margin keeps samples off the conflicting
        // c(0,0) corner.
        TwoPhase1dOptions { t_max: 0.5, corner_margin: 0.01 }
    }
}

/// 1D transient two-phase Darcy flow with VOF front tracking. Outputs are
/// (p, c); the sensitivity parameter is the permeability k (nominal 1).
pub fn make_twophase1d() -> ProblemSpec {
    make_twophase1d_with(TwoPhase1dOptions::default())
}

pub fn make_twophase1d_with(opts: TwoPhase1dOptions) -> ProblemSpec {
    let layout = InputLayout::new(vec![
        InputSlot { name: "x".into(), kind: SlotKind::Space(0), scale: 1.0 },
        InputSlot { name: "t".into(), kind: SlotKind::Time, scale: 1.0 },
        InputSlot { name: "k".into(), kind: SlotKind::Param(0), scale: 1.0 },
    ]);
    let t_max = opts.t_max;
    let dl = opts.corner_margin;
    let params = ParamVector {
        defs: vec![
            ParamDef { name: "k".into(), nominal: 1.0, sensitive: true, sweep: Some((0.5, 2.0)) },
            ParamDef { name: "mu1".into(), nominal: 1e-5, sensitive: false, sweep: None },
            ParamDef { name: "mu2".into(), nominal: 1.0, sensitive: false, sweep: None },
            ParamDef { name: "p_in".into(), nominal: 1.0, sensitive: false, sweep: None },
            ParamDef { name: "p_out".into(), nominal: 0.0, sensitive: false, sweep: None },
            ParamDef { name: "l".into(), nominal: 1.0, sensitive: false, sweep: None },
            ParamDef { name: "phi".into(), nominal: 1.0, sensitive: false, sweep: None },
        ],
    };
    ProblemSpec {
        name: "twophase1d".into(),
        kind: ProblemKind::TwoPhase1d,
        spatial_dim: 1,
        time_dependent: true,
        domain: Domain { bounds: vec![(0.0, 1.0)], t_max: Some(t_max) },
        params,
        output_dim: 2,
        boundary_specs: vec![
            BoundarySpec {
                name: "p_inlet".into(),
                kind: BoundaryKind::Dirichlet,
                output: 0,
                op: BoundaryOp::Value,
                target: 1.0,
                region: Region { fixed: vec![(0, 0.0)], free: vec![(1, 0.0, t_max)] },
            },
            BoundarySpec {
                name: "p_outlet".into(),
                kind: BoundaryKind::Dirichlet,
                output: 0,
                op: BoundaryOp::Value,
                target: 0.0,
                region: Region { fixed: vec![(0, 1.0)], free: vec![(1, 0.0, t_max)] },
            },
            BoundarySpec {
                name: "c_inlet".into(),
                kind: BoundaryKind::Dirichlet,
                output: 1,
                op: BoundaryOp::Value,
                target: 1.0,
                region: Region { fixed: vec![(0, 0.0)], free: vec![(1, dl, t_max)] },
            },
        ],
        initial_specs: vec![InitialSpec {
            output: 1,
            value: 0.0,
            region: Region { fixed: vec![(1, 0.0)], free: vec![(0, dl, 1.0)] },
        }],
        layout,
        wrapper: None,
        corner_margin: dl,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TwoPhase2dOptions {
    pub t_max: f64,
    pub corner_margin: f64,
    pub strip_height: f64,
    pub inlet_extent: f64,
    pub v_in: f64,
}

impl Default for TwoPhase2dOptions {
    fn default() -> Self {
        TwoPhase2dOptions {
            t_max: 1.0,
            corner_margin: 0.01,
            strip_height: 0.05,
            inlet_extent: 0.25,
            v_in: 1.0,
        }
    }
}

/// 2D race-tracking mold fill: unit-square mold, velocity inlet on the lower
/// part of the left wall, pressure outlet on the right wall, impermeable
/// walls elsewhere, and a high-permeability strip along the bottom. The
/// sensitivity parameter is the permeability ratio k (nominal 100, fed to
/// the trunk as k/100).
pub fn make_twophase2d() -> ProblemSpec {
    make_twophase2d_with(TwoPhase2dOptions::default())
}

pub fn make_twophase2d_with(opts: TwoPhase2dOptions) -> ProblemSpec {
    let layout = InputLayout::new(vec![
        InputSlot { name: "x".into(), kind: SlotKind::Space(0), scale: 1.0 },
        InputSlot { name: "y".into(), kind: SlotKind::Space(1), scale: 1.0 },
        InputSlot { name: "t".into(), kind: SlotKind::Time, scale: 1.0 },
        InputSlot { name: "k".into(), kind: SlotKind::Param(0), scale: 0.01 },
    ]);
    let t_max = opts.t_max;
    let dl = opts.corner_margin;
    let params = ParamVector {
        defs: vec![
            ParamDef { name: "k".into(), nominal: 100.0, sensitive: true, sweep: Some((80.0, 120.0)) },
            ParamDef { name: "mu1".into(), nominal: 1e-5, sensitive: false, sweep: None },
            ParamDef { name: "mu2".into(), nominal: 1.0, sensitive: false, sweep: None },
            ParamDef { name: "p_out".into(), nominal: 0.0, sensitive: false, sweep: None },
            ParamDef { name: "phi".into(), nominal: 1.0, sensitive: false, sweep: None },
            ParamDef { name: "v_in".into(), nominal: opts.v_in, sensitive: false, sweep: None },
            ParamDef { name: "strip_height".into(), nominal: opts.strip_height, sensitive: false, sweep: None },
            ParamDef { name: "inlet_extent".into(), nominal: opts.inlet_extent, sensitive: false, sweep: None },
        ],
    };
    let (sx, sy, st) = (0usize, 1usize, 2usize);
    ProblemSpec {
        name: "twophase2d".into(),
        kind: ProblemKind::TwoPhase2d,
        spatial_dim: 2,
        time_dependent: true,
        domain: Domain { bounds: vec![(0.0, 1.0), (0.0, 1.0)], t_max: Some(t_max) },
        params,
        output_dim: 2,
        boundary_specs: vec![
            BoundarySpec {
                name: "outlet".into(),
                kind: BoundaryKind::Dirichlet,
                output: 0,
                op: BoundaryOp::Value,
                target: 0.0,
                region: Region {
                    fixed: vec![(sx, 1.0)],
                    free: vec![(sy, 0.0, 1.0), (st, 0.0, t_max)],
                },
            },
            BoundarySpec {
                name: "inlet_flux".into(),
                kind: BoundaryKind::Neumann,
                output: 0,
                op: BoundaryOp::DarcyVelocity { axis: 0, sign: 1.0 },
                target: opts.v_in,
                region: Region {
                    fixed: vec![(sx, 0.0)],
                    free: vec![(sy, 0.0, opts.inlet_extent), (st, 0.0, t_max)],
                },
            },
            BoundarySpec {
                name: "left_wall".into(),
                kind: BoundaryKind::Neumann,
                output: 0,
                op: BoundaryOp::NormalGradient { axis: 0, sign: 1.0 },
                target: 0.0,
                region: Region {
                    fixed: vec![(sx, 0.0)],
                    free: vec![(sy, opts.inlet_extent, 1.0), (st, 0.0, t_max)],
                },
            },
            BoundarySpec {
                name: "bottom_wall".into(),
                kind: BoundaryKind::Neumann,
                output: 0,
                op: BoundaryOp::NormalGradient { axis: 1, sign: 1.0 },
                target: 0.0,
                region: Region {
                    fixed: vec![(sy, 0.0)],
                    free: vec![(sx, 0.0, 1.0), (st, 0.0, t_max)],
                },
            },
            BoundarySpec {
                name: "top_wall".into(),
                kind: BoundaryKind::Neumann,
                output: 0,
                op: BoundaryOp::NormalGradient { axis: 1, sign: 1.0 },
                target: 0.0,
                region: Region {
                    fixed: vec![(sy, 1.0)],
                    free: vec![(sx, 0.0, 1.0), (st, 0.0, t_max)],
                },
            },
            BoundarySpec {
                name: "c_inlet".into(),
                kind: BoundaryKind::Dirichlet,
                output: 1,
                op: BoundaryOp::Value,
                target: 1.0,
                region: Region {
                    fixed: vec![(sx, 0.0)],
                    free: vec![(sy, 0.0, opts.inlet_extent), (st, dl, t_max)],
                },
            },
        ],
        initial_specs: vec![InitialSpec {
            output: 1,
            value: 0.0,
            region: Region {
                fixed: vec![(st, 0.0)],
                free: vec![(sx, dl, 1.0), (sy, 0.0, 1.0)],
            },
        }],
        layout,
        wrapper: None,
        corner_margin: dl,
    }
}

/// Subdomain index (0-based into k1..k9) for the nine-cell Poisson problem:
/// row-major from the top-left cell.
pub fn poisson9_cell(x: f64, y: f64) -> usize {
    let col = if x < 1.0 / 3.0 {
        0
    } else if x < 2.0 / 3.0 {
        1
    } else {
        2
    };
    let row = if y >= 2.0 / 3.0 {
        0
    } else if y >= 1.0 / 3.0 {
        1
    } else {
        2
    };
    3 * row + col
}

impl ProblemSpec {
    /// Union of the non-zero derivative signatures the interior residuals and
    /// boundary operators extract from the network outputs.
    pub fn jet_requirements(&self) -> Result<Vec<Signature>> {
        let a = self.layout.arity();
        let sx = self.layout.space_slot(0);
        let sy = self.layout.space_slot(1);
        let st = self.layout.time_slot();
        let mut sigs = Vec::new();
        let push = |pairs: &[(usize, u8)], sigs: &mut Vec<Signature>| -> Result<()> {
            let s = Signature::from_pairs(a, pairs)?;
            if !sigs.contains(&s) {
                sigs.push(s);
            }
            Ok(())
        };
        match self.kind {
            ProblemKind::AdvDiff => {
                let x = sx.unwrap();
                push(&[(x, 1)], &mut sigs)?;
                push(&[(x, 2)], &mut sigs)?;
            }
            ProblemKind::Poisson9 => {
                let (x, y) = (sx.unwrap(), sy.unwrap());
                push(&[(x, 2)], &mut sigs)?;
                push(&[(y, 2)], &mut sigs)?;
            }
            ProblemKind::TwoPhase1d => {
                let (x, t) = (sx.unwrap(), st.unwrap());
                push(&[(x, 1)], &mut sigs)?;
                push(&[(x, 2)], &mut sigs)?;
                push(&[(t, 1)], &mut sigs)?;
            }
            ProblemKind::TwoPhase2d => {
                let (x, y, t) = (sx.unwrap(), sy.unwrap(), st.unwrap());
                push(&[(x, 1)], &mut sigs)?;
                push(&[(y, 1)], &mut sigs)?;
                push(&[(x, 2)], &mut sigs)?;
                push(&[(y, 2)], &mut sigs)?;
                push(&[(t, 1)], &mut sigs)?;
            }
        }
        Ok(sigs)
    }

    /// Interior residual components at the current point.
    pub fn emit_interior(&self, f: &mut FieldCtx) -> Result<Vec<PolyId>> {
        match self.kind {
            ProblemKind::AdvDiff => {
                let x = self.layout.space_slot(0).unwrap();
                let uxx = f.field(0, &[(x, 2)])?;
                let ux = f.field(0, &[(x, 1)])?;
                let eps = f.param_field(0)?;
                let adv = f.mul(eps, uxx);
                let d = f.sub(adv, ux);
                Ok(vec![f.shift(d, 1.0)])
            }
            ProblemKind::Poisson9 => {
                let x = self.layout.space_slot(0).unwrap();
                let y = self.layout.space_slot(1).unwrap();
                let uxx = f.field(0, &[(x, 2)])?;
                let uyy = f.field(0, &[(y, 2)])?;
                let lap = f.add(uxx, uyy);
                let cell = poisson9_cell(f.coords[x], f.coords[y]);
                let k = f.param_field(cell)?;
                let klap = f.mul(k, lap);
                Ok(vec![f.shift(klap, 1.0)])
            }
            ProblemKind::TwoPhase1d => {
                let x = self.layout.space_slot(0).unwrap();
                let t = self.layout.time_slot().unwrap();
                let p_x = f.field(0, &[(x, 1)])?;
                let p_xx = f.field(0, &[(x, 2)])?;
                let c = f.value(1)?;
                let c_x = f.field(1, &[(x, 1)])?;
                let c_t = f.field(1, &[(t, 1)])?;
                let k = f.param_field(0)?;
                let phi = f.param_value("phi");
                let kphi = f.scale(k, 1.0 / phi);
                let (inv_mu, dmu) = viscosity(f, c)?;
                // r1 = c_t + v c_x with v = -(k/phi) p_x / mu.
                let pim = f.mul(p_x, inv_mu);
                let kv = f.mul(kphi, pim);
                let v = f.neg(kv);
                let vc = f.mul(v, c_x);
                let r1 = f.add(c_t, vc);
                // r2 = v_x = -(k/phi) (p_xx/mu - p_x mu_x/mu^2).
                let mu_x = f.mul(dmu, c_x);
                let im2 = f.mul(inv_mu, inv_mu);
                let t1 = f.mul(p_xx, inv_mu);
                let mm = f.mul(mu_x, im2);
                let t2 = f.mul(p_x, mm);
                let diff = f.sub(t1, t2);
                let kd = f.mul(kphi, diff);
                let r2 = f.neg(kd);
                Ok(vec![r1, r2])
            }
            ProblemKind::TwoPhase2d => {
                let x = self.layout.space_slot(0).unwrap();
                let y = self.layout.space_slot(1).unwrap();
                let t = self.layout.time_slot().unwrap();
                let p_x = f.field(0, &[(x, 1)])?;
                let p_y = f.field(0, &[(y, 1)])?;
                let p_xx = f.field(0, &[(x, 2)])?;
                let p_yy = f.field(0, &[(y, 2)])?;
                let c = f.value(1)?;
                let c_x = f.field(1, &[(x, 1)])?;
                let c_y = f.field(1, &[(y, 1)])?;
                let c_t = f.field(1, &[(t, 1)])?;
                let phi = f.param_value("phi");
                let kf = permeability_2d(self, f)?;
                let kphi = f.scale(kf, 1.0 / phi);
                let (inv_mu, dmu) = viscosity(f, c)?;
                let pxm = f.mul(p_x, inv_mu);
                let pym = f.mul(p_y, inv_mu);
                let kvx = f.mul(kphi, pxm);
                let kvy = f.mul(kphi, pym);
                let vx = f.neg(kvx);
                let vy = f.neg(kvy);
                let ax = f.mul(vx, c_x);
                let ay = f.mul(vy, c_y);
                let adv = f.add(ax, ay);
                let r1 = f.add(c_t, adv);
                // r2 = div v, expanded with mu_x = dmu*c_x, mu_y = dmu*c_y.
                let im2 = f.mul(inv_mu, inv_mu);
                let mu_x = f.mul(dmu, c_x);
                let mu_y = f.mul(dmu, c_y);
                let t1 = f.mul(p_xx, inv_mu);
                let mx = f.mul(mu_x, im2);
                let t2p = f.mul(p_x, mx);
                let t2 = f.sub(t1, t2p);
                let t3 = f.mul(p_yy, inv_mu);
                let my = f.mul(mu_y, im2);
                let t4p = f.mul(p_y, my);
                let t4 = f.sub(t3, t4p);
                let lap = f.add(t2, t4);
                let kd = f.mul(kphi, lap);
                let r2 = f.neg(kd);
                Ok(vec![r1, r2])
            }
        }
    }

    /// Boundary residual (operator value minus target) for one spec.
    pub fn emit_boundary(&self, f: &mut FieldCtx, spec_idx: usize) -> Result<PolyId> {
        let bc = &self.boundary_specs[spec_idx];
        match bc.op {
            BoundaryOp::Value => {
                let u = f.value(bc.output)?;
                Ok(f.shift(u, -bc.target))
            }
            BoundaryOp::NormalGradient { axis, sign } => {
                let slot = self.layout.space_slot(axis).ok_or_else(|| {
                    CoreError::InvalidProblem(format!("no slot for spatial axis {axis}"))
                })?;
                let g = f.field(bc.output, &[(slot, 1)])?;
                let s = f.scale(g, sign);
                Ok(f.shift(s, -bc.target))
            }
            BoundaryOp::DarcyVelocity { axis, sign } => {
                let slot = self.layout.space_slot(axis).ok_or_else(|| {
                    CoreError::InvalidProblem(format!("no slot for spatial axis {axis}"))
                })?;
                let p_a = f.field(bc.output, &[(slot, 1)])?;
                let c = f.value(1)?;
                let (inv_mu, _) = viscosity(f, c)?;
                let phi = f.param_value("phi");
                let kf = match self.kind {
                    ProblemKind::TwoPhase2d => permeability_2d(self, f)?,
                    _ => f.param_field(0)?,
                };
                let kphi = f.scale(kf, 1.0 / phi);
                let pim = f.mul(p_a, inv_mu);
                let kv = f.mul(kphi, pim);
                let v = f.neg(kv);
                let s = f.scale(v, sign);
                Ok(f.shift(s, -bc.target))
            }
        }
    }

    /// Initial-condition residual (value minus target) for one spec.
    pub fn emit_initial(&self, f: &mut FieldCtx, init_idx: usize) -> Result<PolyId> {
        let ic = &self.initial_specs[init_idx];
        let u = f.value(ic.output)?;
        Ok(f.shift(u, -ic.value))
    }
}

/// Viscosity blend mu = mu1 + (mu2 - mu1)*clamp01(c) as (1/mu, d(mu)/dc).
/// The clamp applies inside the blend only; its derivative factor is the
/// inside-interval indicator.
fn viscosity(f: &mut FieldCtx, c: PolyId) -> Result<(PolyId, PolyId)> {
    let mu1 = f.param_value("mu1");
    let mu2 = f.param_value("mu2");
    let cc = f.compose(ScalarFn::Clamp01, c);
    let blend = f.scale(cc, mu2 - mu1);
    let mu = f.shift(blend, mu1);
    let inv_mu = f.compose(ScalarFn::Recip, mu);
    let ind = f.compose(ScalarFn::Clamp01Grad, c);
    let dmu = f.scale(ind, mu2 - mu1);
    Ok((inv_mu, dmu))
}

/// Permeability field for the race-tracking mold: the ratio parameter inside
/// the bottom strip, the bulk value 1 elsewhere.
fn permeability_2d(problem: &ProblemSpec, f: &mut FieldCtx) -> Result<PolyId> {
    let y = problem.layout.space_slot(1).unwrap();
    let strip = problem.params.value("strip_height");
    if f.coords[y] < strip {
        f.param_field(0)
    } else {
        Ok(f.constant(1.0))
    }
}
