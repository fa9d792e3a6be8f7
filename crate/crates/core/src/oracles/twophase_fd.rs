//! Reference solutions for the 1D two-phase filling problem: the
//! sharp-interface closed form for the front, and a finite-difference
//! solver (per-step pressure integration plus first-order upwind advection
//! of the fraction field).

use crate::error::{CoreError, Result};
use crate::oracles::GridField;

/// Table values of the benchmark, used by the closed forms.
const MU2: f64 = 1.0;
const PHI: f64 = 1.0;
const DP: f64 = 1.0;

#[derive(Clone, Copy, Debug)]
pub struct FrontEstimate {
    pub position: f64,
    pub dposition_dk: f64,
}

/// Sharp-interface front location x_f = sqrt(2 k dp t / (phi mu2)) and its
/// k-derivative. Valid in the mu1 << mu2 regime of the benchmark.
pub fn twophase1d_front(t: f64, k: f64) -> Result<FrontEstimate> {
    if t < 0.0 {
        return Err(CoreError::Oracle(format!("negative time {t}")));
    }
    if k <= 0.0 {
        return Err(CoreError::Oracle(format!("permeability {k} must be positive")));
    }
    let position = (2.0 * k * DP * t / (PHI * MU2)).sqrt();
    let dposition_dk = if t == 0.0 { 0.0 } else { position / (2.0 * k) };
    Ok(FrontEstimate { position, dposition_dk })
}

/// Time at which the front reaches x_star: t = phi mu2 x*^2 / (2 k dp).
pub fn twophase1d_fill_time(x_star: f64, k: f64) -> Result<f64> {
    if k <= 0.0 {
        return Err(CoreError::Oracle(format!("permeability {k} must be positive")));
    }
    Ok(PHI * MU2 * x_star * x_star / (2.0 * k * DP))
}

/// One first-order upwind step of c_t + v c_x = 0 with inflow value at the
/// left boundary (v >= 0).
pub(crate) fn upwind_step(c: &mut [f64], v: f64, dt: f64, h: f64, inflow: f64) {
    let lam = v * dt / h;
    debug_assert!(lam <= 1.0 + 1e-12, "CFL violated: {lam}");
    let mut upstream = inflow;
    for ci in c.iter_mut() {
        let old = *ci;
        *ci -= lam * (old - upstream);
        upstream = old;
    }
}

#[derive(Clone, Debug)]
pub struct TwoPhaseFdSolution {
    /// Pressure snapshots, shape [n], one row per requested time.
    pub pressure: GridField,
    /// Fraction snapshots on the same layout.
    pub fraction: GridField,
    /// Cumulative injected volume (integral of v dt) per snapshot.
    pub injected: Vec<f64>,
}

impl TwoPhaseFdSolution {
    pub fn times(&self) -> &[f64] {
        self.fraction.times.as_deref().unwrap_or(&[])
    }

    /// 0.5-level-set position of the fraction field at a snapshot.
    pub fn front_position(&self, t_idx: usize) -> f64 {
        half_level_crossing(
            self.fraction.snapshot(t_idx),
            self.fraction.origin[0],
            self.fraction.spacing[0],
        )
    }

    /// Discrete filled volume at a snapshot.
    pub fn filled_volume(&self, t_idx: usize) -> f64 {
        self.fraction.snapshot(t_idx).iter().sum::<f64>() * self.fraction.spacing[0]
    }
}

/// First x where a monotone non-increasing profile crosses 0.5 (linear
/// interpolation between cell centers).
pub fn half_level_crossing(c: &[f64], origin: f64, h: f64) -> f64 {
    if c.is_empty() || c[0] < 0.5 {
        return 0.0;
    }
    for i in 0..c.len() - 1 {
        if c[i] >= 0.5 && c[i + 1] < 0.5 {
            let x0 = origin + h * i as f64;
            let frac = (c[i] - 0.5) / (c[i] - c[i + 1]);
            return x0 + frac * h;
        }
    }
    origin + h * (c.len() - 1) as f64 + 0.5 * h
}

#[derive(Clone, Copy, Debug)]
pub struct TwoPhaseFdConfig {
    pub k: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub p_in: f64,
    pub p_out: f64,
    pub phi: f64,
    pub cells: usize,
    pub cfl: f64,
}

impl Default for TwoPhaseFdConfig {
    fn default() -> Self {
        TwoPhaseFdConfig {
            k: 1.0,
            mu1: 1e-5,
            mu2: 1.0,
            p_in: 1.0,
            p_out: 0.0,
            phi: 1.0,
            cells: 2000,
            cfl: 0.5,
        }
    }
}

/// Transient solve: at each step the incompressible 1D Darcy velocity is
/// uniform, v = k (p_in - p_out) / (phi * integral of mu(c) dx); the
/// pressure profile follows by integrating mu, and the fraction advects with
/// first-order upwinding under an adaptive CFL-respecting time step.
pub fn twophase1d_fd_solve(cfg: &TwoPhaseFdConfig, snapshot_times: &[f64]) -> Result<TwoPhaseFdSolution> {
    if cfg.cells < 2 {
        return Err(CoreError::Oracle("need at least 2 cells".into()));
    }
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        return Err(CoreError::Oracle(format!("CFL {} outside (0, 1]", cfg.cfl)));
    }
    let mut times = snapshot_times.to_vec();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if times.first().is_some_and(|&t| t < 0.0) {
        return Err(CoreError::Oracle("negative snapshot time".into()));
    }
    let n = cfg.cells;
    let h = 1.0 / n as f64;
    let dp = cfg.p_in - cfg.p_out;
    let mut c = vec![0.0f64; n];
    let mut t = 0.0;
    let mut injected_total = 0.0;

    let mut p_rows = Vec::with_capacity(times.len() * n);
    let mut c_rows = Vec::with_capacity(times.len() * n);
    let mut injected = Vec::with_capacity(times.len());

    let velocity = |c: &[f64]| -> f64 {
        let mu_int: f64 = c
            .iter()
            .map(|&ci| cfg.mu1 + (cfg.mu2 - cfg.mu1) * ci)
            .sum::<f64>()
            * h;
        cfg.k * dp / (cfg.phi * mu_int)
    };

    for &target in &times {
        while t < target - 1e-15 {
            let v = velocity(&c);
            let dt = (cfg.cfl * h / v).min(target - t);
            upwind_step(&mut c, v, dt, h, 1.0);
            injected_total += v * dt;
            t += dt;
        }
        // Pressure from the current saturation profile.
        let v = velocity(&c);
        let mut cum = 0.0;
        for i in 0..n {
            let mu_i = cfg.mu1 + (cfg.mu2 - cfg.mu1) * c[i];
            let p = cfg.p_in - (v * cfg.phi / cfg.k) * (cum + 0.5 * mu_i * h);
            p_rows.push(p);
            cum += mu_i * h;
        }
        c_rows.extend_from_slice(&c);
        injected.push(injected_total);
    }

    let mk = |values: Vec<f64>| GridField {
        shape: vec![n],
        origin: vec![h / 2.0],
        spacing: vec![h],
        values,
        times: Some(times.clone()),
    };
    Ok(TwoPhaseFdSolution {
        pressure: mk(p_rows),
        fraction: mk(c_rows),
        injected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_front_values() {
        let f = twophase1d_front(0.0, 1.0).unwrap();
        assert_eq!(f.position, 0.0);
        let f = twophase1d_front(0.5, 1.0).unwrap();
        assert!((f.position - 1.0).abs() < 1e-14);
        assert!((twophase1d_fill_time(0.5, 1.0).unwrap() - 0.125).abs() < 1e-14);
        // dx_f/dk = sqrt(t/(2k)).
        let f = twophase1d_front(0.18, 1.0).unwrap();
        assert!((f.dposition_dk - (0.18f64 / 2.0).sqrt()).abs() < 1e-14);
        assert!(twophase1d_front(-0.1, 1.0).is_err());
    }

    #[test]
    fn fill_time_inverts_front() {
        for k in [0.5, 1.0, 1.7] {
            let t = twophase1d_fill_time(0.5, k).unwrap();
            let f = twophase1d_front(t, k).unwrap();
            assert!((f.position - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn upwind_is_first_order_on_smooth_profiles() {
        // Advect a smooth bump at constant speed; L1 error halves with h.
        let err = |n: usize| -> f64 {
            let h = 1.0 / n as f64;
            let profile = |x: f64| 0.5 * (1.0 + ((x - 0.3) * 8.0).tanh());
            let mut c: Vec<f64> = (0..n).map(|i| profile((i as f64 + 0.5) * h)).collect();
            let v = 1.0;
            let t_end = 0.2;
            let mut t = 0.0;
            while t < t_end - 1e-15 {
                let dt = (0.4 * h / v).min(t_end - t);
                upwind_step(&mut c, v, dt, h, profile(-t - 0.5 * h));
                t += dt;
            }
            (0..n)
                .map(|i| {
                    let x = (i as f64 + 0.5) * h;
                    (c[i] - profile(x - v * t_end)).abs() * h
                })
                .sum()
        };
        let ratio = err(200) / err(400);
        assert!((1.6..2.6).contains(&ratio), "upwind order ratio {ratio}");
    }

    #[test]
    fn fraction_stays_monotone_and_in_unit_range() {
        let cfg = TwoPhaseFdConfig { cells: 400, ..TwoPhaseFdConfig::default() };
        let sol = twophase1d_fd_solve(&cfg, &[0.05, 0.125, 0.3]).unwrap();
        for ti in 0..sol.times().len() {
            let row = sol.fraction.snapshot(ti);
            for w in row.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "non-monotone fraction");
            }
            assert!(row.iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v)));
        }
    }

    #[test]
    fn front_tracks_the_sharp_interface_solution() {
        let cfg = TwoPhaseFdConfig::default();
        let sol = twophase1d_fd_solve(&cfg, &[0.125]).unwrap();
        let xf = sol.front_position(0);
        assert!((xf - 0.5).abs() < 0.01, "front {xf} vs 0.5");
    }

    #[test]
    fn mass_is_conserved_to_discrete_accuracy() {
        let cfg = TwoPhaseFdConfig { cells: 500, ..TwoPhaseFdConfig::default() };
        let sol = twophase1d_fd_solve(&cfg, &[0.06, 0.2]).unwrap();
        for ti in 0..sol.times().len() {
            let filled = sol.filled_volume(ti);
            let injected = sol.injected[ti];
            assert!(
                (filled - injected).abs() <= 0.01 * injected.max(1e-12),
                "mass balance: filled {filled} vs injected {injected}"
            );
        }
    }

    #[test]
    fn pressure_profile_is_piecewise_linear_between_plateaus() {
        // Behind the front the gradient is steep (mu2); ahead it is nearly
        // flat (mu1 << mu2), so p at the inlet stays near p_in and the
        // outlet near p_out.
        let sol = twophase1d_fd_solve(&TwoPhaseFdConfig::default(), &[0.125]).unwrap();
        let p = sol.pressure.snapshot(0);
        assert!((p[0] - 1.0).abs() < 0.01);
        assert!(p[p.len() - 1].abs() < 0.01);
        for w in p.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "pressure should be non-increasing");
        }
    }
}
