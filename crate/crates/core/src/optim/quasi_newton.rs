//! Limited-memory (or dense) BFGS with a strong-Wolfe line search.

use std::collections::VecDeque;
use std::time::Instant;

use crate::optim::{
    LineSearchKind, Objective, Phase, QuasiNewtonConfig, TraceRecord, TrainStatus, TrainingTrace,
};

struct LsEval {
    a: f64,
    f: f64,
    dphi: f64,
    x: Vec<f64>,
    g: Vec<f64>,
    terms: Vec<f64>,
}

fn eval_along(obj: &mut dyn Objective, x: &[f64], d: &[f64], a: f64) -> LsEval {
    let xa: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
    let e = obj.eval(&xa);
    let dphi = e.grad.iter().zip(d).map(|(gi, di)| gi * di).sum();
    LsEval { a, f: e.value, dphi, x: xa, g: e.grad, terms: e.terms }
}

fn cubic_interpolate(a1: f64, f1: f64, g1: f64, a2: f64, f2: f64, g2: f64) -> f64 {
    let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (a1 - a2);
    let d2sq = d1 * d1 - g1 * g2;
    if d2sq >= 0.0 {
        let d2 = d2sq.sqrt();
        let min_pos = if a1 <= a2 {
            a2 - (a2 - a1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            a1 - (a1 - a2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if min_pos.is_finite() {
            // Keep a safeguard margin inside the bracket.
            let w = 0.1 * (hi - lo);
            return min_pos.clamp(lo + w, hi - w);
        }
    }
    0.5 * (lo + hi)
}

struct Zoom<'c> {
    cfg: &'c QuasiNewtonConfig,
    phi0: f64,
    dphi0: f64,
}

impl Zoom<'_> {
    fn run(
        &self,
        obj: &mut dyn Objective,
        x: &[f64],
        d: &[f64],
        mut lo: LsEval,
        mut hi: (f64, f64, f64),
    ) -> Option<LsEval> {
        for _ in 0..self.cfg.max_step_halvings {
            if (hi.0 - lo.a).abs() <= 1e-16 * lo.a.abs().max(1.0) {
                break;
            }
            let a = cubic_interpolate(lo.a, lo.f, lo.dphi, hi.0, hi.1, hi.2);
            let e = eval_along(obj, x, d, a);
            if !e.f.is_finite() || e.f > self.phi0 + self.cfg.c1 * a * self.dphi0 || e.f >= lo.f {
                hi = (e.a, e.f, e.dphi);
            } else {
                if e.dphi.abs() <= -self.cfg.c2 * self.dphi0 {
                    return Some(e);
                }
                if e.dphi * (hi.0 - lo.a) >= 0.0 {
                    hi = (lo.a, lo.f, lo.dphi);
                }
                lo = e;
            }
        }
        // Fall back to the best sufficient-decrease point found.
        if lo.a > 0.0 && lo.f < self.phi0 {
            Some(lo)
        } else {
            None
        }
    }
}

/// Strong-Wolfe bracketing line search; returns an accepted step or None.
fn strong_wolfe(
    obj: &mut dyn Objective,
    cfg: &QuasiNewtonConfig,
    x: &[f64],
    d: &[f64],
    phi0: f64,
    dphi0: f64,
    a_init: f64,
) -> Option<LsEval> {
    let zoom = Zoom { cfg, phi0, dphi0 };
    let mut prev = LsEval { a: 0.0, f: phi0, dphi: dphi0, x: x.to_vec(), g: Vec::new(), terms: Vec::new() };
    let mut a = a_init;
    for i in 0..cfg.max_step_halvings {
        let e = eval_along(obj, x, d, a);
        if !e.f.is_finite() {
            // Overshot into a non-finite region; bisect back toward prev.
            a = 0.5 * (prev.a + a);
            continue;
        }
        if e.f > phi0 + cfg.c1 * a * dphi0 || (i > 0 && e.f >= prev.f) {
            return zoom.run(obj, x, d, prev, (e.a, e.f, e.dphi));
        }
        if e.dphi.abs() <= -cfg.c2 * dphi0 {
            return Some(e);
        }
        if e.dphi >= 0.0 {
            let hi = (prev.a, prev.f, prev.dphi);
            return zoom.run(obj, x, d, e, hi);
        }
        prev = e;
        a *= 2.0;
    }
    None
}

/// Analytic step from two gradient evaluations; exact for quadratics.
fn exact_quadratic_step(
    obj: &mut dyn Objective,
    x: &[f64],
    d: &[f64],
    dphi0: f64,
) -> Option<LsEval> {
    let probe = eval_along(obj, x, d, 1.0);
    let denom = probe.dphi - dphi0;
    if !(denom > 0.0) {
        return None;
    }
    let a = -dphi0 / denom;
    if a == 1.0 {
        return Some(probe);
    }
    Some(eval_along(obj, x, d, a))
}

enum Curvature {
    Limited { hist: VecDeque<(Vec<f64>, Vec<f64>, f64)>, memory: usize },
    Dense { h: Vec<f64>, n: usize, fresh: bool },
}

impl Curvature {
    fn new(cfg: &QuasiNewtonConfig, n: usize) -> Self {
        if cfg.full_memory {
            let mut h = vec![0.0; n * n];
            for i in 0..n {
                h[i * n + i] = 1.0;
            }
            Curvature::Dense { h, n, fresh: true }
        } else {
            Curvature::Limited { hist: VecDeque::new(), memory: cfg.memory.max(1) }
        }
    }

    fn reset(&mut self) {
        match self {
            Curvature::Limited { hist, .. } => hist.clear(),
            Curvature::Dense { h, n, fresh } => {
                h.fill(0.0);
                for i in 0..*n {
                    h[i * *n + i] = 1.0;
                }
                *fresh = true;
            }
        }
    }

    /// Search direction -H*g.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        match self {
            Curvature::Limited { hist, .. } => {
                let mut q = g.to_vec();
                let mut alphas = Vec::with_capacity(hist.len());
                for (s, y, rho) in hist.iter().rev() {
                    let alpha = rho * dot(s, &q);
                    axpy(&mut q, -alpha, y);
                    alphas.push(alpha);
                }
                if let Some((s, y, _)) = hist.back() {
                    let gamma = dot(s, y) / dot(y, y);
                    for v in &mut q {
                        *v *= gamma;
                    }
                }
                for ((s, y, rho), alpha) in hist.iter().zip(alphas.iter().rev()) {
                    let beta = rho * dot(y, &q);
                    axpy(&mut q, alpha - beta, s);
                }
                q.iter_mut().for_each(|v| *v = -*v);
                q
            }
            Curvature::Dense { h, n, .. } => {
                let mut d = vec![0.0; *n];
                for i in 0..*n {
                    let row = &h[i * n..(i + 1) * n];
                    d[i] = -dot(row, g);
                }
                d
            }
        }
    }

    fn update(&mut self, s: Vec<f64>, y: Vec<f64>, sy: f64) {
        match self {
            Curvature::Limited { hist, memory } => {
                if hist.len() == *memory {
                    hist.pop_front();
                }
                hist.push_back((s, y, 1.0 / sy));
            }
            Curvature::Dense { h, n, fresh } => {
                let n = *n;
                if *fresh {
                    let gamma = sy / dot(&y, &y);
                    for i in 0..n {
                        for j in 0..n {
                            h[i * n + j] = if i == j { gamma } else { 0.0 };
                        }
                    }
                    *fresh = false;
                }
                let rho = 1.0 / sy;
                let mut hy = vec![0.0; n];
                for i in 0..n {
                    hy[i] = dot(&h[i * n..(i + 1) * n], &y);
                }
                let yhy = dot(&y, &hy);
                let c = rho * rho * yhy + rho;
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] +=
                            -rho * (s[i] * hy[j] + hy[i] * s[j]) + c * s[i] * s[j];
                    }
                }
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Quasi-Newton minimization. Terminates on gradient norm below tolerance,
/// the iteration cap, or line-search failure (returning the best iterate
/// seen, never worse than the input).
pub fn minimize_quasi_newton(
    x0: &[f64],
    obj: &mut dyn Objective,
    cfg: &QuasiNewtonConfig,
    iter_offset: usize,
) -> (Vec<f64>, TrainingTrace) {
    let start = Instant::now();
    let n = x0.len();
    let mut trace = TrainingTrace {
        records: Vec::new(),
        term_names: obj.term_names(),
        status: None,
    };

    let mut x = x0.to_vec();
    let eval0 = obj.eval(&x);
    let mut f = eval0.value;
    let mut g = eval0.grad;
    let mut terms = eval0.terms;
    let mut best = (x.clone(), f);
    let mut curvature = Curvature::new(cfg, n);

    let record = |iter: usize, f: f64, g: &[f64], terms: &[f64], trace: &mut TrainingTrace| {
        trace.records.push(TraceRecord {
            iteration: iter_offset + iter,
            phase: Phase::QuasiNewton,
            loss: f,
            terms: terms.to_vec(),
            grad_norm: g.iter().map(|v| v * v).sum::<f64>().sqrt(),
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    };

    for iter in 1..=cfg.max_iterations {
        record(iter, f, &g, &terms, &mut trace);
        if !f.is_finite() {
            trace.status = Some(TrainStatus::Diverged);
            return (best.0, trace);
        }
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < cfg.gradient_tolerance {
            trace.status = Some(TrainStatus::GradientConverged);
            return (best.0, trace);
        }

        let mut d = curvature.direction(&g);
        let mut dphi0 = dot(&d, &g);
        if !(dphi0 < 0.0) {
            curvature.reset();
            d = g.iter().map(|v| -v).collect();
            dphi0 = -dot(&g, &g);
        }
        let a_init = if iter == 1 && !cfg.full_memory {
            (1.0 / gnorm).clamp(1e-10, 1.0)
        } else {
            1.0
        };

        let accepted = match cfg.line_search {
            LineSearchKind::StrongWolfe => strong_wolfe(obj, cfg, &x, &d, f, dphi0, a_init),
            LineSearchKind::ExactQuadratic => exact_quadratic_step(obj, &x, &d, dphi0),
        };
        let e = match accepted {
            Some(e) => e,
            None => {
                trace.status = Some(TrainStatus::LineSearchStop);
                return (best.0, trace);
            }
        };
        if cfg.line_search == LineSearchKind::StrongWolfe {
            debug_assert!(
                e.f <= f + cfg.c1 * e.a * dphi0 + 1e-12 * f.abs().max(1.0),
                "sufficient decrease violated at accepted step"
            );
        }

        let s: Vec<f64> = e.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = e.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let snorm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-10 * snorm * ynorm {
            curvature.update(s, y, sy);
        }
        x = e.x;
        f = e.f;
        g = e.g;
        terms = e.terms;
        if f < best.1 {
            best = (x.clone(), f);
        }
    }
    trace.status = Some(TrainStatus::MaxIterations);
    (best.0, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn qn_cfg() -> QuasiNewtonConfig {
        QuasiNewtonConfig::default()
    }

    /// Convex quadratic f(x) = 0.5 x'Ax - b'x with SPD A.
    fn quadratic_problem(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = rng.gen_range(-1.0..1.0);
            }
        }
        // A = M'M + I is SPD.
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += m[k][i] * m[k][j];
                }
                a[i][j] = acc + if i == j { 1.0 } else { 0.0 };
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (a, b)
    }

    #[test]
    fn bfgs_terminates_on_quadratics_with_exact_line_search() {
        let n = 10;
        let (a, b) = quadratic_problem(n, 4);
        let mut obj = |x: &[f64]| {
            let mut ax = vec![0.0; n];
            for i in 0..n {
                ax[i] = dot(&a[i], x);
            }
            let f = 0.5 * dot(x, &ax) - dot(&b, x);
            let g: Vec<f64> = ax.iter().zip(&b).map(|(v, bi)| v - bi).collect();
            (f, g)
        };
        let cfg = QuasiNewtonConfig {
            full_memory: true,
            line_search: LineSearchKind::ExactQuadratic,
            gradient_tolerance: 1e-10,
            max_iterations: n + 2,
            ..qn_cfg()
        };
        let (x, trace) = minimize_quasi_newton(&vec![0.0; n], &mut obj, &cfg, 0);
        assert_eq!(trace.status, Some(TrainStatus::GradientConverged));
        let mut ax = vec![0.0; n];
        for i in 0..n {
            ax[i] = dot(&a[i], &x);
        }
        let gnorm: f64 = ax.iter().zip(&b).map(|(v, bi)| (v - bi) * (v - bi)).sum::<f64>().sqrt();
        assert!(gnorm < 1e-10, "gradient norm {gnorm}");
    }

    #[test]
    fn rosenbrock_reaches_minimum() {
        let mut obj = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ];
            (f, g)
        };
        let cfg = QuasiNewtonConfig {
            gradient_tolerance: 1e-12,
            max_iterations: 500,
            ..qn_cfg()
        };
        let (x, _) = minimize_quasi_newton(&[-1.2, 1.0], &mut obj, &cfg, 0);
        let f = (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        assert!(f < 1e-8, "rosenbrock f = {f}");
    }

    #[test]
    fn zero_gradient_input_returns_immediately() {
        let mut obj = |x: &[f64]| -> (f64, Vec<f64>) {
            (x.iter().map(|v| v * v).sum(), x.iter().map(|v| 2.0 * v).collect())
        };
        let (x, trace) = minimize_quasi_newton(&[0.0, 0.0], &mut obj, &qn_cfg(), 0);
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(trace.status, Some(TrainStatus::GradientConverged));
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn best_loss_is_monotone_and_never_worse_than_input() {
        // A mildly nasty nonconvex objective.
        let mut obj = |x: &[f64]| {
            let f = x[0].sin() + 0.1 * x[0] * x[0] + (3.0 * x[1]).cos() + 0.1 * x[1] * x[1];
            let g = vec![
                x[0].cos() + 0.2 * x[0],
                -3.0 * (3.0 * x[1]).sin() + 0.2 * x[1],
            ];
            (f, g)
        };
        let f0 = obj(&[2.0, 1.0]).0;
        let cfg = QuasiNewtonConfig { max_iterations: 60, ..qn_cfg() };
        let (x, trace) = minimize_quasi_newton(&[2.0, 1.0], &mut obj, &cfg, 0);
        let f_end = obj(&x).0;
        assert!(f_end <= f0);
        // Recorded losses of accepted iterates never increase.
        let losses: Vec<f64> = trace.records.iter().map(|r| r.loss).collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let make_obj = || {
            |x: &[f64]| -> (f64, Vec<f64>) {
                let f = (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
                let g = vec![
                    -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                    200.0 * (x[1] - x[0] * x[0]),
                ];
                (f, g)
            }
        };
        let cfg = QuasiNewtonConfig { max_iterations: 100, ..qn_cfg() };
        let (xa, _) = minimize_quasi_newton(&[-1.2, 1.0], &mut make_obj(), &cfg, 0);
        let (xb, _) = minimize_quasi_newton(&[-1.2, 1.0], &mut make_obj(), &cfg, 0);
        assert_eq!(xa, xb);
    }

    #[test]
    fn accepted_steps_satisfy_wolfe_conditions() {
        // Checked explicitly here (and by debug_assert during every run).
        let rosen = |x: &[f64]| -> (f64, Vec<f64>) {
            let f = (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
            let g = vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ];
            (f, g)
        };
        let cfg = qn_cfg();
        let mut obj = rosen;
        let x = vec![-1.2, 1.0];
        let (f0, g0) = rosen(&x);
        let d: Vec<f64> = g0.iter().map(|v| -v).collect();
        let dphi0 = dot(&d, &g0);
        let e = strong_wolfe(&mut obj, &cfg, &x, &d, f0, dphi0, 1e-3).expect("line search");
        assert!(e.f <= f0 + cfg.c1 * e.a * dphi0 + 1e-14);
        assert!(e.dphi.abs() <= -cfg.c2 * dphi0);
    }
}
