//! Independent ground truth: closed-form solutions, finite-difference PDE
//! solvers, and finite-difference-in-parameter sensitivities. Nothing here
//! touches the network/autodiff stack; agreement between the two paths is
//! what the acceptance suite checks.

mod adv_diff;
mod poisson_fd;
mod twophase_fd;

pub use adv_diff::adv_diff_exact;
pub use poisson_fd::poisson9_fd_solve;
pub use twophase_fd::{
    half_level_crossing, twophase1d_fd_solve, twophase1d_fill_time, twophase1d_front,
    FrontEstimate, TwoPhaseFdConfig, TwoPhaseFdSolution,
};

use crate::error::{CoreError, Result};

/// Values on a regular grid: cell centers `origin + i*spacing` per axis,
/// row-major with the first axis fastest. Transient fields carry time stamps
/// and stack one grid per stamp.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub values: Vec<f64>,
    pub times: Option<Vec<f64>>,
}

impl GridField {
    pub fn node_count(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn coord(&self, axis: usize, index: usize) -> f64 {
        self.origin[axis] + self.spacing[axis] * index as f64
    }

    /// Value at flat grid index (steady fields) .
    pub fn at(&self, idx: &[usize]) -> f64 {
        debug_assert!(self.times.is_none());
        self.values[self.flat_index(idx)]
    }

    /// Value at (time index, flat grid index) for transient fields.
    pub fn at_time(&self, t_idx: usize, idx: &[usize]) -> f64 {
        self.values[t_idx * self.node_count() + self.flat_index(idx)]
    }

    pub fn snapshot(&self, t_idx: usize) -> &[f64] {
        let n = self.node_count();
        &self.values[t_idx * n..(t_idx + 1) * n]
    }

    fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut flat = 0;
        let mut stride = 1;
        for (i, &s) in idx.iter().zip(&self.shape) {
            flat += i * stride;
            stride *= s;
        }
        flat
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// CSV dump with header `x[,y][,t],value` and full round-trip precision.
    pub fn to_csv(&self, value_name: &str) -> String {
        let axis_names = ["x", "y", "z"];
        let mut out = String::new();
        for a in 0..self.shape.len() {
            out.push_str(axis_names[a]);
            out.push(',');
        }
        if self.times.is_some() {
            out.push_str("t,");
        }
        out.push_str(value_name);
        out.push('\n');
        let n = self.node_count();
        let times = self.times.clone().unwrap_or_else(|| vec![f64::NAN]);
        for (ti, t) in times.iter().enumerate() {
            for flat in 0..n {
                let mut rem = flat;
                for (a, &s) in self.shape.iter().enumerate() {
                    let i = rem % s;
                    rem /= s;
                    out.push_str(&format!("{:.16e},", self.coord(a, i)));
                }
                if self.times.is_some() {
                    out.push_str(&format!("{:.16e},", t));
                }
                let v = if self.times.is_some() { self.values[ti * n + flat] } else { self.values[flat] };
                out.push_str(&format!("{:.16e}\n", v));
            }
        }
        out
    }
}

/// A central-difference parameter sensitivity built from exactly two solves.
#[derive(Clone, Debug)]
pub struct SensitivityEstimate {
    pub parameter: String,
    pub step: f64,
    pub field: GridField,
}

/// Central difference (solve(mu+h) - solve(mu-h)) / (2h) of a field-valued
/// solver with respect to one parameter.
pub fn fd_param_sensitivity<F>(
    solver: F,
    params: &[f64],
    target: usize,
    name: &str,
    h: f64,
) -> Result<SensitivityEstimate>
where
    F: Fn(&[f64]) -> Result<GridField>,
{
    if h <= 0.0 {
        return Err(CoreError::Oracle("sensitivity step h must be > 0".into()));
    }
    let mut plus = params.to_vec();
    plus[target] += h;
    let mut minus = params.to_vec();
    minus[target] -= h;
    let fp = solver(&plus)?;
    let fm = solver(&minus)?;
    if fp.shape != fm.shape {
        return Err(CoreError::Oracle("perturbed solves returned different grids".into()));
    }
    let values = fp
        .values
        .iter()
        .zip(&fm.values)
        .map(|(a, b)| (a - b) / (2.0 * h))
        .collect();
    Ok(SensitivityEstimate {
        parameter: name.to_string(),
        step: h,
        field: GridField { values, ..fp },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_grid(v: f64) -> GridField {
        GridField {
            shape: vec![1],
            origin: vec![0.0],
            spacing: vec![1.0],
            values: vec![v],
            times: None,
        }
    }

    #[test]
    fn linear_solver_sensitivity_is_exact() {
        let est = fd_param_sensitivity(
            |p: &[f64]| Ok(scalar_grid(3.5 * p[0] + 2.0)),
            &[1.0],
            0,
            "a",
            0.01,
        )
        .unwrap();
        assert!((est.field.values[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn halving_h_reduces_error_quadratically() {
        let solver = |p: &[f64]| Ok(scalar_grid(p[0].sin()));
        let truth = 0.8f64.cos();
        let e = |h: f64| {
            let est = fd_param_sensitivity(solver, &[0.8], 0, "mu", h).unwrap();
            (est.field.values[0] - truth).abs()
        };
        let ratio = e(1e-2) / e(5e-3);
        assert!((3.0..5.0).contains(&ratio), "Richardson ratio {ratio}");
    }

    #[test]
    fn csv_has_header_and_one_row_per_node() {
        let g = GridField {
            shape: vec![2, 2],
            origin: vec![0.25, 0.25],
            spacing: vec![0.5, 0.5],
            values: vec![1.0, 2.0, 3.0, 4.0],
            times: None,
        };
        let csv = g.to_csv("u");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,u");
        assert_eq!(lines.len(), 5);
    }
}
