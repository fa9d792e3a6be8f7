//! Finite-difference reference solver for the nine-subdomain diffusion
//! benchmark. The strong form k(x) lap(u) = -1 with pointwise piecewise k is
//! solved as -lap(u) = 1/k(x): a constant-coefficient 5-point Laplacian with
//! the discontinuous diffusivity folded into the right-hand side, which keeps
//! the discretization consistent with the pointwise residual the training
//! loss minimizes. Jacobi-preconditioned CG on a cell-centered grid.

use crate::error::{CoreError, Result};
use crate::oracles::GridField;

/// Cell-centered solve on an n x n grid. `n` must be odd and >= 31 so the
/// subdomain interfaces at 1/3 and 2/3 fall between cell centers.
pub fn poisson9_fd_solve(k: &[f64; 9], n: usize) -> Result<GridField> {
    if n < 31 || n % 2 == 0 {
        return Err(CoreError::Oracle(format!(
            "grid_n must be odd and >= 31, got {n}"
        )));
    }
    if k.iter().any(|&v| v <= 0.0) {
        return Err(CoreError::Oracle("diffusivities must be positive".into()));
    }
    let h = 1.0 / n as f64;
    let center = |i: usize| (i as f64 + 0.5) * h;

    // Row-major from the top-left cell, matching the benchmark layout.
    let cell_of = |x: f64, y: f64| -> usize {
        let col = if x < 1.0 / 3.0 { 0 } else if x < 2.0 / 3.0 { 1 } else { 2 };
        let row = if y >= 2.0 / 3.0 { 0 } else if y >= 1.0 / 3.0 { 1 } else { 2 };
        3 * row + col
    };

    // -lap(u) = 1/k, u = 0 on the boundary (ghost values at half spacing).
    let apply = |u: &[f64], out: &mut [f64]| {
        for j in 0..n {
            for i in 0..n {
                let f = j * n + i;
                let mut diag = 0.0;
                let mut acc = 0.0;
                if i > 0 {
                    diag += 1.0;
                    acc -= u[f - 1];
                } else {
                    diag += 2.0;
                }
                if i + 1 < n {
                    diag += 1.0;
                    acc -= u[f + 1];
                } else {
                    diag += 2.0;
                }
                if j > 0 {
                    diag += 1.0;
                    acc -= u[f - n];
                } else {
                    diag += 2.0;
                }
                if j + 1 < n {
                    diag += 1.0;
                    acc -= u[f + n];
                } else {
                    diag += 2.0;
                }
                out[f] = (diag * u[f] + acc) / (h * h);
            }
        }
    };

    let m = n * n;
    let b: Vec<f64> = (0..m)
        .map(|f| 1.0 / k[cell_of(center(f % n), center(f / n))])
        .collect();
    let mut diag = vec![0.0; m];
    for j in 0..n {
        for i in 0..n {
            let f = j * n + i;
            let d = [i > 0, i + 1 < n, j > 0, j + 1 < n]
                .iter()
                .map(|&interior| if interior { 1.0 } else { 2.0 })
                .sum::<f64>();
            diag[f] = d / (h * h);
        }
    }

    let mut u = vec![0.0; m];
    let mut r = b.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let b_norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut ap = vec![0.0; m];
    let max_iter = 20 * m;
    let mut converged = false;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..m {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= 1e-12 * b_norm {
            converged = true;
            break;
        }
        for i in 0..m {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..m {
            p[i] = z[i] + beta * p[i];
        }
    }
    if !converged {
        let r_norm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        return Err(CoreError::LinearSolve { residual: r_norm / b_norm, iterations: max_iter });
    }

    Ok(GridField {
        shape: vec![n, n],
        origin: vec![h / 2.0, h / 2.0],
        spacing: vec![h, h],
        values: u,
        times: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn center_value(g: &GridField) -> f64 {
        let n = g.shape[0];
        g.at(&[n / 2, n / 2])
    }

    #[test]
    fn uniform_diffusivity_center_value_matches_reference() {
        // Unit-square Poisson with f = 1: u(0.5, 0.5) = 0.07367...
        let g = poisson9_fd_solve(&[1.0; 9], 63).unwrap();
        assert!((center_value(&g) - 0.0737).abs() < 5e-4, "center {}", center_value(&g));
        let g2 = poisson9_fd_solve(&[1.0; 9], 127).unwrap();
        assert!((center_value(&g2) - 0.073671).abs() < 1e-4);
        // Converged in the doubling sense.
        assert!((g.max_abs() - g2.max_abs()).abs() / g2.max_abs() < 0.005);
    }

    #[test]
    fn second_order_convergence_at_domain_center() {
        let u = |n: usize| center_value(&poisson9_fd_solve(&[1.0; 9], n).unwrap());
        let (u1, u2, u3) = (u(31), u(63), u(127));
        let ratio = (u1 - u2) / (u2 - u3);
        assert!((3.0..5.5).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn xy_symmetric_pattern_gives_symmetric_solution() {
        // Pattern symmetric under x <-> y: cell (row, col) <-> (2-col, 2-row)
        // in the row-major-from-top-left indexing.
        let mut k = [1.0; 9];
        k[0] = 2.0; // top-left
        k[8] = 2.0; // bottom-right (its mirror)
        k[4] = 3.0; // center (self-mirror)
        let g = poisson9_fd_solve(&k, 45).unwrap();
        let n = g.shape[0];
        for j in 0..n {
            for i in 0..=j {
                let a = g.at(&[i, j]);
                let b = g.at(&[j, i]);
                assert!((a - b).abs() < 1e-10, "asymmetry at ({i},{j}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn doubling_all_diffusivities_halves_the_solution() {
        let g1 = poisson9_fd_solve(&[1.0; 9], 31).unwrap();
        let g2 = poisson9_fd_solve(&[2.0; 9], 31).unwrap();
        for (a, b) in g1.values.iter().zip(&g2.values) {
            assert!((a - 2.0 * b).abs() < 1e-10);
        }
    }

    #[test]
    fn center_cell_sensitivity_is_negative_in_the_interior() {
        // Raising the center-cell diffusivity lowers the solution; the
        // strongest response sits in the center region.
        use crate::oracles::fd_param_sensitivity;
        let k = [1.0; 9];
        let est = fd_param_sensitivity(
            |p: &[f64]| {
                let arr: [f64; 9] = p.try_into().unwrap();
                poisson9_fd_solve(&arr, 45)
            },
            &k,
            4,
            "k5",
            0.01,
        )
        .unwrap();
        let n = est.field.shape[0];
        let center = est.field.at(&[n / 2, n / 2]);
        assert!(center < 0.0, "center sensitivity {center}");
        let max_abs = est.field.max_abs();
        assert!((center.abs() - max_abs).abs() / max_abs < 0.3);
    }

    #[test]
    fn grid_validation() {
        assert!(poisson9_fd_solve(&[1.0; 9], 30).is_err());
        assert!(poisson9_fd_solve(&[1.0; 9], 29).is_err());
        let mut k = [1.0; 9];
        k[3] = -1.0;
        assert!(poisson9_fd_solve(&k, 31).is_err());
    }
}
