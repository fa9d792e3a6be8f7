//! Closed-form solution of the steady advection-diffusion benchmark.

use crate::error::{CoreError, Result};

/// Smallest diffusion coefficient the stable formulation accepts.
pub const EPS_FLOOR: f64 = 0.02;

/// u(x) = x + A + B e^{x/eps} with B = 1/(e^{1/eps} - 1), A = 1 - B, so that
/// u(0) = 1 and u(1) = 3, together with du/deps.
///
/// Formulated in terms of w = e^{-1/eps} and e^{(x-1)/eps} so nothing
/// overflows for eps down to the stability floor.
pub fn adv_diff_exact(x: f64, eps: f64) -> Result<(f64, f64)> {
    if eps < EPS_FLOOR {
        return Err(CoreError::Oracle(format!(
            "eps = {eps} below stability floor {EPS_FLOOR}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(CoreError::Oracle(format!("x = {x} outside [0, 1]")));
    }
    let w = (-1.0 / eps).exp();
    let om = 1.0 - w;
    let b = w / om;
    let e_x = ((x - 1.0) / eps).exp(); // B e^{x/eps} = e_x / om
    let u = x + 1.0 - b + e_x / om;
    // du/deps = (1/eps^2) [ -w/(1-w)^2 + e_x/(1-w)^2 - x e_x/(1-w) ].
    let du = (-w / (om * om) + e_x / (om * om) - x * e_x / om) / (eps * eps);
    Ok((u, du))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_values_hold_for_any_eps() {
        for eps in [0.02, 0.05, 0.1, 0.3, 1.0] {
            let (u0, d0) = adv_diff_exact(0.0, eps).unwrap();
            let (u1, d1) = adv_diff_exact(1.0, eps).unwrap();
            assert!((u0 - 1.0).abs() < 1e-12, "u(0) = {u0} at eps {eps}");
            assert!((u1 - 3.0).abs() < 1e-12, "u(1) = {u1} at eps {eps}");
            // Pinned boundaries are eps-independent.
            assert!(d0.abs() < 1e-9);
            assert!(d1.abs() < 1e-9);
        }
    }

    #[test]
    fn derivative_matches_central_difference_in_eps() {
        let h = 1e-5;
        for x in [0.1, 0.5, 0.85, 0.95] {
            for eps in [0.08, 0.1, 0.12] {
                let (_, du) = adv_diff_exact(x, eps).unwrap();
                let (up, _) = adv_diff_exact(x, eps + h).unwrap();
                let (um, _) = adv_diff_exact(x, eps - h).unwrap();
                let fd = (up - um) / (2.0 * h);
                let tol = 1e-6 * du.abs().max(1.0);
                assert!((du - fd).abs() < tol, "x={x} eps={eps}: {du} vs {fd}");
            }
        }
    }

    #[test]
    fn matches_naive_formula_where_it_is_stable() {
        for x in [0.0f64, 0.4, 0.9, 1.0] {
            let eps = 0.15f64;
            let b = 1.0 / (1.0 / eps).exp_m1();
            let naive = x + 1.0 - b + b * (x / eps).exp();
            let (u, _) = adv_diff_exact(x, eps).unwrap();
            assert!((u - naive).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_eps_below_floor() {
        assert!(adv_diff_exact(0.5, 0.01).is_err());
    }
}
