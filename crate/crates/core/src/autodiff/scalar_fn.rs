//! Scalar primitives lifted through truncated Taylor polynomials.
//!
//! Composition with a third-order jet needs the function value and four
//! derivatives: three for the forward truncation and a fourth for the reverse
//! pass through the composition node.

/// Smooth (or piecewise-smooth) scalar functions available to tape programs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarFn {
    Tanh,
    /// 1/z.
    Recip,
    Exp,
    /// exp(z) - 1, numerically stable near 0.
    Expm1,
    /// Clamp to [0, 1]; derivative 1 inside the interval, 0 outside.
    Clamp01,
    /// Derivative of `Clamp01` as a function in its own right (an indicator).
    Clamp01Grad,
}

impl ScalarFn {
    /// Value and derivatives f, f', f'', f''', f'''' at `z`.
    pub fn derivs(self, z: f64) -> [f64; 5] {
        match self {
            ScalarFn::Tanh => {
                let t = z.tanh();
                let s = 1.0 - t * t;
                [
                    t,
                    s,
                    -2.0 * t * s,
                    -2.0 * s * (s - 2.0 * t * t),
                    8.0 * t * s * (2.0 * s - t * t),
                ]
            }
            ScalarFn::Recip => {
                let r = 1.0 / z;
                let r2 = r * r;
                [r, -r2, 2.0 * r2 * r, -6.0 * r2 * r2, 24.0 * r2 * r2 * r]
            }
            ScalarFn::Exp => {
                let e = z.exp();
                [e, e, e, e, e]
            }
            ScalarFn::Expm1 => {
                let e = z.exp();
                [z.exp_m1(), e, e, e, e]
            }
            ScalarFn::Clamp01 => {
                let inside = (0.0..=1.0).contains(&z);
                [z.clamp(0.0, 1.0), if inside { 1.0 } else { 0.0 }, 0.0, 0.0, 0.0]
            }
            ScalarFn::Clamp01Grad => {
                let inside = (0.0..=1.0).contains(&z);
                [if inside { 1.0 } else { 0.0 }, 0.0, 0.0, 0.0, 0.0]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn central(f: impl Fn(f64) -> f64, z: f64, h: f64) -> f64 {
        (f(z + h) - f(z - h)) / (2.0 * h)
    }

    #[test]
    fn derivative_chains_match_finite_differences() {
        let h = 1e-5;
        for &z in &[-1.3, -0.4, 0.2, 0.9, 1.7] {
            for &(f, lo) in &[
                (ScalarFn::Tanh, f64::NEG_INFINITY),
                (ScalarFn::Recip, 0.05),
                (ScalarFn::Exp, f64::NEG_INFINITY),
                (ScalarFn::Expm1, f64::NEG_INFINITY),
            ] {
                if z <= lo {
                    continue;
                }
                let d = f.derivs(z);
                for k in 0..4 {
                    let fd = central(|x| f.derivs(x)[k], z, h);
                    let scale = d[k + 1].abs().max(1.0);
                    assert!(
                        (fd - d[k + 1]).abs() <= 1e-6 * scale,
                        "{:?} order {} at {}: fd {} vs exact {}",
                        f,
                        k + 1,
                        z,
                        fd,
                        d[k + 1]
                    );
                }
            }
        }
    }

    #[test]
    fn tanh_odd_function_values_at_zero() {
        let d = ScalarFn::Tanh.derivs(0.0);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 1.0);
        assert_eq!(d[2], 0.0);
        assert_eq!(d[3], -2.0);
        assert_eq!(d[4], 0.0);
    }

    #[test]
    fn clamp_acts_as_identity_inside() {
        assert_eq!(ScalarFn::Clamp01.derivs(0.5), [0.5, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(ScalarFn::Clamp01.derivs(-0.5)[0], 0.0);
        assert_eq!(ScalarFn::Clamp01.derivs(1.5)[0], 1.0);
        assert_eq!(ScalarFn::Clamp01.derivs(2.0)[1], 0.0);
        assert_eq!(ScalarFn::Clamp01Grad.derivs(0.3)[0], 1.0);
        assert_eq!(ScalarFn::Clamp01Grad.derivs(1.2)[0], 0.0);
    }
}
