//! Oracle dumps: reference solutions written as CSV without touching the
//! network stack.

use sapinn_core::error::{CoreError, Result};
use sapinn_core::oracles::{
    adv_diff_exact, fd_param_sensitivity, poisson9_fd_solve, twophase1d_fd_solve,
    twophase1d_front, TwoPhaseFdConfig,
};

use crate::config::ProblemName;

/// Reference CSVs for one problem. `grid_n` controls the solver resolution
/// where applicable.
pub fn oracle_csvs(problem: ProblemName, grid_n: Option<usize>) -> Result<Vec<(String, String)>> {
    match problem {
        ProblemName::AdvDiff => {
            let n = grid_n.unwrap_or(201);
            let mut csv = String::from("x,u,du_deps\n");
            for i in 0..n {
                let x = i as f64 / (n - 1) as f64;
                let (u, du) = adv_diff_exact(x, 0.1)?;
                csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", x, u, du));
            }
            Ok(vec![("adv_diff_exact.csv".into(), csv)])
        }
        ProblemName::Poisson9 => {
            let n = grid_n.unwrap_or(127);
            let k = [1.0; 9];
            let field = poisson9_fd_solve(&k, n)?;
            let mut out = vec![("poisson9_fd.csv".to_string(), field.to_csv("u"))];
            for i in 0..9 {
                let name = format!("k{}", i + 1);
                let est = fd_param_sensitivity(
                    |p: &[f64]| {
                        let arr: [f64; 9] = p.try_into().unwrap();
                        poisson9_fd_solve(&arr, n)
                    },
                    &k,
                    i,
                    &name,
                    0.01,
                )?;
                out.push((format!("poisson9_fd_sens_{}.csv", name), est.field.to_csv("du")));
            }
            Ok(out)
        }
        ProblemName::Twophase1d => {
            let cells = grid_n.unwrap_or(2000);
            let times: Vec<f64> = (1..=10).map(|i| i as f64 * 0.05).collect();
            let sol = twophase1d_fd_solve(&TwoPhaseFdConfig { cells, ..TwoPhaseFdConfig::default() }, &times)?;
            let mut front = String::from("t,x_front_fd,x_front_exact,dxf_dk\n");
            for (ti, &t) in sol.times().iter().enumerate() {
                let exact = twophase1d_front(t, 1.0)?;
                front.push_str(&format!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    t,
                    sol.front_position(ti),
                    exact.position,
                    exact.dposition_dk
                ));
            }
            Ok(vec![
                ("twophase1d_front.csv".into(), front),
                ("twophase1d_fd_pressure.csv".into(), sol.pressure.to_csv("p")),
                ("twophase1d_fd_fraction.csv".into(), sol.fraction.to_csv("c")),
            ])
        }
        ProblemName::Twophase2d => Err(CoreError::Oracle(
            "no quantitative reference solver exists for the 2D race-tracking case".into(),
        )),
    }
}
