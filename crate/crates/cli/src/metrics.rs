//! Post-training evaluation: solution/sensitivity field dumps and error
//! metrics against the independent oracles.

use serde_json::{json, Value};

use sapinn_core::autodiff::{eval_jets, DerivativeRequest, Signature};
use sapinn_core::error::Result;
use sapinn_core::losses::Mode;
use sapinn_core::network::Network;
use sapinn_core::optim::TrainStatus;
use sapinn_core::oracles::{
    adv_diff_exact, fd_param_sensitivity, half_level_crossing, poisson9_fd_solve,
    twophase1d_fill_time, twophase1d_front,
};
use sapinn_core::problems::ProblemSpec;

use crate::config::{ExperimentConfig, ProblemName};
use crate::runner::TrainOutcome;
use crate::sweep::SweepData;

/// (sensitive param index, name, slot) triples.
fn sensitive_params(problem: &ProblemSpec) -> Vec<(usize, String, usize)> {
    problem
        .params
        .sensitive_indices()
        .into_iter()
        .map(|i| {
            (
                i,
                problem.params.defs[i].name.clone(),
                problem.param_slot(i).expect("sensitive param slot"),
            )
        })
        .collect()
}

fn nominal_coords(problem: &ProblemSpec) -> Vec<f64> {
    let mut coords = vec![0.0; problem.layout.arity()];
    for (slot, v) in problem.nominal_param_coords() {
        coords[slot] = v;
    }
    coords
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn rel_l2(pred: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = pred.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    (num / den.max(1e-300)).sqrt()
}

/// Sensitivity request covering all flagged parameters at first order.
fn sens_request(problem: &ProblemSpec) -> Result<DerivativeRequest> {
    let mut req = DerivativeRequest::new(problem.layout.arity());
    for (_, _, slot) in sensitive_params(problem) {
        req = req.pure(slot, 1)?;
    }
    Ok(req)
}

/// Solution and per-parameter sensitivity fields on the configured grid.
pub fn field_csvs(
    cfg: &ExperimentConfig,
    problem: &ProblemSpec,
    net: &Network,
) -> Result<Vec<(String, String)>> {
    let sens = sensitive_params(problem);
    let req = sens_request(problem)?;
    let arity = problem.layout.arity();
    let base = nominal_coords(problem);

    // Enumerate grid coordinates: spatial axes (per config grid) and times.
    let space_slots: Vec<usize> =
        (0..problem.spatial_dim).map(|a| problem.layout.space_slot(a).unwrap()).collect();
    let axes: Vec<Vec<f64>> = (0..problem.spatial_dim)
        .map(|a| {
            let (lo, hi) = problem.domain.bounds[a];
            linspace(lo, hi, *cfg.evaluation.grid.get(a).unwrap_or(&101))
        })
        .collect();
    let times: Vec<f64> = if problem.time_dependent {
        cfg.evaluation.times.clone()
    } else {
        vec![f64::NAN]
    };

    let mut points: Vec<Vec<f64>> = Vec::new();
    for &t in &times {
        let mut idx = vec![0usize; problem.spatial_dim];
        loop {
            let mut coords = base.clone();
            for (a, &i) in idx.iter().enumerate() {
                coords[space_slots[a]] = axes[a][i];
            }
            if problem.time_dependent {
                coords[problem.layout.time_slot().unwrap()] = t;
            }
            points.push(coords);
            // Odometer increment over the spatial axes.
            let mut a = 0;
            loop {
                if a == idx.len() {
                    break;
                }
                idx[a] += 1;
                if idx[a] < axes[a].len() {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == idx.len() {
                break;
            }
        }
    }

    let mut header = String::new();
    for a in 0..problem.spatial_dim {
        header.push_str(["x", "y"][a]);
        header.push(',');
    }
    if problem.time_dependent {
        header.push_str("t,");
    }

    let out_names: Vec<&str> = if problem.output_dim == 2 { vec!["p", "c"] } else { vec!["u"] };

    let mut solution = header.clone();
    solution.push_str(&out_names.join(","));
    solution.push('\n');
    let mut sens_csvs: Vec<String> = sens
        .iter()
        .map(|(_, name, _)| {
            let cols: Vec<String> =
                out_names.iter().map(|o| format!("d{}_d{}", o, name)).collect();
            format!("{}{}\n", header, cols.join(","))
        })
        .collect();

    for coords in &points {
        let mut prefix = String::new();
        for &s in &space_slots {
            prefix.push_str(&format!("{:.16e},", coords[s]));
        }
        if problem.time_dependent {
            prefix.push_str(&format!("{:.16e},", coords[problem.layout.time_slot().unwrap()]));
        }
        let jets = eval_jets(net, coords, &req)?;
        solution.push_str(&prefix);
        let vals: Vec<String> = jets.iter().map(|j| format!("{:.16e}", j.value)).collect();
        solution.push_str(&vals.join(","));
        solution.push('\n');
        for (pi, (_, _, slot)) in sens.iter().enumerate() {
            let sig = Signature::single(arity, *slot, 1)?;
            let vals: Vec<String> = jets
                .iter()
                .map(|j| format!("{:.16e}", j.partial(&sig).unwrap_or(0.0)))
                .collect();
            sens_csvs[pi].push_str(&prefix);
            sens_csvs[pi].push_str(&vals.join(","));
            sens_csvs[pi].push('\n');
        }
    }

    let mut out = vec![("solution.csv".to_string(), solution)];
    for ((_, name, _), csv) in sens.iter().zip(sens_csvs) {
        out.push((format!("sens_{}.csv", name), csv));
    }
    Ok(out)
}

/// Problem-specific oracle comparisons.
fn oracle_metrics(cfg: &ExperimentConfig, problem: &ProblemSpec, net: &Network) -> Result<Value> {
    match cfg.problem {
        ProblemName::AdvDiff => {
            let eps = problem.params.value("eps");
            let n = *cfg.evaluation.grid.first().unwrap_or(&201);
            let xs = linspace(0.0, 1.0, n);
            let slot_eps = problem.param_slot(0).unwrap();
            let req = DerivativeRequest::new(2).pure(slot_eps, 1)?;
            let sig = Signature::single(2, slot_eps, 1)?;
            let mut u_net = Vec::with_capacity(n);
            let mut du_net = Vec::with_capacity(n);
            let mut u_ref = Vec::with_capacity(n);
            let mut du_ref = Vec::with_capacity(n);
            for &x in &xs {
                let jet = eval_jets(net, &[x, eps], &req)?.remove(0);
                u_net.push(jet.value);
                du_net.push(jet.partial(&sig).unwrap());
                let (u, du) = adv_diff_exact(x, eps)?;
                u_ref.push(u);
                du_ref.push(du);
            }
            Ok(json!({
                "u_rel_l2": rel_l2(&u_net, &u_ref),
                "du_deps_rel_l2": rel_l2(&du_net, &du_ref),
                "grid_points": n,
            }))
        }
        ProblemName::Poisson9 => {
            let k: Vec<f64> = (0..9).map(|i| problem.params.defs[i].nominal).collect();
            let k9: [f64; 9] = k.clone().try_into().unwrap();
            let fd_n = 127;
            let fd = poisson9_fd_solve(&k9, fd_n)?;
            let mut max_abs_err = 0.0f64;
            let mut coords = nominal_coords(problem);
            let (sx, sy) = (problem.layout.space_slot(0).unwrap(), problem.layout.space_slot(1).unwrap());
            let req = sens_request(problem)?;
            let arity = problem.layout.arity();
            // Network values and sensitivities on the oracle's cell centers.
            let mut net_sens: Vec<Vec<f64>> = vec![Vec::with_capacity(fd_n * fd_n); 9];
            for j in 0..fd_n {
                for i in 0..fd_n {
                    coords[sx] = fd.coord(0, i);
                    coords[sy] = fd.coord(1, j);
                    let jet = eval_jets(net, &coords, &req)?.remove(0);
                    max_abs_err = max_abs_err.max((jet.value - fd.at(&[i, j])).abs());
                    for (pi, (_, _, slot)) in sensitive_params(problem).iter().enumerate() {
                        let sig = Signature::single(arity, *slot, 1)?;
                        net_sens[pi].push(jet.partial(&sig).unwrap());
                    }
                }
            }
            let mut sens_rel = serde_json::Map::new();
            for (pi, (idx, name, _)) in sensitive_params(problem).iter().enumerate() {
                let h = 0.01 * problem.params.defs[*idx].nominal.abs();
                let est = fd_param_sensitivity(
                    |p: &[f64]| {
                        let arr: [f64; 9] = p.try_into().unwrap();
                        poisson9_fd_solve(&arr, fd_n)
                    },
                    &k,
                    *idx,
                    name,
                    h,
                )?;
                sens_rel.insert(name.clone(), json!(rel_l2(&net_sens[pi], &est.field.values)));
            }
            Ok(json!({
                "fd_grid": fd_n,
                "u_max_abs_err": max_abs_err,
                "fd_max": fd.max_abs(),
                "sens_rel_l2": Value::Object(sens_rel),
            }))
        }
        ProblemName::Twophase1d => {
            let k_nom = problem.params.value("k");
            let t_max = problem.domain.t_max.unwrap_or(0.5);
            let nx = *cfg.evaluation.grid.first().unwrap_or(&401);
            let xs = linspace(0.0, 1.0, nx);
            let front_at = |t: f64, k: f64| -> Result<f64> {
                let mut profile = Vec::with_capacity(nx);
                for &x in &xs {
                    let out = net.forward(&[x, t, k])?;
                    profile.push(out[1]);
                }
                Ok(half_level_crossing(&profile, 0.0, 1.0 / (nx - 1) as f64))
            };
            let mut front_rms = serde_json::Map::new();
            for factor in [0.5, 1.0, 1.5] {
                let k = k_nom * factor;
                let t_hi = t_max.min(1.0 / (2.0 * k));
                let ts: Vec<f64> = cfg
                    .evaluation
                    .times
                    .iter()
                    .copied()
                    .filter(|&t| (0.05..=t_hi + 1e-12).contains(&t))
                    .collect();
                let mut sq = 0.0;
                for &t in &ts {
                    let xf = front_at(t, k)?;
                    let truth = twophase1d_front(t, k)?.position;
                    sq += (xf - truth) * (xf - truth);
                }
                let rms = if ts.is_empty() { f64::NAN } else { (sq / ts.len() as f64).sqrt() };
                front_rms.insert(format!("k={}", k), json!(rms));
            }
            // Fill time at x = 0.5 over a k-grid: first time c(0.5, t) >= 0.5.
            let fill_time = |k: f64| -> Result<f64> {
                let ts = linspace(0.0, t_max, 201);
                let mut prev = (0.0, -0.5f64);
                for &t in &ts {
                    let c = net.forward(&[0.5, t, k])?[1] - 0.5;
                    if c >= 0.0 && prev.1 < 0.0 && t > 0.0 {
                        let (t0, c0) = prev;
                        return Ok(t0 + (t - t0) * (-c0) / (c - c0));
                    }
                    prev = (t, c);
                }
                Ok(f64::NAN)
            };
            let mut fill = Vec::new();
            let mut max_rel = 0.0f64;
            for &k in &linspace(0.7 * k_nom, 1.3 * k_nom, 13) {
                let t_net = fill_time(k)?;
                let t_ref = twophase1d_fill_time(0.5, k)?;
                let rel = ((t_net - t_ref) / t_ref).abs();
                max_rel = max_rel.max(rel);
                fill.push(json!({"k": k, "t_net": t_net, "t_ref": t_ref, "rel_err": rel}));
            }
            Ok(json!({
                "front_rms": Value::Object(front_rms),
                "fill_time": fill,
                "fill_time_max_rel_err": max_rel,
            }))
        }
        ProblemName::Twophase2d => {
            let k_nom = problem.params.value("k");
            let inlet_extent = problem.params.value("inlet_extent");
            let strip_height = problem.params.value("strip_height");
            let times = &cfg.evaluation.times;
            // Mean inlet pressure over the inlet segment and the requested
            // times, per permeability ratio.
            let ys = linspace(0.0, inlet_extent, 11);
            let mut inlet = Vec::new();
            for factor in [0.8, 1.0, 1.2] {
                let k = k_nom * factor;
                let mut acc = 0.0;
                let mut cnt = 0usize;
                for &t in times {
                    for &y in &ys {
                        acc += net.forward(&[0.0, y, t, k])?[0];
                        cnt += 1;
                    }
                }
                inlet.push(json!({"k": k, "mean_inlet_pressure": acc / cnt.max(1) as f64}));
            }
            // Front positions inside the race-track strip vs. the bulk.
            let nx = 201;
            let xs = linspace(0.0, 1.0, nx);
            let front_at_y = |y: f64, t: f64| -> Result<f64> {
                let mut profile = Vec::with_capacity(nx);
                for &x in &xs {
                    profile.push(net.forward(&[x, y, t, k_nom])?[1]);
                }
                Ok(half_level_crossing(&profile, 0.0, 1.0 / (nx - 1) as f64))
            };
            let mut lead = Vec::new();
            for &t in times {
                let strip = front_at_y(strip_height * 0.5, t)?;
                let bulk = front_at_y(0.5, t)?;
                lead.push(json!({"t": t, "strip_front": strip, "bulk_front": bulk}));
            }
            Ok(json!({
                "inlet_pressure": inlet,
                "front_lead": lead,
            }))
        }
    }
}

/// Full metrics document. `timings` is the only non-deterministic section.
pub fn build_metrics(
    cfg: &ExperimentConfig,
    problem: &ProblemSpec,
    outcome: &TrainOutcome,
    sweeps: &SweepData,
    total_seconds: f64,
) -> Result<Value> {
    let trace = &outcome.trace;
    let final_terms: serde_json::Map<String, Value> = trace
        .records
        .last()
        .map(|r| {
            trace
                .term_names
                .iter()
                .zip(&r.terms)
                .map(|(n, v)| (n.clone(), json!(v)))
                .collect()
        })
        .unwrap_or_default();
    let mut deltas: Vec<f64> = trace
        .records
        .windows(2)
        .map(|w| w[1].wall_time_s - w[0].wall_time_s)
        .filter(|d| *d >= 0.0)
        .collect();
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let per_iter_median = if deltas.is_empty() { 0.0 } else { deltas[deltas.len() / 2] };

    let mut sweep_summary = serde_json::Map::new();
    for (section, rows) in &sweeps.one_d {
        let mean = rows.iter().map(|(_, l)| l).sum::<f64>() / rows.len().max(1) as f64;
        let argmin = rows
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .map(|(v, _)| *v)
            .unwrap_or(f64::NAN);
        sweep_summary.insert(
            section.param.clone(),
            json!({"mean_loss_f": mean, "argmin": argmin}),
        );
    }
    let contour_argmin = sweeps.contour.as_ref().map(|(section, rows)| {
        let (vx, vy, _) = rows
            .iter()
            .min_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
            .copied()
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
        json!({"x_param": section.x, "y_param": section.y, "x": vx, "y": vy})
    });

    let status = match trace.status.unwrap_or(TrainStatus::Completed) {
        TrainStatus::Completed => "completed",
        TrainStatus::GradientConverged => "gradient_converged",
        TrainStatus::MaxIterations => "max_iterations",
        TrainStatus::LineSearchStop => "line_search_stop",
        TrainStatus::Diverged => "diverged",
    };
    let healthy = trace.status != Some(TrainStatus::Diverged);

    let oracle = if healthy {
        oracle_metrics(cfg, problem, &outcome.network)?
    } else {
        json!(null)
    };

    Ok(json!({
        "schema": 1,
        "config_hash": cfg.hash(),
        "problem": cfg.problem.as_str(),
        "mode": cfg.mode,
        "train": {
            "status": status,
            "iterations": trace.last_iteration(),
            "final_total": trace.final_loss(),
            "final_terms": Value::Object(final_terms),
            "interior_points": outcome.points.interior.len(),
        },
        "flags": {
            "untrained_sensitivity": cfg.mode != Mode::Sa,
        },
        "oracle": oracle,
        "sweeps": {
            "loss_f": Value::Object(sweep_summary),
            "contour_argmin": contour_argmin,
        },
        "timings": {
            "adam_s": outcome.adam_seconds,
            "quasi_newton_s": outcome.quasi_newton_seconds,
            "total_s": total_seconds,
            "per_iteration_median_s": per_iter_median,
        },
    }))
}
