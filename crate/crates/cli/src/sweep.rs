//! Post-training parameter sweeps of the interior residual term, and the
//! sensitivity-count timing study.

use std::time::Instant;

use sapinn_core::error::{CoreError, Result};
use sapinn_core::losses::Mode;
use sapinn_core::network::Network;
use sapinn_core::optim::minimize_adam;
use sapinn_core::problems::{residual_norms, sample, PointBlock, ProblemSpec, SamplingStrategy};

use crate::config::{ContourSection, ExperimentConfig, ProblemName, SweepSection};
use crate::runner::{build_network, TrainingObjective};

/// Computed sweep rows, shared between the CSV dump and the metrics summary.
pub struct SweepData {
    pub one_d: Vec<(SweepSection, Vec<(f64, f64)>)>,
    pub contour: Option<(ContourSection, Vec<(f64, f64, f64)>)>,
}

/// Fixed interior set used for sweeps: the configured strategy, except that
/// adaptive sampling (which needs a network) falls back to a Latin hypercube
/// of the configured final size.
pub fn sweep_points(cfg: &ExperimentConfig, problem: &ProblemSpec) -> Result<PointBlock> {
    let strategy = match cfg.strategy()? {
        SamplingStrategy::AdaptiveResidual(a) => {
            let mut counts = cfg.counts();
            counts.interior = a.max_total;
            return Ok(sample(problem, &SamplingStrategy::LatinHypercube, counts, cfg.seed, false, None)?.interior);
        }
        s => s,
    };
    Ok(sample(problem, &strategy, cfg.counts(), cfg.seed, false, None)?.interior)
}

/// Mean squared residual norm with one parameter coordinate overridden.
pub fn residual_loss_at(
    problem: &ProblemSpec,
    net: &Network,
    base_points: &PointBlock,
    overrides: &[(usize, f64)],
) -> Result<f64> {
    let mut pts = base_points.clone();
    for row in 0..pts.len() {
        for &(slot, v) in overrides {
            pts.data[row * pts.arity + slot] = v;
        }
    }
    let norms = residual_norms(problem, net, &pts)?;
    Ok(norms.iter().map(|n| n * n).sum::<f64>() / norms.len().max(1) as f64)
}

/// loss_f over a 1D parameter grid (inclusive endpoints).
pub fn sweep_loss(
    problem: &ProblemSpec,
    net: &Network,
    points: &PointBlock,
    param: &str,
    lo: f64,
    hi: f64,
    count: usize,
) -> Result<Vec<(f64, f64)>> {
    let idx = problem
        .params
        .index_of(param)
        .ok_or_else(|| CoreError::UnknownParameter(param.to_string()))?;
    let slot = problem
        .param_slot(idx)
        .ok_or_else(|| CoreError::UnknownParameter(param.to_string()))?;
    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let v = lo + (hi - lo) * i as f64 / (count - 1).max(1) as f64;
        let loss = residual_loss_at(problem, net, points, &[(slot, v)])?;
        rows.push((v, loss));
    }
    Ok(rows)
}

/// loss_f over a 2D parameter grid (count x count rows).
pub fn sweep_loss_contour(
    problem: &ProblemSpec,
    net: &Network,
    points: &PointBlock,
    params: (&str, &str),
    lo: f64,
    hi: f64,
    count: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    let slot_of = |name: &str| -> Result<usize> {
        let idx = problem
            .params
            .index_of(name)
            .ok_or_else(|| CoreError::UnknownParameter(name.to_string()))?;
        problem
            .param_slot(idx)
            .ok_or_else(|| CoreError::UnknownParameter(name.to_string()))
    };
    let (sx, sy) = (slot_of(params.0)?, slot_of(params.1)?);
    let mut rows = Vec::with_capacity(count * count);
    for j in 0..count {
        let vy = lo + (hi - lo) * j as f64 / (count - 1).max(1) as f64;
        for i in 0..count {
            let vx = lo + (hi - lo) * i as f64 / (count - 1).max(1) as f64;
            let loss = residual_loss_at(problem, net, points, &[(sx, vx), (sy, vy)])?;
            rows.push((vx, vy, loss));
        }
    }
    Ok(rows)
}

/// Evaluate every sweep requested by the config's evaluation section.
pub fn compute_sweeps(
    cfg: &ExperimentConfig,
    problem: &ProblemSpec,
    net: &Network,
) -> Result<SweepData> {
    let points = sweep_points(cfg, problem)?;
    let mut one_d = Vec::new();
    for sw in &cfg.evaluation.sweeps {
        let rows = sweep_loss(problem, net, &points, &sw.param, sw.lo, sw.hi, sw.count)?;
        one_d.push((sw.clone(), rows));
    }
    let contour = match &cfg.evaluation.contour {
        Some(c) => {
            let rows = sweep_loss_contour(problem, net, &points, (&c.x, &c.y), c.lo, c.hi, c.count)?;
            Some((c.clone(), rows))
        }
        None => None,
    };
    Ok(SweepData { one_d, contour })
}

/// CSV renderings of computed sweeps.
pub fn sweep_csvs(data: &SweepData) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (sw, rows) in &data.one_d {
        let mut csv = format!("{},loss_f\n", sw.param);
        for (v, l) in rows {
            csv.push_str(&format!("{:.16e},{:.16e}\n", v, l));
        }
        out.push((format!("loss_{}.csv", sw.param), csv));
    }
    if let Some((c, rows)) = &data.contour {
        let mut csv = format!("{},{},loss_f\n", c.x, c.y);
        for (vx, vy, l) in rows {
            csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", vx, vy, l));
        }
        out.push((format!("contour_{}_{}.csv", c.x, c.y), csv));
    }
    out
}

/// Median per-iteration training time as the number of sensitivity
/// parameters grows. Every run uses identical iteration counts and the same
/// collocation set; only the sensitivity set changes.
pub fn timing_study(cfg: &ExperimentConfig, ms: &[usize]) -> Result<Vec<(usize, f64)>> {
    if cfg.problem != ProblemName::Poisson9 {
        return Err(CoreError::InvalidProblem(
            "the timing study is defined for the nine-parameter diffusion problem".into(),
        ));
    }
    let base_problem = cfg.build_problem()?;
    let total_params = base_problem.params.defs.len();
    let points = sample(
        &base_problem,
        &SamplingStrategy::LatinHypercube,
        cfg.counts(),
        cfg.seed,
        false,
        None,
    )?;
    let mut rows = Vec::with_capacity(ms.len());
    for &m in ms {
        if m == 0 || m > total_params {
            return Err(CoreError::InvalidProblem(format!(
                "sensitivity count {m} outside 1..={total_params}"
            )));
        }
        let mut problem = base_problem.clone();
        for (i, def) in problem.params.defs.iter_mut().enumerate() {
            def.sensitive = i < m;
        }
        let net = build_network(cfg, &problem)?;
        let mut objective =
            TrainingObjective::new(&net, &problem, &points, &cfg.loss_weights, Mode::Sa)?;
        let t0 = Instant::now();
        let (_, trace) = minimize_adam(&net.to_flat(), &mut objective, &cfg.optimizer.adam, 0);
        let _ = t0;
        let mut deltas: Vec<f64> = trace
            .records
            .windows(2)
            .map(|w| w[1].wall_time_s - w[0].wall_time_s)
            .collect();
        deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if deltas.is_empty() { 0.0 } else { deltas[deltas.len() / 2] };
        rows.push((m, median));
    }
    Ok(rows)
}

pub fn timing_csv(rows: &[(usize, f64)]) -> String {
    let mut csv = String::from("sensitivity_parameters,median_iteration_seconds\n");
    for (m, s) in rows {
        csv.push_str(&format!("{},{:.6e}\n", m, s));
    }
    csv
}
