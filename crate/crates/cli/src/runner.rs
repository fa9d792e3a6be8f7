//! Experiment orchestration: build the problem, sample collocation points,
//! train (Adam warm-up with optional adaptive refinement, then quasi-Newton),
//! evaluate against the oracles, and write the result bundle.

use std::path::{Path, PathBuf};
use std::time::Instant;

use sapinn_core::error::{CoreError, Result};
use sapinn_core::losses::{total_loss_with_gradient, LossPlan, LossWeights, Mode};
use sapinn_core::network::{Activation, Network, NetworkSpec};
use sapinn_core::optim::{
    minimize_adam, minimize_quasi_newton, Objective, ObjectiveEval, Phase, TrainStatus,
    TrainingTrace,
};
use sapinn_core::problems::{
    adaptive_extend, sample, CollocationSet, ProblemSpec, SamplingStrategy,
};

use crate::config::ExperimentConfig;
use crate::metrics;
use crate::sweep;

/// Objective adapter: flat weights in, total loss + gradient + term values out.
pub struct TrainingObjective<'a> {
    work: Network,
    problem: &'a ProblemSpec,
    points: &'a CollocationSet,
    weights: &'a LossWeights,
    mode: Mode,
    labels: Vec<String>,
}

impl<'a> TrainingObjective<'a> {
    pub fn new(
        net: &Network,
        problem: &'a ProblemSpec,
        points: &'a CollocationSet,
        weights: &'a LossWeights,
        mode: Mode,
    ) -> Result<Self> {
        let plan = LossPlan::new(problem, mode, weights, points)?;
        Ok(TrainingObjective {
            work: net.clone(),
            problem,
            points,
            weights,
            mode,
            labels: plan.term_labels(),
        })
    }
}

impl Objective for TrainingObjective<'_> {
    fn eval(&mut self, x: &[f64]) -> ObjectiveEval {
        self.work.set_from_flat(x).expect("weight vector length");
        match total_loss_with_gradient(&self.work, self.problem, self.points, self.weights, self.mode)
        {
            Ok((breakdown, grad)) => ObjectiveEval {
                value: breakdown.total,
                grad: grad.0,
                terms: breakdown.term_values(),
            },
            Err(_) => ObjectiveEval {
                value: f64::NAN,
                grad: vec![f64::NAN; x.len()],
                terms: vec![f64::NAN; self.labels.len()],
            },
        }
    }

    fn term_names(&self) -> Vec<String> {
        self.labels.clone()
    }
}

pub struct TrainOutcome {
    pub network: Network,
    pub trace: TrainingTrace,
    pub points: CollocationSet,
    pub adam_seconds: f64,
    pub quasi_newton_seconds: f64,
}

/// Build the network for a problem per the config.
pub fn build_network(cfg: &ExperimentConfig, problem: &ProblemSpec) -> Result<Network> {
    let mut net = Network::init(NetworkSpec {
        input_layout: problem.layout.clone(),
        hidden_layers: cfg.network.hidden_layers,
        hidden_width: cfg.network.hidden_width,
        output_dim: problem.output_dim,
        activation: Activation::Tanh,
        init_seed: cfg.network.init_seed,
    })?;
    if let Some(w) = problem.wrapper {
        net = net.with_wrapper(w);
    }
    Ok(net)
}

/// Adam warm-up (interleaved with adaptive refinement when configured)
/// followed by quasi-Newton refinement.
pub fn train(cfg: &ExperimentConfig, problem: &ProblemSpec) -> Result<TrainOutcome> {
    let parametric = cfg.mode == Mode::Parametric;
    let strategy = cfg.strategy()?;
    let mut net = build_network(cfg, problem)?;
    let mut trace = TrainingTrace::default();

    // Adaptive sampling grows the set between Adam stages; other strategies
    // sample once up front.
    let (mut points, adaptive) = match &strategy {
        SamplingStrategy::AdaptiveResidual(a) => {
            let mut counts = cfg.counts();
            counts.interior = a.start;
            let set = sample(problem, &SamplingStrategy::LatinHypercube, counts, cfg.seed, parametric, None)?;
            (set, Some(*a))
        }
        other => (
            sample(problem, other, cfg.counts(), cfg.seed, parametric, None)?,
            None,
        ),
    };

    let adam_start = Instant::now();
    let mut x = net.to_flat();
    let mut remaining = cfg.optimizer.adam.iterations;
    let mut round = 0u64;
    while remaining > 0 {
        let chunk = match adaptive {
            Some(a) if points.interior.len() < a.max_total => a.every.min(remaining),
            _ => remaining,
        };
        let mut stage_cfg = cfg.optimizer.adam;
        stage_cfg.iterations = chunk;
        let mut objective = TrainingObjective::new(&net, problem, &points, &cfg.loss_weights, cfg.mode)?;
        let (x_new, stage_trace) = minimize_adam(&x, &mut objective, &stage_cfg, trace.last_iteration());
        x = x_new;
        let diverged = stage_trace.status == Some(TrainStatus::Diverged);
        trace.extend(stage_trace);
        net.set_from_flat(&x)?;
        if diverged {
            return Ok(TrainOutcome {
                network: net,
                trace,
                points,
                adam_seconds: adam_start.elapsed().as_secs_f64(),
                quasi_newton_seconds: 0.0,
            });
        }
        remaining -= chunk;
        if let Some(a) = adaptive {
            if remaining > 0 && points.interior.len() < a.max_total {
                let add = a.add.min(a.max_total - points.interior.len());
                adaptive_extend(problem, &net, &mut points, add, a.pool_factor, cfg.seed ^ (0xada1 + round))?;
                round += 1;
            }
        }
    }
    let adam_seconds = adam_start.elapsed().as_secs_f64();

    let qn_start = Instant::now();
    let mut objective = TrainingObjective::new(&net, problem, &points, &cfg.loss_weights, cfg.mode)?;
    let (x_final, qn_trace) =
        minimize_quasi_newton(&x, &mut objective, &cfg.optimizer.quasi_newton, trace.last_iteration());
    trace.extend(qn_trace);
    net.set_from_flat(&x_final)?;
    let quasi_newton_seconds = qn_start.elapsed().as_secs_f64();

    Ok(TrainOutcome { network: net, trace, points, adam_seconds, quasi_newton_seconds })
}

/// Everything `run` wrote, with absolute paths.
pub struct ResultBundle {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub checkpoint: PathBuf,
    pub trace: PathBuf,
    pub metrics: PathBuf,
    pub fields: Vec<PathBuf>,
    pub sweeps: Vec<PathBuf>,
    pub train_status: TrainStatus,
}

/// Resolve the output directory against `SAPINN_OUT_ROOT` when relative.
pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    let dir = PathBuf::from(&cfg.output_dir);
    if dir.is_absolute() {
        return dir;
    }
    match std::env::var_os("SAPINN_OUT_ROOT") {
        Some(root) => PathBuf::from(root).join(dir),
        None => dir,
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CoreError::Oracle(format!("create {}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes)
        .map_err(|e| CoreError::Oracle(format!("write {}: {e}", path.display())))
}

fn trace_csv(trace: &TrainingTrace) -> String {
    let mut out = String::from("iteration,phase,loss,grad_norm,wall_time_s");
    for name in &trace.term_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for r in &trace.records {
        let phase = match r.phase {
            Phase::Adam => "adam",
            Phase::QuasiNewton => "quasi_newton",
        };
        out.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.6}",
            r.iteration, phase, r.loss, r.grad_norm, r.wall_time_s
        ));
        for t in &r.terms {
            out.push_str(&format!(",{:.16e}", t));
        }
        out.push('\n');
    }
    out
}

/// Train per the config and emit the full result bundle.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let dir = output_dir(cfg);

    let total_start = Instant::now();
    let outcome = train(cfg, &problem)?;
    let train_status = outcome.trace.status.unwrap_or(TrainStatus::Completed);

    let config_path = dir.join("config.json");
    write(&config_path, cfg.canonical_json().as_bytes())?;
    let checkpoint_path = dir.join("checkpoint.json");
    write(&checkpoint_path, &outcome.network.save())?;
    let trace_path = dir.join("trace.csv");
    write(&trace_path, trace_csv(&outcome.trace).as_bytes())?;

    let mut fields = Vec::new();
    for (name, csv) in metrics::field_csvs(cfg, &problem, &outcome.network)? {
        let path = dir.join("fields").join(name);
        write(&path, csv.as_bytes())?;
        fields.push(path);
    }

    let sweep_data = sweep::compute_sweeps(cfg, &problem, &outcome.network)?;
    let mut sweeps = Vec::new();
    for (name, csv) in sweep::sweep_csvs(&sweep_data) {
        let path = dir.join("sweeps").join(name);
        write(&path, csv.as_bytes())?;
        sweeps.push(path);
    }

    let metrics_doc = metrics::build_metrics(
        cfg,
        &problem,
        &outcome,
        &sweep_data,
        total_start.elapsed().as_secs_f64(),
    )?;
    let metrics_path = dir.join("metrics.json");
    write(&metrics_path, serde_json::to_string_pretty(&metrics_doc).unwrap().as_bytes())?;

    Ok(ResultBundle {
        dir,
        config: config_path,
        checkpoint: checkpoint_path,
        trace: trace_path,
        metrics: metrics_path,
        fields,
        sweeps,
        train_status,
    })
}
