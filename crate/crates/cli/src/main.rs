use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sapinn_cli::config::{ExperimentConfig, ProblemName};
use sapinn_cli::{oracle_cmd, runner, sweep};
use sapinn_core::network::Network;
use sapinn_core::optim::TrainStatus;

/// Physics-informed training with parameter-sensitivity regularization.
#[derive(Parser)]
#[command(name = "sapinn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train per a JSON config and write the result bundle.
    Run {
        config: PathBuf,
    },
    /// Write reference-solution CSVs for a problem.
    Oracle {
        problem: String,
        /// Output directory (default: oracle_out/<problem>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Solver resolution where applicable.
        #[arg(long)]
        grid_n: Option<usize>,
    },
    /// Re-run the loss sweeps of a config against a saved checkpoint.
    Sweep {
        checkpoint: PathBuf,
        config: PathBuf,
    },
    /// Per-iteration cost vs. number of sensitivity parameters.
    Timing {
        config: PathBuf,
        /// Sensitivity-parameter counts to measure.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 4, 9])]
        counts: Vec<usize>,
    },
}

fn parse_problem(name: &str) -> Result<ProblemName> {
    Ok(match name {
        "adv_diff" => ProblemName::AdvDiff,
        "poisson9" => ProblemName::Poisson9,
        "twophase1d" => ProblemName::Twophase1d,
        "twophase2d" => ProblemName::Twophase2d,
        other => anyhow::bail!("unknown problem `{other}`"),
    })
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    ExperimentConfig::from_json(&text).context("parsing config")
}

fn main() -> ExitCode {
    match run_cli() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run_cli() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = load_config(&config)?;
            let bundle = runner::run(&cfg).context("running experiment")?;
            println!("bundle written to {}", bundle.dir.display());
            for p in [&bundle.config, &bundle.checkpoint, &bundle.trace, &bundle.metrics] {
                println!("  {}", p.display());
            }
            for p in bundle.fields.iter().chain(&bundle.sweeps) {
                println!("  {}", p.display());
            }
            if bundle.train_status == TrainStatus::Diverged {
                eprintln!("training diverged; bundle holds the partial trace");
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { problem, out, grid_n } => {
            let problem = parse_problem(&problem)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(format!("oracle_out/{}", problem.as_str())));
            std::fs::create_dir_all(&dir)?;
            for (name, csv) in oracle_cmd::oracle_csvs(problem, grid_n)? {
                let path = dir.join(name);
                std::fs::write(&path, csv)?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { checkpoint, config } => {
            let cfg = load_config(&config)?;
            let problem = cfg.build_problem()?;
            let bytes = std::fs::read(&checkpoint)
                .with_context(|| format!("reading checkpoint {}", checkpoint.display()))?;
            let net = Network::load(&bytes).context("loading checkpoint")?;
            let data = sweep::compute_sweeps(&cfg, &problem, &net)?;
            let dir = runner::output_dir(&cfg).join("sweeps");
            std::fs::create_dir_all(&dir)?;
            for (name, csv) in sweep::sweep_csvs(&data) {
                let path = dir.join(name);
                std::fs::write(&path, csv)?;
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Timing { config, counts } => {
            let cfg = load_config(&config)?;
            let rows = sweep::timing_study(&cfg, &counts)?;
            let dir = runner::output_dir(&cfg);
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("timing.csv");
            std::fs::write(&path, sweep::timing_csv(&rows))?;
            for (m, s) in &rows {
                println!("m={m}: {s:.4e} s/iteration");
            }
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
