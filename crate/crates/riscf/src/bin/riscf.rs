//! Command-line front end: sweeps, the verification suite and single-scenario
//! phase optimization.
//!
//! Exit status is 0 on success, 1 for configuration errors and 2 when a
//! verification criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use riscf::experiments::{run_sweep_to_dir, verify, ScenarioSpec, SweepSpec, VerifyLevel};
use riscf::optimizer::{multistart, AscentOptions, MultiStartReport, Objective, PhaseProblem};

#[derive(Parser)]
#[command(name = "riscf", version, about = "Rates and phase design for RIS-assisted cell-free massive MIMO")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "RISCF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a parameter sweep and writes CSV and JSON results.
    Simulate {
        /// Sweep description in TOML or JSON.
        #[arg(long)]
        spec: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the sweep seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the Monte-Carlo trial count.
        #[arg(long)]
        mc_trials: Option<u64>,
    },
    /// Runs the verification suite.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        level: Level,
        /// Also writes the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Optimizes the phases of one scenario.
    Optimize {
        /// Scenario overrides in TOML or JSON.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "sum")]
        objective: ObjectiveArg,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
        /// Number of random starts.
        #[arg(long, default_value_t = 4)]
        starts: usize,
        /// Seed of the random starts.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Fast,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Sum,
    Minrate,
}

#[derive(Serialize)]
struct OptimizeOutput {
    objective: &'static str,
    value: f64,
    sum_rate: f64,
    min_rate: f64,
    rates: Vec<f64>,
    theta: Vec<f64>,
    report: MultiStartReport,
}

enum Failure {
    Config(anyhow::Error),
    Acceptance,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Config(e)
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Simulate { spec, out, seed, mc_trials } => {
            let mut sweep = SweepSpec::from_file(&spec).with_context(|| format!("reading {}", spec.display()))?;
            sweep.seed = seed.unwrap_or(sweep.seed);
            sweep.mc_trials = mc_trials.unwrap_or(sweep.mc_trials);
            let rows = run_sweep_to_dir(&sweep, &out).context("running the sweep")?;
            println!("{} rows written to {}", rows.len(), out.display());
        }
        Command::Verify { level, json } => {
            let level = match level {
                Level::Fast => VerifyLevel::Fast,
                Level::Full => VerifyLevel::Full,
            };
            let results = verify(level).context("running the verification suite")?;
            for r in &results {
                let tag = if r.passed { "PASS" } else { "FAIL" };
                println!("{tag} {:<20} {} (threshold: {}, {:.1} s)", r.name, r.measured, r.threshold, r.seconds);
            }
            if let Some(path) = json {
                let f = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                serde_json::to_writer_pretty(f, &results).context("writing the report")?;
            }
            if results.iter().any(|r| !r.passed) {
                return Err(Failure::Acceptance);
            }
        }
        Command::Optimize { scenario, objective, out, starts, seed } => {
            let sc = ScenarioSpec::from_file(&scenario)
                .and_then(|s| s.build())
                .with_context(|| format!("reading {}", scenario.display()))?;
            let (name, obj) = match objective {
                ObjectiveArg::Sum => ("sum", Objective::sum_rate()),
                ObjectiveArg::Minrate => ("minrate", Objective::smoothed_min(sc.config.mu).context("objective")?),
            };
            let problem = PhaseProblem::new(&sc.stats, &sc.hwi, &sc.config).context("building the problem")?;
            let report = multistart(&problem, &obj, &AscentOptions::default(), starts, seed).context("optimizing")?;
            let best = report.best_run();
            let b = problem.breakdown(&best.theta_star).context("evaluating the result")?;
            let output = OptimizeOutput {
                objective: name,
                value: best.final_value,
                sum_rate: b.sum_rate(),
                min_rate: b.min_rate(),
                rates: b.rate.clone(),
                theta: best.theta_star.theta.clone(),
                report: report.clone(),
            };
            let f = std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            serde_json::to_writer_pretty(f, &output).context("writing the result")?;
            println!("{name} objective {:.6}, sum rate {:.6}, min rate {:.6}", output.value, output.sum_rate, output.min_rate);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Acceptance) => {
            eprintln!("verification failed");
            ExitCode::from(2)
        }
    }
}
