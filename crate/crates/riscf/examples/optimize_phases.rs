//! Runs the accelerated gradient ascent on the reference scenario for both
//! objectives and compares with the random-phase average.
//!
//! ```text
//! cargo run --release --example optimize_phases -- [seed]
//! ```

use riscf::optimizer::{multistart, random_phase_average, AscentOptions, Objective, PhaseProblem};
use riscf::scenario::reference_defaults;

fn main() -> riscf::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let defaults = reference_defaults();
    let stats = defaults.statistics(seed)?;
    let problem = PhaseProblem::new(&stats, &defaults.hwi, &defaults.config)?;
    let opts = AscentOptions::default();

    for (name, obj) in [("sum rate", Objective::sum_rate()), ("smoothed min", Objective::smoothed_min(defaults.config.mu)?)] {
        let report = multistart(&problem, &obj, &opts, 4, seed)?;
        let random = random_phase_average(&problem, &obj, 100, seed)?;
        println!("{name}: random-phase average {random:.4}");
        for (i, run) in report.runs.iter().enumerate() {
            println!(
                "  start {i}: {:.4} -> {:.4} in {} iterations, converged {}",
                run.initial_value, run.final_value, run.iterations, run.converged
            );
        }
        let b = problem.breakdown(&report.best_run().theta_star)?;
        let rates: Vec<String> = b.rate.iter().map(|r| format!("{r:.3}")).collect();
        println!("  best user rates [{}]", rates.join(", "));
    }
    Ok(())
}
