//! Runs a small rate-versus-surface-size sweep defined in code and prints the
//! CSV to standard output.
//!
//! ```text
//! cargo run --release --example parameter_sweep
//! ```

use riscf::experiments::{run_sweep, write_csv, PhaseDesign, ScenarioSpec, SweepSpec, VariantSpec, Figure};
use riscf::optimizer::AscentOptions;

fn main() -> riscf::Result<()> {
    let spec = SweepSpec {
        figure: Figure::RateVsR,
        grid: vec![16.0, 36.0, 64.0],
        variants: vec![
            VariantSpec::new(PhaseDesign::OptimizedSum),
            VariantSpec::new(PhaseDesign::RandomPhase),
            VariantSpec::new(PhaseDesign::RisFree),
            VariantSpec { hwi: false, ..VariantSpec::new(PhaseDesign::OptimizedSum) },
        ],
        seed: 1,
        mc_trials: 0,
        starts: 2,
        random_draws: 20,
        scenario: ScenarioSpec { l: Some(3), s: Some(2), k: Some(3), ..Default::default() },
        optimizer: AscentOptions::default(),
    };
    let rows = run_sweep(&spec)?;
    write_csv(&rows, std::io::stdout().lock())
}
