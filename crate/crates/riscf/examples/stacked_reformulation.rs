//! Builds the stacked statistics, evaluates the rate through them, and
//! compares with the direct closed form. Also prints the split of the signal
//! term into its phase-free and phase-dependent parts.
//!
//! ```text
//! cargo run --release --example stacked_reformulation
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use riscf::channel::{LosStructure, PhaseVector};
use riscf::closedform::ClosedForm;
use riscf::reform::{build_stacked, rate_reform};
use riscf::scenario::reference_defaults;

fn main() -> riscf::Result<()> {
    let defaults = reference_defaults();
    let (config, hwi) = (&defaults.config, &defaults.hwi);
    let stats = defaults.statistics(3)?;
    let los = LosStructure::new(&stats, config)?;
    let theta = PhaseVector::random(config.n_phases(), &mut ChaCha20Rng::seed_from_u64(3));
    let powers = config.powers();

    let direct = ClosedForm::new(&stats, &los, hwi, config)?.breakdown(&theta, hwi, config, &powers)?;
    let stacked = build_stacked(&stats, &los, hwi, config)?;
    let reform = rate_reform(&theta, &stacked, config, &powers)?;
    println!("stacked dimension N = {}, Z̄¹ is {}×{}", stacked.n(), stacked.zbar1.nrows(), stacked.zbar1.ncols());

    let fixed = stacked.tractable_terms();
    let full = stacked.assemble(&stacked.evaluate(&theta)?);
    let phase_part = fixed.signal2(&full);
    println!("{:>4} {:>14} {:>14} {:>12} {:>12}", "user", "rate direct", "rate stacked", "signal1", "signal2");
    for k in 0..config.k {
        println!(
            "{k:>4} {:>14.10} {:>14.10} {:>12.4e} {:>12.4e}",
            direct.rate[k], reform.rate[k], fixed.signal1[k], phase_part[k]
        );
    }
    Ok(())
}
