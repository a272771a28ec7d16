//! Evaluates the closed-form rate of the reference scenario at random phases
//! and prints the four terms of every user.
//!
//! ```text
//! cargo run --release --example closed_form_rate -- [seed]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use riscf::channel::{LosStructure, PhaseVector};
use riscf::closedform::ClosedForm;
use riscf::scenario::reference_defaults;

fn main() -> riscf::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let defaults = reference_defaults();
    let (config, hwi) = (&defaults.config, &defaults.hwi);
    let stats = defaults.statistics(seed)?;
    let los = LosStructure::new(&stats, config)?;
    let theta = PhaseVector::random(config.n_phases(), &mut ChaCha20Rng::seed_from_u64(seed));

    let cf = ClosedForm::new(&stats, &los, hwi, config)?;
    let b = cf.breakdown(&theta, hwi, config, &config.powers())?;
    println!("{:>4} {:>12} {:>12} {:>12} {:>12} {:>10} {:>8}", "user", "signal", "interf.", "hwi", "noise", "sinr", "rate");
    for k in 0..config.k {
        let interference: f64 = (0..config.k).map(|i| config.p * b.interference[k][i]).sum();
        println!(
            "{k:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>10.4} {:>8.4}",
            config.p * b.signal[k],
            interference,
            b.hwi[k],
            config.sigma2 * b.noise[k],
            b.sinr[k],
            b.rate[k]
        );
    }
    println!("sum rate {:.4} bit/s/Hz, min rate {:.4} bit/s/Hz", b.sum_rate(), b.min_rate());
    Ok(())
}
