//! Compares the closed-form expectation terms of one seeded instance with a
//! Monte-Carlo estimate.
//!
//! ```text
//! cargo run --release --example monte_carlo_terms -- [trials] [R]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use riscf::channel::{LosStructure, PhaseVector};
use riscf::closedform::ClosedForm;
use riscf::montecarlo::{estimate_terms, McOptions};
use riscf::scenario::{synthetic_statistics, HwiProfile, SyntheticRanges, SystemConfig};

fn main() -> riscf::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(100_000);
    let r: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(16);
    let config = SystemConfig { l: 2, s: 2, k: 3, b: 4, r, d_over_lambda: 0.5, p: 1.0, sigma2: 0.1, mu: 10.0 };
    let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), 1)?;
    let hwi = HwiProfile::new(0.3, 0.3, Some(2))?;
    let los = LosStructure::new(&stats, &config)?;
    let theta = PhaseVector::random(config.n_phases(), &mut ChaCha20Rng::seed_from_u64(1));
    let powers = config.powers();

    let cf = ClosedForm::new(&stats, &los, &hwi, &config)?;
    let terms = cf.terms(&theta)?;
    let hwi_cf = terms.hwi(&hwi, &powers);
    let start = std::time::Instant::now();
    let mc = estimate_terms(&theta, &stats, &los, &hwi, &config, &powers, &McOptions::new(trials, 7))?;
    println!("{trials} trials in {:.2?}", start.elapsed());

    println!("{:>5} {:>13} {:>13} {:>13} {:>13}", "user", "term", "closed form", "monte carlo", "rel. error");
    for k in 0..config.k {
        let interference: f64 = (0..config.k).filter(|&i| i != k).map(|i| terms.interference[k][i]).sum();
        let interference_mc: f64 = (0..config.k).filter(|&i| i != k).map(|i| mc.interference[k][i].mean).sum();
        for (name, a, b) in [
            ("signal", terms.signal[k], mc.signal[k].mean),
            ("interference", interference, interference_mc),
            ("hwi", hwi_cf[k], mc.hwi[k].mean),
            ("noise", terms.noise[k], mc.noise[k].mean),
        ] {
            println!("{k:>5} {name:>13} {a:>13.6e} {b:>13.6e} {:>13.3e}", (a - b).abs() / a);
        }
    }
    Ok(())
}
