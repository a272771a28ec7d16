//! Compares the analytic gradients of a user rate and of both objectives with
//! central finite differences.
//!
//! ```text
//! cargo run --release --example phase_gradients
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use riscf::channel::{LosStructure, PhaseVector};
use riscf::optimizer::{grad_objective, grad_rate, Objective, PhaseProblem};
use riscf::reform::build_stacked;
use riscf::scenario::{synthetic_statistics, HwiProfile, SyntheticRanges, SystemConfig};

fn main() -> riscf::Result<()> {
    let config = SystemConfig { l: 3, s: 2, k: 3, b: 4, r: 9, d_over_lambda: 0.5, p: 1.0, sigma2: 0.2, mu: 5.0 };
    let stats = synthetic_statistics(3, 2, 3, SyntheticRanges::default(), 5)?;
    let hwi = HwiProfile::new(0.2, 0.2, Some(2))?;
    let los = LosStructure::new(&stats, &config)?;
    let stacked = build_stacked(&stats, &los, &hwi, &config)?;
    let problem = PhaseProblem::new(&stats, &hwi, &config)?;
    let theta = PhaseVector::random(config.n_phases(), &mut ChaCha20Rng::seed_from_u64(5));
    let powers = config.powers();

    let h = 1e-6;
    let fd = |f: &dyn Fn(&PhaseVector) -> f64| -> Vec<f64> {
        (0..theta.len())
            .map(|x| {
                let (mut p, mut m) = (theta.theta.clone(), theta.theta.clone());
                p[x] += h;
                m[x] -= h;
                (f(&PhaseVector::new(p)) - f(&PhaseVector::new(m))) / (2.0 * h)
            })
            .collect()
    };
    let error = |g: &[f64], r: &[f64]| {
        let scale = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        g.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
    };

    let g = grad_rate(&theta, &stacked, &config, &powers, 0)?;
    let r = fd(&|t| problem.breakdown(t).unwrap().rate[0]);
    println!("rate of user 0: max relative deviation {:.3e}", error(&g, &r));
    for (name, obj) in [("sum rate", Objective::sum_rate()), ("smoothed min", Objective::smoothed_min(config.mu)?)] {
        let (_, g) = grad_objective(&theta, &stacked, &config, &powers, &obj)?;
        let r = fd(&|t| problem.value(t, &obj).unwrap());
        println!("{name}: max relative deviation {:.3e}", error(&g, &r));
    }
    Ok(())
}
