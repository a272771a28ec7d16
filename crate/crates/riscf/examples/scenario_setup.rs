//! Builds the reference geometry, derives the large-scale statistics and
//! draws one small-scale channel realization.
//!
//! ```text
//! cargo run --release --example scenario_setup -- [seed]
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use riscf::channel::{aggregate_channel, sample_realization, LosStructure, PhaseVector};
use riscf::scenario::{build_statistics, reference_defaults};

fn main() -> riscf::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let defaults = reference_defaults();
    let topology = defaults.topology(seed);
    let stats = build_statistics(&topology, &defaults.rician(), seed)?;
    for (k, u) in topology.user_positions.iter().enumerate() {
        let direct: Vec<String> = stats.gamma.iter().map(|row| format!("{:.2e}", row[k])).collect();
        println!("user {k} at ({:6.2}, {:6.2}) m, direct path losses [{}]", u[0], u[1], direct.join(", "));
    }
    for (s, row) in stats.alpha.iter().enumerate() {
        let v: Vec<String> = row.iter().map(|a| format!("{a:.2e}")).collect();
        println!("surface {s} user path losses [{}]", v.join(", "));
    }

    let config = &defaults.config;
    let los = LosStructure::new(&stats, config)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let real = sample_realization(&stats, &los, &defaults.hwi, &mut rng);
    let q = aggregate_channel(&stats, &los, &real, &PhaseVector::zeros(config.n_phases()), true);
    for k in 0..config.k {
        let gain: f64 = q.iter().map(|ap| ap[k].iter().map(|x| x.norm_sqr()).sum::<f64>()).sum();
        println!("user {k}: aggregate channel gain {gain:.3e} over {} antennas", config.l * config.b);
    }
    Ok(())
}
