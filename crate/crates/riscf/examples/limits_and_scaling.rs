//! Shows the special-case formulas and the power-scaling limits: the
//! surface-free ceiling `1/κ_u²`, and the general rate approaching the
//! `p/(BR)` limit when the surface-to-AP links carry no LoS.
//!
//! ```text
//! cargo run --release --example limits_and_scaling
//! ```

use riscf::asymptotics::{convergence_probe, sinr_ris_free, LimitCase, ScalingMode};
use riscf::scenario::{synthetic_statistics, HwiProfile, SyntheticRanges, SystemConfig};

fn main() -> riscf::Result<()> {
    let hwi = HwiProfile::new(0.3, 0.3, Some(2))?;

    let free = synthetic_statistics(3, 0, 3, SyntheticRanges::default(), 4)?;
    let base = SystemConfig { l: 3, s: 0, k: 3, b: 4, r: 4, d_over_lambda: 0.5, p: 1.0, sigma2: 0.1, mu: 10.0 };
    println!("surface-free SINR of user 0, ceiling {:.3}", 1.0 / (hwi.kappa_u * hwi.kappa_u));
    for b in [4, 100, 1024, 10000] {
        let cfg = base.with_arrays(b, 4);
        println!("  B = {b:>5}: {:.4}", sinr_ris_free(&free, &hwi, &cfg, &cfg.powers(), 0)?);
    }

    let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), 9)?.with_delta(0.0)?;
    let base = SystemConfig { l: 2, s: 2, k: 3, b: 16, r: 16, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 10.0 };
    let grid = [(16, 16), (64, 64), (256, 256)];
    println!("p/(BR) scaling, user 0: general SINR, limit, relative gap");
    for row in convergence_probe(ScalingMode::PerBr, Some(LimitCase::NlBr), &grid, &stats, &hwi, &base, None)? {
        let limit = row.limit.as_ref().map_or(f64::NAN, |l| l[0]);
        println!("  B = {:>3}, R = {:>3}: {:.5} {:.5} {:.4}", row.b, row.r, row.sinr[0], limit, row.gap.unwrap_or(f64::NAN));
    }

    println!("p/R² scaling, user 0 SINR");
    for row in convergence_probe(ScalingMode::PerR2, None, &[(16, 16), (16, 64), (16, 256)], &stats, &hwi, &base, None)? {
        println!("  R = {:>3}: {:.5}", row.r, row.sinr[0]);
    }
    Ok(())
}
