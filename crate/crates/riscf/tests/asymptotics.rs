use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use riscf::asymptotics::*;
use riscf::channel::{LosStructure, PhaseVector};
use riscf::closedform::ClosedForm;
use riscf::scenario::*;

struct Instance {
    stats: ChannelStatistics,
    hwi: HwiProfile,
    config: SystemConfig,
    powers: Vec<f64>,
}

fn instance(seed: u64) -> Instance {
    let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
    let l = rng.random_range(1..4);
    let s = rng.random_range(1..4);
    let k = rng.random_range(1..4);
    let b = [1, 4, 9][rng.random_range(0..3)];
    let r = [4, 9, 16][rng.random_range(0..3)];
    let stats = synthetic_statistics(l, s, k, SyntheticRanges::default(), seed).unwrap();
    let hwi = HwiProfile::new(rng.random::<f64>() * 0.4, rng.random::<f64>() * 0.4, Some(rng.random_range(1..4))).unwrap();
    let config = SystemConfig { l, s, k, b, r, d_over_lambda: 0.5, p: 1.0, sigma2: 0.1 + rng.random::<f64>(), mu: 10.0 };
    let powers = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
    Instance { stats, hwi, config, powers }
}

fn general_sinr(stats: &ChannelStatistics, hwi: &HwiProfile, cfg: &SystemConfig, powers: &[f64], theta: &PhaseVector) -> Vec<f64> {
    let los = LosStructure::new(stats, cfg).unwrap();
    let cf = ClosedForm::new(stats, &los, hwi, cfg).unwrap();
    cf.breakdown(theta, hwi, cfg, powers).unwrap().sinr
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn surface_free_formula_matches_general_rate() {
    for seed in 0..50 {
        let mut inst = instance(seed);
        let stats = inst.stats.without_ris();
        inst.config.s = 0;
        let theta = PhaseVector::zeros(0);
        let general = general_sinr(&stats, &inst.hwi, &inst.config, &inst.powers, &theta);
        for (k, g) in general.iter().enumerate() {
            let c = sinr_ris_free(&stats, &inst.hwi, &inst.config, &inst.powers, k).unwrap();
            assert!(rel(c, *g) < 1e-9, "seed {seed} user {k}: {c} vs {g}");
        }
    }
}

#[test]
fn surface_free_single_user_example() {
    let stats = ChannelStatistics::from_parts(
        vec![],
        vec![vec![]],
        vec![vec![1.0]],
        vec![vec![]],
        vec![],
        vec![],
        vec![vec![]],
        vec![vec![]],
        false,
    )
    .unwrap();
    let config = SystemConfig { l: 1, s: 0, k: 1, b: 4, r: 4, d_over_lambda: 0.5, p: 1.0, sigma2: 1.0, mu: 10.0 };
    let sinr = sinr_ris_free(&stats, &HwiProfile::ideal(), &config, &[1.0], 0).unwrap();
    assert!((sinr - 5.0).abs() < 1e-12);
}

#[test]
fn surface_free_sinr_saturates_at_transmitter_distortion() {
    let stats = synthetic_statistics(3, 0, 2, SyntheticRanges::default(), 4).unwrap();
    let hwi = HwiProfile::new(0.3, 0.3, None).unwrap();
    let base = SystemConfig { l: 3, s: 0, k: 2, b: 4, r: 4, d_over_lambda: 0.5, p: 1.0, sigma2: 0.1, mu: 10.0 };
    let mut prev = 0.0;
    for b in [100, 1024, 10000] {
        let cfg = base.with_arrays(b, 4);
        let sinr = sinr_ris_free(&stats, &hwi, &cfg, &cfg.powers(), 0).unwrap();
        assert!(sinr > prev);
        prev = sinr;
    }
    assert!(rel(prev, 1.0 / 0.09) < 0.05, "{prev}");
}

#[test]
fn nlos_formula_matches_general_rate() {
    for seed in 0..50 {
        let inst = instance(seed);
        let stats = inst.stats.with_delta(0.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let theta = PhaseVector::random(inst.config.n_phases(), &mut rng);
        let general = general_sinr(&stats, &inst.hwi, &inst.config, &inst.powers, &theta);
        for (k, g) in general.iter().enumerate() {
            let c = sinr_nlos(&stats, &inst.hwi, &inst.config, &inst.powers, k).unwrap();
            assert!(rel(c, *g) < 1e-9, "seed {seed} user {k}: {c} vs {g}");
        }
    }
}

#[test]
fn nlos_rate_ignores_phases() {
    let inst = instance(7);
    let stats = inst.stats.with_delta(0.0).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(70);
    let a = PhaseVector::random(inst.config.n_phases(), &mut rng);
    let b = PhaseVector::random(inst.config.n_phases(), &mut rng);
    let ra = general_sinr(&stats, &inst.hwi, &inst.config, &inst.powers, &a);
    let rb = general_sinr(&stats, &inst.hwi, &inst.config, &inst.powers, &b);
    for (x, y) in ra.iter().zip(&rb) {
        assert!(rel(*x, *y) < 1e-10);
    }
}

#[test]
fn per_r_limit_has_no_user_side_rician_dependence() {
    let inst = instance(3);
    let cfg = inst.config.with_arrays(16, 64);
    let low = inst.stats.with_delta(0.0).unwrap().with_eps(0.0).unwrap();
    let high = inst.stats.with_delta(0.0).unwrap().with_eps(1e6).unwrap();
    let a = sinr_limit(LimitCase::NlR, &low, &inst.hwi, &cfg, 1.0, None).unwrap();
    let b = sinr_limit(LimitCase::NlR, &high, &inst.hwi, &cfg, 1.0, None).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(rel(*x, *y) < 1e-12);
    }
}

#[test]
fn br_limit_without_impairments_is_finite() {
    let inst = instance(5);
    let stats = inst.stats.with_delta(0.0).unwrap();
    let hwi = HwiProfile::new(0.0, 0.0, Some(2)).unwrap();
    for v in sinr_limit(LimitCase::NlBr, &stats, &hwi, &inst.config, 1.0, None).unwrap() {
        assert!(v.is_finite() && v > 0.0);
    }
}

#[test]
fn per_b_limit_approaches_transmitter_ceiling_for_large_surfaces() {
    let stats = synthetic_statistics(2, 2, 2, SyntheticRanges::default(), 11).unwrap().with_delta(0.0).unwrap();
    let hwi = HwiProfile::new(0.3, 0.3, Some(2)).unwrap();
    let base = SystemConfig { l: 2, s: 2, k: 2, b: 4, r: 4, d_over_lambda: 0.5, p: 1.0, sigma2: 0.1, mu: 10.0 };
    let cfg = base.with_arrays(4, 512 * 512);
    let rates: Vec<f64> = sinr_limit(LimitCase::NlB, &stats, &hwi, &cfg, 1.0, None)
        .unwrap()
        .iter()
        .map(|x| (1.0 + x).log2())
        .collect();
    let ceiling = (1.0 + 1.0 / 0.09f64).log2();
    for r in rates {
        assert!(r < ceiling && rel(r, ceiling) < 0.01, "{r} vs {ceiling}");
    }
}

#[test]
fn per_b_limit_gap_decreases_with_antennas() {
    let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), 2).unwrap().with_delta(0.0).unwrap();
    let hwi = HwiProfile::new(0.2, 0.2, Some(2)).unwrap();
    let base = SystemConfig { l: 2, s: 2, k: 3, b: 4, r: 16, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 10.0 };
    let grid = [(16, 16), (64, 16), (256, 16)];
    let rows = convergence_probe(ScalingMode::PerB, Some(LimitCase::NlB), &grid, &stats, &hwi, &base, None).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap.unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
}

#[test]
fn per_br_scaling_converges_to_br_limit() {
    let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), 9).unwrap().with_delta(0.0).unwrap();
    let hwi = HwiProfile::new(0.3, 0.3, Some(2)).unwrap();
    let base = SystemConfig { l: 2, s: 2, k: 3, b: 4, r: 16, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 10.0 };
    let grid = [(16, 16), (64, 64), (256, 256)];
    let rows = convergence_probe(ScalingMode::PerBr, Some(LimitCase::NlBr), &grid, &stats, &hwi, &base, None).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap.unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 0.1, "{gaps:?}");
}

#[test]
fn per_r2_scaling_drives_sinr_to_zero() {
    let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), 9).unwrap().with_delta(0.0).unwrap();
    let hwi = HwiProfile::new(0.3, 0.3, Some(2)).unwrap();
    let base = SystemConfig { l: 2, s: 2, k: 3, b: 16, r: 16, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 10.0 };
    let grid = [(16, 16), (16, 64), (16, 256)];
    let rows = convergence_probe(ScalingMode::PerR2, None, &grid, &stats, &hwi, &base, None).unwrap();
    for k in 0..3 {
        let s: Vec<f64> = rows.iter().map(|r| r.sinr[k]).collect();
        assert!(s.windows(2).all(|w| w[1] < w[0]), "{s:?}");
        assert!(s[2] < 0.2 * s[0], "{s:?}");
    }
}

#[test]
fn unscaled_single_user_sinr_grows_with_antennas() {
    let stats = synthetic_statistics(2, 2, 1, SyntheticRanges::default(), 1).unwrap();
    let hwi = HwiProfile::new(0.1, 0.1, Some(3)).unwrap();
    let base = SystemConfig { l: 2, s: 2, k: 1, b: 4, r: 16, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 10.0 };
    let grid = [(1, 16), (4, 16), (16, 16), (64, 16)];
    let rows = convergence_probe(ScalingMode::None, None, &grid, &stats, &hwi, &base, None).unwrap();
    assert!(rows.windows(2).all(|w| w[1].sinr[0] >= w[0].sinr[0]));
}

#[test]
fn pure_los_limit_drops_phase_noise_terms_without_phase_noise() {
    let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), 6).unwrap().with_pure_los(true);
    let base = SystemConfig { l: 2, s: 2, k: 3, b: 64, r: 16, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 10.0 };
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let theta = PhaseVector::random(base.n_phases(), &mut rng);
    let ideal = HwiProfile::new(0.2, 0.2, None).unwrap();
    let noisy = HwiProfile::new(0.2, 0.2, Some(1)).unwrap();
    for t in limit_terms(LimitCase::OlB, &stats, &ideal, &base, 1.0, Some(&theta)).unwrap() {
        assert_eq!(t.phase_noise, 0.0);
    }
    let noisy_terms = limit_terms(LimitCase::OlB, &stats, &noisy, &base, 1.0, Some(&theta)).unwrap();
    assert!(noisy_terms.iter().any(|t| t.phase_noise != 0.0));
    assert!(sinr_limit(LimitCase::OlB, &stats, &noisy, &base, 1.0, None).is_err());
}

#[test]
fn pure_los_general_rate_approaches_its_limit() {
    let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), 8).unwrap().with_pure_los(true);
    let hwi = HwiProfile::new(0.2, 0.2, Some(2)).unwrap();
    let base = SystemConfig { l: 2, s: 2, k: 3, b: 4, r: 16, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 10.0 };
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let theta = PhaseVector::random(base.n_phases(), &mut rng);
    let grid = [(16, 16), (256, 16), (4096, 16)];
    let rows = convergence_probe(ScalingMode::PerB, Some(LimitCase::OlB), &grid, &stats, &hwi, &base, Some(&theta)).unwrap();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap.unwrap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 0.05, "{gaps:?}");
}
