use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use riscf::channel::{LosStructure, PhaseVector};
use riscf::closedform::ClosedForm;
use riscf::montecarlo::*;
use riscf::scenario::*;

#[test]
fn welford_matches_two_pass_statistics_and_merges() {
    let xs: Vec<f64> = (0..101).map(|i| ((i * 37) % 17) as f64 * 0.5).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    let mut all = Welford::default();
    let (mut a, mut b) = (Welford::default(), Welford::default());
    for (i, x) in xs.iter().enumerate() {
        all.push(*x);
        if i < 40 { a.push(*x) } else { b.push(*x) }
    }
    a.merge(&b);
    for w in [&all, &a] {
        assert_eq!(w.count(), 101);
        assert!((w.mean() - mean).abs() < 1e-12);
        assert!((w.variance() - var).abs() < 1e-12);
    }
    let e = all.estimate();
    assert!(e.covers(mean) && e.half_width > 0.0);
}

fn small() -> (ChannelStatistics, HwiProfile, SystemConfig, PhaseVector) {
    let stats = synthetic_statistics(2, 1, 2, SyntheticRanges::default(), 12).unwrap();
    let hwi = HwiProfile::new(0.2, 0.2, Some(1)).unwrap();
    let cfg = SystemConfig { l: 2, s: 1, k: 2, b: 4, r: 4, d_over_lambda: 0.5, p: 1.0, sigma2: 0.3, mu: 10.0 };
    let theta = PhaseVector::random(cfg.n_phases(), &mut ChaCha20Rng::seed_from_u64(12));
    (stats, hwi, cfg, theta)
}

#[test]
fn estimates_agree_with_closed_form() {
    let (stats, hwi, cfg, theta) = small();
    let los = LosStructure::new(&stats, &cfg).unwrap();
    let powers = cfg.powers();
    let terms = ClosedForm::new(&stats, &los, &hwi, &cfg).unwrap().terms(&theta).unwrap();
    let hw = terms.hwi(&hwi, &powers);
    let mc = estimate_terms(&theta, &stats, &los, &hwi, &cfg, &powers, &McOptions::new(40_000, 3)).unwrap();
    for k in 0..2 {
        assert!(mc.signal[k].relative_error(terms.signal[k]) < 0.03);
        assert!(mc.interference[k][1 - k].relative_error(terms.interference[k][1 - k]) < 0.03);
        assert!(mc.hwi[k].relative_error(hw[k]) < 0.04);
        assert!(mc.noise[k].relative_error(terms.noise[k]) < 0.03);
        assert_eq!(mc.interference[k][k].trials, 0);
    }
    let rates = rate_from_estimates(&mc, &powers, cfg.sigma2);
    let exact = ClosedForm::new(&stats, &los, &hwi, &cfg).unwrap().breakdown(&theta, &hwi, &cfg, &powers).unwrap();
    for k in 0..2 {
        assert!((rates[k] - exact.rate[k]).abs() < 0.02);
    }
}

#[test]
fn conditional_sampling_has_the_same_expectation() {
    let (stats, hwi, cfg, theta) = small();
    let los = LosStructure::new(&stats, &cfg).unwrap();
    let powers = cfg.powers();
    let hw = ClosedForm::new(&stats, &los, &hwi, &cfg).unwrap().terms(&theta).unwrap().hwi(&hwi, &powers);
    let opts = McOptions { sampling: DistortionSampling::Conditional, ..McOptions::new(40_000, 5) };
    let mc = estimate_terms(&theta, &stats, &los, &hwi, &cfg, &powers, &opts).unwrap();
    for k in 0..2 {
        assert!(mc.hwi[k].relative_error(hw[k]) < 0.04);
    }
}

#[test]
fn estimates_are_reproducible_and_block_independent() {
    let (stats, hwi, cfg, theta) = small();
    let los = LosStructure::new(&stats, &cfg).unwrap();
    let powers = cfg.powers();
    let a = estimate_terms(&theta, &stats, &los, &hwi, &cfg, &powers, &McOptions::new(3000, 9)).unwrap();
    let b = estimate_terms(&theta, &stats, &los, &hwi, &cfg, &powers, &McOptions::new(3000, 9)).unwrap();
    assert_eq!(a, b);
    let c = estimate_terms(&theta, &stats, &los, &hwi, &cfg, &powers, &McOptions { block: 100, ..McOptions::new(3000, 9) })
        .unwrap();
    for k in 0..2 {
        assert!((a.signal[k].mean - c.signal[k].mean).abs() <= 1e-9 * a.signal[k].mean);
    }
    assert!(estimate_terms(&theta, &stats, &los, &hwi, &cfg, &powers, &McOptions::new(0, 9)).is_err());
}
