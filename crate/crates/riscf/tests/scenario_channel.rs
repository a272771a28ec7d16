use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use riscf::channel::*;
use riscf::scenario::*;

#[test]
fn square_side_accepts_only_perfect_squares() {
    assert_eq!(square_side(1).unwrap(), 1);
    assert_eq!(square_side(36).unwrap(), 6);
    assert!(square_side(10).is_err());
}

#[test]
fn array_response_has_unit_modulus_and_known_phases() {
    let a = array_response(9, 0.3, 0.7, 0.5).unwrap();
    assert_eq!(a.len(), 9);
    assert!(a.iter().all(|x| (x.norm() - 1.0).abs() < 1e-15));
    assert!((a[0].re - 1.0).abs() < 1e-15 && a[0].im.abs() < 1e-15);
    let col = 2.0 * PI * 0.5 * 0.7f64.cos();
    let row = 2.0 * PI * 0.5 * 0.7f64.sin() * 0.3f64.sin();
    assert!((a[1].arg() - col.sin().atan2(col.cos())).abs() < 1e-12);
    assert!((a[3].arg() - row.sin().atan2(row.cos())).abs() < 1e-12);
    assert!(array_response(8, 0.0, 0.0, 0.5).is_err());
}

#[test]
fn phase_noise_width_follows_quantization_bits() {
    assert_eq!(HwiProfile::ideal().kappa_r(), 0.0);
    assert_eq!(HwiProfile::new(0.1, 0.1, Some(1)).unwrap().kappa_r(), 0.5);
    assert_eq!(HwiProfile::new(0.1, 0.1, Some(3)).unwrap().kappa_r(), 0.125);
    assert!(HwiProfile::new(-0.1, 0.0, None).is_err());
    assert_eq!(sinc_moment(0.0), 1.0);
    assert!((sinc_moment(0.5) - 2.0 / PI).abs() < 1e-15);
    assert!(sinc_moment(1.0).abs() < 1e-15);
}

#[test]
fn phase_vectors_wrap_and_check_lengths() {
    let t = PhaseVector::new(vec![-0.5, 7.0, 2.0 * PI]).wrapped();
    assert!(t.theta.iter().all(|x| (0.0..2.0 * PI).contains(x)));
    assert!((t.theta[0] - (2.0 * PI - 0.5)).abs() < 1e-12);
    assert!(t.check_len(3).is_ok());
    assert!(t.check_len(4).is_err());
    let r = PhaseVector::random(100, &mut ChaCha20Rng::seed_from_u64(1));
    assert!(r.theta.iter().all(|x| (0.0..2.0 * PI).contains(x)));
}

#[test]
fn reference_scenario_matches_its_description() {
    let d = reference_defaults();
    let c = &d.config;
    assert_eq!((c.l, c.s, c.k, c.b, c.r), (5, 4, 5, 9, 36));
    assert!((c.p - 1.0).abs() < 1e-12);
    assert!((dbm_to_watts(-104.0) - c.sigma2).abs() < 1e-25);
    assert_eq!((d.delta, d.eps), (1.0, 10.0));
    assert_eq!(d.hwi.quant_bits, Some(2));
    let stats = d.statistics(0).unwrap();
    assert_eq!((stats.n_aps(), stats.n_ris(), stats.n_users()), (5, 4, 5));
    assert_eq!(stats, d.statistics(0).unwrap());
    assert_ne!(stats, d.statistics(1).unwrap());
}

#[test]
fn path_losses_follow_distance_law() {
    let topology = Topology {
        ap_positions: vec![[10.0, 0.0, 0.0]],
        ris_positions: vec![[0.0, 2.0, 0.0]],
        user_positions: vec![[0.0, 0.0, 0.0]],
        exponents: PathlossExponents { user_ris: 2.0, ris_ap: 2.5, user_ap: 4.0 },
        pathloss_scale: 1e-3,
    };
    let stats = build_statistics(&topology, &RicianFactors::uniform(1, 1, 1, 1.0, 1.0), 0).unwrap();
    assert!((stats.alpha[0][0] - 1e-3 * 2f64.powf(-2.0)).abs() < 1e-18);
    assert!((stats.beta[0][0] - 1e-3 * 104f64.sqrt().powf(-2.5)).abs() < 1e-18);
    assert!((stats.gamma[0][0] - 1e-3 * 10f64.powf(-4.0)).abs() < 1e-18);
    let mut bad = topology.clone();
    bad.user_positions[0] = [10.0, 0.0, 0.0];
    assert!(matches!(
        build_statistics(&bad, &RicianFactors::uniform(1, 1, 1, 1.0, 1.0), 0),
        Err(riscf::Error::DegenerateGeometry(_))
    ));
}

#[test]
fn rician_fractions_sum_to_one_and_pure_los_is_exact() {
    let stats = synthetic_statistics(2, 2, 2, SyntheticRanges::default(), 3).unwrap();
    for l in 0..2 {
        for s in 0..2 {
            assert!((stats.ris_ap_los(l, s) + stats.ris_ap_nlos(l, s) - 1.0).abs() < 1e-15);
            assert!((stats.user_ris_los(s, l) + stats.user_ris_nlos(s, l) - 1.0).abs() < 1e-15);
        }
    }
    let los = stats.with_pure_los(true);
    assert_eq!((los.ris_ap_los(0, 0), los.ris_ap_nlos(0, 0)), (1.0, 0.0));
    assert_eq!((los.user_ris_los(0, 0), los.user_ris_nlos(0, 0)), (1.0, 0.0));
    assert!(stats.with_delta(-1.0).is_err());
}

#[test]
fn configuration_dimensions_are_checked() {
    let stats = synthetic_statistics(2, 2, 2, SyntheticRanges::default(), 3).unwrap();
    let cfg = SystemConfig { l: 2, s: 2, k: 3, b: 4, r: 4, d_over_lambda: 0.5, p: 1.0, sigma2: 1.0, mu: 10.0 };
    assert!(matches!(stats.check_config(&cfg), Err(riscf::Error::DimensionMismatch(_))));
    let cfg = SystemConfig { k: 2, r: 5, ..cfg };
    assert!(LosStructure::new(&stats, &cfg).is_err());
    let cfg = SystemConfig { r: 4, sigma2: 0.0, ..cfg };
    assert!(cfg.validate().is_err());
}

#[test]
fn realizations_have_the_configured_shapes_and_statistics() {
    let stats = synthetic_statistics(2, 1, 2, SyntheticRanges::default(), 8).unwrap();
    let cfg = SystemConfig { l: 2, s: 1, k: 2, b: 4, r: 9, d_over_lambda: 0.5, p: 1.0, sigma2: 1.0, mu: 10.0 };
    let los = LosStructure::new(&stats, &cfg).unwrap();
    let hwi = HwiProfile::new(0.0, 0.0, Some(2)).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let n = 4000;
    let mut power = 0.0;
    for _ in 0..n {
        let real = sample_realization(&stats, &los, &hwi, &mut rng);
        assert_eq!(real.z_tilde[1][0].shape(), (4, 9));
        assert_eq!(real.h_tilde[0][1].len(), 9);
        assert!(real.theta_noise[0].iter().all(|t| t.abs() <= PI / 4.0));
        power += real.h_tilde[0][0].iter().map(|x| x.norm_sqr()).sum::<f64>() / 9.0;
    }
    assert!((power / n as f64 - 1.0).abs() < 0.03);
    let real = sample_realization(&stats, &los, &hwi, &mut rng);
    let q0 = aggregate_channel(&stats, &los, &real, &PhaseVector::zeros(9), false);
    let q1 = aggregate_channel(&stats, &los, &real, &PhaseVector::zeros(9), true);
    assert_eq!(q0.len(), 2);
    assert_eq!(q0[0][1].len(), 4);
    assert_ne!(q0, q1);
}
