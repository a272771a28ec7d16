use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use riscf::channel::{LosStructure, PhaseVector};
use riscf::closedform::ClosedForm;
use riscf::optimizer::*;
use riscf::scenario::*;
use riscf::C64;

fn random_matrix(n: usize, rng: &mut ChaCha20Rng) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn trace_re(a: &DMatrix<C64>, b: &DMatrix<C64>, theta: &PhaseVector) -> f64 {
    let phi = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(theta.phasors()));
    (a * &phi * b * phi.adjoint()).trace().re
}

fn fd<F: Fn(&PhaseVector) -> f64>(f: F, theta: &PhaseVector, h: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|x| {
            let mut p = theta.theta.clone();
            p[x] += h;
            let mut m = theta.theta.clone();
            m[x] -= h;
            (f(&PhaseVector::new(p)) - f(&PhaseVector::new(m))) / (2.0 * h)
        })
        .collect()
}

/// Largest entrywise deviation relative to the largest reference entry.
fn max_rel(a: &[f64], reference: &[f64]) -> f64 {
    let scale = reference.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    a.iter().zip(reference).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn trace_derivative_of_identity_is_zero() {
    let id = DMatrix::<C64>::identity(6, 6);
    let theta = PhaseVector::new(vec![0.1, 0.5, 1.0, 2.0, 3.0, 4.0]);
    assert!(f_d(&id, &id, &theta).unwrap().iter().all(|g| g.abs() < 1e-14));
}

#[test]
fn trace_derivative_forms_agree_for_hermitian_inputs() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let n = 8;
    let a0 = random_matrix(n, &mut rng);
    let b0 = random_matrix(n, &mut rng);
    let a = &a0 + a0.adjoint();
    let b = &b0 * b0.adjoint();
    let theta = PhaseVector::random(n, &mut rng);
    let g1 = f_d(&a, &b, &theta).unwrap();
    let g2 = f_d_hermitian(&a, &b, &theta).unwrap();
    for (x, y) in g1.iter().zip(&g2) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn trace_derivative_matches_finite_differences() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let n = 9;
    let a = random_matrix(n, &mut rng);
    let b = random_matrix(n, &mut rng);
    let theta = PhaseVector::random(n, &mut rng);
    let g = f_d(&a, &b, &theta).unwrap();
    let r = fd(|t| trace_re(&a, &b, t), &theta, 1e-6);
    assert!(max_rel(&g, &r) < 1e-5);
}

#[test]
fn trace_derivative_rejects_wrong_size() {
    let a = DMatrix::<C64>::identity(3, 3);
    assert!(f_d(&a, &a, &PhaseVector::zeros(4)).is_err());
}

fn instance(seed: u64) -> (SystemConfig, ChannelStatistics, HwiProfile) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (l, s, k) = (rng.random_range(1..=3), rng.random_range(1..=3), rng.random_range(1..=4));
    let b = [1usize, 4, 9][rng.random_range(0..3)];
    let r = [4usize, 9, 16][rng.random_range(0..3)];
    let cfg = SystemConfig { l, s, k, b, r, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 100.0 };
    let stats = synthetic_statistics(l, s, k, SyntheticRanges::default(), seed).unwrap();
    let hwi = HwiProfile::new(rng.random::<f64>() * 0.4, rng.random::<f64>() * 0.4, Some(rng.random_range(1..=3))).unwrap();
    (cfg, stats, hwi)
}

#[test]
fn rate_gradient_matches_finite_differences_of_closed_form() {
    for seed in 0..25 {
        let (cfg, stats, hwi) = instance(seed);
        let problem = PhaseProblem::new(&stats, &hwi, &cfg).unwrap();
        let los = LosStructure::new(&stats, &cfg).unwrap();
        let cf = ClosedForm::new(&stats, &los, &hwi, &cfg).unwrap();
        let powers = cfg.powers();
        let mut rng = ChaCha20Rng::seed_from_u64(seed + 1000);
        let theta = PhaseVector::random(cfg.n_phases(), &mut rng);
        let k = seed as usize % cfg.k;
        let g = grad_rate(&theta, &problem.stacked, &cfg, &powers, k).unwrap();
        let r = fd(|t| cf.breakdown(t, &hwi, &cfg, &powers).unwrap().rate[k], &theta, 1e-6);
        let e = max_rel(&g, &r);
        assert!(e < 1e-5, "seed {seed}: relative error {e}");
    }
}

#[test]
fn objective_gradients_match_finite_differences() {
    for seed in 0..25 {
        let (cfg, stats, hwi) = instance(seed);
        let problem = PhaseProblem::new(&stats, &hwi, &cfg).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed + 2000);
        let theta = PhaseVector::random(cfg.n_phases(), &mut rng);
        for obj in [Objective::sum_rate(), Objective::smoothed_min(5.0).unwrap()] {
            let (_, g) = problem.gradient(&theta, &obj).unwrap();
            let r = fd(|t| problem.value(t, &obj).unwrap(), &theta, 1e-6);
            let e = max_rel(&g, &r);
            assert!(e < 1e-5, "seed {seed} {:?}: relative error {e}", obj.kind);
        }
    }
}

#[test]
fn gradient_is_periodic() {
    let (cfg, stats, hwi) = instance(5);
    let problem = PhaseProblem::new(&stats, &hwi, &cfg).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let theta = PhaseVector::random(cfg.n_phases(), &mut rng);
    let mut shifted = theta.clone();
    shifted.theta[0] += std::f64::consts::TAU;
    let obj = Objective::sum_rate();
    let (_, a) = problem.gradient(&theta, &obj).unwrap();
    let (_, b) = problem.gradient(&shifted, &obj).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
    }
}

#[test]
fn gradient_vanishes_without_ris_los() {
    let (cfg, stats, hwi) = instance(6);
    let stats = stats.with_delta(0.0).unwrap();
    let problem = PhaseProblem::new(&stats, &hwi, &cfg).unwrap();
    let theta = PhaseVector::random(cfg.n_phases(), &mut ChaCha20Rng::seed_from_u64(1));
    for k in 0..cfg.k {
        let g = grad_rate(&theta, &problem.stacked, &cfg, &problem.powers, k).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-12));
    }
}

#[test]
fn single_user_smoothed_min_equals_rate_gradient() {
    let cfg = SystemConfig { l: 2, s: 2, k: 1, b: 4, r: 4, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 100.0 };
    let stats = synthetic_statistics(2, 2, 1, SyntheticRanges::default(), 2).unwrap();
    let hwi = HwiProfile::new(0.2, 0.2, Some(2)).unwrap();
    let problem = PhaseProblem::new(&stats, &hwi, &cfg).unwrap();
    let theta = PhaseVector::random(8, &mut ChaCha20Rng::seed_from_u64(1));
    let (_, a) = problem.gradient(&theta, &Objective::smoothed_min(100.0).unwrap()).unwrap();
    let b = grad_rate(&theta, &problem.stacked, &cfg, &problem.powers, 0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn softmax_weights_are_uniform_for_equal_rates() {
    let w = Objective::smoothed_min(100.0).unwrap().rate_weights(&[2.0; 4]);
    assert!(w.iter().all(|x| (x - 0.25).abs() < 1e-15));
}

#[test]
fn smoothed_min_is_sandwiched() {
    let o = Objective::smoothed_min(100.0).unwrap();
    for rates in [vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0, 5.0], vec![0.01, 0.02]] {
        let v = o.value(&rates);
        let m = rates.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(v <= m + 1e-15 && m <= v + (rates.len() as f64).ln() / 100.0 + 1e-15);
    }
}
