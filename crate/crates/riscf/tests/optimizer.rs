use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use riscf::channel::PhaseVector;
use riscf::optimizer::*;
use riscf::scenario::*;

fn problem(seed: u64) -> PhaseProblem {
    let stats = synthetic_statistics(3, 2, 3, SyntheticRanges::default(), seed).unwrap();
    let hwi = HwiProfile::new(0.2, 0.2, Some(2)).unwrap();
    let cfg = SystemConfig { l: 3, s: 2, k: 3, b: 4, r: 9, d_over_lambda: 0.5, p: 1.0, sigma2: 0.3, mu: 10.0 };
    PhaseProblem::new(&stats, &hwi, &cfg).unwrap()
}

#[test]
fn momentum_follows_its_recursion() {
    assert!((next_momentum(1.0) - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
    let mut a = 1.0;
    for _ in 0..50 {
        let b = next_momentum(a);
        assert!((b * b - b - a * a).abs() < 1e-9 * b * b);
        a = b;
    }
}

#[test]
fn ascent_is_monotone_and_improves_both_objectives() {
    let p = problem(1);
    let theta0 = PhaseVector::random(p.n_phases(), &mut ChaCha20Rng::seed_from_u64(1));
    for obj in [Objective::sum_rate(), Objective::smoothed_min(10.0).unwrap()] {
        let r = optimize(&p, &theta0, &obj, &AscentOptions::default()).unwrap();
        assert!(r.trajectory.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.final_value > r.initial_value);
        assert!(r.converged && r.iterations <= 500);
        assert!(r.theta_star.theta.iter().all(|t| (0.0..2.0 * std::f64::consts::PI).contains(t)));
        assert!((p.value(&r.theta_star, &obj).unwrap() - r.final_value).abs() < 1e-12);
    }
}

#[test]
fn iteration_limit_is_respected() {
    let p = problem(2);
    let theta0 = PhaseVector::zeros(p.n_phases());
    let opts = AscentOptions { max_iter: 3, tol: 0.0, ..Default::default() };
    let r = optimize(&p, &theta0, &Objective::sum_rate(), &opts).unwrap();
    assert_eq!(r.iterations, 3);
    assert!(!r.converged);
}

#[test]
fn multistart_is_deterministic_and_picks_the_best_run() {
    let p = problem(3);
    let obj = Objective::sum_rate();
    let a = multistart(&p, &obj, &AscentOptions::default(), 3, 11).unwrap();
    let b = multistart(&p, &obj, &AscentOptions::default(), 3, 11).unwrap();
    assert_eq!(a, b);
    let best = a.best_run().final_value;
    assert!(a.runs.iter().all(|r| r.final_value <= best));
    assert!(best > random_phase_average(&p, &obj, 50, 4).unwrap());
    assert!(multistart(&p, &obj, &AscentOptions::default(), 0, 11).is_err());
    assert!(random_phase_average(&p, &obj, 0, 4).is_err());
}

#[test]
fn smoothing_constant_must_be_positive() {
    assert!(Objective::smoothed_min(0.0).is_err());
    assert!(Objective::smoothed_min(-1.0).is_err());
    let obj = Objective::smoothed_min(50.0).unwrap();
    let v = obj.value(&[1.0, 2.0, 3.0]);
    assert!(v <= 1.0 && v > 1.0 - (3f64).ln() / 50.0 - 1e-12);
}
