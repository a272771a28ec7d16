//! Phase-shift gradients and the accelerated gradient-ascent optimizer.
//!
//! Gradients are exact: every phase-dependent quantity of the stacked rate
//! is a polynomial in `u_k = Φ h̄¹_k`, so the derivative of any weighted sum
//! of terms is `∂f/∂θ_n = Σ_k 2 Im{conj(u_{k,n}) (∂f/∂u_k*)_n}`, with the
//! Wirtinger adjoints accumulated per user. The rate gradient follows from
//! the SINR quotient rule applied to these term adjoints.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{LosStructure, PhaseVector};
use crate::closedform::{check_powers, RateBreakdown};
use crate::error::{Error, Result};
use crate::reform::{build_stacked, StackedStatistics, TermWeights};
use crate::scenario::{ChannelStatistics, HwiProfile, SystemConfig};
use crate::C64;

/// Derivative with respect to `θ` of `Re Tr{A Φ B Φᴴ}` with `Φ = diag(e^{jθ})`.
///
/// Evaluates `Re{j Φᵀ(Aᵀ ⊙ B) v* − j Φᴴ(A ⊙ Bᵀ) v}`.
pub fn f_d(a: &DMatrix<C64>, b: &DMatrix<C64>, theta: &PhaseVector) -> Result<Vec<f64>> {
    let n = theta.len();
    check_square(a, n, "A")?;
    check_square(b, n, "B")?;
    let v = theta.phasors();
    let j = C64::new(0.0, 1.0);
    Ok((0..n)
        .map(|p| {
            let first: C64 = (0..n).map(|m| a[(m, p)] * b[(p, m)] * v[m].conj()).sum::<C64>() * v[p];
            let second: C64 = (0..n).map(|m| a[(p, m)] * b[(m, p)] * v[m]).sum::<C64>() * v[p].conj();
            (j * first - j * second).re
        })
        .collect())
}

/// [`f_d`] for Hermitian `A` and `B`: `2 Im{Φᴴ (A ⊙ Bᵀ) v}`.
pub fn f_d_hermitian(a: &DMatrix<C64>, b: &DMatrix<C64>, theta: &PhaseVector) -> Result<Vec<f64>> {
    let n = theta.len();
    check_square(a, n, "A")?;
    check_square(b, n, "B")?;
    let v = theta.phasors();
    Ok((0..n)
        .map(|p| {
            let w: C64 = (0..n).map(|m| a[(p, m)] * b[(m, p)] * v[m]).sum::<C64>() * v[p].conj();
            2.0 * w.im
        })
        .collect())
}

fn check_square(m: &DMatrix<C64>, n: usize, name: &str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Kind of objective maximized over the phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// Sum of the user rates.
    SumRate,
    /// Log-sum-exp lower approximation of the smallest user rate.
    SmoothedMin,
}

/// Objective function over the user rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    /// Which objective.
    pub kind: ObjectiveKind,
    /// Smoothing constant of [`ObjectiveKind::SmoothedMin`].
    pub mu: f64,
}

impl Objective {
    /// Sum-rate objective.
    pub fn sum_rate() -> Self {
        Self { kind: ObjectiveKind::SumRate, mu: 0.0 }
    }

    /// Smoothed minimum with constant `mu`.
    pub fn smoothed_min(mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidParameter(format!("smoothing constant must be positive, got {mu}")));
        }
        Ok(Self { kind: ObjectiveKind::SmoothedMin, mu })
    }

    /// Objective value for the given rates.
    pub fn value(&self, rates: &[f64]) -> f64 {
        match self.kind {
            ObjectiveKind::SumRate => rates.iter().sum(),
            ObjectiveKind::SmoothedMin => {
                let m = rates.iter().copied().fold(f64::INFINITY, f64::min);
                let s: f64 = rates.iter().map(|r| (-self.mu * (r - m)).exp()).sum();
                m - s.ln() / self.mu
            }
        }
    }

    /// Derivative of the objective with respect to each rate.
    pub fn rate_weights(&self, rates: &[f64]) -> Vec<f64> {
        match self.kind {
            ObjectiveKind::SumRate => vec![1.0; rates.len()],
            ObjectiveKind::SmoothedMin => {
                let m = rates.iter().copied().fold(f64::INFINITY, f64::min);
                let e: Vec<f64> = rates.iter().map(|r| (-self.mu * (r - m)).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|x| x / s).collect()
            }
        }
    }
}

/// Term weights of `Σ_k c_k r_k` at a given rate breakdown.
fn chain_weights(bd: &RateBreakdown, hwi: &HwiProfile, powers: &[f64], sigma2: f64, c: &[f64]) -> TermWeights {
    let k = bd.rate.len();
    let ku2 = hwi.kappa_u * hwi.kappa_u;
    let kb2 = hwi.kappa_b * hwi.kappa_b;
    let mut w = TermWeights::zeros(k);
    for ki in 0..k {
        let x = bd.sinr[ki];
        let den = powers[ki] * bd.signal[ki] / x;
        let scale = c[ki] / (std::f64::consts::LN_2 * (1.0 + x));
        if !(den.is_finite() && den > 0.0 && scale.is_finite()) {
            continue;
        }
        w.signal[ki] = scale * powers[ki] * (1.0 - x * ku2) / den;
        w.noise[ki] = -scale * x * sigma2 / den;
        for i in 0..k {
            if i != ki {
                w.interference[ki][i] = -scale * x * (1.0 + ku2) * powers[i] / den;
            }
            w.receiver[ki][i] = -scale * x * kb2 * (1.0 + ku2) * powers[i] / den;
        }
    }
    w
}

/// Gradient of the rate of user `k` with respect to the phases.
pub fn grad_rate(
    theta: &PhaseVector,
    stacked: &StackedStatistics,
    config: &SystemConfig,
    powers: &[f64],
    k: usize,
) -> Result<Vec<f64>> {
    if k >= stacked.k {
        return Err(Error::InvalidParameter(format!("user {k} out of range for {} users", stacked.k)));
    }
    let mut c = vec![0.0; stacked.k];
    c[k] = 1.0;
    Ok(weighted_rate_gradient(theta, stacked, config, powers, &c)?.1)
}

/// Value and gradient of an objective with respect to the phases.
pub fn grad_objective(
    theta: &PhaseVector,
    stacked: &StackedStatistics,
    config: &SystemConfig,
    powers: &[f64],
    objective: &Objective,
) -> Result<(f64, Vec<f64>)> {
    check_powers(powers, stacked.k)?;
    let ev = stacked.evaluate(theta)?;
    let bd = stacked.assemble(&ev).breakdown(&stacked.hwi, powers, config.sigma2);
    let c = objective.rate_weights(&bd.rate);
    let w = chain_weights(&bd, &stacked.hwi, powers, config.sigma2, &c);
    Ok((objective.value(&bd.rate), stacked.weighted_gradient(&ev, &w)))
}

fn weighted_rate_gradient(
    theta: &PhaseVector,
    stacked: &StackedStatistics,
    config: &SystemConfig,
    powers: &[f64],
    c: &[f64],
) -> Result<(RateBreakdown, Vec<f64>)> {
    check_powers(powers, stacked.k)?;
    let ev = stacked.evaluate(theta)?;
    let bd = stacked.assemble(&ev).breakdown(&stacked.hwi, powers, config.sigma2);
    let w = chain_weights(&bd, &stacked.hwi, powers, config.sigma2, c);
    let g = stacked.weighted_gradient(&ev, &w);
    Ok((bd, g))
}

/// One system prepared for phase optimization.
#[derive(Clone, Debug)]
pub struct PhaseProblem {
    /// Stacked form of the statistics.
    pub stacked: StackedStatistics,
    /// System dimensions and noise power.
    pub config: SystemConfig,
    /// Transmit power of every user.
    pub powers: Vec<f64>,
}

impl PhaseProblem {
    /// Prepares a system with equal user powers from `config`.
    pub fn new(stats: &ChannelStatistics, hwi: &HwiProfile, config: &SystemConfig) -> Result<Self> {
        let los = LosStructure::new(stats, config)?;
        let stacked = build_stacked(stats, &los, hwi, config)?;
        Ok(Self { stacked, config: config.clone(), powers: config.powers() })
    }

    /// Number of phases.
    pub fn n_phases(&self) -> usize {
        self.stacked.n()
    }

    /// Rates and terms at `theta`.
    pub fn breakdown(&self, theta: &PhaseVector) -> Result<RateBreakdown> {
        let ev = self.stacked.evaluate(theta)?;
        Ok(self.stacked.assemble(&ev).breakdown(&self.stacked.hwi, &self.powers, self.config.sigma2))
    }

    /// Objective value at `theta`.
    pub fn value(&self, theta: &PhaseVector, objective: &Objective) -> Result<f64> {
        Ok(objective.value(&self.breakdown(theta)?.rate))
    }

    /// Objective value and gradient at `theta`.
    pub fn gradient(&self, theta: &PhaseVector, objective: &Objective) -> Result<(f64, Vec<f64>)> {
        grad_objective(theta, &self.stacked, &self.config, &self.powers, objective)
    }
}

/// Stopping and line-search parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentOptions {
    /// Iteration limit.
    pub max_iter: usize,
    /// Stop once the objective improves by less than this.
    pub tol: f64,
    /// First trial step of the line search.
    pub initial_step: f64,
    /// Step shrink factor of the line search.
    pub shrink: f64,
    /// Sufficient-increase constant of the line search.
    pub armijo: f64,
    /// Maximum number of step reductions.
    pub max_backtracks: usize,
    /// Factor applied to the accepted step to seed the next line search.
    pub step_growth: f64,
    /// Largest trial step.
    pub max_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-5, initial_step: 1.0, shrink: 0.5, armijo: 1e-4, max_backtracks: 50, step_growth: 2.0, max_step: 1e4 }
    }
}

/// Iterate of the accelerated ascent.
#[derive(Clone, Debug, PartialEq)]
pub struct AscentState {
    /// Extrapolated point at which the next gradient is taken.
    pub theta_i: PhaseVector,
    /// Latest line-search point.
    pub x_i: PhaseVector,
    /// Previous line-search point.
    pub x_prev: PhaseVector,
    /// Momentum scalar.
    pub a_i: f64,
    /// Completed iterations.
    pub iteration: usize,
    /// Objective at `theta_i`.
    pub objective_value: f64,
}

/// Outcome of one ascent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AscentReport {
    /// Best phases found, wrapped to `[0, 2π)`.
    pub theta_star: PhaseVector,
    /// Objective at each accepted line-search point.
    pub trajectory: Vec<f64>,
    /// Iterations performed.
    pub iterations: usize,
    /// Whether the improvement fell below the tolerance.
    pub converged: bool,
    /// Objective at the starting point.
    pub initial_value: f64,
    /// Objective at `theta_star`.
    pub final_value: f64,
}

/// Next momentum scalar `(1 + √(4a² + 1)) / 2`.
pub fn next_momentum(a: f64) -> f64 {
    (1.0 + (4.0 * a * a + 1.0).sqrt()) / 2.0
}

fn axpy(x: &PhaseVector, t: f64, d: &[f64]) -> PhaseVector {
    PhaseVector::new(x.theta.iter().zip(d).map(|(a, b)| a + t * b).collect())
}

/// Backtracking step from `theta` along `grad`; returns the new point and its value.
fn line_search(
    problem: &PhaseProblem,
    objective: &Objective,
    theta: &PhaseVector,
    value: f64,
    grad: &[f64],
    opts: &AscentOptions,
    t0: f64,
) -> Result<(PhaseVector, f64, f64)> {
    let g2: f64 = grad.iter().map(|g| g * g).sum();
    if g2 == 0.0 || !g2.is_finite() {
        return Ok((theta.clone(), value, t0));
    }
    let mut t = t0;
    for _ in 0..=opts.max_backtracks {
        let x = axpy(theta, t, grad);
        let fx = problem.value(&x, objective)?;
        if fx.is_finite() && fx >= value + opts.armijo * t * g2 {
            return Ok((x, fx, t));
        }
        t *= opts.shrink;
    }
    Ok((theta.clone(), value, t0))
}

/// Accelerated gradient ascent from `theta0`.
///
/// Each iteration takes the gradient at the extrapolated point `θ_i`, finds
/// `x_i` by backtracking, and extrapolates
/// `θ_{i+1} = x_i + (a_i − 1)(x_i − x_{i−1}) / a_{i+1}`. When the
/// extrapolated point is worse than `x_i`, the momentum restarts from `x_i`.
/// The run stops once `θ_{i+1}` improves on `θ_i` by less than the tolerance.
pub fn optimize(
    problem: &PhaseProblem,
    theta0: &PhaseVector,
    objective: &Objective,
    opts: &AscentOptions,
) -> Result<AscentReport> {
    theta0.check_len(problem.n_phases())?;
    if theta0.theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("initial phases must be finite".into()));
    }
    let initial_value = problem.value(theta0, objective)?;
    let mut st = AscentState {
        theta_i: theta0.clone(),
        x_i: theta0.clone(),
        x_prev: theta0.clone(),
        a_i: 1.0,
        iteration: 0,
        objective_value: initial_value,
    };
    let mut best = (theta0.clone(), initial_value);
    let mut trajectory = Vec::new();
    let mut converged = false;
    let mut step = opts.initial_step;
    while st.iteration < opts.max_iter {
        let (value, grad) = problem.gradient(&st.theta_i, objective)?;
        let (x, fx, t) = line_search(problem, objective, &st.theta_i, value, &grad, opts, step)?;
        step = (t * opts.step_growth).min(opts.max_step);
        trajectory.push(fx);
        if fx > best.1 {
            best = (x.clone(), fx);
        }
        let a_next = next_momentum(st.a_i);
        let beta = (st.a_i - 1.0) / a_next;
        let diff: Vec<f64> = x.theta.iter().zip(&st.x_prev.theta).map(|(a, b)| a - b).collect();
        let mut theta_next = axpy(&x, beta, &diff);
        let mut f_next = problem.value(&theta_next, objective)?;
        let mut a_i = a_next;
        if !(f_next >= fx) {
            theta_next = x.clone();
            f_next = fx;
            a_i = 1.0;
        }
        if f_next > best.1 {
            best = (theta_next.clone(), f_next);
        }
        st.iteration += 1;
        let improvement = f_next - st.objective_value;
        st.x_prev = x.clone();
        st.x_i = x;
        st.theta_i = theta_next;
        st.objective_value = f_next;
        st.a_i = a_i;
        if improvement < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(AscentReport {
        theta_star: best.0.wrapped(),
        trajectory,
        iterations: st.iteration,
        converged,
        initial_value,
        final_value: best.1,
    })
}

/// Results of several independent ascents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStartReport {
    /// Index of the run with the largest final value.
    pub best: usize,
    /// One report per start.
    pub runs: Vec<AscentReport>,
}

impl MultiStartReport {
    /// Report of the best run.
    pub fn best_run(&self) -> &AscentReport {
        &self.runs[self.best]
    }
}

/// Runs `starts` ascents from random phases drawn from `seed` in parallel.
pub fn multistart(
    problem: &PhaseProblem,
    objective: &Objective,
    opts: &AscentOptions,
    starts: usize,
    seed: u64,
) -> Result<MultiStartReport> {
    if starts == 0 {
        return Err(Error::InvalidParameter("at least one start is required".into()));
    }
    let n = problem.n_phases();
    let runs = (0..starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let theta0 = PhaseVector::random(n, &mut rng);
            optimize(problem, &theta0, objective, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = (0..runs.len())
        .max_by(|&a, &b| runs[a].final_value.total_cmp(&runs[b].final_value))
        .unwrap_or(0);
    Ok(MultiStartReport { best, runs })
}

/// Mean objective over `draws` uniformly random phase vectors.
pub fn random_phase_average(problem: &PhaseProblem, objective: &Objective, draws: usize, seed: u64) -> Result<f64> {
    if draws == 0 {
        return Err(Error::InvalidParameter("at least one draw is required".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = problem.n_phases();
    let mut total = 0.0;
    for _ in 0..draws {
        let theta = PhaseVector::random(n, &mut rng);
        total += problem.value(&theta, objective)?;
    }
    Ok(total / draws as f64)
}
