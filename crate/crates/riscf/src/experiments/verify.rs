//! Self-check suite behind the `verify` subcommand.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{convergence_probe, sinr_nlos, sinr_ris_free, LimitCase, ScalingMode};
use crate::channel::{sample_realization, sinc_moment, LosStructure, PhaseVector};
use crate::closedform::{ClosedForm, RateBreakdown};
use crate::error::Result;
use crate::montecarlo::{estimate_terms, McOptions};
use crate::optimizer::{grad_objective, grad_rate, multistart, optimize, random_phase_average, AscentOptions, Objective, PhaseProblem};
use crate::reform::{build_stacked, rate_reform};
use crate::scenario::{reference_defaults, synthetic_statistics, ChannelStatistics, HwiProfile, SyntheticRanges, SystemConfig};
use crate::C64;

/// Depth of the suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyLevel {
    /// Small instance counts and `10⁴`-trial simulations with wider tolerances.
    Fast,
    /// Full instance counts and `10⁵`-trial simulations.
    Full,
}

/// Outcome of one criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    /// Short identifier.
    pub name: String,
    /// Whether the measurement met the threshold.
    pub passed: bool,
    /// Measured value in words.
    pub measured: String,
    /// Threshold in words.
    pub threshold: String,
    /// Wall-clock time of the check.
    pub seconds: f64,
}

struct Instance {
    stats: ChannelStatistics,
    hwi: HwiProfile,
    config: SystemConfig,
    powers: Vec<f64>,
    theta: PhaseVector,
}

fn instance(seed: u64) -> Result<Instance> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(7);
    let (l, s, k) = (rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4));
    let b = [1, 4, 9][rng.random_range(0..3)];
    let r = [4, 9, 16][rng.random_range(0..3)];
    let stats = synthetic_statistics(l, s, k, SyntheticRanges::default(), seed)?;
    let hwi = HwiProfile::new(rng.random::<f64>() * 0.4, rng.random::<f64>() * 0.4, Some(rng.random_range(1..4)))?;
    let config = SystemConfig { l, s, k, b, r, d_over_lambda: 0.5, p: 1.0, sigma2: 0.1 + rng.random::<f64>(), mu: 10.0 };
    let powers = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
    let theta = PhaseVector::random(config.n_phases(), &mut rng);
    Ok(Instance { stats, hwi, config, powers, theta })
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

fn breakdown_gap(a: &RateBreakdown, b: &RateBreakdown) -> f64 {
    let mut worst = 0.0f64;
    for k in 0..a.rate.len() {
        for (x, y) in [(a.signal[k], b.signal[k]), (a.hwi[k], b.hwi[k]), (a.noise[k], b.noise[k]), (a.rate[k], b.rate[k])] {
            worst = worst.max(rel(x, y));
        }
        for i in 0..a.rate.len() {
            worst = worst.max(rel(a.interference[k][i], b.interference[k][i]));
        }
    }
    worst
}

fn timed(name: &str, threshold: String, f: impl FnOnce() -> Result<(bool, String)>) -> Result<CriterionResult> {
    let start = Instant::now();
    let (passed, measured) = f()?;
    Ok(CriterionResult { name: name.into(), passed, measured, threshold, seconds: start.elapsed().as_secs_f64() })
}

/// Runs every criterion and returns one result per criterion.
///
/// An `Err` means a check could not run; failed thresholds are reported in
/// the results.
pub fn verify(level: VerifyLevel) -> Result<Vec<CriterionResult>> {
    let full = level == VerifyLevel::Full;
    Ok(vec![
        mc_terms(full)?,
        reform_equivalence(if full { 100 } else { 20 })?,
        gradients(if full { 25 } else { 5 })?,
        specializations(if full { 50 } else { 10 })?,
        hwi_ceiling()?,
        power_scaling()?,
        phase_independence()?,
        optimizer_behavior(if full { 20 } else { 4 })?,
        phase_noise_moments(if full { 100_000 } else { 10_000 }, full)?,
    ])
}

fn mc_terms(full: bool) -> Result<CriterionResult> {
    let (n, trials, tol, tol_hwi) = if full { (10, 100_000, 0.03, 0.04) } else { (3, 10_000, 0.10, 0.12) };
    timed("mc_terms", format!("{tol} relative ({tol_hwi} for hwi)"), || {
        let mut worst = [0.0f64; 4];
        for seed in 0..n {
            for r in [4, 16] {
                let config = SystemConfig { l: 2, s: 2, k: 3, b: 4, r, d_over_lambda: 0.5, p: 1.0, sigma2: 0.1, mu: 10.0 };
                let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), seed)?;
                let hwi = HwiProfile::new(0.3, 0.3, Some(2))?;
                let theta = PhaseVector::random(config.n_phases(), &mut ChaCha20Rng::seed_from_u64(seed + 100));
                let los = LosStructure::new(&stats, &config)?;
                let powers = config.powers();
                let terms = ClosedForm::new(&stats, &los, &hwi, &config)?.terms(&theta)?;
                let hw = terms.hwi(&hwi, &powers);
                let mc = estimate_terms(&theta, &stats, &los, &hwi, &config, &powers, &McOptions::new(trials, seed))?;
                for k in 0..3 {
                    worst[0] = worst[0].max(mc.signal[k].relative_error(terms.signal[k]));
                    worst[2] = worst[2].max(mc.hwi[k].relative_error(hw[k]));
                    worst[3] = worst[3].max(mc.noise[k].relative_error(terms.noise[k]));
                    for i in (0..3).filter(|&i| i != k) {
                        worst[1] = worst[1].max(mc.interference[k][i].relative_error(terms.interference[k][i]));
                    }
                }
            }
        }
        let passed = worst[0] < tol && worst[1] < tol && worst[2] < tol_hwi && worst[3] < tol;
        Ok((
            passed,
            format!("signal {:.4}, interference {:.4}, hwi {:.4}, noise {:.4}", worst[0], worst[1], worst[2], worst[3]),
        ))
    })
}

fn reform_equivalence(n: u64) -> Result<CriterionResult> {
    timed("reform_equivalence", "1e-9 relative".into(), || {
        let mut worst = 0.0f64;
        for seed in 0..n {
            let mut inst = instance(seed)?;
            if seed % 3 == 2 {
                inst.stats = inst.stats.with_pure_los(true);
            }
            let los = LosStructure::new(&inst.stats, &inst.config)?;
            let a = ClosedForm::new(&inst.stats, &los, &inst.hwi, &inst.config)?.breakdown(
                &inst.theta,
                &inst.hwi,
                &inst.config,
                &inst.powers,
            )?;
            let stacked = build_stacked(&inst.stats, &los, &inst.hwi, &inst.config)?;
            let b = rate_reform(&inst.theta, &stacked, &inst.config, &inst.powers)?;
            worst = worst.max(breakdown_gap(&a, &b));
        }
        Ok((worst < 1e-9, format!("{worst:.3e} over {n} instances")))
    })
}

fn central_differences(f: impl Fn(&PhaseVector) -> Result<f64>, theta: &PhaseVector, h: f64) -> Result<Vec<f64>> {
    (0..theta.len())
        .map(|x| {
            let mut p = theta.theta.clone();
            p[x] += h;
            let mut m = theta.theta.clone();
            m[x] -= h;
            Ok((f(&PhaseVector::new(p))? - f(&PhaseVector::new(m))?) / (2.0 * h))
        })
        .collect()
}

fn gradient_error(g: &[f64], fd: &[f64]) -> f64 {
    let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    g.iter().zip(fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

fn gradients(n: u64) -> Result<CriterionResult> {
    timed("gradients", "1e-5 relative to central differences, h = 1e-6".into(), || {
        let mut worst = 0.0f64;
        for seed in 0..n {
            let inst = instance(500 + seed)?;
            let los = LosStructure::new(&inst.stats, &inst.config)?;
            let cf = ClosedForm::new(&inst.stats, &los, &inst.hwi, &inst.config)?;
            let stacked = build_stacked(&inst.stats, &los, &inst.hwi, &inst.config)?;
            let rates = |t: &PhaseVector| cf.breakdown(t, &inst.hwi, &inst.config, &inst.powers).map(|b| b.rate);
            let k = (seed as usize) % inst.config.k;
            let g = grad_rate(&inst.theta, &stacked, &inst.config, &inst.powers, k)?;
            let fd = central_differences(|t| Ok(rates(t)?[k]), &inst.theta, 1e-6)?;
            worst = worst.max(gradient_error(&g, &fd));
            for obj in [Objective::sum_rate(), Objective::smoothed_min(5.0)?] {
                let (_, g) = grad_objective(&inst.theta, &stacked, &inst.config, &inst.powers, &obj)?;
                let fd = central_differences(|t| Ok(obj.value(&rates(t)?)), &inst.theta, 1e-6)?;
                worst = worst.max(gradient_error(&g, &fd));
            }
        }
        Ok((worst < 1e-5, format!("{worst:.3e} over {n} instances")))
    })
}

fn general_sinr(stats: &ChannelStatistics, hwi: &HwiProfile, cfg: &SystemConfig, powers: &[f64], theta: &PhaseVector) -> Result<Vec<f64>> {
    let los = LosStructure::new(stats, cfg)?;
    Ok(ClosedForm::new(stats, &los, hwi, cfg)?.breakdown(theta, hwi, cfg, powers)?.sinr)
}

fn specializations(n: u64) -> Result<CriterionResult> {
    timed("specializations", "1e-9 relative".into(), || {
        let (mut free, mut nlos) = (0.0f64, 0.0f64);
        for seed in 0..n {
            let inst = instance(1000 + seed)?;
            let stats = inst.stats.without_ris();
            let cfg = SystemConfig { s: 0, ..inst.config.clone() };
            let g = general_sinr(&stats, &inst.hwi, &cfg, &inst.powers, &PhaseVector::zeros(0))?;
            for (k, x) in g.iter().enumerate() {
                free = free.max(rel(sinr_ris_free(&stats, &inst.hwi, &cfg, &inst.powers, k)?, *x));
            }
            let stats = inst.stats.with_delta(0.0)?;
            let g = general_sinr(&stats, &inst.hwi, &inst.config, &inst.powers, &inst.theta)?;
            for (k, x) in g.iter().enumerate() {
                nlos = nlos.max(rel(sinr_nlos(&stats, &inst.hwi, &inst.config, &inst.powers, k)?, *x));
            }
        }
        Ok((free < 1e-9 && nlos < 1e-9, format!("surface-free {free:.3e}, NLoS {nlos:.3e} over {n} instances")))
    })
}

fn hwi_ceiling() -> Result<CriterionResult> {
    let ceiling = 1.0 / 0.09;
    timed("hwi_ceiling", format!("within 5% of {ceiling:.2} at B = 10000"), || {
        let stats = synthetic_statistics(3, 0, 3, SyntheticRanges::default(), 4)?;
        let hwi = HwiProfile::new(0.3, 0.3, None)?;
        let base = SystemConfig { l: 3, s: 0, k: 3, b: 4, r: 4, d_over_lambda: 0.5, p: 1.0, sigma2: 0.1, mu: 10.0 };
        let mut values = Vec::new();
        for b in [100, 1024, 10000] {
            let cfg = base.with_arrays(b, 4);
            values.push(sinr_ris_free(&stats, &hwi, &cfg, &cfg.powers(), 0)?);
        }
        let last = values[2];
        Ok((rel(last, ceiling) < 0.05, format!("SINR {values:.3?}")))
    })
}

fn power_scaling() -> Result<CriterionResult> {
    timed("power_scaling", "BR gap decreasing and < 10% at (256,256); R² SINR ratio < 0.2".into(), || {
        let stats = synthetic_statistics(2, 2, 3, SyntheticRanges::default(), 9)?.with_delta(0.0)?;
        let hwi = HwiProfile::new(0.3, 0.3, Some(2))?;
        let base = SystemConfig { l: 2, s: 2, k: 3, b: 16, r: 16, d_over_lambda: 0.5, p: 1.0, sigma2: 0.5, mu: 10.0 };
        let grid = [(16, 16), (64, 64), (256, 256)];
        let br = convergence_probe(ScalingMode::PerBr, Some(LimitCase::NlBr), &grid, &stats, &hwi, &base, None)?;
        let gaps: Vec<f64> = br.iter().map(|p| p.gap.unwrap_or(f64::INFINITY)).collect();
        let r2 = convergence_probe(ScalingMode::PerR2, None, &[(16, 16), (16, 256)], &stats, &hwi, &base, None)?;
        let ratio = (0..3).map(|k| r2[1].sinr[k] / r2[0].sinr[k]).fold(0.0, f64::max);
        let passed = gaps.windows(2).all(|w| w[1] < w[0]) && gaps[2] < 0.1 && ratio < 0.2;
        Ok((passed, format!("BR gaps {gaps:.4?}, R² ratio {ratio:.4}")))
    })
}

fn phase_independence() -> Result<CriterionResult> {
    timed("phase_independence", "1e-10 relative".into(), || {
        let mut worst = 0.0f64;
        for seed in 0..10 {
            let inst = instance(2000 + seed)?;
            let stats = inst.stats.with_delta(0.0)?;
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let other = PhaseVector::random(inst.config.n_phases(), &mut rng);
            let a = general_sinr(&stats, &inst.hwi, &inst.config, &inst.powers, &inst.theta)?;
            let b = general_sinr(&stats, &inst.hwi, &inst.config, &inst.powers, &other)?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max(rel((1.0 + x).log2(), (1.0 + y).log2()));
            }
        }
        Ok((worst < 1e-10, format!("{worst:.3e}")))
    })
}

fn optimizer_behavior(scenarios: u64) -> Result<CriterionResult> {
    let need = (scenarios * 9).div_ceil(10);
    timed(
        "optimizer",
        format!(">= 3 of 4 starts converge; optimized beats random on >= {need} of {scenarios}; monotone"),
        || {
            let defaults = reference_defaults();
            let opts = AscentOptions::default();
            let objective = Objective::sum_rate();
            let stats = defaults.statistics(0)?;
            let problem = PhaseProblem::new(&stats, &defaults.hwi, &defaults.config)?;
            let report = multistart(&problem, &objective, &opts, 4, 0)?;
            let converged = report.runs.iter().filter(|r| r.converged).count();
            let mut monotone = report.runs.iter().all(|r| r.trajectory.windows(2).all(|w| w[1] >= w[0]));
            let mut wins = 0;
            for seed in 0..scenarios {
                let stats = defaults.statistics(100 + seed)?;
                let problem = PhaseProblem::new(&stats, &defaults.hwi, &defaults.config)?;
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let theta0 = PhaseVector::random(problem.n_phases(), &mut rng);
                let run = optimize(&problem, &theta0, &objective, &opts)?;
                monotone &= run.trajectory.windows(2).all(|w| w[1] >= w[0]);
                let baseline = random_phase_average(&problem, &objective, 100, 1000 + seed)?;
                if run.final_value > baseline {
                    wins += 1;
                }
            }
            let passed = converged >= 3 && wins >= need && monotone;
            Ok((passed, format!("{converged}/4 converged, {wins}/{scenarios} beat random, monotone {monotone}")))
        },
    )
}

fn phase_noise_moments(samples: usize, full: bool) -> Result<CriterionResult> {
    let (tol1, tol2) = if full { (0.01, 0.02) } else { (0.03, 0.05) };
    timed("phase_noise_moments", format!("first moment {tol1}, covariance {tol2} relative"), || {
        let r = 16;
        let stats = synthetic_statistics(1, 1, 1, SyntheticRanges::default(), 0)?;
        let config = SystemConfig { l: 1, s: 1, k: 1, b: 1, r, d_over_lambda: 0.5, p: 1.0, sigma2: 1.0, mu: 10.0 };
        let los = LosStructure::new(&stats, &config)?;
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let w0 = DMatrix::from_fn(r, r, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let w = &w0 * w0.adjoint();
        let (mut first, mut second) = (0.0f64, 0.0f64);
        for bits in [1u32, 2, 3] {
            let hwi = HwiProfile::new(0.0, 0.0, Some(bits))?;
            let sn = sinc_moment(hwi.kappa_r());
            let mut m1 = C64::new(0.0, 0.0);
            let mut m2 = DMatrix::<C64>::zeros(r, r);
            for _ in 0..samples {
                let real = sample_realization(&stats, &los, &hwi, &mut rng);
                let e: Vec<C64> = real.theta_noise[0].iter().map(|t| C64::from_polar(1.0, *t)).collect();
                m1 += e.iter().sum::<C64>() / r as f64;
                for a in 0..r {
                    for b in 0..r {
                        m2[(a, b)] += e[a] * w[(a, b)] * e[b].conj();
                    }
                }
            }
            let m1 = m1 / samples as f64;
            let m2 = m2 / C64::new(samples as f64, 0.0);
            let expect = DMatrix::from_fn(r, r, |a, b| if a == b { w[(a, b)] } else { w[(a, b)] * sn * sn });
            first = first.max((m1 - sn).norm() / sn);
            second = second.max((&m2 - &expect).norm() / expect.norm());
        }
        Ok((first < tol1 && second < tol2, format!("first moment {first:.4}, covariance {second:.4}")))
    })
}
