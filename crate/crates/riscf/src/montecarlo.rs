//! Monte-Carlo estimates of the expectation terms.
//!
//! Each trial draws a full [`ChannelRealization`], forms the combining
//! channel `q` (without phase noise) and the effective channel `q̂` (with
//! phase noise), draws the distortion noises and records the squared
//! magnitudes whose means the closed form predicts.
//!
//! Trials are processed in fixed-size blocks. Each block owns the trial
//! indices it covers, each trial seeds its own generator from
//! `(seed, trial_index)`, and block accumulators are merged in block order,
//! so the result does not depend on the number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{aggregate_channel, complex_normal, sample_realization, ChannelRealization, LosStructure, PhaseVector};
use crate::closedform::check_powers;
use crate::error::{Error, Result};
use crate::scenario::{ChannelStatistics, HwiProfile, SystemConfig};
use crate::C64;

/// Critical value used for the reported half-widths.
pub const Z_CRITICAL: f64 = 3.0;

/// Sample mean with a `Z_CRITICAL`-sigma half-width.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// Sample mean.
    pub mean: f64,
    /// `Z_CRITICAL · std / √trials`.
    pub half_width: f64,
    /// Number of samples.
    pub trials: u64,
}

impl McEstimate {
    /// True when `value` lies inside `mean ± half_width`.
    pub fn covers(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width
    }

    /// `|value − mean| / |value|`.
    pub fn relative_error(&self, value: f64) -> f64 {
        (value - self.mean).abs() / value.abs()
    }
}

/// Streaming mean and variance accumulator.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    /// Adds one sample.
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Combines with an accumulator over disjoint samples.
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    /// Number of samples.
    pub fn count(&self) -> u64 {
        self.n
    }

    /// Sample mean.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance, zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Mean and half-width.
    pub fn estimate(&self) -> McEstimate {
        let hw = if self.n == 0 { 0.0 } else { Z_CRITICAL * (self.variance() / self.n as f64).sqrt() };
        McEstimate { mean: self.mean, half_width: hw, trials: self.n }
    }
}

/// How the receive distortion enters each trial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionSampling {
    /// Draw the transmit and receive distortion vectors every trial.
    #[default]
    Sampled,
    /// Replace both distortion draws by their conditional mean given the channels.
    Conditional,
}

/// Controls of a Monte-Carlo run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    /// Number of trials.
    pub trials: u64,
    /// Base seed; trial `t` uses stream `t` of this seed.
    pub seed: u64,
    /// Trials per parallel block.
    pub block: u64,
    /// Trials used to estimate the receive distortion covariance.
    pub pilot_trials: u64,
    /// Treatment of the distortion noises.
    pub sampling: DistortionSampling,
}

impl McOptions {
    /// Defaults for `trials` trials under `seed`.
    pub fn new(trials: u64, seed: u64) -> Self {
        Self { trials, seed, block: 1024, pilot_trials: trials, sampling: DistortionSampling::Sampled }
    }
}

/// Monte-Carlo estimates matching [`crate::closedform::ExpectationTerms`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermEstimates {
    /// `|q_kᴴ q̂_k|²`.
    pub signal: Vec<McEstimate>,
    /// `|q_kᴴ q̂_i|²`; diagonal entries are empty.
    pub interference: Vec<Vec<McEstimate>>,
    /// `Σ_i |q_kᴴ q̂_i η_{t,i}|² + |q_kᴴ η_r|²`.
    pub hwi: Vec<McEstimate>,
    /// `‖q_k‖²`.
    pub noise: Vec<McEstimate>,
    /// `q_kᴴ diag(q̂_i q̂_iᴴ) q_k` on the same realization, the distortion power
    /// a receiver whose covariance follows each realization would produce. The
    /// closed form uses the ensemble covariance instead, so this differs from
    /// its receive term; it is reported for comparison only.
    pub conditioned_receiver: Vec<Vec<McEstimate>>,
    /// Diagonal of the receive distortion covariance used in the run, length `L·B`.
    pub receiver_covariance: Vec<f64>,
}

fn trial_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn pilot_seed(seed: u64) -> u64 {
    seed ^ 0x9E37_79B9_7F4A_7C15
}

struct Channels {
    q: Vec<Vec<Vec<C64>>>,
    qh: Vec<Vec<Vec<C64>>>,
}

fn draw_channels(
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    theta: &PhaseVector,
    rng: &mut ChaCha20Rng,
) -> (ChannelRealization, Channels) {
    let real = sample_realization(stats, los, hwi, rng);
    let q = aggregate_channel(stats, los, &real, theta, false);
    let qh = aggregate_channel(stats, los, &real, theta, true);
    (real, Channels { q, qh })
}

fn run_blocks<F>(trials: u64, block: u64, f: F) -> Vec<Welford>
where
    F: Fn(u64, &mut Vec<Welford>) + Sync,
{
    let block = block.max(1);
    let n_blocks = trials.div_ceil(block);
    let parts: Vec<Vec<Welford>> = (0..n_blocks)
        .into_par_iter()
        .map(|bi| {
            let mut acc = Vec::new();
            for t in bi * block..((bi + 1) * block).min(trials) {
                f(t, &mut acc);
            }
            acc
        })
        .collect();
    let mut total: Vec<Welford> = Vec::new();
    for part in &parts {
        if total.len() < part.len() {
            total.resize(part.len(), Welford::default());
        }
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    total
}

fn push_at(acc: &mut Vec<Welford>, idx: usize, x: f64) {
    if acc.len() <= idx {
        acc.resize(idx + 1, Welford::default());
    }
    acc[idx].push(x);
}

/// Diagonal of `κ_b²(1+κ_u²) Σ_i p_i E{q̂_i q̂_iᴴ}`, stacked AP by AP, estimated
/// from `trials` independent trials.
pub fn receiver_covariance(
    theta: &PhaseVector,
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    powers: &[f64],
    trials: u64,
    seed: u64,
    block: u64,
) -> Vec<f64> {
    let (l, k, b) = (stats.n_aps(), stats.n_users(), los.b);
    let scale = hwi.kappa_b * hwi.kappa_b * (1.0 + hwi.kappa_u * hwi.kappa_u);
    if scale == 0.0 || trials == 0 {
        return vec![0.0; l * b];
    }
    let acc = run_blocks(trials, block, |t, acc| {
        let mut rng = trial_rng(seed, t);
        let (_, ch) = draw_channels(stats, los, hwi, theta, &mut rng);
        for li in 0..l {
            for bi in 0..b {
                let v: f64 = (0..k).map(|i| powers[i] * ch.qh[li][i][bi].norm_sqr()).sum();
                push_at(acc, li * b + bi, v);
            }
        }
    });
    acc.iter().map(|w| scale * w.mean()).collect()
}

/// Estimates signal, interference, distortion and noise terms of all users.
#[allow(clippy::too_many_arguments)]
pub fn estimate_terms(
    theta: &PhaseVector,
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    config: &SystemConfig,
    powers: &[f64],
    opts: &McOptions,
) -> Result<TermEstimates> {
    config.validate()?;
    stats.check_config(config)?;
    check_powers(powers, config.k)?;
    theta.check_len(config.n_phases())?;
    if opts.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let (l, k, b) = (config.l, config.k, config.b);
    let cov = match opts.sampling {
        DistortionSampling::Sampled | DistortionSampling::Conditional => {
            receiver_covariance(theta, stats, los, hwi, powers, opts.pilot_trials, pilot_seed(opts.seed), opts.block)
        }
    };
    let cov_sqrt: Vec<f64> = cov.iter().map(|c| c.sqrt()).collect();
    let ku2 = hwi.kappa_u * hwi.kappa_u;
    let tx_std: Vec<f64> = powers.iter().map(|p| (ku2 * p).sqrt()).collect();
    let kk = k * k;
    // layout: signal/interference k*k, hwi k, noise k, receiver k*k
    let acc = run_blocks(opts.trials, opts.block, |t, acc| {
        let mut rng = trial_rng(opts.seed, t);
        let (_, ch) = draw_channels(stats, los, hwi, theta, &mut rng);
        let mut inner = vec![C64::new(0.0, 0.0); kk];
        for ki in 0..k {
            for i in 0..k {
                inner[ki * k + i] = (0..l)
                    .map(|li| ch.q[li][ki].iter().zip(&ch.qh[li][i]).map(|(a, c)| a.conj() * c).sum::<C64>())
                    .sum();
            }
        }
        let eta_t: Vec<C64> = tx_std.iter().map(|s| complex_normal(&mut rng) * *s).collect();
        let eta_r: Vec<C64> = cov_sqrt.iter().map(|s| complex_normal(&mut rng) * *s).collect();
        for ki in 0..k {
            for i in 0..k {
                push_at(acc, ki * k + i, inner[ki * k + i].norm_sqr());
            }
            let (tx, rx) = match opts.sampling {
                DistortionSampling::Sampled => {
                    let tx: f64 = (0..k).map(|i| inner[ki * k + i].norm_sqr() * eta_t[i].norm_sqr()).sum();
                    let mut proj = C64::new(0.0, 0.0);
                    for li in 0..l {
                        for bi in 0..b {
                            proj += ch.q[li][ki][bi].conj() * eta_r[li * b + bi];
                        }
                    }
                    (tx, proj.norm_sqr())
                }
                DistortionSampling::Conditional => {
                    let tx: f64 = (0..k).map(|i| inner[ki * k + i].norm_sqr() * ku2 * powers[i]).sum();
                    let mut rx = 0.0;
                    for li in 0..l {
                        for bi in 0..b {
                            rx += ch.q[li][ki][bi].norm_sqr() * cov[li * b + bi];
                        }
                    }
                    (tx, rx)
                }
            };
            push_at(acc, kk + ki, tx + rx);
            let nq: f64 = (0..l).map(|li| ch.q[li][ki].iter().map(|x| x.norm_sqr()).sum::<f64>()).sum();
            push_at(acc, kk + k + ki, nq);
            for i in 0..k {
                let mut v = 0.0;
                for li in 0..l {
                    for bi in 0..b {
                        v += ch.q[li][ki][bi].norm_sqr() * ch.qh[li][i][bi].norm_sqr();
                    }
                }
                push_at(acc, 2 * k + kk + ki * k + i, v);
            }
        }
    });
    let est = |idx: usize| acc[idx].estimate();
    let empty = McEstimate { mean: 0.0, half_width: 0.0, trials: 0 };
    Ok(TermEstimates {
        signal: (0..k).map(|ki| est(ki * k + ki)).collect(),
        interference: (0..k)
            .map(|ki| (0..k).map(|i| if i == ki { empty } else { est(ki * k + i) }).collect())
            .collect(),
        hwi: (0..k).map(|ki| est(kk + ki)).collect(),
        noise: (0..k).map(|ki| est(kk + k + ki)).collect(),
        conditioned_receiver: (0..k).map(|ki| (0..k).map(|i| est(2 * k + kk + ki * k + i)).collect()).collect(),
        receiver_covariance: cov,
    })
}

/// Rate of every user from the Monte-Carlo means through the same ratio as
/// the closed form, `log₂(1 + p_k E{S} / (Σ p_i E{I} + E{HWI} + σ² E{N}))`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_rate(
    theta: &PhaseVector,
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    config: &SystemConfig,
    powers: &[f64],
    opts: &McOptions,
) -> Result<Vec<f64>> {
    let est = estimate_terms(theta, stats, los, hwi, config, powers, opts)?;
    Ok(rate_from_estimates(&est, powers, config.sigma2))
}

/// Rates implied by a set of term estimates.
pub fn rate_from_estimates(est: &TermEstimates, powers: &[f64], sigma2: f64) -> Vec<f64> {
    let k = est.signal.len();
    (0..k)
        .map(|ki| {
            let inter: f64 = (0..k).filter(|&i| i != ki).map(|i| powers[i] * est.interference[ki][i].mean).sum();
            let sinr = powers[ki] * est.signal[ki].mean / (inter + est.hwi[ki].mean + sigma2 * est.noise[ki].mean);
            (1.0 + sinr).log2()
        })
        .collect()
}
