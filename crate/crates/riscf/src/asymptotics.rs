//! Special cases and power-scaling limits of the rate.
//!
//! Every function here evaluates its own expression from the channel
//! statistics and never calls the general evaluator, so equality with the
//! general rate in the matching special case is a meaningful check.
//!
//! - [`sinr_ris_free`]: no surfaces.
//! - [`sinr_nlos`]: surface-to-AP channels without LoS (`δ = 0`).
//! - [`sinr_limit`]: limits under power scaling, for `δ = 0` as `B`, `R` or
//!   both grow, and for pure-LoS surface links as `B` grows.

use serde::{Deserialize, Serialize};

use crate::channel::{sinc_moment, LosStructure, PhaseVector};
use crate::closedform::{check_powers, f_lsk, ClosedForm};
use crate::error::{Error, Result};
use crate::scenario::{ChannelStatistics, HwiProfile, SystemConfig};
use crate::C64;

/// SINR of every user from power-independent terms.
fn assemble_sinr(
    k: usize,
    powers: &[f64],
    sigma2: f64,
    signal: f64,
    interference: &[f64],
    hwi: f64,
    noise: f64,
) -> f64 {
    let inter: f64 = (0..powers.len()).filter(|&i| i != k).map(|i| powers[i] * interference[i]).sum();
    powers[k] * signal / (inter + hwi + sigma2 * noise)
}

/// SINR of user `k` without any surface.
pub fn sinr_ris_free(
    stats: &ChannelStatistics,
    hwi: &HwiProfile,
    config: &SystemConfig,
    powers: &[f64],
    k: usize,
) -> Result<f64> {
    hwi.validate()?;
    check_powers(powers, stats.n_users())?;
    check_user(k, stats.n_users())?;
    let bf = config.b as f64;
    let (ku2, kb2) = (hwi.kappa_u * hwi.kappa_u, hwi.kappa_b * hwi.kappa_b);
    let g = &stats.gamma;
    let l = stats.n_aps();
    let gb: f64 = (0..l).map(|x| g[x][k] * bf).sum();
    let g2b: f64 = (0..l).map(|x| g[x][k] * g[x][k] * bf).sum();
    let pk = powers[k];
    let num = pk * (gb * gb + g2b);
    let own: f64 = (0..l).map(|x| g[x][k] * bf * (config.sigma2 - pk * g[x][k])).sum();
    let cross: f64 = (0..powers.len())
        .map(|i| (0..l).map(|x| powers[i] * g[x][k] * g[x][i] * bf).sum::<f64>())
        .sum();
    Ok(num / (pk * ku2 * gb * gb + own + (1.0 + kb2) * (1.0 + ku2) * cross))
}

fn check_user(k: usize, n: usize) -> Result<()> {
    if k >= n {
        return Err(Error::InvalidParameter(format!("user {k} out of range for {n} users")));
    }
    Ok(())
}

/// Statistics shorthand for the `δ = 0` expressions.
struct Nlos<'a> {
    stats: &'a ChannelStatistics,
    hh: Vec<Vec<Vec<C64>>>,
    sn: f64,
    sn2: f64,
    l: usize,
    s: usize,
    bf: f64,
    rf: f64,
}

impl<'a> Nlos<'a> {
    fn new(stats: &'a ChannelStatistics, hwi: &HwiProfile, config: &SystemConfig) -> Result<Self> {
        hwi.validate()?;
        stats.check_config(config)?;
        let los = LosStructure::new(stats, config)?;
        let s = stats.n_ris();
        let k = stats.n_users();
        let hh = (0..s)
            .map(|si| {
                (0..k)
                    .map(|a| {
                        (0..k)
                            .map(|b| los.a_r[si][a].iter().zip(&los.a_r[si][b]).map(|(x, y)| x.conj() * y).sum())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let sn = sinc_moment(hwi.kappa_r());
        Ok(Self {
            stats,
            hh,
            sn,
            sn2: sn * sn,
            l: stats.n_aps(),
            s,
            bf: config.b as f64,
            rf: config.r as f64,
        })
    }

    fn ba(&self, l: usize, s: usize, k: usize) -> f64 {
        self.stats.beta[l][s] * self.stats.alpha[s][k]
    }

    fn cnl(&self, l: usize, s: usize, k: usize) -> f64 {
        self.ba(l, s, k) / (self.stats.eps[s][k] + 1.0)
    }

    fn eps(&self, s: usize, k: usize) -> f64 {
        self.stats.eps[s][k]
    }

    fn gamma(&self, l: usize, k: usize) -> f64 {
        self.stats.gamma[l][k]
    }

    fn sum_ba(&self, k: usize) -> f64 {
        (0..self.l).map(|l| (0..self.s).map(|s| self.ba(l, s, k)).sum::<f64>()).sum()
    }

    fn sum_gamma(&self, k: usize) -> f64 {
        (0..self.l).map(|l| self.gamma(l, k)).sum()
    }

    /// `Σ_l Σ_{s1,s2} β_{l,s1} β_{l,s2} α_{s1,k} α_{s2,i}`.
    fn same_ap(&self, k: usize, i: usize) -> f64 {
        (0..self.l)
            .map(|l| {
                let a: f64 = (0..self.s).map(|s| self.ba(l, s, k)).sum();
                let b: f64 = (0..self.s).map(|s| self.ba(l, s, i)).sum();
                a * b
            })
            .sum()
    }

    /// `Σ_{l1,l2,s} c_{l1,s,k} c_{l2,s,k}`-type sum with per-surface weight.
    fn per_surface(&self, f: impl Fn(usize, usize, usize) -> f64) -> f64 {
        let mut t = 0.0;
        for l1 in 0..self.l {
            for l2 in 0..self.l {
                for s in 0..self.s {
                    t += f(l1, l2, s);
                }
            }
        }
        t
    }

    /// `|Σ_s Σ_l √(c_k c_i ε_k ε_i) h̄_{s,k}ᴴ h̄_{s,i}|²`.
    fn los_overlap(&self, k: usize, i: usize) -> f64 {
        let z: C64 = (0..self.s)
            .map(|s| {
                let w: f64 = (0..self.l)
                    .map(|l| (self.cnl(l, s, k) * self.cnl(l, s, i) * self.eps(s, k) * self.eps(s, i)).sqrt())
                    .sum();
                self.hh[s][k][i] * w
            })
            .sum();
        z.norm_sqr()
    }

    /// `Σ_{l1,l2,s} √(c_{l1,s,k} c_{l1,s,i} c_{l2,s,i} c_{l2,s,k}) (ε_k(1 + ε_i(1-sinc²)) + ε_i + 1)`.
    fn scatter_overlap(&self, k: usize, i: usize) -> f64 {
        self.per_surface(|l1, l2, s| {
            (self.cnl(l1, s, k) * self.cnl(l1, s, i) * self.cnl(l2, s, i) * self.cnl(l2, s, k)).sqrt()
                * (self.eps(s, k) * (1.0 + self.eps(s, i) * (1.0 - self.sn2)) + self.eps(s, i) + 1.0)
        })
    }

    fn noise(&self, k: usize) -> f64 {
        self.sum_ba(k) * self.bf * self.rf + self.sum_gamma(k) * self.bf
    }

    fn signal(&self, k: usize) -> f64 {
        let (bf, rf, sn, sn2) = (self.bf, self.rf, self.sn, self.sn2);
        let sba = self.sum_ba(k);
        let mut t = sba * sba * bf * bf * rf * rf * sn2 + self.same_ap(k, k) * bf * rf * rf;
        t += bf * bf * rf
            * self.per_surface(|l1, l2, s| {
                2.0 * self.ba(l1, s, k) * self.gamma(l2, k) * sn
                    + self.cnl(l1, s, k) * self.cnl(l2, s, k) * (2.0 * self.eps(s, k) + 1.0)
                    + self.ba(l1, s, k) * self.ba(l2, s, k) * (1.0 - sn2)
            });
        for l in 0..self.l {
            for s in 0..self.s {
                t += bf * rf
                    * (2.0 * self.ba(l, s, k) * self.gamma(l, k)
                        + self.cnl(l, s, k).powi(2) * (2.0 * self.eps(s, k) + 1.0));
            }
        }
        let gs = self.sum_gamma(k) * bf;
        t + gs * gs + (0..self.l).map(|l| self.gamma(l, k).powi(2) * bf).sum::<f64>()
    }

    fn interference(&self, k: usize, i: usize) -> f64 {
        let (bf, rf) = (self.bf, self.rf);
        let mut t = self.los_overlap(k, i) * bf * bf * self.sn2 + self.scatter_overlap(k, i) * bf * bf * rf;
        t += self.same_ap(k, i) * bf * rf * rf;
        for l in 0..self.l {
            for s in 0..self.s {
                t += self.stats.beta[l][s]
                    * bf
                    * rf
                    * (self.stats.alpha[s][k] * self.gamma(l, i) + self.stats.alpha[s][i] * self.gamma(l, k));
            }
            t += self.gamma(l, k) * self.gamma(l, i) * bf;
        }
        t
    }

    fn receiver(&self, k: usize, i: usize) -> f64 {
        (0..self.l)
            .map(|l| {
                let a: f64 = (0..self.s).map(|s| self.ba(l, s, k)).sum::<f64>() * self.bf * self.rf
                    + self.gamma(l, k) * self.bf;
                let b: f64 = self.gamma(l, i) + (0..self.s).map(|s| self.ba(l, s, i)).sum::<f64>() * self.rf;
                a * b
            })
            .sum()
    }
}

/// SINR of user `k` when no surface-to-AP channel has a LoS component.
///
/// The value does not depend on the phases. The inputs' `δ` are ignored.
pub fn sinr_nlos(
    stats: &ChannelStatistics,
    hwi: &HwiProfile,
    config: &SystemConfig,
    powers: &[f64],
    k: usize,
) -> Result<f64> {
    check_powers(powers, stats.n_users())?;
    check_user(k, stats.n_users())?;
    let m = Nlos::new(stats, hwi, config)?;
    let n = stats.n_users();
    let (ku2, kb2) = (hwi.kappa_u * hwi.kappa_u, hwi.kappa_b * hwi.kappa_b);
    let signal = m.signal(k);
    let inter: Vec<f64> = (0..n).map(|i| if i == k { 0.0 } else { m.interference(k, i) }).collect();
    let tx = powers[k] * signal + (0..n).filter(|&i| i != k).map(|i| powers[i] * inter[i]).sum::<f64>();
    let rx: f64 = (0..n).map(|i| powers[i] * m.receiver(k, i)).sum();
    let hw = ku2 * tx + kb2 * (1.0 + ku2) * rx;
    Ok(assemble_sinr(k, powers, config.sigma2, signal, &inter, hw, m.noise(k)))
}

/// Asymptotic regime of [`sinr_limit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitCase {
    /// `δ = 0`, `p_k = p/B`, `B → ∞`.
    NlB,
    /// `δ = 0`, `p_k = p/R`, `R → ∞`.
    NlR,
    /// `δ = 0`, `p_k = p/(BR)`, `B, R → ∞`.
    NlBr,
    /// Pure-LoS surface links, `p_k = p/B`, `B → ∞`.
    OlB,
}

/// Power-normalized terms of a limit expression for one user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTerms {
    /// Desired-signal term.
    pub signal: f64,
    /// Interference term per other user, zero at the user's own index.
    pub interference: Vec<f64>,
    /// Receiver-distortion part of the impairment term, already multiplied
    /// by the reference power.
    pub receiver: f64,
    /// Noise term.
    pub noise: f64,
    /// Sum of the contributions carrying a `1 − sinc²(κ_r π)` factor.
    pub phase_noise: f64,
}

impl LimitTerms {
    /// SINR for reference power `p`, transmitter distortion `κ_u²` and noise
    /// power `sigma2`.
    pub fn sinr(&self, p: f64, kappa_u2: f64, sigma2: f64) -> f64 {
        let isum: f64 = self.interference.iter().sum();
        let hw = kappa_u2 * p * (self.signal + isum) + self.receiver;
        p * self.signal / (p * isum + hw + sigma2 * self.noise)
    }
}

/// Limit SINR of every user for reference power `p`.
///
/// `theta` is required for [`LimitCase::OlB`] and ignored otherwise.
pub fn sinr_limit(
    case: LimitCase,
    stats: &ChannelStatistics,
    hwi: &HwiProfile,
    config: &SystemConfig,
    p: f64,
    theta: Option<&PhaseVector>,
) -> Result<Vec<f64>> {
    let ku2 = hwi.kappa_u * hwi.kappa_u;
    Ok(limit_terms(case, stats, hwi, config, p, theta)?
        .iter()
        .map(|t| t.sinr(p, ku2, config.sigma2))
        .collect())
}

/// Terms of the limit expression of every user for reference power `p`.
///
/// `theta` is required for [`LimitCase::OlB`] and ignored otherwise.
pub fn limit_terms(
    case: LimitCase,
    stats: &ChannelStatistics,
    hwi: &HwiProfile,
    config: &SystemConfig,
    p: f64,
    theta: Option<&PhaseVector>,
) -> Result<Vec<LimitTerms>> {
    let m = Nlos::new(stats, hwi, config)?;
    let n = stats.n_users();
    let ku2 = hwi.kappa_u * hwi.kappa_u;
    let kb2 = hwi.kappa_b * hwi.kappa_b;
    let (sn, sn2, rf, bf) = (m.sn, m.sn2, m.rf, m.bf);
    let users = |f: &dyn Fn(usize) -> LimitTerms| -> Vec<LimitTerms> { (0..n).map(f).collect() };
    let others = |k: usize, f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..n).map(|i| if i == k { 0.0 } else { f(i) }).collect()
    };
    match case {
        LimitCase::NlB => Ok(users(&|k| {
            let sba = m.sum_ba(k);
            let rest = m.per_surface(|l1, l2, s| {
                2.0 * m.ba(l1, s, k) * m.gamma(l2, k) * sn
                    + m.cnl(l1, s, k) * m.cnl(l2, s, k) * (2.0 * m.eps(s, k) + 1.0)
            });
            let pn_signal = m.per_surface(|l1, l2, s| m.ba(l1, s, k) * m.ba(l2, s, k) * (1.0 - sn2));
            LimitTerms {
                signal: sba * sba * rf * rf * sn2 + rf * (rest + pn_signal) + m.sum_gamma(k).powi(2),
                interference: others(k, &|i| m.los_overlap(k, i) * sn2 + m.scatter_overlap(k, i) * rf),
                receiver: 0.0,
                noise: sba * rf + m.sum_gamma(k),
                phase_noise: rf * pn_signal
                    + rf * (0..n)
                        .filter(|&i| i != k)
                        .map(|i| {
                            m.per_surface(|l1, l2, s| {
                                (m.cnl(l1, s, k) * m.cnl(l1, s, i) * m.cnl(l2, s, i) * m.cnl(l2, s, k)).sqrt()
                                    * m.eps(s, k)
                                    * m.eps(s, i)
                                    * (1.0 - sn2)
                            })
                        })
                        .sum::<f64>(),
            }
        })),
        LimitCase::NlR => Ok(users(&|k| LimitTerms {
            signal: m.sum_ba(k).powi(2) * bf * bf * sn2 + m.same_ap(k, k) * bf,
            interference: others(k, &|i| m.same_ap(k, i) * bf),
            receiver: kb2 * (1.0 + ku2) * p * (0..n).map(|i| m.same_ap(k, i) * bf).sum::<f64>(),
            noise: m.sum_ba(k) * bf,
            phase_noise: 0.0,
        })),
        LimitCase::NlBr => Ok(users(&|k| LimitTerms {
            signal: m.sum_ba(k).powi(2) * sn2,
            interference: vec![0.0; n],
            receiver: 0.0,
            noise: m.sum_ba(k),
            phase_noise: 0.0,
        })),
        LimitCase::OlB => {
            let theta = theta.ok_or_else(|| Error::InvalidParameter("the pure-LoS limit needs phases".into()))?;
            theta.check_len(config.n_phases())?;
            let los = LosStructure::new(stats, config)?;
            let (l, s) = (m.l, m.s);
            let (beta, alpha) = (&stats.beta, &stats.alpha);
            let f: Vec<Vec<Vec<C64>>> = (0..l)
                .map(|li| (0..s).map(|si| (0..n).map(|k| f_lsk(theta, &los, li, si, k)).collect()).collect())
                .collect();
            let ar: Vec<Vec<Vec<C64>>> = (0..s)
                .map(|si| {
                    (0..l)
                        .map(|l1| {
                            (0..l)
                                .map(|l2| {
                                    los.a_r_dep[l1][si].iter().zip(&los.a_r_dep[l2][si]).map(|(x, y)| x.conj() * y).sum()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let spread = |k: usize, w: &dyn Fn(usize, usize, usize) -> f64| -> f64 {
                let mut t = 0.0;
                for l1 in 0..l {
                    for l2 in 0..l {
                        for si in 0..s {
                            t += w(l1, l2, si) * (f[l1][si][k].conj() * f[l2][si][k] * ar[si][l1][l2]).re;
                        }
                    }
                }
                t
            };
            let gain = |k: usize| -> f64 {
                (0..l)
                    .map(|li| (0..s).map(|si| beta[li][si] * alpha[si][k] * f[li][si][k].norm_sqr()).sum::<f64>())
                    .sum()
            };
            Ok(users(&|k| {
                let (g, sg) = (gain(k), m.sum_gamma(k));
                let pn_signal =
                    (1.0 - sn2) * spread(k, &|l1, l2, si| beta[l1][si] * beta[l2][si] * alpha[si][k].powi(2));
                let pn_inter: Vec<f64> = others(k, &|i| {
                    (1.0 - sn2) * spread(k, &|l1, l2, si| beta[l1][si] * beta[l2][si] * alpha[si][k] * alpha[si][i])
                });
                let interference = others(k, &|i| {
                    let c: C64 = (0..l)
                        .map(|li| {
                            (0..s)
                                .map(|si| {
                                    f[li][si][k].conj() * f[li][si][i] * beta[li][si] * (alpha[si][k] * alpha[si][i]).sqrt()
                                })
                                .sum::<C64>()
                        })
                        .sum();
                    sn2 * c.norm_sqr() + pn_inter[i]
                });
                LimitTerms {
                    signal: sn2 * g * g + 2.0 * sn * g * sg + pn_signal + sg * sg,
                    interference,
                    receiver: 0.0,
                    noise: g + sg,
                    phase_noise: pn_signal + pn_inter.iter().sum::<f64>(),
                }
            }))
        }
    }
}

/// Transmit-power scaling with the array sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingMode {
    /// `p_k = p`.
    None,
    /// `p_k = p / B`.
    PerB,
    /// `p_k = p / R`.
    PerR,
    /// `p_k = p / (B R)`.
    PerBr,
    /// `p_k = p / R²`.
    PerR2,
}

impl ScalingMode {
    /// Divisor applied to the reference power.
    pub fn scale(&self, b: usize, r: usize) -> f64 {
        let (b, r) = (b as f64, r as f64);
        match self {
            Self::None => 1.0,
            Self::PerB => b,
            Self::PerR => r,
            Self::PerBr => b * r,
            Self::PerR2 => r * r,
        }
    }

    /// Per-user power for reference power `p`.
    pub fn power(&self, p: f64, b: usize, r: usize) -> f64 {
        p / self.scale(b, r)
    }
}

/// One grid point of [`convergence_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    /// Antennas per AP.
    pub b: usize,
    /// Elements per surface.
    pub r: usize,
    /// SINR of every user from the general expression.
    pub sinr: Vec<f64>,
    /// Limit SINR of every user, when a limit case was given.
    pub limit: Option<Vec<f64>>,
    /// Largest relative gap `|SINR − limit| / limit` over the users.
    pub gap: Option<f64>,
}

/// Evaluates the general SINR on a grid of array sizes under a power scaling
/// and compares it with a limit expression.
pub fn convergence_probe(
    scaling: ScalingMode,
    case: Option<LimitCase>,
    grid: &[(usize, usize)],
    stats: &ChannelStatistics,
    hwi: &HwiProfile,
    config: &SystemConfig,
    theta: Option<&PhaseVector>,
) -> Result<Vec<ProbePoint>> {
    use rayon::prelude::*;
    grid.par_iter()
        .map(|&(b, r)| {
            let mut cfg = config.with_arrays(b, r);
            cfg.p = scaling.power(config.p, b, r);
            let los = LosStructure::new(stats, &cfg)?;
            let cf = ClosedForm::new(stats, &los, hwi, &cfg)?;
            let th = match theta {
                Some(t) if t.len() == cfg.n_phases() => t.clone(),
                _ => PhaseVector::zeros(cfg.n_phases()),
            };
            let sinr = cf.breakdown(&th, hwi, &cfg, &cfg.powers())?.sinr;
            let limit = case.map(|c| sinr_limit(c, stats, hwi, &cfg, config.p, Some(&th))).transpose()?;
            let gap = limit
                .as_ref()
                .map(|lim| sinr.iter().zip(lim).map(|(a, b)| (a - b).abs() / b.abs()).fold(0.0, f64::max));
            Ok(ProbePoint { b, r, sinr, limit, gap })
        })
        .collect()
}
