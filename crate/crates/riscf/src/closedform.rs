//! Closed-form expectation terms and the resulting achievable rate.
//!
//! All four terms are exact expectations over the small-scale fading, the
//! surface phase noise and the distortion noises:
//!
//! - `signal[k] = E{|q_kᴴ q̂_k|²}`
//! - `interference[k][i] = E{|q_kᴴ q̂_i|²}` for `i ≠ k`
//! - `noise[k] = E{‖q_k‖²}`
//! - `hwi[k]`, the transmit and receive distortion power after combining.
//!
//! The evaluator works on per-surface tables: the cascade gains
//! `f_{l,s,k}(θ)`, the AP-side inner products `a_Bᴴ a_B`, the surface-side
//! inner products `a_Rᴴ a_R` and `h̄ᴴ h̄`, and one fourth-order table of AP
//! steering entries for the diagonal of the receiver distortion. A rate
//! evaluation never forms a `B×R` matrix.

use crate::channel::{sinc_moment, LosStructure, PhaseVector};
use crate::error::{Error, Result};
use crate::scenario::{ChannelStatistics, HwiProfile, SystemConfig};
use crate::C64;

/// Cascade gain `f_{l,s,k}(θ) = a_R(l,s)ᴴ Φ_s h̄_{s,k}` of surface `s` between
/// user `k` and AP `l`.
pub fn f_lsk(theta: &PhaseVector, los: &LosStructure, l: usize, s: usize, k: usize) -> C64 {
    let r = los.r;
    let dep = &los.a_r_dep[l][s];
    let arr = &los.a_r[s][k];
    (0..r)
        .map(|ri| dep[ri].conj() * C64::from_polar(1.0, theta.theta[s * r + ri]) * arr[ri])
        .sum()
}

/// Phases `ζ_r` with `f_{l,s,k}(θ) = Σ_r e^{j(ζ_r + θ_{s,r})}`.
pub fn zeta_phases(stats: &ChannelStatistics, config: &SystemConfig, l: usize, s: usize, k: usize) -> Vec<f64> {
    let side = (config.r as f64).sqrt().round() as usize;
    let arr = stats.aoa_ris[s][k];
    let dep = stats.aod_ris[l][s];
    let row_step = arr.elevation.sin() * arr.azimuth.sin() - dep.elevation.sin() * dep.azimuth.sin();
    let col_step = arr.elevation.cos() - dep.elevation.cos();
    (1..=config.r)
        .map(|x| {
            let row = ((x - 1) / side) as f64;
            let col = ((x - 1) % side) as f64;
            2.0 * std::f64::consts::PI * config.d_over_lambda * (row * row_step + col * col_step)
        })
        .collect()
}

/// Power-independent expectation terms of every user.
///
/// `receiver[k][i]` is the contribution of user `i` to the receive distortion
/// seen by user `k` before the `κ_b²(1+κ_u²) p_i` weighting.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationTerms {
    /// `E{|q_kᴴ q̂_k|²}`.
    pub signal: Vec<f64>,
    /// `E{|q_kᴴ q̂_i|²}`, zero on the diagonal.
    pub interference: Vec<Vec<f64>>,
    /// `E{q_kᴴ diag(q̂_i q̂_iᴴ) q_k}`.
    pub receiver: Vec<Vec<f64>>,
    /// `E{‖q_k‖²}`.
    pub noise: Vec<f64>,
}

impl ExpectationTerms {
    /// Distortion power after combining for every user.
    pub fn hwi(&self, hwi: &HwiProfile, powers: &[f64]) -> Vec<f64> {
        let ku2 = hwi.kappa_u * hwi.kappa_u;
        let kb2 = hwi.kappa_b * hwi.kappa_b;
        let k = self.signal.len();
        (0..k)
            .map(|ki| {
                let tx: f64 = powers[ki] * self.signal[ki]
                    + (0..k).filter(|&i| i != ki).map(|i| powers[i] * self.interference[ki][i]).sum::<f64>();
                let rx: f64 = (0..k).map(|i| powers[i] * self.receiver[ki][i]).sum();
                ku2 * tx + kb2 * (1.0 + ku2) * rx
            })
            .collect()
    }

    /// Assembles SINR and rate of every user.
    pub fn breakdown(&self, hwi: &HwiProfile, powers: &[f64], sigma2: f64) -> RateBreakdown {
        let hw = self.hwi(hwi, powers);
        let k = self.signal.len();
        let sinr: Vec<f64> = (0..k)
            .map(|ki| {
                let inter: f64 =
                    (0..k).filter(|&i| i != ki).map(|i| powers[i] * self.interference[ki][i]).sum();
                powers[ki] * self.signal[ki] / (inter + hw[ki] + sigma2 * self.noise[ki])
            })
            .collect();
        let rate = sinr.iter().map(|s| (1.0 + s).log2()).collect();
        RateBreakdown {
            signal: self.signal.clone(),
            interference: self.interference.clone(),
            hwi: hw,
            noise: self.noise.clone(),
            sinr,
            rate,
        }
    }
}

/// Per-user expectation terms with the SINR and rate they produce.
#[derive(Clone, Debug, PartialEq)]
pub struct RateBreakdown {
    /// Desired signal power term.
    pub signal: Vec<f64>,
    /// Inter-user interference terms, zero on the diagonal.
    pub interference: Vec<Vec<f64>>,
    /// Distortion power term.
    pub hwi: Vec<f64>,
    /// Noise term.
    pub noise: Vec<f64>,
    /// Signal-to-interference-plus-noise ratio.
    pub sinr: Vec<f64>,
    /// Achievable rate in bit/s/Hz.
    pub rate: Vec<f64>,
}

impl RateBreakdown {
    /// Sum of the user rates.
    pub fn sum_rate(&self) -> f64 {
        self.rate.iter().sum()
    }

    /// Smallest user rate.
    pub fn min_rate(&self) -> f64 {
        self.rate.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Vector of the form `Σ_{l,s} c_{l,s} a_R(l,s) ⊕ d_s u_{k,s}` over the
/// stacked surface elements, where the second part scales the blocks of
/// user `user`'s reflected LoS vector.
struct BlockVec {
    user: usize,
    c: Vec<C64>,
    d: Vec<C64>,
}

/// Evaluator holding the phase-independent tables of one system.
pub struct ClosedForm<'a> {
    stats: &'a ChannelStatistics,
    los: &'a LosStructure,
    l: usize,
    s: usize,
    k: usize,
    bf: f64,
    rf: f64,
    sn: f64,
    sn2: f64,
    z: Vec<Vec<f64>>,
    zeta: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
    eta: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
    dlt: Vec<Vec<f64>>,
    zeta_s: Vec<f64>,
    phi: Vec<Vec<f64>>,
    gdiag: Vec<f64>,
    gldiag: Vec<Vec<f64>>,
    ab: Vec<Vec<Vec<C64>>>,
    ar: Vec<Vec<Vec<C64>>>,
    hh: Vec<Vec<Vec<C64>>>,
    t4: Vec<Vec<C64>>,
    frob: Vec<Vec<f64>>,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

impl<'a> ClosedForm<'a> {
    /// Precomputes every table that does not depend on the phases.
    pub fn new(
        stats: &'a ChannelStatistics,
        los: &'a LosStructure,
        hwi: &HwiProfile,
        config: &SystemConfig,
    ) -> Result<Self> {
        config.validate()?;
        hwi.validate()?;
        stats.check_config(config)?;
        let (l, s, k) = (config.l, config.s, config.k);
        let (bf, rf) = (config.b as f64, config.r as f64);
        let sn = sinc_moment(hwi.kappa_r());
        let sn2 = sn * sn;
        let z: Vec<Vec<f64>> =
            (0..l).map(|li| (0..s).map(|si| (stats.beta[li][si] * stats.ris_ap_los(li, si)).sqrt()).collect()).collect();
        let zeta: Vec<Vec<f64>> =
            (0..l).map(|li| (0..s).map(|si| stats.beta[li][si] * stats.ris_ap_nlos(li, si)).collect()).collect();
        let w: Vec<Vec<f64>> =
            (0..s).map(|si| (0..k).map(|ki| (stats.alpha[si][ki] * stats.user_ris_los(si, ki)).sqrt()).collect()).collect();
        let eta: Vec<Vec<f64>> =
            (0..s).map(|si| (0..k).map(|ki| stats.alpha[si][ki] * stats.user_ris_nlos(si, ki)).collect()).collect();
        let rho: Vec<Vec<f64>> = w.iter().map(|row| row.iter().map(|x| x * x).collect()).collect();
        let dlt: Vec<Vec<f64>> = (0..s)
            .map(|si| (0..k).map(|ki| (1.0 - sn2) * rho[si][ki] + eta[si][ki]).collect())
            .collect();
        let zeta_s: Vec<f64> = (0..s).map(|si| (0..l).map(|li| zeta[li][si]).sum()).collect();
        let phi: Vec<Vec<f64>> = z.iter().map(|row| row.iter().map(|x| bf * x * x).collect()).collect();
        let gdiag: Vec<f64> = (0..s).map(|si| (0..l).map(|li| phi[li][si]).sum::<f64>() + bf * zeta_s[si]).collect();
        let gldiag: Vec<Vec<f64>> =
            (0..l).map(|li| (0..s).map(|si| phi[li][si] + bf * zeta[li][si]).collect()).collect();
        let ab: Vec<Vec<Vec<C64>>> = (0..l)
            .map(|li| (0..s).map(|s1| (0..s).map(|s2| dot(&los.a_b[li][s1], &los.a_b[li][s2])).collect()).collect())
            .collect();
        let ar: Vec<Vec<Vec<C64>>> = (0..s)
            .map(|si| {
                (0..l).map(|l1| (0..l).map(|l2| dot(&los.a_r_dep[l1][si], &los.a_r_dep[l2][si])).collect()).collect()
            })
            .collect();
        let hh: Vec<Vec<Vec<C64>>> = (0..s)
            .map(|si| (0..k).map(|a| (0..k).map(|b| dot(&los.a_r[si][a], &los.a_r[si][b])).collect()).collect())
            .collect();
        let t4: Vec<Vec<C64>> = (0..l)
            .map(|li| {
                let a = &los.a_b[li];
                let mut out = vec![C64::new(0.0, 0.0); s * s * s * s];
                for s1 in 0..s {
                    for s2 in 0..s {
                        for s3 in 0..s {
                            for s4 in 0..s {
                                out[((s1 * s + s2) * s + s3) * s + s4] = (0..config.b)
                                    .map(|bi| a[s1][bi].conj() * a[s2][bi] * a[s3][bi].conj() * a[s4][bi])
                                    .sum();
                            }
                        }
                    }
                }
                out
            })
            .collect();
        let frob: Vec<Vec<f64>> = (0..s)
            .map(|s1| {
                (0..s)
                    .map(|s2| {
                        let kap: Vec<C64> = (0..l).map(|li| ab[li][s1][s2] * (z[li][s1] * z[li][s2])).collect();
                        let mut acc = C64::new(0.0, 0.0);
                        for l1 in 0..l {
                            for l2 in 0..l {
                                acc += kap[l1].conj() * kap[l2] * ar[s1][l1][l2] * ar[s2][l2][l1];
                            }
                        }
                        let mut v = acc.re;
                        if s1 == s2 {
                            let lo: f64 = (0..l).map(|li| phi[li][s1]).sum();
                            v += 2.0 * bf * zeta_s[s1] * rf * lo + bf * bf * zeta_s[s1] * zeta_s[s1] * rf;
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            stats,
            los,
            l,
            s,
            k,
            bf,
            rf,
            sn,
            sn2,
            z,
            zeta,
            w,
            eta,
            rho,
            dlt,
            zeta_s,
            phi,
            gdiag,
            gldiag,
            ab,
            ar,
            hh,
            t4,
            frob,
        })
    }

    /// `tr(Λ₁ Ḡ Λ₂ Ḡ)` for block-constant diagonal weights.
    fn tg(&self, l1: &[f64], l2: &[f64]) -> f64 {
        let mut acc = 0.0;
        for s1 in 0..self.s {
            for s2 in 0..self.s {
                acc += l1[s1] * l2[s2] * self.frob[s1][s2];
            }
        }
        acc
    }

    /// `Xᴴ Λ Y` for block vectors and block-constant weights `lam`.
    fn ip(&self, x: &BlockVec, y: &BlockVec, lam: &[f64], t: &[Vec<Vec<C64>>]) -> C64 {
        let (l, s) = (self.l, self.s);
        let (a, b) = (x.user, y.user);
        let mut acc = C64::new(0.0, 0.0);
        for si in 0..s {
            let mut blk = C64::new(0.0, 0.0);
            for l1 in 0..l {
                let cx = x.c[l1 * s + si];
                if cx != C64::new(0.0, 0.0) {
                    for l2 in 0..l {
                        blk += cx.conj() * y.c[l2 * s + si] * self.ar[si][l1][l2];
                    }
                    blk += cx.conj() * y.d[si] * t[l1][si][b];
                }
                blk += x.d[si].conj() * y.c[l1 * s + si] * t[l1][si][a].conj();
            }
            blk += x.d[si].conj() * y.d[si] * (self.w[si][a] * self.w[si][b]) * self.hh[si][a][b];
            acc += blk * lam[si];
        }
        acc
    }

    /// Evaluates the power-independent terms at phases `theta`.
    pub fn terms(&self, theta: &PhaseVector) -> Result<ExpectationTerms> {
        let (l, s, k) = (self.l, self.s, self.k);
        theta.check_len(s * self.los.r)?;
        let (bf, rf, sn, sn2) = (self.bf, self.rf, self.sn, self.sn2);
        let gamma = &self.stats.gamma;
        let zero = C64::new(0.0, 0.0);

        // t[l][s][k] = w f, e[l][k][s] = z t, y[l][k][s] = Σ ab e
        let t: Vec<Vec<Vec<C64>>> = (0..l)
            .map(|li| (0..s).map(|si| (0..k).map(|ki| f_lsk(theta, self.los, li, si, ki) * self.w[si][ki]).collect()).collect())
            .collect();
        let e: Vec<Vec<Vec<C64>>> =
            (0..l).map(|li| (0..k).map(|ki| (0..s).map(|si| t[li][si][ki] * self.z[li][si]).collect()).collect()).collect();
        let y: Vec<Vec<Vec<C64>>> = (0..l)
            .map(|li| {
                (0..k)
                    .map(|ki| (0..s).map(|si| (0..s).map(|s2| self.ab[li][si][s2] * e[li][ki][s2]).sum()).collect())
                    .collect()
            })
            .collect();
        let q: Vec<Vec<Vec<f64>>> = (0..l)
            .map(|li| (0..k).map(|a| (0..k).map(|b| dot(&e[li][a], &y[li][b]).re).collect()).collect())
            .collect();

        let ones = vec![1.0; s];
        let unit = |user: usize| BlockVec { user, c: vec![zero; l * s], d: vec![C64::new(1.0, 0.0); s] };
        let gu: Vec<BlockVec> = (0..k)
            .map(|ki| BlockVec {
                user: ki,
                c: (0..l * s).map(|n| y[n / s][ki][n % s] * self.z[n / s][n % s]).collect(),
                d: (0..s).map(|si| C64::new(bf * self.zeta_s[si], 0.0)).collect(),
            })
            .collect();
        let glu = |li: usize, ki: usize| BlockVec {
            user: ki,
            c: (0..l * s)
                .map(|n| if n / s == li { y[li][ki][n % s] * self.z[li][n % s] } else { zero })
                .collect(),
            d: (0..s).map(|si| C64::new(bf * self.zeta[li][si], 0.0)).collect(),
        };

        let col = |m: &Vec<Vec<f64>>, ki: usize| -> Vec<f64> { (0..s).map(|si| m[si][ki]).collect() };
        let eta_k: Vec<Vec<f64>> = (0..k).map(|ki| col(&self.eta, ki)).collect();
        let rho_k: Vec<Vec<f64>> = (0..k).map(|ki| col(&self.rho, ki)).collect();
        let dlt_k: Vec<Vec<f64>> = (0..k).map(|ki| col(&self.dlt, ki)).collect();
        let rsum = |f: &dyn Fn(usize) -> f64| -> f64 { rf * (0..s).map(f).sum::<f64>() };

        let g_dir: Vec<f64> = (0..k).map(|ki| bf * (0..l).map(|li| gamma[li][ki]).sum::<f64>()).collect();
        let zr: Vec<Vec<f64>> =
            (0..l).map(|li| (0..k).map(|ki| rsum(&|si| self.zeta[li][si] * self.rho[si][ki])).collect()).collect();
        let a_l: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|ki| rsum(&|si| self.zeta[li][si] * (self.rho[si][ki] + self.eta[si][ki]))).collect())
            .collect();
        let tau_f: Vec<Vec<f64>> =
            (0..l).map(|li| (0..k).map(|ki| rsum(&|si| self.phi[li][si] * self.eta[si][ki])).collect()).collect();
        let tau_z: Vec<Vec<f64>> =
            (0..l).map(|li| (0..k).map(|ki| rsum(&|si| self.zeta[li][si] * self.eta[si][ki])).collect()).collect();
        let gl: Vec<Vec<f64>> = (0..l).map(|li| (0..k).map(|ki| q[li][ki][ki] + bf * zr[li][ki]).collect()).collect();
        let gkk: Vec<C64> = (0..k).map(|ki| self.ip(&unit(ki), &gu[ki], &ones, &t)).collect();
        let trgc: Vec<f64> =
            (0..k).map(|ki| gkk[ki].re + rsum(&|si| self.gdiag[si] * self.eta[si][ki])).collect();
        let trglc: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|ki| gl[li][ki] + rsum(&|si| self.gldiag[li][si] * self.eta[si][ki])).collect())
            .collect();
        let trglcb: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|i| sn2 * gl[li][i] + rsum(&|si| self.gldiag[li][si] * self.dlt[si][i])).collect())
            .collect();
        let trflcb: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|i| sn2 * q[li][i][i] + rsum(&|si| self.phi[li][si] * self.dlt[si][i])).collect())
            .collect();
        let trflc: Vec<Vec<f64>> =
            (0..l).map(|li| (0..k).map(|ki| q[li][ki][ki] + tau_f[li][ki]).collect()).collect();

        let noise: Vec<f64> = (0..k).map(|ki| trgc[ki] + g_dir[ki]).collect();

        let mut signal = vec![0.0; k];
        for ki in 0..k {
            let (eta, rho) = (&eta_k[ki], &rho_k[ki]);
            let uk = unit(ki);
            let mut e2 = trgc[ki] * trgc[ki];
            for li in 0..l {
                let lam: Vec<C64> = (0..s).map(|si| C64::new(eta[si] * self.zeta[li][si], 0.0)).collect();
                let mut cross = zero;
                for s1 in 0..s {
                    for s2 in 0..s {
                        cross += e[li][ki][s1].conj() * self.ab[li][s1][s2] * e[li][ki][s2] * lam[s2];
                    }
                }
                let cfcs = q[li][ki][ki] * zr[li][ki]
                    + 2.0 * cross.re
                    + rsum(&|si| self.phi[li][si] * eta[si] * eta[si] * self.zeta[li][si]);
                let tl = zr[li][ki] * zr[li][ki]
                    + rsum(&|si| self.zeta[li][si].powi(2) * (2.0 * eta[si] * rho[si] + eta[si] * eta[si]));
                e2 += 2.0 * cfcs + bf * tl;
            }
            let eg: Vec<f64> = (0..s).map(|si| eta[si] * self.gdiag[si]).collect();
            let mut e3 = self.ip(&gu[ki], &gu[ki], rho, &t).re
                + 2.0 * self.ip(&uk, &gu[ki], &eg, &t).re
                + rsum(&|si| eta[si] * eta[si] * self.gdiag[si] * self.gdiag[si]);
            for li in 0..l {
                let zl_eta: Vec<f64> = (0..s).map(|si| self.zeta[li][si] * eta[si]).collect();
                e3 += rsum(&|si| {
                    self.phi[li][si]
                        * (rho[si] * zr[li][ki]
                            + 2.0 * rho[si] * self.zeta[li][si] * eta[si]
                            + eta[si] * eta[si] * self.zeta[li][si])
                }) + zr[li][ki] * gl[li][ki]
                    + 2.0 * self.ip(&uk, &glu(li, ki), &zl_eta, &t).re
                    + rsum(&|si| self.zeta[li][si] * eta[si] * eta[si] * self.gldiag[li][si]);
            }
            let mut psi_uu = self.ip(&gu[ki], &gu[ki], eta, &t).re;
            let mut psi_rho = self.tg(rho, eta);
            let mut psi_d = self.tg(eta, eta);
            for li in 0..l {
                psi_uu += tau_f[li][ki] * zr[li][ki] + tau_z[li][ki] * gl[li][ki];
                psi_rho += tau_f[li][ki] * zr[li][ki] + tau_z[li][ki] * rsum(&|si| rho[si] * self.gldiag[li][si]);
                psi_d += tau_f[li][ki] * tau_z[li][ki] + tau_z[li][ki] * rsum(&|si| self.gldiag[li][si] * eta[si]);
            }
            let e4 = (1.0 + sn2) * psi_uu + (1.0 - sn2) * psi_rho + psi_d;
            let direct: f64 = (0..l)
                .map(|li| gamma[li][ki] * (trglc[li][ki] + trglcb[li][ki]) + bf * gamma[li][ki] * gamma[li][ki])
                .sum();
            signal[ki] = sn2 * e2 + (1.0 - sn2) * e3 + e4 + 2.0 * sn * g_dir[ki] * trgc[ki] + direct + g_dir[ki] * g_dir[ki];
        }

        let mut interference = vec![vec![0.0; k]; k];
        for ki in 0..k {
            for i in 0..k {
                if i == ki {
                    continue;
                }
                let gki = self.ip(&unit(ki), &gu[i], &ones, &t);
                let mut v = sn2 * gki.norm_sqr()
                    + self.ip(&gu[ki], &gu[ki], &dlt_k[i], &t).re
                    + sn2 * self.ip(&gu[i], &gu[i], &eta_k[ki], &t).re
                    + self.tg(&eta_k[ki], &dlt_k[i]);
                for li in 0..l {
                    v += a_l[li][ki] * trflcb[li][i]
                        + (a_l[li][i] + gamma[li][i]) * trglc[li][ki]
                        + gamma[li][ki] * trglcb[li][i]
                        + bf * gamma[li][ki] * gamma[li][i];
                }
                interference[ki][i] = v;
            }
        }

        let el = |li: usize, lam: &[f64]| -> f64 { rsum(&|si| self.z[li][si] * self.z[li][si] * lam[si]) };
        let mut receiver = vec![vec![0.0; k]; k];
        for ki in 0..k {
            for i in 0..k {
                let mut v = 0.0;
                for li in 0..l {
                    let (p, qv) = (&e[li][i], &e[li][ki]);
                    let mut p4 = zero;
                    for s1 in 0..s {
                        for s2 in 0..s {
                            let pp = p[s1].conj() * p[s2];
                            for s3 in 0..s {
                                for s4 in 0..s {
                                    p4 += pp * qv[s3].conj() * qv[s4] * self.t4[li][((s1 * s + s2) * s + s3) * s + s4];
                                }
                            }
                        }
                    }
                    let e_eta = el(li, &eta_k[ki]);
                    let e_dlt = el(li, &dlt_k[i]);
                    let tk = a_l[li][ki] + gamma[li][ki];
                    let ti = a_l[li][i] + gamma[li][i];
                    v += sn2 * p4.re
                        + sn2 * e_eta * q[li][i][i]
                        + e_dlt * q[li][ki][ki]
                        + bf * e_dlt * e_eta
                        + tk * trflcb[li][i]
                        + ti * trflc[li][ki]
                        + bf * ti * tk;
                }
                receiver[ki][i] = v;
            }
        }
        Ok(ExpectationTerms { signal, interference, receiver, noise })
    }

    /// Terms, SINR and rate at phases `theta` for transmit powers `powers`.
    pub fn breakdown(&self, theta: &PhaseVector, hwi: &HwiProfile, config: &SystemConfig, powers: &[f64]) -> Result<RateBreakdown> {
        check_powers(powers, self.k)?;
        Ok(self.terms(theta)?.breakdown(hwi, powers, config.sigma2))
    }
}

pub(crate) fn check_powers(powers: &[f64], k: usize) -> Result<()> {
    if powers.len() != k {
        return Err(Error::DimensionMismatch(format!("{} powers for {k} users", powers.len())));
    }
    if powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidParameter("powers must be finite and >= 0".into()));
    }
    Ok(())
}

/// `E{‖q_k‖²}` for every user.
pub fn noise_term(theta: &PhaseVector, stats: &ChannelStatistics, los: &LosStructure, hwi: &HwiProfile, config: &SystemConfig) -> Result<Vec<f64>> {
    Ok(ClosedForm::new(stats, los, hwi, config)?.terms(theta)?.noise)
}

/// `E{|q_kᴴ q̂_k|²}` for every user.
pub fn signal_term(theta: &PhaseVector, stats: &ChannelStatistics, los: &LosStructure, hwi: &HwiProfile, config: &SystemConfig) -> Result<Vec<f64>> {
    Ok(ClosedForm::new(stats, los, hwi, config)?.terms(theta)?.signal)
}

/// `E{|q_kᴴ q̂_i|²}` for a pair of distinct users.
#[allow(clippy::too_many_arguments)]
pub fn interference_term(
    theta: &PhaseVector,
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    config: &SystemConfig,
    k: usize,
    i: usize,
) -> Result<f64> {
    if k == i {
        return Err(Error::InvalidPair(k));
    }
    if k >= config.k || i >= config.k {
        return Err(Error::InvalidDimension(format!("user index out of range for K={}", config.k)));
    }
    Ok(ClosedForm::new(stats, los, hwi, config)?.terms(theta)?.interference[k][i])
}

/// Distortion power after combining for every user.
pub fn hwi_term(
    theta: &PhaseVector,
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    config: &SystemConfig,
    powers: &[f64],
) -> Result<Vec<f64>> {
    check_powers(powers, config.k)?;
    Ok(ClosedForm::new(stats, los, hwi, config)?.terms(theta)?.hwi(hwi, powers))
}

/// Terms, SINR and rate of every user.
pub fn rate(
    theta: &PhaseVector,
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    config: &SystemConfig,
    powers: &[f64],
) -> Result<RateBreakdown> {
    ClosedForm::new(stats, los, hwi, config)?.breakdown(theta, hwi, config, powers)
}
