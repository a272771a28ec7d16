//! LoS array responses, phase vectors and random channel realizations.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{square_side, Angle, ChannelStatistics, HwiProfile, SystemConfig};
use crate::C64;

/// Steering vector of an `x`-element uniform square planar array.
///
/// Element `n` (1-based) has phase
/// `2π (d/λ) (⌊(n−1)/√x⌋ sin(e) sin(a) + ((n−1) mod √x) cos(e))`.
pub fn array_response(x: usize, azimuth: f64, elevation: f64, d_over_lambda: f64) -> Result<Vec<C64>> {
    let side = square_side(x)?;
    let row_step = elevation.sin() * azimuth.sin();
    let col_step = elevation.cos();
    Ok((1..=x)
        .map(|n| {
            let row = ((n - 1) / side) as f64;
            let col = ((n - 1) % side) as f64;
            C64::from_polar(1.0, 2.0 * PI * d_over_lambda * (row * row_step + col * col_step))
        })
        .collect())
}

fn response(x: usize, angle: &Angle, d_over_lambda: f64) -> Result<Vec<C64>> {
    array_response(x, angle.azimuth, angle.elevation, d_over_lambda)
}

/// The deterministic LoS steering vectors of every surface-side link.
#[derive(Clone, Debug, PartialEq)]
pub struct LosStructure {
    /// Antennas per AP.
    pub b: usize,
    /// Elements per surface.
    pub r: usize,
    /// Surface `s` response towards user `k`, `[s][k]`, length `r`.
    pub a_r: Vec<Vec<Vec<C64>>>,
    /// AP `l` response towards surface `s`, `[l][s]`, length `b`.
    pub a_b: Vec<Vec<Vec<C64>>>,
    /// Surface `s` response towards AP `l`, `[l][s]`, length `r`.
    pub a_r_dep: Vec<Vec<Vec<C64>>>,
}

impl LosStructure {
    /// Evaluates all steering vectors for the array sizes of `config`.
    pub fn new(stats: &ChannelStatistics, config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        stats.check_config(config)?;
        let (b, r, dl) = (config.b, config.r, config.d_over_lambda);
        let a_r = stats
            .aoa_ris
            .iter()
            .map(|row| row.iter().map(|a| response(r, a, dl)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let a_b = stats
            .aoa_ap
            .iter()
            .map(|row| row.iter().map(|a| response(b, a, dl)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let a_r_dep = stats
            .aod_ris
            .iter()
            .map(|row| row.iter().map(|a| response(r, a, dl)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { b, r, a_r, a_b, a_r_dep })
    }

    /// Rank-one LoS channel `a_B(l,s) a_R(l,s)^H` from surface `s` to AP `l`.
    pub fn zbar(&self, l: usize, s: usize) -> DMatrix<C64> {
        let ab = &self.a_b[l][s];
        let ar = &self.a_r_dep[l][s];
        DMatrix::from_fn(self.b, self.r, |i, j| ab[i] * ar[j].conj())
    }
}

/// The `S·R` surface phase shifts, stacked surface by surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    /// Phase of element `r` of surface `s` at index `s·R + r`.
    pub theta: Vec<f64>,
}

impl PhaseVector {
    /// Wraps an explicit phase vector.
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    /// All-zero phases.
    pub fn zeros(n: usize) -> Self {
        Self { theta: vec![0.0; n] }
    }

    /// Phases drawn uniformly on `[0, 2π)`.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        Self { theta: (0..n).map(|_| rng.random::<f64>() * 2.0 * PI).collect() }
    }

    /// Number of phases.
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    /// True when there are no phases (a system without surfaces).
    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Unit-modulus reflection coefficients `e^{jθ}`.
    pub fn phasors(&self) -> Vec<C64> {
        self.theta.iter().map(|&t| C64::from_polar(1.0, t)).collect()
    }

    /// Same phases reduced to `[0, 2π)`.
    pub fn wrapped(&self) -> Self {
        Self { theta: self.theta.iter().map(|t| t.rem_euclid(2.0 * PI)).collect() }
    }

    /// Checks the length against `S·R`.
    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.theta.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "phase vector has {} entries, expected {n}",
                self.theta.len()
            )));
        }
        Ok(())
    }
}

/// One draw of every small-scale fade and of the surface phase noise.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    /// NLoS user to surface fades, `[s][k]`, length `R`.
    pub h_tilde: Vec<Vec<Vec<C64>>>,
    /// NLoS surface to AP fades, `[l][s]`, `B×R`.
    pub z_tilde: Vec<Vec<DMatrix<C64>>>,
    /// Direct user to AP channels scaled by `√γ`, `[l][k]`, length `B`.
    pub d: Vec<Vec<Vec<C64>>>,
    /// Phase errors of the surface elements, `[s]`, length `R`.
    pub theta_noise: Vec<Vec<f64>>,
}

/// Standard circularly-symmetric complex Gaussian sample.
pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

fn complex_normal_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}

/// Draws a realization: unit-variance complex Gaussian fades, direct links
/// scaled by `√γ` and phase errors uniform on `[−κ_r π, κ_r π]`.
pub fn sample_realization<R: Rng>(
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    rng: &mut R,
) -> ChannelRealization {
    let (l, s, k) = (stats.n_aps(), stats.n_ris(), stats.n_users());
    let (b, r) = (los.b, los.r);
    let h_tilde = (0..s).map(|_| (0..k).map(|_| complex_normal_vec(rng, r)).collect()).collect();
    let z_tilde = (0..l)
        .map(|_| (0..s).map(|_| DMatrix::from_fn(b, r, |_, _| complex_normal(rng))).collect())
        .collect();
    let d = (0..l)
        .map(|li| {
            (0..k)
                .map(|ki| {
                    let g = stats.gamma[li][ki].sqrt();
                    complex_normal_vec(rng, b).into_iter().map(|x| x * g).collect()
                })
                .collect()
        })
        .collect();
    let half = hwi.kappa_r() * PI;
    let theta_noise = (0..s)
        .map(|_| {
            (0..r)
                .map(|_| if half > 0.0 { (2.0 * rng.random::<f64>() - 1.0) * half } else { 0.0 })
                .collect()
        })
        .collect();
    ChannelRealization { h_tilde, z_tilde, d, theta_noise }
}

/// Aggregated channels `Σ_s Z_{l,s} Φ_s h_{s,k} + d_{l,k}` for every AP and user,
/// indexed `[l][k]`. With `with_phase_noise` the realized phase errors are
/// added to `theta`.
pub fn aggregate_channel(
    stats: &ChannelStatistics,
    los: &LosStructure,
    real: &ChannelRealization,
    theta: &PhaseVector,
    with_phase_noise: bool,
) -> Vec<Vec<Vec<C64>>> {
    let (l, s, k) = (stats.n_aps(), stats.n_ris(), stats.n_users());
    let (b, r) = (los.b, los.r);
    let mut q: Vec<Vec<Vec<C64>>> = (0..l).map(|li| real.d[li].clone()).collect();
    let mut x = vec![C64::new(0.0, 0.0); r];
    for si in 0..s {
        let phase: Vec<C64> = (0..r)
            .map(|ri| {
                let mut t = theta.theta[si * r + ri];
                if with_phase_noise {
                    t += real.theta_noise[si][ri];
                }
                C64::from_polar(1.0, t)
            })
            .collect();
        for ki in 0..k {
            let a = stats.alpha[si][ki];
            let w_los = (a * stats.user_ris_los(si, ki)).sqrt();
            let w_nlos = (a * stats.user_ris_nlos(si, ki)).sqrt();
            let hbar = &los.a_r[si][ki];
            let ht = &real.h_tilde[si][ki];
            for ri in 0..r {
                x[ri] = phase[ri] * (hbar[ri] * w_los + ht[ri] * w_nlos);
            }
            for li in 0..l {
                let bt = stats.beta[li][si];
                let z_los = (bt * stats.ris_ap_los(li, si)).sqrt();
                let z_nlos = (bt * stats.ris_ap_nlos(li, si)).sqrt();
                let aq = &mut q[li][ki];
                if z_los > 0.0 {
                    let proj: C64 = los.a_r_dep[li][si].iter().zip(&x).map(|(a, v)| a.conj() * v).sum();
                    let coef = proj * z_los;
                    for (qb, ab) in aq.iter_mut().zip(&los.a_b[li][si]) {
                        *qb += ab * coef;
                    }
                }
                if z_nlos > 0.0 {
                    let zt = &real.z_tilde[li][si];
                    for bi in 0..b {
                        let mut acc = C64::new(0.0, 0.0);
                        for ri in 0..r {
                            acc += zt[(bi, ri)] * x[ri];
                        }
                        aq[bi] += acc * z_nlos;
                    }
                }
            }
        }
    }
    q
}

/// First moment of the phase error, `E{e^{jθ̃}} = sin(κ_r π)/(κ_r π)`.
pub fn sinc_moment(kappa_r: f64) -> f64 {
    if kappa_r == 0.0 {
        1.0
    } else {
        let x = kappa_r * PI;
        x.sin() / x
    }
}
