//! Stacked-matrix form of the rate for phase-shift optimization.
//!
//! All surface blocks are stacked into one `S·R` phase vector `v = e^{jθ}`
//! and every LoS surface-to-AP channel into one `L·B × S·R` matrix `Z̄¹`
//! whose `(l, s)` block is `√(δβ/(δ+1)) a_B(l,s) a_R(l,s)ᴴ`. With
//! `h̄¹_k` the stacked weighted LoS user-to-surface vectors, every
//! phase-dependent quantity of the closed form is a function of
//! `s_k = Z̄¹ Φ h̄¹_k`:
//!
//! - `Z̄^{2,k}`, `Z̄^{3,k}` and `Z̄^{4,k}` reweight the `(l, s)` blocks of
//!   `Z̄¹` by `√(c δ)`, `√(c δ ε)` and `c` relative to the LoS channel, so
//!   `Z̄^{2,k}(Z̄^{2,k})ᴴ = Z̄¹ diag(NLoS user power) Z̄¹ᴴ`.
//! - `U^{1..4}` are block-constant diagonals over the surface elements:
//!   `Σ_l c`, `Σ_l c δ`, `Σ_l c ε` and `Σ_l √(c_k c_i ε_k ε_i)`.
//! - `V^{1..4}` are block-constant diagonals over the `L·B` AP antennas that
//!   weight AP `l` by `Σ_s c (ε+1)`, `γ_{l,k}`, `Σ_s c δ` and `Σ_s c δ ε`.
//!   They turn per-AP weighted sums `Σ_l w_l Z̄¹_lᴴ Z̄¹_l` into
//!   `Z̄¹ᴴ V Z̄¹`.
//!
//! [`TractableTerms`] splits each term into the part that does not involve
//! `s_k` (independent of the phases) and the remainder.

use nalgebra::{DMatrix, DVector};

use crate::channel::{sinc_moment, LosStructure, PhaseVector};
use crate::closedform::{check_powers, ExpectationTerms, RateBreakdown};
use crate::error::Result;
use crate::scenario::{ChannelStatistics, HwiProfile, SystemConfig};
use crate::C64;

/// Stacked matrices and diagonal weights of one system.
#[derive(Clone, Debug)]
pub struct StackedStatistics {
    /// Number of APs.
    pub l: usize,
    /// Number of surfaces.
    pub s: usize,
    /// Number of users.
    pub k: usize,
    /// Antennas per AP.
    pub b: usize,
    /// Elements per surface.
    pub r: usize,
    /// Stacked weighted LoS surface-to-AP channel, `L·B × S·R`.
    pub zbar1: DMatrix<C64>,
    /// Stacked weighted LoS user-to-surface vectors, `[k]`, length `S·R`.
    pub hbar1: Vec<DVector<C64>>,
    /// Cascaded NLoS powers `c[l][s][k]`.
    pub c: Vec<Vec<Vec<f64>>>,
    /// Surface-to-AP Rician factors used for the reweightings.
    pub delta: Vec<Vec<f64>>,
    /// User-to-surface Rician factors used for the reweightings.
    pub eps: Vec<Vec<f64>>,
    /// `U^{1,k}`, length `S·R`.
    pub u1: Vec<Vec<f64>>,
    /// `U^{2,k}`, length `S·R`.
    pub u2: Vec<Vec<f64>>,
    /// `U^{3,k}`, length `S·R`.
    pub u3: Vec<Vec<f64>>,
    /// `U^{4,k,i}`, `[k][i]`, length `S·R`.
    pub u4: Vec<Vec<Vec<f64>>>,
    /// `V^{1,k}`, one weight per AP.
    pub v1: Vec<Vec<f64>>,
    /// `V^{2,k}`, one weight per AP.
    pub v2: Vec<Vec<f64>>,
    /// `V^{3,k}`, one weight per AP.
    pub v3: Vec<Vec<f64>>,
    /// `V^{4,k}`, one weight per AP.
    pub v4: Vec<Vec<f64>>,
    /// Impairment levels the matrices were built for.
    pub hwi: HwiProfile,
    gamma: Vec<Vec<f64>>,
    sn: f64,
    sn2: f64,
    zsq: Vec<Vec<f64>>,
    zeta: Vec<Vec<f64>>,
    zeta_sum: Vec<f64>,
    phi: Vec<Vec<f64>>,
    eta: Vec<Vec<f64>>,
    rho: Vec<Vec<f64>>,
    dlt: Vec<Vec<f64>>,
    gdiag: Vec<f64>,
    gldiag: Vec<Vec<f64>>,
    gbar_abs2: DMatrix<f64>,
    c_vec: Vec<Vec<f64>>,
}

/// Column layout index of element `r` of surface `s`.
fn col(s: usize, r: usize, rr: usize) -> usize {
    s * rr + r
}

/// Builds the stacked matrices, the `U` and `V` diagonals and the
/// phase-independent tables.
pub fn build_stacked(
    stats: &ChannelStatistics,
    los: &LosStructure,
    hwi: &HwiProfile,
    config: &SystemConfig,
) -> Result<StackedStatistics> {
    config.validate()?;
    hwi.validate()?;
    stats.check_config(config)?;
    let (l, s, k, b, r) = (config.l, config.s, config.k, config.b, config.r);
    let n = s * r;
    let bf = b as f64;
    let sn = sinc_moment(hwi.kappa_r());
    let sn2 = sn * sn;
    let per_elem = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..n).map(|x| f(x / r)).collect() };

    let zw: Vec<Vec<f64>> =
        (0..l).map(|li| (0..s).map(|si| (stats.beta[li][si] * stats.ris_ap_los(li, si)).sqrt()).collect()).collect();
    let mut zbar1 = DMatrix::from_element(l * b, n, C64::new(0.0, 0.0));
    for li in 0..l {
        for si in 0..s {
            let (ab, ar) = (&los.a_b[li][si], &los.a_r_dep[li][si]);
            for bi in 0..b {
                for ri in 0..r {
                    zbar1[(li * b + bi, col(si, ri, r))] = ab[bi] * ar[ri].conj() * zw[li][si];
                }
            }
        }
    }
    let hbar1: Vec<DVector<C64>> = (0..k)
        .map(|ki| {
            DVector::from_fn(n, |x, _| {
                let (si, ri) = (x / r, x % r);
                los.a_r[si][ki][ri] * (stats.alpha[si][ki] * stats.user_ris_los(si, ki)).sqrt()
            })
        })
        .collect();

    let c = stats.c.clone();
    let (delta, eps) = if stats.pure_los {
        (vec![vec![0.0; s]; l], vec![vec![0.0; k]; s])
    } else {
        (stats.delta.clone(), stats.eps.clone())
    };
    let u1: Vec<Vec<f64>> = (0..k).map(|ki| per_elem(&|si| (0..l).map(|li| c[li][si][ki]).sum())).collect();
    let u2: Vec<Vec<f64>> =
        (0..k).map(|ki| per_elem(&|si| (0..l).map(|li| c[li][si][ki] * delta[li][si]).sum())).collect();
    let u3: Vec<Vec<f64>> =
        (0..k).map(|ki| per_elem(&|si| (0..l).map(|li| c[li][si][ki] * eps[si][ki]).sum())).collect();
    let u4: Vec<Vec<Vec<f64>>> = (0..k)
        .map(|ki| {
            (0..k)
                .map(|i| {
                    per_elem(&|si| {
                        (0..l).map(|li| (c[li][si][ki] * c[li][si][i] * eps[si][i] * eps[si][ki]).sqrt()).sum()
                    })
                })
                .collect()
        })
        .collect();
    let v1: Vec<Vec<f64>> = (0..k)
        .map(|ki| (0..l).map(|li| (0..s).map(|si| c[li][si][ki] * (eps[si][ki] + 1.0)).sum()).collect())
        .collect();
    let v2: Vec<Vec<f64>> = (0..k).map(|ki| (0..l).map(|li| stats.gamma[li][ki]).collect()).collect();
    let v3: Vec<Vec<f64>> = (0..k)
        .map(|ki| (0..l).map(|li| (0..s).map(|si| c[li][si][ki] * delta[li][si]).sum()).collect())
        .collect();
    let v4: Vec<Vec<f64>> = (0..k)
        .map(|ki| (0..l).map(|li| (0..s).map(|si| c[li][si][ki] * delta[li][si] * eps[si][ki]).sum()).collect())
        .collect();

    let zsq: Vec<Vec<f64>> = (0..l).map(|li| per_elem(&|si| zw[li][si] * zw[li][si])).collect();
    let zeta: Vec<Vec<f64>> =
        (0..l).map(|li| per_elem(&|si| stats.beta[li][si] * stats.ris_ap_nlos(li, si))).collect();
    let zeta_sum: Vec<f64> = (0..n).map(|x| (0..l).map(|li| zeta[li][x]).sum()).collect();
    let phi: Vec<Vec<f64>> = zsq.iter().map(|z| z.iter().map(|v| bf * v).collect()).collect();
    let eta: Vec<Vec<f64>> =
        (0..k).map(|ki| per_elem(&|si| stats.alpha[si][ki] * stats.user_ris_nlos(si, ki))).collect();
    let rho: Vec<Vec<f64>> = hbar1.iter().map(|h| h.iter().map(|x| x.norm_sqr()).collect()).collect();
    let dlt: Vec<Vec<f64>> =
        (0..k).map(|ki| (0..n).map(|x| (1.0 - sn2) * rho[ki][x] + eta[ki][x]).collect()).collect();
    let gbar = {
        let mut g = zbar1.ad_mul(&zbar1);
        for x in 0..n {
            g[(x, x)] += bf * zeta_sum[x];
        }
        g
    };
    let gdiag: Vec<f64> = (0..n).map(|x| gbar[(x, x)].re).collect();
    let gldiag: Vec<Vec<f64>> = (0..l).map(|li| (0..n).map(|x| phi[li][x] + bf * zeta[li][x]).collect()).collect();
    let gbar_abs2 = gbar.map(|z| z.norm_sqr());
    let c_vec: Vec<Vec<f64>> = (0..k)
        .map(|ki| (0..l * n).map(|x| c[x / n][(x % n) / r][ki]).collect())
        .collect();
    Ok(StackedStatistics {
        l,
        s,
        k,
        b,
        r,
        zbar1,
        hbar1,
        c,
        delta,
        eps,
        u1,
        u2,
        u3,
        u4,
        v1,
        v2,
        v3,
        v4,
        hwi: hwi.clone(),
        gamma: stats.gamma.clone(),
        sn,
        sn2,
        zsq,
        zeta,
        zeta_sum,
        phi,
        eta,
        rho,
        dlt,
        gdiag,
        gldiag,
        gbar_abs2,
        c_vec,
    })
}

/// Phase-dependent vectors of every user at one phase vector.
pub struct Evaluation {
    u: Vec<DVector<C64>>,
    s: Vec<DVector<C64>>,
    fu: Vec<DVector<C64>>,
    gu: Vec<DVector<C64>>,
    z4u: Vec<DVector<C64>>,
    z4hs: Vec<DVector<C64>>,
}

/// Phase-independent parts of the expectation terms.
#[derive(Clone, Debug, PartialEq)]
pub struct TractableTerms {
    /// Part of the signal term free of `Z̄¹ Φ h̄¹`.
    pub signal1: Vec<f64>,
    /// Part of the interference term free of `Z̄¹ Φ h̄¹`, zero on the diagonal.
    pub interference1: Vec<Vec<f64>>,
    /// Part of the receive distortion term free of `Z̄¹ Φ h̄¹`.
    pub receiver1: Vec<Vec<f64>>,
    /// Part of the noise term free of `Z̄¹ Φ h̄¹`.
    pub noise1: Vec<f64>,
}

/// Adjoint weights of the power-independent terms.
#[derive(Clone, Debug, PartialEq)]
pub struct TermWeights {
    /// Weight of `signal[k]`.
    pub signal: Vec<f64>,
    /// Weight of `interference[k][i]`.
    pub interference: Vec<Vec<f64>>,
    /// Weight of `receiver[k][i]`.
    pub receiver: Vec<Vec<f64>>,
    /// Weight of `noise[k]`.
    pub noise: Vec<f64>,
}

impl TermWeights {
    /// All-zero weights for `k` users.
    pub fn zeros(k: usize) -> Self {
        Self {
            signal: vec![0.0; k],
            interference: vec![vec![0.0; k]; k],
            receiver: vec![vec![0.0; k]; k],
            noise: vec![0.0; k],
        }
    }
}

fn wsq(lam: &[f64], x: &DVector<C64>) -> f64 {
    lam.iter().zip(x.iter()).map(|(l, v)| l * v.norm_sqr()).sum()
}

fn dotc(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn hadamard(lam: &[f64], x: &DVector<C64>) -> DVector<C64> {
    DVector::from_iterator(x.len(), lam.iter().zip(x.iter()).map(|(l, v)| v * *l))
}

fn dsum(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl StackedStatistics {
    /// Number of phases `S·R`.
    pub fn n(&self) -> usize {
        self.s * self.r
    }

    fn reweighted(&self, f: impl Fn(usize, usize) -> f64) -> DMatrix<C64> {
        let (b, r) = (self.b, self.r);
        DMatrix::from_fn(self.l * b, self.n(), |row, colx| self.zbar1[(row, colx)] * f(row / b, colx / r))
    }

    /// `Z̄^{2,k}`: block `(l, s)` is `√(c δ) Z̄_{l,s}`.
    pub fn zbar2(&self, k: usize) -> DMatrix<C64> {
        self.reweighted(|li, si| self.block_ratio(li, si, self.c[li][si][k] * self.delta[li][si]))
    }

    /// `Z̄^{3,k}`: block `(l, s)` is `√(c δ ε) Z̄_{l,s}`.
    pub fn zbar3(&self, k: usize) -> DMatrix<C64> {
        self.reweighted(|li, si| self.block_ratio(li, si, self.c[li][si][k] * self.delta[li][si] * self.eps[si][k]))
    }

    /// `Z̄^{4,k}`: block `(l, s)` is `c Z̄¹_{l,s}`.
    pub fn zbar4(&self, k: usize) -> DMatrix<C64> {
        self.reweighted(|li, si| self.c[li][si][k])
    }

    fn block_ratio(&self, li: usize, si: usize, power: f64) -> f64 {
        let z = self.zsq[li][si * self.r];
        if z > 0.0 {
            (power / z).sqrt()
        } else {
            0.0
        }
    }

    fn block_norms(&self, s: &DVector<C64>) -> Vec<f64> {
        let b = self.b;
        (0..self.l).map(|li| (0..b).map(|x| s[li * b + x].norm_sqr()).sum()).collect()
    }

    fn scale_blocks(&self, w: &[f64], s: &DVector<C64>) -> DVector<C64> {
        let b = self.b;
        DVector::from_fn(s.len(), |x, _| s[x] * w[x / b])
    }

    /// `Z̄^{4,k} x` without materializing the matrix.
    fn z4_apply(&self, k: usize, x: &DVector<C64>) -> DVector<C64> {
        let (b, n) = (self.b, self.n());
        let mut out = DVector::from_element(self.l * b, C64::new(0.0, 0.0));
        for li in 0..self.l {
            let scaled = DVector::from_fn(n, |cx, _| x[cx] * self.c_vec[k][li * n + cx]);
            let rows = self.zbar1.rows(li * b, b) * scaled;
            out.rows_mut(li * b, b).copy_from(&rows);
        }
        out
    }

    /// `(Z̄^{4,k})ᴴ y` without materializing the matrix.
    fn z4h_apply(&self, k: usize, y: &DVector<C64>) -> DVector<C64> {
        let (b, n) = (self.b, self.n());
        let mut out = DVector::from_element(n, C64::new(0.0, 0.0));
        for li in 0..self.l {
            let part = self.zbar1.rows(li * b, b).ad_mul(&y.rows(li * b, b));
            for cx in 0..n {
                out[cx] += part[cx] * self.c_vec[k][li * n + cx];
            }
        }
        out
    }

    /// Evaluates `u_k = Φ h̄¹_k`, `s_k = Z̄¹ u_k` and the derived vectors.
    pub fn evaluate(&self, theta: &PhaseVector) -> Result<Evaluation> {
        theta.check_len(self.n())?;
        let v = theta.phasors();
        let bf = self.b as f64;
        let mut ev = Evaluation { u: vec![], s: vec![], fu: vec![], gu: vec![], z4u: vec![], z4hs: vec![] };
        for ki in 0..self.k {
            let u = DVector::from_fn(self.n(), |x, _| v[x] * self.hbar1[ki][x]);
            let s = &self.zbar1 * &u;
            let fu = self.zbar1.ad_mul(&s);
            let gu = &fu + hadamard(&self.zeta_sum, &u) * C64::new(bf, 0.0);
            let z4u = self.z4_apply(ki, &u);
            let z4hs = self.z4h_apply(ki, &s);
            ev.u.push(u);
            ev.s.push(s);
            ev.fu.push(fu);
            ev.gu.push(gu);
            ev.z4u.push(z4u);
            ev.z4hs.push(z4hs);
        }
        Ok(ev)
    }

    /// Evaluation with every `Z̄¹ Φ h̄¹` contribution removed.
    fn lifted(&self) -> Evaluation {
        let n = self.n();
        let bf = self.b as f64;
        let zero_n = DVector::from_element(n, C64::new(0.0, 0.0));
        let zero_lb = DVector::from_element(self.l * self.b, C64::new(0.0, 0.0));
        let mut ev = Evaluation { u: vec![], s: vec![], fu: vec![], gu: vec![], z4u: vec![], z4hs: vec![] };
        for ki in 0..self.k {
            let u = self.hbar1[ki].clone();
            ev.gu.push(hadamard(&self.zeta_sum, &u) * C64::new(bf, 0.0));
            ev.u.push(u);
            ev.s.push(zero_lb.clone());
            ev.fu.push(zero_n.clone());
            ev.z4u.push(zero_lb.clone());
            ev.z4hs.push(zero_n.clone());
        }
        ev
    }

    fn tg(&self, l1: &[f64], l2: &[f64]) -> f64 {
        let v2 = DVector::from_column_slice(l2);
        let w = &self.gbar_abs2 * v2;
        dsum(l1, w.as_slice())
    }

    /// All power-independent terms from an evaluation.
    pub fn assemble(&self, ev: &Evaluation) -> ExpectationTerms {
        let (l, k) = (self.l, self.k);
        let bf = self.b as f64;
        let (sn, sn2) = (self.sn, self.sn2);
        let gamma = &self.gamma;
        let g_dir: Vec<f64> = (0..k).map(|ki| bf * (0..l).map(|li| gamma[li][ki]).sum::<f64>()).collect();
        let q: Vec<Vec<f64>> = (0..k).map(|ki| self.block_norms(&ev.s[ki])).collect();
        let zr: Vec<Vec<f64>> = (0..l).map(|li| (0..k).map(|ki| dsum(&self.zeta[li], &self.rho[ki])).collect()).collect();
        let a_l: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|ki| zr[li][ki] + dsum(&self.zeta[li], &self.eta[ki])).collect())
            .collect();
        let tau_f: Vec<Vec<f64>> = (0..l).map(|li| (0..k).map(|ki| dsum(&self.phi[li], &self.eta[ki])).collect()).collect();
        let tau_z: Vec<Vec<f64>> = (0..l).map(|li| (0..k).map(|ki| dsum(&self.zeta[li], &self.eta[ki])).collect()).collect();
        let gl: Vec<Vec<f64>> = (0..l).map(|li| (0..k).map(|ki| q[ki][li] + bf * zr[li][ki]).collect()).collect();
        let trgc: Vec<f64> =
            (0..k).map(|ki| dotc(&ev.u[ki], &ev.gu[ki]).re + dsum(&self.gdiag, &self.eta[ki])).collect();
        let trglc: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|ki| gl[li][ki] + dsum(&self.gldiag[li], &self.eta[ki])).collect())
            .collect();
        let trglcb: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|i| sn2 * gl[li][i] + dsum(&self.gldiag[li], &self.dlt[i])).collect())
            .collect();
        let trflcb: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|i| sn2 * q[i][li] + dsum(&self.phi[li], &self.dlt[i])).collect())
            .collect();
        let trflc: Vec<Vec<f64>> = (0..l).map(|li| (0..k).map(|ki| q[ki][li] + tau_f[li][ki]).collect()).collect();
        let noise: Vec<f64> = (0..k).map(|ki| trgc[ki] + g_dir[ki]).collect();

        let mut signal = vec![0.0; k];
        for ki in 0..k {
            let (eta, rho) = (&self.eta[ki], &self.rho[ki]);
            let z4 = 2.0 * dotc(&ev.s[ki], &ev.z4u[ki]).re;
            let mut e2 = trgc[ki] * trgc[ki] + 2.0 * z4;
            for li in 0..l {
                let ze: Vec<f64> = (0..self.n()).map(|x| self.phi[li][x] * eta[x] * eta[x] * self.zeta[li][x]).collect();
                let cfcs = q[ki][li] * zr[li][ki] + ze.iter().sum::<f64>();
                let tl = zr[li][ki] * zr[li][ki]
                    + (0..self.n())
                        .map(|x| self.zeta[li][x].powi(2) * (2.0 * eta[x] * rho[x] + eta[x] * eta[x]))
                        .sum::<f64>();
                e2 += 2.0 * cfcs + bf * tl;
            }
            let eg: Vec<f64> = (0..self.n()).map(|x| eta[x] * self.gdiag[x]).collect();
            let mut e3 = wsq(rho, &ev.gu[ki])
                + 2.0 * dotc(&ev.u[ki], &hadamard(&eg, &ev.gu[ki])).re
                + (0..self.n()).map(|x| eg[x] * eg[x]).sum::<f64>()
                + z4;
            for li in 0..l {
                e3 += (0..self.n())
                    .map(|x| {
                        self.phi[li][x]
                            * (rho[x] * zr[li][ki]
                                + 2.0 * rho[x] * self.zeta[li][x] * eta[x]
                                + eta[x] * eta[x] * self.zeta[li][x])
                            + 2.0 * bf * self.zeta[li][x].powi(2) * eta[x] * rho[x]
                            + self.zeta[li][x] * eta[x] * eta[x] * self.gldiag[li][x]
                    })
                    .sum::<f64>()
                    + zr[li][ki] * gl[li][ki];
            }
            let mut psi_uu = wsq(eta, &ev.gu[ki]);
            let mut psi_rho = self.tg(rho, eta);
            let mut psi_d = self.tg(eta, eta);
            for li in 0..l {
                psi_uu += tau_f[li][ki] * zr[li][ki] + tau_z[li][ki] * gl[li][ki];
                psi_rho += tau_f[li][ki] * zr[li][ki] + tau_z[li][ki] * dsum(rho, &self.gldiag[li]);
                psi_d += tau_f[li][ki] * tau_z[li][ki] + tau_z[li][ki] * dsum(&self.gldiag[li], eta);
            }
            let e4 = (1.0 + sn2) * psi_uu + (1.0 - sn2) * psi_rho + psi_d;
            let direct: f64 = (0..l)
                .map(|li| gamma[li][ki] * (trglc[li][ki] + trglcb[li][ki]) + bf * gamma[li][ki] * gamma[li][ki])
                .sum();
            signal[ki] =
                sn2 * e2 + (1.0 - sn2) * e3 + e4 + 2.0 * sn * g_dir[ki] * trgc[ki] + direct + g_dir[ki] * g_dir[ki];
        }

        let mut interference = vec![vec![0.0; k]; k];
        for ki in 0..k {
            for i in (0..k).filter(|&i| i != ki) {
                let g = dotc(&ev.u[ki], &ev.gu[i]);
                let mut v = sn2 * g.norm_sqr()
                    + wsq(&self.dlt[i], &ev.gu[ki])
                    + sn2 * wsq(&self.eta[ki], &ev.gu[i])
                    + self.tg(&self.eta[ki], &self.dlt[i]);
                for li in 0..l {
                    v += a_l[li][ki] * trflcb[li][i]
                        + (a_l[li][i] + gamma[li][i]) * trglc[li][ki]
                        + gamma[li][ki] * trglcb[li][i]
                        + bf * gamma[li][ki] * gamma[li][i];
                }
                interference[ki][i] = v;
            }
        }

        let b = self.b;
        let mut receiver = vec![vec![0.0; k]; k];
        for ki in 0..k {
            for i in 0..k {
                let mut v = 0.0;
                for li in 0..l {
                    let p4: f64 = (0..b)
                        .map(|x| ev.s[i][li * b + x].norm_sqr() * ev.s[ki][li * b + x].norm_sqr())
                        .sum();
                    let e_eta = dsum(&self.zsq[li], &self.eta[ki]);
                    let e_dlt = dsum(&self.zsq[li], &self.dlt[i]);
                    let tk = a_l[li][ki] + gamma[li][ki];
                    let ti = a_l[li][i] + gamma[li][i];
                    v += sn2 * p4
                        + sn2 * e_eta * q[i][li]
                        + e_dlt * q[ki][li]
                        + bf * e_dlt * e_eta
                        + tk * trflcb[li][i]
                        + ti * trflc[li][ki]
                        + bf * ti * tk;
                }
                receiver[ki][i] = v;
            }
        }
        ExpectationTerms { signal, interference, receiver, noise }
    }

    /// Phase-independent parts of all terms.
    pub fn tractable_terms(&self) -> TractableTerms {
        let t = self.assemble(&self.lifted());
        TractableTerms { signal1: t.signal, interference1: t.interference, receiver1: t.receiver, noise1: t.noise }
    }

    /// Gradient with respect to `θ` of `Σ` weight × term, evaluated at `ev`.
    pub fn weighted_gradient(&self, ev: &Evaluation, w: &TermWeights) -> Vec<f64> {
        let (l, k, b, n) = (self.l, self.k, self.b, self.n());
        let bf = self.b as f64;
        let (sn, sn2) = (self.sn, self.sn2);
        let gamma = &self.gamma;
        let zero_n = DVector::from_element(n, C64::new(0.0, 0.0));
        let zero_lb = DVector::from_element(l * b, C64::new(0.0, 0.0));
        let mut xg: Vec<DVector<C64>> = vec![zero_n.clone(); k];
        let mut yz: Vec<DVector<C64>> = vec![zero_lb; k];
        let mut dd: Vec<DVector<C64>> = vec![zero_n; k];
        let re = |x: f64| C64::new(x, 0.0);

        let zr: Vec<Vec<f64>> = (0..l).map(|li| (0..k).map(|ki| dsum(&self.zeta[li], &self.rho[ki])).collect()).collect();
        let a_l: Vec<Vec<f64>> = (0..l)
            .map(|li| (0..k).map(|ki| zr[li][ki] + dsum(&self.zeta[li], &self.eta[ki])).collect())
            .collect();
        let tau_z: Vec<Vec<f64>> = (0..l).map(|li| (0..k).map(|ki| dsum(&self.zeta[li], &self.eta[ki])).collect()).collect();
        let g_dir: Vec<f64> = (0..k).map(|ki| bf * (0..l).map(|li| gamma[li][ki]).sum::<f64>()).collect();

        for ki in 0..k {
            let ws = w.signal[ki];
            if ws != 0.0 {
                let eta = &self.eta[ki];
                let rho = &self.rho[ki];
                let trgc = dotc(&ev.u[ki], &ev.gu[ki]).re + dsum(&self.gdiag, eta);
                dd[ki] += &ev.gu[ki] * re(ws * (2.0 * sn2 * trgc + 2.0 * sn * g_dir[ki]));
                let lw: Vec<f64> = (0..l)
                    .map(|li| {
                        ws * (2.0 * sn2 * zr[li][ki]
                            + (1.0 - sn2) * zr[li][ki]
                            + (1.0 + sn2) * (tau_z[li][ki] + gamma[li][ki]))
                    })
                    .collect();
                yz[ki] += self.scale_blocks(&lw, &ev.s[ki]);
                let cz = ws * (2.0 * sn2 + (1.0 - sn2));
                yz[ki] += &ev.z4u[ki] * re(cz);
                dd[ki] += &ev.z4hs[ki] * re(cz);
                let eg: Vec<f64> = (0..n).map(|x| eta[x] * self.gdiag[x]).collect();
                xg[ki] += hadamard(rho, &ev.gu[ki]) * re(ws * (1.0 - sn2));
                dd[ki] += hadamard(&eg, &ev.gu[ki]) * re(ws * (1.0 - sn2));
                xg[ki] += hadamard(&eg, &ev.u[ki]) * re(ws * (1.0 - sn2));
                xg[ki] += hadamard(eta, &ev.gu[ki]) * re(ws * (1.0 + sn2));
            }
            if w.noise[ki] != 0.0 {
                yz[ki] += &ev.s[ki] * re(w.noise[ki]);
            }
            for i in 0..k {
                let wi = w.interference[ki][i];
                if i != ki && wi != 0.0 {
                    let g = dotc(&ev.u[ki], &ev.gu[i]);
                    dd[ki] += &ev.gu[i] * (g.conj() * wi * sn2);
                    dd[i] += &ev.gu[ki] * (g * wi * sn2);
                    xg[ki] += hadamard(&self.dlt[i], &ev.gu[ki]) * re(wi);
                    xg[i] += hadamard(&self.eta[ki], &ev.gu[i]) * re(wi * sn2);
                    let wl_i: Vec<f64> = (0..l).map(|li| wi * sn2 * (a_l[li][ki] + gamma[li][ki])).collect();
                    let wl_k: Vec<f64> = (0..l).map(|li| wi * (a_l[li][i] + gamma[li][i])).collect();
                    yz[i] += self.scale_blocks(&wl_i, &ev.s[i]);
                    yz[ki] += self.scale_blocks(&wl_k, &ev.s[ki]);
                }
                let wr = w.receiver[ki][i];
                if wr != 0.0 {
                    let mut pi = ev.s[i].clone();
                    let mut pk = ev.s[ki].clone();
                    for x in 0..l * b {
                        pi[x] *= ev.s[ki][x].norm_sqr();
                        pk[x] *= ev.s[i][x].norm_sqr();
                    }
                    yz[i] += pi * re(wr * sn2);
                    yz[ki] += pk * re(wr * sn2);
                    let wl_i: Vec<f64> = (0..l)
                        .map(|li| wr * sn2 * (dsum(&self.zsq[li], &self.eta[ki]) + a_l[li][ki] + gamma[li][ki]))
                        .collect();
                    let wl_k: Vec<f64> = (0..l)
                        .map(|li| wr * (dsum(&self.zsq[li], &self.dlt[i]) + a_l[li][i] + gamma[li][i]))
                        .collect();
                    yz[i] += self.scale_blocks(&wl_i, &ev.s[i]);
                    yz[ki] += self.scale_blocks(&wl_k, &ev.s[ki]);
                }
            }
        }

        let mut grad = vec![0.0; n];
        for a in 0..k {
            let y = &yz[a] + &self.zbar1 * &xg[a];
            let adj = self.zbar1.ad_mul(&y) + hadamard(&self.zeta_sum, &xg[a]) * re(bf) + &dd[a];
            for x in 0..n {
                grad[x] += 2.0 * (ev.u[a][x].conj() * adj[x]).im;
            }
        }
        grad
    }
}

impl TractableTerms {
    /// Phase-dependent remainder of the signal term.
    pub fn signal2(&self, full: &ExpectationTerms) -> Vec<f64> {
        full.signal.iter().zip(&self.signal1).map(|(a, b)| a - b).collect()
    }

    /// Phase-dependent remainder of the interference terms.
    pub fn interference2(&self, full: &ExpectationTerms) -> Vec<Vec<f64>> {
        full.interference
            .iter()
            .zip(&self.interference1)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect()
    }
}

/// Rate of every user from the stacked form.
pub fn rate_reform(
    theta: &PhaseVector,
    stacked: &StackedStatistics,
    config: &SystemConfig,
    powers: &[f64],
) -> Result<RateBreakdown> {
    check_powers(powers, stacked.k)?;
    let ev = stacked.evaluate(theta)?;
    Ok(stacked.assemble(&ev).breakdown(&stacked.hwi, powers, config.sigma2))
}
