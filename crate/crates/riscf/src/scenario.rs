//! System configuration, geometry and large-scale channel statistics.
//!
//! Everything here is slow-timescale information: array sizes, powers,
//! impairment levels, path losses, Rician factors and the LoS angles. The
//! other modules treat a [`ChannelStatistics`] value as immutable input.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions, powers and smoothing constant of one system instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of access points.
    pub l: usize,
    /// Number of reconfigurable surfaces.
    pub s: usize,
    /// Number of users.
    pub k: usize,
    /// Antennas per access point (a perfect square).
    pub b: usize,
    /// Elements per surface (a perfect square).
    pub r: usize,
    /// Element spacing divided by the carrier wavelength.
    pub d_over_lambda: f64,
    /// Per-user transmit power in watts.
    pub p: f64,
    /// Receiver noise power in watts.
    pub sigma2: f64,
    /// Log-sum-exp smoothing constant of the max-min objective.
    pub mu: f64,
}

impl SystemConfig {
    /// Checks counts, square array sizes and positivity of the scalars.
    ///
    /// `s = 0` is accepted and describes a system without surfaces.
    pub fn validate(&self) -> Result<()> {
        if self.l == 0 || self.k == 0 {
            return Err(Error::InvalidDimension(format!(
                "need at least one AP and one user, got L={} K={}",
                self.l, self.k
            )));
        }
        if self.b == 0 || self.r == 0 {
            return Err(Error::InvalidDimension(format!(
                "array sizes must be positive, got B={} R={}",
                self.b, self.r
            )));
        }
        square_side(self.b)?;
        square_side(self.r)?;
        for (name, v) in [
            ("p", self.p),
            ("sigma2", self.sigma2),
            ("mu", self.mu),
            ("d_over_lambda", self.d_over_lambda),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Number of phase shifts, `S·R`.
    pub fn n_phases(&self) -> usize {
        self.s * self.r
    }

    /// Equal per-user powers `p`.
    pub fn powers(&self) -> Vec<f64> {
        vec![self.p; self.k]
    }

    /// Copy with different array sizes.
    pub fn with_arrays(&self, b: usize, r: usize) -> Self {
        Self { b, r, ..self.clone() }
    }
}

/// Side length of a square array, or an error when `x` is not a perfect square.
pub fn square_side(x: usize) -> Result<usize> {
    let side = (x as f64).sqrt().round() as usize;
    if side * side == x {
        Ok(side)
    } else {
        Err(Error::InvalidDimension(format!("{x} is not a perfect square")))
    }
}

/// Transceiver and surface impairment levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HwiProfile {
    /// Transmitter error vector magnitude.
    pub kappa_u: f64,
    /// Receiver error vector magnitude.
    pub kappa_b: f64,
    /// Phase quantization bits of the surfaces, `None` for ideal phases.
    pub quant_bits: Option<u32>,
}

impl HwiProfile {
    /// Impairment-free hardware with ideal phases.
    pub fn ideal() -> Self {
        Self { kappa_u: 0.0, kappa_b: 0.0, quant_bits: None }
    }

    /// Builds and validates a profile.
    pub fn new(kappa_u: f64, kappa_b: f64, quant_bits: Option<u32>) -> Result<Self> {
        let hwi = Self { kappa_u, kappa_b, quant_bits };
        hwi.validate()?;
        Ok(hwi)
    }

    /// Phase-noise half-width in units of π: `1/2^b`, or 0 for ideal phases.
    pub fn kappa_r(&self) -> f64 {
        match self.quant_bits {
            None => 0.0,
            Some(b) => 0.5f64.powi(b as i32),
        }
    }

    /// Checks that both error vector magnitudes are finite and nonnegative.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa_u", self.kappa_u), ("kappa_b", self.kappa_b)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// A direction given by azimuth and elevation in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    /// Azimuth angle.
    pub azimuth: f64,
    /// Elevation angle.
    pub elevation: f64,
}

impl Angle {
    fn draw<R: Rng>(rng: &mut R) -> Self {
        Self {
            azimuth: rng.random::<f64>() * 2.0 * PI,
            elevation: rng.random::<f64>() * 2.0 * PI,
        }
    }
}

/// Large-scale statistics of every link, the statistical CSI of the system.
///
/// Indexing follows the link endpoints: `alpha[s][k]` is user `k` to surface
/// `s`, `beta[l][s]` is surface `s` to AP `l` and `gamma[l][k]` is user `k`
/// to AP `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStatistics {
    /// User to surface path loss.
    pub alpha: Vec<Vec<f64>>,
    /// Surface to AP path loss.
    pub beta: Vec<Vec<f64>>,
    /// User to AP path loss.
    pub gamma: Vec<Vec<f64>>,
    /// Surface to AP Rician factor.
    pub delta: Vec<Vec<f64>>,
    /// User to surface Rician factor.
    pub eps: Vec<Vec<f64>>,
    /// Cascaded NLoS power `βα/((δ+1)(ε+1))`, zero for pure-LoS statistics.
    pub c: Vec<Vec<Vec<f64>>>,
    /// Arrival direction at surface `s` from user `k`.
    pub aoa_ris: Vec<Vec<Angle>>,
    /// Arrival direction at AP `l` from surface `s`.
    pub aoa_ap: Vec<Vec<Angle>>,
    /// Departure direction from surface `s` towards AP `l`.
    pub aod_ris: Vec<Vec<Angle>>,
    /// Every surface-side link is pure LoS (the Rician factors are infinite).
    pub pure_los: bool,
}

impl ChannelStatistics {
    /// Assembles statistics from their parts and derives `c`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        alpha: Vec<Vec<f64>>,
        beta: Vec<Vec<f64>>,
        gamma: Vec<Vec<f64>>,
        delta: Vec<Vec<f64>>,
        eps: Vec<Vec<f64>>,
        aoa_ris: Vec<Vec<Angle>>,
        aoa_ap: Vec<Vec<Angle>>,
        aod_ris: Vec<Vec<Angle>>,
        pure_los: bool,
    ) -> Result<Self> {
        let mut stats = Self {
            alpha,
            beta,
            gamma,
            delta,
            eps,
            c: Vec::new(),
            aoa_ris,
            aoa_ap,
            aod_ris,
            pure_los,
        };
        stats.refresh_c();
        stats.validate()?;
        Ok(stats)
    }

    /// Number of APs.
    pub fn n_aps(&self) -> usize {
        self.gamma.len()
    }

    /// Number of surfaces.
    pub fn n_ris(&self) -> usize {
        self.alpha.len()
    }

    /// Number of users.
    pub fn n_users(&self) -> usize {
        self.gamma.first().map_or(0, Vec::len)
    }

    fn refresh_c(&mut self) {
        let (l, s, k) = (self.n_aps(), self.n_ris(), self.n_users());
        self.c = (0..l)
            .map(|li| {
                (0..s)
                    .map(|si| {
                        (0..k)
                            .map(|ki| {
                                if self.pure_los {
                                    0.0
                                } else {
                                    self.beta[li][si] * self.alpha[si][ki]
                                        / ((self.delta[li][si] + 1.0) * (self.eps[si][ki] + 1.0))
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
    }

    /// Checks shapes, positivity of path losses and nonnegative Rician factors.
    pub fn validate(&self) -> Result<()> {
        let (l, s, k) = (self.n_aps(), self.n_ris(), self.n_users());
        let shape_ok = |m: &Vec<Vec<f64>>, rows: usize, cols: usize| {
            m.len() == rows && m.iter().all(|r| r.len() == cols)
        };
        let angles_ok = |m: &Vec<Vec<Angle>>, rows: usize, cols: usize| {
            m.len() == rows && m.iter().all(|r| r.len() == cols)
        };
        if !(shape_ok(&self.alpha, s, k)
            && shape_ok(&self.beta, l, s)
            && shape_ok(&self.gamma, l, k)
            && shape_ok(&self.delta, l, s)
            && shape_ok(&self.eps, s, k)
            && angles_ok(&self.aoa_ris, s, k)
            && angles_ok(&self.aoa_ap, l, s)
            && angles_ok(&self.aod_ris, l, s))
        {
            return Err(Error::DimensionMismatch(format!(
                "statistics shapes disagree with L={l} S={s} K={k}"
            )));
        }
        let positive = |m: &Vec<Vec<f64>>| m.iter().flatten().all(|v| v.is_finite() && *v > 0.0);
        let nonneg = |m: &Vec<Vec<f64>>| m.iter().flatten().all(|v| v.is_finite() && *v >= 0.0);
        if !(positive(&self.alpha) && positive(&self.beta) && positive(&self.gamma)) {
            return Err(Error::InvalidParameter("path losses must be positive".into()));
        }
        if !(nonneg(&self.delta) && nonneg(&self.eps)) {
            return Err(Error::InvalidParameter("Rician factors must be >= 0".into()));
        }
        Ok(())
    }

    /// Checks that the statistics describe the dimensions of `config`.
    pub fn check_config(&self, config: &SystemConfig) -> Result<()> {
        if self.n_aps() != config.l || self.n_ris() != config.s || self.n_users() != config.k {
            return Err(Error::DimensionMismatch(format!(
                "statistics are L={} S={} K={}, config is L={} S={} K={}",
                self.n_aps(),
                self.n_ris(),
                self.n_users(),
                config.l,
                config.s,
                config.k
            )));
        }
        Ok(())
    }

    /// LoS power fraction `δ/(δ+1)` of the surface to AP link.
    pub fn ris_ap_los(&self, l: usize, s: usize) -> f64 {
        if self.pure_los {
            1.0
        } else {
            let d = self.delta[l][s];
            d / (d + 1.0)
        }
    }

    /// NLoS power fraction `1/(δ+1)` of the surface to AP link.
    pub fn ris_ap_nlos(&self, l: usize, s: usize) -> f64 {
        if self.pure_los {
            0.0
        } else {
            1.0 / (self.delta[l][s] + 1.0)
        }
    }

    /// LoS power fraction `ε/(ε+1)` of the user to surface link.
    pub fn user_ris_los(&self, s: usize, k: usize) -> f64 {
        if self.pure_los {
            1.0
        } else {
            let e = self.eps[s][k];
            e / (e + 1.0)
        }
    }

    /// NLoS power fraction `1/(ε+1)` of the user to surface link.
    pub fn user_ris_nlos(&self, s: usize, k: usize) -> f64 {
        if self.pure_los {
            0.0
        } else {
            1.0 / (self.eps[s][k] + 1.0)
        }
    }

    /// Same statistics with every surface-to-AP Rician factor set to `delta`.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        let mut out = self.clone();
        for row in &mut out.delta {
            row.fill(delta);
        }
        out.refresh_c();
        out.validate()?;
        Ok(out)
    }

    /// Same statistics with every user-to-surface Rician factor set to `eps`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let mut out = self.clone();
        for row in &mut out.eps {
            row.fill(eps);
        }
        out.refresh_c();
        out.validate()?;
        Ok(out)
    }

    /// Same statistics with the pure-LoS flag set or cleared.
    pub fn with_pure_los(&self, pure_los: bool) -> Self {
        let mut out = self.clone();
        out.pure_los = pure_los;
        out.refresh_c();
        out
    }

    /// Same APs and users with every surface removed.
    pub fn without_ris(&self) -> Self {
        let l = self.n_aps();
        let mut out = self.clone();
        out.alpha.clear();
        out.eps.clear();
        out.aoa_ris.clear();
        out.beta = vec![Vec::new(); l];
        out.delta = vec![Vec::new(); l];
        out.aoa_ap = vec![Vec::new(); l];
        out.aod_ris = vec![Vec::new(); l];
        out.refresh_c();
        out
    }
}

/// Path-loss exponents of the three link types.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathlossExponents {
    /// User to surface exponent.
    pub user_ris: f64,
    /// Surface to AP exponent.
    pub ris_ap: f64,
    /// User to AP exponent.
    pub user_ap: f64,
}

/// Node positions and the distance-based path-loss law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// AP coordinates in meters.
    pub ap_positions: Vec<[f64; 3]>,
    /// Surface coordinates in meters.
    pub ris_positions: Vec<[f64; 3]>,
    /// User coordinates in meters.
    pub user_positions: Vec<[f64; 3]>,
    /// Exponents of the three link types.
    pub exponents: PathlossExponents,
    /// Path loss at one meter.
    pub pathloss_scale: f64,
}

impl Topology {
    fn pathloss(&self, a: &[f64; 3], b: &[f64; 3], exponent: f64, what: &str) -> Result<f64> {
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        if d <= 0.0 {
            return Err(Error::DegenerateGeometry(format!("zero {what} distance")));
        }
        Ok(self.pathloss_scale * d.powf(-exponent))
    }
}

/// Rician factors of every surface-side link.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RicianFactors {
    /// Surface to AP factors, `[l][s]`.
    pub delta: Vec<Vec<f64>>,
    /// User to surface factors, `[s][k]`.
    pub eps: Vec<Vec<f64>>,
    /// Treat every surface-side link as pure LoS.
    pub pure_los: bool,
}

impl RicianFactors {
    /// Broadcasts scalar factors to all links.
    pub fn uniform(l: usize, s: usize, k: usize, delta: f64, eps: f64) -> Self {
        Self { delta: vec![vec![delta; s]; l], eps: vec![vec![eps; k]; s], pure_los: false }
    }
}

/// Computes path losses from distances and draws the LoS angles from `seed`.
///
/// Angles are drawn in the fixed order `aoa_ris[s][k]`, `aoa_ap[l][s]`,
/// `aod_ris[l][s]`, each coordinate uniform on `[0, 2π)`.
pub fn build_statistics(topology: &Topology, rician: &RicianFactors, seed: u64) -> Result<ChannelStatistics> {
    let (l, s, k) = (
        topology.ap_positions.len(),
        topology.ris_positions.len(),
        topology.user_positions.len(),
    );
    let e = topology.exponents;
    for (name, v) in [("user_ris", e.user_ris), ("ris_ap", e.ris_ap), ("user_ap", e.user_ap)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParameter(format!("exponent {name} must be positive")));
        }
    }
    if !(topology.pathloss_scale.is_finite() && topology.pathloss_scale > 0.0) {
        return Err(Error::InvalidParameter("pathloss_scale must be positive".into()));
    }
    let mut alpha = vec![vec![0.0; k]; s];
    for (si, ris) in topology.ris_positions.iter().enumerate() {
        for (ki, user) in topology.user_positions.iter().enumerate() {
            alpha[si][ki] = topology.pathloss(ris, user, e.user_ris, "user-RIS")?;
        }
    }
    let mut beta = vec![vec![0.0; s]; l];
    let mut gamma = vec![vec![0.0; k]; l];
    for (li, ap) in topology.ap_positions.iter().enumerate() {
        for (si, ris) in topology.ris_positions.iter().enumerate() {
            beta[li][si] = topology.pathloss(ap, ris, e.ris_ap, "RIS-AP")?;
        }
        for (ki, user) in topology.user_positions.iter().enumerate() {
            gamma[li][ki] = topology.pathloss(ap, user, e.user_ap, "user-AP")?;
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let aoa_ris = draw_angles(&mut rng, s, k);
    let aoa_ap = draw_angles(&mut rng, l, s);
    let aod_ris = draw_angles(&mut rng, l, s);
    ChannelStatistics::from_parts(
        alpha,
        beta,
        gamma,
        rician.delta.clone(),
        rician.eps.clone(),
        aoa_ris,
        aoa_ap,
        aod_ris,
        rician.pure_los,
    )
}

fn draw_angles<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<Angle>> {
    (0..rows).map(|_| (0..cols).map(|_| Angle::draw(rng)).collect()).collect()
}

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(x_dbm: f64) -> f64 {
    10f64.powf((x_dbm - 30.0) / 10.0)
}

/// The reference scenario: configuration plus the geometry parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDefaults {
    /// Dimensions, powers and smoothing constant.
    pub config: SystemConfig,
    /// Impairment levels.
    pub hwi: HwiProfile,
    /// Surface to AP Rician factor.
    pub delta: f64,
    /// User to surface Rician factor.
    pub eps: f64,
    /// Radius of the disk in which users are dropped, meters.
    pub user_radius: f64,
    /// Radius of the circle carrying the APs, meters.
    pub ap_radius: f64,
    /// Radius of the circle carrying the surfaces, meters.
    pub ris_radius: f64,
    /// Path-loss exponents.
    pub exponents: PathlossExponents,
    /// Path loss at one meter.
    pub pathloss_scale: f64,
}

/// Reference parameters: five APs of nine antennas, four 36-element surfaces,
/// five users, 30 dBm transmit power, -104 dBm noise, `δ = 1`, `ε = 10`,
/// `κ_u = κ_b = 0.3` and two-bit phase quantization.
pub fn reference_defaults() -> ScenarioDefaults {
    ScenarioDefaults {
        config: SystemConfig {
            l: 5,
            s: 4,
            k: 5,
            b: 9,
            r: 36,
            d_over_lambda: 0.5,
            p: dbm_to_watts(30.0),
            sigma2: dbm_to_watts(-104.0),
            mu: 100.0,
        },
        hwi: HwiProfile { kappa_u: 0.3, kappa_b: 0.3, quant_bits: Some(2) },
        delta: 1.0,
        eps: 10.0,
        user_radius: 4.0,
        ap_radius: 50.0,
        ris_radius: 10.0,
        exponents: PathlossExponents { user_ris: 2.0, ris_ap: 2.5, user_ap: 4.0 },
        pathloss_scale: 1e-3,
    }
}

impl ScenarioDefaults {
    /// Places APs evenly on a circle, surfaces evenly on an inner circle
    /// rotated by π/4, and drops users uniformly in the central disk.
    ///
    /// User positions come from an independent stream of `seed`, so the same
    /// seed can also drive [`build_statistics`].
    pub fn topology(&self, seed: u64) -> Topology {
        let c = &self.config;
        let ring = |n: usize, radius: f64, offset: f64| -> Vec<[f64; 3]> {
            (0..n)
                .map(|i| {
                    let a = 2.0 * PI * i as f64 / n as f64 + offset;
                    [radius * a.cos(), radius * a.sin(), 0.0]
                })
                .collect()
        };
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let user_positions = (0..c.k)
            .map(|_| {
                let rad = self.user_radius * rng.random::<f64>().sqrt();
                let a = rng.random::<f64>() * 2.0 * PI;
                [rad * a.cos(), rad * a.sin(), 0.0]
            })
            .collect();
        Topology {
            ap_positions: ring(c.l, self.ap_radius, 0.0),
            ris_positions: ring(c.s, self.ris_radius, PI / 4.0),
            user_positions,
            exponents: self.exponents,
            pathloss_scale: self.pathloss_scale,
        }
    }

    /// Uniform Rician factors for the configured dimensions.
    pub fn rician(&self) -> RicianFactors {
        RicianFactors::uniform(self.config.l, self.config.s, self.config.k, self.delta, self.eps)
    }

    /// Topology and statistics of the scenario drawn from `seed`.
    pub fn statistics(&self, seed: u64) -> Result<ChannelStatistics> {
        build_statistics(&self.topology(seed), &self.rician(), seed)
    }
}

/// Ranges for [`synthetic_statistics`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticRanges {
    /// Path losses are uniform on `[min, max]`.
    pub pathloss: (f64, f64),
    /// Rician factors are uniform on `[min, max]`.
    pub rician: (f64, f64),
}

impl Default for SyntheticRanges {
    fn default() -> Self {
        Self { pathloss: (0.2, 1.0), rician: (0.2, 3.0) }
    }
}

/// Geometry-free statistics with every quantity drawn at random, used for
/// cross-checks where all terms should carry comparable weight.
pub fn synthetic_statistics(l: usize, s: usize, k: usize, ranges: SyntheticRanges, seed: u64) -> Result<ChannelStatistics> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut draw = |rows: usize, cols: usize, (lo, hi): (f64, f64)| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect())
            .collect()
    };
    let alpha = draw(s, k, ranges.pathloss);
    let beta = draw(l, s, ranges.pathloss);
    let gamma = draw(l, k, ranges.pathloss);
    let delta = draw(l, s, ranges.rician);
    let eps = draw(s, k, ranges.rician);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let aoa_ris = draw_angles(&mut rng, s, k);
    let aoa_ap = draw_angles(&mut rng, l, s);
    let aod_ris = draw_angles(&mut rng, l, s);
    ChannelStatistics::from_parts(alpha, beta, gamma, delta, eps, aoa_ris, aoa_ap, aod_ris, false)
}
