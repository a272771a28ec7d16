//! Parameter sweeps and the verification suite.
//!
//! A sweep is described by a [`SweepSpec`], usually read from TOML or JSON.
//! [`run_sweep`] evaluates every grid value under every variant and returns
//! [`ResultRow`]s in grid-then-variant order, and [`write_csv`] and
//! [`write_json`] serialize them. Output is byte-identical for a fixed spec
//! and seed regardless of the thread count.
//!
//! ```toml
//! figure = "rate_vs_R"
//! grid = [16, 36, 64]
//! seed = 1
//! mc_trials = 0
//!
//! [scenario]
//! k = 3
//!
//! [[variants]]
//! design = "optimized_sum"
//!
//! [[variants]]
//! design = "random_phase"
//! hwi = false
//! ```

mod verify;

pub use verify::{verify, CriterionResult, VerifyLevel};

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::ScalingMode;
use crate::channel::{LosStructure, PhaseVector};
use crate::closedform::{ClosedForm, RateBreakdown};
use crate::error::{Error, Result};
use crate::montecarlo::{estimate_terms, rate_from_estimates, McOptions, TermEstimates};
use crate::optimizer::{multistart, AscentOptions, Objective, PhaseProblem};
use crate::scenario::{
    dbm_to_watts, reference_defaults, square_side, ChannelStatistics, HwiProfile, RicianFactors, SystemConfig,
};

/// Overrides of the reference scenario.
///
/// Every field left out keeps the value of
/// [`reference_defaults`](crate::scenario::reference_defaults).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Seed of the user drop and of the LoS angles.
    pub seed: u64,
    /// Number of APs.
    pub l: Option<usize>,
    /// Number of surfaces.
    pub s: Option<usize>,
    /// Number of users.
    pub k: Option<usize>,
    /// Antennas per AP, a perfect square.
    pub b: Option<usize>,
    /// Elements per surface, a perfect square.
    pub r: Option<usize>,
    /// Transmit power in dBm.
    pub p_dbm: Option<f64>,
    /// Noise power in dBm.
    pub sigma2_dbm: Option<f64>,
    /// Surface to AP Rician factor.
    pub delta: Option<f64>,
    /// User to surface Rician factor.
    pub eps: Option<f64>,
    /// Treat all surface-side links as pure LoS.
    pub pure_los: bool,
    /// Transmitter error vector magnitude.
    pub kappa_u: Option<f64>,
    /// Receiver error vector magnitude.
    pub kappa_b: Option<f64>,
    /// Phase quantization bits.
    pub bits: Option<u32>,
    /// Disable surface phase noise.
    pub ideal_phases: bool,
    /// Smoothing constant of the max-min objective.
    pub mu: Option<f64>,
}

/// A fully built scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    /// Large-scale statistics.
    pub stats: ChannelStatistics,
    /// Impairment levels.
    pub hwi: HwiProfile,
    /// Dimensions and powers.
    pub config: SystemConfig,
}

impl ScenarioSpec {
    /// Reads a scenario from a TOML or JSON file, chosen by extension.
    pub fn from_file(path: &Path) -> Result<Self> {
        read_config(path)
    }

    /// Applies the overrides to the reference scenario and draws the statistics.
    pub fn build(&self) -> Result<Scenario> {
        let mut d = reference_defaults();
        let c = &mut d.config;
        c.l = self.l.unwrap_or(c.l);
        c.s = self.s.unwrap_or(c.s);
        c.k = self.k.unwrap_or(c.k);
        c.b = self.b.unwrap_or(c.b);
        c.r = self.r.unwrap_or(c.r);
        c.p = self.p_dbm.map(dbm_to_watts).unwrap_or(c.p);
        c.sigma2 = self.sigma2_dbm.map(dbm_to_watts).unwrap_or(c.sigma2);
        c.mu = self.mu.unwrap_or(c.mu);
        square_side(c.b)?;
        square_side(c.r)?;
        c.validate()?;
        d.delta = self.delta.unwrap_or(d.delta);
        d.eps = self.eps.unwrap_or(d.eps);
        let mut hwi = d.hwi.clone();
        hwi.kappa_u = self.kappa_u.unwrap_or(hwi.kappa_u);
        hwi.kappa_b = self.kappa_b.unwrap_or(hwi.kappa_b);
        hwi.quant_bits = if self.ideal_phases { None } else { self.bits.or(hwi.quant_bits) };
        hwi.validate()?;
        let rician = RicianFactors { pure_los: self.pure_los, ..d.rician() };
        let stats = crate::scenario::build_statistics(&d.topology(self.seed), &rician, self.seed)?;
        Ok(Scenario { stats, hwi, config: d.config })
    }
}

/// Quantity varied along a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Figure {
    /// Expectation terms against the surface size, closed form and simulation.
    #[serde(rename = "terms_vs_R", alias = "terms_vs_r")]
    TermsVsR,
    /// Rates against a common Rician factor `δ = ε`.
    #[serde(rename = "rate_vs_rician")]
    RateVsRician,
    /// Rates against the transmit power in dBm.
    #[serde(rename = "rate_vs_power")]
    RateVsPower,
    /// Rates against the antennas per AP.
    #[serde(rename = "rate_vs_B", alias = "rate_vs_b")]
    RateVsB,
    /// Rates against the elements per surface.
    #[serde(rename = "rate_vs_R", alias = "rate_vs_r")]
    RateVsR,
    /// Rates against a common error vector magnitude `κ_u = κ_b`.
    #[serde(rename = "rate_vs_kappa")]
    RateVsKappa,
    /// Rates against the phase quantization bits.
    #[serde(rename = "rate_vs_bits")]
    RateVsBits,
    /// Rates against the antennas per AP under a power scaling.
    #[serde(rename = "scaling_B", alias = "scaling_b")]
    ScalingB,
    /// Rates against the elements per surface under a power scaling.
    #[serde(rename = "scaling_R", alias = "scaling_r")]
    ScalingR,
}

impl Figure {
    /// Name used in output files and rows.
    pub fn name(&self) -> &'static str {
        match self {
            Self::TermsVsR => "terms_vs_R",
            Self::RateVsRician => "rate_vs_rician",
            Self::RateVsPower => "rate_vs_power",
            Self::RateVsB => "rate_vs_B",
            Self::RateVsR => "rate_vs_R",
            Self::RateVsKappa => "rate_vs_kappa",
            Self::RateVsBits => "rate_vs_bits",
            Self::ScalingB => "scaling_B",
            Self::ScalingR => "scaling_R",
        }
    }

    /// Writes grid value `x` into the scenario overrides.
    pub fn apply(&self, x: f64, spec: &mut ScenarioSpec) -> Result<()> {
        let count = |what: &str| -> Result<usize> {
            if x.fract() != 0.0 || x < 0.0 {
                return Err(Error::Config(format!("{what} grid value {x} is not a nonnegative integer")));
            }
            Ok(x as usize)
        };
        let square = |what: &str| -> Result<usize> {
            let n = count(what)?;
            square_side(n).map_err(|_| Error::Config(format!("{what} grid value {n} is not a perfect square")))?;
            Ok(n)
        };
        match self {
            Self::TermsVsR | Self::RateVsR | Self::ScalingR => spec.r = Some(square("R")?),
            Self::RateVsB | Self::ScalingB => spec.b = Some(square("B")?),
            Self::RateVsRician => {
                spec.delta = Some(x);
                spec.eps = Some(x);
            }
            Self::RateVsPower => spec.p_dbm = Some(x),
            Self::RateVsKappa => {
                spec.kappa_u = Some(x);
                spec.kappa_b = Some(x);
            }
            Self::RateVsBits => {
                spec.bits = Some(count("bits")? as u32);
                spec.ideal_phases = false;
            }
        }
        Ok(())
    }
}

/// How the phase shifts of a variant are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseDesign {
    /// Accelerated ascent on the sum rate.
    OptimizedSum,
    /// Accelerated ascent on the smoothed minimum rate.
    OptimizedMin,
    /// Average over uniformly random phases.
    RandomPhase,
    /// All phases zero.
    ZeroPhase,
    /// No surfaces at all.
    RisFree,
}

impl PhaseDesign {
    fn name(&self) -> &'static str {
        match self {
            Self::OptimizedSum => "optimized_sum",
            Self::OptimizedMin => "optimized_min",
            Self::RandomPhase => "random_phase",
            Self::ZeroPhase => "zero_phase",
            Self::RisFree => "ris_free",
        }
    }
}

fn default_true() -> bool {
    true
}

/// One curve of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    /// Phase design.
    pub design: PhaseDesign,
    /// Keep the scenario's impairments; `false` evaluates ideal hardware.
    #[serde(default = "default_true")]
    pub hwi: bool,
    /// Transmit-power scaling with the array sizes.
    #[serde(default)]
    pub scaling: Option<ScalingMode>,
    /// Label in the output; derived from the other fields when absent.
    #[serde(default)]
    pub name: Option<String>,
}

impl VariantSpec {
    /// Variant with impairments and no power scaling.
    pub fn new(design: PhaseDesign) -> Self {
        Self { design, hwi: true, scaling: None, name: None }
    }

    /// Output label such as `random_phase/ideal/per_r`.
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let mut s = self.design.name().to_string();
        if !self.hwi {
            s.push_str("/ideal");
        }
        if let Some(m) = self.scaling {
            s.push_str(match m {
                ScalingMode::None => "/fixed",
                ScalingMode::PerB => "/per_b",
                ScalingMode::PerR => "/per_r",
                ScalingMode::PerBr => "/per_br",
                ScalingMode::PerR2 => "/per_r2",
            });
        }
        s
    }
}

fn default_starts() -> usize {
    4
}

fn default_draws() -> usize {
    100
}

/// A sweep over one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Parameter that is varied.
    pub figure: Figure,
    /// Values of the parameter.
    pub grid: Vec<f64>,
    /// Curves evaluated at each value.
    pub variants: Vec<VariantSpec>,
    /// Base seed of the optimizer starts, the random phases and the simulation.
    #[serde(default)]
    pub seed: u64,
    /// Monte-Carlo trials per point; 0 evaluates the closed form only.
    #[serde(default)]
    pub mc_trials: u64,
    /// Optimizer starts per point.
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Random phase draws averaged by the random-phase design.
    #[serde(default = "default_draws")]
    pub random_draws: usize,
    /// Scenario overrides shared by all points.
    #[serde(default)]
    pub scenario: ScenarioSpec,
    /// Optimizer parameters.
    #[serde(default)]
    pub optimizer: AscentOptions,
}

impl SweepSpec {
    /// Reads a sweep from a TOML or JSON file, chosen by extension.
    pub fn from_file(path: &Path) -> Result<Self> {
        let spec: Self = read_config(path)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the grid, the variants and every grid value.
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("grid must not be empty".into()));
        }
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        if self.starts == 0 || self.random_draws == 0 {
            return Err(Error::Config("starts and random_draws must be >= 1".into()));
        }
        for &x in &self.grid {
            if !x.is_finite() {
                return Err(Error::Config(format!("grid value {x} is not finite")));
            }
            let mut s = self.scenario.clone();
            self.figure.apply(x, &mut s)?;
        }
        let mut labels: Vec<String> = self.variants.iter().map(VariantSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("variant labels must be distinct".into()));
        }
        Ok(())
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let parsed = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text).map_err(|e| e.to_string()),
        _ => toml::from_str(&text).map_err(|e| e.to_string()),
    };
    parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Origin of a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Closed-form expectation terms.
    ClosedForm,
    /// Monte-Carlo estimates of the same terms.
    MonteCarlo,
}

impl Source {
    fn name(&self) -> &'static str {
        match self {
            Self::ClosedForm => "closed_form",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

/// Result at one grid value for one variant and source.
///
/// The term columns are user averages of the SINR components in watts:
/// `p_k E{S_k}`, `Σ_{i≠k} p_i E{I_ki}`, `E{HWI_k}` and `σ² E{N_k}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    /// Figure name.
    pub figure: String,
    /// Grid value.
    pub sweep_value: f64,
    /// Variant label.
    pub variant: String,
    /// Closed form or simulation.
    pub source: Source,
    /// Rate of every user in bit/s/Hz.
    pub per_user_rates: Vec<f64>,
    /// Sum of `per_user_rates`.
    pub sum_rate: f64,
    /// Smallest entry of `per_user_rates`.
    pub min_rate: f64,
    /// Largest relative 95% half-width over all simulated terms.
    pub mc_half_width: Option<f64>,
    /// Mean desired-signal power.
    pub signal: f64,
    /// Mean interference power.
    pub interference: f64,
    /// Mean distortion power.
    pub hwi: f64,
    /// Mean noise power.
    pub noise: f64,
}

#[derive(Default)]
struct Accumulator {
    rates: Vec<f64>,
    terms: [f64; 4],
    half_width: f64,
    n: usize,
}

impl Accumulator {
    fn push(&mut self, rates: &[f64], terms: [f64; 4], half_width: f64) {
        if self.rates.is_empty() {
            self.rates = vec![0.0; rates.len()];
        }
        for (a, r) in self.rates.iter_mut().zip(rates) {
            *a += r;
        }
        for (a, t) in self.terms.iter_mut().zip(terms) {
            *a += t;
        }
        self.half_width = self.half_width.max(half_width);
        self.n += 1;
    }

    fn row(self, figure: Figure, x: f64, variant: String, source: Source) -> ResultRow {
        let n = self.n as f64;
        let rates: Vec<f64> = self.rates.iter().map(|r| r / n).collect();
        ResultRow {
            figure: figure.name().into(),
            sweep_value: x,
            variant,
            source,
            sum_rate: rates.iter().sum(),
            min_rate: rates.iter().copied().fold(f64::INFINITY, f64::min),
            per_user_rates: rates,
            mc_half_width: (source == Source::MonteCarlo).then_some(self.half_width),
            signal: self.terms[0] / n,
            interference: self.terms[1] / n,
            hwi: self.terms[2] / n,
            noise: self.terms[3] / n,
        }
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n.max(1) as f64
}

fn breakdown_terms(b: &RateBreakdown, powers: &[f64], sigma2: f64) -> [f64; 4] {
    let k = powers.len();
    [
        mean((0..k).map(|i| powers[i] * b.signal[i])),
        mean((0..k).map(|ki| (0..k).filter(|&i| i != ki).map(|i| powers[i] * b.interference[ki][i]).sum())),
        mean(b.hwi.iter().copied()),
        mean(b.noise.iter().map(|n| sigma2 * n)),
    ]
}

fn estimate_summary(e: &TermEstimates, powers: &[f64], sigma2: f64) -> ([f64; 4], f64) {
    let k = powers.len();
    let terms = [
        mean((0..k).map(|i| powers[i] * e.signal[i].mean)),
        mean((0..k).map(|ki| (0..k).filter(|&i| i != ki).map(|i| powers[i] * e.interference[ki][i].mean).sum())),
        mean(e.hwi.iter().map(|x| x.mean)),
        mean(e.noise.iter().map(|x| sigma2 * x.mean)),
    ];
    let rel = |x: &crate::montecarlo::McEstimate| if x.mean > 0.0 { x.half_width / x.mean } else { 0.0 };
    let hw = e
        .signal
        .iter()
        .chain(e.hwi.iter())
        .chain(e.noise.iter())
        .chain(e.interference.iter().flatten().filter(|x| x.trials > 0))
        .map(rel)
        .fold(0.0, f64::max);
    (terms, hw)
}

/// Seed of an independent stream for grid point `g`, variant `v` and purpose `tag`.
fn point_seed(seed: u64, g: usize, v: usize, tag: u64) -> u64 {
    let mut x = seed ^ ((g as u64) << 40) ^ ((v as u64) << 20) ^ tag;
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn run_point(spec: &SweepSpec, g: usize, v: usize) -> Result<Vec<ResultRow>> {
    let x = spec.grid[g];
    let variant = &spec.variants[v];
    let mut sc = spec.scenario.clone();
    spec.figure.apply(x, &mut sc)?;
    let Scenario { mut stats, mut hwi, mut config } = sc.build()?;
    if !variant.hwi {
        hwi = HwiProfile::ideal();
    }
    if variant.design == PhaseDesign::RisFree {
        stats = stats.without_ris();
        config.s = 0;
    }
    if let Some(m) = variant.scaling {
        config.p = m.power(config.p, config.b, config.r);
    }
    let powers = config.powers();
    let n = config.n_phases();
    let thetas: Vec<PhaseVector> = match variant.design {
        PhaseDesign::OptimizedSum | PhaseDesign::OptimizedMin => {
            let objective = if variant.design == PhaseDesign::OptimizedSum {
                Objective::sum_rate()
            } else {
                Objective::smoothed_min(config.mu)?
            };
            let problem = PhaseProblem::new(&stats, &hwi, &config)?;
            let report = multistart(&problem, &objective, &spec.optimizer, spec.starts, point_seed(spec.seed, g, v, 1))?;
            vec![report.best_run().theta_star.clone()]
        }
        PhaseDesign::RandomPhase => {
            let mut rng = ChaCha20Rng::seed_from_u64(point_seed(spec.seed, g, v, 2));
            (0..spec.random_draws).map(|_| PhaseVector::random(n, &mut rng)).collect()
        }
        PhaseDesign::ZeroPhase | PhaseDesign::RisFree => vec![PhaseVector::zeros(n)],
    };
    let los = LosStructure::new(&stats, &config)?;
    let cf = ClosedForm::new(&stats, &los, &hwi, &config)?;
    let mut closed = Accumulator::default();
    let mut sim = Accumulator::default();
    for (t, theta) in thetas.iter().enumerate() {
        let b = cf.breakdown(theta, &hwi, &config, &powers)?;
        closed.push(&b.rate, breakdown_terms(&b, &powers, config.sigma2), 0.0);
        if spec.mc_trials > 0 {
            let seed = point_seed(spec.seed, g, v, 3 + t as u64);
            let est = estimate_terms(theta, &stats, &los, &hwi, &config, &powers, &McOptions::new(spec.mc_trials, seed))?;
            let (terms, hw) = estimate_summary(&est, &powers, config.sigma2);
            sim.push(&rate_from_estimates(&est, &powers, config.sigma2), terms, hw);
        }
    }
    let label = variant.label();
    let mut rows = vec![closed.row(spec.figure, x, label.clone(), Source::ClosedForm)];
    if spec.mc_trials > 0 {
        rows.push(sim.row(spec.figure, x, label, Source::MonteCarlo));
    }
    Ok(rows)
}

/// Evaluates every grid value under every variant.
///
/// Rows are ordered by grid value, then variant, then source.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.grid.len()).flat_map(|g| (0..spec.variants.len()).map(move |v| (g, v))).collect();
    let rows = jobs.par_iter().map(|&(g, v)| run_point(spec, g, v)).collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// CSV column names.
pub const CSV_HEADER: [&str; 12] = [
    "figure",
    "sweep_value",
    "variant",
    "source",
    "sum_rate",
    "min_rate",
    "mc_half_width",
    "rates",
    "signal",
    "interference",
    "hwi",
    "noise",
];

fn fmt(x: f64) -> String {
    format!("{x:.11e}")
}

/// Writes rows as CSV with one header line.
pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        let rates = r.per_user_rates.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(";");
        w.write_record([
            r.figure.clone(),
            fmt(r.sweep_value),
            r.variant.clone(),
            r.source.name().into(),
            fmt(r.sum_rate),
            fmt(r.min_rate),
            r.mc_half_width.map(fmt).unwrap_or_default(),
            rates,
            fmt(r.signal),
            fmt(r.interference),
            fmt(r.hwi),
            fmt(r.noise),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows as a pretty-printed JSON array.
pub fn write_json<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, rows)?;
    Ok(())
}

/// Runs a sweep and writes `<figure>.csv` and `<figure>.json` into `dir`.
///
/// Nothing is written when the sweep fails.
pub fn run_sweep_to_dir(spec: &SweepSpec, dir: &Path) -> Result<Vec<ResultRow>> {
    let rows = run_sweep(spec)?;
    std::fs::create_dir_all(dir)?;
    let name = spec.figure.name();
    write_csv(&rows, std::fs::File::create(dir.join(format!("{name}.csv")))?)?;
    write_json(&rows, std::fs::File::create(dir.join(format!("{name}.json")))?)?;
    Ok(rows)
}
