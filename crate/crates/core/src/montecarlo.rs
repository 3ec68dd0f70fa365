//! Thermal and Zeeman-state sampling, ensemble estimators and the closed-form
//! Gaussian averages used to cross-check them.
//!
//! Every sample index owns its own ChaCha stream derived from `(seed, index)`.
//! Samples are reduced in fixed-size blocks and the blocks are merged in index
//! order, so estimates do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atomic::LevelScheme;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, Atom, AtomSample, CavityParams, DriveParams};
use crate::steadystate::Model;

pub const MIN_SAMPLES: usize = 100;
const BLOCK: usize = 1024;

/// Population of the ground Zeeman states.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MfRepr", into = "MfRepr")]
pub enum MfDistribution {
    #[default]
    Uniform,
    Fixed(i32),
    /// Weights for `m = -F..=F`, normalized on construction.
    Weights(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MfRepr {
    Name(String),
    Fixed(i32),
    Weights(Vec<f64>),
}

impl TryFrom<MfRepr> for MfDistribution {
    type Error = String;

    fn try_from(repr: MfRepr) -> std::result::Result<Self, String> {
        match repr {
            MfRepr::Name(name) if name == "uniform" => Ok(Self::Uniform),
            MfRepr::Name(name) => Err(format!("unknown mF distribution {name:?}")),
            MfRepr::Fixed(m) => Ok(Self::Fixed(m)),
            MfRepr::Weights(w) => Self::weights(w).map_err(|e| e.to_string()),
        }
    }
}

impl From<MfDistribution> for MfRepr {
    fn from(d: MfDistribution) -> Self {
        match d {
            MfDistribution::Uniform => MfRepr::Name("uniform".into()),
            MfDistribution::Fixed(m) => MfRepr::Fixed(m),
            MfDistribution::Weights(w) => MfRepr::Weights(w),
        }
    }
}

impl MfDistribution {
    pub fn weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || total <= 0.0 {
            return Err(Error::InvalidParameter("mF weights must be non-negative with a positive sum".into()));
        }
        Ok(Self::Weights(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn validate(&self, ground_f: u32) -> Result<()> {
        match self {
            Self::Uniform => Ok(()),
            Self::Fixed(m) if m.unsigned_abs() <= ground_f => Ok(()),
            Self::Fixed(m) => Err(Error::InvalidParameter(format!("mF = {m} outside the ground manifold"))),
            Self::Weights(w) if w.len() == (2 * ground_f + 1) as usize => Ok(()),
            Self::Weights(w) => Err(Error::InvalidParameter(format!(
                "{} mF weights given, the ground manifold has {} states",
                w.len(),
                2 * ground_f + 1
            ))),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, ground_f: i32) -> i32 {
        match self {
            Self::Uniform => rng.random_range(-ground_f..=ground_f),
            Self::Fixed(m) => *m,
            Self::Weights(w) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, wi) in w.iter().enumerate() {
                    acc += wi;
                    if u < acc {
                        return i as i32 - ground_f;
                    }
                }
                // u landed in the rounding gap at the top
                w.iter().rposition(|wi| *wi > 0.0).unwrap_or(0) as i32 - ground_f
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    #[serde(rename = "mF", default)]
    pub mf: MfDistribution,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n_samples: 100_000, seed: 0x5eed, mf: MfDistribution::Uniform }
    }
}

impl McConfig {
    pub fn validate(&self, ground_f: u32) -> Result<()> {
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::InvalidParameter(format!("n_samples must be at least {MIN_SAMPLES}")));
        }
        self.mf.validate(ground_f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl McEstimate {
    /// Number of standard errors separating the mean from `value`.
    pub fn z_score(&self, value: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == value {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - value).abs() / self.stderr
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { mean: self.mean * factor, stderr: self.stderr * factor.abs(), n_samples: self.n_samples }
    }
}

/// Welford accumulator with Chan's pairwise merge.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self) -> McEstimate {
        McEstimate {
            mean: self.mean,
            stderr: (self.variance() / self.count as f64).sqrt(),
            n_samples: self.count,
        }
    }
}

/// Bivariate accumulator for ratios of means.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningPair {
    pub a: RunningStats,
    pub b: RunningStats,
    comoment: f64,
}

impl RunningPair {
    pub fn push(&mut self, a: f64, b: f64) {
        let delta_a = a - self.a.mean;
        self.a.push(a);
        self.b.push(b);
        self.comoment += delta_a * (b - self.b.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.a.count == 0 {
            return;
        }
        if self.a.count == 0 {
            *self = *other;
            return;
        }
        let (n1, n2) = (self.a.count as f64, other.a.count as f64);
        let delta_a = other.a.mean - self.a.mean;
        let delta_b = other.b.mean - self.b.mean;
        self.comoment += other.comoment + delta_a * delta_b * n1 * n2 / (n1 + n2);
        self.a.merge(&other.a);
        self.b.merge(&other.b);
    }

    pub fn covariance(&self) -> f64 {
        if self.a.count < 2 {
            0.0
        } else {
            self.comoment / (self.a.count - 1) as f64
        }
    }

    /// `mean(a) / mean(b)` with a delta-method standard error.
    pub fn ratio(&self) -> McEstimate {
        let n = self.a.count as f64;
        let r = self.a.mean / self.b.mean;
        let var = (self.a.variance() - 2.0 * r * self.covariance() + r * r * self.b.variance()).max(0.0)
            / (self.b.mean * self.b.mean * n);
        McEstimate { mean: r, stderr: var.sqrt(), n_samples: self.a.count }
    }
}

/// Counter-based stream for one sample.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws realization number `index`: Gaussian positions about the nominal
/// sites (independent in x and y) and Zeeman states per the configured population.
pub fn sample_atoms(geom: &ArrayGeometry, scheme: &LevelScheme, mc: &McConfig, index: u64) -> AtomSample {
    let mut rng = sample_rng(mc.seed, index);
    let ground_f = scheme.ground_f as i32;
    let atoms = (0..geom.n_atoms)
        .map(|i| {
            let (x0, y0) = geom.nominal_position(i);
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let m = mc.mf.draw(&mut rng, ground_f);
            Atom { x_nm: x0 + geom.sigma_nm * dx, y_nm: y0 + geom.sigma_nm * dy, m }
        })
        .collect();
    AtomSample { atoms }
}

/// Runs `step` on every sample index in parallel blocks and merges the block
/// accumulators in index order.
pub fn reduce_samples<A, I, S, M>(n_samples: usize, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, &A),
{
    let n_blocks = n_samples.div_ceil(BLOCK);
    let blocks: Vec<A> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            let end = ((b + 1) * BLOCK).min(n_samples);
            for index in b * BLOCK..end {
                step(&mut acc, index as u64);
            }
            acc
        })
        .collect();
    let mut total = init();
    for block in &blocks {
        merge(&mut total, block);
    }
    total
}

/// Mean and standard error of any per-sample observable.
pub fn mc_estimate<F>(geom: &ArrayGeometry, scheme: &LevelScheme, mc: &McConfig, observable: F) -> Result<McEstimate>
where
    F: Fn(&AtomSample) -> f64 + Sync,
{
    geom.validate()?;
    mc.validate(scheme.ground_f)?;
    let stats = reduce_samples(
        mc.n_samples,
        RunningStats::default,
        |acc, index| acc.push(observable(&sample_atoms(geom, scheme, mc, index))),
        |acc, other| acc.merge(other),
    );
    Ok(stats.estimate())
}

/// Photon number (coherent z plus incoherent Raman) averaged over samples.
pub fn mc_photon_number(geom: &ArrayGeometry, model: &Model, mc: &McConfig) -> Result<McEstimate> {
    mc_estimate(geom, &model.scheme, mc, |sample| model.field(sample).total())
}

/// Ratio of the mean photon numbers of two configurations evaluated on the
/// same random draws: sample `index` of `reference` reuses the position and
/// Zeeman draws of the leading atoms of `geom`. The pairing cancels most of
/// the shared fluctuation.
pub fn mc_paired_ratio(
    geom: &ArrayGeometry,
    model: &Model,
    reference: &ArrayGeometry,
    reference_model: &Model,
    mc: &McConfig,
) -> Result<McEstimate> {
    geom.validate()?;
    reference.validate()?;
    mc.validate(model.scheme.ground_f)?;
    if reference.n_atoms == 0 {
        return Err(Error::Precondition("the reference configuration has no atoms".into()));
    }
    let pair = reduce_samples(
        mc.n_samples,
        RunningPair::default,
        |acc, index| {
            let sample = sample_atoms(geom, &model.scheme, mc, index);
            let reference_sample = sample_atoms(reference, &reference_model.scheme, mc, index);
            acc.push(model.field(&sample).total(), reference_model.field(&reference_sample).total());
        },
        |acc, other| acc.merge(other),
    );
    Ok(pair.ratio())
}

/// `⟨cos k(x0 + δ)⟩` for Gaussian δ of rms `sigma`.
pub fn gaussian_cos_mean(x0: f64, sigma: f64, k: f64) -> f64 {
    (k * x0).cos() * (-0.5 * (k * sigma).powi(2)).exp()
}

/// `⟨cos² k(x0 + δ)⟩` for Gaussian δ of rms `sigma`.
pub fn gaussian_cos2_mean(x0: f64, sigma: f64, k: f64) -> f64 {
    0.5 * (1.0 + (2.0 * k * x0).cos() * (-2.0 * (k * sigma).powi(2)).exp())
}

/// First and second moments of the two-level amplitude of one atom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtaMoments {
    pub mean: f64,
    pub mean_sq: f64,
}

impl EtaMoments {
    pub fn at(x0: f64, y0: f64, sigma: f64, cav: &CavityParams, drv: &DriveParams) -> Self {
        let k = cav.wavenumber();
        let eta0 = cav.g0_mhz * drv.omega0_mhz / (2.0 * cav.delta_ca_mhz);
        Self {
            mean: eta0 * gaussian_cos_mean(x0, sigma, k) * gaussian_cos_mean(y0, sigma, k),
            mean_sq: eta0 * eta0 * gaussian_cos2_mean(x0, sigma, k) * gaussian_cos2_mean(y0, sigma, k),
        }
    }

    pub fn variance(&self) -> f64 {
        self.mean_sq - self.mean * self.mean
    }
}

/// Debye-Waller factor `|⟨η⟩|² / ⟨|η|²⟩` of an atom centred on a double antinode.
pub fn debye_waller(sigma_nm: f64, k: f64) -> f64 {
    let coherent = (-(k * sigma_nm).powi(2)).exp().powi(2);
    let total = (0.5 * (1.0 + (-2.0 * (k * sigma_nm).powi(2)).exp())).powi(2);
    coherent / total
}

fn antinode_moments(geom: &ArrayGeometry, cav: &CavityParams, drv: &DriveParams, spacing_halves: f64) -> Result<EtaMoments> {
    geom.validate()?;
    if geom.n_atoms == 0 {
        return Err(Error::Precondition("array has no atoms".into()));
    }
    let half = cav.lambda_nm / 2.0;
    let multiple = |v: f64, unit: f64| ((v / unit) - (v / unit).round()).abs() < 1e-9;
    if !multiple(geom.offset_nm, half) || !multiple(geom.y_offset_nm, half) {
        return Err(Error::Precondition("array is not aligned on antinodes".into()));
    }
    let spacing_ok = multiple(geom.spacing_nm - spacing_halves * half, cav.lambda_nm);
    if geom.n_atoms > 1 && !spacing_ok {
        return Err(Error::Precondition(format!(
            "spacing {} nm is not a {} wavelength multiple",
            geom.spacing_nm,
            if spacing_halves == 0.0 { "whole" } else { "half-integer" }
        )));
    }
    if drv.delta_pc_mhz != 0.0 {
        return Err(Error::Precondition("closed forms hold on cavity resonance only".into()));
    }
    let k = cav.wavenumber();
    let eta0 = cav.g0_mhz * drv.omega0_mhz / (2.0 * cav.delta_ca_mhz);
    let cos_mean = gaussian_cos_mean(0.0, geom.sigma_nm, k);
    let cos2_mean = gaussian_cos2_mean(0.0, geom.sigma_nm, k);
    Ok(EtaMoments { mean: eta0 * cos_mean * cos_mean, mean_sq: eta0 * eta0 * cos2_mean * cos2_mean })
}

/// Photon number of an integer-wavelength array on antinodes:
/// `[N (⟨|η|²⟩ − |⟨η⟩|²) + N² |⟨η⟩|²] / κ²`.
pub fn analytic_constructive(geom: &ArrayGeometry, cav: &CavityParams, drv: &DriveParams) -> Result<f64> {
    let moments = antinode_moments(geom, cav, drv, 0.0)?;
    let n = geom.n_atoms as f64;
    Ok((n * moments.variance() + n * n * moments.mean.powi(2)) / cav.kappa_mhz.powi(2))
}

/// Photon number of a half-integer-wavelength array on antinodes:
/// `[N (⟨|η|²⟩ − |⟨η⟩|²) + (1 − (−1)^N)/2 · |⟨η⟩|²] / κ²`.
pub fn analytic_destructive(geom: &ArrayGeometry, cav: &CavityParams, drv: &DriveParams) -> Result<f64> {
    let moments = antinode_moments(geom, cav, drv, 1.0)?;
    let n = geom.n_atoms as f64;
    let odd = (geom.n_atoms % 2) as f64;
    Ok((n * moments.variance() + odd * moments.mean.powi(2)) / cav.kappa_mhz.powi(2))
}

/// Photon number of independent two-level atoms at arbitrary nominal sites,
/// atom-induced cavity modification neglected.
pub fn analytic_photon_number(geom: &ArrayGeometry, cav: &CavityParams, drv: &DriveParams) -> Result<f64> {
    geom.validate()?;
    let mut incoherent = 0.0;
    let mut coherent = 0.0;
    for i in 0..geom.n_atoms {
        let (x0, y0) = geom.nominal_position(i);
        let m = EtaMoments::at(x0, y0, geom.sigma_nm, cav, drv);
        incoherent += m.variance();
        coherent += m.mean;
    }
    Ok((incoherent + coherent * coherent) / (drv.delta_pc_mhz.powi(2) + cav.kappa_mhz.powi(2)))
}
