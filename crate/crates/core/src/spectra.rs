//! Probe-detuning sweeps of the cavity emission and Lorentzian line fits.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;
use crate::montecarlo::{gaussian_cos2_mean, mc_photon_number, McConfig, McEstimate, MfDistribution};
use crate::steadystate::Model;

pub const MIN_POINTS: usize = 7;
/// Default sweep: 41 points over ±3 MHz around the predicted dressed resonance.
pub const DEFAULT_POINTS: usize = 41;
pub const DEFAULT_HALF_SPAN_MHZ: f64 = 3.0;

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumPoint {
    pub delta_pc_mhz: f64,
    pub n: McEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumCurve {
    pub points: Vec<SpectrumPoint>,
}

impl SpectrumCurve {
    pub fn new(points: Vec<SpectrumPoint>) -> Result<Self> {
        if points.len() < MIN_POINTS {
            return Err(Error::Precondition(format!(
                "a spectrum needs at least {MIN_POINTS} points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| !(w[1].delta_pc_mhz > w[0].delta_pc_mhz)) {
            return Err(Error::Precondition("detuning grid must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// Builds a noiseless curve from exact values.
    pub fn from_values(detunings: &[f64], values: &[f64]) -> Result<Self> {
        assert_eq!(detunings.len(), values.len());
        Self::new(
            detunings
                .iter()
                .zip(values)
                .map(|(&delta_pc_mhz, &mean)| SpectrumPoint {
                    delta_pc_mhz,
                    n: McEstimate { mean, stderr: 0.0, n_samples: 1 },
                })
                .collect(),
        )
    }

    pub fn detunings(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_pc_mhz).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.n.mean).collect()
    }
}

/// Lorentzian `A / (1 + ((x − x₀)/w)²)` with rms fit residual.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LorentzianFit {
    pub amplitude: f64,
    #[serde(rename = "center_MHz")]
    pub center_mhz: f64,
    #[serde(rename = "hwhm_MHz")]
    pub hwhm_mhz: f64,
    pub residual: f64,
    #[serde(skip)]
    pub iterations: usize,
}

impl LorentzianFit {
    pub fn eval(&self, x: f64) -> f64 {
        lorentzian(&[self.amplitude, self.center_mhz, self.hwhm_mhz], x)
    }
}

fn lorentzian(p: &[f64; 3], x: f64) -> f64 {
    let u = (x - p[1]) / p[2];
    p[0] / (1.0 + u * u)
}

/// Mean atom-induced shift and broadening from the closed-form Gaussian
/// position averages and the configured Zeeman population.
pub fn predicted_modification(geom: &ArrayGeometry, model: &Model, mf: &MfDistribution) -> (f64, f64) {
    let k = model.cavity.wavenumber();
    let g2: f64 = (0..geom.n_atoms)
        .map(|i| {
            let (x0, _) = geom.nominal_position(i);
            model.cavity.g0_mhz.powi(2) * gaussian_cos2_mean(x0, geom.sigma_nm, k)
        })
        .sum();
    let table = model.table();
    let f = table.ground_f();
    let population: Vec<f64> = match mf {
        MfDistribution::Uniform => vec![1.0 / (2 * f + 1) as f64; (2 * f + 1) as usize],
        MfDistribution::Fixed(m) => (-f..=f).map(|k| (k == *m) as u8 as f64).collect(),
        MfDistribution::Weights(w) => w.clone(),
    };
    let (mut dispersion, mut absorption) = (0.0, 0.0);
    for (m, p) in (-f..=f).zip(population) {
        let a = table.rayleigh(m);
        dispersion += p * a;
        absorption += p * a * a;
    }
    (g2 * dispersion, model.scheme.gamma_mhz * g2 * absorption)
}

/// Evenly spaced grid of `points` detunings over `center ± half_span`.
pub fn centered_grid(center_mhz: f64, half_span_mhz: f64, points: usize) -> Vec<f64> {
    let step = 2.0 * half_span_mhz / (points - 1) as f64;
    (0..points).map(|i| center_mhz - half_span_mhz + i as f64 * step).collect()
}

/// Default grid around the predicted dressed resonance.
pub fn default_grid(geom: &ArrayGeometry, model: &Model, mf: &MfDistribution) -> Vec<f64> {
    let center = if model.options.cavity_modification {
        predicted_modification(geom, model, mf).0
    } else {
        0.0
    };
    centered_grid(center, DEFAULT_HALF_SPAN_MHZ, DEFAULT_POINTS)
}

/// Photon number at every grid detuning, each point an independent Monte
/// Carlo estimate sharing the base seed. An empty array gives the bare cavity
/// response `1 / (Δ_pc² + κ²)` to a unit drive.
pub fn sweep_spectrum(grid: &[f64], geom: &ArrayGeometry, model: &Model, mc: &McConfig) -> Result<SpectrumCurve> {
    let kappa = model.cavity.kappa_mhz;
    let center = if geom.n_atoms > 0 && model.options.cavity_modification {
        predicted_modification(geom, model, &mc.mf).0
    } else {
        0.0
    };
    if let (Some(first), Some(last)) = (grid.first(), grid.last()) {
        if *first > center - 3.0 * kappa || *last < center + 3.0 * kappa {
            return Err(Error::Precondition(format!(
                "grid [{first}, {last}] MHz does not cover ±3κ around the expected resonance at {center:.4} MHz"
            )));
        }
    }
    if geom.n_atoms == 0 {
        let values: Vec<f64> = grid.iter().map(|d| 1.0 / (d * d + kappa * kappa)).collect();
        return SpectrumCurve::from_values(grid, &values);
    }
    let points = grid
        .par_iter()
        .map(|&delta_pc_mhz| {
            mc_photon_number(geom, &model.with_delta_pc(delta_pc_mhz), mc)
                .map(|n| SpectrumPoint { delta_pc_mhz, n })
        })
        .collect::<Result<Vec<_>>>()?;
    SpectrumCurve::new(points)
}

/// Initial guess from the peak sample and the half-maximum crossings.
fn initial_guess(x: &[f64], y: &[f64], peak: usize) -> [f64; 3] {
    let amplitude = y[peak];
    let half = 0.5 * amplitude;
    let crossing = |range: Box<dyn Iterator<Item = usize>>, towards: isize| -> Option<f64> {
        for i in range {
            let j = (i as isize + towards) as usize;
            if y[j] <= half {
                // linear interpolation between j (below) and i (above)
                let t = (y[i] - half) / (y[i] - y[j]);
                return Some(x[i] + t * (x[j] - x[i]));
            }
        }
        None
    };
    let left = crossing(Box::new((1..=peak).rev()), -1);
    let right = crossing(Box::new(peak..x.len() - 1), 1);
    let width = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => x[peak] - l,
        (None, Some(r)) => r - x[peak],
        (None, None) => 0.25 * (x[x.len() - 1] - x[0]),
    };
    [amplitude, x[peak], width.max(f64::EPSILON)]
}

/// Least-squares Lorentzian fit by damped Gauss-Newton (Levenberg-Marquardt)
/// with uniform weights.
pub fn lorentzian_fit(curve: &SpectrumCurve) -> Result<LorentzianFit> {
    let x = curve.detunings();
    let y = curve.means();
    let peak = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("curve has points");
    if peak == 0 || peak == y.len() - 1 || !(y[peak] > 0.0) {
        return Err(Error::Precondition("spectrum has no interior maximum".into()));
    }

    let cost = |p: &[f64; 3]| -> f64 { x.iter().zip(&y).map(|(xi, yi)| (yi - lorentzian(p, *xi)).powi(2)).sum() };
    let mut params = initial_guess(&x, &y, peak);
    let mut current = cost(&params);
    let mut lambda = 1e-3;
    let mut last_step = f64::INFINITY;

    for iteration in 1..=MAX_ITERATIONS {
        let mut jtj = Matrix3::<f64>::zeros();
        let mut jtr = Vector3::<f64>::zeros();
        for (xi, yi) in x.iter().zip(&y) {
            let [a, x0, w] = params;
            let u = (xi - x0) / w;
            let d = 1.0 + u * u;
            let f = a / d;
            let grad = Vector3::new(1.0 / d, 2.0 * a * u / (w * d * d), 2.0 * a * u * u / (w * d * d));
            jtj += grad * grad.transpose();
            jtr += grad * (yi - f);
        }

        // retry with stronger damping until the cost does not increase
        loop {
            let mut damped = jtj;
            for i in 0..3 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(f64::MIN_POSITIVE);
            }
            let Some(step) = damped.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    break;
                }
                continue;
            };
            let trial = [params[0] + step[0], params[1] + step[1], params[2] + step[2]];
            let trial_cost = cost(&trial);
            if trial[2] != 0.0 && trial_cost <= current {
                last_step = (0..3)
                    .map(|i| step[i].abs() / params[i].abs().max(f64::MIN_POSITIVE))
                    .fold(0.0, f64::max);
                params = trial;
                current = trial_cost;
                lambda = (lambda * 0.1).max(1e-12);
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no downhill direction left: at the minimum to machine precision
                last_step = 0.0;
                break;
            }
        }

        if last_step < STEP_TOLERANCE {
            let hwhm = params[2].abs();
            let fit = LorentzianFit {
                amplitude: params[0],
                center_mhz: params[1],
                hwhm_mhz: hwhm,
                residual: (current / x.len() as f64).sqrt(),
                iterations: iteration,
            };
            if !(fit.amplitude > 0.0 && fit.hwhm_mhz > 0.0 && fit.residual.is_finite()) {
                return Err(Error::FitFailure { iterations: iteration, last_step, residual: fit.residual });
            }
            return Ok(fit);
        }
    }
    Err(Error::FitFailure {
        iterations: MAX_ITERATIONS,
        last_step,
        residual: (current / x.len() as f64).sqrt(),
    })
}
