//! Search for the detuning at which the Rayleigh amplitude is the same for
//! every ground Zeeman state.

use serde::Serialize;

use super::{channel_amplitudes, LevelScheme, POLE_TOLERANCE_MHZ};
use crate::error::{Error, NoSolutionReason, Result};

const SCAN_STEP_MHZ: f64 = 1.0;
const REFINE_TOLERANCE_MHZ: f64 = 0.01;
/// Objective ranges below this over the whole scan count as flat.
const FLAT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MagicDetuning {
    pub detuning_mhz: f64,
    /// Relative spread of the Rayleigh amplitude over `m` at the optimum.
    pub spread: f64,
    /// m-averaged Raman/Rayleigh intensity ratio at the optimum.
    pub raman_ratio: f64,
}

/// `(max − min) / |mean|` of the Δm=0 amplitude over the ground Zeeman states.
pub fn rayleigh_spread(scheme: &LevelScheme, delta_ca_mhz: f64) -> Result<f64> {
    let mut values = Vec::with_capacity(2 * scheme.ground_f as usize + 1);
    for m in scheme.m_values() {
        values.push(channel_amplitudes(scheme, m, delta_ca_mhz)?[1].value.re);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((max - min) / mean.abs())
}

/// Raman (y) over Rayleigh (z) intensity, both summed over a uniform `m` population.
pub fn raman_to_rayleigh(scheme: &LevelScheme, delta_ca_mhz: f64) -> Result<f64> {
    let mut raman = 0.0;
    let mut rayleigh = 0.0;
    for m in scheme.m_values() {
        let [minus, zero, plus] = channel_amplitudes(scheme, m, delta_ca_mhz)?;
        raman += minus.value.norm_sqr() + plus.value.norm_sqr();
        rayleigh += zero.value.norm_sqr();
    }
    Ok(raman / rayleigh)
}

/// Minimizes [`rayleigh_spread`] over `interval` (MHz): a 1 MHz scan locates
/// the bracketing grid cell, golden-section search refines it to 0.01 MHz.
pub fn find_magic_detuning(scheme: &LevelScheme, interval: (f64, f64)) -> Result<MagicDetuning> {
    let (lo, hi) = interval;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidParameter(format!("bad search interval ({lo}, {hi})")));
    }
    if let Some(pole) = scheme
        .poles()
        .into_iter()
        .find(|p| *p >= lo - POLE_TOLERANCE_MHZ && *p <= hi + POLE_TOLERANCE_MHZ)
    {
        return Err(Error::Precondition(format!(
            "search interval ({lo}, {hi}) contains the resonance at {pole} MHz"
        )));
    }

    let steps = ((hi - lo) / SCAN_STEP_MHZ).ceil() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| (lo + i as f64 * SCAN_STEP_MHZ).min(hi))
        .collect();
    let values = grid
        .iter()
        .map(|&d| rayleigh_spread(scheme, d))
        .collect::<Result<Vec<_>>>()?;

    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max - min <= FLAT_TOLERANCE {
        return Err(Error::NoSolution(NoSolutionReason::FlatObjective));
    }
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("grid is never empty");
    if best == 0 || best == grid.len() - 1 {
        return Err(Error::NoSolution(NoSolutionReason::BoundaryMinimum));
    }

    let objective = |d: f64| rayleigh_spread(scheme, d);
    let detuning = golden_section(objective, grid[best - 1], grid[best + 1], REFINE_TOLERANCE_MHZ)?;
    Ok(MagicDetuning {
        detuning_mhz: detuning,
        spread: rayleigh_spread(scheme, detuning)?,
        raman_ratio: raman_to_rayleigh(scheme, detuning)?,
    })
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
fn golden_section<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
