//! Split of the cavity output into the coherent z-polarized Rayleigh field and
//! the incoherent y-polarized Raman light, and polarizer transmission curves.
//!
//! Both polarization modes share κ and the atom-modified denominator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, ScatteringMode};
use crate::montecarlo::{reduce_samples, sample_atoms, McConfig, McEstimate, RunningPair};
use crate::steadystate::Model;

/// Polarizer angles, degrees from the z axis.
pub const DEFAULT_THETAS_DEG: [f64; 13] =
    [0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0, 105.0, 120.0, 135.0, 150.0, 165.0, 180.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransmissionPoint {
    pub theta_deg: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "T_stderr")]
    pub t_stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolarizationResult {
    /// Coherent collective Rayleigh photon number.
    #[serde(rename = "I_z")]
    pub i_z: McEstimate,
    /// Incoherent summed Raman photon number.
    #[serde(rename = "I_y")]
    pub i_y: McEstimate,
    /// `I_y / (I_z + I_y)`.
    pub y_fraction: McEstimate,
    pub transmission: Vec<TransmissionPoint>,
}

impl PolarizationResult {
    pub fn z_share(&self) -> f64 {
        1.0 - self.y_fraction.mean
    }

    /// Relative transmission through a linear polarizer at `theta_deg`.
    pub fn transmission_at(&self, theta_deg: f64) -> TransmissionPoint {
        transmission_point(self.y_fraction, theta_deg)
    }
}

/// `T(θ) = cos²θ − f cos 2θ`; the error comes from f alone.
fn transmission_point(y_fraction: McEstimate, theta_deg: f64) -> TransmissionPoint {
    let theta = theta_deg.to_radians();
    let (c, c2) = (theta.cos(), (2.0 * theta).cos());
    TransmissionPoint {
        theta_deg,
        t: (c * c - y_fraction.mean * c2).clamp(0.0, 1.0),
        t_stderr: c2.abs() * y_fraction.stderr,
    }
}

/// Monte Carlo averages of the z and y photon numbers at the model's probe
/// detuning, with the transmission curve on `thetas_deg`.
///
/// Two-level mode has no Raman channel, so it yields `I_y = 0`.
pub fn polarization_decompose(
    geom: &ArrayGeometry,
    model: &Model,
    mc: &McConfig,
    thetas_deg: &[f64],
) -> Result<PolarizationResult> {
    geom.validate()?;
    mc.validate(model.scheme.ground_f)?;
    if model.options.mode == ScatteringMode::TwoLevel {
        log::info!("two-level scattering has no Raman channel; I_y is identically zero");
    }
    // a = I_y, b = I_z + I_y
    let pair = reduce_samples(
        mc.n_samples,
        RunningPair::default,
        |acc, index| {
            let field = model.field(&sample_atoms(geom, &model.scheme, mc, index));
            acc.push(field.n_raman, field.total());
        },
        |acc, other| acc.merge(other),
    );
    let (i_y, total) = (pair.a.estimate(), pair.b.estimate());
    if !(total.mean > 0.0) {
        return Err(Error::Precondition("the array emits no light into the cavity".into()));
    }
    // I_z per sample is total − I_y; its variance follows from the pair moments.
    let z_variance = (pair.b.variance() - 2.0 * pair.covariance() + pair.a.variance()).max(0.0);
    let i_z = McEstimate {
        mean: (total.mean - i_y.mean).max(0.0),
        stderr: (z_variance / total.n_samples as f64).sqrt(),
        n_samples: total.n_samples,
    };
    let y_fraction = pair.ratio();
    Ok(PolarizationResult {
        i_z,
        i_y,
        y_fraction,
        transmission: thetas_deg.iter().map(|&theta| transmission_point(y_fraction, theta)).collect(),
    })
}
