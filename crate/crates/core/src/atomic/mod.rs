//! Hyperfine and Zeeman structure of the scatterer.
//!
//! The probe is z (π) polarized. A photon is scattered into the cavity through
//! each excited hyperfine manifold F′; the two-photon amplitude for a ground
//! state `m` and a change `Δm` of the magnetic quantum number is
//!
//! ```text
//! A_Δm(m) = Σ_F′ d(F, m+Δm → F′, −Δm) · d(F, m → F′, 0) / (Δ_ca − δ_F′)
//! ```
//!
//! `Δm = 0` is Rayleigh scattering into the z cavity mode, `Δm = ±1` is Raman
//! scattering into the y mode. Amplitudes are scaled so that far from all
//! hyperfine resonances the Rayleigh amplitude tends to `1/Δ_ca`, the value a
//! two-level atom with the cycling-transition coupling would give.

pub mod angular;
mod magic;

pub use angular::{wigner3j, wigner6j};
pub use magic::{find_magic_detuning, raman_to_rayleigh, rayleigh_spread, MagicDetuning};

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Twice the electronic angular momentum of the ground fine-structure level (5S1/2).
const TWO_J_GROUND: i32 = 1;
/// Twice the electronic angular momentum of the excited level (5P3/2).
const TWO_J_EXCITED: i32 = 3;
/// Twice the nuclear spin of 87Rb.
const TWO_I: i32 = 3;

/// Detunings closer than this to a resonance are treated as singular, in MHz.
pub const POLE_TOLERANCE_MHZ: f64 = 1e-6;

/// One excited hyperfine manifold and its offset from the F′=3 resonance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitedManifold {
    #[serde(rename = "Fprime")]
    pub f_prime: u32,
    #[serde(rename = "offset_MHz")]
    pub offset_mhz: f64,
}

/// Ground hyperfine level, the excited manifolds it couples to, and the
/// excited-state half-linewidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    #[serde(rename = "ground_F")]
    pub ground_f: u32,
    pub manifolds: Vec<ExcitedManifold>,
    #[serde(rename = "gamma_MHz")]
    pub gamma_mhz: f64,
    /// Replace the hyperfine structure by a single two-level transition.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub two_level: bool,
}

/// 87Rb D2 splittings: F′=3↔2 is 266.65 MHz, F′=2↔1 is 156.95 MHz.
const RB87_F2_OFFSET: f64 = -266.65;
const RB87_F1_OFFSET: f64 = -423.6;

impl Default for LevelScheme {
    fn default() -> Self {
        Self::rb87_d2()
    }
}

impl LevelScheme {
    /// F=2 ground manifold of 87Rb driven on the D2 line, γ = 3.0 MHz.
    pub fn rb87_d2() -> Self {
        Self {
            ground_f: 2,
            manifolds: vec![
                ExcitedManifold { f_prime: 3, offset_mhz: 0.0 },
                ExcitedManifold { f_prime: 2, offset_mhz: RB87_F2_OFFSET },
                ExcitedManifold { f_prime: 1, offset_mhz: RB87_F1_OFFSET },
            ],
            gamma_mhz: 3.0,
            two_level: false,
        }
    }

    /// A two-level emitter with a single resonance at zero detuning.
    pub fn two_level(gamma_mhz: f64) -> Self {
        Self {
            ground_f: 2,
            manifolds: vec![ExcitedManifold { f_prime: 3, offset_mhz: 0.0 }],
            gamma_mhz,
            two_level: true,
        }
    }

    /// Builds a scheme after structural checks only. Offsets may be arbitrary,
    /// which allows degenerate schemes; use [`LevelScheme::validate`] for the
    /// full set of physical invariants.
    pub fn new(ground_f: u32, manifolds: Vec<ExcitedManifold>, gamma_mhz: f64) -> Result<Self> {
        let scheme = Self { ground_f, manifolds, gamma_mhz, two_level: false };
        scheme.check_structure()?;
        Ok(scheme)
    }

    fn check_structure(&self) -> Result<()> {
        if !(self.gamma_mhz.is_finite() && self.gamma_mhz > 0.0) {
            return Err(Error::InvalidParameter("gamma_MHz must be positive".into()));
        }
        if self.two_level {
            return Ok(());
        }
        // J=1/2 with I=3/2 only has F=1 and F=2.
        if !(1..=2).contains(&self.ground_f) {
            return Err(Error::InvalidParameter(format!(
                "ground_F = {} is not a hyperfine level of the 5S1/2 state",
                self.ground_f
            )));
        }
        if self.manifolds.is_empty() {
            return Err(Error::InvalidParameter("no excited manifolds".into()));
        }
        for (i, man) in self.manifolds.iter().enumerate() {
            if man.f_prime > 3 {
                return Err(Error::InvalidParameter(format!(
                    "F' = {} is not a hyperfine level of the 5P3/2 state",
                    man.f_prime
                )));
            }
            if !man.offset_mhz.is_finite() {
                return Err(Error::InvalidParameter("non-finite manifold offset".into()));
            }
            if self.manifolds[..i].iter().any(|other| other.f_prime == man.f_prime) {
                return Err(Error::InvalidParameter(format!("F' = {} listed twice", man.f_prime)));
            }
        }
        Ok(())
    }

    /// Full validation: structure plus the ordering of the hyperfine offsets
    /// (top manifold at zero, lower F′ further red).
    pub fn validate(&self) -> Result<()> {
        self.check_structure()?;
        if self.two_level {
            return Ok(());
        }
        let mut sorted = self.manifolds.clone();
        sorted.sort_by(|a, b| b.f_prime.cmp(&a.f_prime));
        if sorted[0].offset_mhz != 0.0 {
            return Err(Error::InvalidParameter(format!(
                "offset of the highest manifold F'={} must be 0",
                sorted[0].f_prime
            )));
        }
        for pair in sorted.windows(2) {
            if pair[1].offset_mhz >= pair[0].offset_mhz {
                return Err(Error::InvalidParameter(format!(
                    "offset of F'={} must lie below that of F'={}",
                    pair[1].f_prime, pair[0].f_prime
                )));
            }
        }
        Ok(())
    }

    /// Zeeman sublevels of the ground manifold, `-F..=F`.
    pub fn m_values(&self) -> impl Iterator<Item = i32> + Clone {
        let f = self.ground_f as i32;
        -f..=f
    }

    /// Resonance positions in MHz (the δ_F′, or zero for a two-level emitter).
    pub fn poles(&self) -> Vec<f64> {
        if self.two_level {
            vec![0.0]
        } else {
            self.manifolds.iter().map(|m| m.offset_mhz).collect()
        }
    }

    /// Far-detuned Rayleigh line strength `Σ_F′ d(F,m→F′,0)²`, averaged over `m`.
    fn rayleigh_strength(&self) -> f64 {
        if self.two_level {
            return 1.0;
        }
        let total: f64 = self
            .m_values()
            .map(|m| {
                self.manifolds
                    .iter()
                    .map(|man| dipole_weight_unchecked(self.ground_f, m, man.f_prime, 0).powi(2))
                    .sum::<f64>()
            })
            .sum();
        total / (2 * self.ground_f + 1) as f64
    }
}

/// Polarization of the photon emitted into the cavity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmitPolarization {
    Z,
    Y,
}

/// Two-photon amplitude of one scattering channel, in MHz⁻¹.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelAmplitude {
    pub value: Complex64,
    pub delta_m: i32,
    pub polarization: EmitPolarization,
    pub m_initial: i32,
}

/// Signed dipole matrix element for |F, m⟩ → |F′, m+q⟩ with polarization `q`
/// on the 87Rb D2 line, Condon-Shortley phases, scaled so that the cycling
/// transition (2, 2) → (3, 3) has weight 1.
///
/// Selection-rule violations give 0. Quantum numbers that do not exist on this
/// line are rejected.
pub fn dipole_weight(f: u32, m: i32, f_prime: u32, q: i32) -> Result<f64> {
    if !(1..=2).contains(&f) {
        return Err(Error::AngularMomentum(format!("ground F = {f} does not exist")));
    }
    if f_prime > 3 {
        return Err(Error::AngularMomentum(format!("excited F' = {f_prime} does not exist")));
    }
    if m.unsigned_abs() > f {
        return Err(Error::AngularMomentum(format!("|m| = {} exceeds F = {f}", m.abs())));
    }
    if !(-1..=1).contains(&q) {
        return Err(Error::AngularMomentum(format!("q = {q} is not a dipole polarization")));
    }
    Ok(dipole_weight_unchecked(f, m, f_prime, q))
}

fn dipole_weight_unchecked(f: u32, m: i32, f_prime: u32, q: i32) -> f64 {
    static CYCLING: OnceLock<f64> = OnceLock::new();
    let cycling = *CYCLING.get_or_init(|| raw_dipole(2, 2, 3, 1).abs());
    raw_dipole(f, m, f_prime, q) / cycling
}

/// ⟨F′ m+q| d_q |F m⟩ in units of the reduced ⟨J′‖d‖J⟩.
fn raw_dipole(f: u32, m: i32, f_prime: u32, q: i32) -> f64 {
    let m_prime = m + q;
    if m_prime.unsigned_abs() > f_prime || m.unsigned_abs() > f {
        return 0.0;
    }
    let (tf, tfp) = (2 * f as i32, 2 * f_prime as i32);
    // Wigner-Eckart in F, then reduction of ⟨F′‖d‖F⟩ to the fine-structure element.
    let three_j = angular::wigner3j_twice(tfp, 2, tf, -2 * m_prime, 2 * q, 2 * m);
    if three_j == 0.0 {
        return 0.0;
    }
    let six_j = angular::wigner6j_twice(TWO_J_EXCITED, tfp, TWO_I, tf, TWO_J_GROUND, 2);
    let phase_we = parity(f_prime as i32 - m_prime);
    let phase_red = parity((TWO_J_EXCITED + TWO_I + tf + 2) / 2);
    phase_we * phase_red * (((tfp + 1) * (tf + 1)) as f64).sqrt() * six_j * three_j
}

fn parity(exponent: i32) -> f64 {
    if exponent.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Rejects detunings within [`POLE_TOLERANCE_MHZ`] of a resonance.
pub fn check_off_pole(scheme: &LevelScheme, delta_ca_mhz: f64) -> Result<()> {
    for pole in scheme.poles() {
        if (delta_ca_mhz - pole).abs() < POLE_TOLERANCE_MHZ {
            return Err(Error::Singularity { detuning_mhz: delta_ca_mhz, pole_mhz: pole });
        }
    }
    Ok(())
}

/// The three scattering channels (Δm = −1, 0, +1) for ground state `m` at
/// cavity-atom detuning `delta_ca_mhz`.
///
/// The y cavity mode is composed as `y = (σ₋ − σ₊)/√2`, so the Raman channels
/// carry a factor `±1/√2`.
pub fn channel_amplitudes(scheme: &LevelScheme, m: i32, delta_ca_mhz: f64) -> Result<[ChannelAmplitude; 3]> {
    if m.unsigned_abs() > scheme.ground_f {
        return Err(Error::InvalidParameter(format!("m = {m} outside the ground manifold")));
    }
    check_off_pole(scheme, delta_ca_mhz)?;
    let channel = |delta_m: i32, value: f64| ChannelAmplitude {
        value: Complex64::new(value, 0.0),
        delta_m,
        polarization: if delta_m == 0 { EmitPolarization::Z } else { EmitPolarization::Y },
        m_initial: m,
    };
    if scheme.two_level {
        return Ok([channel(-1, 0.0), channel(0, 1.0 / delta_ca_mhz), channel(1, 0.0)]);
    }

    let f = scheme.ground_f;
    let norm = scheme.rayleigh_strength();
    let sum_for = |delta_m: i32| -> f64 {
        let m_final = m + delta_m;
        if m_final.unsigned_abs() > f {
            return 0.0;
        }
        scheme
            .manifolds
            .iter()
            .map(|man| {
                let absorb = dipole_weight_unchecked(f, m, man.f_prime, 0);
                let emit = dipole_weight_unchecked(f, m_final, man.f_prime, -delta_m);
                absorb * emit / (delta_ca_mhz - man.offset_mhz)
            })
            .sum::<f64>()
            / norm
    };
    // Δm = +1 is emission of σ₋, Δm = −1 of σ₊.
    let y_weight = std::f64::consts::FRAC_1_SQRT_2;
    Ok([
        channel(-1, -y_weight * sum_for(-1)),
        channel(0, sum_for(0)),
        channel(1, y_weight * sum_for(1)),
    ])
}
