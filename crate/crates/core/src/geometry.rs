//! Array geometry, standing-wave mode functions and the per-atom scattering amplitude.
//!
//! Coordinates: `x` runs along the cavity axis, `y` along the probe axis, and the
//! origin sits on a shared antinode of both standing waves. Lengths are in nm,
//! frequencies in MHz.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::{channel_amplitudes, check_off_pole, LevelScheme};
use crate::error::{Error, Result};

/// Upper bound on the number of atoms in an array.
pub const MAX_ATOMS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Single-atom coupling on the cycling transition.
    #[serde(rename = "g0_MHz")]
    pub g0_mhz: f64,
    /// Cavity field half-linewidth.
    #[serde(rename = "kappa_MHz")]
    pub kappa_mhz: f64,
    #[serde(rename = "lambda_nm")]
    pub lambda_nm: f64,
    /// Cavity minus atomic resonance frequency.
    #[serde(rename = "delta_ca_MHz")]
    pub delta_ca_mhz: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        Self { g0_mhz: 3.1, kappa_mhz: 0.53, lambda_nm: 780.0, delta_ca_mhz: -507.0 }
    }
}

impl CavityParams {
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda_nm
    }

    /// Single-atom cooperativity `g0² / (2 κ γ)`.
    pub fn cooperativity(&self, gamma_mhz: f64) -> f64 {
        self.g0_mhz * self.g0_mhz / (2.0 * self.kappa_mhz * gamma_mhz)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g0_MHz", self.g0_mhz), ("kappa_MHz", self.kappa_mhz), ("lambda_nm", self.lambda_nm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.delta_ca_mhz.is_finite() {
            return Err(Error::InvalidParameter("delta_ca_MHz must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Probe Rabi frequency on an antinode.
    #[serde(rename = "omega0_MHz")]
    pub omega0_mhz: f64,
    /// Probe minus empty-cavity resonance frequency.
    #[serde(rename = "delta_pc_MHz")]
    pub delta_pc_mhz: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self { omega0_mhz: 1.0, delta_pc_mhz: 0.0 }
    }
}

impl DriveParams {
    /// Excited-state population estimate `Ω0² / (4 (Δ_ca² + γ²))`.
    pub fn saturation(&self, delta_ca_mhz: f64, gamma_mhz: f64) -> f64 {
        self.omega0_mhz.powi(2) / (4.0 * (delta_ca_mhz.powi(2) + gamma_mhz.powi(2)))
    }

    pub fn is_low_saturation(&self, delta_ca_mhz: f64, gamma_mhz: f64) -> bool {
        self.saturation(delta_ca_mhz, gamma_mhz) < 0.05
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega0_mhz.is_finite() && self.omega0_mhz >= 0.0) {
            return Err(Error::InvalidParameter("omega0_MHz must be non-negative".into()));
        }
        if !self.delta_pc_mhz.is_finite() {
            return Err(Error::InvalidParameter("delta_pc_MHz must be finite".into()));
        }
        Ok(())
    }
}

/// Regularly spaced one-dimensional array. Atom `i` sits nominally at
/// `(offset + i·spacing, y_offset)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_atoms: usize,
    #[serde(rename = "spacing_nm")]
    pub spacing_nm: f64,
    /// Displacement of atom 0 from a cavity antinode.
    #[serde(rename = "offset_nm")]
    pub offset_nm: f64,
    #[serde(rename = "y_offset_nm", default)]
    pub y_offset_nm: f64,
    /// rms thermal spread per axis.
    #[serde(rename = "sigma_nm")]
    pub sigma_nm: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self { n_atoms: 1, spacing_nm: 5.0 * 780.0, offset_nm: 0.0, y_offset_nm: 0.0, sigma_nm: 100.0 }
    }
}

impl ArrayGeometry {
    pub fn new(n_atoms: usize, spacing_nm: f64, offset_nm: f64, sigma_nm: f64) -> Result<Self> {
        let geom = Self { n_atoms, spacing_nm, offset_nm, y_offset_nm: 0.0, sigma_nm };
        geom.validate()?;
        Ok(geom)
    }

    /// Zero atoms is allowed and describes an empty cavity.
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms > MAX_ATOMS {
            return Err(Error::InvalidParameter(format!(
                "n_atoms = {} exceeds the limit of {MAX_ATOMS}",
                self.n_atoms
            )));
        }
        if !(self.sigma_nm.is_finite() && self.sigma_nm >= 0.0) {
            return Err(Error::InvalidParameter("sigma_nm must be non-negative".into()));
        }
        if !(self.spacing_nm.is_finite() && self.offset_nm.is_finite() && self.y_offset_nm.is_finite()) {
            return Err(Error::InvalidParameter("array positions must be finite".into()));
        }
        Ok(())
    }

    pub fn nominal_position(&self, i: usize) -> (f64, f64) {
        (self.offset_nm + i as f64 * self.spacing_nm, self.y_offset_nm)
    }

    /// The array with every atom at its nominal site in state `m`.
    pub fn nominal_sample(&self, m: i32) -> AtomSample {
        AtomSample {
            atoms: (0..self.n_atoms)
                .map(|i| {
                    let (x_nm, y_nm) = self.nominal_position(i);
                    Atom { x_nm, y_nm, m }
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub x_nm: f64,
    pub y_nm: f64,
    pub m: i32,
}

/// One realization of the array: positions and Zeeman states.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AtomSample {
    pub atoms: Vec<Atom>,
}

impl AtomSample {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Whether the atom is treated as a two-level emitter or with its full hyperfine structure.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatteringMode {
    TwoLevel,
    #[default]
    Multilevel,
}

/// Cavity coupling `g(x) = g0 cos kx`.
pub fn mode_coupling(x_nm: f64, cav: &CavityParams) -> f64 {
    cav.g0_mhz * (cav.wavenumber() * x_nm).cos()
}

/// Probe Rabi frequency `Ω(y) = Ω0 cos ky`.
pub fn drive_rabi(y_nm: f64, drv: &DriveParams, cav: &CavityParams) -> f64 {
    drv.omega0_mhz * (cav.wavenumber() * y_nm).cos()
}

/// Channel amplitudes `A_Δm(m)` (Δm = −1, 0, +1) precomputed for every ground
/// state at a fixed detuning, in MHz⁻¹.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatteringTable {
    ground_f: i32,
    amplitudes: Vec<[Complex64; 3]>,
}

impl ScatteringTable {
    pub fn new(scheme: &LevelScheme, delta_ca_mhz: f64, mode: ScatteringMode) -> Result<Self> {
        let ground_f = scheme.ground_f as i32;
        let amplitudes = match mode {
            ScatteringMode::TwoLevel => {
                check_off_pole(&LevelScheme::two_level(scheme.gamma_mhz), delta_ca_mhz)?;
                let zero = Complex64::new(0.0, 0.0);
                let a = [zero, Complex64::new(1.0 / delta_ca_mhz, 0.0), zero];
                vec![a; (2 * ground_f + 1) as usize]
            }
            ScatteringMode::Multilevel => scheme
                .m_values()
                .map(|m| {
                    channel_amplitudes(scheme, m, delta_ca_mhz)
                        .map(|channels| channels.map(|c| c.value))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        Ok(Self { ground_f, amplitudes })
    }

    pub fn ground_f(&self) -> i32 {
        self.ground_f
    }

    /// Amplitudes for ground state `m`. Panics if `|m| > F`.
    pub fn amplitudes(&self, m: i32) -> &[Complex64; 3] {
        assert!(m.abs() <= self.ground_f, "m = {m} outside the ground manifold");
        &self.amplitudes[(m + self.ground_f) as usize]
    }

    /// Rayleigh amplitude `A_0(m)` as a real number.
    pub fn rayleigh(&self, m: i32) -> f64 {
        self.amplitudes(m)[1].re
    }

    /// Scattering amplitude η of one atom per channel, `g(x) Ω(y) / 2 · A_Δm(m)`, in MHz.
    pub fn eta(&self, atom: &Atom, cav: &CavityParams, drv: &DriveParams) -> [Complex64; 3] {
        let prefactor = 0.5 * mode_coupling(atom.x_nm, cav) * drive_rabi(atom.y_nm, drv, cav);
        self.amplitudes(atom.m).map(|a| a * prefactor)
    }
}

/// Scattering amplitude of a single atom for the three channels (Δm = −1, 0, +1).
///
/// In two-level mode this is `g(x) Ω(y) / (2 Δ_ca)` in the Δm=0 channel only.
pub fn eta(
    atom: &Atom,
    cav: &CavityParams,
    drv: &DriveParams,
    scheme: &LevelScheme,
    mode: ScatteringMode,
) -> Result<[Complex64; 3]> {
    if atom.m.unsigned_abs() > scheme.ground_f {
        return Err(Error::InvalidParameter(format!("m = {} outside the ground manifold", atom.m)));
    }
    Ok(ScatteringTable::new(scheme, cav.delta_ca_mhz, mode)?.eta(atom, cav, drv))
}
