//! Steady-state cavity field driven by the atom array.
//!
//! With the excited states adiabatically eliminated, the coherent field is
//!
//! ```text
//! ā = Σᵢ ηᵢ / [(Δ_pc − S) + i(κ + B)],   S = Σᵢ g(xᵢ)² A₀(mᵢ),   B = γ Σᵢ g(xᵢ)² A₀(mᵢ)²
//! ```
//!
//! where `A₀(m)` is the Rayleigh amplitude (`1/Δ_ca` for a two-level atom).
//! Raman light leaves the atoms in distinguishable states, so it is added per
//! atom as an intensity through the same denominator.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atomic::LevelScheme;
use crate::error::Result;
use crate::geometry::{
    drive_rabi, mode_coupling, AtomSample, CavityParams, DriveParams, ScatteringMode, ScatteringTable,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityField {
    /// Coherent z-polarized field amplitude ā.
    pub abar: Complex64,
    /// Coherent photon number `|ā|²`.
    pub n: f64,
    /// Incoherent y-polarized (Raman) photon number.
    pub n_raman: f64,
    /// Atom-induced dispersive shift, MHz.
    pub shift_mhz: f64,
    /// Atom-induced absorptive broadening, MHz.
    pub broadening_mhz: f64,
}

impl CavityField {
    /// Total photon number in both polarization modes.
    pub fn total(&self) -> f64 {
        self.n + self.n_raman
    }
}

/// Modelling choices that are not physical parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOptions {
    #[serde(default)]
    pub mode: ScatteringMode,
    /// Include the atom-induced shift and broadening in the cavity response.
    /// Switching it off gives the bare-cavity limit used by the closed-form
    /// N-scaling laws.
    #[serde(default = "default_true")]
    pub cavity_modification: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { mode: ScatteringMode::Multilevel, cavity_modification: true }
    }
}

impl ModelOptions {
    pub fn two_level() -> Self {
        Self { mode: ScatteringMode::TwoLevel, ..Self::default() }
    }

    pub fn bare_cavity(mut self) -> Self {
        self.cavity_modification = false;
        self
    }
}

/// Everything needed to evaluate the cavity field of a sample, with the
/// per-state scattering amplitudes precomputed.
#[derive(Clone, Debug)]
pub struct Model {
    pub cavity: CavityParams,
    pub drive: DriveParams,
    pub scheme: LevelScheme,
    pub options: ModelOptions,
    table: ScatteringTable,
}

impl Model {
    pub fn new(
        cavity: CavityParams,
        drive: DriveParams,
        scheme: &LevelScheme,
        options: ModelOptions,
    ) -> Result<Self> {
        cavity.validate()?;
        drive.validate()?;
        let table = ScatteringTable::new(scheme, cavity.delta_ca_mhz, options.mode)?;
        let model = Self { cavity, drive, scheme: scheme.clone(), options, table };
        if !model.is_dispersive() {
            log::warn!(
                "|delta_ca| = {} MHz is not large compared to Omega0, g0 and gamma; \
                 the adiabatic elimination is unreliable here",
                cavity.delta_ca_mhz.abs()
            );
        }
        Ok(model)
    }

    /// `|Δ_ca| ≥ 10 · max(Ω0, g0, γ)`.
    pub fn is_dispersive(&self) -> bool {
        let scale = self.drive.omega0_mhz.max(self.cavity.g0_mhz).max(self.scheme.gamma_mhz);
        self.cavity.delta_ca_mhz.abs() >= 10.0 * scale
    }

    pub fn table(&self) -> &ScatteringTable {
        &self.table
    }

    /// Same model with a different probe-cavity detuning.
    pub fn with_delta_pc(&self, delta_pc_mhz: f64) -> Self {
        let mut model = self.clone();
        model.drive.delta_pc_mhz = delta_pc_mhz;
        model
    }

    /// Steady-state field at the model's probe detuning.
    pub fn field(&self, sample: &AtomSample) -> CavityField {
        self.field_at(sample, self.drive.delta_pc_mhz)
    }

    pub fn field_at(&self, sample: &AtomSample, delta_pc_mhz: f64) -> CavityField {
        let sums = self.sums(sample);
        sums.field(delta_pc_mhz, self.cavity.kappa_mhz, self.options.cavity_modification)
    }

    /// Detuning-independent sums over the atoms of one sample.
    pub fn sums(&self, sample: &AtomSample) -> FieldSums {
        let mut sums = FieldSums::default();
        for atom in &sample.atoms {
            let g = mode_coupling(atom.x_nm, &self.cavity);
            let omega = drive_rabi(atom.y_nm, &self.drive, &self.cavity);
            let amps = self.table.amplitudes(atom.m);
            let source = 0.5 * g * omega;
            sums.eta_z += amps[1] * source;
            sums.raman += (amps[0] * source).norm_sqr() + (amps[2] * source).norm_sqr();
            let rayleigh = amps[1].re;
            sums.shift += g * g * rayleigh;
            sums.broadening += self.scheme.gamma_mhz * g * g * rayleigh * rayleigh;
        }
        sums
    }
}

/// Sums over atoms that fix the field for any probe detuning.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldSums {
    /// Σ η_z, MHz.
    pub eta_z: Complex64,
    /// Σ over atoms and Raman channels of |η|², MHz².
    pub raman: f64,
    pub shift: f64,
    pub broadening: f64,
}

impl FieldSums {
    pub fn field(&self, delta_pc_mhz: f64, kappa_mhz: f64, cavity_modification: bool) -> CavityField {
        let denominator = if cavity_modification {
            Complex64::new(delta_pc_mhz - self.shift, kappa_mhz + self.broadening)
        } else {
            Complex64::new(delta_pc_mhz, kappa_mhz)
        };
        let abar = self.eta_z / denominator;
        CavityField {
            abar,
            n: abar.norm_sqr(),
            n_raman: self.raman / denominator.norm_sqr(),
            shift_mhz: self.shift,
            broadening_mhz: self.broadening,
        }
    }
}

/// Steady-state field of one sample (adiabatically eliminated model).
pub fn cavity_field(
    sample: &AtomSample,
    cav: &CavityParams,
    drv: &DriveParams,
    scheme: &LevelScheme,
    options: ModelOptions,
) -> Result<CavityField> {
    Ok(Model::new(*cav, *drv, scheme, options)?.field(sample))
}

/// Steady state of the coupled linear equations for two-level atoms without
/// eliminating the excited state:
///
/// ```text
/// ṡᵢ = (iΔ_pa − γ) sᵢ + i g(xᵢ) a + i Ω(yᵢ)/2
/// ȧ  = (iΔ_pc − κ) a + i Σᵢ g(xᵢ) sᵢ,          Δ_pa = Δ_pc + Δ_ca
/// ```
///
/// The reported shift and broadening are the real part and minus the imaginary
/// part of the exact atomic self-energy `Σᵢ g(xᵢ)² / (Δ_pa + iγ)`.
pub fn exact_linear_response(
    sample: &AtomSample,
    cav: &CavityParams,
    drv: &DriveParams,
    gamma_mhz: f64,
) -> Result<CavityField> {
    cav.validate()?;
    drv.validate()?;
    let atomic = Complex64::new(drv.delta_pc_mhz + cav.delta_ca_mhz, gamma_mhz);
    let mut source = Complex64::new(0.0, 0.0);
    let mut self_energy = Complex64::new(0.0, 0.0);
    for atom in &sample.atoms {
        let g = mode_coupling(atom.x_nm, cav);
        let omega = drive_rabi(atom.y_nm, drv, cav);
        source += 0.5 * g * omega / atomic;
        self_energy += g * g / atomic;
    }
    let abar = source / (Complex64::new(drv.delta_pc_mhz, cav.kappa_mhz) - self_energy);
    Ok(CavityField {
        abar,
        n: abar.norm_sqr(),
        n_raman: 0.0,
        shift_mhz: self_energy.re,
        broadening_mhz: -self_energy.im,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ArrayGeometry, Atom};

    fn antinode_array(n: usize, delta_ca: f64) -> (AtomSample, CavityParams) {
        let cav = CavityParams { delta_ca_mhz: delta_ca, ..CavityParams::default() };
        let geom = ArrayGeometry::new(n, cav.lambda_nm, 0.0, 0.0).unwrap();
        (geom.nominal_sample(0), cav)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn single_atom_far_detuned_limit() {
        let (sample, cav) = antinode_array(1, -1e7);
        let drv = DriveParams::default();
        let s = LevelScheme::rb87_d2();
        let model = Model::new(cav, drv, &s, ModelOptions::two_level()).unwrap();
        let shift = model.field(&sample).shift_mhz;
        let f = model.field_at(&sample, shift);
        let eta0 = 3.1 * 1.0 / (2.0 * cav.delta_ca_mhz);
        assert!(rel(f.n, eta0 * eta0 / 0.53f64.powi(2)) < 1e-9);
    }

    #[test]
    fn half_wavelength_pair_cancels() {
        let cav = CavityParams::default();
        let geom = ArrayGeometry::new(2, cav.lambda_nm / 2.0, 0.0, 0.0).unwrap();
        let s = LevelScheme::rb87_d2();
        for options in [ModelOptions::two_level(), ModelOptions::default()] {
            let f = cavity_field(&geom.nominal_sample(1), &cav, &DriveParams::default(), &s, options).unwrap();
            assert!(f.abar.norm() < 1e-15, "{:?}", f.abar);
        }
    }

    #[test]
    fn shift_and_broadening_at_small_detuning() {
        let (sample, cav) = antinode_array(1, -38.0);
        let s = LevelScheme::rb87_d2();
        let f = cavity_field(&sample, &cav, &DriveParams::default(), &s, ModelOptions::two_level()).unwrap();
        assert!((f.shift_mhz - (-9.61 / 38.0)).abs() < 1e-14);
        assert!((f.shift_mhz + 0.2529).abs() < 5e-5);
        assert!((f.broadening_mhz - 3.0 * 9.61 / 1444.0).abs() < 1e-15);
        assert!((f.broadening_mhz - 0.01996).abs() < 1e-5);
    }

    #[test]
    fn field_invariants() {
        let s = LevelScheme::rb87_d2();
        let cav = CavityParams { delta_ca_mhz: 19.0, ..CavityParams::default() };
        let sample = AtomSample {
            atoms: vec![
                Atom { x_nm: 13.0, y_nm: 40.0, m: -2 },
                Atom { x_nm: 800.0, y_nm: -10.0, m: 1 },
            ],
        };
        let f = cavity_field(&sample, &cav, &DriveParams::default(), &s, ModelOptions::default()).unwrap();
        assert!(f.n >= 0.0 && f.n_raman > 0.0);
        assert_eq!(f.n, f.abar.norm_sqr());
        assert!(f.broadening_mhz >= 0.0);
        assert!(f.shift_mhz > 0.0);
    }

    #[test]
    fn exact_response_nodes_give_no_field() {
        let cav = CavityParams::default();
        let geom = ArrayGeometry::new(4, cav.lambda_nm, cav.lambda_nm / 4.0, 0.0).unwrap();
        let f = exact_linear_response(&geom.nominal_sample(0), &cav, &DriveParams::default(), 3.0).unwrap();
        assert!(f.n < 1e-30);
    }

    #[test]
    fn exact_response_matches_eliminated_model_at_magic() {
        for n in 1..=8 {
            let (sample, cav) = antinode_array(n, -507.0);
            let drv = DriveParams::default();
            let approx = cavity_field(&sample, &cav, &drv, &LevelScheme::two_level(3.0), ModelOptions::two_level())
                .unwrap();
            let exact = exact_linear_response(&sample, &cav, &drv, 3.0).unwrap();
            assert!(rel(approx.n, exact.n) < 0.02, "N={n}");
        }
    }

    #[test]
    fn exact_response_converges_monotonically() {
        let mut previous = f64::INFINITY;
        let mut delta = 100.0;
        while delta <= 6400.0 {
            let (sample, cav) = antinode_array(8, -delta);
            let drv = DriveParams::default();
            let approx = cavity_field(&sample, &cav, &drv, &LevelScheme::two_level(3.0), ModelOptions::two_level())
                .unwrap();
            let exact = exact_linear_response(&sample, &cav, &drv, 3.0).unwrap();
            let err = rel(approx.n, exact.n);
            assert!(err < previous, "delta={delta}: {err} !< {previous}");
            previous = err;
            delta *= 2.0;
        }
    }

    #[test]
    fn peak_is_at_dressed_resonance() {
        let (sample, cav) = antinode_array(1, -38.0);
        let model = Model::new(cav, DriveParams::default(), &LevelScheme::rb87_d2(), ModelOptions::two_level()).unwrap();
        let step = 0.001;
        let (best, _) = (-2000..=2000)
            .map(|i| i as f64 * step)
            .map(|d| (d, model.field_at(&sample, d).n))
            .fold((0.0, f64::MIN), |acc, p| if p.1 > acc.1 { p } else { acc });
        assert!((best - model.field(&sample).shift_mhz).abs() <= step / 2.0 + 1e-12);
    }

    #[test]
    fn linear_in_drive_amplitude() {
        let (sample, cav) = antinode_array(3, -38.0);
        let s = LevelScheme::rb87_d2();
        let at = |omega: f64| {
            let drv = DriveParams { omega0_mhz: omega, delta_pc_mhz: 0.1 };
            cavity_field(&sample, &cav, &drv, &s, ModelOptions::default()).unwrap()
        };
        let (a1, a2, a3) = (at(0.5), at(1.0), at(2.0));
        assert!((a2.abar - a1.abar * 2.0).norm() < 1e-12 * a2.abar.norm());
        assert!((a3.abar - a1.abar * 4.0).norm() < 1e-12 * a3.abar.norm());
        assert!(rel(a3.n, 16.0 * a1.n) < 1e-12);
        assert!(rel(a3.n_raman, 16.0 * a1.n_raman) < 1e-12);
    }

    #[test]
    fn frequency_scale_invariance() {
        let s = LevelScheme::rb87_d2();
        let sample = AtomSample {
            atoms: vec![Atom { x_nm: 50.0, y_nm: 20.0, m: 1 }, Atom { x_nm: 3990.0, y_nm: -5.0, m: -2 }],
        };
        let base_cav = CavityParams { delta_ca_mhz: -60.0, ..CavityParams::default() };
        let base_drv = DriveParams { omega0_mhz: 1.0, delta_pc_mhz: 0.2 };
        let base = cavity_field(&sample, &base_cav, &base_drv, &s, ModelOptions::default()).unwrap();
        let factor = 3.7;
        let cav = CavityParams {
            g0_mhz: base_cav.g0_mhz * factor,
            kappa_mhz: base_cav.kappa_mhz * factor,
            delta_ca_mhz: base_cav.delta_ca_mhz * factor,
            ..base_cav
        };
        let drv = DriveParams { omega0_mhz: factor, delta_pc_mhz: 0.2 * factor };
        let mut scaled_scheme = s.clone();
        scaled_scheme.gamma_mhz *= factor;
        for m in &mut scaled_scheme.manifolds {
            m.offset_mhz *= factor;
        }
        let scaled = cavity_field(&sample, &cav, &drv, &scaled_scheme, ModelOptions::default()).unwrap();
        assert!((scaled.abar - base.abar).norm() < 1e-12 * base.abar.norm());
        assert!(rel(scaled.n_raman, base.n_raman) < 1e-12);
    }

    #[test]
    fn bare_cavity_option_ignores_atomic_terms() {
        let (sample, cav) = antinode_array(8, -38.0);
        let s = LevelScheme::rb87_d2();
        let f = cavity_field(&sample, &cav, &DriveParams::default(), &s, ModelOptions::two_level().bare_cavity())
            .unwrap();
        let eta_sum = 8.0 * 3.1 / (2.0 * -38.0);
        assert!(rel(f.n, eta_sum * eta_sum / 0.53f64.powi(2)) < 1e-12);
        assert!(f.shift_mhz < 0.0);
    }
}
