//! Sweep recipes. Each fills the command's sweep defaults into
//! the config before running, so the embedded config replays the run.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use serde_json::json;

use crate::atomic::{find_magic_detuning, raman_to_rayleigh, rayleigh_spread, MagicDetuning};
use crate::error::Result;
use crate::geometry::{ArrayGeometry, CavityParams};
use crate::montecarlo::{analytic_photon_number, mc_paired_ratio};
use crate::polarization::polarization_decompose;
use crate::spectra::{centered_grid, lorentzian_fit, predicted_modification, sweep_spectrum, LorentzianFit};
use crate::spectra::{DEFAULT_HALF_SPAN_MHZ, DEFAULT_POINTS};
use crate::steadystate::Model;

use super::config::RunConfig;
use super::output::Report;
use super::{CliError, Command};

/// Calibration uncertainty of the thermal spread, used for analytic bands.
pub const SIGMA_BAND_NM: f64 = 14.0;

pub fn execute(command: Command, config: &mut RunConfig) -> std::result::Result<Report, CliError> {
    let report = match command {
        Command::TwoAtomFringe => two_atom_fringe(config)?,
        Command::OffsetSweep => offset_sweep(config)?,
        Command::Scaling => scaling(config)?,
        Command::Polarization => polarization(config)?,
        Command::Spectrum => spectrum(config)?,
        Command::Magic => magic(config)?,
    };
    Ok(report)
}

fn model_at(config: &RunConfig, delta_ca_mhz: f64) -> Result<Model> {
    let cavity = CavityParams { delta_ca_mhz, ..config.cavity };
    Model::new(cavity, config.drive, &config.scheme, config.model)
}

fn with_atoms(config: &RunConfig, n_atoms: usize, spacing_nm: f64) -> ArrayGeometry {
    ArrayGeometry { n_atoms, spacing_nm, ..config.array }
}

fn fill_range(config: &mut RunConfig, start: f64, stop: f64, step: f64) {
    let sweep = &mut config.sweep;
    sweep.start.get_or_insert(start);
    sweep.stop.get_or_insert(stop);
    sweep.step.get_or_insert(step);
}

/// Peak of the emission line: the predicted dressed resonance when the
/// cavity modification is modelled, the configured detuning otherwise.
fn at_peak(model: &Model, geom: &ArrayGeometry, config: &RunConfig) -> Model {
    if model.options.cavity_modification && geom.n_atoms > 0 {
        model.with_delta_pc(predicted_modification(geom, model, &config.mc.mf).0)
    } else {
        model.clone()
    }
}

fn analytic_ratio(geom: &ArrayGeometry, reference: &ArrayGeometry, cav: &CavityParams) -> Result<f64> {
    let drive = crate::geometry::DriveParams { delta_pc_mhz: 0.0, ..Default::default() };
    Ok(analytic_photon_number(geom, cav, &drive)? / analytic_photon_number(reference, cav, &drive)?)
}

fn two_atom_fringe(config: &mut RunConfig) -> Result<Report> {
    let lambda = config.cavity.lambda_nm;
    fill_range(config, 5.0 * lambda, 7.0 * lambda, lambda / 20.0);
    let model = model_at(config, config.cavity.delta_ca_mhz)?;
    let k = config.cavity.wavenumber();
    let single = with_atoms(config, 1, 0.0);
    let mut report = Report::new(&["d_nm", "ratio_mean", "ratio_stderr", "analytic_sigma0", "analytic"]);
    for d in config.sweep_grid() {
        let pair = with_atoms(config, 2, d);
        let ratio = mc_paired_ratio(&pair, &model, &single, &model, &config.mc)?;
        let overlay = (1.0 + (k * d).cos()).powi(2);
        report.push(vec![d, ratio.mean, ratio.stderr, overlay, analytic_ratio(&pair, &single, &config.cavity)?]);
    }
    Ok(report)
}

/// Linear least squares for `a + b cos 2kx + c sin 2kx`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CosineFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rms_residual: f64,
}

impl CosineFit {
    pub fn fit(x: &[f64], y: &[f64], k: f64) -> Option<Self> {
        let basis = |x: f64| Vector3::new(1.0, (2.0 * k * x).cos(), (2.0 * k * x).sin());
        let mut normal = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for (xi, yi) in x.iter().zip(y) {
            let b = basis(*xi);
            normal += b * b.transpose();
            rhs += b * *yi;
        }
        let p = normal.lu().solve(&rhs)?;
        let rss: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - basis(*xi).dot(&p)).powi(2)).sum();
        Some(Self { a: p[0], b: p[1], c: p[2], rms_residual: (rss / x.len() as f64).sqrt() })
    }

    pub fn eval(&self, x: f64, k: f64) -> f64 {
        self.a + self.b * (2.0 * k * x).cos() + self.c * (2.0 * k * x).sin()
    }
}

fn offset_sweep(config: &mut RunConfig) -> Result<Report> {
    let lambda = config.cavity.lambda_nm;
    fill_range(config, 0.0, lambda / 2.0, lambda / 40.0);
    config.sweep.atom_numbers.get_or_insert_with(|| vec![3, 8]);
    config.sweep.spacings_nm.get_or_insert_with(|| vec![4.0 * lambda, 3.5 * lambda]);
    let model = model_at(config, config.cavity.delta_ca_mhz)?;
    let k = config.cavity.wavenumber();
    // n1: one atom on the antinode
    let single = ArrayGeometry { n_atoms: 1, offset_nm: 0.0, ..config.array };
    let grid = config.sweep_grid();
    let mut report = Report::new(&[
        "spacing_nm", "n_atoms", "offset_nm", "ratio_mean", "ratio_stderr", "analytic", "cosine_fit",
    ]);
    let mut fits = Vec::new();
    for &spacing in config.sweep.spacings_nm.as_ref().unwrap() {
        for &n in config.sweep.atom_numbers.as_ref().unwrap() {
            let mut rows = Vec::new();
            for &offset in &grid {
                let geom = ArrayGeometry { n_atoms: n, spacing_nm: spacing, offset_nm: offset, ..config.array };
                let per_atom = 1.0 / n.max(1) as f64;
                let ratio = mc_paired_ratio(&geom, &model, &single, &model, &config.mc)?.scaled(per_atom);
                let analytic = analytic_ratio(&geom, &single, &config.cavity)? * per_atom;
                rows.push([spacing, n as f64, offset, ratio.mean, ratio.stderr, analytic]);
            }
            let values: Vec<f64> = rows.iter().map(|r| r[3]).collect();
            let fit = CosineFit::fit(&grid, &values, k);
            for r in rows {
                let fitted = fit.map_or(f64::NAN, |f| f.eval(r[2], k));
                report.push(vec![r[0], r[1], r[2], r[3], r[4], r[5], fitted]);
            }
            fits.push(json!({ "spacing_nm": spacing, "n_atoms": n, "fit": fit }));
        }
    }
    report.note("cosine_fits", fits);
    Ok(report)
}

fn scaling(config: &mut RunConfig) -> Result<Report> {
    let lambda = config.cavity.lambda_nm;
    config.sweep.atom_numbers.get_or_insert_with(|| (1..=8).collect());
    config.sweep.spacings_nm.get_or_insert_with(|| vec![5.0 * lambda, 5.5 * lambda]);
    config.sweep.delta_ca_mhz.get_or_insert_with(|| vec![-507.0, -38.0]);
    let single = with_atoms(config, 1, 0.0);
    let sigma = config.array.sigma_nm;
    let mut report = Report::new(&[
        "delta_ca_MHz", "spacing_nm", "n_atoms", "ratio_mean", "ratio_stderr", "analytic", "analytic_lo", "analytic_hi",
    ]);
    for &delta_ca in config.sweep.delta_ca_mhz.as_ref().unwrap() {
        let model = model_at(config, delta_ca)?;
        let reference_model = at_peak(&model, &single, config);
        for &spacing in config.sweep.spacings_nm.as_ref().unwrap() {
            for &n in config.sweep.atom_numbers.as_ref().unwrap() {
                let geom = with_atoms(config, n, spacing);
                let peak = at_peak(&model, &geom, config);
                let ratio = mc_paired_ratio(&geom, &peak, &single, &reference_model, &config.mc)?;
                let band = [(sigma - SIGMA_BAND_NM).max(0.0), sigma, sigma + SIGMA_BAND_NM]
                    .map(|s| {
                        let at = |g: &ArrayGeometry| ArrayGeometry { sigma_nm: s, ..*g };
                        analytic_ratio(&at(&geom), &at(&single), &model.cavity)
                    })
                    .into_iter()
                    .collect::<Result<Vec<f64>>>()?;
                let (lo, hi) = band.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
                report.push(vec![delta_ca, spacing, n as f64, ratio.mean, ratio.stderr, band[1], lo, hi]);
            }
        }
    }
    Ok(report)
}

fn polarization(config: &mut RunConfig) -> Result<Report> {
    let lambda = config.cavity.lambda_nm;
    fill_range(config, 0.0, 180.0, 15.0);
    config.sweep.atom_numbers.get_or_insert_with(|| vec![1, 8]);
    config.sweep.spacings_nm.get_or_insert_with(|| vec![5.0 * lambda, 5.5 * lambda]);
    config.sweep.delta_ca_mhz.get_or_insert_with(|| vec![-38.0, -507.0]);
    let thetas = config.sweep_grid();
    let mut report = Report::new(&["delta_ca_MHz", "spacing_nm", "n_atoms", "theta_deg", "T", "T_stderr"]);
    let mut summaries = Vec::new();
    for &delta_ca in config.sweep.delta_ca_mhz.as_ref().unwrap() {
        let model = model_at(config, delta_ca)?;
        for (i, &spacing) in config.sweep.spacings_nm.as_ref().unwrap().iter().enumerate() {
            for &n in config.sweep.atom_numbers.as_ref().unwrap() {
                // spacing is irrelevant for a single atom
                if n == 1 && i > 0 {
                    continue;
                }
                let geom = with_atoms(config, n, spacing);
                let result = polarization_decompose(&geom, &model, &config.mc, &thetas)?;
                for p in &result.transmission {
                    report.push(vec![delta_ca, spacing, n as f64, p.theta_deg, p.t, p.t_stderr]);
                }
                summaries.push(json!({
                    "delta_ca_MHz": delta_ca,
                    "spacing_nm": spacing,
                    "n_atoms": n,
                    "I_z": result.i_z,
                    "I_y": result.i_y,
                    "y_fraction": result.y_fraction,
                }));
            }
        }
    }
    report.note("decompositions", summaries);
    Ok(report)
}

#[derive(Serialize)]
struct SpectrumSummary {
    #[serde(rename = "delta_ca_MHz")]
    delta_ca_mhz: f64,
    spacing_nm: f64,
    n_atoms: usize,
    #[serde(rename = "predicted_shift_MHz")]
    predicted_shift_mhz: f64,
    #[serde(rename = "predicted_broadening_MHz")]
    predicted_broadening_mhz: f64,
    fit: LorentzianFit,
}

fn spectrum(config: &mut RunConfig) -> Result<Report> {
    config.sweep.atom_numbers.get_or_insert_with(|| vec![1, 3, 8]);
    config.sweep.spacings_nm.get_or_insert_with(|| vec![config.array.spacing_nm]);
    config.sweep.delta_ca_mhz.get_or_insert_with(|| vec![-38.0, -507.0]);
    let explicit = [config.sweep.start, config.sweep.stop, config.sweep.step];
    let mut report = Report::new(&["delta_ca_MHz", "spacing_nm", "n_atoms", "delta_pc_MHz", "n_mean", "n_stderr"]);
    let mut fits = Vec::new();
    for &delta_ca in config.sweep.delta_ca_mhz.as_ref().unwrap() {
        let model = model_at(config, delta_ca)?;
        for &spacing in config.sweep.spacings_nm.as_ref().unwrap() {
            for &n in config.sweep.atom_numbers.as_ref().unwrap() {
                let geom = with_atoms(config, n, spacing);
                let (shift, broadening) = predicted_modification(&geom, &model, &config.mc.mf);
                let grid = match explicit {
                    [Some(_), Some(_), Some(_)] => config.sweep_grid(),
                    _ => {
                        let center = if model.options.cavity_modification { shift } else { 0.0 };
                        centered_grid(center, DEFAULT_HALF_SPAN_MHZ, DEFAULT_POINTS)
                    }
                };
                let curve = sweep_spectrum(&grid, &geom, &model, &config.mc)?;
                let fit = lorentzian_fit(&curve)?;
                for p in &curve.points {
                    report.push(vec![delta_ca, spacing, n as f64, p.delta_pc_mhz, p.n.mean, p.n.stderr]);
                }
                fits.push(SpectrumSummary {
                    delta_ca_mhz: delta_ca,
                    spacing_nm: spacing,
                    n_atoms: n,
                    predicted_shift_mhz: shift,
                    predicted_broadening_mhz: broadening,
                    fit,
                });
            }
        }
    }
    report.note("fits", fits);
    Ok(report)
}

fn magic(config: &mut RunConfig) -> Result<Report> {
    fill_range(config, -1000.0, -450.0, 1.0);
    let solution: MagicDetuning =
        find_magic_detuning(&config.scheme, (config.sweep.start.unwrap(), config.sweep.stop.unwrap()))?;
    let mut report = Report::new(&["delta_ca_MHz", "spread", "raman_to_rayleigh"]);
    for delta in config.sweep_grid() {
        // points on a resonance are left out of the table
        if let (Ok(spread), Ok(raman)) = (rayleigh_spread(&config.scheme, delta), raman_to_rayleigh(&config.scheme, delta)) {
            report.push(vec![delta, spread, raman]);
        }
    }
    report.note("magic", solution);
    Ok(report)
}
