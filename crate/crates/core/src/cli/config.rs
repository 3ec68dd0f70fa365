//! Run configuration: JSON file, previous output files, defaults and overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::atomic::LevelScheme;
use crate::geometry::{ArrayGeometry, CavityParams, DriveParams};
use crate::montecarlo::McConfig;
use crate::steadystate::ModelOptions;

use super::CliError;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "CAVITY_ARRAY_CONFIG";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A length in nm, or a multiple of the cavity wavelength written as
/// `"5.5λ"` or `"5.5lambda"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Length {
    Nm(f64),
    Wavelengths(f64),
}

impl Length {
    pub fn resolve(self, lambda_nm: f64) -> f64 {
        match self {
            Length::Nm(v) => v,
            Length::Wavelengths(v) => v * lambda_nm,
        }
    }
}

impl std::str::FromStr for Length {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let number = s.strip_suffix('λ').or_else(|| s.strip_suffix("lambda"));
        match number {
            Some(n) => n.trim().parse().map(Length::Wavelengths),
            None => s.strip_suffix("nm").unwrap_or(s).trim().parse().map(Length::Nm),
        }
        .map_err(|_| format!("cannot read {s:?} as a length (nm, or a multiple of λ)"))
    }
}

impl<'de> Deserialize<'de> for Length {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(Length::Nm(v)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Command-specific scan ranges. Absent fields take the command's defaults,
/// which are written back before the config is embedded in an output file.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atom_numbers: Option<Vec<usize>>,
    /// Array spacings in nm.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spacings_nm: Option<Vec<f64>>,
    #[serde(rename = "delta_ca_MHz", skip_serializing_if = "Option::is_none")]
    pub delta_ca_mhz: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Not embedded in outputs, so a rerun from an output file may write elsewhere.
    #[serde(default, skip_serializing)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub cavity: CavityParams,
    pub drive: DriveParams,
    pub array: ArrayGeometry,
    pub scheme: LevelScheme,
    pub mc: McConfig,
    pub model: ModelOptions,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    cavity: RawCavity,
    #[serde(default)]
    drive: RawDrive,
    #[serde(default)]
    array: RawArray,
    #[serde(default)]
    scheme: Option<LevelScheme>,
    #[serde(default)]
    mc: RawMc,
    #[serde(default)]
    model: Option<ModelOptions>,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    output: OutputSection,
}

macro_rules! partial {
    ($name:ident { $($field:ident : $ty:ty = $key:literal),* $(,)? }) => {
        #[derive(Default, Deserialize)]
        #[serde(deny_unknown_fields)]
        struct $name {
            $(#[serde(rename = $key, default)] $field: Option<$ty>,)*
        }
    };
}

partial!(RawCavity {
    g0_mhz: f64 = "g0_MHz",
    kappa_mhz: f64 = "kappa_MHz",
    lambda_nm: f64 = "lambda_nm",
    delta_ca_mhz: f64 = "delta_ca_MHz",
});
partial!(RawDrive { omega0_mhz: f64 = "omega0_MHz", delta_pc_mhz: f64 = "delta_pc_MHz" });
partial!(RawArray {
    n_atoms: usize = "n_atoms",
    spacing_nm: Length = "spacing_nm",
    offset_nm: Length = "offset_nm",
    y_offset_nm: Length = "y_offset_nm",
    sigma_nm: f64 = "sigma_nm",
});
partial!(RawMc { n_samples: usize = "n_samples", seed: u64 = "seed", mf: crate::montecarlo::MfDistribution = "mF" });
partial!(RawSweep {
    start: f64 = "start",
    stop: f64 = "stop",
    step: f64 = "step",
    atom_numbers: Vec<usize> = "atom_numbers",
    spacings_nm: Vec<Length> = "spacings_nm",
    delta_ca_mhz: Vec<f64> = "delta_ca_MHz",
});

impl RawConfig {
    fn resolve(self) -> RunConfig {
        let d = RunConfig::default();
        let cavity = CavityParams {
            g0_mhz: self.cavity.g0_mhz.unwrap_or(d.cavity.g0_mhz),
            kappa_mhz: self.cavity.kappa_mhz.unwrap_or(d.cavity.kappa_mhz),
            lambda_nm: self.cavity.lambda_nm.unwrap_or(d.cavity.lambda_nm),
            delta_ca_mhz: self.cavity.delta_ca_mhz.unwrap_or(d.cavity.delta_ca_mhz),
        };
        let lambda = cavity.lambda_nm;
        let length = |l: Option<Length>, default: f64| l.map_or(default, |l| l.resolve(lambda));
        RunConfig {
            cavity,
            drive: DriveParams {
                omega0_mhz: self.drive.omega0_mhz.unwrap_or(d.drive.omega0_mhz),
                delta_pc_mhz: self.drive.delta_pc_mhz.unwrap_or(d.drive.delta_pc_mhz),
            },
            array: ArrayGeometry {
                n_atoms: self.array.n_atoms.unwrap_or(d.array.n_atoms),
                spacing_nm: length(self.array.spacing_nm, 5.0 * lambda),
                offset_nm: length(self.array.offset_nm, d.array.offset_nm),
                y_offset_nm: length(self.array.y_offset_nm, d.array.y_offset_nm),
                sigma_nm: self.array.sigma_nm.unwrap_or(d.array.sigma_nm),
            },
            scheme: self.scheme.unwrap_or(d.scheme),
            mc: McConfig {
                n_samples: self.mc.n_samples.unwrap_or(d.mc.n_samples),
                seed: self.mc.seed.unwrap_or(d.mc.seed),
                mf: self.mc.mf.unwrap_or(d.mc.mf),
            },
            model: self.model.unwrap_or(d.model),
            sweep: SweepSection {
                start: self.sweep.start,
                stop: self.sweep.stop,
                step: self.sweep.step,
                atom_numbers: self.sweep.atom_numbers,
                spacings_nm: self.sweep.spacings_nm.map(|v| v.into_iter().map(|l| l.resolve(lambda)).collect()),
                delta_ca_mhz: self.sweep.delta_ca_mhz,
            },
            output: self.output,
        }
    }
}

impl RunConfig {
    /// Parses a config file, or the `config` object embedded in a previous
    /// JSON output, from JSON text.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("provenance") => {
                map.remove("config").ok_or_else(|| CliError::Config("output file has no config".into()))?
            }
            other => other,
        };
        let raw: RawConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
        let config = raw.resolve();
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file, a JSON output file or a CSV output file whose
    /// first line carries the embedded config.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        match text.lines().next().and_then(|l| l.strip_prefix(super::output::CONFIG_PREFIX)) {
            Some(embedded) => Self::from_json(embedded),
            None => Self::from_json(&text),
        }
    }

    /// Unit and range checks on every section.
    pub fn validate(&self) -> Result<(), CliError> {
        self.cavity.validate()?;
        self.drive.validate()?;
        self.array.validate()?;
        self.scheme.validate()?;
        self.mc.validate(self.scheme.ground_f)?;
        let sweep = &self.sweep;
        if let Some(step) = sweep.step {
            if !(step.is_finite() && step > 0.0) {
                return Err(CliError::Config(format!("sweep.step must be positive, got {step}")));
            }
        }
        if let (Some(start), Some(stop)) = (sweep.start, sweep.stop) {
            if !(start.is_finite() && stop.is_finite() && stop >= start) {
                return Err(CliError::Config(format!("sweep range [{start}, {stop}] is empty")));
            }
        }
        if let Some(numbers) = &sweep.atom_numbers {
            if numbers.is_empty() || numbers.iter().any(|&n| n > crate::geometry::MAX_ATOMS) {
                return Err(CliError::Config("sweep.atom_numbers must be a non-empty list of valid sizes".into()));
            }
        }
        if let Some(spacings) = &sweep.spacings_nm {
            if spacings.is_empty() || spacings.iter().any(|s| !s.is_finite()) {
                return Err(CliError::Config("sweep.spacings_nm must be a non-empty list of lengths".into()));
            }
        }
        if sweep.delta_ca_mhz.as_ref().is_some_and(|v| v.is_empty() || v.iter().any(|d| !d.is_finite())) {
            return Err(CliError::Config("sweep.delta_ca_MHz must be a non-empty list".into()));
        }
        Ok(())
    }

    /// Evenly spaced points from `sweep.start` to `sweep.stop` inclusive.
    pub fn sweep_grid(&self) -> Vec<f64> {
        let (start, stop, step) = (
            self.sweep.start.expect("sweep resolved"),
            self.sweep.stop.expect("sweep resolved"),
            self.sweep.step.expect("sweep resolved"),
        );
        // tolerate rounding in (stop − start)/step
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    }
}
