//! Run settings from flags and TOML files, and the manifest written next to
//! every output.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use twistknot::circuit::ShotConfig;
use twistknot::pipeline::RunConfig;
use twistknot::TwisterSpec;

use crate::error::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ModelKind {
    #[value(name = "2band")]
    #[serde(rename = "2band")]
    TwoBand,
    #[value(name = "4band")]
    #[serde(rename = "4band")]
    FourBand,
    /// Arbitrary twister spec taken from the `[spec]` table of a config file.
    #[value(name = "custom")]
    #[serde(rename = "custom")]
    Custom,
}

/// Model and protocol flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long, global = true, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m0: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub m1: Option<f64>,
    #[arg(long = "k-points", global = true)]
    pub k_points: Option<usize>,
    /// Evolution time of the eigenstate-selecting circuit.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, global = true)]
    pub shots: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Use exact outcome probabilities instead of sampled shots.
    #[arg(long, global = true)]
    pub exact: bool,
    /// TOML file with the same keys as the flags; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file. A manifest is also a valid config.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct FileConfig {
    pub model: Option<ModelKind>,
    pub m0: Option<f64>,
    pub m1: Option<f64>,
    pub k_points: Option<usize>,
    pub t: Option<f64>,
    pub shots: Option<u64>,
    pub seed: Option<u64>,
    pub exact: Option<bool>,
    pub spec: Option<TwisterSpec>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: ModelKind,
    pub m0: Option<f64>,
    pub m1: Option<f64>,
    pub spec: TwisterSpec,
    pub k_points: usize,
    pub t: f64,
    pub shots: u64,
    pub seed: u64,
    pub exact: bool,
}

pub const DEFAULT_K_POINTS: usize = 100;
pub const DEFAULT_SHOTS: u64 = 40_000;
pub const DEFAULT_T: f64 = 20.0;

fn default_params(model: ModelKind) -> (f64, f64) {
    match model {
        ModelKind::FourBand => (-0.5, -0.4),
        _ => (0.5338, 0.6),
    }
}

impl Settings {
    pub fn resolve(args: &ModelArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let model = args.model.or(file.model).unwrap_or(ModelKind::TwoBand);
        let (d0, d1) = default_params(model);
        let (m0, m1, spec) = match model {
            ModelKind::Custom => {
                let spec = file
                    .spec
                    .clone()
                    .ok_or_else(|| CliError::Config("model `custom` needs a [spec] table in the config file".into()))?;
                spec.validate()?;
                (None, None, spec)
            }
            ModelKind::TwoBand | ModelKind::FourBand => {
                let m0 = args.m0.or(file.m0).unwrap_or(d0);
                let m1 = args.m1.or(file.m1).unwrap_or(d1);
                let spec = if model == ModelKind::TwoBand {
                    TwisterSpec::two_band(m0, m1)
                } else {
                    TwisterSpec::four_band(m0, m1)
                };
                spec.validate()?;
                (Some(m0), Some(m1), spec)
            }
        };
        let settings = Settings {
            model,
            m0,
            m1,
            spec,
            k_points: args.k_points.or(file.k_points).unwrap_or(DEFAULT_K_POINTS),
            t: args.t.or(file.t).unwrap_or(DEFAULT_T),
            shots: args.shots.or(file.shots).unwrap_or(DEFAULT_SHOTS),
            seed: args.seed.or(file.seed).unwrap_or(0),
            exact: args.exact || file.exact.unwrap_or(false),
        };
        if settings.k_points < 4 {
            return Err(CliError::Config(format!("--k-points must be at least 4, got {}", settings.k_points)));
        }
        if !(settings.t.is_finite() && settings.t > 0.0) {
            return Err(CliError::Config(format!("--t must be positive, got {}", settings.t)));
        }
        if !settings.exact && settings.shots == 0 {
            return Err(CliError::Config("--shots must be positive in sampled mode".into()));
        }
        Ok(settings)
    }

    pub fn shot_config(&self) -> ShotConfig {
        if self.exact {
            ShotConfig::exact()
        } else {
            ShotConfig::sampled(self.shots, self.seed)
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig::exact(self.spec.clone()).with_t(self.t).with_k_points(self.k_points).with_shots(self.shot_config())
    }

    pub fn concrete(&self) -> Option<(f64, f64)> {
        self.m0.zip(self.m1)
    }
}

/// Everything needed to regenerate a command's outputs. Reading it back with
/// `--config` restores the settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<f64>,
    pub k_points: usize,
    pub t: f64,
    pub shots: u64,
    pub seed: u64,
    pub exact: bool,
    pub outputs: Vec<String>,
    pub spec: TwisterSpec,
}

impl RunManifest {
    pub fn new(command: &str, settings: &Settings) -> Self {
        Self {
            command: command.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            model: settings.model,
            m0: settings.m0,
            m1: settings.m1,
            k_points: settings.k_points,
            t: settings.t,
            shots: settings.shots,
            seed: settings.seed,
            exact: settings.exact,
            outputs: Vec::new(),
            spec: settings.spec.clone(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.toml");
        let text = toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(&path, text).map_err(CliError::io(&path))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_as_config() {
        let args = ModelArgs {
            model: Some(ModelKind::FourBand),
            m0: Some(2.0),
            m1: Some(1.1),
            exact: true,
            ..Default::default()
        };
        let settings = Settings::resolve(&args).unwrap();
        let mut manifest = RunManifest::new("simulate", &settings);
        manifest.outputs.push("summary.toml".into());
        let text = toml::to_string(&manifest).unwrap();
        let file: FileConfig = toml::from_str(&text).unwrap();
        assert_eq!(file.model, Some(ModelKind::FourBand));
        assert_eq!(file.m1, Some(1.1));
        assert_eq!(file.spec.as_ref(), Some(&settings.spec));
        assert_eq!(toml::from_str::<RunManifest>(&text).unwrap(), manifest);
    }

    #[test]
    fn custom_model_needs_spec() {
        let args = ModelArgs { model: Some(ModelKind::Custom), ..Default::default() };
        assert!(matches!(Settings::resolve(&args), Err(CliError::Config(_))));
    }

    #[test]
    fn defaults_follow_model() {
        let s = Settings::resolve(&ModelArgs::default()).unwrap();
        assert_eq!(s.concrete(), Some((0.5338, 0.6)));
        assert_eq!((s.k_points, s.shots, s.t), (100, 40_000, 20.0));
        assert!(!s.exact);
    }
}
