//! Declarative run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dgp::SimulationGrid;
use crate::error::{Error, Result};
use crate::io::data::{fred_large, fred_medium, VariableSpec};
use crate::metrics::ModularityForm;
use crate::model::{NetworkPrior, VarConfig};
use crate::partition::{calibrate, PriorVariant};

/// Where the data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub path: PathBuf,
    /// "medium" or "large" selects a FRED-QD list; ignored when `variables` is set.
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub variables: Vec<VariableSpec>,
    /// Standardise every series to zero mean and unit variance.
    #[serde(default)]
    pub standardize: bool,
}

impl DataSpec {
    pub fn variable_list(&self) -> Result<Vec<VariableSpec>> {
        if !self.variables.is_empty() {
            return Ok(self.variables.clone());
        }
        match self.preset.as_deref() {
            Some("medium") => Ok(fred_medium()),
            Some("large") => Ok(fred_large()),
            Some(other) => Err(Error::Config { path: "data.preset".into(), message: format!("unknown preset `{other}`") }),
            None => Err(Error::Config {
                path: "data".into(),
                message: "either `variables` or `preset` is required".into(),
            }),
        }
    }
}

/// Partition-prior calibration: the variant's free parameter is chosen so
/// that the prior expected number of blocks equals `target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub variant: String,
    pub target: f64,
    /// Number of nodes; defaults to the number of modelled series.
    #[serde(default)]
    pub nodes: Option<usize>,
    /// PY discount or DM cap, when not the defaults.
    #[serde(default)]
    pub discount: Option<f64>,
    #[serde(default)]
    pub cap: Option<usize>,
}

impl CalibrationSpec {
    pub fn prior_variant(&self) -> Result<PriorVariant> {
        let v = PriorVariant::from_name(&self.variant)?;
        Ok(match v {
            PriorVariant::PitmanYor { discount } => PriorVariant::PitmanYor { discount: self.discount.unwrap_or(discount) },
            PriorVariant::DirichletMultinomial { .. } => PriorVariant::DirichletMultinomial { cap: self.cap },
            other => other,
        })
    }
}

/// One model of the forecast comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastModelSpec {
    pub label: String,
    pub network: NetworkPrior,
    /// Partition prior to calibrate for block-model networks.
    #[serde(default)]
    pub variant: Option<String>,
}

/// Recursive out-of-sample evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSpec {
    /// First origin as a row count of the transformed panel, or a date label.
    pub eval_start: Option<String>,
    pub eval_end: Option<String>,
    pub horizons: Vec<usize>,
    pub baseline: String,
    pub models: Vec<ForecastModelSpec>,
    /// Reduced draw counts used at every origin.
    pub n_draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Prior E[H] for calibrated models, as a multiple of nothing: an absolute target.
    pub calibration_target: f64,
    /// Variables scored individually and jointly as FOCUS; defaults to the first three.
    pub focus: Vec<String>,
}

impl Default for ForecastSpec {
    fn default() -> Self {
        Self {
            eval_start: None,
            eval_end: None,
            horizons: vec![1, 4],
            baseline: "BASE".into(),
            models: vec![
                ForecastModelSpec { label: "BASE".into(), network: NetworkPrior::Dense, variant: None },
                ForecastModelSpec { label: "SSVS".into(), network: NetworkPrior::Ssvs { inclusion: 0.5 }, variant: None },
                ForecastModelSpec { label: "SBM-GN".into(), network: NetworkPrior::Sbm, variant: Some("GN".into()) },
            ],
            n_draws: 3000,
            burn_in: 1000,
            thin: 2,
            calibration_target: 3.0,
            focus: Vec::new(),
        }
    }
}

/// Network summary settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSpec {
    pub modularity: ModularityForm,
}

/// Everything a CLI run needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: VarConfig,
    pub data: Option<DataSpec>,
    pub calibration: Option<CalibrationSpec>,
    pub forecast: ForecastSpec,
    pub simulation: SimulationGrid,
    pub metrics: MetricsSpec,
}

fn path_error(e: serde_path_to_error::Error<toml::de::Error>) -> Error {
    let path = e.path().to_string();
    let inner = e.into_inner();
    Error::Config { path, message: inner.message().to_string() }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(path_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config { path: "model".into(), message: e.to_string() })?;
        self.model
            .partition_prior
            .validate()
            .map_err(|e| Error::Config { path: "model.partition_prior".into(), message: e.to_string() })?;
        if let Some(c) = &self.calibration {
            c.prior_variant().map_err(|e| Error::Config { path: "calibration.variant".into(), message: e.to_string() })?;
        }
        let f = &self.forecast;
        if f.horizons.is_empty() || f.horizons.contains(&0) {
            return Err(Error::Config { path: "forecast.horizons".into(), message: "horizons must be positive".into() });
        }
        if f.burn_in >= f.n_draws || f.thin == 0 {
            return Err(Error::Config {
                path: "forecast.n_draws".into(),
                message: "burn_in must be below n_draws and thin positive".into(),
            });
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, so formatting, key order and
    /// spelled-out defaults do not change it.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serialises");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Model settings with the partition prior calibrated when requested.
    pub fn calibrated_model(&self, n_series: usize) -> Result<VarConfig> {
        let mut cfg = self.model.clone();
        if let Some(c) = &self.calibration {
            let m = c.nodes.unwrap_or(n_series);
            cfg.partition_prior = calibrate(c.prior_variant()?, m, c.target)?.spec;
        }
        Ok(cfg)
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml_str(&text)
}
