//! The TOML run configuration.

use std::path::{Path, PathBuf};

use nlsep_core::Units;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::HarnessError;
use crate::experiment::ExperimentSpec;
use crate::harness::RunContext;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsConfig {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
        }
    }
}

impl From<UnitsConfig> for Units {
    fn from(u: UnitsConfig) -> Self {
        Units {
            hbar: u.hbar,
            mass: u.mass,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Quiet,
    #[default]
    Normal,
    Verbose,
}

impl Verbosity {
    pub fn level(self) -> log::LevelFilter {
        match self {
            Verbosity::Quiet => log::LevelFilter::Warn,
            Verbosity::Normal => log::LevelFilter::Info,
            Verbosity::Verbose => log::LevelFilter::Debug,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("reports")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub verbosity: Verbosity,
    #[serde(default)]
    pub units: UnitsConfig,
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<ExperimentSpec>,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
    #[error("experiment `{experiment}`: {source}")]
    Invalid {
        experiment: String,
        #[source]
        source: HarnessError,
    },
    #[error("two experiments write to the output stem `{0}`")]
    DuplicateOutput(String),
}

impl RunConfig {
    pub fn context(&self) -> RunContext {
        RunContext {
            units: self.units.into(),
            seed: self.seed,
        }
    }

    /// Parses without validating the experiments.
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_path_buf(),
            source,
        })
    }

    /// Builds every experiment's grids, kernels and initial state, so that all
    /// errors surface before anything runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let ctx = self.context();
        let mut stems: Vec<&str> = Vec::new();
        for spec in &self.experiments {
            spec.prepare(ctx.units, ctx.seed)
                .map_err(|source| ConfigError::Invalid {
                    experiment: spec.name.clone(),
                    source,
                })?;
            if stems.contains(&spec.stem()) {
                return Err(ConfigError::DuplicateOutput(spec.stem().to_string()));
            }
            stems.push(spec.stem());
        }
        Ok(())
    }

    /// One-experiment configuration that reproduces a report.
    pub fn echo(ctx: &RunContext, spec: &ExperimentSpec) -> String {
        let cfg = RunConfig {
            output_dir: default_output_dir(),
            seed: ctx.seed,
            verbosity: Verbosity::default(),
            units: UnitsConfig {
                hbar: ctx.units.hbar,
                mass: ctx.units.mass,
            },
            experiments: vec![spec.clone()],
        };
        toml::to_string(&cfg).expect("run configurations serialize to TOML")
    }
}

/// Reads and fully validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg = RunConfig::from_toml(&text, path)?;
    cfg.validate()?;
    Ok(cfg)
}
