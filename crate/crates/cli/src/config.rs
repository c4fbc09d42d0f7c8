//! Run configuration: flags override `PHOTONIC_LAB_CONFIG`, which overrides
//! the built-in defaults.

use std::path::{Path, PathBuf};

use photonic_lab::analysis::{NelderMeadOptions, OptimizerConfig, Tolerances};
use photonic_lab::circuit::TimeBinConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_ENV: &str = "PHOTONIC_LAB_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSettings {
    pub fidelity: f64,
    pub probability: f64,
    pub spread: f64,
}

impl Default for ToleranceSettings {
    fn default() -> Self {
        let t = Tolerances::default();
        ToleranceSettings {
            fidelity: t.fidelity,
            probability: t.probability,
            spread: t.spread,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub restarts: usize,
    pub penalties: Vec<f64>,
    pub fidelity_tolerance: f64,
    pub max_evals: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        OptimizerSettings {
            restarts: c.restarts,
            penalties: c.penalties,
            fidelity_tolerance: c.fidelity_tolerance,
            max_evals: c.nelder_mead.max_evals,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Seed for sweeps and optimizer restarts.
    pub seed: u64,
    pub tolerances: ToleranceSettings,
    pub optimizer: OptimizerSettings,
    pub time_bin: TimeBinConfig,
}

impl Config {
    /// Reads `explicit`, else the file named by `PHOTONIC_LAB_CONFIG`, else
    /// returns the defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Config, CliError> {
        let path: Option<PathBuf> = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from),
        };
        match path {
            Some(p) => Self::from_file(&p),
            None => Ok(Config::default()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Config, CliError> {
        let text = crate::error::read(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Config, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| crate::error::line_column(text, s.start))
                .unwrap_or((0, 0));
            CliError::Parse {
                origin: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        config.time_bin.validate()?;
        Ok(config)
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            fidelity: self.tolerances.fidelity,
            probability: self.tolerances.probability,
            spread: self.tolerances.spread,
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            seed: self.seed,
            restarts: self.optimizer.restarts,
            penalties: self.optimizer.penalties.clone(),
            fidelity_tolerance: self.optimizer.fidelity_tolerance,
            nelder_mead: NelderMeadOptions {
                max_evals: self.optimizer.max_evals,
                ..NelderMeadOptions::default()
            },
        }
    }
}
