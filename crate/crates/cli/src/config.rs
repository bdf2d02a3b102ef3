//! TOML run configuration. Every section is optional; missing values take
//! the full-size defaults.

use std::path::Path;

use chordgen_core::stats::DEFAULT_ALPHA;
use chordgen_models::{GenerationConfig, ModelDims, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrepareConfig {
    /// Sets held out for testing.
    pub test_sets: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub alpha: f64,
    pub entropy_base: f64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            alpha: DEFAULT_ALPHA,
            entropy_base: std::f64::consts::E,
        }
    }
}

impl EvaluateConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::InvalidConfig(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.entropy_base > 1.0 && self.entropy_base.is_finite()) {
            return Err(CliError::InvalidConfig(format!(
                "entropy base {} must be greater than 1",
                self.entropy_base
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub prepare: PrepareConfig,
    pub model: ModelDims,
    pub train: TrainConfig,
    pub generate: GenerationConfig,
    pub evaluate: EvaluateConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::InvalidConfig(m) => CliError::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Loads `path` if given, else the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Config::default()), Config::load)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::from_toml("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.train.epochs, 400);
        assert_eq!(c.train.batch_size, 8);
        assert_eq!(c.generate.top_p, 0.9);
        assert_eq!(c.model.decoder_layers, 6);
        assert_eq!(c.evaluate.alpha, 0.008);
    }

    #[test]
    fn sections_override_fields() {
        let c = Config::from_toml(
            "[model]\nd_model = 64\nd_ff = 256\n[train]\nbase_lr = 1e-3\nmax_steps = 50\n[prepare]\ntest_sets = [\"x\"]\n",
        )
        .unwrap();
        assert_eq!(c.model.d_model, 64);
        assert_eq!(c.model.decoder_heads, 8);
        assert_eq!(c.train.max_steps, Some(50));
        assert_eq!(c.prepare.test_sets, vec!["x".to_string()]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(Config::from_toml("[train]\nepoch = 3\n"), Err(CliError::InvalidConfig(_))));
    }
}
