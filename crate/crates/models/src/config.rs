use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Widths and depths. The default is the full-size configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDims {
    pub d_model: usize,
    pub d_ff: usize,
    pub encoder_layers: usize,
    pub encoder_heads: usize,
    pub decoder_layers: usize,
    pub decoder_heads: usize,
    pub dropout: f64,
    pub max_len: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d_model: 256,
            d_ff: 1024,
            encoder_layers: 1,
            encoder_heads: 2,
            decoder_layers: 6,
            decoder_heads: 8,
            dropout: 0.1,
            max_len: chordgen_core::tokenizer::MAX_LEN,
        }
    }
}

impl ModelDims {
    /// Same depth and heads at width 64, without dropout.
    pub fn desk() -> Self {
        ModelDims {
            d_model: 64,
            d_ff: 256,
            dropout: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.d_model == 0 || self.d_ff == 0 || self.max_len < 2 {
            return bad("d_model, d_ff must be positive and max_len at least 2".into());
        }
        if self.encoder_layers == 0 || self.decoder_layers == 0 {
            return bad("layer counts must be positive".into());
        }
        for (what, h) in [("encoder", self.encoder_heads), ("decoder", self.decoder_heads)] {
            if h == 0 || self.d_model % h != 0 {
                return bad(format!("d_model {} is not divisible by {h} {what} heads", self.d_model));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: u64,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup: u64,
    pub seed: u64,
    /// Hard cap on the total number of updates.
    pub max_steps: Option<u64>,
    /// Stop as soon as a batch loss falls below this value.
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            batch_size: 8,
            base_lr: 1e-4,
            warmup: 1000,
            seed: 0,
            max_steps: None,
            target_loss: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        if !(self.base_lr.is_finite() && self.base_lr > 0.0) {
            return Err(ModelError::InvalidConfig(format!("base_lr {} must be positive", self.base_lr)));
        }
        if self.max_steps == Some(0) {
            return Err(ModelError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub top_p: f64,
    pub max_tokens: usize,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            top_p: 0.9,
            max_tokens: chordgen_core::tokenizer::MAX_LEN,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ModelError::InvalidConfig(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        if self.max_tokens < 2 {
            return Err(ModelError::InvalidConfig("max_tokens must be at least 2".into()));
        }
        Ok(())
    }
}
