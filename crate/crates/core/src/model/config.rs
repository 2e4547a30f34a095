use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub feature_dim: usize,
    /// Output channels of the four convolutions.
    pub conv_channels: Vec<usize>,
    pub enc_layers: usize,
    /// LSTM units per direction.
    pub enc_units: usize,
    pub att_dim: usize,
    pub att_conv_channels: usize,
    /// Half-width of the location filter: it spans `2·filts + 1` frames.
    pub att_conv_filts: usize,
    pub dec_units: usize,
    pub vocab_size: usize,
    /// Weight λ of the CTC branch in the training loss.
    pub ctc_weight: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 80,
            conv_channels: vec![64, 64, 128, 128],
            enc_layers: 4,
            enc_units: 320,
            att_dim: 320,
            att_conv_channels: 10,
            att_conv_filts: 100,
            dec_units: 300,
            vocab_size: 0,
            ctc_weight: 0.5,
        }
    }
}

/// Encoder frames after two ceil-mode poolings: `ceil(ceil(T/2)/2)`.
pub fn encoder_len(frames: usize) -> usize {
    frames.div_ceil(2).div_ceil(2)
}

impl ModelConfig {
    pub fn with_vocab(mut self, vocab_size: usize) -> Self {
        self.vocab_size = vocab_size;
        self
    }

    /// Tiny network used for gradient checks.
    pub fn micro(vocab_size: usize) -> Self {
        Self {
            feature_dim: 80,
            conv_channels: vec![2, 2, 2, 2],
            enc_layers: 1,
            enc_units: 4,
            att_dim: 4,
            att_conv_channels: 2,
            att_conv_filts: 2,
            dec_units: 4,
            vocab_size,
            ctc_weight: 0.5,
        }
    }

    /// Small network that trains in seconds on a CPU.
    pub fn toy(vocab_size: usize) -> Self {
        Self {
            feature_dim: 80,
            conv_channels: vec![4, 4, 8, 8],
            enc_layers: 1,
            enc_units: 32,
            att_dim: 32,
            att_conv_channels: 4,
            att_conv_filts: 10,
            dec_units: 32,
            vocab_size,
            ctc_weight: 0.5,
        }
    }

    pub fn encoder_dim(&self) -> usize {
        2 * self.enc_units
    }

    /// Width of the sequence entering the first BiLSTM.
    pub fn conv_output_dim(&self) -> usize {
        self.conv_channels[3] * encoder_len(self.feature_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ctc_weight) {
            return Err(Error::Config(format!("ctc_weight must be in [0, 1], got {}", self.ctc_weight)));
        }
        if self.conv_channels.len() != 4 {
            return Err(Error::Config("conv_channels needs exactly four entries".into()));
        }
        let sizes = [
            self.feature_dim,
            self.enc_layers,
            self.enc_units,
            self.att_dim,
            self.att_conv_channels,
            self.dec_units,
        ];
        if sizes.iter().chain(&self.conv_channels).any(|&s| s == 0) {
            return Err(Error::Config("all model sizes must be >= 1".into()));
        }
        if self.vocab_size < 5 {
            return Err(Error::Config(format!(
                "vocab_size {} is too small (the five special tokens alone need 5)",
                self.vocab_size
            )));
        }
        Ok(())
    }
}
