//! Encoder hyperparameters.

use crate::error::{Error, Result};

/// Sizes for the dual-stack encoder. `layers_ngram` counts the gram
/// stack's layers; injection happens after main layers 1..=layers_ngram
/// and is skipped for higher layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layers_main: usize,
    pub layers_ngram: usize,
    pub hidden_dim: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_seq_len: usize,
    /// Maximum gram slots per sequence (M).
    pub max_ngrams: usize,
    pub vocab_size: usize,
    pub ngram_vocab_size: usize,
    pub mask_rate: f64,
    /// Sequence-classification classes; 0 means no head.
    pub seq_classes: usize,
    /// Token-classification classes; 0 means no head.
    pub tok_classes: usize,
}

impl ModelConfig {
    /// Full-scale configuration (12/6 layers, 12 heads, hidden 768,
    /// sequence length 512, 128 gram slots). Accepted everywhere but not
    /// exercised by the desk-scale test suite.
    pub fn full_scale() -> Self {
        Self {
            layers_main: 12,
            layers_ngram: 6,
            hidden_dim: 768,
            heads: 12,
            ffn_dim: 3072,
            max_seq_len: 512,
            max_ngrams: 128,
            vocab_size: 0,
            ngram_vocab_size: 0,
            mask_rate: 0.15,
            seq_classes: 0,
            tok_classes: 0,
        }
    }

    /// Desk-scale defaults: 2/1 layers, hidden 32, 4 heads, length 64,
    /// 8 gram slots. This is the configuration the test suite trains.
    pub fn desk() -> Self {
        Self {
            layers_main: 2,
            layers_ngram: 1,
            hidden_dim: 32,
            heads: 4,
            ffn_dim: 64,
            max_seq_len: 64,
            max_ngrams: 8,
            vocab_size: 0,
            ngram_vocab_size: 0,
            mask_rate: 0.15,
            seq_classes: 0,
            tok_classes: 0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.hidden_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "hidden_dim {} must divide into {} heads",
                self.hidden_dim, self.heads
            )));
        }
        if self.layers_ngram > self.layers_main {
            return Err(Error::Config(format!(
                "layers_ngram {} exceeds layers_main {}",
                self.layers_ngram, self.layers_main
            )));
        }
        if self.layers_main == 0 {
            return Err(Error::Config("layers_main must be positive".into()));
        }
        if self.max_seq_len < 2 {
            return Err(Error::Config("max_seq_len must be at least 2".into()));
        }
        if self.max_ngrams > self.max_seq_len {
            // Gram positions index the shared position table.
            return Err(Error::Config(format!(
                "max_ngrams {} exceeds max_seq_len {}",
                self.max_ngrams, self.max_seq_len
            )));
        }
        if self.vocab_size < super::batch::SPECIAL_TOKENS.len() + 1 {
            return Err(Error::Config(format!(
                "vocab_size {} leaves no room after special tokens",
                self.vocab_size
            )));
        }
        if !(0.0..=1.0).contains(&self.mask_rate) {
            return Err(Error::Config(format!(
                "mask_rate {} outside [0, 1]",
                self.mask_rate
            )));
        }
        if self.ffn_dim == 0 {
            return Err(Error::Config("ffn_dim must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_and_full_shapes_are_valid() {
        for mut config in [ModelConfig::desk(), ModelConfig::full_scale()] {
            config.vocab_size = 100;
            config.ngram_vocab_size = 10;
            config.validate().unwrap();
        }
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        let mut config = ModelConfig::desk();
        config.vocab_size = 100;
        config.heads = 5; // 32 % 5 != 0
        assert!(config.validate().is_err());

        let mut config = ModelConfig::desk();
        config.vocab_size = 100;
        config.layers_ngram = 3;
        assert!(config.validate().is_err());
    }
}
