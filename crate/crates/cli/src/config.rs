//! Flat key=value pipeline configuration with flag and environment
//! overrides. Lines starting with '#' are comments.

use std::fs;
use std::path::Path;

use midigram::model::ModelConfig;
use midigram::remi::EventSet;
use midigram::{Error, Result};

pub const SEED_ENV_VAR: &str = "NGMF_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub event_set: EventSet,
    pub ucw_vocab_size: usize,
    pub n_max: usize,
    pub ngram_min_freq: u64,
    pub max_ngrams: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub steps: u64,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_steps: u64,
    pub weight_decay: f64,
    pub epochs: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            event_set: EventSet::Cp7,
            ucw_vocab_size: 1000,
            n_max: 4,
            ngram_min_freq: 200,
            max_ngrams: 128,
            seed: 42,
            model: ModelConfig::full_scale(),
            steps: 1000,
            batch_size: 8,
            peak_lr: 1e-4,
            warmup_steps: 1000,
            weight_decay: 0.01,
            epochs: 15,
        }
    }
}

impl PipelineConfig {
    pub fn apply_line(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad value {value:?} for {what}"));
        match key {
            "event_set" => {
                self.event_set = match value {
                    "cp4" | "CP4" => EventSet::Cp4,
                    "cp7" | "CP7" => EventSet::Cp7,
                    _ => return Err(bad("event_set")),
                }
            }
            "ucw_vocab_size" => self.ucw_vocab_size = value.parse().map_err(|_| bad(key))?,
            "n_max" => self.n_max = value.parse().map_err(|_| bad(key))?,
            "ngram_min_freq" => self.ngram_min_freq = value.parse().map_err(|_| bad(key))?,
            "max_ngrams" => {
                self.max_ngrams = value.parse().map_err(|_| bad(key))?;
                self.model.max_ngrams = self.max_ngrams;
            }
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "layers_main" => self.model.layers_main = value.parse().map_err(|_| bad(key))?,
            "layers_ngram" => self.model.layers_ngram = value.parse().map_err(|_| bad(key))?,
            "hidden_dim" => self.model.hidden_dim = value.parse().map_err(|_| bad(key))?,
            "heads" => self.model.heads = value.parse().map_err(|_| bad(key))?,
            "ffn_dim" => self.model.ffn_dim = value.parse().map_err(|_| bad(key))?,
            "max_seq_len" => self.model.max_seq_len = value.parse().map_err(|_| bad(key))?,
            "mask_rate" => self.model.mask_rate = value.parse().map_err(|_| bad(key))?,
            "steps" => self.steps = value.parse().map_err(|_| bad(key))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad(key))?,
            "peak_lr" => self.peak_lr = value.parse().map_err(|_| bad(key))?,
            "warmup_steps" => self.warmup_steps = value.parse().map_err(|_| bad(key))?,
            "weight_decay" => self.weight_decay = value.parse().map_err(|_| bad(key))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key))?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Self::default();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))?;
            config.apply_line(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// NGMF_SEED wins over both the file and any flag.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(value) = std::env::var(SEED_ENV_VAR) {
            self.seed = value
                .parse()
                .map_err(|_| Error::Config(format!("bad {SEED_ENV_VAR} value {value:?}")))?;
        }
        Ok(())
    }

    /// Desk-scale model block (2/1 layers, dim 32); tokenization knobs
    /// keep their configured values.
    pub fn desk_model(&mut self) {
        let max_ngrams = self.model.max_ngrams.min(8);
        self.model = ModelConfig::desk();
        self.model.max_ngrams = max_ngrams;
        self.max_ngrams = max_ngrams;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_mirror_the_reference_setup() {
        let config = PipelineConfig::default();
        assert_eq!(config.ucw_vocab_size, 1000);
        assert_eq!(config.n_max, 4);
        assert_eq!(config.ngram_min_freq, 200);
        assert_eq!(config.max_ngrams, 128);
        assert_eq!(config.model.layers_main, 12);
        assert_eq!(config.model.layers_ngram, 6);
        assert_eq!(config.model.hidden_dim, 768);
        assert_eq!(config.model.heads, 12);
        assert_eq!(config.model.max_seq_len, 512);
        assert_eq!(config.model.mask_rate, 0.15);
        assert_eq!(config.warmup_steps, 1000);
        assert_eq!(config.epochs, 15);
    }

    #[test]
    fn file_overrides_and_comments() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# experiment").unwrap();
        writeln!(file, "ucw_vocab_size = 250").unwrap();
        writeln!(file, "event_set=cp4").unwrap();
        writeln!(file, "hidden_dim=64").unwrap();
        let config = PipelineConfig::load(file.path()).unwrap();
        assert_eq!(config.ucw_vocab_size, 250);
        assert_eq!(config.event_set, EventSet::Cp4);
        assert_eq!(config.model.hidden_dim, 64);
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "no_such_key=1").unwrap();
        assert!(matches!(
            PipelineConfig::load(file.path()),
            Err(Error::Config(_))
        ));
    }
}
