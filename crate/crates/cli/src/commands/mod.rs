pub mod finetune;
pub mod ngrams;
pub mod pretrain;
pub mod stats;
pub mod tokenize;
pub mod train_vocab;

use std::path::Path;

use crate::config::PipelineConfig;
use midigram::Result;

/// Load the config file when given, else defaults; the seed environment
/// override is applied by each command after flag overrides.
pub(crate) fn resolve_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EventSetArg {
    Cp4,
    Cp7,
}

impl From<EventSetArg> for midigram::remi::EventSet {
    fn from(value: EventSetArg) -> Self {
        match value {
            EventSetArg::Cp4 => midigram::remi::EventSet::Cp4,
            EventSetArg::Cp7 => midigram::remi::EventSet::Cp7,
        }
    }
}
