//! `midigram ngrams`: harvest the gram table from a segmented corpus.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use crate::commands::resolve_config;
use midigram::compound::read_segmented_corpus;
use midigram::ngram::{harvest_ngrams_with_stats, write_ngram_vocab_file};
use midigram::{Error, Result};

#[derive(Debug, Args)]
pub struct NgramsArgs {
    /// Segmented corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// Gram table file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Longest gram length (window lengths 2..=n_max).
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Minimum corpus frequency a gram must reach.
    #[arg(long)]
    pub min_freq: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &NgramsArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve_config(args.config.as_deref())?;
    config.apply_env()?;
    let n_max = args.n_max.unwrap_or(config.n_max);
    let min_freq = args.min_freq.unwrap_or(config.ngram_min_freq);

    let corpus = read_segmented_corpus(&args.input)?;
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::NoSequences);
    }
    let (vocab, stats) = harvest_ngrams_with_stats(&corpus, n_max, min_freq)?;
    write_ngram_vocab_file(&vocab, &args.output)?;
    let _ = writeln!(
        out,
        "## cmd=ngrams n_max={} min_freq={} distinct={} kept={} discarded={}",
        n_max, min_freq, stats.distinct, stats.kept, stats.discarded
    );
    Ok(())
}
