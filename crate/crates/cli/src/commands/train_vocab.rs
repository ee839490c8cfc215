//! `midigram train-vocab`: learn merge rules from an event-text corpus.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use crate::commands::resolve_config;
use midigram::compound::{train_ucw, write_vocab_file};
use midigram::remi::read_text_corpus;
use midigram::{Error, Result};

#[derive(Debug, Args)]
pub struct TrainVocabArgs {
    /// Event-text corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// Vocabulary file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Target vocabulary size (base names + merges).
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn run(args: &TrainVocabArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve_config(args.config.as_deref())?;
    config.apply_env()?;
    let size = args.size.unwrap_or(config.ucw_vocab_size);

    let corpus = read_text_corpus(&args.input)?;
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::NoSequences);
    }
    let outcome = train_ucw(&corpus, size)?;
    write_vocab_file(&outcome.vocab, &args.output)?;

    let tokens_before = outcome.length_trace.first().copied().unwrap_or(0);
    let tokens_after = outcome.length_trace.last().copied().unwrap_or(0);
    let _ = writeln!(
        out,
        "## cmd=train-vocab base={} merges={} target={} tokens_before={} tokens_after={}",
        outcome.vocab.base.len(),
        outcome.vocab.merges.len(),
        size,
        tokens_before,
        tokens_after
    );
    Ok(())
}
