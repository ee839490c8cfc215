//! Command-line pipeline. Exit codes: 0 success, 1 data error,
//! 2 configuration error. Machine-readable output lines start with "##"
//! and hold whitespace-separated key=value pairs.

pub mod commands;
pub mod config;
pub mod dataset;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

use commands::{finetune, ngrams, pretrain, stats, tokenize, train_vocab};

#[derive(Parser)]
#[command(
    name = "midigram",
    version,
    about = "Symbolic-music tokenization and n-gram-injected encoder pipeline"
)]
enum Cli {
    /// Convert MIDI files or event-text corpora into a segmented corpus.
    Tokenize(tokenize::TokenizeArgs),
    /// Learn a merge vocabulary from an event-text corpus.
    TrainVocab(train_vocab::TrainVocabArgs),
    /// Harvest an n-gram vocabulary from a segmented corpus.
    Ngrams(ngrams::NgramsArgs),
    /// Pretrain the encoder with masked-language modeling.
    Pretrain(pretrain::PretrainArgs),
    /// Fine-tune a pretrained checkpoint on a labeled dataset.
    Finetune(finetune::FinetuneArgs),
    /// Report corpus length statistics across vocabulary sizes.
    Stats(stats::StatsArgs),
}

/// Run the CLI against explicit arguments, writing human and machine
/// output to `out`. Returns the process exit code.
pub fn run_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own message (including --help/--version).
            let _ = write!(out, "{err}");
            return if err.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli {
        Cli::Tokenize(args) => tokenize::run(&args, out),
        Cli::TrainVocab(args) => train_vocab::run(&args, out),
        Cli::Ngrams(args) => ngrams::run(&args, out),
        Cli::Pretrain(args) => pretrain::run(&args, out),
        Cli::Finetune(args) => finetune::run(&args, out),
        Cli::Stats(args) => stats::run(&args, out),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            let _ = writeln!(out, "error: {err}");
            if err.is_config() {
                2
            } else {
                1
            }
        }
    }
}

/// Entry point for the binary: real process args, stdout.
pub fn run() -> i32 {
    let mut stdout = std::io::stdout().lock();
    run_with_args(std::env::args_os(), &mut stdout)
}
