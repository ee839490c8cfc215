//! `midigram tokenize`: MIDI files or event-text corpora in, segmented
//! corpus out (or the intermediate event text with `--emit remi`).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;

use crate::commands::{resolve_config, EventSetArg};
use midigram::compound::{
    read_vocab_file, segment, write_segmented_corpus_string, UnknownTokenPolicy,
};
use midigram::remi::{
    detect_chords, encode_remi, parse_midi, read_text_corpus, EventKind, EventSet, QuantGrid,
    RemiSequence,
};
use midigram::{Error, Result};

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    /// Input file or directory (.mid/.midi/.txt).
    #[arg(long)]
    pub input: PathBuf,
    /// Output corpus path.
    #[arg(long)]
    pub output: PathBuf,
    /// Merge vocabulary file (required unless --emit remi).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// What to write: the segmented corpus or the raw event text.
    #[arg(long, value_enum, default_value_t = Emit::Ucw)]
    pub emit: Emit,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub event_set: Option<EventSetArg>,
    /// How to treat event names outside the vocabulary base.
    #[arg(long, value_enum, default_value_t = UnknownArg::Pass)]
    pub unknown: UnknownArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Emit {
    Remi,
    Ucw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum UnknownArg {
    Error,
    Pass,
}

/// Parse one MIDI file into a REMI sequence.
pub fn midi_to_remi(bytes: &[u8], set: EventSet, source_id: &str) -> Result<RemiSequence> {
    let parsed = parse_midi(bytes)?;
    let grid = QuantGrid::with_ticks_per_beat(parsed.ticks_per_beat as u32);
    let chords = if set.includes(EventKind::Chord) {
        detect_chords(&parsed.notes, &grid)
    } else {
        Vec::new()
    };
    let mut seq = encode_remi(&parsed.notes, &parsed.tempo_changes, &chords, &grid, set)?;
    seq.source_id = source_id.to_string();
    Ok(seq)
}

fn gather_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(input)?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("mid") | Some("midi") | Some("txt")
                )
            })
            .collect();
        files.sort();
        Ok(files)
    } else {
        Ok(vec![input.to_path_buf()])
    }
}

pub fn run(args: &TokenizeArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve_config(args.config.as_deref())?;
    if let Some(set) = args.event_set {
        config.event_set = set.into();
    }
    config.apply_env()?;

    let files = gather_inputs(&args.input)?;
    let mut sequences: Vec<RemiSequence> = Vec::new();
    let mut failures: Vec<(PathBuf, Error)> = Vec::new();
    for file in &files {
        let is_midi = matches!(
            file.extension().and_then(|e| e.to_str()),
            Some("mid") | Some("midi")
        );
        let result = if is_midi {
            std::fs::read(file)
                .map_err(Error::from)
                .and_then(|bytes| {
                    midi_to_remi(&bytes, config.event_set, &file.display().to_string())
                })
                .map(|seq| vec![seq])
        } else {
            read_text_corpus(file)
        };
        match result {
            Ok(seqs) => sequences.extend(seqs),
            Err(err) => failures.push((file.clone(), err)),
        }
    }
    if !failures.is_empty() {
        for (file, err) in &failures {
            let _ = writeln!(out, "failed: {}: {err}", file.display());
        }
        return Err(Error::CorpusParse {
            path: failures[0].0.display().to_string(),
            line: 0,
            column: 0,
            reason: format!("{} input file(s) failed to parse", failures.len()),
        });
    }
    if sequences.iter().all(|s| s.is_empty()) {
        return Err(Error::NoSequences);
    }

    let events_in: usize = sequences.iter().map(|s| s.len()).sum();
    match args.emit {
        Emit::Remi => {
            std::fs::write(
                &args.output,
                midigram::remi::write_text_corpus_string(&sequences),
            )?;
            let _ = writeln!(
                out,
                "## cmd=tokenize emit=remi sequences={} events={}",
                sequences.len(),
                events_in
            );
        }
        Emit::Ucw => {
            let vocab_path = args.vocab.as_deref().ok_or_else(|| {
                Error::Config("--vocab is required when emitting the segmented corpus".into())
            })?;
            if !vocab_path.exists() {
                return Err(Error::Config(format!(
                    "vocab file {} does not exist",
                    vocab_path.display()
                )));
            }
            let vocab = read_vocab_file(vocab_path)?;
            let policy = match args.unknown {
                UnknownArg::Error => UnknownTokenPolicy::Error,
                UnknownArg::Pass => UnknownTokenPolicy::PassThrough,
            };
            let mut segmented = Vec::with_capacity(sequences.len());
            for seq in &sequences {
                segmented.push(segment(seq, &vocab, policy)?);
            }
            let tokens_out: usize = segmented.iter().map(|s| s.len()).sum();
            std::fs::write(&args.output, write_segmented_corpus_string(&segmented))?;
            let _ = writeln!(
                out,
                "## cmd=tokenize emit=ucw sequences={} events={} tokens={}",
                segmented.len(),
                events_in,
                tokens_out
            );
        }
    }
    Ok(())
}
