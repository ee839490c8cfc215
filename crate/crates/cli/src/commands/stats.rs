//! `midigram stats`: event/compound/merged sequence lengths and their
//! ratios across vocabulary sizes, with a merge-count growth curve.
//!
//! Retraining per size is the expensive part, so trained vocabularies
//! and their length traces are cached by corpus content hash when a
//! cache directory is given.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use sha2::{Digest, Sha256};

use crate::commands::{resolve_config, EventSetArg};
use midigram::compound::{encode_cp, train_ucw, UcwVocab};
use midigram::remi::RemiSequence;
use midigram::{Error, Result};

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Event-text corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// Vocabulary sizes to sweep (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub vocab_sizes: Option<Vec<usize>>,
    /// Cache directory for trained vocabularies.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub event_set: Option<EventSetArg>,
}

/// Reference ratios at vocabulary size 1000, printed for context next
/// to measured values.
const REFERENCE_VOCAB: usize = 1000;
const REFERENCE_UCW_REMI: (f64, f64) = (0.70, 0.80);
const REFERENCE_UCW_CP: f64 = 1.65;

#[derive(Debug, Clone)]
pub struct SizeReport {
    pub vocab_size: usize,
    pub merges: usize,
    pub mean_ucw: f64,
    pub median_ucw: f64,
    /// Total corpus tokens after each merge; index 0 = before merging.
    pub length_trace: Vec<usize>,
}

/// Full report: corpus-level lengths plus one entry per vocabulary size.
#[derive(Debug, Clone)]
pub struct StatsReport {
    pub sequences: usize,
    pub mean_remi: f64,
    pub median_remi: f64,
    pub mean_cp: f64,
    pub median_cp: f64,
    pub sizes: Vec<SizeReport>,
    pub monotonic: bool,
}

fn mean(xs: &[usize]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<usize>() as f64 / xs.len() as f64
}

fn median(xs: &[usize]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
    } else {
        sorted[mid] as f64
    }
}

fn corpus_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

fn cached_vocab(
    cache_dir: Option<&Path>,
    hash: &str,
    size: usize,
) -> Option<(UcwVocab, Vec<usize>)> {
    let dir = cache_dir?;
    let vocab_path = dir.join(format!("ucw-{hash}-{size}.vocab"));
    let trace_path = dir.join(format!("ucw-{hash}-{size}.lengths"));
    let vocab = midigram::compound::read_vocab_file(&vocab_path).ok()?;
    let trace: Vec<usize> = std::fs::read_to_string(&trace_path)
        .ok()?
        .lines()
        .map(|l| l.parse().ok())
        .collect::<Option<_>>()?;
    Some((vocab, trace))
}

fn store_vocab(
    cache_dir: Option<&Path>,
    hash: &str,
    size: usize,
    vocab: &UcwVocab,
    trace: &[usize],
) -> Result<()> {
    let Some(dir) = cache_dir else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    midigram::compound::write_vocab_file(vocab, &dir.join(format!("ucw-{hash}-{size}.vocab")))?;
    let text: String = trace.iter().map(|t| format!("{t}\n")).collect();
    std::fs::write(dir.join(format!("ucw-{hash}-{size}.lengths")), text)?;
    Ok(())
}

pub fn compute_report(
    corpus: &[RemiSequence],
    corpus_text: &str,
    set: midigram::remi::EventSet,
    sizes: &[usize],
    cache_dir: Option<&Path>,
) -> Result<StatsReport> {
    let non_empty: Vec<&RemiSequence> = corpus.iter().filter(|s| !s.is_empty()).collect();
    if non_empty.is_empty() {
        return Err(Error::NoSequences);
    }
    let remi_lengths: Vec<usize> = non_empty.iter().map(|s| s.len()).collect();
    let cp_lengths: Vec<usize> = non_empty
        .iter()
        .map(|s| encode_cp(s, set).map(|t| t.len()))
        .collect::<Result<_>>()?;

    let hash = corpus_hash(corpus_text);
    let mut size_reports = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let (vocab, trace, ucw_lengths) =
            if let Some((vocab, trace)) = cached_vocab(cache_dir, &hash, size) {
                let lengths: Vec<usize> = non_empty
                    .iter()
                    .map(|s| {
                        midigram::compound::segment(
                            s,
                            &vocab,
                            midigram::compound::UnknownTokenPolicy::PassThrough,
                        )
                        .map(|seq| seq.len())
                    })
                    .collect::<Result<_>>()?;
                (vocab, trace, lengths)
            } else {
                let owned: Vec<RemiSequence> = non_empty.iter().map(|s| (*s).clone()).collect();
                let outcome = train_ucw(&owned, size)?;
                let lengths: Vec<usize> =
                    outcome.corpus_state.iter().map(|s| s.len()).collect();
                store_vocab(cache_dir, &hash, size, &outcome.vocab, &outcome.length_trace)?;
                (outcome.vocab, outcome.length_trace, lengths)
            };
        size_reports.push(SizeReport {
            vocab_size: size,
            merges: vocab.merges.len(),
            mean_ucw: mean(&ucw_lengths),
            median_ucw: median(&ucw_lengths),
            length_trace: trace,
        });
    }

    let mut sorted_by_size = size_reports.clone();
    sorted_by_size.sort_by_key(|r| r.vocab_size);
    let monotonic = sorted_by_size
        .windows(2)
        .all(|w| w[1].mean_ucw <= w[0].mean_ucw + 1e-9);

    Ok(StatsReport {
        sequences: non_empty.len(),
        mean_remi: mean(&remi_lengths),
        median_remi: median(&remi_lengths),
        mean_cp: mean(&cp_lengths),
        median_cp: median(&cp_lengths),
        sizes: size_reports,
        monotonic,
    })
}

pub fn render_report(report: &StatsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "corpus: {} sequences, mean event length {:.2}, mean compound length {:.2}\n",
        report.sequences, report.mean_remi, report.mean_cp
    ));
    out.push_str(&format!(
        "## cmd=stats sequences={} mean_remi={:.4} median_remi={:.4} mean_cp={:.4} median_cp={:.4}\n",
        report.sequences, report.mean_remi, report.median_remi, report.mean_cp, report.median_cp
    ));
    for size in &report.sizes {
        let ratio_remi = size.mean_ucw / report.mean_remi;
        let ratio_cp = size.mean_ucw / report.mean_cp;
        out.push_str(&format!(
            "vocab {}: {} merges, mean length {:.2} ({:.1}% of events, {:.1}% of compounds)\n",
            size.vocab_size,
            size.merges,
            size.mean_ucw,
            100.0 * ratio_remi,
            100.0 * ratio_cp
        ));
        out.push_str(&format!(
            "## stats vocab_size={} merges={} mean_ucw={:.4} median_ucw={:.4} ratio_ucw_remi={:.4} ratio_ucw_cp={:.4}\n",
            size.vocab_size, size.merges, size.mean_ucw, size.median_ucw, ratio_remi, ratio_cp
        ));
        for (merge_count, &total) in size.length_trace.iter().enumerate() {
            out.push_str(&format!(
                "## growth vocab_size={} merges={} mean_len={:.4}\n",
                size.vocab_size,
                merge_count,
                total as f64 / report.sequences as f64
            ));
        }
    }
    out.push_str(&format!(
        "reference at vocab {REFERENCE_VOCAB}: merged/event ratio {:.2}-{:.2}, merged/compound ratio {:.2}\n",
        REFERENCE_UCW_REMI.0, REFERENCE_UCW_REMI.1, REFERENCE_UCW_CP
    ));
    out.push_str(&format!(
        "## reference vocab_size={REFERENCE_VOCAB} ucw_remi_low={:.2} ucw_remi_high={:.2} ucw_cp={:.2}\n",
        REFERENCE_UCW_REMI.0, REFERENCE_UCW_REMI.1, REFERENCE_UCW_CP
    ));
    out.push_str(&format!("## monotonic value={}\n", report.monotonic));
    if !report.monotonic {
        out.push_str("warning: mean merged length increased with vocabulary size\n");
    }
    out
}

pub fn run(args: &StatsArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve_config(args.config.as_deref())?;
    if let Some(set) = args.event_set {
        config.event_set = set.into();
    }
    config.apply_env()?;

    let corpus_text = std::fs::read_to_string(&args.input)?;
    let corpus = midigram::remi::read_text_corpus_str(
        &args.input.display().to_string(),
        &corpus_text,
    )?;
    let sizes = args
        .vocab_sizes
        .clone()
        .unwrap_or_else(|| vec![config.ucw_vocab_size]);
    if sizes.is_empty() {
        return Err(Error::Config("no vocabulary sizes requested".into()));
    }

    let report = compute_report(
        &corpus,
        &corpus_text,
        config.event_set,
        &sizes,
        args.cache_dir.as_deref(),
    )?;
    let text = render_report(&report);
    let _ = out.write_all(text.as_bytes());
    if let Some(path) = &args.output {
        std::fs::write(path, &text)?;
    }
    Ok(())
}
