//! `midigram pretrain`: masked-language-model pretraining over a
//! segmented corpus, with an optional paired injected-vs-baseline
//! convergence comparison.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;

use crate::commands::resolve_config;
use crate::config::PipelineConfig;
use midigram::compound::read_segmented_corpus;
use midigram::model::{
    build_batch, pretrain_mlm, AdamW, Batch, Checkpoint, MlmPolicy, ModelConfig, ModelParams,
    OptimizerState, PretrainSettings, StepLog, TokenTable,
};
use midigram::ngram::{read_ngram_vocab_file, NgramVocab};
use midigram::{Error, Result};

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Segmented corpus.
    #[arg(long)]
    pub input: PathBuf,
    /// Gram table file from `ngrams`.
    #[arg(long)]
    pub ngrams: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Training log path (default: `<output>.log`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub peak_lr: Option<f64>,
    #[arg(long)]
    pub warmup: Option<u64>,
    /// Use the desk-scale model block (2/1 layers, dim 32).
    #[arg(long)]
    pub desk: bool,
    /// Disable injection by running with zero gram-stack layers.
    #[arg(long, conflicts_with = "compare")]
    pub baseline: bool,
    /// Write a paired loss-curve report (injected vs baseline) here.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

fn apply_flags(config: &mut PipelineConfig, args: &PretrainArgs) -> Result<()> {
    if args.desk {
        config.desk_model();
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    if let Some(batch) = args.batch_size {
        config.batch_size = batch;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(lr) = args.peak_lr {
        config.peak_lr = lr;
    }
    if let Some(warmup) = args.warmup {
        config.warmup_steps = warmup;
    }
    config.apply_env()
}

pub(crate) fn prepare_batches(
    corpus_path: &Path,
    ngram_vocab: &NgramVocab,
    model: &mut ModelConfig,
) -> Result<(Vec<Batch<f64>>, TokenTable)> {
    let corpus = read_segmented_corpus(corpus_path)?;
    let non_empty: Vec<_> = corpus.into_iter().filter(|s| !s.is_empty()).collect();
    if non_empty.is_empty() {
        return Err(Error::NoSequences);
    }
    let table = TokenTable::from_corpus(&non_empty);
    model.vocab_size = table.len();
    model.ngram_vocab_size = ngram_vocab.len().max(1);
    model.validate()?;
    let mut batches = Vec::with_capacity(non_empty.len());
    for seq in &non_empty {
        batches.push(build_batch::<f64>(seq, &table, ngram_vocab, model)?);
    }
    Ok((batches, table))
}

fn settings_from(config: &PipelineConfig) -> PretrainSettings {
    PretrainSettings {
        steps: config.steps,
        batch_size: config.batch_size,
        seed: config.seed,
        optimizer: AdamW {
            peak_lr: config.peak_lr,
            warmup_steps: config.warmup_steps,
            weight_decay: config.weight_decay,
            ..AdamW::default()
        },
        policy: MlmPolicy::with_rate(config.model.mask_rate),
    }
}

fn write_log(path: &Path, log: &[StepLog]) -> Result<()> {
    let mut text = String::new();
    for entry in log {
        text.push_str(&entry.render());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn run(args: &PretrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve_config(args.config.as_deref())?;
    apply_flags(&mut config, args)?;

    let ngram_vocab = read_ngram_vocab_file(&args.ngrams)?;
    let mut model = config.model.clone();
    if args.baseline {
        model.layers_ngram = 0;
    }
    let (batches, table) = prepare_batches(&args.input, &ngram_vocab, &mut model)?;
    let settings = settings_from(&config);

    if let Some(report_path) = &args.compare {
        // Paired runs from one seed: identical main-stack init and
        // masking, with and without the gram stack.
        let injected_model = model.clone();
        let mut baseline_model = model.clone();
        baseline_model.layers_ngram = 0;

        let mut params_injected: ModelParams<f64> = ModelParams::init(&injected_model, config.seed);
        let mut state_injected = OptimizerState::new(&injected_model);
        let log_injected = pretrain_mlm(
            &batches,
            &mut params_injected,
            &injected_model,
            &mut state_injected,
            &settings,
        )?;

        let mut params_baseline: ModelParams<f64> = ModelParams::init(&baseline_model, config.seed);
        let mut state_baseline = OptimizerState::new(&baseline_model);
        let log_baseline = pretrain_mlm(
            &batches,
            &mut params_baseline,
            &baseline_model,
            &mut state_baseline,
            &settings,
        )?;

        let mut report = String::new();
        report.push_str(&format!(
            "## compare steps={} seed={} batch_size={}\n",
            settings.steps, settings.seed, settings.batch_size
        ));
        for (a, b) in log_injected.iter().zip(&log_baseline) {
            report.push_str(&format!(
                "## curve step={} loss_injected={:.6} loss_baseline={:.6}\n",
                a.step, a.loss, b.loss
            ));
        }
        let final_injected = log_injected.last().map(|l| l.loss).unwrap_or(0.0);
        let final_baseline = log_baseline.last().map(|l| l.loss).unwrap_or(0.0);
        report.push_str(&format!(
            "## final loss_injected={final_injected:.6} loss_baseline={final_baseline:.6}\n"
        ));
        std::fs::write(report_path, &report)?;

        write_log(
            &args
                .log
                .clone()
                .unwrap_or_else(|| args.output.with_extension("log")),
            &log_injected,
        )?;
        let checkpoint = Checkpoint {
            config: injected_model,
            params: params_injected,
            optimizer: Some(state_injected),
            step: settings.steps,
            token_table: table,
            ngram_vocab,
        };
        checkpoint.save(&args.output)?;
        let _ = writeln!(
            out,
            "## cmd=pretrain compare=1 steps={} final_injected={:.6} final_baseline={:.6}",
            settings.steps, final_injected, final_baseline
        );
        return Ok(());
    }

    let mut params: ModelParams<f64> = ModelParams::init(&model, config.seed);
    let mut state = OptimizerState::new(&model);
    let log = pretrain_mlm(&batches, &mut params, &model, &mut state, &settings)?;
    let final_loss = log.last().map(|l| l.loss).unwrap_or(0.0);
    let final_acc = log.last().map(|l| l.masked_acc).unwrap_or(0.0);
    let best_acc = log.iter().map(|l| l.masked_acc).fold(0.0f64, f64::max);
    write_log(
        &args
            .log
            .clone()
            .unwrap_or_else(|| args.output.with_extension("log")),
        &log,
    )?;
    let skipped = state.skipped;
    let checkpoint = Checkpoint {
        config: model,
        params,
        optimizer: Some(state),
        step: settings.steps,
        token_table: table,
        ngram_vocab,
    };
    checkpoint.save(&args.output)?;
    let _ = writeln!(
        out,
        "## cmd=pretrain steps={} sequences={} final_loss={:.6} final_masked_acc={:.6} best_masked_acc={:.6} skipped={}",
        settings.steps,
        batches.len(),
        final_loss,
        final_acc,
        best_acc,
        skipped
    );
    Ok(())
}
