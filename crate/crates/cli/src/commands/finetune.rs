//! `midigram finetune`: attach a classification head to a pretrained
//! checkpoint and train it on a labeled dataset with a deterministic
//! 90/10 train/validation split.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use crate::commands::resolve_config;
use crate::dataset::{
    parse_sequence_dataset, parse_token_dataset, split_train_val, ExampleLabels, LabeledExample,
};
use midigram::model::{
    build_batch, finetune, AdamW, Batch, Checkpoint, FinetuneSettings, Labels, ModelConfig,
    OptimizerState, TaskKind, TokenTable,
};
use midigram::ngram::NgramVocab;
use midigram::{Error, Result};

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Pretrained checkpoint.
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Labeled dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Task kind.
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Number of label classes.
    #[arg(long)]
    pub classes: usize,
    /// Fine-tuned checkpoint to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Accuracy log path (default: `<output>.log`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub peak_lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TaskArg {
    Sequence,
    Token,
}

fn to_batch(
    example: &LabeledExample,
    table: &TokenTable,
    ngrams: &NgramVocab,
    config: &ModelConfig,
) -> Result<Batch<f64>> {
    let mut batch = build_batch::<f64>(&example.sequence, table, ngrams, config)?;
    match &example.labels {
        ExampleLabels::Sequence(label) => {
            batch.labels = Labels::SeqClass(*label);
        }
        ExampleLabels::Tokens(labels) => {
            // Position 0 is [CLS]; labels past the truncation point drop.
            let kept = batch.token_ids.len() - 1;
            let mut per_position = vec![None; batch.token_ids.len()];
            for (i, &label) in labels.iter().take(kept).enumerate() {
                per_position[i + 1] = Some(label);
            }
            batch.labels = Labels::TokClass(per_position);
        }
    }
    Ok(batch)
}

pub fn run(args: &FinetuneArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = resolve_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(lr) = args.peak_lr {
        config.peak_lr = lr;
    }
    if let Some(batch) = args.batch_size {
        config.batch_size = batch;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    config.apply_env()?;

    if args.classes < 2 {
        return Err(Error::Config(format!(
            "--classes must be at least 2, got {}",
            args.classes
        )));
    }

    let checkpoint: Checkpoint<f64> = Checkpoint::load(&args.ckpt)?;
    let mut model = checkpoint.config.clone();
    let task = match args.task {
        TaskArg::Sequence => {
            model.seq_classes = args.classes;
            TaskKind::Sequence
        }
        TaskArg::Token => {
            model.tok_classes = args.classes;
            TaskKind::Token
        }
    };

    let text = std::fs::read_to_string(&args.data)?;
    let origin = args.data.display().to_string();
    let examples = match task {
        TaskKind::Sequence => parse_sequence_dataset(&origin, &text, args.classes)?,
        TaskKind::Token => parse_token_dataset(&origin, &text, args.classes)?,
    };
    if examples.is_empty() {
        return Err(Error::NoSequences);
    }
    let (train_examples, val_examples) = split_train_val(examples);

    let train_batches: Vec<Batch<f64>> = train_examples
        .iter()
        .map(|e| to_batch(e, &checkpoint.token_table, &checkpoint.ngram_vocab, &model))
        .collect::<Result<_>>()?;
    let val_batches: Vec<Batch<f64>> = val_examples
        .iter()
        .map(|e| to_batch(e, &checkpoint.token_table, &checkpoint.ngram_vocab, &model))
        .collect::<Result<_>>()?;

    let mut params = checkpoint.params.clone();
    params.init_heads(&model, config.seed);

    let mut state = OptimizerState::new(&model);
    // Cap warmup at a tenth of the run so short fine-tunes reach the
    // peak rate.
    let steps_per_epoch = train_batches.len().div_ceil(config.batch_size.max(1)) as u64;
    let total_steps = config.epochs.saturating_mul(steps_per_epoch);
    let settings = FinetuneSettings {
        epochs: config.epochs,
        batch_size: config.batch_size,
        seed: config.seed,
        optimizer: AdamW {
            peak_lr: config.peak_lr,
            warmup_steps: config.warmup_steps.min(total_steps / 10 + 1),
            weight_decay: config.weight_decay,
            ..AdamW::default()
        },
        task,
    };
    let log = finetune(
        &train_batches,
        &val_batches,
        &mut params,
        &model,
        &mut state,
        &settings,
    )?;

    let mut log_text = String::new();
    for entry in &log {
        log_text.push_str(&format!(
            "{}\t{:.6}\t{:.6}\n",
            entry.epoch, entry.train_loss, entry.val_accuracy
        ));
    }
    std::fs::write(
        args.log
            .clone()
            .unwrap_or_else(|| args.output.with_extension("log")),
        log_text,
    )?;

    let tuned = Checkpoint {
        config: model,
        params,
        optimizer: Some(state),
        step: checkpoint.step + log.len() as u64,
        token_table: checkpoint.token_table,
        ngram_vocab: checkpoint.ngram_vocab,
    };
    tuned.save(&args.output)?;

    let final_acc = log.last().map(|l| l.val_accuracy).unwrap_or(0.0);
    let _ = writeln!(
        out,
        "## cmd=finetune task={} epochs={} train={} val={} final_val_acc={:.6}",
        match task {
            TaskKind::Sequence => "sequence",
            TaskKind::Token => "token",
        },
        config.epochs,
        train_batches.len(),
        val_batches.len(),
        final_acc
    );
    Ok(())
}
