//! Dual-stack encoder: a main token stack and a gram stack whose hidden
//! states are injected through the position matrix, with MLM pretraining,
//! classification heads, a hand-written backward pass, AdamW, and a
//! finite-difference gradient checker.

pub mod backward;
pub mod batch;
pub mod checkpoint;
pub mod config;
pub mod forward;
pub mod gradcheck;
pub mod masking;
pub mod optimizer;
pub mod params;
pub mod train;

pub use backward::{loss_and_backward, LossOutput};
pub use batch::{
    build_batch, Batch, Labels, TokenTable, CLS_ID, CLS_TOKEN, MASK_ID, MASK_TOKEN, PAD_ID,
    PAD_TOKEN, SPECIAL_TOKENS,
};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC};
pub use config::ModelConfig;
pub use forward::{
    classify_sequence, classify_tokens, embed_ngrams, embed_tokens, encoder_layer, forward,
    inject, ForwardTrace, LayerTrace,
};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use masking::{mlm_mask, MlmPolicy};
pub use optimizer::{train_step, AdamW, OptimizerState, StepOutcome};
pub use params::{Head, LayerParams, ModelParams};
pub use train::{
    evaluate, finetune, pretrain_mlm, EpochLog, FinetuneSettings, PretrainSettings, StepLog,
    TaskKind,
};
