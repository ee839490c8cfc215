//! Symbolic-music tokenization and an n-gram-injected transformer encoder.
//!
//! The pipeline: MIDI (or a plain-text corpus) parses into quantized REMI
//! event sequences; same-family events group into words; frequent adjacent
//! pairs merge into compound tokens via a learned vocabulary; an n-gram
//! table harvested from the merged corpus aligns with each sequence
//! through a row-normalized position matrix; and a dual-stack encoder
//! injects the n-gram stack's hidden states into the token stack through
//! that matrix during masked-language-model pretraining and fine-tuning.
//!
//! Numeric code is generic over [`scalar::Scalar`] (f32 or f64); the
//! aliases at the crate root fix f64, the desk-scale default.

pub mod compound;
pub mod error;
pub mod linalg;
pub mod model;
pub mod ngram;
pub mod remi;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};

/// Desk-scale (f64) matrix.
pub type Mat = linalg::Matrix<f64>;
/// Desk-scale position matrix.
pub type PosMat = ngram::PositionMatrix<f64>;
/// Desk-scale parameter set.
pub type Params = model::ModelParams<f64>;
/// Desk-scale forward trace.
pub type Trace = model::ForwardTrace<f64>;
