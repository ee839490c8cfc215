//! Crate-wide error type.
//!
//! Variants are grouped by pipeline stage; the CLI maps them onto exit
//! codes (configuration problems vs. bad input data).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in a MIDI byte stream, with the offending offset.
    #[error("malformed MIDI at byte {offset}: {reason}")]
    Midi { offset: usize, reason: String },

    /// A MIDI file that parsed but contains no note events.
    #[error("MIDI file contains no note events")]
    EmptyPiece,

    /// A command was pointed at an empty corpus or dataset.
    #[error("no input sequences")]
    NoSequences,

    /// Text-corpus parse failure (1-based line and column).
    #[error("{path}:{line}:{column}: {reason}")]
    CorpusParse {
        path: String,
        line: usize,
        column: usize,
        reason: String,
    },

    /// An event sequence that violates the event-order grammar.
    #[error("event grammar violation at index {index}: {reason}")]
    Grammar { index: usize, reason: String },

    /// Invalid configuration value (sizes, bin lists, layer counts).
    #[error("configuration error: {0}")]
    Config(String),

    /// A family word that cannot be mapped onto fixed compound slots.
    #[error("compound structure error: {0}")]
    Structure(String),

    /// Token text not covered by the vocabulary in use.
    #[error("unknown token {token:?} in {source_id}")]
    UnknownToken { token: String, source_id: String },

    /// Note onset past the configured bar cap.
    #[error("note at tick {tick} exceeds the {max_bars}-bar cap")]
    BarOverflow { tick: u64, max_bars: u32 },

    /// Non-finite activation produced during a forward or backward pass.
    #[error("non-finite value in {stack} layer {layer}")]
    Numeric { stack: &'static str, layer: usize },

    /// Tensor dimensions that do not line up.
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    /// Token or gram id outside the table in use.
    #[error("id {id} out of range (size {size}) in {context}")]
    IdOutOfRange {
        id: u32,
        size: usize,
        context: String,
    },

    /// Malformed checkpoint container.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True when the failure stems from configuration rather than data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
