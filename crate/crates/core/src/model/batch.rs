//! Token table, model inputs, and batch assembly from segmented
//! sequences.

use std::collections::HashMap;

use crate::compound::UcwSequence;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::config::ModelConfig;
use crate::ngram::{build_position_matrix, match_sequence, slot_gram_ids, NgramVocab};
use crate::scalar::Scalar;

pub const PAD_TOKEN: &str = "[PAD]";
pub const MASK_TOKEN: &str = "[MASK]";
pub const CLS_TOKEN: &str = "[CLS]";
pub const SPECIAL_TOKENS: [&str; 3] = [PAD_TOKEN, MASK_TOKEN, CLS_TOKEN];

pub const PAD_ID: u32 = 0;
pub const MASK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;

/// Bidirectional token-text table. Ids 0..=2 are the special tokens;
/// the rest follow first-occurrence order over the corpus, which makes
/// the assignment deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenTable {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl TokenTable {
    pub fn from_corpus(corpus: &[UcwSequence]) -> Self {
        let mut table = Self {
            tokens: Vec::new(),
            ids: HashMap::new(),
        };
        for special in SPECIAL_TOKENS {
            table.insert(special);
        }
        for seq in corpus {
            for token in &seq.tokens {
                table.insert(token);
            }
        }
        table
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, special) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*special) {
                return Err(Error::Checkpoint(format!(
                    "token table must start with {SPECIAL_TOKENS:?}"
                )));
            }
        }
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Self { tokens, ids })
    }

    fn insert(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_special(id: u32) -> bool {
        id < SPECIAL_TOKENS.len() as u32
    }
}

/// Labels attached to one model input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Labels {
    None,
    /// Original ids at corrupted positions.
    Mlm(Vec<Option<u32>>),
    SeqClass(u32),
    TokClass(Vec<Option<u32>>),
}

/// One sequence prepared for the encoder: `[CLS]`-prefixed token ids,
/// gram slot ids in rank order, the row-normalized position matrix
/// (token rows by effective gram slots), and the attention mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<S> {
    pub token_ids: Vec<u32>,
    pub gram_ids: Vec<u32>,
    pub position_matrix: Matrix<S>,
    pub attn_mask: Vec<bool>,
    pub labels: Labels,
    pub has_cls: bool,
    pub source_id: String,
}

impl<S: Scalar> Batch<S> {
    pub fn seq_len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        if self.token_ids.len() > config.max_seq_len {
            return Err(Error::Shape {
                expected: format!("at most {} tokens", config.max_seq_len),
                got: format!("{} in {}", self.token_ids.len(), self.source_id),
            });
        }
        for &id in &self.token_ids {
            if id as usize >= config.vocab_size {
                return Err(Error::IdOutOfRange {
                    id,
                    size: config.vocab_size,
                    context: self.source_id.clone(),
                });
            }
        }
        for &g in &self.gram_ids {
            if g as usize >= config.ngram_vocab_size.max(1) {
                return Err(Error::IdOutOfRange {
                    id: g,
                    size: config.ngram_vocab_size,
                    context: self.source_id.clone(),
                });
            }
        }
        if self.position_matrix.shape() != (self.token_ids.len(), self.gram_ids.len()) {
            return Err(Error::Shape {
                expected: format!("{}x{}", self.token_ids.len(), self.gram_ids.len()),
                got: format!("{:?}", self.position_matrix.shape()),
            });
        }
        if self.attn_mask.len() != self.token_ids.len() {
            return Err(Error::Shape {
                expected: format!("mask of length {}", self.token_ids.len()),
                got: format!("{}", self.attn_mask.len()),
            });
        }
        Ok(())
    }

    /// Pad with `[PAD]` tokens (masked from attention) up to `len`.
    pub fn pad_to(&mut self, len: usize) {
        while self.token_ids.len() < len {
            self.token_ids.push(PAD_ID);
            self.attn_mask.push(false);
            match &mut self.labels {
                Labels::Mlm(l) | Labels::TokClass(l) => l.push(None),
                _ => {}
            }
        }
        let mut padded = Matrix::zeros(len, self.position_matrix.cols());
        for i in 0..self.position_matrix.rows() {
            padded.row_mut(i).copy_from_slice(self.position_matrix.row(i));
        }
        self.position_matrix = padded;
    }
}

/// Assemble a model input from a segmented sequence: map tokens to ids
/// (unknown text is an error naming the sequence), truncate to fit,
/// prepend `[CLS]`, match grams on the truncated tokens, and build the
/// normalized position matrix with every row shifted one down so the
/// `[CLS]` row is zero.
pub fn build_batch<S: Scalar>(
    seq: &UcwSequence,
    table: &TokenTable,
    ngrams: &NgramVocab,
    config: &ModelConfig,
) -> Result<Batch<S>> {
    let keep = seq.tokens.len().min(config.max_seq_len.saturating_sub(1));
    let tokens = &seq.tokens[..keep];

    let mut token_ids = Vec::with_capacity(keep + 1);
    token_ids.push(CLS_ID);
    for token in tokens {
        let id = table.id(token).ok_or_else(|| Error::UnknownToken {
            token: token.clone(),
            source_id: seq.source_id.clone(),
        })?;
        token_ids.push(id);
    }

    let clipped = UcwSequence {
        tokens: tokens.to_vec(),
        families: seq.families[..keep].to_vec(),
        source_id: seq.source_id.clone(),
    };
    let matches = match_sequence(&clipped, ngrams, config.max_ngrams);
    let gram_ids = slot_gram_ids(&matches);
    let raw = build_position_matrix::<S>(&matches, ngrams, keep, gram_ids.len())?;
    let normalized = crate::ngram::normalize_rows(raw);

    let n = token_ids.len();
    let mut position_matrix = Matrix::zeros(n, gram_ids.len());
    for i in 0..keep {
        position_matrix
            .row_mut(i + 1)
            .copy_from_slice(normalized.weights.row(i));
    }

    Ok(Batch {
        attn_mask: vec![true; n],
        token_ids,
        gram_ids,
        position_matrix,
        labels: Labels::None,
        has_cls: true,
        source_id: seq.source_id.clone(),
    })
}
