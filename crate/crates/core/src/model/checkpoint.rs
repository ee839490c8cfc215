//! Versioned binary checkpoint container.
//!
//! Layout ("ngmf-ckpt v1", little-endian):
//! magic line, config block (key=value lines), token table, gram table,
//! parameter tensors (named, row-major f64), optional optimizer moments
//! with the applied-step counter, global step. The token and gram tables
//! ride along so a fine-tuning run can interpret datasets and rebuild
//! position matrices without the original corpus.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::batch::TokenTable;
use crate::model::config::ModelConfig;
use crate::model::optimizer::OptimizerState;
use crate::model::params::ModelParams;
use crate::ngram::{NgramEntry, NgramVocab};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &[u8] = b"ngmf-ckpt v1\n";

#[derive(Debug, Clone)]
pub struct Checkpoint<S> {
    pub config: ModelConfig,
    pub params: ModelParams<S>,
    pub optimizer: Option<OptimizerState<S>>,
    pub step: u64,
    pub token_table: TokenTable,
    pub ngram_vocab: NgramVocab,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Self {
        Self { buf: Vec::new() }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, what: &str) -> Result<T> {
        Err(Error::Checkpoint(format!(
            "truncated or corrupt container at byte {}: {what}",
            self.pos
        )))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return self.fail("unexpected end");
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u64()? as usize;
        if len > self.bytes.len() {
            return self.fail("string length");
        }
        let b = self.take(len)?;
        String::from_utf8(b.to_vec())
            .map_err(|_| Error::Checkpoint("non-UTF-8 string".into()))
    }
}

fn write_config(w: &mut Writer, config: &ModelConfig) {
    let text = [
        format!("layers_main={}", config.layers_main),
        format!("layers_ngram={}", config.layers_ngram),
        format!("hidden_dim={}", config.hidden_dim),
        format!("heads={}", config.heads),
        format!("ffn_dim={}", config.ffn_dim),
        format!("max_seq_len={}", config.max_seq_len),
        format!("max_ngrams={}", config.max_ngrams),
        format!("vocab_size={}", config.vocab_size),
        format!("ngram_vocab_size={}", config.ngram_vocab_size),
        format!("mask_rate={}", config.mask_rate),
        format!("seq_classes={}", config.seq_classes),
        format!("tok_classes={}", config.tok_classes),
    ]
    .join("\n");
    w.string(&text);
}

fn parse_config(text: &str) -> Result<ModelConfig> {
    let mut config = ModelConfig::desk();
    for line in text.lines() {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Checkpoint(format!("bad config line {line:?}")))?;
        let parse_usize = || -> Result<usize> {
            value
                .parse()
                .map_err(|_| Error::Checkpoint(format!("bad config value {line:?}")))
        };
        match key {
            "layers_main" => config.layers_main = parse_usize()?,
            "layers_ngram" => config.layers_ngram = parse_usize()?,
            "hidden_dim" => config.hidden_dim = parse_usize()?,
            "heads" => config.heads = parse_usize()?,
            "ffn_dim" => config.ffn_dim = parse_usize()?,
            "max_seq_len" => config.max_seq_len = parse_usize()?,
            "max_ngrams" => config.max_ngrams = parse_usize()?,
            "vocab_size" => config.vocab_size = parse_usize()?,
            "ngram_vocab_size" => config.ngram_vocab_size = parse_usize()?,
            "seq_classes" => config.seq_classes = parse_usize()?,
            "tok_classes" => config.tok_classes = parse_usize()?,
            "mask_rate" => {
                config.mask_rate = value
                    .parse()
                    .map_err(|_| Error::Checkpoint(format!("bad config value {line:?}")))?
            }
            other => {
                return Err(Error::Checkpoint(format!("unknown config key {other:?}")));
            }
        }
    }
    Ok(config)
}

fn write_tensors<S: Scalar>(w: &mut Writer, params: &ModelParams<S>) {
    let tensors = params.named_tensors();
    w.u64(tensors.len() as u64);
    for (name, tensor) in tensors {
        w.string(&name);
        w.u64(tensor.rows() as u64);
        w.u64(tensor.cols() as u64);
        for &v in tensor.data() {
            w.f64(v.as_f64());
        }
    }
}

fn read_tensors<S: Scalar>(r: &mut Reader, target: &mut ModelParams<S>) -> Result<()> {
    let count = r.u64()? as usize;
    let mut loaded: Vec<(String, Matrix<S>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        if rows.saturating_mul(cols) > 1 << 32 {
            return Err(Error::Checkpoint(format!(
                "implausible tensor shape {rows}x{cols} for {name}"
            )));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(S::of(r.f64()?));
        }
        loaded.push((name, Matrix::from_vec(rows, cols, data)));
    }
    let mut expected = target.named_tensors_mut();
    if expected.len() != loaded.len() {
        return Err(Error::Checkpoint(format!(
            "tensor count mismatch: file has {}, config implies {}",
            loaded.len(),
            expected.len()
        )));
    }
    for ((name, tensor), (file_name, file_tensor)) in expected.iter_mut().zip(loaded) {
        if *name != file_name {
            return Err(Error::Checkpoint(format!(
                "tensor order mismatch: expected {name}, found {file_name}"
            )));
        }
        if tensor.shape() != file_tensor.shape() {
            return Err(Error::Checkpoint(format!(
                "tensor {name} shape mismatch: config {:?}, file {:?}",
                tensor.shape(),
                file_tensor.shape()
            )));
        }
        **tensor = file_tensor;
    }
    Ok(())
}

impl<S: Scalar> Checkpoint<S> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.buf.extend_from_slice(CHECKPOINT_MAGIC);
        write_config(&mut w, &self.config);

        let tokens = self.token_table.tokens();
        w.u64(tokens.len() as u64);
        for t in tokens {
            w.string(t);
        }

        let gram_tokens = self.ngram_vocab.token_texts();
        w.u64(gram_tokens.len() as u64);
        for t in gram_tokens {
            w.string(t);
        }
        w.u64(self.ngram_vocab.n_max as u64);
        w.u64(self.ngram_vocab.min_freq);
        w.u64(self.ngram_vocab.len() as u64);
        for entry in self.ngram_vocab.entries() {
            w.u64(entry.freq);
            w.u32(entry.tokens.len() as u32);
            for &t in &entry.tokens {
                w.u32(t);
            }
        }

        write_tensors(&mut w, &self.params);

        match &self.optimizer {
            Some(state) => {
                w.u8(1);
                write_tensors(&mut w, &state.m);
                write_tensors(&mut w, &state.v);
                w.u64(state.step);
                w.u64(state.skipped);
            }
            None => w.u8(0),
        }
        w.u64(self.step);
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(CHECKPOINT_MAGIC.len())?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic; not a checkpoint".into()));
        }
        let config = parse_config(&r.string()?)?;
        config.validate()?;

        let token_count = r.u64()? as usize;
        let mut tokens = Vec::with_capacity(token_count);
        for _ in 0..token_count {
            tokens.push(r.string()?);
        }
        let token_table = TokenTable::from_tokens(tokens)?;

        let gram_token_count = r.u64()? as usize;
        let mut gram_tokens = Vec::with_capacity(gram_token_count);
        for _ in 0..gram_token_count {
            gram_tokens.push(r.string()?);
        }
        let n_max = r.u64()? as usize;
        let min_freq = r.u64()?;
        let entry_count = r.u64()? as usize;
        let mut entries = Vec::with_capacity(entry_count);
        for _ in 0..entry_count {
            let freq = r.u64()?;
            let len = r.u32()? as usize;
            let mut ids = Vec::with_capacity(len);
            for _ in 0..len {
                let id = r.u32()?;
                if id as usize >= gram_token_count {
                    return r.fail("gram token id out of range");
                }
                ids.push(id);
            }
            entries.push(NgramEntry { tokens: ids, freq });
        }
        let ngram_vocab = NgramVocab::from_parts(gram_tokens, entries, n_max.max(2), min_freq);

        let mut params = ModelParams::zeros(&config);
        read_tensors(&mut r, &mut params)?;

        let optimizer = if r.u8()? == 1 {
            let mut state = OptimizerState::new(&config);
            read_tensors(&mut r, &mut state.m)?;
            read_tensors(&mut r, &mut state.v)?;
            state.step = r.u64()?;
            state.skipped = r.u64()?;
            Some(state)
        } else {
            None
        };
        let step = r.u64()?;
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.pos
            )));
        }
        Ok(Self {
            config,
            params,
            optimizer,
            step,
            token_table,
            ngram_vocab,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        Self::from_bytes(&bytes)
    }
}
