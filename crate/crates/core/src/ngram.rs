//! N-gram vocabulary harvesting, per-sequence matching, and the
//! row-normalized position matrix that aligns gram slots with token
//! positions.
//!
//! Grams are contiguous token windows of length 2..=n_max taken over the
//! merged token sequence (they may cross family-word boundaries). The
//! position matrix is N tokens by M gram slots; entry (i, j) starts as
//! the corpus frequency of the gram in slot j wherever token i lies
//! inside one of its occurrence spans, then rows are normalized to sum
//! to one (all-zero rows stay zero).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::compound::UcwSequence;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Epsilon in the row-normalization denominator.
pub const NORMALIZE_EPSILON: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramEntry {
    /// Token ids into the vocab's own token table.
    pub tokens: Vec<u32>,
    pub freq: u64,
}

/// Frequency-filtered gram table. Gram ids are assigned by descending
/// corpus frequency, ties by first occurrence in corpus scan order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramVocab {
    tokens: Vec<String>,
    token_ids: HashMap<String, u32>,
    entries: Vec<NgramEntry>,
    lookup: HashMap<Vec<u32>, u32>,
    pub n_max: usize,
    pub min_freq: u64,
}

impl NgramVocab {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, gram_id: u32) -> &NgramEntry {
        &self.entries[gram_id as usize]
    }

    pub fn freq(&self, gram_id: u32) -> u64 {
        self.entries[gram_id as usize].freq
    }

    pub fn entries(&self) -> &[NgramEntry] {
        &self.entries
    }

    pub fn token_text(&self, token_id: u32) -> &str {
        &self.tokens[token_id as usize]
    }

    /// The vocab's own token table (gram entries index into it).
    pub fn token_texts(&self) -> &[String] {
        &self.tokens
    }

    /// Reassemble a vocab from its serialized pieces.
    pub fn from_parts(
        tokens: Vec<String>,
        entries: Vec<NgramEntry>,
        n_max: usize,
        min_freq: u64,
    ) -> Self {
        Self::build(tokens, entries, n_max, min_freq)
    }

    pub fn gram_text(&self, gram_id: u32) -> String {
        self.entries[gram_id as usize]
            .tokens
            .iter()
            .map(|&t| self.token_text(t))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn token_id(&self, text: &str) -> Option<u32> {
        self.token_ids.get(text).copied()
    }

    fn build(
        tokens: Vec<String>,
        entries: Vec<NgramEntry>,
        n_max: usize,
        min_freq: u64,
    ) -> Self {
        let token_ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        let lookup = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.tokens.clone(), i as u32))
            .collect();
        Self {
            tokens,
            token_ids,
            entries,
            lookup,
            n_max,
            min_freq,
        }
    }
}

/// Harvest bookkeeping: how many distinct grams were seen vs kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarvestStats {
    pub distinct: usize,
    pub kept: usize,
    pub discarded: usize,
}

/// Count every contiguous window of length 2..=n_max across the corpus,
/// drop grams below `min_freq`, and order the survivors by descending
/// frequency (ties by first occurrence).
pub fn harvest_ngrams(
    corpus: &[UcwSequence],
    n_max: usize,
    min_freq: u64,
) -> Result<NgramVocab> {
    harvest_ngrams_with_stats(corpus, n_max, min_freq).map(|(vocab, _)| vocab)
}

/// [`harvest_ngrams`] plus kept/discarded counts.
pub fn harvest_ngrams_with_stats(
    corpus: &[UcwSequence],
    n_max: usize,
    min_freq: u64,
) -> Result<(NgramVocab, HarvestStats)> {
    if n_max < 2 {
        return Err(Error::Config(format!(
            "n_max must be at least 2, got {n_max}"
        )));
    }

    let mut tokens: Vec<String> = Vec::new();
    let mut token_ids: HashMap<String, u32> = HashMap::new();
    let mut intern = |text: &str, tokens: &mut Vec<String>| -> u32 {
        if let Some(&id) = token_ids.get(text) {
            return id;
        }
        let id = tokens.len() as u32;
        tokens.push(text.to_string());
        token_ids.insert(text.to_string(), id);
        id
    };

    // gram -> (count, first occurrence (seq, start, len)).
    let mut counts: HashMap<Vec<u32>, (u64, (usize, usize, usize))> = HashMap::new();
    for (seq_idx, seq) in corpus.iter().enumerate() {
        let ids: Vec<u32> = seq
            .tokens
            .iter()
            .map(|t| intern(t, &mut tokens))
            .collect();
        for len in 2..=n_max {
            if ids.len() < len {
                continue;
            }
            for start in 0..=ids.len() - len {
                let gram = ids[start..start + len].to_vec();
                let slot = counts
                    .entry(gram)
                    .or_insert((0, (seq_idx, start, len)));
                slot.0 += 1;
            }
        }
    }

    let distinct = counts.len();
    let mut kept: Vec<(Vec<u32>, u64, (usize, usize, usize))> = counts
        .into_iter()
        .filter(|&(_, (count, _))| count >= min_freq)
        .map(|(gram, (count, first))| (gram, count, first))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let stats = HarvestStats {
        distinct,
        kept: kept.len(),
        discarded: distinct - kept.len(),
    };
    let entries = kept
        .into_iter()
        .map(|(gram, freq, _)| NgramEntry { tokens: gram, freq })
        .collect();
    Ok((NgramVocab::build(tokens, entries, n_max, min_freq), stats))
}

/// One occurrence of a vocabulary gram inside a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NgramMatch {
    pub gram_id: u32,
    pub start: usize,
    pub length: usize,
}

/// Find all vocabulary grams in a sequence. Distinct grams are ranked by
/// corpus frequency (ties by earlier first occurrence in the sequence);
/// grams past rank `max_grams` are dropped; each retained gram keeps all
/// of its occurrence spans. Matches come back grouped by gram in rank
/// order, spans ascending.
pub fn match_sequence(
    seq: &UcwSequence,
    vocab: &NgramVocab,
    max_grams: usize,
) -> Vec<NgramMatch> {
    // Tokens absent from the vocab's table can never start or extend a
    // gram, so map them to a sentinel.
    let ids: Vec<Option<u32>> = seq.tokens.iter().map(|t| vocab.token_id(t)).collect();

    // gram_id -> spans, plus first occurrence for rank tie-breaks.
    let mut found: HashMap<u32, Vec<(usize, usize)>> = HashMap::new();
    let mut first_start: HashMap<u32, usize> = HashMap::new();
    for len in 2..=vocab.n_max {
        if ids.len() < len {
            continue;
        }
        'windows: for start in 0..=ids.len() - len {
            let mut gram = Vec::with_capacity(len);
            for id in &ids[start..start + len] {
                match id {
                    Some(t) => gram.push(*t),
                    None => continue 'windows,
                }
            }
            if let Some(&gram_id) = vocab.lookup.get(&gram) {
                found.entry(gram_id).or_default().push((start, len));
                first_start.entry(gram_id).or_insert(start);
            }
        }
    }

    let mut ranked: Vec<u32> = found.keys().copied().collect();
    ranked.sort_by(|&a, &b| {
        vocab
            .freq(b)
            .cmp(&vocab.freq(a))
            .then(first_start[&a].cmp(&first_start[&b]))
            .then(a.cmp(&b))
    });
    ranked.truncate(max_grams);

    let mut matches = Vec::new();
    for gram_id in ranked {
        let mut spans = found.remove(&gram_id).expect("ranked gram was found");
        spans.sort_unstable();
        for (start, length) in spans {
            matches.push(NgramMatch {
                gram_id,
                start,
                length,
            });
        }
    }
    matches
}

/// Gram ids in slot order (first appearance order within `matches`).
pub fn slot_gram_ids(matches: &[NgramMatch]) -> Vec<u32> {
    let mut slots = Vec::new();
    for m in matches {
        if slots.last() != Some(&m.gram_id) && !slots.contains(&m.gram_id) {
            slots.push(m.gram_id);
        }
    }
    slots
}

/// The N-by-M token/gram alignment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMatrix<S> {
    pub weights: Matrix<S>,
}

impl<S: Scalar> PositionMatrix<S> {
    pub fn zeros(seq_len: usize, max_grams: usize) -> Self {
        Self {
            weights: Matrix::zeros(seq_len, max_grams),
        }
    }

    pub fn seq_len(&self) -> usize {
        self.weights.rows()
    }

    pub fn max_grams(&self) -> usize {
        self.weights.cols()
    }

    /// Sparse `(row, col, weight)` triplet serialization, one per line.
    pub fn to_sparse_triplets(&self) -> String {
        let mut out = String::new();
        for i in 0..self.weights.rows() {
            for j in 0..self.weights.cols() {
                let w = self.weights.get(i, j);
                if w != S::zero() {
                    out.push_str(&format!("({i}, {j}, {w})\n"));
                }
            }
        }
        out
    }

    /// Parse the triplet form back into a dense matrix.
    pub fn from_sparse_triplets(seq_len: usize, max_grams: usize, text: &str) -> Result<Self> {
        let mut pm = Self::zeros(seq_len, max_grams);
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let inner = line
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| Error::CorpusParse {
                    path: "sparse-matrix".into(),
                    line: idx + 1,
                    column: 1,
                    reason: format!("expected (row, col, weight), got {line:?}"),
                })?;
            let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(Error::CorpusParse {
                    path: "sparse-matrix".into(),
                    line: idx + 1,
                    column: 1,
                    reason: format!("expected three fields, got {line:?}"),
                });
            }
            let (i, j): (usize, usize) = match (parts[0].parse(), parts[1].parse()) {
                (Ok(i), Ok(j)) => (i, j),
                _ => {
                    return Err(Error::CorpusParse {
                        path: "sparse-matrix".into(),
                        line: idx + 1,
                        column: 1,
                        reason: format!("bad indices in {line:?}"),
                    })
                }
            };
            let w: f64 = parts[2].parse().map_err(|_| Error::CorpusParse {
                path: "sparse-matrix".into(),
                line: idx + 1,
                column: 1,
                reason: format!("bad weight in {line:?}"),
            })?;
            if i >= seq_len || j >= max_grams {
                return Err(Error::Shape {
                    expected: format!("indices within {seq_len}x{max_grams}"),
                    got: format!("({i}, {j})"),
                });
            }
            pm.weights.set(i, j, S::of(w));
        }
        Ok(pm)
    }
}

/// Raw position matrix: weight (i, j) is the corpus frequency of the
/// slot-j gram for every token position i covered by one of its spans.
pub fn build_position_matrix<S: Scalar>(
    matches: &[NgramMatch],
    vocab: &NgramVocab,
    seq_len: usize,
    max_grams: usize,
) -> Result<PositionMatrix<S>> {
    let slots = slot_gram_ids(matches);
    if slots.len() > max_grams {
        return Err(Error::Shape {
            expected: format!("at most {max_grams} gram slots"),
            got: format!("{}", slots.len()),
        });
    }
    let mut pm = PositionMatrix::zeros(seq_len, max_grams);
    for m in matches {
        if m.start + m.length > seq_len {
            return Err(Error::Shape {
                expected: format!("span within sequence length {seq_len}"),
                got: format!("{}..{}", m.start, m.start + m.length),
            });
        }
        let slot = slots
            .iter()
            .position(|&g| g == m.gram_id)
            .expect("match gram has a slot");
        let freq = S::of(vocab.freq(m.gram_id) as f64);
        for i in m.start..m.start + m.length {
            pm.weights.set(i, slot, freq);
        }
    }
    Ok(pm)
}

/// Divide each row by (row sum + epsilon); all-zero rows stay zero.
pub fn normalize_rows<S: Scalar>(mut pm: PositionMatrix<S>) -> PositionMatrix<S> {
    let eps = S::of(NORMALIZE_EPSILON);
    for i in 0..pm.weights.rows() {
        let row = pm.weights.row_mut(i);
        let sum: S = row.iter().copied().sum();
        let denom = sum + eps;
        for w in row {
            *w /= denom;
        }
    }
    pm
}

/// Render the gram table file: header, then one gram per line.
pub fn write_ngram_vocab_string(vocab: &NgramVocab) -> String {
    let mut out = format!(
        "ngram-vocab v1 n_max={} min_freq={}\n",
        vocab.n_max, vocab.min_freq
    );
    for (gram_id, entry) in vocab.entries.iter().enumerate() {
        out.push_str(&format!(
            "{gram_id}\t{}\t{}\n",
            entry.freq,
            vocab.gram_text(gram_id as u32)
        ));
    }
    out
}

pub fn write_ngram_vocab_file(vocab: &NgramVocab, path: &Path) -> Result<()> {
    fs::write(path, write_ngram_vocab_string(vocab))?;
    Ok(())
}

pub fn parse_ngram_vocab_str(origin: &str, text: &str) -> Result<NgramVocab> {
    let fail = |line: usize, reason: String| Error::CorpusParse {
        path: origin.to_string(),
        line,
        column: 1,
        reason,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| fail(1, "empty ngram vocab file".into()))?;
    let rest = header
        .strip_prefix("ngram-vocab v1 n_max=")
        .ok_or_else(|| fail(1, format!("bad header {header:?}")))?;
    let (n_max_str, min_freq_str) = rest
        .split_once(" min_freq=")
        .ok_or_else(|| fail(1, format!("bad header {header:?}")))?;
    let n_max: usize = n_max_str
        .parse()
        .map_err(|_| fail(1, format!("bad n_max {n_max_str:?}")))?;
    let min_freq: u64 = min_freq_str
        .trim()
        .parse()
        .map_err(|_| fail(1, format!("bad min_freq {min_freq_str:?}")))?;

    let mut tokens: Vec<String> = Vec::new();
    let mut ids: HashMap<String, u32> = HashMap::new();
    let mut entries: Vec<NgramEntry> = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(fail(
                idx + 1,
                format!("expected gram_id\\tfreq\\ttokens, got {line:?}"),
            ));
        }
        let gram_id: usize = parts[0]
            .parse()
            .map_err(|_| fail(idx + 1, format!("bad gram id {:?}", parts[0])))?;
        if gram_id != entries.len() {
            return Err(fail(
                idx + 1,
                format!("gram id {gram_id} out of order (expected {})", entries.len()),
            ));
        }
        let freq: u64 = parts[1]
            .parse()
            .map_err(|_| fail(idx + 1, format!("bad frequency {:?}", parts[1])))?;
        let gram_tokens: Vec<u32> = parts[2]
            .split(' ')
            .filter(|t| !t.is_empty())
            .map(|t| {
                if let Some(&id) = ids.get(t) {
                    id
                } else {
                    let id = tokens.len() as u32;
                    tokens.push(t.to_string());
                    ids.insert(t.to_string(), id);
                    id
                }
            })
            .collect();
        if gram_tokens.len() < 2 || gram_tokens.len() > n_max {
            return Err(fail(
                idx + 1,
                format!("gram length {} outside 2..={n_max}", gram_tokens.len()),
            ));
        }
        entries.push(NgramEntry {
            tokens: gram_tokens,
            freq,
        });
    }
    Ok(NgramVocab::build(tokens, entries, n_max, min_freq))
}

pub fn read_ngram_vocab_file(path: &Path) -> Result<NgramVocab> {
    let text = fs::read_to_string(path)?;
    parse_ngram_vocab_str(&path.display().to_string(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compound::Family;

    fn seq(tokens: &[&str]) -> UcwSequence {
        UcwSequence {
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            families: vec![Family::Note; tokens.len()],
            source_id: "test".into(),
        }
    }

    #[test]
    fn harvest_ababab() {
        let corpus = vec![seq(&["a", "b", "a", "b", "a", "b"])];
        let vocab = harvest_ngrams(&corpus, 2, 2).unwrap();
        assert_eq!(vocab.len(), 2);
        assert_eq!(vocab.gram_text(0), "a b");
        assert_eq!(vocab.freq(0), 3);
        assert_eq!(vocab.gram_text(1), "b a");
        assert_eq!(vocab.freq(1), 2);
    }

    #[test]
    fn min_freq_above_all_counts_empties_the_vocab() {
        let corpus = vec![seq(&["a", "b", "a", "b"])];
        let vocab = harvest_ngrams(&corpus, 4, 100).unwrap();
        assert!(vocab.is_empty());
    }

    #[test]
    fn n_max_below_two_is_a_config_error() {
        let corpus = vec![seq(&["a", "b"])];
        assert!(matches!(
            harvest_ngrams(&corpus, 1, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn harvest_matches_naive_recount() {
        // Independent quadratic scan over a small mixed corpus.
        let corpus = vec![
            seq(&["a", "b", "c", "a", "b", "c", "a", "b"]),
            seq(&["b", "c", "a", "b", "c"]),
        ];
        let n_max = 4;
        let vocab = harvest_ngrams(&corpus, n_max, 1).unwrap();
        let mut naive: HashMap<Vec<String>, u64> = HashMap::new();
        for s in &corpus {
            for len in 2..=n_max {
                for start in 0..s.tokens.len().saturating_sub(len - 1) {
                    *naive
                        .entry(s.tokens[start..start + len].to_vec())
                        .or_insert(0) += 1;
                }
            }
        }
        assert_eq!(vocab.len(), naive.len());
        for gram_id in 0..vocab.len() as u32 {
            let texts: Vec<String> = vocab
                .entry(gram_id)
                .tokens
                .iter()
                .map(|&t| vocab.token_text(t).to_string())
                .collect();
            assert_eq!(vocab.freq(gram_id), naive[&texts]);
        }
    }

    #[test]
    fn gram_ids_rank_by_frequency() {
        let corpus = vec![seq(&["a", "b", "a", "b", "c", "a", "b"])];
        let vocab = harvest_ngrams(&corpus, 2, 1).unwrap();
        let freqs: Vec<u64> = (0..vocab.len() as u32).map(|g| vocab.freq(g)).collect();
        for pair in freqs.windows(2) {
            assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn match_empty_when_no_vocab_gram_occurs() {
        let corpus = vec![seq(&["a", "b", "a", "b"])];
        let vocab = harvest_ngrams(&corpus, 2, 2).unwrap();
        let other = seq(&["x", "y", "z"]);
        assert!(match_sequence(&other, &vocab, 8).is_empty());
    }

    #[test]
    fn match_ranking_keeps_the_most_frequent_gram() {
        // Vocab from a corpus where (b,c) is more frequent than (a,b).
        let corpus = vec![
            seq(&["b", "c", "b", "c", "b", "c", "a", "b", "c"]),
            seq(&["a", "b", "x", "b", "c"]),
        ];
        let vocab = harvest_ngrams(&corpus, 2, 2).unwrap();
        let target = seq(&["a", "b", "c"]);
        let matches = match_sequence(&target, &vocab, 1);
        assert_eq!(matches.len(), 1);
        assert_eq!(vocab.gram_text(matches[0].gram_id), "b c");
        assert_eq!(matches[0].start, 1);
    }

    #[test]
    fn repeated_gram_keeps_one_slot_with_all_spans() {
        let corpus = vec![seq(&["a", "b", "a", "b"])];
        let vocab = harvest_ngrams(&corpus, 2, 2).unwrap();
        let target = seq(&["a", "b", "x", "a", "b"]);
        let matches = match_sequence(&target, &vocab, 8);
        let ab: Vec<&NgramMatch> = matches
            .iter()
            .filter(|m| vocab.gram_text(m.gram_id) == "a b")
            .collect();
        assert_eq!(ab.len(), 2);
        assert_eq!(slot_gram_ids(&matches).len(), 1);
        assert_eq!((ab[0].start, ab[1].start), (0, 3));
    }

    #[test]
    fn position_matrix_follows_spans() {
        let corpus = vec![seq(&["a", "b", "c", "a", "b", "c", "a", "b", "c"])];
        let vocab = harvest_ngrams(&corpus, 3, 2).unwrap();
        let target = seq(&["a", "b", "c", "x"]);
        let matches = match_sequence(&target, &vocab, 8);
        let pm = build_position_matrix::<f64>(&matches, &vocab, 4, 8).unwrap();
        // Token 3 ("x") is covered by nothing.
        assert!(pm.weights.row(3).iter().all(|&w| w == 0.0));
        // Token 0 is covered by grams starting at 0.
        assert!(pm.weights.row(0).iter().any(|&w| w > 0.0));
    }

    #[test]
    fn no_matches_give_all_zero_matrix() {
        let corpus = vec![seq(&["a", "b", "a", "b"])];
        let vocab = harvest_ngrams(&corpus, 2, 2).unwrap();
        let pm = build_position_matrix::<f64>(&[], &vocab, 5, 4).unwrap();
        assert!(pm.weights.data().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn raw_weights_are_frequencies() {
        // Token 4 covered by gram A (freq 3) and gram B (freq 1).
        let corpus = vec![seq(&["p", "q", "p", "q", "p", "q", "r", "s"])];
        let vocab = harvest_ngrams(&corpus, 2, 1).unwrap();
        let target = seq(&["x", "x", "x", "p", "q", "r", "s"]);
        let matches = match_sequence(&target, &vocab, 8);
        let pm = build_position_matrix::<f64>(&matches, &vocab, 7, 8).unwrap();
        let row = pm.weights.row(4); // "q": inside (p,q) freq 3 and (q,r) freq 1
        let mut nonzero: Vec<f64> = row.iter().copied().filter(|&w| w > 0.0).collect();
        nonzero.sort_by(f64::total_cmp);
        assert_eq!(nonzero, vec![1.0, 3.0]);
    }

    #[test]
    fn long_gram_covers_all_its_rows() {
        let corpus = vec![seq(&["a", "b", "c", "a", "b", "c"])];
        let vocab = harvest_ngrams(&corpus, 3, 2).unwrap();
        let target = seq(&["a", "b", "c"]);
        let matches = match_sequence(&target, &vocab, 8);
        let slots = slot_gram_ids(&matches);
        let pm = build_position_matrix::<f64>(&matches, &vocab, 3, 8).unwrap();
        // The length-3 gram (freq 2) paints frequency 2 on rows 0..3 of
        // its own column.
        let trigram_slot = slots
            .iter()
            .position(|&g| vocab.gram_text(g) == "a b c")
            .unwrap();
        for i in 0..3 {
            assert_eq!(pm.weights.get(i, trigram_slot), 2.0);
        }
    }

    #[test]
    fn normalize_rows_hand_arithmetic() {
        let mut pm = PositionMatrix::<f64>::zeros(3, 4);
        pm.weights.set(0, 0, 3.0);
        pm.weights.set(0, 1, 1.0);
        pm.weights.set(2, 2, 7.0);
        let pm = normalize_rows(pm);
        assert!((pm.weights.get(0, 0) - 0.75).abs() < 1e-9);
        assert!((pm.weights.get(0, 1) - 0.25).abs() < 1e-9);
        // All-zero row stays zero.
        assert!(pm.weights.row(1).iter().all(|&w| w == 0.0));
        // Single-entry row lands within 1e-9 of one.
        assert!((pm.weights.get(2, 2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_triplets_round_trip() {
        let mut pm = PositionMatrix::<f64>::zeros(4, 3);
        pm.weights.set(1, 2, 0.5);
        pm.weights.set(3, 0, 0.25);
        let text = pm.to_sparse_triplets();
        let back = PositionMatrix::<f64>::from_sparse_triplets(4, 3, &text).unwrap();
        assert_eq!(back, pm);
    }

    #[test]
    fn ngram_vocab_file_round_trip() {
        let corpus = vec![seq(&["a", "b", "c", "a", "b", "c", "a", "b"])];
        let vocab = harvest_ngrams(&corpus, 3, 2).unwrap();
        let text = write_ngram_vocab_string(&vocab);
        assert!(text.starts_with("ngram-vocab v1 n_max=3 min_freq=2\n"));
        let loaded = parse_ngram_vocab_str("mem", &text).unwrap();
        assert_eq!(loaded.len(), vocab.len());
        for g in 0..vocab.len() as u32 {
            assert_eq!(loaded.freq(g), vocab.freq(g));
            assert_eq!(loaded.gram_text(g), vocab.gram_text(g));
        }
    }
}
