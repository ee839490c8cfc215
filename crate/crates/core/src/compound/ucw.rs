//! Merge-rule learning and greedy segmentation.
//!
//! Training counts adjacent token pairs inside family words (never across
//! word boundaries), repeatedly fuses the most frequent pair into a new
//! token, and stops at the target vocabulary size or when no pair occurs
//! twice. Segmentation replays the learned rules in rank order, which
//! reproduces the trainer's final corpus state exactly.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::compound::{group_families, Family};
use crate::error::{Error, Result};
use crate::remi::{check_grammar, parse_event_name, RemiSequence, MERGE_JOINER};

/// One learned fusion of two adjacent tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeRule {
    pub rank: u32,
    pub left: String,
    pub right: String,
    pub merged: String,
}

impl MergeRule {
    pub fn new(rank: u32, left: impl Into<String>, right: impl Into<String>) -> Self {
        let left = left.into();
        let right = right.into();
        let merged = format!("{left}{MERGE_JOINER}{right}");
        Self {
            rank,
            left,
            right,
            merged,
        }
    }
}

/// Base event names plus the ordered merge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UcwVocab {
    pub base: BTreeSet<String>,
    pub merges: Vec<MergeRule>,
    pub target_size: usize,
}

impl UcwVocab {
    pub fn size(&self) -> usize {
        self.base.len() + self.merges.len()
    }
}

/// A segmented sequence: merged token texts with per-token family tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UcwSequence {
    pub tokens: Vec<String>,
    pub families: Vec<Family>,
    pub source_id: String,
}

impl UcwSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Base event names recovered by splitting every token on the joiner.
    pub fn split_tokens(&self) -> Vec<String> {
        self.tokens
            .iter()
            .flat_map(|t| t.split(MERGE_JOINER).map(str::to_string))
            .collect()
    }

    pub fn render_line(&self) -> String {
        self.tokens.join(" ")
    }
}

/// How segmentation treats event names outside the vocabulary base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnknownTokenPolicy {
    /// Fail with [`Error::UnknownToken`].
    #[default]
    Error,
    /// Keep the name as an unmerged token.
    PassThrough,
}

/// Count adjacent in-word pairs across a corpus of tokenized words.
/// Pairs never span word boundaries.
pub fn count_pairs(corpus: &[Vec<Vec<String>>]) -> HashMap<(String, String), u64> {
    let mut counts = HashMap::new();
    for sequence in corpus {
        for word in sequence {
            for pair in word.windows(2) {
                *counts
                    .entry((pair[0].clone(), pair[1].clone()))
                    .or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Everything the trainer produces: the vocabulary, the corpus in its
/// final merged state, and the total token count after each merge
/// (index 0 is the pre-merge count).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub vocab: UcwVocab,
    pub corpus_state: Vec<UcwSequence>,
    pub length_trace: Vec<usize>,
}

struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn new() -> Self {
        Self {
            names: Vec::new(),
            ids: HashMap::new(),
        }
    }

    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }
}

type Pair = (u32, u32);
type Loc = (u32, u32); // (sequence index, word index)

struct TrainerState {
    /// Per sequence: words as interned token ids, with the word's family.
    words: Vec<Vec<(Family, Vec<u32>)>>,
    source_ids: Vec<String>,
    counts: HashMap<Pair, u64>,
    occurrences: HashMap<Pair, BTreeSet<Loc>>,
    total_tokens: usize,
}

impl TrainerState {
    fn add_word_windows(&mut self, loc: Loc) {
        let word = &self.words[loc.0 as usize][loc.1 as usize].1;
        let mut distinct: BTreeSet<Pair> = BTreeSet::new();
        for w in word.windows(2) {
            let pair = (w[0], w[1]);
            *self.counts.entry(pair).or_insert(0) += 1;
            distinct.insert(pair);
        }
        for pair in distinct {
            self.occurrences.entry(pair).or_default().insert(loc);
        }
    }

    fn remove_word_windows(&mut self, loc: Loc) {
        let word = self.words[loc.0 as usize][loc.1 as usize].1.clone();
        let mut distinct: BTreeSet<Pair> = BTreeSet::new();
        for w in word.windows(2) {
            let pair = (w[0], w[1]);
            let count = self.counts.get_mut(&pair).expect("counted pair");
            *count -= 1;
            if *count == 0 {
                self.counts.remove(&pair);
            }
            distinct.insert(pair);
        }
        for pair in distinct {
            if let Some(set) = self.occurrences.get_mut(&pair) {
                set.remove(&loc);
                if set.is_empty() {
                    self.occurrences.remove(&pair);
                }
            }
        }
    }

    /// The most frequent pair with frequency >= 2; ties go to the pair
    /// whose first occurrence comes earliest in corpus scan order.
    fn select_best(&self) -> Option<Pair> {
        let best_count = self.counts.values().copied().max()?;
        if best_count < 2 {
            return None;
        }
        let candidates: Vec<Pair> = self
            .counts
            .iter()
            .filter(|&(_, &c)| c == best_count)
            .map(|(&p, _)| p)
            .collect();
        if candidates.len() == 1 {
            return Some(candidates[0]);
        }
        let earliest = candidates
            .iter()
            .map(|p| {
                *self.occurrences[p]
                    .first()
                    .expect("counted pair has a location")
            })
            .min()
            .expect("candidates non-empty");
        let finalists: Vec<Pair> = candidates
            .into_iter()
            .filter(|p| *self.occurrences[p].first().expect("location") == earliest)
            .collect();
        if finalists.len() == 1 {
            return Some(finalists[0]);
        }
        // Several tied pairs first occur in the same word: scan it.
        let word = &self.words[earliest.0 as usize][earliest.1 as usize].1;
        word.windows(2)
            .map(|w| (w[0], w[1]))
            .find(|p| finalists.contains(p))
    }

    fn apply_merge(&mut self, pair: Pair, new_id: u32) {
        let locs = self
            .occurrences
            .get(&pair)
            .cloned()
            .unwrap_or_default();
        for loc in locs {
            self.remove_word_windows(loc);
            let word = &mut self.words[loc.0 as usize][loc.1 as usize].1;
            let before = word.len();
            *word = replace_pair(word, pair, new_id);
            self.total_tokens -= before - word.len();
            self.add_word_windows(loc);
        }
    }
}

/// Left-to-right, non-overlapping replacement of `pair` with `new_id`.
fn replace_pair(word: &[u32], pair: Pair, new_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(word.len());
    let mut i = 0;
    while i < word.len() {
        if i + 1 < word.len() && word[i] == pair.0 && word[i + 1] == pair.1 {
            out.push(new_id);
            i += 2;
        } else {
            out.push(word[i]);
            i += 1;
        }
    }
    out
}

/// Learn a merge vocabulary from a grammar-valid corpus.
pub fn train_ucw(corpus: &[RemiSequence], target_vocab_size: usize) -> Result<TrainOutcome> {
    let mut interner = Interner::new();
    let mut state = TrainerState {
        words: Vec::with_capacity(corpus.len()),
        source_ids: Vec::with_capacity(corpus.len()),
        counts: HashMap::new(),
        occurrences: HashMap::new(),
        total_tokens: 0,
    };
    let mut base: BTreeSet<String> = BTreeSet::new();

    for seq in corpus {
        check_grammar(&seq.events).map_err(|e| match e {
            Error::Grammar { index, reason } => Error::Grammar {
                index,
                reason: format!("{reason} (in {})", seq.source_id),
            },
            other => other,
        })?;
        let words: Vec<(Family, Vec<u32>)> = group_families(seq)
            .into_iter()
            .map(|w| {
                let ids = w
                    .events
                    .iter()
                    .map(|e| {
                        let name = e.render();
                        base.insert(name.clone());
                        interner.intern(&name)
                    })
                    .collect::<Vec<u32>>();
                (w.family, ids)
            })
            .collect();
        state.total_tokens += words.iter().map(|(_, w)| w.len()).sum::<usize>();
        state.words.push(words);
        state.source_ids.push(seq.source_id.clone());
    }

    if target_vocab_size < base.len() {
        return Err(Error::Config(format!(
            "target vocab size {target_vocab_size} is below the {} base event names",
            base.len()
        )));
    }

    for seq_idx in 0..state.words.len() {
        for word_idx in 0..state.words[seq_idx].len() {
            state.add_word_windows((seq_idx as u32, word_idx as u32));
        }
    }

    let mut merges: Vec<MergeRule> = Vec::new();
    let mut length_trace = vec![state.total_tokens];
    while base.len() + merges.len() < target_vocab_size {
        let Some(pair) = state.select_best() else {
            break;
        };
        let rule = MergeRule::new(
            merges.len() as u32,
            interner.name(pair.0),
            interner.name(pair.1),
        );
        let new_id = interner.intern(&rule.merged);
        state.apply_merge(pair, new_id);
        merges.push(rule);
        length_trace.push(state.total_tokens);
    }

    let corpus_state = state
        .words
        .iter()
        .zip(&state.source_ids)
        .map(|(words, source_id)| {
            let mut tokens = Vec::new();
            let mut families = Vec::new();
            for (family, word) in words {
                for &id in word {
                    tokens.push(interner.name(id).to_string());
                    families.push(*family);
                }
            }
            UcwSequence {
                tokens,
                families,
                source_id: source_id.clone(),
            }
        })
        .collect();

    Ok(TrainOutcome {
        vocab: UcwVocab {
            base,
            merges,
            target_size: target_vocab_size,
        },
        corpus_state,
        length_trace,
    })
}

/// Segment one sequence with a trained vocabulary: group into family
/// words, then apply every merge rule in rank order within each word.
pub fn segment(
    seq: &RemiSequence,
    vocab: &UcwVocab,
    policy: UnknownTokenPolicy,
) -> Result<UcwSequence> {
    check_grammar(&seq.events)?;
    let mut words: Vec<(Family, Vec<String>)> = group_families(seq)
        .into_iter()
        .map(|w| (w.family, w.token_texts()))
        .collect();

    if policy == UnknownTokenPolicy::Error {
        for (_, word) in &words {
            for token in word {
                if !vocab.base.contains(token) {
                    return Err(Error::UnknownToken {
                        token: token.clone(),
                        source_id: seq.source_id.clone(),
                    });
                }
            }
        }
    }

    for rule in &vocab.merges {
        for (_, word) in &mut words {
            if word.len() < 2 {
                continue;
            }
            let mut out = Vec::with_capacity(word.len());
            let mut i = 0;
            while i < word.len() {
                if i + 1 < word.len() && word[i] == rule.left && word[i + 1] == rule.right {
                    out.push(rule.merged.clone());
                    i += 2;
                } else {
                    out.push(std::mem::take(&mut word[i]));
                    i += 1;
                }
            }
            *word = out;
        }
    }

    let mut tokens = Vec::new();
    let mut families = Vec::new();
    for (family, word) in words {
        for token in word {
            tokens.push(token);
            families.push(family);
        }
    }
    Ok(UcwSequence {
        tokens,
        families,
        source_id: seq.source_id.clone(),
    })
}

/// Parse one line of a segmented corpus: space-separated tokens whose
/// joiner-split components are valid, same-family event names.
fn parse_segmented_line(
    origin: &str,
    line_no: usize,
    line: &str,
) -> Result<UcwSequence> {
    let mut tokens = Vec::new();
    let mut families = Vec::new();
    let mut column = 1usize;
    for token in line.split(' ') {
        if !token.is_empty() {
            let mut family: Option<Family> = None;
            for part in token.split(MERGE_JOINER) {
                let event = parse_event_name(part).map_err(|reason| Error::CorpusParse {
                    path: origin.to_string(),
                    line: line_no,
                    column,
                    reason,
                })?;
                let f = Family::of(event.kind());
                if family.is_some_and(|prev| prev != f) {
                    return Err(Error::CorpusParse {
                        path: origin.to_string(),
                        line: line_no,
                        column,
                        reason: format!("token {token:?} mixes families"),
                    });
                }
                family = Some(f);
            }
            tokens.push(token.to_string());
            families.push(family.expect("token has at least one part"));
        }
        column += token.chars().count() + 1;
    }
    Ok(UcwSequence {
        tokens,
        families,
        source_id: format!("{origin}:{line_no}"),
    })
}

/// Read a segmented corpus (one sequence per line, tokens with joiners).
pub fn read_segmented_corpus_str(origin: &str, text: &str) -> Result<Vec<UcwSequence>> {
    text.lines()
        .enumerate()
        .map(|(idx, line)| parse_segmented_line(origin, idx + 1, line))
        .collect()
}

pub fn read_segmented_corpus(path: &Path) -> Result<Vec<UcwSequence>> {
    let text = fs::read_to_string(path)?;
    read_segmented_corpus_str(&path.display().to_string(), &text)
}

pub fn write_segmented_corpus_string(sequences: &[UcwSequence]) -> String {
    let mut out = String::new();
    for seq in sequences {
        out.push_str(&seq.render_line());
        out.push('\n');
    }
    out
}

pub fn write_segmented_corpus(sequences: &[UcwSequence], path: &Path) -> Result<()> {
    fs::write(path, write_segmented_corpus_string(sequences))?;
    Ok(())
}

/// Render the vocabulary file: a header line, then one merge per line.
pub fn write_vocab_string(vocab: &UcwVocab) -> String {
    let mut out = format!("ucw-vocab v1 size={}\n", vocab.target_size);
    for rule in &vocab.merges {
        out.push_str(&format!("{}\t{}\t{}\n", rule.rank, rule.left, rule.right));
    }
    out
}

pub fn write_vocab_file(vocab: &UcwVocab, path: &Path) -> Result<()> {
    fs::write(path, write_vocab_string(vocab))?;
    Ok(())
}

/// Parse a vocabulary file. The file stores merges only, so the base set
/// of a loaded vocabulary holds just the names referenced by merge rules;
/// segment with [`UnknownTokenPolicy::PassThrough`] in that case.
pub fn parse_vocab_str(origin: &str, text: &str) -> Result<UcwVocab> {
    let fail = |line: usize, reason: String| Error::CorpusParse {
        path: origin.to_string(),
        line,
        column: 1,
        reason,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| fail(1, "empty vocab file".into()))?;
    let target_size: usize = header
        .strip_prefix("ucw-vocab v1 size=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| fail(1, format!("bad header {header:?}")))?;

    let mut merges: Vec<MergeRule> = Vec::new();
    let mut known: BTreeSet<String> = BTreeSet::new();
    let mut base: BTreeSet<String> = BTreeSet::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(fail(idx + 1, format!("expected rank\\tleft\\tright, got {line:?}")));
        }
        let rank: u32 = parts[0]
            .parse()
            .map_err(|_| fail(idx + 1, format!("bad rank {:?}", parts[0])))?;
        if rank as usize != merges.len() {
            return Err(fail(
                idx + 1,
                format!("rank {rank} out of order (expected {})", merges.len()),
            ));
        }
        for side in [parts[1], parts[2]] {
            if side.contains(MERGE_JOINER) {
                if !known.contains(side) {
                    return Err(fail(
                        idx + 1,
                        format!("token {side:?} references a merge not yet defined"),
                    ));
                }
            } else {
                parse_event_name(side).map_err(|reason| fail(idx + 1, reason))?;
                base.insert(side.to_string());
            }
        }
        let rule = MergeRule::new(rank, parts[1], parts[2]);
        known.insert(rule.merged.clone());
        merges.push(rule);
    }
    Ok(UcwVocab {
        base,
        merges,
        target_size,
    })
}

pub fn read_vocab_file(path: &Path) -> Result<UcwVocab> {
    let text = fs::read_to_string(path)?;
    parse_vocab_str(&path.display().to_string(), &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compound::tests::WALKTHROUGH;
    use crate::remi::read_text_corpus_str;

    fn walkthrough_corpus() -> Vec<RemiSequence> {
        read_text_corpus_str("walkthrough", WALKTHROUGH).unwrap()
    }

    fn grouped_texts(corpus: &[RemiSequence]) -> Vec<Vec<Vec<String>>> {
        corpus
            .iter()
            .map(|seq| {
                group_families(seq)
                    .into_iter()
                    .map(|w| w.token_texts())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn walkthrough_first_iteration_counts() {
        let counts = count_pairs(&grouped_texts(&walkthrough_corpus()));
        let get = |a: &str, b: &str| counts.get(&(a.into(), b.into())).copied().unwrap_or(0);
        assert_eq!(get("Pitch_71", "Duration_1080"), 2);
        assert_eq!(get("Duration_1560", "Velocity_90"), 2);
        assert_eq!(get("Duration_1080", "Velocity_90"), 1);
    }

    #[test]
    fn singleton_words_count_nothing() {
        let corpus = vec![vec![vec!["Bar".to_string()], vec!["Beat_0".to_string()]]];
        assert!(count_pairs(&corpus).is_empty());
    }

    #[test]
    fn counts_match_a_nested_loop_recount() {
        let corpus = crate::synth::random_remi_corpus(321, 4, 100, crate::remi::EventSet::Cp7);
        let grouped = grouped_texts(&corpus);
        let counts = count_pairs(&grouped);
        // Independent quadratic recount.
        let mut naive: HashMap<(String, String), u64> = HashMap::new();
        for sequence in &grouped {
            for word in sequence {
                for i in 0..word.len() {
                    for j in 0..word.len() {
                        if j == i + 1 {
                            *naive
                                .entry((word[i].clone(), word[j].clone()))
                                .or_insert(0) += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(counts, naive);
    }

    #[test]
    fn walkthrough_learns_two_merges_in_order() {
        let outcome = train_ucw(&walkthrough_corpus(), 1000).unwrap();
        let merges = &outcome.vocab.merges;
        assert_eq!(merges.len(), 2, "only two pairs reach frequency 2");
        assert_eq!(
            (merges[0].left.as_str(), merges[0].right.as_str()),
            ("Pitch_71", "Duration_1080")
        );
        assert_eq!(
            (merges[1].left.as_str(), merges[1].right.as_str()),
            ("Duration_1560", "Velocity_90")
        );
        assert_eq!(
            outcome.corpus_state[0].tokens,
            vec![
                "Bar",
                "Beat_0",
                "Tempo_119",
                "G_M",
                "Pitch_71+Duration_1080",
                "Velocity_90",
                "Pitch_69",
                "Duration_1560+Velocity_90",
                "Bar",
                "D_7",
                "Pitch_71+Duration_1080",
                "Velocity_88",
                "Pitch_73",
                "Duration_1560+Velocity_90",
            ]
        );
        // 18 events compress to 14 tokens.
        assert_eq!(outcome.length_trace, vec![18, 16, 14]);
    }

    #[test]
    fn distinct_pairs_learn_nothing() {
        let corpus = read_text_corpus_str("t", "Bar Beat_0 Pitch_60 Duration_480\n").unwrap();
        let outcome = train_ucw(&corpus, 1000).unwrap();
        assert!(outcome.vocab.merges.is_empty());
        assert_eq!(outcome.vocab.base.len(), 4);
    }

    #[test]
    fn target_below_base_is_a_config_error() {
        let corpus = walkthrough_corpus();
        assert!(matches!(
            train_ucw(&corpus, 3),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn target_size_caps_merge_count() {
        let corpus = walkthrough_corpus();
        // Base is 12 names; allow exactly one merge.
        let outcome = train_ucw(&corpus, 13).unwrap();
        assert_eq!(outcome.vocab.merges.len(), 1);
        assert_eq!(outcome.vocab.merges[0].left, "Pitch_71");
    }

    #[test]
    fn segment_with_empty_vocab_is_identity() {
        let corpus = walkthrough_corpus();
        let vocab = UcwVocab {
            base: corpus[0].events.iter().map(|e| e.render()).collect(),
            merges: Vec::new(),
            target_size: 100,
        };
        let seq = segment(&corpus[0], &vocab, UnknownTokenPolicy::Error).unwrap();
        assert_eq!(seq.len(), 18);
        assert_eq!(seq.split_tokens().len(), 18);
    }

    #[test]
    fn segment_reproduces_trainer_state_on_walkthrough() {
        let corpus = walkthrough_corpus();
        let outcome = train_ucw(&corpus, 1000).unwrap();
        let seq = segment(&corpus[0], &outcome.vocab, UnknownTokenPolicy::Error).unwrap();
        assert_eq!(seq.tokens, outcome.corpus_state[0].tokens);
        assert_eq!(seq.families, outcome.corpus_state[0].families);
    }

    #[test]
    fn segmentation_is_lossless() {
        let corpus = walkthrough_corpus();
        let outcome = train_ucw(&corpus, 1000).unwrap();
        let seq = segment(&corpus[0], &outcome.vocab, UnknownTokenPolicy::Error).unwrap();
        let originals: Vec<String> = corpus[0].events.iter().map(|e| e.render()).collect();
        assert_eq!(seq.split_tokens(), originals);
    }

    #[test]
    fn unknown_token_policy() {
        let corpus = walkthrough_corpus();
        let outcome = train_ucw(&corpus, 1000).unwrap();
        let other = read_text_corpus_str("t", "Bar Pitch_100 Duration_480\n").unwrap();
        assert!(matches!(
            segment(&other[0], &outcome.vocab, UnknownTokenPolicy::Error),
            Err(Error::UnknownToken { .. })
        ));
        let passed = segment(&other[0], &outcome.vocab, UnknownTokenPolicy::PassThrough).unwrap();
        assert_eq!(passed.tokens, vec!["Bar", "Pitch_100", "Duration_480"]);
    }

    #[test]
    fn no_merge_crosses_families() {
        let corpus = walkthrough_corpus();
        let outcome = train_ucw(&corpus, 1000).unwrap();
        for rule in &outcome.vocab.merges {
            let fams: BTreeSet<&str> = rule
                .merged
                .split(MERGE_JOINER)
                .map(|name| {
                    Family::of(parse_event_name(name).unwrap().kind()).label()
                })
                .collect();
            assert_eq!(fams.len(), 1, "rule {} crosses families", rule.merged);
        }
    }

    #[test]
    fn vocab_file_round_trip() {
        let corpus = walkthrough_corpus();
        let outcome = train_ucw(&corpus, 1000).unwrap();
        let text = write_vocab_string(&outcome.vocab);
        assert!(text.starts_with("ucw-vocab v1 size=1000\n"));
        let loaded = parse_vocab_str("mem", &text).unwrap();
        assert_eq!(loaded.merges, outcome.vocab.merges);
        assert_eq!(loaded.target_size, 1000);
    }

    #[test]
    fn vocab_file_rejects_forward_references_and_bad_ranks() {
        let text = "ucw-vocab v1 size=10\n0\tPitch_71+Duration_1080\tVelocity_90\n";
        assert!(parse_vocab_str("mem", text).is_err());
        let text = "ucw-vocab v1 size=10\n1\tPitch_71\tDuration_1080\n";
        assert!(parse_vocab_str("mem", text).is_err());
    }
}
