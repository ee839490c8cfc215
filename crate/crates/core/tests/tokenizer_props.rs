//! Property tests over seeded random corpora: lossless segmentation,
//! length bounds, trainer/segmenter agreement, family purity, harvest
//! completeness, and row-normalization bounds.

use std::collections::HashMap;

use midigram::compound::{
    group_families, segment, train_ucw, Family, UnknownTokenPolicy,
};
use midigram::ngram::{
    build_position_matrix, harvest_ngrams, match_sequence, normalize_rows,
};
use midigram::remi::{parse_event_name, EventSet, MERGE_JOINER};
use midigram::synth::random_remi_corpus;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn segmentation_is_lossless_and_bounded(seed in 0u64..10_000, cp7 in any::<bool>()) {
        let set = if cp7 { EventSet::Cp7 } else { EventSet::Cp4 };
        let corpus = random_remi_corpus(seed, 8, 60, set);
        let base_names: usize = {
            let mut names: Vec<String> = corpus
                .iter()
                .flat_map(|s| s.events.iter().map(|e| e.render()))
                .collect();
            names.sort();
            names.dedup();
            names.len()
        };
        let outcome = train_ucw(&corpus, base_names + 10).unwrap();
        for (seq, state) in corpus.iter().zip(&outcome.corpus_state) {
            // Lossless: joining tokens on '+' recovers the event list.
            let originals: Vec<String> = seq.events.iter().map(|e| e.render()).collect();
            prop_assert_eq!(state.split_tokens(), originals);
            // Never longer than the event sequence.
            prop_assert!(state.len() <= seq.len());
            // Segmenting reproduces the trainer's final state.
            let seg = segment(seq, &outcome.vocab, UnknownTokenPolicy::Error).unwrap();
            prop_assert_eq!(&seg.tokens, &state.tokens);
            // Maximality: no adjacent in-word pair is still mergeable.
            let words = group_families(seq);
            let mut cursor = 0usize;
            for word in words {
                let mut remaining = word.events.len();
                let mut in_word = Vec::new();
                while remaining > 0 {
                    let tok = &seg.tokens[cursor];
                    let pieces = tok.split(MERGE_JOINER).count();
                    in_word.push(tok.clone());
                    remaining -= pieces;
                    cursor += 1;
                }
                for pair in in_word.windows(2) {
                    let mergeable = outcome
                        .vocab
                        .merges
                        .iter()
                        .any(|r| r.left == pair[0] && r.right == pair[1]);
                    prop_assert!(!mergeable, "unmerged pair {:?}", pair);
                }
            }
        }
    }

    #[test]
    fn merges_stay_in_family_and_lengths_shrink_with_vocab(seed in 0u64..10_000) {
        let corpus = random_remi_corpus(seed, 8, 80, EventSet::Cp7);
        let base: usize = {
            let mut names: Vec<String> = corpus
                .iter()
                .flat_map(|s| s.events.iter().map(|e| e.render()))
                .collect();
            names.sort();
            names.dedup();
            names.len()
        };
        let mut previous_mean = f64::INFINITY;
        for extra in [0usize, 5, 20] {
            let outcome = train_ucw(&corpus, base + extra).unwrap();
            for rule in &outcome.vocab.merges {
                let mut families = rule.merged.split(MERGE_JOINER).map(|name| {
                    Family::of(parse_event_name(name).unwrap().kind())
                });
                let first = families.next().unwrap();
                prop_assert!(families.all(|f| f == first), "cross-family merge {}", rule.merged);
            }
            let mean: f64 = outcome
                .corpus_state
                .iter()
                .map(|s| s.len() as f64)
                .sum::<f64>()
                / outcome.corpus_state.len() as f64;
            prop_assert!(mean <= previous_mean + 1e-9);
            previous_mean = mean;
        }
    }

    #[test]
    fn harvest_equals_naive_window_count(seed in 0u64..10_000, n_max in 2usize..=4) {
        let corpus = random_remi_corpus(seed, 6, 50, EventSet::Cp4);
        let outcome = train_ucw(&corpus, 200).unwrap();
        let vocab = harvest_ngrams(&outcome.corpus_state, n_max, 1).unwrap();

        let mut naive: HashMap<Vec<String>, u64> = HashMap::new();
        for seq in &outcome.corpus_state {
            for len in 2..=n_max {
                if seq.tokens.len() < len {
                    continue;
                }
                for start in 0..=seq.tokens.len() - len {
                    *naive
                        .entry(seq.tokens[start..start + len].to_vec())
                        .or_insert(0) += 1;
                }
            }
        }
        prop_assert_eq!(vocab.len(), naive.len());
        for gram_id in 0..vocab.len() as u32 {
            let text: Vec<String> = vocab
                .entry(gram_id)
                .tokens
                .iter()
                .map(|&t| vocab.token_text(t).to_string())
                .collect();
            prop_assert_eq!(vocab.freq(gram_id), naive[&text]);
        }
    }

    #[test]
    fn normalized_rows_sum_to_one_or_zero(seed in 0u64..10_000) {
        let corpus = random_remi_corpus(seed, 6, 60, EventSet::Cp7);
        let outcome = train_ucw(&corpus, 300).unwrap();
        let vocab = harvest_ngrams(&outcome.corpus_state, 3, 2).unwrap();
        for seq in &outcome.corpus_state {
            let matches = match_sequence(seq, &vocab, 8);
            let raw = build_position_matrix::<f64>(&matches, &vocab, seq.len(), 8).unwrap();
            let pm = normalize_rows(raw);
            for i in 0..pm.weights.rows() {
                let sum: f64 = pm.weights.row(i).iter().sum();
                prop_assert!(
                    sum == 0.0 || (sum - 1.0).abs() <= 1e-6,
                    "row {i} sums to {sum}"
                );
            }
        }
    }
}
