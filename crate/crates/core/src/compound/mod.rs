//! Family words and the fixed-slot compound (CP) baseline.
//!
//! Events partition into two families; runs of same-family events form
//! words, which are the units the merge trainer operates inside. The CP
//! encoding maps each word onto a fixed slot layout with `[PAD]` filler.

mod ucw;

pub use ucw::{
    count_pairs, parse_vocab_str, read_segmented_corpus, read_segmented_corpus_str,
    read_vocab_file, segment, train_ucw, write_segmented_corpus, write_segmented_corpus_string,
    write_vocab_file, write_vocab_string, MergeRule, TrainOutcome, UcwSequence, UcwVocab,
    UnknownTokenPolicy,
};

use crate::error::{Error, Result};
use crate::remi::{EventKind, EventSet, RemiEvent, RemiSequence};

/// Slot filler for compound tokens.
pub const PAD_SLOT: &str = "[PAD]";

/// Disjoint event-kind families covering all seven kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Metric,
    Note,
}

impl Family {
    pub fn of(kind: EventKind) -> Family {
        match kind {
            EventKind::Bar | EventKind::Beat | EventKind::Tempo | EventKind::Chord => {
                Family::Metric
            }
            EventKind::Pitch | EventKind::Duration | EventKind::Velocity => Family::Note,
        }
    }

    pub fn members(self) -> &'static [EventKind] {
        match self {
            Family::Metric => &[
                EventKind::Bar,
                EventKind::Beat,
                EventKind::Tempo,
                EventKind::Chord,
            ],
            Family::Note => &[EventKind::Pitch, EventKind::Duration, EventKind::Velocity],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Family::Metric => "M",
            Family::Note => "N",
        }
    }
}

/// A run of same-family events treated as one word by the merge trainer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyWord {
    pub family: Family,
    pub events: Vec<RemiEvent>,
}

impl FamilyWord {
    pub fn token_texts(&self) -> Vec<String> {
        self.events.iter().map(RemiEvent::render).collect()
    }
}

/// Group a sequence into family words.
///
/// A new word opens on a family change, and also at every `Bar`, `Beat`
/// and `Pitch` event, so each bar line, each position group and each note
/// becomes its own word. Concatenating the words reproduces the input.
/// The caller is responsible for grammar validity.
pub fn group_families(seq: &RemiSequence) -> Vec<FamilyWord> {
    let mut words: Vec<FamilyWord> = Vec::new();
    for &event in &seq.events {
        let kind = event.kind();
        let family = Family::of(kind);
        let open_new = match words.last() {
            None => true,
            Some(word) => {
                word.family != family
                    || matches!(kind, EventKind::Bar | EventKind::Beat | EventKind::Pitch)
            }
        };
        if open_new {
            words.push(FamilyWord {
                family,
                events: vec![event],
            });
        } else {
            words.last_mut().expect("word exists").events.push(event);
        }
    }
    words
}

/// One fixed-slot compound token; `slots` aligns with `set.kinds()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CpToken {
    pub slots: Vec<String>,
}

impl CpToken {
    pub fn filled(&self) -> usize {
        self.slots.iter().filter(|s| *s != PAD_SLOT).count()
    }
}

/// Encode a sequence as fixed-slot compound tokens.
///
/// Each family word maps to one token; a word is split greedily whenever
/// an event kind repeats, so a note word with several triples becomes one
/// token per triple. An event whose kind has no slot in `set` is a
/// structure error.
pub fn encode_cp(seq: &RemiSequence, set: EventSet) -> Result<Vec<CpToken>> {
    crate::remi::check_grammar(&seq.events)?;
    let kinds = set.kinds();
    let mut tokens = Vec::new();
    for word in group_families(seq) {
        let mut groups: Vec<Vec<RemiEvent>> = Vec::new();
        for &event in &word.events {
            let repeats = groups
                .last()
                .is_some_and(|g| g.iter().any(|e| e.kind() == event.kind()));
            if groups.is_empty() || repeats {
                groups.push(vec![event]);
            } else {
                groups.last_mut().expect("group exists").push(event);
            }
        }
        for group in groups {
            let mut slots = vec![PAD_SLOT.to_string(); kinds.len()];
            for event in group {
                let Some(idx) = kinds.iter().position(|&k| k == event.kind()) else {
                    return Err(Error::Structure(format!(
                        "event {} has no slot in {:?}",
                        event.render(),
                        set
                    )));
                };
                slots[idx] = event.render();
            }
            tokens.push(CpToken { slots });
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::remi::read_text_corpus_str;

    pub(crate) const WALKTHROUGH: &str =
        "Bar Beat_0 Tempo_119 G_M Pitch_71 Duration_1080 Velocity_90 \
Pitch_69 Duration_1560 Velocity_90 Bar D_7 Pitch_71 Duration_1080 Velocity_88 \
Pitch_73 Duration_1560 Velocity_90";

    fn walkthrough_sequence() -> RemiSequence {
        read_text_corpus_str("walkthrough", WALKTHROUGH)
            .unwrap()
            .remove(0)
    }

    #[test]
    fn families_partition_all_kinds() {
        let mut seen = Vec::new();
        for family in [Family::Metric, Family::Note] {
            for &kind in family.members() {
                assert_eq!(Family::of(kind), family);
                assert!(!seen.contains(&kind), "{kind:?} in two families");
                seen.push(kind);
            }
        }
        assert_eq!(seen.len(), EventKind::ALL.len());
    }

    #[test]
    fn walkthrough_groups_into_seven_words() {
        let seq = walkthrough_sequence();
        let words = group_families(&seq);
        let rendered: Vec<String> = words
            .iter()
            .map(|w| w.token_texts().join(" "))
            .collect();
        assert_eq!(
            rendered,
            vec![
                "Bar",
                "Beat_0 Tempo_119 G_M",
                "Pitch_71 Duration_1080 Velocity_90",
                "Pitch_69 Duration_1560 Velocity_90",
                "Bar D_7",
                "Pitch_71 Duration_1080 Velocity_88",
                "Pitch_73 Duration_1560 Velocity_90",
            ]
        );
        // Concatenating the words reproduces the sequence.
        let flat: Vec<RemiEvent> = words.into_iter().flat_map(|w| w.events).collect();
        assert_eq!(flat, seq.events);
    }

    #[test]
    fn single_event_is_one_word() {
        let seq = RemiSequence::new(vec![RemiEvent::Bar], "t");
        assert_eq!(group_families(&seq).len(), 1);
    }

    #[test]
    fn alternating_families_become_singleton_words() {
        // Run-length oracle: every family change opens a word.
        let events = vec![
            RemiEvent::Velocity(90),
            RemiEvent::Bar,
            RemiEvent::Velocity(88),
            RemiEvent::Bar,
        ];
        let seq = RemiSequence::new(events, "t");
        let words = group_families(&seq);
        assert_eq!(words.len(), 4);
        assert!(words.iter().all(|w| w.events.len() == 1));
    }

    #[test]
    fn cp_token_for_metric_word() {
        // CP7 slot order: Bar Beat Tempo Chord Pitch Duration Velocity.
        let seq = read_text_corpus_str("t", "Bar Beat_0 Tempo_119 G_M")
            .unwrap()
            .remove(0);
        let tokens = encode_cp(&seq, EventSet::Cp7).unwrap();
        assert_eq!(tokens.len(), 2);
        assert_eq!(
            tokens[1].slots,
            vec!["[PAD]", "Beat_0", "Tempo_119", "G_M", "[PAD]", "[PAD]", "[PAD]"]
        );
    }

    #[test]
    fn cp_token_for_bar_word() {
        let seq = RemiSequence::new(vec![RemiEvent::Bar], "t");
        let tokens = encode_cp(&seq, EventSet::Cp7).unwrap();
        assert_eq!(tokens[0].slots[0], "Bar");
        assert_eq!(tokens[0].filled(), 1);
    }

    #[test]
    fn walkthrough_expands_to_seven_cp_tokens() {
        // Hand expansion over the seven family words: one token per word
        // (each note word already holds a single triple).
        let seq = walkthrough_sequence();
        let tokens = encode_cp(&seq, EventSet::Cp7).unwrap();
        assert_eq!(tokens.len(), 7);
        assert_eq!(
            tokens[4].slots,
            vec!["Bar", "[PAD]", "[PAD]", "D_7", "[PAD]", "[PAD]", "[PAD]"]
        );
        for t in &tokens {
            assert_eq!(t.slots.len(), 7);
        }
    }

    #[test]
    fn repeated_kind_splits_and_missing_slot_errors() {
        // Two bars in a row split into two tokens.
        let seq = RemiSequence::new(vec![RemiEvent::Bar, RemiEvent::Bar], "t");
        let tokens = encode_cp(&seq, EventSet::Cp7).unwrap();
        assert_eq!(tokens.len(), 2);

        // A tempo event has no slot in CP4.
        let seq = read_text_corpus_str("t", "Bar Beat_0 Tempo_119")
            .unwrap()
            .remove(0);
        assert!(matches!(
            encode_cp(&seq, EventSet::Cp4),
            Err(Error::Structure(_))
        ));
    }
}
