//! Seeded synthetic corpora for tests, demos and desk-scale training.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::compound::{Family, UcwSequence};
use crate::remi::{EventSet, RemiEvent, RemiSequence};

/// A random grammar-valid corpus with a deliberately small event alphabet
/// so adjacent pairs repeat and merges exist to be learned.
pub fn random_remi_corpus(
    seed: u64,
    sequences: usize,
    max_events: usize,
    set: EventSet,
) -> Vec<RemiSequence> {
    let mut rng = StdRng::seed_from_u64(seed);
    let pitches = [60u8, 62, 64, 67, 69];
    let durations = [240u32, 480, 960];
    let velocities = [63u8, 91];
    let tempos = [90u16, 120];

    (0..sequences)
        .map(|idx| {
            let budget = rng.random_range(4..=max_events.max(4));
            let mut events = vec![RemiEvent::Bar];
            let mut beat = 0u8;
            while events.len() < budget {
                match rng.random_range(0..10) {
                    0 => {
                        events.push(RemiEvent::Bar);
                        beat = 0;
                    }
                    1 | 2 => {
                        beat = (beat + rng.random_range(1..4)) % 16;
                        events.push(RemiEvent::Beat(beat));
                        if set == EventSet::Cp7 && rng.random_bool(0.3) {
                            events.push(RemiEvent::Tempo(
                                tempos[rng.random_range(0..tempos.len())],
                            ));
                        }
                    }
                    _ => {
                        events.push(RemiEvent::Pitch(
                            pitches[rng.random_range(0..pitches.len())],
                        ));
                        events.push(RemiEvent::Duration(
                            durations[rng.random_range(0..durations.len())],
                        ));
                        if set == EventSet::Cp7 {
                            events.push(RemiEvent::Velocity(
                                velocities[rng.random_range(0..velocities.len())],
                            ));
                        }
                    }
                }
            }
            events.truncate(budget.max(1));
            // Truncation may strand a Pitch with no Duration at the end.
            while events.last().map(RemiEvent::kind) == Some(crate::remi::EventKind::Pitch) {
                events.pop();
            }
            RemiSequence::new(events, format!("synth:{idx}"))
        })
        .collect()
}

/// Token sequences built from repeating short motifs, so n-gram windows
/// recur with high frequency and a masked token is recoverable from its
/// neighbors. Tokens are drawn from disjoint per-motif alphabets.
pub fn planted_gram_corpus(
    seed: u64,
    sequences: usize,
    length: usize,
    motif_count: usize,
    motif_len: usize,
) -> Vec<UcwSequence> {
    let mut rng = StdRng::seed_from_u64(seed);
    let pitch_base = 48u8;
    (0..sequences)
        .map(|idx| {
            let motif = rng.random_range(0..motif_count);
            let offset = rng.random_range(0..motif_len);
            let tokens: Vec<String> = (0..length)
                .map(|i| {
                    let step = (i + offset) % motif_len;
                    let pitch = pitch_base + (motif * motif_len + step) as u8;
                    format!("Pitch_{pitch}+Duration_480")
                })
                .collect();
            let families = vec![Family::Note; tokens.len()];
            UcwSequence {
                tokens,
                families,
                source_id: format!("planted:{idx}"),
            }
        })
        .collect()
}
