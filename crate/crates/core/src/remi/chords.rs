//! Pitch-class template chord detection over half-bar windows.
//!
//! Deterministic stand-in detector: a window's pitch-class set must match
//! a template exactly; ties between candidate roots are broken by bass
//! support, then by lower root index. A chord is emitted only when it
//! differs from the previously emitted one.

use crate::remi::{ChordQuality, NoteRecord, QuantGrid};

const QUALITIES: [ChordQuality; 4] = [
    ChordQuality::Major,
    ChordQuality::Minor,
    ChordQuality::Dominant7,
    ChordQuality::Diminished,
];

/// A detected chord anchored at the tick of its window start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChordEvent {
    pub tick: u64,
    pub root: u8,
    pub quality: ChordQuality,
}

/// Scan half-bar windows and emit chord changes.
pub fn detect_chords(notes: &[NoteRecord], grid: &QuantGrid) -> Vec<ChordEvent> {
    let window = (grid.ticks_per_bar() / 2).max(1);
    let Some(last_onset) = notes.iter().map(|n| n.onset_tick).max() else {
        return Vec::new();
    };

    let mut out: Vec<ChordEvent> = Vec::new();
    let mut previous: Option<(u8, ChordQuality)> = None;
    let mut start = 0u64;
    while start <= last_onset {
        let in_window: Vec<&NoteRecord> = notes
            .iter()
            .filter(|n| n.onset_tick >= start && n.onset_tick < start + window)
            .collect();
        if let Some(found) = match_window(&in_window) {
            if previous != Some(found) {
                out.push(ChordEvent {
                    tick: start,
                    root: found.0,
                    quality: found.1,
                });
                previous = Some(found);
            }
        }
        start += window;
    }
    out
}

fn match_window(notes: &[&NoteRecord]) -> Option<(u8, ChordQuality)> {
    let mut classes = [false; 12];
    for n in notes {
        classes[(n.pitch % 12) as usize] = true;
    }
    let class_set: Vec<u8> = (0..12).filter(|&pc| classes[pc as usize]).collect();
    if class_set.len() < 3 {
        return None;
    }

    let mut candidates: Vec<(u8, ChordQuality)> = Vec::new();
    for root in 0..12u8 {
        for quality in QUALITIES {
            let template: Vec<u8> = quality
                .template()
                .iter()
                .map(|&iv| (root + iv) % 12)
                .collect();
            let mut sorted = template.clone();
            sorted.sort_unstable();
            if sorted == class_set {
                candidates.push((root, quality));
            }
        }
    }
    match candidates.len() {
        0 => None,
        1 => Some(candidates[0]),
        _ => {
            // Tie: prefer the root with the most support near the bass.
            let low = notes.iter().map(|n| n.pitch).min().unwrap_or(0);
            candidates
                .into_iter()
                .max_by_key(|&(root, _)| {
                    let support = notes
                        .iter()
                        .filter(|n| n.pitch % 12 == root && n.pitch < low + 12)
                        .count();
                    (support, std::cmp::Reverse(root))
                })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(onset: u64, pitch: u8) -> NoteRecord {
        NoteRecord {
            onset_tick: onset,
            pitch,
            duration_tick: 480,
            velocity: 90,
        }
    }

    #[test]
    fn major_triad_is_detected() {
        let grid = QuantGrid::default();
        // G, B, D = G major.
        let notes = vec![note(0, 55), note(0, 59), note(0, 62)];
        let chords = detect_chords(&notes, &grid);
        assert_eq!(
            chords,
            vec![ChordEvent {
                tick: 0,
                root: 7,
                quality: ChordQuality::Major,
            }]
        );
    }

    #[test]
    fn dominant_seventh_is_detected() {
        let grid = QuantGrid::default();
        // D, F#, A, C = D7.
        let notes = vec![note(0, 50), note(0, 54), note(0, 57), note(0, 60)];
        let chords = detect_chords(&notes, &grid);
        assert_eq!(chords[0].root, 2);
        assert_eq!(chords[0].quality, ChordQuality::Dominant7);
    }

    #[test]
    fn single_pitch_class_yields_nothing() {
        let grid = QuantGrid::default();
        let notes = vec![note(0, 60), note(0, 72)];
        assert!(detect_chords(&notes, &grid).is_empty());
    }

    #[test]
    fn unchanged_chord_is_not_repeated() {
        let grid = QuantGrid::default();
        let half_bar = grid.ticks_per_bar() / 2;
        let mut notes = vec![note(0, 55), note(0, 59), note(0, 62)];
        notes.extend([
            note(half_bar, 55),
            note(half_bar, 59),
            note(half_bar, 62),
        ]);
        let chords = detect_chords(&notes, &grid);
        assert_eq!(chords.len(), 1);
    }
}
