//! Quantize notes onto the grid and emit the REMI event stream.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::remi::{
    ChordEvent, EventKind, EventSet, NoteRecord, QuantGrid, RemiEvent, RemiSequence, TempoChange,
};

#[derive(Default)]
struct PositionBucket {
    tempo: Option<u16>,
    chord: Option<(u8, crate::remi::ChordQuality)>,
    /// (pitch, duration bin, velocity bin), sorted before emission.
    notes: Vec<(u8, u32, u8)>,
}

/// Emit events bar by bar: `Bar`, then per occupied position `Beat_pos`,
/// tempo change (CP7), chord change (CP7), then note triples in pitch
/// order. Deterministic given inputs. An empty note list produces an
/// empty sequence.
pub fn encode_remi(
    notes: &[NoteRecord],
    tempos: &[TempoChange],
    chords: &[ChordEvent],
    grid: &QuantGrid,
    set: EventSet,
) -> Result<RemiSequence> {
    grid.validate()?;
    if notes.is_empty() {
        return Ok(RemiSequence::new(Vec::new(), String::new()));
    }

    let mut buckets: BTreeMap<(u64, u8), PositionBucket> = BTreeMap::new();

    for note in notes {
        let (bar, pos) = grid.quantize_onset(note.onset_tick);
        if bar >= grid.max_bars as u64 {
            return Err(Error::BarOverflow {
                tick: note.onset_tick,
                max_bars: grid.max_bars,
            });
        }
        let duration = grid.quantize_duration(note.duration_tick);
        let velocity = grid.quantize_velocity(note.velocity);
        buckets
            .entry((bar, pos))
            .or_default()
            .notes
            .push((note.pitch, duration, velocity));
    }

    if set.includes(EventKind::Tempo) {
        let mut previous = None;
        for tempo in tempos {
            let (bar, pos) = grid.quantize_onset(tempo.tick);
            if bar >= grid.max_bars as u64 {
                continue;
            }
            let bin = grid.quantize_tempo(tempo.bpm);
            if previous != Some(bin) {
                buckets.entry((bar, pos)).or_default().tempo = Some(bin);
                previous = Some(bin);
            }
        }
    }
    if set.includes(EventKind::Chord) {
        let mut previous = None;
        for chord in chords {
            let (bar, pos) = grid.quantize_onset(chord.tick);
            if bar >= grid.max_bars as u64 {
                continue;
            }
            let value = (chord.root, chord.quality);
            if previous != Some(value) {
                buckets.entry((bar, pos)).or_default().chord = Some(value);
                previous = Some(value);
            }
        }
    }

    let mut events = Vec::new();
    let mut current_bar: Option<u64> = None;
    for ((bar, pos), bucket) in &mut buckets {
        while current_bar.map_or(true, |b| b < *bar) {
            events.push(RemiEvent::Bar);
            current_bar = Some(current_bar.map_or(0, |b| b + 1));
        }
        events.push(RemiEvent::Beat(*pos));
        if let Some(t) = bucket.tempo {
            events.push(RemiEvent::Tempo(t));
        }
        if let Some((root, quality)) = bucket.chord {
            events.push(RemiEvent::Chord { root, quality });
        }
        bucket.notes.sort_unstable();
        for &(pitch, duration, velocity) in &bucket.notes {
            events.push(RemiEvent::Pitch(pitch));
            events.push(RemiEvent::Duration(duration));
            if set.includes(EventKind::Velocity) {
                events.push(RemiEvent::Velocity(velocity));
            }
        }
    }

    Ok(RemiSequence::new(events, String::new()))
}
