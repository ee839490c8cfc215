//! Minimal Standard MIDI File reader (formats 0 and 1).
//!
//! Extracts note events and tempo changes from all tracks merged into one
//! timeline, which is all the pipeline needs. Errors carry the byte
//! offset where parsing failed.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::remi::NoteRecord;

/// A tempo change at an absolute tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TempoChange {
    pub tick: u64,
    pub bpm: f64,
}

#[derive(Debug, Clone)]
pub struct ParsedMidi {
    pub notes: Vec<NoteRecord>,
    pub tempo_changes: Vec<TempoChange>,
    pub ticks_per_beat: u16,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn fail<T>(&self, reason: impl Into<String>) -> Result<T> {
        Err(Error::Midi {
            offset: self.pos,
            reason: reason.into(),
        })
    }

    fn u8(&mut self) -> Result<u8> {
        match self.bytes.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => self.fail("unexpected end of file"),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return self.fail(format!("need {n} bytes past end of file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most four bytes.
    fn varint(&mut self) -> Result<u32> {
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | (b & 0x7f) as u32;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        self.fail("variable-length quantity longer than 4 bytes")
    }
}

#[derive(Debug, Clone, Copy)]
enum NoteEdge {
    Off,
    On { velocity: u8 },
}

/// Parse a standard MIDI file and extract a merged note timeline.
///
/// Notes come back sorted by (onset, pitch); overlapping notes of the
/// same pitch are truncated at the next onset of that pitch. A file with
/// zero note events is an [`Error::EmptyPiece`].
pub fn parse_midi(bytes: &[u8]) -> Result<ParsedMidi> {
    let mut cur = Cursor::new(bytes);

    let magic = cur.take(4)?;
    if magic != b"MThd" {
        cur.pos = 0;
        return cur.fail("missing MThd header");
    }
    let header_len = cur.u32()?;
    if header_len != 6 {
        return cur.fail(format!("MThd length {header_len}, expected 6"));
    }
    let format = cur.u16()?;
    if format > 1 {
        return cur.fail(format!("unsupported MIDI format {format}"));
    }
    let track_count = cur.u16()?;
    let division = cur.u16()?;
    if division & 0x8000 != 0 {
        return cur.fail("SMPTE time division is not supported");
    }
    if division == 0 {
        return cur.fail("time division of zero");
    }

    // (tick, order, pitch, edge): order keeps Offs before Ons at a tick.
    let mut edges: Vec<(u64, u8, u8, NoteEdge)> = Vec::new();
    let mut tempo_changes: Vec<TempoChange> = Vec::new();
    let mut last_tick = 0u64;

    for _ in 0..track_count {
        let magic = cur.take(4)?;
        if magic != b"MTrk" {
            cur.pos -= 4;
            return cur.fail("missing MTrk chunk");
        }
        let track_len = cur.u32()? as usize;
        let track_end = cur.pos + track_len;
        if track_end > bytes.len() {
            return cur.fail(format!("track length {track_len} runs past end of file"));
        }

        let mut tick = 0u64;
        let mut running_status: Option<u8> = None;
        while cur.pos < track_end {
            tick += cur.varint()? as u64;
            last_tick = last_tick.max(tick);

            let mut status = cur.u8()?;
            if status < 0x80 {
                // Running status: re-use previous status, rewind the data byte.
                match running_status {
                    Some(s) => {
                        status = s;
                        cur.pos -= 1;
                    }
                    None => {
                        cur.pos -= 1;
                        return cur.fail("data byte with no running status");
                    }
                }
            }

            match status {
                0x80..=0x8f => {
                    let pitch = cur.u8()? & 0x7f;
                    let _velocity = cur.u8()?;
                    edges.push((tick, 0, pitch, NoteEdge::Off));
                    running_status = Some(status);
                }
                0x90..=0x9f => {
                    let pitch = cur.u8()? & 0x7f;
                    let velocity = cur.u8()? & 0x7f;
                    if velocity == 0 {
                        edges.push((tick, 0, pitch, NoteEdge::Off));
                    } else {
                        edges.push((tick, 1, pitch, NoteEdge::On { velocity }));
                    }
                    running_status = Some(status);
                }
                0xa0..=0xbf | 0xe0..=0xef => {
                    cur.take(2)?;
                    running_status = Some(status);
                }
                0xc0..=0xdf => {
                    cur.take(1)?;
                    running_status = Some(status);
                }
                0xff => {
                    let meta_type = cur.u8()?;
                    let len = cur.varint()? as usize;
                    let data = cur.take(len)?;
                    if meta_type == 0x51 {
                        if len != 3 {
                            return cur.fail(format!("tempo meta event of length {len}"));
                        }
                        let us_per_beat =
                            u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if us_per_beat > 0 {
                            tempo_changes.push(TempoChange {
                                tick,
                                bpm: 60_000_000.0 / us_per_beat as f64,
                            });
                        }
                    }
                    running_status = None;
                }
                0xf0 | 0xf7 => {
                    let len = cur.varint()? as usize;
                    cur.take(len)?;
                    running_status = None;
                }
                other => {
                    cur.pos -= 1;
                    return cur.fail(format!("unexpected status byte {other:#04x}"));
                }
            }
        }
        if cur.pos != track_end {
            return cur.fail("track data overran its declared length");
        }
    }

    let notes = pair_edges(edges, last_tick);
    if notes.is_empty() {
        return Err(Error::EmptyPiece);
    }
    tempo_changes.sort_by(|a, b| a.tick.cmp(&b.tick));
    tempo_changes.dedup_by(|a, b| a.tick == b.tick && a.bpm == b.bpm);

    Ok(ParsedMidi {
        notes,
        tempo_changes,
        ticks_per_beat: division,
    })
}

fn clamp_duration(ticks: u64) -> u32 {
    ticks.clamp(1, u32::MAX as u64) as u32
}

/// Pair on/off edges FIFO per pitch, close stragglers at the final tick,
/// then sort and apply the same-pitch truncation rule.
fn pair_edges(mut edges: Vec<(u64, u8, u8, NoteEdge)>, last_tick: u64) -> Vec<NoteRecord> {
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

    let mut open: HashMap<u8, Vec<(u64, u8)>> = HashMap::new();
    let mut notes: Vec<NoteRecord> = Vec::new();
    for (tick, _, pitch, edge) in edges {
        match edge {
            NoteEdge::On { velocity } => {
                open.entry(pitch).or_default().push((tick, velocity));
            }
            NoteEdge::Off => {
                let queue = open.entry(pitch).or_default();
                if !queue.is_empty() {
                    let (onset, velocity) = queue.remove(0);
                    notes.push(NoteRecord {
                        onset_tick: onset,
                        pitch,
                        duration_tick: clamp_duration(tick.saturating_sub(onset)),
                        velocity,
                    });
                }
            }
        }
    }
    for (pitch, queue) in open {
        for (onset, velocity) in queue {
            notes.push(NoteRecord {
                onset_tick: onset,
                pitch,
                duration_tick: clamp_duration(last_tick.saturating_sub(onset)),
                velocity,
            });
        }
    }

    notes.sort_by_key(|n| (n.onset_tick, n.pitch, n.duration_tick));
    // Same (onset, pitch) duplicates collapse to the longest.
    notes.dedup_by(|later, earlier| {
        if later.onset_tick == earlier.onset_tick && later.pitch == earlier.pitch {
            earlier.duration_tick = earlier.duration_tick.max(later.duration_tick);
            true
        } else {
            false
        }
    });

    // Truncate a note at the next onset of the same pitch.
    let next_onset: Vec<Option<u64>> = (0..notes.len())
        .map(|i| {
            notes[i + 1..]
                .iter()
                .find(|n| n.pitch == notes[i].pitch)
                .map(|n| n.onset_tick)
        })
        .collect();
    for (note, next) in notes.iter_mut().zip(next_onset) {
        if let Some(next_onset) = next {
            let limit = next_onset.saturating_sub(note.onset_tick).max(1) as u32;
            note.duration_tick = note.duration_tick.min(limit);
        }
    }
    notes
}
