//! REMI event model: atomic symbolic-music events, quantization grid,
//! event-order grammar, and the text rendering used by every file format.
//!
//! Rendered names are the wire format ("Pitch_71", "Beat_0", "G_M", ...).
//! The joiner character `+` is reserved for merged compound tokens and is
//! rejected everywhere an atomic event name is parsed.

mod chords;
mod corpus;
mod encode;
mod midi;

pub use chords::{detect_chords, ChordEvent};
pub use corpus::{
    parse_event_name, read_text_corpus, read_text_corpus_str, write_text_corpus,
    write_text_corpus_string,
};
pub use encode::encode_remi;
pub use midi::{parse_midi, ParsedMidi, TempoChange};

use crate::error::{Error, Result};

/// Character that joins merged tokens; forbidden in atomic event names.
pub const MERGE_JOINER: char = '+';

/// Canonical ticks per beat used for rendered duration values, so names
/// stay stable across input files with different resolutions.
pub const CANONICAL_TICKS_PER_BEAT: u32 = 480;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Bar,
    Beat,
    Tempo,
    Chord,
    Pitch,
    Duration,
    Velocity,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::Bar,
        EventKind::Beat,
        EventKind::Tempo,
        EventKind::Chord,
        EventKind::Pitch,
        EventKind::Duration,
        EventKind::Velocity,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChordQuality {
    Major,
    Minor,
    Dominant7,
    Diminished,
}

impl ChordQuality {
    pub fn label(self) -> &'static str {
        match self {
            ChordQuality::Major => "M",
            ChordQuality::Minor => "m",
            ChordQuality::Dominant7 => "7",
            ChordQuality::Diminished => "dim",
        }
    }

    fn from_label(s: &str) -> Option<Self> {
        match s {
            "M" => Some(ChordQuality::Major),
            "m" => Some(ChordQuality::Minor),
            "7" => Some(ChordQuality::Dominant7),
            "dim" => Some(ChordQuality::Diminished),
            _ => None,
        }
    }

    /// Pitch-class intervals above the root.
    pub fn template(self) -> &'static [u8] {
        match self {
            ChordQuality::Major => &[0, 4, 7],
            ChordQuality::Minor => &[0, 3, 7],
            ChordQuality::Dominant7 => &[0, 4, 7, 10],
            ChordQuality::Diminished => &[0, 3, 6],
        }
    }
}

pub const ROOT_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

fn root_from_name(s: &str) -> Option<u8> {
    ROOT_NAMES.iter().position(|&n| n == s).map(|i| i as u8)
}

/// One atomic music event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RemiEvent {
    Bar,
    /// Position within the bar (sub-beat index).
    Beat(u8),
    /// Tempo in BPM after bin mapping.
    Tempo(u16),
    Chord {
        root: u8,
        quality: ChordQuality,
    },
    /// MIDI pitch 0..=127.
    Pitch(u8),
    /// Duration in canonical ticks, >= 1.
    Duration(u32),
    /// MIDI velocity 1..=127.
    Velocity(u8),
}

impl RemiEvent {
    pub fn kind(&self) -> EventKind {
        match self {
            RemiEvent::Bar => EventKind::Bar,
            RemiEvent::Beat(_) => EventKind::Beat,
            RemiEvent::Tempo(_) => EventKind::Tempo,
            RemiEvent::Chord { .. } => EventKind::Chord,
            RemiEvent::Pitch(_) => EventKind::Pitch,
            RemiEvent::Duration(_) => EventKind::Duration,
            RemiEvent::Velocity(_) => EventKind::Velocity,
        }
    }

    /// Wire-format name. Never contains [`MERGE_JOINER`].
    pub fn render(&self) -> String {
        match *self {
            RemiEvent::Bar => "Bar".to_string(),
            RemiEvent::Beat(p) => format!("Beat_{p}"),
            RemiEvent::Tempo(t) => format!("Tempo_{t}"),
            RemiEvent::Chord { root, quality } => {
                format!("{}_{}", ROOT_NAMES[root as usize], quality.label())
            }
            RemiEvent::Pitch(p) => format!("Pitch_{p}"),
            RemiEvent::Duration(d) => format!("Duration_{d}"),
            RemiEvent::Velocity(v) => format!("Velocity_{v}"),
        }
    }
}

/// An ordered event sequence for one piece (or one corpus line).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemiSequence {
    pub events: Vec<RemiEvent>,
    pub source_id: String,
}

impl RemiSequence {
    pub fn new(events: Vec<RemiEvent>, source_id: impl Into<String>) -> Self {
        Self {
            events,
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Space-separated rendered names (one corpus line, without newline).
    pub fn render_line(&self) -> String {
        self.events
            .iter()
            .map(RemiEvent::render)
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Linear-scan acceptor for the event-order grammar:
/// a non-empty sequence starts with `Bar`; every `Pitch` is immediately
/// followed by `Duration`; `Duration` only follows `Pitch`; `Velocity`
/// only follows `Duration`. Both note shapes (Pitch-Duration and
/// Pitch-Duration-Velocity) are accepted.
pub fn check_grammar(events: &[RemiEvent]) -> Result<()> {
    if events.is_empty() {
        return Ok(());
    }
    if events[0].kind() != EventKind::Bar {
        return Err(Error::Grammar {
            index: 0,
            reason: "sequence must start with Bar".into(),
        });
    }
    for (i, ev) in events.iter().enumerate() {
        match ev.kind() {
            EventKind::Pitch => {
                if events.get(i + 1).map(RemiEvent::kind) != Some(EventKind::Duration) {
                    return Err(Error::Grammar {
                        index: i,
                        reason: "Pitch must be immediately followed by Duration".into(),
                    });
                }
            }
            EventKind::Duration => {
                if i == 0 || events[i - 1].kind() != EventKind::Pitch {
                    return Err(Error::Grammar {
                        index: i,
                        reason: "Duration must follow Pitch".into(),
                    });
                }
            }
            EventKind::Velocity => {
                if i == 0 || events[i - 1].kind() != EventKind::Duration {
                    return Err(Error::Grammar {
                        index: i,
                        reason: "Velocity must follow Duration".into(),
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Which event kinds a pipeline run emits and models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventSet {
    /// Bar, Beat, Pitch, Duration.
    Cp4,
    /// All seven kinds.
    Cp7,
}

impl EventSet {
    pub fn kinds(self) -> &'static [EventKind] {
        match self {
            EventSet::Cp4 => &[
                EventKind::Bar,
                EventKind::Beat,
                EventKind::Pitch,
                EventKind::Duration,
            ],
            EventSet::Cp7 => &EventKind::ALL,
        }
    }

    pub fn includes(self, kind: EventKind) -> bool {
        self.kinds().contains(&kind)
    }

    /// Number of compound slots (K).
    pub fn slot_count(self) -> usize {
        self.kinds().len()
    }
}

/// A raw note before quantization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoteRecord {
    pub onset_tick: u64,
    pub pitch: u8,
    pub duration_tick: u32,
    pub velocity: u8,
}

/// Quantization parameters: positions per bar, bin tables, bar cap.
///
/// Bin lists hold representative values; raw values map to the nearest
/// entry (ties to the lower). Durations are first rescaled from the
/// source resolution to [`CANONICAL_TICKS_PER_BEAT`] so rendered names do
/// not depend on the input file's resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantGrid {
    pub ticks_per_beat: u32,
    pub positions_per_bar: u32,
    pub beats_per_bar: u32,
    pub duration_bins: Vec<u32>,
    pub velocity_bins: Vec<u8>,
    pub tempo_bins: Vec<u16>,
    pub max_bars: u32,
}

impl QuantGrid {
    /// Default grid: 16 positions over a 4/4 bar, 32 duration bins at
    /// multiples of the canonical 16th-note tick, width-4 velocity
    /// buckets, 32 log-spaced tempo bins over 30..=300 BPM, 255-bar cap.
    pub fn with_ticks_per_beat(ticks_per_beat: u32) -> Self {
        let sixteenth = CANONICAL_TICKS_PER_BEAT / 4;
        let duration_bins = (1..=32).map(|k| k * sixteenth).collect();
        let velocity_bins = (0..32u16).map(|b| (3 + 4 * b) as u8).collect();
        let mut tempo_bins: Vec<u16> = (0..32)
            .map(|k| {
                let t = 30.0 * (300.0f64 / 30.0).powf(k as f64 / 31.0);
                t.round() as u16
            })
            .collect();
        tempo_bins.dedup();
        Self {
            ticks_per_beat,
            positions_per_bar: 16,
            beats_per_bar: 4,
            duration_bins,
            velocity_bins,
            tempo_bins,
            max_bars: 255,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions_per_bar == 0
            || self.beats_per_bar == 0
            || self.positions_per_bar % self.beats_per_bar != 0
        {
            return Err(Error::Config(format!(
                "positions_per_bar {} must be a positive multiple of beats_per_bar {}",
                self.positions_per_bar, self.beats_per_bar
            )));
        }
        if self.ticks_per_beat == 0 {
            return Err(Error::Config("ticks_per_beat must be positive".into()));
        }
        fn increasing<T: PartialOrd>(xs: &[T]) -> bool {
            xs.windows(2).all(|w| w[0] < w[1])
        }
        if self.duration_bins.is_empty() || !increasing(&self.duration_bins) {
            return Err(Error::Config(
                "duration_bins must be non-empty and strictly increasing".into(),
            ));
        }
        if self.velocity_bins.is_empty() || !increasing(&self.velocity_bins) {
            return Err(Error::Config(
                "velocity_bins must be non-empty and strictly increasing".into(),
            ));
        }
        if self.tempo_bins.is_empty() || !increasing(&self.tempo_bins) {
            return Err(Error::Config(
                "tempo_bins must be non-empty and strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn ticks_per_position(&self) -> u32 {
        (self.ticks_per_beat * self.beats_per_bar) / self.positions_per_bar
    }

    pub fn ticks_per_bar(&self) -> u64 {
        self.ticks_per_beat as u64 * self.beats_per_bar as u64
    }

    /// Nearest-bin lookup; ties resolve to the lower value.
    fn nearest<T: Copy + Into<i64>>(bins: &[T], value: i64) -> T {
        debug_assert!(!bins.is_empty());
        let mut best = bins[0];
        let mut best_dist = (best.into() - value).abs();
        for &b in &bins[1..] {
            let d = (b.into() - value).abs();
            if d < best_dist {
                best = b;
                best_dist = d;
            }
        }
        best
    }

    /// Map a duration in source ticks to its canonical-tick bin value.
    pub fn quantize_duration(&self, duration_tick: u32) -> u32 {
        let canonical = (duration_tick as u64 * CANONICAL_TICKS_PER_BEAT as u64
            + self.ticks_per_beat as u64 / 2)
            / self.ticks_per_beat as u64;
        Self::nearest(&self.duration_bins, canonical as i64)
    }

    pub fn quantize_velocity(&self, velocity: u8) -> u8 {
        Self::nearest(&self.velocity_bins, velocity as i64)
    }

    pub fn quantize_tempo(&self, bpm: f64) -> u16 {
        Self::nearest(&self.tempo_bins, bpm.round() as i64)
    }

    /// Snap an onset to (bar, position) indices.
    pub fn quantize_onset(&self, onset_tick: u64) -> (u64, u8) {
        let tpp = self.ticks_per_position() as u64;
        let pos_index = (onset_tick + tpp / 2) / tpp;
        let bar = pos_index / self.positions_per_bar as u64;
        let pos = (pos_index % self.positions_per_bar as u64) as u8;
        (bar, pos)
    }
}

impl Default for QuantGrid {
    fn default() -> Self {
        Self::with_ticks_per_beat(CANONICAL_TICKS_PER_BEAT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_never_contains_joiner() {
        let samples = [
            RemiEvent::Bar,
            RemiEvent::Beat(15),
            RemiEvent::Tempo(119),
            RemiEvent::Chord {
                root: 7,
                quality: ChordQuality::Major,
            },
            RemiEvent::Pitch(71),
            RemiEvent::Duration(1080),
            RemiEvent::Velocity(90),
        ];
        for ev in samples {
            assert!(!ev.render().contains(MERGE_JOINER), "{}", ev.render());
        }
    }

    #[test]
    fn chord_renders_like_the_walkthrough() {
        let g_major = RemiEvent::Chord {
            root: 7,
            quality: ChordQuality::Major,
        };
        let d_seven = RemiEvent::Chord {
            root: 2,
            quality: ChordQuality::Dominant7,
        };
        assert_eq!(g_major.render(), "G_M");
        assert_eq!(d_seven.render(), "D_7");
    }

    #[test]
    fn grammar_accepts_both_note_shapes() {
        let cp7 = [
            RemiEvent::Bar,
            RemiEvent::Beat(0),
            RemiEvent::Pitch(60),
            RemiEvent::Duration(480),
            RemiEvent::Velocity(91),
        ];
        let cp4 = [
            RemiEvent::Bar,
            RemiEvent::Beat(4),
            RemiEvent::Pitch(72),
            RemiEvent::Duration(480),
        ];
        assert!(check_grammar(&cp7).is_ok());
        assert!(check_grammar(&cp4).is_ok());
    }

    #[test]
    fn grammar_rejects_misordered_notes() {
        let missing_duration = [RemiEvent::Bar, RemiEvent::Pitch(60), RemiEvent::Velocity(90)];
        assert!(check_grammar(&missing_duration).is_err());
        let no_bar = [RemiEvent::Beat(0)];
        assert!(check_grammar(&no_bar).is_err());
        let stray_velocity = [RemiEvent::Bar, RemiEvent::Velocity(90)];
        assert!(check_grammar(&stray_velocity).is_err());
    }

    #[test]
    fn default_grid_is_valid_and_quantizes_walkthrough_durations() {
        let grid = QuantGrid::default();
        grid.validate().unwrap();
        // 1080 and 1560 canonical ticks are exact 16th multiples (9 and 13).
        assert_eq!(grid.quantize_duration(1080), 1080);
        assert_eq!(grid.quantize_duration(1560), 1560);
        // Off-grid values snap to the nearest multiple of 120.
        assert_eq!(grid.quantize_duration(1100), 1080);
        assert_eq!(grid.quantize_duration(1150), 1200);
    }

    #[test]
    fn grid_rescales_foreign_resolution() {
        let grid = QuantGrid::with_ticks_per_beat(960);
        // One beat at 960 tpb = 480 canonical ticks.
        assert_eq!(grid.quantize_duration(960), 480);
        assert_eq!(grid.quantize_onset(960), (0, 4));
    }
}
