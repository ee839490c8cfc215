//! Plain-text corpus format: one sequence per line, space-separated
//! rendered event names, UTF-8, LF-terminated. This is the canonical
//! interface for tests and for feeding the compound trainer; MIDI
//! ingestion is a front end that produces the same sequences.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::remi::{
    root_from_name, ChordQuality, RemiEvent, RemiSequence, MERGE_JOINER,
};

/// Parse one rendered event name.
pub fn parse_event_name(name: &str) -> std::result::Result<RemiEvent, String> {
    if name.contains(MERGE_JOINER) {
        return Err(format!(
            "'{MERGE_JOINER}' is reserved for merged tokens and cannot appear in an event name"
        ));
    }
    if name == "Bar" {
        return Ok(RemiEvent::Bar);
    }
    let Some((head, tail)) = name.split_once('_') else {
        return Err(format!("unknown event name {name:?}"));
    };
    match head {
        "Beat" => {
            let p: u8 = tail
                .parse()
                .map_err(|_| format!("invalid beat position {tail:?}"))?;
            Ok(RemiEvent::Beat(p))
        }
        "Tempo" => {
            let t: u16 = tail
                .parse()
                .map_err(|_| format!("invalid tempo {tail:?}"))?;
            if t == 0 {
                return Err("tempo must be positive".into());
            }
            Ok(RemiEvent::Tempo(t))
        }
        "Pitch" => {
            let p: u8 = tail
                .parse()
                .map_err(|_| format!("invalid pitch {tail:?}"))?;
            if p > 127 {
                return Err(format!("pitch {p} outside 0..=127"));
            }
            Ok(RemiEvent::Pitch(p))
        }
        "Duration" => {
            let d: u32 = tail
                .parse()
                .map_err(|_| format!("invalid duration {tail:?}"))?;
            if d == 0 {
                return Err("duration must be >= 1 tick".into());
            }
            Ok(RemiEvent::Duration(d))
        }
        "Velocity" => {
            let v: u8 = tail
                .parse()
                .map_err(|_| format!("invalid velocity {tail:?}"))?;
            if v == 0 || v > 127 {
                return Err(format!("velocity {v} outside 1..=127"));
            }
            Ok(RemiEvent::Velocity(v))
        }
        root => match (root_from_name(root), ChordQuality::from_label(tail)) {
            (Some(r), Some(q)) => Ok(RemiEvent::Chord {
                root: r,
                quality: q,
            }),
            _ => Err(format!("unknown event name {name:?}")),
        },
    }
}

/// Parse corpus text. `origin` labels error messages and sequence ids.
pub fn read_text_corpus_str(origin: &str, text: &str) -> Result<Vec<RemiSequence>> {
    let mut sequences = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let mut events = Vec::new();
        let mut column = 1usize;
        for token in line.split(' ') {
            if !token.is_empty() {
                let event =
                    parse_event_name(token).map_err(|reason| Error::CorpusParse {
                        path: origin.to_string(),
                        line: line_idx + 1,
                        column,
                        reason,
                    })?;
                events.push(event);
            }
            column += token.chars().count() + 1;
        }
        sequences.push(RemiSequence::new(
            events,
            format!("{origin}:{}", line_idx + 1),
        ));
    }
    Ok(sequences)
}

/// Read a corpus file; see [`read_text_corpus_str`].
pub fn read_text_corpus(path: &Path) -> Result<Vec<RemiSequence>> {
    let text = fs::read_to_string(path)?;
    read_text_corpus_str(&path.display().to_string(), &text)
}

/// Render sequences back to corpus text (LF-terminated lines).
pub fn write_text_corpus_string(sequences: &[RemiSequence]) -> String {
    let mut out = String::new();
    for seq in sequences {
        out.push_str(&seq.render_line());
        out.push('\n');
    }
    out
}

pub fn write_text_corpus(sequences: &[RemiSequence], path: &Path) -> Result<()> {
    fs::write(path, write_text_corpus_string(sequences))?;
    Ok(())
}
