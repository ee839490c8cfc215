//! Labeled datasets for fine-tuning.
//!
//! Sequence task, one line per example: `<label>\t<tok> <tok> ...`
//! Token task: `<lab> <lab> ...\t<tok> <tok> ...` with equal counts.
//! The train/validation split hashes each line's token text, so it is
//! stable across runs and file orderings.

use sha2::{Digest, Sha256};

use midigram::compound::read_segmented_corpus_str;
use midigram::compound::UcwSequence;
use midigram::{Error, Result};

#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub sequence: UcwSequence,
    pub labels: ExampleLabels,
}

#[derive(Debug, Clone)]
pub enum ExampleLabels {
    Sequence(u32),
    Tokens(Vec<u32>),
}

fn parse_tokens(origin: &str, text: &str) -> Result<UcwSequence> {
    let mut seqs = read_segmented_corpus_str(origin, text)?;
    Ok(if seqs.is_empty() {
        UcwSequence {
            tokens: Vec::new(),
            families: Vec::new(),
            source_id: origin.to_string(),
        }
    } else {
        seqs.remove(0)
    })
}

pub fn parse_sequence_dataset(origin: &str, text: &str, classes: usize) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label_part, tokens_part) = line.split_once('\t').ok_or_else(|| {
            Error::CorpusParse {
                path: origin.into(),
                line: idx + 1,
                column: 1,
                reason: "expected <label>\\t<tokens>".into(),
            }
        })?;
        let label: u32 = label_part.trim().parse().map_err(|_| Error::CorpusParse {
            path: origin.into(),
            line: idx + 1,
            column: 1,
            reason: format!("bad label {label_part:?}"),
        })?;
        if label as usize >= classes {
            return Err(Error::IdOutOfRange {
                id: label,
                size: classes,
                context: format!("{origin}:{}", idx + 1),
            });
        }
        let sequence = parse_tokens(&format!("{origin}:{}", idx + 1), tokens_part)?;
        out.push(LabeledExample {
            sequence,
            labels: ExampleLabels::Sequence(label),
        });
    }
    Ok(out)
}

pub fn parse_token_dataset(origin: &str, text: &str, classes: usize) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label_part, tokens_part) = line.split_once('\t').ok_or_else(|| {
            Error::CorpusParse {
                path: origin.into(),
                line: idx + 1,
                column: 1,
                reason: "expected <labels>\\t<tokens>".into(),
            }
        })?;
        let labels: Vec<u32> = label_part
            .split(' ')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u32>().map_err(|_| Error::CorpusParse {
                    path: origin.into(),
                    line: idx + 1,
                    column: 1,
                    reason: format!("bad label {s:?}"),
                })
            })
            .collect::<Result<_>>()?;
        for &label in &labels {
            if label as usize >= classes {
                return Err(Error::IdOutOfRange {
                    id: label,
                    size: classes,
                    context: format!("{origin}:{}", idx + 1),
                });
            }
        }
        let sequence = parse_tokens(&format!("{origin}:{}", idx + 1), tokens_part)?;
        if labels.len() != sequence.tokens.len() {
            return Err(Error::CorpusParse {
                path: origin.into(),
                line: idx + 1,
                column: 1,
                reason: format!(
                    "{} labels for {} tokens",
                    labels.len(),
                    sequence.tokens.len()
                ),
            });
        }
        out.push(LabeledExample {
            sequence,
            labels: ExampleLabels::Tokens(labels),
        });
    }
    Ok(out)
}

/// Deterministic 90/10 split on the hash of the token text.
pub fn split_train_val(examples: Vec<LabeledExample>) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for example in examples {
        let digest = Sha256::digest(example.sequence.render_line().as_bytes());
        let bucket = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) % 10;
        if bucket < 9 {
            train.push(example);
        } else {
            val.push(example);
        }
    }
    (train, val)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_dataset_parses_and_checks_labels() {
        let text = "0\tBar Pitch_60+Duration_480\n1\tBar Pitch_62+Duration_480\n";
        let data = parse_sequence_dataset("t", text, 2).unwrap();
        assert_eq!(data.len(), 2);
        assert!(matches!(data[0].labels, ExampleLabels::Sequence(0)));
        assert!(matches!(
            parse_sequence_dataset("t", "7\tBar\n", 2),
            Err(Error::IdOutOfRange { .. })
        ));
    }

    #[test]
    fn token_dataset_requires_matching_counts() {
        let good = "0 1\tBar Pitch_60+Duration_480\n";
        assert_eq!(parse_token_dataset("t", good, 2).unwrap().len(), 1);
        let bad = "0\tBar Pitch_60+Duration_480\n";
        assert!(parse_token_dataset("t", bad, 2).is_err());
    }

    #[test]
    fn split_is_deterministic_and_roughly_ninety_ten() {
        let text: String = (0..200)
            .map(|i| format!("{}\tBar Pitch_{} Duration_480\n", i % 2, 30 + (i % 90)))
            .collect();
        let data = parse_sequence_dataset("t", &text, 2).unwrap();
        let (train1, val1) = split_train_val(data.clone());
        let (train2, val2) = split_train_val(data);
        assert_eq!(train1.len(), train2.len());
        assert_eq!(val1.len(), val2.len());
        assert!(val1.len() > 5 && val1.len() < 40, "val size {}", val1.len());
    }
}
