use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Dialogue, Utterance};
use crate::error::{Error, Result};
use crate::speakers::SpeakerId;

/// Context `u_1..u_t` and the next turn's text and voice description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub dialogue_id: String,
    pub history: Vec<Utterance>,
    pub target_utterance_id: String,
    pub target_text: String,
    pub target_description: String,
    pub target_speaker_id: SpeakerId,
}

pub fn build_training_examples(dialogue: &Dialogue) -> Vec<TrainingExample> {
    let us = &dialogue.utterances;
    (1..us.len())
        .filter_map(|t| {
            let target = &us[t];
            let description = match target.description.as_deref().map(str::trim) {
                Some(d) if !d.is_empty() => d.to_string(),
                _ => {
                    tracing::warn!(utterance = %target.utterance_id, "target has no description; example skipped");
                    return None;
                }
            };
            if target.text.trim().is_empty() {
                tracing::warn!(utterance = %target.utterance_id, "target has empty text; example skipped");
                return None;
            }
            Some(TrainingExample {
                dialogue_id: dialogue.dialogue_id.clone(),
                history: us[..t].to_vec(),
                target_utterance_id: target.utterance_id.clone(),
                target_text: target.text.clone(),
                target_description: description,
                target_speaker_id: target.speaker_id,
            })
        })
        .collect()
}

pub fn write_examples(mut w: impl Write, examples: &[TrainingExample]) -> Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n").map_err(|e| Error::io("<examples>", e))?;
    }
    Ok(())
}

pub fn read_examples(r: impl BufRead) -> Result<Vec<TrainingExample>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<examples>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Manifest { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::dialogue;

    #[test]
    fn one_example_per_later_turn() {
        assert_eq!(build_training_examples(&dialogue("d", 5)).len(), 4);
    }

    #[test]
    fn two_turns_give_single_example() {
        let d = dialogue("d", 2);
        let ex = build_training_examples(&d);
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].history, vec![d.utterances[0].clone()]);
        assert_eq!(ex[0].target_text, d.utterances[1].text);
    }

    #[test]
    fn missing_description_skips_that_target() {
        let mut d = dialogue("d", 5);
        d.utterances[3].description = None;
        let ex = build_training_examples(&d);
        assert_eq!(ex.len(), 3);
        assert!(ex.iter().all(|e| e.target_utterance_id != d.utterances[3].utterance_id));
    }

    #[test]
    fn history_precedes_target() {
        let d = dialogue("d", 6);
        for ex in build_training_examples(&d) {
            let target = d.utterances.iter().find(|u| u.utterance_id == ex.target_utterance_id).unwrap();
            assert!(ex.history.iter().all(|h| h.end <= target.start));
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let ex = build_training_examples(&dialogue("d", 4));
        let mut buf = Vec::new();
        write_examples(&mut buf, &ex).unwrap();
        assert_eq!(read_examples(buf.as_slice()).unwrap(), ex);
    }
}
