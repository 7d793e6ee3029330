//! Dialogue/utterance persistence, splits, statistics and training examples.

mod examples;
pub mod fixture;
mod manifest;
mod splits;
mod stats;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::paralinguistics::SpeechAnnotation;
use crate::segment::UtteranceDraft;
use crate::speakers::SpeakerId;

pub use examples::{build_training_examples, read_examples, write_examples, TrainingExample};
pub use manifest::{read_manifest, read_manifest_file, write_manifest, write_manifest_file, SCHEMA_VERSION};
pub use splits::{make_splits, Split, SplitSpec, DEFAULT_SPLIT_RATIOS};
pub use stats::{compute_stats, DatasetStats, SplitStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub utterance_id: String,
    pub dialogue_id: String,
    pub speaker_id: SpeakerId,
    pub start: f64,
    pub end: f64,
    pub text: String,
    pub audio_ref: PathBuf,
    #[serde(default)]
    pub frame_refs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<SpeechAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Utterance {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub source_id: String,
    pub utterances: Vec<Utterance>,
}

impl Dialogue {
    /// Checks ordering, overlap, minimum size and dense speaker IDs.
    pub fn validate(&self) -> Result<(), String> {
        if self.utterances.len() < 2 {
            return Err(format!(
                "dialogue `{}` has {} utterance(s); a conversation needs at least 2",
                self.dialogue_id,
                self.utterances.len()
            ));
        }
        for u in &self.utterances {
            if u.dialogue_id != self.dialogue_id {
                return Err(format!("utterance `{}` names dialogue `{}`", u.utterance_id, u.dialogue_id));
            }
            if !(u.end > u.start) {
                return Err(format!("utterance `{}` has end {} <= start {}", u.utterance_id, u.end, u.start));
            }
        }
        for w in self.utterances.windows(2) {
            if w[1].start < w[0].end {
                return Err(format!(
                    "utterances `{}` and `{}` overlap or are out of order",
                    w[0].utterance_id, w[1].utterance_id
                ));
            }
        }
        let max = self.utterances.iter().map(|u| u.speaker_id.0).max().unwrap_or(0);
        for k in 0..=max {
            if !self.utterances.iter().any(|u| u.speaker_id.0 == k) {
                return Err(format!("dialogue `{}` skips speaker ID {k}", self.dialogue_id));
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.utterances.iter().map(Utterance::duration).sum()
    }
}

/// Media paths: `{root}/{dialogue_id}/{utterance_id}/audio.wav` and
/// `{root}/{dialogue_id}/{utterance_id}/frame_NNN.jpg`.
#[derive(Debug, Clone)]
pub struct MediaLayout {
    pub root: PathBuf,
}

impl MediaLayout {
    pub fn new(root: impl AsRef<Path>) -> Self {
        Self { root: root.as_ref().to_path_buf() }
    }

    pub fn utterance_dir(&self, dialogue_id: &str, utterance_id: &str) -> PathBuf {
        self.root.join(dialogue_id).join(utterance_id)
    }

    pub fn audio(&self, dialogue_id: &str, utterance_id: &str) -> PathBuf {
        self.utterance_dir(dialogue_id, utterance_id).join("audio.wav")
    }

    pub fn frame(&self, dialogue_id: &str, utterance_id: &str, index: usize) -> PathBuf {
        self.utterance_dir(dialogue_id, utterance_id).join(format!("frame_{index:03}.jpg"))
    }
}

/// Stable utterance ID for a draft: source and start time in milliseconds.
pub fn draft_utterance_id(draft: &UtteranceDraft) -> String {
    format!("{}_{:08}", draft.source_id, (draft.start * 1000.0).round() as i64)
}

/// Turns grouped drafts into dialogues. Speaker IDs are taken from
/// `speakers` (one per draft, in group order); groups with fewer than two
/// drafts are not conversations and are dropped.
pub fn dialogues_from_groups(
    source_id: &str,
    groups: &[Vec<UtteranceDraft>],
    speakers: &[Vec<SpeakerId>],
    layout: &MediaLayout,
) -> Vec<Dialogue> {
    groups
        .iter()
        .zip(speakers)
        .filter(|(g, _)| g.len() >= 2)
        .enumerate()
        .map(|(k, (group, ids))| {
            let dialogue_id = format!("{source_id}_d{k:03}");
            let utterances = group
                .iter()
                .zip(ids)
                .map(|(d, &speaker_id)| {
                    let utterance_id = draft_utterance_id(d);
                    Utterance {
                        audio_ref: layout.audio(&dialogue_id, &utterance_id),
                        utterance_id,
                        dialogue_id: dialogue_id.clone(),
                        speaker_id,
                        start: d.start,
                        end: d.end,
                        text: d.text.clone(),
                        frame_refs: Vec::new(),
                        annotation: None,
                        description: None,
                    }
                })
                .collect();
            Dialogue { dialogue_id, source_id: source_id.to_string(), utterances }
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::test_support::dialogue;
    use super::*;

    #[test]
    fn validation_catches_broken_dialogues() {
        assert!(dialogue("d", 3).validate().is_ok());
        assert!(dialogue("d", 1).validate().is_err());
        let mut overlapping = dialogue("d", 3);
        overlapping.utterances[1].start = 1.0;
        assert!(overlapping.validate().is_err());
        let mut sparse = dialogue("d", 3);
        sparse.utterances[1].speaker_id = SpeakerId(2);
        assert!(sparse.validate().is_err());
    }

    #[test]
    fn layout_paths() {
        let l = MediaLayout::new("/media");
        assert_eq!(l.audio("d1", "u2"), PathBuf::from("/media/d1/u2/audio.wav"));
        assert_eq!(l.frame("d1", "u2", 7), PathBuf::from("/media/d1/u2/frame_007.jpg"));
    }
}
