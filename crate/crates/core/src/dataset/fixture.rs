//! Synthetic manifest whose shape mirrors the reference corpus: same
//! dialogue, utterance, duration and gender counts per split. Text and
//! media are placeholders.

use std::collections::BTreeMap;

use super::{Dialogue, Split, SplitSpec, Utterance};
use crate::paralinguistics::{Gender, Monotony, PaceLevel, PitchLevel, ReverberationLevel, SpeechAnnotation};
use crate::speakers::SpeakerId;

pub struct SplitShape {
    pub split: Split,
    pub dialogues: usize,
    pub utterances: usize,
    pub seconds: u64,
    pub male: usize,
}

pub const REFERENCE_SHAPE: [SplitShape; 3] = [
    SplitShape { split: Split::Train, dialogues: 913, utterances: 25624, seconds: 63108, male: 10267 },
    SplitShape { split: Split::Valid, dialogues: 110, utterances: 3145, seconds: 7632, male: 1297 },
    SplitShape { split: Split::Test, dialogues: 97, utterances: 2640, seconds: 6552, male: 985 },
];

/// Spreads `k` of `n` evenly; true at the chosen indices.
fn spread(i: usize, k: usize, n: usize) -> bool {
    (i + 1) * k / n > i * k / n
}

/// Evenly divides `total` into `n` parts summing exactly to `total`.
fn share(i: usize, total: u64, n: usize) -> u64 {
    let n = n as u64;
    let i = i as u64;
    (i + 1) * total / n - i * total / n
}

pub fn build(shapes: &[SplitShape]) -> (Vec<Dialogue>, SplitSpec) {
    let mut dialogues = Vec::new();
    let mut assignments = BTreeMap::new();
    for shape in shapes {
        let total_ms = shape.seconds * 1000;
        let mut k = 0usize;
        for d in 0..shape.dialogues {
            let dialogue_id = format!("{}_{d:04}", shape.split);
            let len = share(d, shape.utterances as u64, shape.dialogues) as usize;
            let mut clock_ms = 0u64;
            let utterances = (0..len)
                .map(|j| {
                    let dur = share(k, total_ms, shape.utterances);
                    let gender = if spread(k, shape.male, shape.utterances) { Gender::Male } else { Gender::Female };
                    let start = clock_ms as f64 / 1000.0;
                    clock_ms += dur;
                    let end = clock_ms as f64 / 1000.0;
                    clock_ms += 250;
                    k += 1;
                    let utterance_id = format!("{dialogue_id}_u{j:03}");
                    Utterance {
                        audio_ref: format!("{dialogue_id}/{utterance_id}/audio.wav").into(),
                        utterance_id,
                        dialogue_id: dialogue_id.clone(),
                        speaker_id: SpeakerId((j % 2) as u32),
                        start,
                        end,
                        text: format!("line {j}"),
                        frame_refs: Vec::new(),
                        annotation: Some(SpeechAnnotation {
                            gender,
                            pitch_level: PitchLevel::Moderate,
                            monotony: Monotony::Expressive,
                            pace_level: PaceLevel::Moderate,
                            reverberation_level: ReverberationLevel::VeryClear,
                        }),
                        description: None,
                    }
                })
                .collect();
            assignments.insert(dialogue_id.clone(), shape.split);
            dialogues.push(Dialogue { dialogue_id, source_id: format!("fixture_{}", shape.split), utterances });
        }
    }
    (dialogues, SplitSpec { seed: 0, assignments })
}

pub fn reference_corpus() -> (Vec<Dialogue>, SplitSpec) {
    build(&REFERENCE_SHAPE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_dialogues_are_valid() {
        let (ds, spec) = reference_corpus();
        assert_eq!(ds.len(), 1120);
        assert!(ds.iter().all(|d| d.validate().is_ok()));
        assert_eq!(spec.assignments.len(), 1120);
    }

    #[test]
    fn helpers_are_exact() {
        assert_eq!((0..913).map(|i| share(i, 25624, 913)).sum::<u64>(), 25624);
        assert_eq!((0..3145).filter(|&i| spread(i, 1297, 3145)).count(), 1297);
    }
}
