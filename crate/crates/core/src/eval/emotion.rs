use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::paralinguistics::estimate_pitch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionLabel {
    Angry,
    Calm,
    Disgust,
    Fearful,
    Happy,
    Neutral,
    Sad,
    Surprised,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 8] = [
        EmotionLabel::Angry,
        EmotionLabel::Calm,
        EmotionLabel::Disgust,
        EmotionLabel::Fearful,
        EmotionLabel::Happy,
        EmotionLabel::Neutral,
        EmotionLabel::Sad,
        EmotionLabel::Surprised,
    ];
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmotionLabel::Angry => "angry",
            EmotionLabel::Calm => "calm",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fearful => "fearful",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Surprised => "surprised",
        })
    }
}

/// Speech emotion classifier bound to the eight-label contract.
pub trait EmotionAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn classify(&self, wave: &Waveform) -> Result<EmotionLabel>;
}

/// Fraction of turns `i >= 1` whose label equals turn `i - 1`'s.
pub fn consistency_from_labels(labels: &[EmotionLabel]) -> Result<f64> {
    if labels.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 utterances, got {}", labels.len())));
    }
    let matches = labels.windows(2).filter(|w| w[0] == w[1]).count();
    Ok(matches as f64 / (labels.len() - 1) as f64)
}

/// Classifies each waveform in order and scores consecutive agreement.
pub fn emotion_consistency(dialogue: &[Waveform], classifier: &dyn EmotionAdapter) -> Result<f64> {
    let labels = dialogue
        .iter()
        .enumerate()
        .map(|(i, w)| {
            classifier
                .classify(w)
                .map_err(|e| Error::adapter(classifier.name(), format!("utterance {i}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    consistency_from_labels(&labels)
}

/// Nearest-prototype classifier over pitch level, pitch spread and loudness.
/// A desk-scale stand-in for a trained recognizer.
#[derive(Debug, Clone, Default)]
pub struct ProsodyEmotionClassifier;

const PROTOTYPES: [(EmotionLabel, [f64; 3]); 8] = [
    // (f0 Hz, f0 std Hz, RMS dBFS)
    (EmotionLabel::Angry, [220.0, 45.0, -8.0]),
    (EmotionLabel::Calm, [140.0, 10.0, -24.0]),
    (EmotionLabel::Disgust, [130.0, 25.0, -16.0]),
    (EmotionLabel::Fearful, [260.0, 35.0, -20.0]),
    (EmotionLabel::Happy, [240.0, 60.0, -12.0]),
    (EmotionLabel::Neutral, [160.0, 18.0, -16.0]),
    (EmotionLabel::Sad, [120.0, 8.0, -30.0]),
    (EmotionLabel::Surprised, [300.0, 80.0, -10.0]),
];

impl EmotionAdapter for ProsodyEmotionClassifier {
    fn name(&self) -> &str {
        "prosody-prototype"
    }

    fn classify(&self, wave: &Waveform) -> Result<EmotionLabel> {
        let (f0, spread) = estimate_pitch(&wave.samples, wave.sample_rate)?;
        let power = wave.samples.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / wave.samples.len().max(1) as f64;
        let db = 10.0 * power.max(1e-12).log10();
        let x = [f0 / 40.0, spread / 10.0, db / 4.0];
        let best = PROTOTYPES
            .iter()
            .min_by(|a, b| {
                let d = |p: &[f64; 3]| (0..3).map(|k| (x[k] - [p[0] / 40.0, p[1] / 10.0, p[2] / 4.0][k]).powi(2)).sum::<f64>();
                d(&a.1).total_cmp(&d(&b.1))
            })
            .expect("eight prototypes");
        Ok(best.0)
    }
}
