//! Seeded toy model configuration and training examples for smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, ModelExample, TinyLmConfig, UtteranceInput};
use crate::fusion::{FeatureSequence, FusionConfig, AUDIO_PAD, VIDEO_PAD};
use crate::speakers::SpeakerId;

/// Default backbone with a one-block, four-query fusion stage over 6-d video and 5-d audio features.
pub fn tiny_config() -> ModelConfig {
    let lm = TinyLmConfig::default();
    ModelConfig {
        fusion: FusionConfig {
            n_query: 4,
            hidden: 32,
            heads: 4,
            blocks: 1,
            ffn_dim: 64,
            video_feature_dim: 6,
            audio_feature_dim: 5,
            lm_dim: lm.d_model,
        },
        lm,
        ..ModelConfig::default()
    }
}

fn features(rng: &mut ChaCha8Rng, rows: usize, dim: usize, pad: usize) -> FeatureSequence {
    let data = (0..rows).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    FeatureSequence::from_rows(data, dim, pad).expect("rows fit the pad")
}

/// An utterance with random features sized for [`tiny_config`].
pub fn utterance(rng: &mut ChaCha8Rng, speaker: u32, text: &str) -> UtteranceInput {
    UtteranceInput {
        speaker: SpeakerId(speaker),
        text: text.into(),
        video: Some(features(rng, 6, 6, VIDEO_PAD)),
        audio: Some(features(rng, 40, 5, AUDIO_PAD)),
    }
}

pub fn synthetic_examples(n: usize, seed: u64) -> Vec<ModelExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let responses = ["Yes.", "No way.", "Sure thing.", "Maybe later.", "I agree.", "Not today.", "Thanks!", "Why not?", "Go on.", "Really?"];
    let voices = ["male", "female"];
    let pitches = ["low", "moderate", "high"];
    (0..n)
        .map(|i| {
            let history = (0..1 + i % 2)
                .map(|j| utterance(&mut rng, (j % 2) as u32, &format!("turn {i}.{j}")))
                .collect();
            ModelExample {
                history,
                target_text: responses[i % responses.len()].into(),
                target_description: format!("A {} speaker with a {}-pitched voice.", voices[i % 2], pitches[i % 3]),
            }
        })
        .collect()
}
