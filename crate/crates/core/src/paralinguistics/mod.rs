//! Speech annotations (gender, pitch, monotony, pace, reverberation) and
//! the natural-language voice descriptions rendered from them.

mod bins;
mod describe;
mod gender;
mod pitch;
mod reverb;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::error::{Error, Result};

pub use bins::{bin_annotations, BinThresholds, PitchBands};
pub use describe::{
    mentions_all_attributes, render_description, render_template, DescriptionAdapter,
    RenderedDescription, Renderer, VoiceDescription,
};
pub use gender::{classify_gender, GenderAdapter, GenderEstimate, PitchGenderClassifier};
pub use pitch::{estimate_pitch, pitch_track, MAX_F0_HZ, MIN_F0_HZ, MIN_PITCH_INPUT_S};
pub use reverb::{estimate_reverberation, CLARITY_RANGE_DB, MIN_REVERB_INPUT_S};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PitchLevel {
    Low,
    Moderate,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotony {
    Monotone,
    Expressive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaceLevel {
    Slow,
    Moderate,
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReverberationLevel {
    VeryClear,
    SlightlyEchoey,
    Echoey,
}

macro_rules! words {
    ($ty:ty { $($variant:ident => $word:literal),* $(,)? }) => {
        impl $ty {
            pub fn word(self) -> &'static str {
                match self { $(Self::$variant => $word),* }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.word())
            }
        }
    };
}

words!(Gender { Male => "male", Female => "female" });
words!(PitchLevel { Low => "low", Moderate => "moderate", High => "high" });
words!(Monotony { Monotone => "monotone", Expressive => "expressive" });
words!(PaceLevel { Slow => "slow", Moderate => "moderate", Fast => "fast" });
words!(ReverberationLevel {
    VeryClear => "very clear",
    SlightlyEchoey => "slightly echoey",
    Echoey => "echoey",
});

/// Continuous measurements before binning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawAnnotation {
    pub f0_mean: f64,
    pub f0_std: f64,
    /// Words per second.
    pub pace: f64,
    /// Clarity in dB; higher is drier.
    pub reverberation: f64,
    pub gender: Gender,
    pub gender_confidence: f64,
}

impl RawAnnotation {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f0_mean >= 0.0
            && self.f0_std >= 0.0
            && self.pace >= 0.0
            && self.reverberation.is_finite()
            && (0.0..=1.0).contains(&self.gender_confidence);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("raw annotation out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpeechAnnotation {
    pub gender: Gender,
    pub pitch_level: PitchLevel,
    pub monotony: Monotony,
    pub pace_level: PaceLevel,
    pub reverberation_level: ReverberationLevel,
}

/// Whitespace-delimited words per second.
pub fn estimate_pace(text: &str, duration_s: f64) -> Result<f64> {
    if !(duration_s > 0.0) {
        return Err(Error::invalid(format!("duration must be positive, got {duration_s}")));
    }
    Ok(text.split_whitespace().count() as f64 / duration_s)
}

/// Measures every raw attribute of one utterance.
pub fn measure(audio: &Waveform, text: &str, duration_s: f64, gender: GenderEstimate) -> Result<RawAnnotation> {
    let (f0_mean, f0_std) = estimate_pitch(&audio.samples, audio.sample_rate)?;
    let pace = estimate_pace(text, duration_s)?;
    let reverberation = estimate_reverberation(&audio.samples, audio.sample_rate)?;
    let raw = RawAnnotation {
        f0_mean,
        f0_std,
        pace,
        reverberation,
        gender: gender.label,
        gender_confidence: gender.confidence,
    };
    raw.validate()?;
    Ok(raw)
}
