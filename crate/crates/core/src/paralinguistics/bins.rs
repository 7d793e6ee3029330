use serde::{Deserialize, Serialize};

use super::{
    Gender, Monotony, PaceLevel, PitchLevel, RawAnnotation, ReverberationLevel, SpeechAnnotation,
};

/// `[low, high)` band edges: below `low` is the low bin, at or above
/// `high` the high bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PitchBands {
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BinThresholds {
    pub pitch_male: PitchBands,
    pub pitch_female: PitchBands,
    /// F0 standard deviation (Hz) below which a voice is monotone.
    pub monotone_std: f64,
    pub pace_slow: f64,
    pub pace_fast: f64,
    /// Clarity (dB) at or above which the recording is very clear.
    pub clarity_very_clear: f64,
    /// Clarity (dB) below which the recording is echoey.
    pub clarity_echoey: f64,
}

impl Default for BinThresholds {
    fn default() -> Self {
        Self {
            pitch_male: PitchBands { low: 110.0, high: 145.0 },
            pitch_female: PitchBands { low: 170.0, high: 220.0 },
            monotone_std: 25.0,
            pace_slow: 2.2,
            pace_fast: 3.2,
            clarity_very_clear: 15.0,
            clarity_echoey: 5.0,
        }
    }
}

pub fn bin_annotations(raw: &RawAnnotation, t: &BinThresholds) -> SpeechAnnotation {
    let bands = match raw.gender {
        Gender::Male => t.pitch_male,
        Gender::Female => t.pitch_female,
    };
    let pitch_level = if raw.f0_mean < bands.low {
        PitchLevel::Low
    } else if raw.f0_mean < bands.high {
        PitchLevel::Moderate
    } else {
        PitchLevel::High
    };
    let monotony = if raw.f0_std < t.monotone_std {
        Monotony::Monotone
    } else {
        Monotony::Expressive
    };
    let pace_level = if raw.pace < t.pace_slow {
        PaceLevel::Slow
    } else if raw.pace < t.pace_fast {
        PaceLevel::Moderate
    } else {
        PaceLevel::Fast
    };
    // NaN comparisons fall through to the echoey bin.
    let reverberation_level = if raw.reverberation >= t.clarity_very_clear {
        ReverberationLevel::VeryClear
    } else if raw.reverberation >= t.clarity_echoey {
        ReverberationLevel::SlightlyEchoey
    } else {
        ReverberationLevel::Echoey
    };
    SpeechAnnotation {
        gender: raw.gender,
        pitch_level,
        monotony,
        pace_level,
        reverberation_level,
    }
}
