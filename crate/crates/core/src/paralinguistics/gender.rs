use serde::{Deserialize, Serialize};

use super::{estimate_pitch, Gender};
use crate::audio::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenderEstimate {
    pub label: Gender,
    pub confidence: f64,
}

/// Two-class voice gender classifier. Confidence is the arg-max class
/// probability and therefore never below 0.5.
pub trait GenderAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn classify(&self, audio: &Waveform) -> Result<GenderEstimate>;
}

pub fn classify_gender(utterance_id: &str, audio: &Waveform, adapter: &dyn GenderAdapter) -> Result<GenderEstimate> {
    let est = adapter.classify(audio).map_err(|e| Error::Adapter {
        adapter: adapter.name().to_string(),
        message: format!("utterance `{utterance_id}`: {e}"),
    })?;
    if !(0.5..=1.0).contains(&est.confidence) {
        return Err(Error::Contract {
            adapter: adapter.name().to_string(),
            message: format!(
                "utterance `{utterance_id}`: confidence {} outside [0.5, 1] for a two-class arg-max",
                est.confidence
            ),
        });
    }
    Ok(est)
}

/// Mean-F0 threshold classifier; confidence grows with distance from the
/// boundary. Unvoiced clips fall back to the boundary with confidence 0.5.
#[derive(Debug, Clone)]
pub struct PitchGenderClassifier {
    pub boundary_hz: f64,
}

impl Default for PitchGenderClassifier {
    fn default() -> Self {
        Self { boundary_hz: 165.0 }
    }
}

impl GenderAdapter for PitchGenderClassifier {
    fn name(&self) -> &str {
        "pitch-threshold"
    }

    fn classify(&self, audio: &Waveform) -> Result<GenderEstimate> {
        let (f0, _) = estimate_pitch(&audio.samples, audio.sample_rate)?;
        if f0 <= 0.0 {
            return Ok(GenderEstimate { label: Gender::Female, confidence: 0.5 });
        }
        let z = (f0 / self.boundary_hz).ln() * 6.0;
        let p_female = 1.0 / (1.0 + (-z).exp());
        Ok(if p_female >= 0.5 {
            GenderEstimate { label: Gender::Female, confidence: p_female }
        } else {
            GenderEstimate { label: Gender::Male, confidence: 1.0 - p_female }
        })
    }
}
