use serde::{Deserialize, Serialize};

use crate::audio::Waveform;
use crate::dsp;
use crate::error::{Error, Result};

/// Unit-norm speaker embedding for one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechEmbedding {
    pub utterance_id: String,
    pub vector: Vec<f32>,
}

impl SpeechEmbedding {
    /// Normalizes `raw` on ingestion.
    pub fn new(utterance_id: impl Into<String>, raw: &[f32]) -> Result<Self> {
        let utterance_id = utterance_id.into();
        let vector = normalize(raw).ok_or_else(|| {
            Error::invalid(format!("embedding for `{utterance_id}` has zero norm"))
        })?;
        Ok(Self {
            utterance_id,
            vector,
        })
    }
}

/// Speaker-verification style extractor with a fixed output dimension.
pub trait EmbeddingAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, audio: &Waveform) -> Result<Vec<f32>>;
}

pub fn normalize(v: &[f32]) -> Option<Vec<f32>> {
    let norm = v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    Some(v.iter().map(|&x| (x as f64 / norm) as f32).collect())
}

pub fn cosine_similarity(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn embed_utterances<'a, I>(clips: I, extractor: &dyn EmbeddingAdapter) -> Result<Vec<SpeechEmbedding>>
where
    I: IntoIterator<Item = (&'a str, &'a Waveform)>,
{
    clips
        .into_iter()
        .map(|(id, audio)| {
            let raw = extractor.embed(audio)?;
            if raw.len() != extractor.dim() {
                return Err(Error::Contract {
                    adapter: extractor.name().to_string(),
                    message: format!("returned {} values, declared {}", raw.len(), extractor.dim()),
                });
            }
            SpeechEmbedding::new(id, &raw)
        })
        .collect()
}

/// Long-term average log spectrum in mel-spaced bands with the mean
/// removed. A weak but dependency-free stand-in for a trained speaker
/// verification model.
#[derive(Debug, Clone)]
pub struct SpectrumEmbedder {
    pub bands: usize,
}

impl Default for SpectrumEmbedder {
    fn default() -> Self {
        Self { bands: 40 }
    }
}

impl EmbeddingAdapter for SpectrumEmbedder {
    fn name(&self) -> &str {
        "spectrum"
    }

    fn dim(&self) -> usize {
        self.bands
    }

    fn embed(&self, audio: &Waveform) -> Result<Vec<f32>> {
        let frames = dsp::log_band_energies(&audio.samples, audio.sample_rate, self.bands);
        if frames.is_empty() {
            return Err(Error::adapter("spectrum", "clip shorter than one analysis frame"));
        }
        let mut mean = vec![0.0f32; self.bands];
        for f in &frames {
            for (m, v) in mean.iter_mut().zip(f) {
                *m += v / frames.len() as f32;
            }
        }
        let avg = mean.iter().sum::<f32>() / self.bands as f32;
        Ok(mean.into_iter().map(|m| m - avg).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(Vec<f32>);

    impl EmbeddingAdapter for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn embed(&self, _audio: &Waveform) -> Result<Vec<f32>> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn output_is_unit_normalized() {
        let audio = Waveform::new(vec![0.0; 10], 16_000);
        let out = embed_utterances([("u1", &audio)], &Fixed(vec![3.0, 4.0])).unwrap();
        assert_eq!(out[0].utterance_id, "u1");
        assert!((out[0].vector[0] - 0.6).abs() < 1e-6);
        assert!((out[0].vector[1] - 0.8).abs() < 1e-6);
    }

    #[test]
    fn identical_clips_embed_identically() {
        let audio = Waveform::new((0..8000).map(|i| (i as f32 * 0.05).sin()).collect(), 16_000);
        let e = SpectrumEmbedder::default();
        let out = embed_utterances([("a", &audio), ("b", &audio)], &e).unwrap();
        assert_eq!(out[0].vector, out[1].vector);
        let norm: f32 = out[0].vector.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_vector_is_an_error() {
        let audio = Waveform::new(vec![0.0; 10], 16_000);
        assert!(embed_utterances([("z", &audio)], &Fixed(vec![0.0, 0.0])).is_err());
    }

    #[test]
    fn wrong_dimension_violates_contract() {
        struct Liar;
        impl EmbeddingAdapter for Liar {
            fn name(&self) -> &str {
                "liar"
            }
            fn dim(&self) -> usize {
                4
            }
            fn embed(&self, _audio: &Waveform) -> Result<Vec<f32>> {
                Ok(vec![1.0; 3])
            }
        }
        let audio = Waveform::new(vec![0.0; 10], 16_000);
        assert!(matches!(
            embed_utterances([("x", &audio)], &Liar),
            Err(Error::Contract { .. })
        ));
    }
}
