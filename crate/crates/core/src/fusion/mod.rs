//! Per-modality Q-Former adapters, projection into the language model's
//! embedding space, and concatenation into utterance representations.

mod features;
mod qformer;

use std::fmt;

use candle_core::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, ParamStore};

pub use features::{
    audio_features, load_frames, sample_frame_indices, sample_frames, uniform_indices, video_features, AudioEncoder, FeatureSequence,
    FrameSequence, GridLumaEncoder, LogMelEncoder, VisualEncoder, AUDIO_PAD, VIDEO_FPS, VIDEO_PAD,
};
pub use qformer::{QFormer, QFormerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Video,
    Audio,
    Text,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Video => "video",
            Modality::Audio => "audio",
            Modality::Text => "text",
        })
    }
}

/// Which modalities feed the model; the ablation rows toggle these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModalitySet {
    pub video: bool,
    pub audio: bool,
    pub text: bool,
}

impl ModalitySet {
    pub const ALL: ModalitySet = ModalitySet { video: true, audio: true, text: true };
    pub const TEXT: ModalitySet = ModalitySet { video: false, audio: false, text: true };

    pub fn contains(&self, m: Modality) -> bool {
        match m {
            Modality::Video => self.video,
            Modality::Audio => self.audio,
            Modality::Text => self.text,
        }
    }

    pub fn label(&self) -> String {
        let parts: Vec<&str> = [(self.text, "Text"), (self.audio, "Audio"), (self.video, "Video")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, l)| *l)
            .collect();
        parts.join(" + ")
    }
}

impl Default for ModalitySet {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionConfig {
    pub n_query: usize,
    pub hidden: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn_dim: usize,
    pub video_feature_dim: usize,
    pub audio_feature_dim: usize,
    pub lm_dim: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            n_query: 32,
            hidden: 768,
            heads: 12,
            blocks: 2,
            ffn_dim: 3072,
            video_feature_dim: 66,
            audio_feature_dim: 40,
            lm_dim: 768,
        }
    }
}

impl FusionConfig {
    fn qformer(&self, feature_dim: usize) -> QFormerConfig {
        QFormerConfig {
            n_query: self.n_query,
            hidden: self.hidden,
            heads: self.heads,
            blocks: self.blocks,
            ffn_dim: self.ffn_dim,
            feature_dim,
        }
    }
}

/// Separate video and audio Q-Formers, each with its own projection.
#[derive(Debug, Clone)]
pub struct FusionModel {
    pub config: FusionConfig,
    video: QFormer,
    audio: QFormer,
}

impl FusionModel {
    pub fn new(config: FusionConfig) -> Self {
        Self {
            video: QFormer::new("video_qformer", config.qformer(config.video_feature_dim)),
            audio: QFormer::new("audio_qformer", config.qformer(config.audio_feature_dim)),
            config,
        }
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        self.video.init(store, rng)?;
        self.audio.init(store, rng)?;
        let std = 1.0 / (self.config.hidden as f64).sqrt();
        store.linear("video_proj", self.config.hidden, self.config.lm_dim, std, rng)?;
        store.linear("audio_proj", self.config.hidden, self.config.lm_dim, std, rng)?;
        Ok(())
    }

    /// Query tokens for one modality, projected to `(n_query, lm_dim)`.
    pub fn encode(&self, store: &ParamStore, modality: Modality, feats: &FeatureSequence) -> Result<Tensor> {
        let (qf, proj) = match modality {
            Modality::Video => (&self.video, "video_proj"),
            Modality::Audio => (&self.audio, "audio_proj"),
            Modality::Text => return Err(Error::invalid("text is embedded by the language model")),
        };
        let x = feats.to_tensor(store.dtype(), store.device())?;
        let tokens = qf.forward(store, &x, &feats.mask())?;
        project_to_lm(
            &tokens,
            &store.get(&format!("{proj}.weight"))?,
            &store.get(&format!("{proj}.bias"))?,
        )
    }
}

/// Row-wise affine map `tokens W^T + b` with `W` of shape `(lm_dim, hidden)`.
pub fn project_to_lm(tokens: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (lm_dim, _) = weight.dims2()?;
    if bias.elem_count() != lm_dim {
        return Err(Error::Shape(format!("bias has {} entries, expected {lm_dim}", bias.elem_count())));
    }
    nn::affine(tokens, weight, &bias.reshape((1, lm_dim))?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub modality: Modality,
    pub start: usize,
    pub len: usize,
}

/// `[video ∥ audio ∥ text]` embeddings with the span of each present segment.
#[derive(Debug, Clone)]
pub struct UtteranceRepresentation {
    pub embeddings: Tensor,
    pub segments: Vec<Segment>,
}

impl UtteranceRepresentation {
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn boundaries(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.start).collect()
    }
}

pub fn fuse_utterance(video: Option<&Tensor>, audio: Option<&Tensor>, text: Option<&Tensor>) -> Result<UtteranceRepresentation> {
    let parts: Vec<(Modality, &Tensor)> = [(Modality::Video, video), (Modality::Audio, audio), (Modality::Text, text)]
        .into_iter()
        .filter_map(|(m, t)| t.map(|t| (m, t)))
        .collect();
    if parts.is_empty() {
        return Err(Error::invalid("utterance has no modality to fuse"));
    }
    let width = parts[0].1.dims2()?.1;
    let mut segments = Vec::with_capacity(parts.len());
    let mut start = 0;
    for (m, t) in &parts {
        let (n, d) = t.dims2()?;
        if d != width {
            return Err(Error::Shape(format!("{m} embeddings have width {d}, expected {width}")));
        }
        segments.push(Segment { modality: *m, start, len: n });
        start += n;
    }
    let tensors: Vec<&Tensor> = parts.iter().map(|(_, t)| *t).collect();
    Ok(UtteranceRepresentation { embeddings: Tensor::cat(&tensors, 0)?, segments })
}

#[cfg(test)]
mod tests;
