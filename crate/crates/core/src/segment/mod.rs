//! Raw conversation video to timed utterance drafts.
//!
//! The flow is scene split, then speaker diarization for clips the ASR
//! model cannot timestamp reliably, then ASR on every clip of at most
//! `max_clip_s` seconds. Dialogue boundaries come from a human-authored
//! sidecar and are applied afterwards with [`apply_dialogue_splits`].

mod dialogue_split;
mod pipeline;
mod scene;
pub mod synthetic;
pub mod tables;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use dialogue_split::{apply_dialogue_splits, DialogueSplitAnnotation, SplitPoint, SplitReason};
pub use pipeline::{segment_utterances, split_by_scenes, write_drafts, read_drafts, DEFAULT_MAX_CLIP_S};
pub use scene::{
    detect_scenes, ContentSceneDetector, FrameDirectory, FrameSource, LumaFrame, SceneDetectorConfig,
};

/// One raw conversation recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaSource {
    pub id: String,
    /// Directory of extracted frames (see [`FrameDirectory`]).
    pub video_uri: PathBuf,
    /// Mono WAV extracted from the video.
    pub audio_uri: PathBuf,
    pub duration: f64,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
    #[serde(default = "default_video_fps")]
    pub video_fps: f64,
}

fn default_sample_rate() -> u32 {
    crate::audio::CORPUS_SAMPLE_RATE
}

fn default_video_fps() -> f64 {
    10.0
}

impl MediaSource {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(crate::Error::Source {
                source_id: self.id.clone(),
                message: format!("duration must be positive, got {}", self.duration),
            });
        }
        if self.sample_rate == 0 {
            return Err(crate::Error::Source {
                source_id: self.id.clone(),
                message: "sample rate must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SceneBoundary {
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioClip {
    pub source_id: String,
    pub start: f64,
    pub end: f64,
}

impl AudioClip {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrSegment {
    pub text: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiarizationTurn {
    pub start: f64,
    pub end: f64,
    pub local_speaker: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AsrDirect,
    SceneThenAsr,
    DiarizedThenAsr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceDraft {
    pub source_id: String,
    pub start: f64,
    pub end: f64,
    pub text: String,
    pub provenance: Provenance,
}

impl UtteranceDraft {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// Speech recognizer with timestamps. Returned segment times are absolute
/// within the source.
pub trait AsrAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn transcribe(&self, media: &MediaSource, clip: &AudioClip) -> Result<Vec<AsrSegment>>;
}

/// Speaker diarizer. Returned turn times are absolute within the source.
pub trait DiarizationAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn diarize(&self, media: &MediaSource, clip: &AudioClip) -> Result<Vec<DiarizationTurn>>;
}

pub trait SceneAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn detect(&self, media: &MediaSource) -> Result<Vec<SceneBoundary>>;
}
