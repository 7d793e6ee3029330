//! Deterministic lookup-table adapters keyed by `(source_id, start, end)`.
//!
//! These stand in for external ASR, diarization and scene models in tests
//! and offline runs. A lookup matches when both clip ends agree within
//! [`KEY_TOLERANCE_S`]; a miss is reported as an adapter failure.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AsrAdapter, AsrSegment, AudioClip, DiarizationAdapter, DiarizationTurn, MediaSource,
    SceneAdapter, SceneBoundary,
};
use crate::error::{Error, Result};

pub const KEY_TOLERANCE_S: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry<T> {
    pub source_id: String,
    pub start: f64,
    pub end: f64,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClipTable<T> {
    entries: Vec<ClipEntry<T>>,
}

impl<T> Default for ClipTable<T> {
    fn default() -> Self {
        Self { entries: Vec::new() }
    }
}

impl<T: Clone + for<'de> Deserialize<'de>> ClipTable<T> {
    pub fn insert(&mut self, source_id: &str, start: f64, end: f64, value: T) {
        self.entries.push(ClipEntry {
            source_id: source_id.to_string(),
            start,
            end,
            value,
        });
    }

    pub fn get(&self, clip: &AudioClip) -> Option<&T> {
        self.entries
            .iter()
            .find(|e| {
                e.source_id == clip.source_id
                    && (e.start - clip.start).abs() <= KEY_TOLERANCE_S
                    && (e.end - clip.end).abs() <= KEY_TOLERANCE_S
            })
            .map(|e| &e.value)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub type AsrTable = ClipTable<Vec<AsrSegment>>;
pub type DiarizationTable = ClipTable<Vec<DiarizationTurn>>;

impl AsrAdapter for AsrTable {
    fn name(&self) -> &str {
        "asr-table"
    }

    fn transcribe(&self, _media: &MediaSource, clip: &AudioClip) -> Result<Vec<AsrSegment>> {
        self.get(clip).cloned().ok_or_else(|| {
            Error::adapter(
                "asr-table",
                format!("no entry for {} [{:.3}, {:.3}]", clip.source_id, clip.start, clip.end),
            )
        })
    }
}

impl DiarizationAdapter for DiarizationTable {
    fn name(&self) -> &str {
        "diarization-table"
    }

    fn diarize(&self, _media: &MediaSource, clip: &AudioClip) -> Result<Vec<DiarizationTurn>> {
        self.get(clip).cloned().ok_or_else(|| {
            Error::adapter(
                "diarization-table",
                format!("no entry for {} [{:.3}, {:.3}]", clip.source_id, clip.start, clip.end),
            )
        })
    }
}

/// Scene cuts per source; sources without an entry have none.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneTable {
    cuts: std::collections::BTreeMap<String, Vec<f64>>,
}

impl SceneTable {
    pub fn insert(&mut self, source_id: &str, times: Vec<f64>) {
        self.cuts.insert(source_id.to_string(), times);
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl SceneAdapter for SceneTable {
    fn name(&self) -> &str {
        "scene-table"
    }

    fn detect(&self, media: &MediaSource) -> Result<Vec<SceneBoundary>> {
        Ok(self
            .cuts
            .get(&media.id)
            .map(|ts| ts.iter().map(|&time| SceneBoundary { time }).collect())
            .unwrap_or_default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_tolerates_small_key_jitter() {
        let mut t = AsrTable::default();
        t.insert("a", 10.0, 20.0, vec![]);
        let near = AudioClip { source_id: "a".into(), start: 10.03, end: 19.98 };
        let far = AudioClip { source_id: "a".into(), start: 10.2, end: 20.0 };
        let other = AudioClip { source_id: "b".into(), start: 10.0, end: 20.0 };
        assert!(t.get(&near).is_some());
        assert!(t.get(&far).is_none());
        assert!(t.get(&other).is_none());
    }

    #[test]
    fn tables_parse_from_json() {
        let json = r#"[{"source_id":"a","start":0,"end":5,"value":[{"text":"hi","start":0.5,"end":1.0}]}]"#;
        let t: AsrTable = serde_json::from_str(json).unwrap();
        assert_eq!(t.len(), 1);
        let scenes: SceneTable = serde_json::from_str(r#"{"a":[10.0,20.0]}"#).unwrap();
        let m = MediaSource {
            id: "a".into(),
            video_uri: "v".into(),
            audio_uri: "a".into(),
            duration: 30.0,
            sample_rate: 16000,
            video_fps: 10.0,
        };
        assert_eq!(scenes.detect(&m).unwrap().len(), 2);
    }
}
