use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{MediaSource, SceneAdapter, SceneBoundary};
use crate::error::{Error, Result};

/// A single grayscale frame on the 0-255 luma scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LumaFrame {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl LumaFrame {
    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; (width * height) as usize],
        }
    }

    /// Mean absolute per-pixel difference.
    pub fn mean_abs_diff(&self, other: &LumaFrame) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Shape(format!(
                "frame size changed from {}x{} to {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        if self.data.is_empty() {
            return Ok(0.0);
        }
        let total: u64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a.abs_diff(b) as u64)
            .sum();
        Ok(total as f64 / self.data.len() as f64)
    }
}

/// Random access to decoded video frames.
pub trait FrameSource {
    fn frame_rate(&self) -> f64;
    fn frame_count(&self) -> usize;
    fn luma(&self, index: usize) -> Result<LumaFrame>;
}

impl FrameSource for (f64, Vec<LumaFrame>) {
    fn frame_rate(&self) -> f64 {
        self.0
    }

    fn frame_count(&self) -> usize {
        self.1.len()
    }

    fn luma(&self, index: usize) -> Result<LumaFrame> {
        self.1
            .get(index)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("frame {index} out of range")))
    }
}

/// Frames extracted to a directory at a fixed rate, e.g.
/// `ffmpeg -i talk.mp4 -vf fps=10 frames/%06d.jpg`. Files are ordered by name.
#[derive(Debug, Clone)]
pub struct FrameDirectory {
    files: Vec<PathBuf>,
    fps: f64,
}

impl FrameDirectory {
    pub fn open(dir: impl AsRef<Path>, fps: f64) -> Result<Self> {
        let dir = dir.as_ref();
        if !(fps > 0.0) {
            return Err(Error::invalid(format!("frame rate must be positive, got {fps}")));
        }
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            let is_image = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| matches!(e.to_ascii_lowercase().as_str(), "jpg" | "jpeg" | "png"))
                .unwrap_or(false);
            if is_image {
                files.push(path);
            }
        }
        files.sort();
        Ok(Self { files, fps })
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }
}

impl FrameSource for FrameDirectory {
    fn frame_rate(&self) -> f64 {
        self.fps
    }

    fn frame_count(&self) -> usize {
        self.files.len()
    }

    fn luma(&self, index: usize) -> Result<LumaFrame> {
        let path = self
            .files
            .get(index)
            .ok_or_else(|| Error::invalid(format!("frame {index} out of range")))?;
        let img = image::open(path)?.to_luma8();
        Ok(LumaFrame {
            width: img.width(),
            height: img.height(),
            data: img.into_raw(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneDetectorConfig {
    /// Cut when the mean absolute luma difference reaches this value.
    pub threshold: f64,
    /// Minimum seconds between cuts (and from the start of the video).
    pub min_scene_len: f64,
}

impl Default for SceneDetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 27.0,
            min_scene_len: 0.6,
        }
    }
}

/// Content-change scene detection over consecutive frames.
pub fn detect_scenes(
    frames: &dyn FrameSource,
    duration: f64,
    config: &SceneDetectorConfig,
) -> Result<Vec<SceneBoundary>> {
    let fps = frames.frame_rate();
    let n = frames.frame_count();
    let mut boundaries = Vec::new();
    if n < 2 {
        return Ok(boundaries);
    }
    let mut last_cut = 0.0;
    let mut prev = frames.luma(0)?;
    for i in 1..n {
        let cur = frames.luma(i)?;
        let score = prev.mean_abs_diff(&cur)?;
        let t = i as f64 / fps;
        if score >= config.threshold && t - last_cut >= config.min_scene_len && t < duration {
            boundaries.push(SceneBoundary { time: t });
            last_cut = t;
        }
        prev = cur;
    }
    Ok(boundaries)
}

/// [`SceneAdapter`] over a [`FrameDirectory`] named by `MediaSource::video_uri`.
#[derive(Debug, Clone, Default)]
pub struct ContentSceneDetector {
    pub config: SceneDetectorConfig,
}

impl SceneAdapter for ContentSceneDetector {
    fn name(&self) -> &str {
        "content"
    }

    fn detect(&self, media: &MediaSource) -> Result<Vec<SceneBoundary>> {
        let frames = FrameDirectory::open(&media.video_uri, media.video_fps).map_err(|e| {
            Error::Source {
                source_id: media.id.clone(),
                message: e.to_string(),
            }
        })?;
        if frames.frame_count() == 0 {
            return Err(Error::Source {
                source_id: media.id.clone(),
                message: format!("no frames under {}", media.video_uri.display()),
            });
        }
        detect_scenes(&frames, media.duration, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shots(fps: f64, seconds: f64, cuts: &[f64]) -> (f64, Vec<LumaFrame>) {
        let n = (seconds * fps).round() as usize;
        let frames = (0..n)
            .map(|i| {
                let t = i as f64 / fps;
                let shot = cuts.iter().filter(|&&c| t >= c - 1e-9).count();
                // Alternate bright and dark shots with mild per-frame flicker.
                let base = if shot % 2 == 0 { 60 } else { 190 };
                LumaFrame::filled(16, 12, base + (i % 3) as u8)
            })
            .collect();
        (fps, frames)
    }

    #[test]
    fn static_shot_has_no_boundaries() {
        let video = shots(10.0, 8.0, &[]);
        let b = detect_scenes(&video, 8.0, &SceneDetectorConfig::default()).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn hard_cuts_are_found_at_construction_times() {
        let video = shots(10.0, 30.0, &[10.0, 20.0]);
        let b = detect_scenes(&video, 30.0, &SceneDetectorConfig::default()).unwrap();
        let times: Vec<f64> = b.iter().map(|b| b.time).collect();
        assert_eq!(times.len(), 2);
        assert!((times[0] - 10.0).abs() <= 0.2);
        assert!((times[1] - 20.0).abs() <= 0.2);
    }

    #[test]
    fn cuts_closer_than_min_scene_len_are_merged() {
        let video = shots(10.0, 10.0, &[3.0, 3.3]);
        let b = detect_scenes(&video, 10.0, &SceneDetectorConfig::default()).unwrap();
        assert_eq!(b, vec![SceneBoundary { time: 3.0 }]);
    }

    #[test]
    fn mismatched_frame_sizes_error() {
        let video = (10.0, vec![LumaFrame::filled(4, 4, 0), LumaFrame::filled(5, 4, 0)]);
        assert!(detect_scenes(&video, 1.0, &SceneDetectorConfig::default()).is_err());
    }

    #[test]
    fn frame_directory_reads_sorted_images() {
        let dir = tempfile::tempdir().unwrap();
        for (i, v) in [10u8, 10, 200, 200].iter().enumerate() {
            let img = image::GrayImage::from_pixel(8, 8, image::Luma([*v]));
            img.save(dir.path().join(format!("{:06}.png", i + 1))).unwrap();
        }
        let frames = FrameDirectory::open(dir.path(), 2.0).unwrap();
        assert_eq!(frames.frame_count(), 4);
        let b = detect_scenes(&frames, 2.0, &SceneDetectorConfig::default()).unwrap();
        assert_eq!(b, vec![SceneBoundary { time: 1.0 }]);
    }

    #[test]
    fn unreadable_video_is_a_source_error() {
        let media = MediaSource {
            id: "missing".into(),
            video_uri: "/nonexistent/frames".into(),
            audio_uri: "/nonexistent/a.wav".into(),
            duration: 5.0,
            sample_rate: 16_000,
            video_fps: 10.0,
        };
        let err = ContentSceneDetector::default().detect(&media).unwrap_err();
        assert!(matches!(err, Error::Source { .. }));
    }
}
