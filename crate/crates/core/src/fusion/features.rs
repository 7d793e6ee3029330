use std::path::Path;

use candle_core::{DType, Device, Tensor};

use crate::audio::Waveform;
use crate::dsp;
use crate::error::{Error, Result};
use crate::segment::{FrameSource, LumaFrame};

pub const VIDEO_FPS: f64 = 3.0;
pub const VIDEO_PAD: usize = 50;
pub const AUDIO_PAD: usize = 800;

/// Frames sampled from one utterance, padded with black frames.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub frames: Vec<LumaFrame>,
    pub valid_count: usize,
    pub pad_size: usize,
}

impl FrameSequence {
    pub fn mask(&self) -> Vec<bool> {
        (0..self.pad_size).map(|i| i < self.valid_count).collect()
    }

    pub fn valid(&self) -> &[LumaFrame] {
        &self.frames[..self.valid_count]
    }
}

/// Indices of `keep` items spread uniformly over `n`.
pub fn uniform_indices(n: usize, keep: usize) -> Vec<usize> {
    if keep >= n {
        return (0..n).collect();
    }
    (0..keep).map(|k| k * n / keep).collect()
}

/// Source frame indices for `window` sampled at `fps`: `floor(duration * fps)`
/// picks, at least one, uniformly thinned to `pad_size` when there are more.
pub fn sample_frame_indices(
    frame_count: usize,
    frame_rate: f64,
    window: (f64, f64),
    fps: f64,
    pad_size: usize,
) -> Result<Vec<usize>> {
    let (start, end) = window;
    if frame_count == 0 || !(frame_rate > 0.0) {
        return Err(Error::invalid("video has no decodable frames"));
    }
    if !(end > start) || pad_size == 0 {
        return Err(Error::invalid(format!("empty sampling window {start}..{end}")));
    }
    let wanted = (((end - start) * fps + 1e-9).floor() as usize).max(1);
    let last = frame_count - 1;
    Ok(uniform_indices(wanted, pad_size)
        .into_iter()
        .map(|k| (((start + k as f64 / fps) * frame_rate).round() as usize).min(last))
        .collect())
}

/// Decoded frames at [`sample_frame_indices`], padded with black frames.
pub fn sample_frames(video: &dyn FrameSource, window: (f64, f64), fps: f64, pad_size: usize) -> Result<FrameSequence> {
    let picks = sample_frame_indices(video.frame_count(), video.frame_rate(), window, fps, pad_size)?;
    let mut frames = Vec::with_capacity(pad_size);
    for idx in picks {
        frames.push(video.luma(idx)?);
    }
    let valid_count = frames.len();
    let (w, h) = (frames[0].width, frames[0].height);
    frames.resize(pad_size, LumaFrame::filled(w, h, 0));
    Ok(FrameSequence { frames, valid_count, pad_size })
}

/// Row-major `(pad_size, dim)` features with the first `valid_count` rows real.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub dim: usize,
    pub pad_size: usize,
    pub valid_count: usize,
    pub data: Vec<f32>,
}

impl FeatureSequence {
    /// Pads (or uniformly thins) `rows` to `pad_size`.
    pub fn from_rows(rows: Vec<Vec<f32>>, dim: usize, pad_size: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("feature sequence needs at least one row"));
        }
        let picks = uniform_indices(rows.len(), pad_size);
        let mut data = Vec::with_capacity(pad_size * dim);
        for &i in &picks {
            if rows[i].len() != dim {
                return Err(Error::Shape(format!("feature row has width {}, expected {dim}", rows[i].len())));
            }
            data.extend_from_slice(&rows[i]);
        }
        data.resize(pad_size * dim, 0.0);
        Ok(Self { dim, pad_size, valid_count: picks.len(), data })
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.pad_size).map(|i| i < self.valid_count).collect()
    }

    pub fn to_tensor(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        Ok(Tensor::from_vec(self.data.clone(), (self.pad_size, self.dim), device)?.to_dtype(dtype)?)
    }
}

/// Frozen per-frame visual feature extractor.
pub trait VisualEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn feature_dim(&self) -> usize;
    fn encode(&self, frame: &LumaFrame) -> Result<Vec<f32>>;
}

/// Frozen audio feature extractor producing one row per frame.
pub trait AudioEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn feature_dim(&self) -> usize;
    fn encode(&self, wave: &Waveform) -> Result<Vec<Vec<f32>>>;
}

/// Mean luma over a `grid x grid` partition plus global mean and spread,
/// all scaled to roughly unit range.
#[derive(Debug, Clone)]
pub struct GridLumaEncoder {
    pub grid: usize,
}

impl Default for GridLumaEncoder {
    fn default() -> Self {
        Self { grid: 8 }
    }
}

impl VisualEncoder for GridLumaEncoder {
    fn name(&self) -> &str {
        "grid-luma"
    }

    fn feature_dim(&self) -> usize {
        self.grid * self.grid + 2
    }

    fn encode(&self, frame: &LumaFrame) -> Result<Vec<f32>> {
        let (w, h) = (frame.width as usize, frame.height as usize);
        if w == 0 || h == 0 || frame.data.len() != w * h {
            return Err(Error::Shape(format!("malformed {w}x{h} frame")));
        }
        let g = self.grid;
        let mut sums = vec![0f64; g * g];
        let mut counts = vec![0usize; g * g];
        for y in 0..h {
            for x in 0..w {
                let cell = (y * g / h) * g + x * g / w;
                sums[cell] += frame.data[y * w + x] as f64;
                counts[cell] += 1;
            }
        }
        let n = (w * h) as f64;
        let mean = frame.data.iter().map(|&v| v as f64).sum::<f64>() / n;
        let std = (frame.data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut out: Vec<f32> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| if c == 0 { 0.0 } else { (s / c as f64 / 127.5 - 1.0) as f32 })
            .collect();
        out.push((mean / 127.5 - 1.0) as f32);
        out.push((std / 127.5) as f32);
        Ok(out)
    }
}

/// Log mel band energies at a 10 ms hop, standardized per utterance.
#[derive(Debug, Clone)]
pub struct LogMelEncoder {
    pub bands: usize,
}

impl Default for LogMelEncoder {
    fn default() -> Self {
        Self { bands: 40 }
    }
}

impl AudioEncoder for LogMelEncoder {
    fn name(&self) -> &str {
        "log-mel"
    }

    fn feature_dim(&self) -> usize {
        self.bands
    }

    fn encode(&self, wave: &Waveform) -> Result<Vec<Vec<f32>>> {
        let mut rows = dsp::log_band_energies(&wave.samples, wave.sample_rate, self.bands);
        if rows.is_empty() {
            return Err(Error::invalid(format!("audio of {:.3} s is too short for one frame", wave.duration())));
        }
        let all: Vec<f32> = rows.iter().flatten().copied().collect();
        let mean = all.iter().sum::<f32>() / all.len() as f32;
        let std = (all.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / all.len() as f32).sqrt().max(1e-3);
        for r in &mut rows {
            for v in r.iter_mut() {
                *v = (*v - mean) / std;
            }
        }
        Ok(rows)
    }
}

pub fn video_features(encoder: &dyn VisualEncoder, frames: &FrameSequence) -> Result<FeatureSequence> {
    let rows = frames.valid().iter().map(|f| encoder.encode(f)).collect::<Result<Vec<_>>>()?;
    FeatureSequence::from_rows(rows, encoder.feature_dim(), frames.pad_size)
}

pub fn audio_features(encoder: &dyn AudioEncoder, wave: &Waveform, pad_size: usize) -> Result<FeatureSequence> {
    FeatureSequence::from_rows(encoder.encode(wave)?, encoder.feature_dim(), pad_size)
}

/// Loads stored frame images (already sampled) as a padded sequence.
pub fn load_frames(paths: &[impl AsRef<Path>], pad_size: usize) -> Result<FrameSequence> {
    if paths.is_empty() {
        return Err(Error::invalid("no frames to load"));
    }
    let mut frames = Vec::new();
    for i in uniform_indices(paths.len(), pad_size) {
        let p = paths[i].as_ref();
        let reader = image::ImageReader::open(p).map_err(|e| Error::io(p, e))?;
        let img = reader.with_guessed_format().map_err(|e| Error::io(p, e))?.decode()?.to_luma8();
        frames.push(LumaFrame { width: img.width(), height: img.height(), data: img.into_raw() });
    }
    let valid_count = frames.len();
    let (w, h) = (frames[0].width, frames[0].height);
    frames.resize(pad_size, LumaFrame::filled(w, h, 0));
    Ok(FrameSequence { frames, valid_count, pad_size })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn video(seconds: f64) -> (f64, Vec<LumaFrame>) {
        let fps = 30.0;
        let n = (seconds * fps) as usize;
        (fps, (0..n).map(|i| LumaFrame::filled(4, 4, (i % 256) as u8)).collect())
    }

    #[test]
    fn ten_seconds_gives_thirty_frames_and_twenty_pads() {
        let v = video(10.0);
        let s = sample_frames(&v, (0.0, 10.0), VIDEO_FPS, VIDEO_PAD).unwrap();
        assert_eq!(s.valid_count, 30);
        assert_eq!(s.frames.len(), 50);
        assert_eq!(s.mask().iter().filter(|m| !**m).count(), 20);
        assert!(s.frames[30..].iter().all(|f| f.data.iter().all(|&p| p == 0)));
    }

    #[test]
    fn short_clip_keeps_one_frame() {
        let v = video(1.0);
        assert_eq!(sample_frames(&v, (0.0, 0.2), VIDEO_FPS, VIDEO_PAD).unwrap().valid_count, 1);
    }

    #[test]
    fn long_clip_is_thinned_to_pad_size() {
        let v = video(20.0);
        let s = sample_frames(&v, (0.0, 20.0), VIDEO_FPS, VIDEO_PAD).unwrap();
        assert_eq!(s.valid_count, 50);
        let first = s.frames[0].data[0];
        let last = s.frames[49].data[0];
        assert!(first < 10 && last as usize >= (19.0 * 30.0) as usize % 256 - 30);
    }

    #[test]
    fn empty_video_is_an_error() {
        let v: (f64, Vec<LumaFrame>) = (30.0, vec![]);
        assert!(sample_frames(&v, (0.0, 1.0), VIDEO_FPS, VIDEO_PAD).is_err());
    }

    #[test]
    fn audio_features_cap_at_pad() {
        let wave = Waveform { samples: crate::synth::tone(200.0, 10.0, 16000), sample_rate: 16000 };
        let f = audio_features(&LogMelEncoder::default(), &wave, AUDIO_PAD).unwrap();
        assert_eq!(f.valid_count, AUDIO_PAD);
        let short = Waveform { samples: crate::synth::tone(200.0, 1.0, 16000), sample_rate: 16000 };
        let f = audio_features(&LogMelEncoder::default(), &short, AUDIO_PAD).unwrap();
        assert!((95..=100).contains(&f.valid_count), "{}", f.valid_count);
        assert!(f.data[f.valid_count * f.dim..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_encoder_shape() {
        let e = GridLumaEncoder::default();
        let f = e.encode(&LumaFrame::filled(16, 9, 255)).unwrap();
        assert_eq!(f.len(), e.feature_dim());
        assert!((f[0] - 1.0).abs() < 1e-6);
    }
}
