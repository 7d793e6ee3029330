//! A 60 s two-speaker recording with known scene cuts, utterance times and
//! lookup-table adapters that answer exactly the clips the pipeline asks for.

use std::path::Path;

use super::tables::{AsrTable, DiarizationTable, SceneTable};
use super::{AsrSegment, DiarizationTurn, DialogueSplitAnnotation, MediaSource, SplitPoint, SplitReason};
use crate::audio::{Waveform, CORPUS_SAMPLE_RATE};
use crate::error::{Error, Result};

pub const DURATION_S: f64 = 60.0;
pub const FRAME_RATE: f64 = 10.0;
pub const SCENE_CUTS: [f64; 2] = [18.0, 52.0];
/// Where the conversation changes; the sidecar splits here.
pub const DIALOGUE_SPLIT: f64 = 31.5;
pub const SPEAKER_F0: [f64; 2] = [115.0, 215.0];

/// Ground-truth utterances: start, end, speaker, text.
pub const UTTERANCES: [(f64, f64, u32, &str); 10] = [
    (0.5, 4.0, 0, "hello there how are you today"),
    (4.6, 9.8, 1, "i am doing well thanks for asking me"),
    (10.5, 17.2, 0, "that is great to hear my friend"),
    (18.4, 24.0, 1, "did you see the game last night"),
    (24.6, 31.0, 0, "yes it was a close one in the end"),
    (32.0, 38.5, 1, "shall we order some lunch now"),
    (39.1, 44.6, 0, "sure i would love a sandwich please"),
    (45.3, 51.5, 1, "the cafe on the corner is open"),
    (52.4, 56.0, 0, "let us go there then"),
    (56.5, 59.5, 1, "great i will grab my coat"),
];

/// One diarization turn longer than the ASR limit, so it is bisected.
const DIARIZED: [(f64, f64, i32); 2] = [(18.0, 45.0, 0), (45.0, 52.0, 1)];

pub struct SyntheticSource {
    pub media: MediaSource,
    pub asr: AsrTable,
    pub diarization: DiarizationTable,
    pub scenes: SceneTable,
    pub splits: DialogueSplitAnnotation,
}

fn scene_luma(t: f64) -> u8 {
    match SCENE_CUTS.iter().filter(|&&c| t >= c).count() {
        0 => 40,
        1 => 140,
        _ => 230,
    }
}

/// Harmonic voice at `f0` with a slow pitch wobble, faded at both ends.
pub fn voiced(f0: f64, seconds: f64, sample_rate: u32) -> Vec<f32> {
    let sr = sample_rate as f64;
    let n = (seconds * sr).round() as usize;
    let fade = (0.02 * sr) as usize;
    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let f = f0 * (1.0 + 0.03 * (2.0 * std::f64::consts::PI * 3.0 * t).sin());
            phase += 2.0 * std::f64::consts::PI * f / sr;
            let s: f64 = (1..=6).map(|k| (k as f64 * phase).sin() / k as f64).sum();
            let env = (i.min(n - 1 - i) as f64 / fade as f64).min(1.0);
            (0.25 * s * env) as f32
        })
        .collect()
}

fn asr_segments(start: f64, end: f64) -> Vec<AsrSegment> {
    UTTERANCES
        .iter()
        .filter(|u| u.0 >= start && u.1 <= end)
        .map(|u| AsrSegment { text: u.3.to_string(), start: u.0, end: u.1 })
        .collect()
}

/// Writes `frames/` (10 fps JPEGs) and `audio.wav` under `dir`.
pub fn write_synthetic_source(dir: &Path, id: &str) -> Result<SyntheticSource> {
    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames).map_err(|e| Error::io(&frames, e))?;
    let n_frames = (DURATION_S * FRAME_RATE) as usize;
    for i in 0..n_frames {
        let value = scene_luma(i as f64 / FRAME_RATE);
        let img = image::GrayImage::from_pixel(16, 12, image::Luma([value]));
        img.save(frames.join(format!("{i:06}.jpg")))?;
    }

    let sr = CORPUS_SAMPLE_RATE;
    let mut samples = vec![0.0f32; (DURATION_S * sr as f64) as usize];
    for &(start, end, speaker, _) in &UTTERANCES {
        let at = (start * sr as f64).round() as usize;
        for (k, s) in voiced(SPEAKER_F0[speaker as usize], end - start, sr).into_iter().enumerate() {
            samples[at + k] = s;
        }
    }
    let audio = dir.join("audio.wav");
    Waveform::new(samples, sr).write_wav(&audio)?;

    let media = MediaSource {
        id: id.to_string(),
        video_uri: frames,
        audio_uri: audio,
        duration: DURATION_S,
        sample_rate: sr,
        video_fps: FRAME_RATE,
    };
    let mut asr = AsrTable::default();
    let mut diarization = DiarizationTable::default();
    let (a, b) = (SCENE_CUTS[0], SCENE_CUTS[1]);
    asr.insert(id, 0.0, a, asr_segments(0.0, a));
    asr.insert(id, b, DURATION_S, asr_segments(b, DURATION_S));
    diarization.insert(
        id,
        a,
        b,
        DIARIZED.iter().map(|&(start, end, local_speaker)| DiarizationTurn { start, end, local_speaker }).collect(),
    );
    let mid = 0.5 * (DIARIZED[0].0 + DIARIZED[0].1);
    for (s, e) in [(DIARIZED[0].0, mid), (mid, DIARIZED[0].1), (DIARIZED[1].0, DIARIZED[1].1)] {
        asr.insert(id, s, e, asr_segments(s, e));
    }
    let mut scenes = SceneTable::default();
    scenes.insert(id, SCENE_CUTS.to_vec());
    let splits = DialogueSplitAnnotation {
        source_id: id.to_string(),
        splits: vec![SplitPoint { time: DIALOGUE_SPLIT, reason: SplitReason::SettingTransitioned }],
        drops: Vec::new(),
    };
    Ok(SyntheticSource { media, asr, diarization, scenes, splits })
}
