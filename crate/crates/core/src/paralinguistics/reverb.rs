//! Blind clarity estimate in the spirit of C50.
//!
//! The short-time energy envelope is scanned for free decays: local maxima
//! followed by a stretch of falling energy. For each candidate the energy in
//! the first 50 ms is compared with the energy from 50 ms to
//! [`LATE_WINDOW_S`], and the clearest candidate wins. Reverberation smears
//! every offset, so it can only lower the score.

use crate::error::{Error, Result};

pub const MIN_REVERB_INPUT_S: f64 = 0.5;
pub const EARLY_WINDOW_S: f64 = 0.05;
pub const LATE_WINDOW_S: f64 = 0.3;
/// Scores are clamped to this range in dB.
pub const CLARITY_RANGE_DB: (f64, f64) = (-20.0, 60.0);

const ENV_FRAME_S: f64 = 0.005;
/// Candidates must start within this many dB of the loudest frame.
const CANDIDATE_SPAN_DB: f64 = 20.0;
/// The envelope is floored this far below its maximum.
const FLOOR_DB: f64 = 80.0;

pub fn estimate_reverberation(samples: &[f32], sample_rate: u32) -> Result<f64> {
    let seconds = samples.len() as f64 / sample_rate as f64;
    if seconds < MIN_REVERB_INPUT_S {
        return Err(Error::invalid(format!(
            "reverberation estimation needs at least {MIN_REVERB_INPUT_S} s of audio, got {seconds:.3} s"
        )));
    }
    let frame = ((ENV_FRAME_S * sample_rate as f64).round() as usize).max(1);
    let energy: Vec<f64> = samples
        .chunks_exact(frame)
        .map(|c| c.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / frame as f64)
        .collect();
    let peak = energy.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Ok(CLARITY_RANGE_DB.0);
    }
    let floor = peak * 10f64.powf(-FLOOR_DB / 10.0);
    let energy: Vec<f64> = energy.into_iter().map(|e| e.max(floor)).collect();
    let early = (EARLY_WINDOW_S / ENV_FRAME_S).round() as usize;
    let late = (LATE_WINDOW_S / ENV_FRAME_S).round() as usize;
    let threshold = peak * 10f64.powf(-CANDIDATE_SPAN_DB / 10.0);

    let mut best: Option<f64> = None;
    for i in 0..energy.len().saturating_sub(late) {
        let is_offset = energy[i] >= threshold && energy[i] >= energy[i + 1] && (i == 0 || energy[i] >= energy[i - 1]);
        if !is_offset {
            continue;
        }
        let e: f64 = energy[i..i + early].iter().sum();
        let l: f64 = energy[i + early..i + late].iter().sum();
        let c = 10.0 * (e / l).log10();
        best = Some(best.map_or(c, |b: f64| b.max(c)));
    }
    let score = match best {
        Some(c) => c,
        // No complete decay window: compare the first 50 ms against the rest.
        None => {
            let e: f64 = energy.iter().take(early).sum();
            let l: f64 = energy.iter().skip(early).sum::<f64>().max(floor);
            10.0 * (e / l).log10()
        }
    };
    Ok(score.clamp(CLARITY_RANGE_DB.0, CLARITY_RANGE_DB.1))
}
