//! Fundamental frequency by normalized autocorrelation.

use crate::error::{Error, Result};

pub const MIN_F0_HZ: f64 = 50.0;
pub const MAX_F0_HZ: f64 = 500.0;
pub const MIN_PITCH_INPUT_S: f64 = 0.2;

const FRAME_S: f64 = 0.04;
const HOP_S: f64 = 0.01;
const VOICING_THRESHOLD: f64 = 0.5;
/// Frames quieter than this fraction of the loudest frame's RMS are unvoiced.
const RELATIVE_SILENCE: f64 = 0.05;
const ABSOLUTE_SILENCE: f64 = 1e-4;

/// Per-frame F0 estimates in Hz; `None` for unvoiced frames.
pub fn pitch_track(samples: &[f32], sample_rate: u32) -> Vec<Option<f64>> {
    let sr = sample_rate as f64;
    let frame = (FRAME_S * sr).round() as usize;
    let hop = (HOP_S * sr).round().max(1.0) as usize;
    let min_lag = (sr / MAX_F0_HZ).floor().max(1.0) as usize;
    let max_lag = ((sr / MIN_F0_HZ).ceil() as usize).min(frame.saturating_sub(2));
    if samples.len() < frame || max_lag <= min_lag + 1 {
        return Vec::new();
    }
    let frames: Vec<&[f32]> = (0..=(samples.len() - frame) / hop)
        .map(|k| &samples[k * hop..k * hop + frame])
        .collect();
    let rms: Vec<f64> = frames
        .iter()
        .map(|f| (f.iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / f.len() as f64).sqrt())
        .collect();
    let loudest = rms.iter().copied().fold(0.0, f64::max);
    frames
        .iter()
        .zip(&rms)
        .map(|(f, &r)| {
            if r < ABSOLUTE_SILENCE || r < RELATIVE_SILENCE * loudest {
                return None;
            }
            frame_f0(f, sr, min_lag, max_lag)
        })
        .collect()
}

fn frame_f0(frame: &[f32], sr: f64, min_lag: usize, max_lag: usize) -> Option<f64> {
    let mean = frame.iter().map(|&x| x as f64).sum::<f64>() / frame.len() as f64;
    let x: Vec<f64> = frame.iter().map(|&v| v as f64 - mean).collect();
    let n = x.len();
    // r[lag] for lag in min_lag-1 ..= max_lag+1 so peaks at the band edges can be interpolated.
    let lo = min_lag - 1;
    let hi = (max_lag + 1).min(n - 1);
    let r: Vec<f64> = (lo..=hi)
        .map(|lag| {
            let (a, b) = (&x[..n - lag], &x[lag..]);
            let num: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
            let ea: f64 = a.iter().map(|p| p * p).sum();
            let eb: f64 = b.iter().map(|q| q * q).sum();
            if ea <= 0.0 || eb <= 0.0 {
                0.0
            } else {
                num / (ea * eb).sqrt()
            }
        })
        .collect();
    let at = |lag: usize| r[lag - lo];
    let best = (min_lag..=max_lag).map(at).fold(f64::NEG_INFINITY, f64::max);
    if best < VOICING_THRESHOLD {
        return None;
    }
    // The shortest strong period avoids locking onto subharmonics.
    let lag = (min_lag..=max_lag).find(|&l| {
        let v = at(l);
        v >= 0.9 * best && v >= at(l - 1) && v >= at(l + 1)
    })?;
    let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-12 { 0.5 * (a - c) / denom } else { 0.0 };
    let period = lag as f64 + shift.clamp(-0.5, 0.5);
    Some(sr / period)
}

/// Five-frame median within each voiced run; removes isolated octave
/// and transition errors.
pub fn median_smooth(track: &[Option<f64>]) -> Vec<Option<f64>> {
    const HALF: usize = 2;
    (0..track.len())
        .map(|i| {
            track[i]?;
            let mut lo = i;
            while lo > i.saturating_sub(HALF) && track[lo - 1].is_some() {
                lo -= 1;
            }
            let mut hi = i;
            while hi < (i + HALF).min(track.len() - 1) && track[hi + 1].is_some() {
                hi += 1;
            }
            let mut w: Vec<f64> = track[lo..=hi].iter().flatten().copied().collect();
            w.sort_by(f64::total_cmp);
            Some(w[w.len() / 2])
        })
        .collect()
}

/// Mean and population standard deviation of F0 over voiced frames, or
/// `(0, 0)` when nothing is voiced.
pub fn estimate_pitch(samples: &[f32], sample_rate: u32) -> Result<(f64, f64)> {
    let seconds = samples.len() as f64 / sample_rate as f64;
    if seconds < MIN_PITCH_INPUT_S {
        return Err(Error::invalid(format!(
            "pitch estimation needs at least {MIN_PITCH_INPUT_S} s of audio, got {seconds:.3} s"
        )));
    }
    let voiced: Vec<f64> = median_smooth(&pitch_track(samples, sample_rate)).into_iter().flatten().collect();
    if voiced.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mean = voiced.iter().sum::<f64>() / voiced.len() as f64;
    let var = voiced.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / voiced.len() as f64;
    Ok((mean, var.sqrt()))
}
