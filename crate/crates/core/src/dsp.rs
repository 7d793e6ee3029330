//! Short-time spectral helpers shared by the embedder and audio features.

use rustfft::{num_complex::Complex, FftPlanner};

pub const FRAME_S: f64 = 0.025;
pub const HOP_S: f64 = 0.010;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filterbank, `bands` rows over `bins` FFT bins.
fn mel_filterbank(bands: usize, bins: usize, fft_len: usize, sample_rate: u32) -> Vec<Vec<f32>> {
    let nyquist = sample_rate as f64 / 2.0;
    let lo = hz_to_mel(20.0);
    let hi = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..bands + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (bands + 1) as f64))
        .collect();
    let bin_hz = sample_rate as f64 / fft_len as f64;
    (0..bands)
        .map(|b| {
            let (l, c, r) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let w = if f <= l || f >= r {
                        0.0
                    } else if f <= c {
                        (f - l) / (c - l)
                    } else {
                        (r - f) / (r - c)
                    };
                    w as f32
                })
                .collect()
        })
        .collect()
}

/// Log mel-band energies per 25 ms frame with a 10 ms hop.
pub fn log_band_energies(samples: &[f32], sample_rate: u32, bands: usize) -> Vec<Vec<f32>> {
    let frame = ((FRAME_S * sample_rate as f64).round() as usize).max(2);
    let hop = ((HOP_S * sample_rate as f64).round() as usize).max(1);
    if samples.len() < frame || bands == 0 {
        return Vec::new();
    }
    let fft_len = frame.next_power_of_two();
    let bins = fft_len / 2 + 1;
    let fb = mel_filterbank(bands, bins, fft_len, sample_rate);
    let window: Vec<f32> = (0..frame)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f32::consts::PI * i as f32 / (frame - 1) as f32).cos())
        .collect();
    let fft = FftPlanner::<f32>::new().plan_fft_forward(fft_len);
    let mut buf = vec![Complex::new(0.0f32, 0.0); fft_len];
    let mut out = Vec::new();
    let mut start = 0;
    while start + frame <= samples.len() {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = if i < frame {
                Complex::new(samples[start + i] * window[i], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process(&mut buf);
        let power: Vec<f32> = buf[..bins].iter().map(|c| c.norm_sqr()).collect();
        out.push(
            fb.iter()
                .map(|row| {
                    let e: f32 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
                    (e + 1e-10).ln()
                })
                .collect(),
        );
        start += hop;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_count_and_peak_band() {
        let sr = 16_000;
        let samples: Vec<f32> = (0..sr)
            .map(|i| (2.0 * std::f32::consts::PI * 1000.0 * i as f32 / sr as f32).sin())
            .collect();
        let frames = log_band_energies(&samples, sr as u32, 24);
        assert_eq!(frames.len(), (16_000 - 400) / 160 + 1);
        let peak = frames[10]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        let edges_hz = |b: usize| {
            let lo = hz_to_mel(20.0);
            let hi = hz_to_mel(8000.0);
            mel_to_hz(lo + (hi - lo) * b as f64 / 25.0)
        };
        assert!(edges_hz(peak) < 1000.0 && edges_hz(peak + 2) > 1000.0);
    }

    #[test]
    fn too_short_input_yields_nothing() {
        assert!(log_band_energies(&[0.0; 100], 16_000, 10).is_empty());
    }
}
