//! Deterministic signal generators used by tests, benches and the
//! built-in tone synthesizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

/// Phase-continuous sine following a piecewise-constant frequency track.
pub fn tone_track(segments: &[(f64, f64)], sample_rate: u32, amplitude: f32) -> Vec<f32> {
    let sr = sample_rate as f64;
    let mut phase = 0.0f64;
    let mut out = Vec::new();
    for &(freq, seconds) in segments {
        let n = (seconds * sr).round() as usize;
        for _ in 0..n {
            out.push(amplitude * phase.sin() as f32);
            phase += 2.0 * std::f64::consts::PI * freq / sr;
            if phase > 2.0 * std::f64::consts::PI {
                phase -= 2.0 * std::f64::consts::PI;
            }
        }
    }
    out
}

pub fn tone(freq: f64, seconds: f64, sample_rate: u32) -> Vec<f32> {
    tone_track(&[(freq, seconds)], sample_rate, 0.5)
}

/// Low-passed noise gated into syllable-like bursts separated by pauses.
pub fn speech_shaped_noise(seconds: f64, sample_rate: u32, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let n = (seconds * sr).round() as usize;
    let mut out = vec![0.0f32; n];
    let mut lp = 0.0f32;
    let mut t = 0usize;
    let mut on = true;
    while t < n {
        let span = if on {
            rng.random_range(0.15..0.30)
        } else {
            rng.random_range(0.25..0.45)
        };
        let len = ((span * sr) as usize).min(n - t);
        for i in 0..len {
            let white: f32 = rng.random_range(-1.0..1.0);
            lp = 0.85 * lp + 0.15 * white;
            if on {
                out[t + i] = 2.0 * lp;
            }
        }
        t += len;
        on = !on;
    }
    out
}

/// Noise impulse response with an exponential energy decay reaching -60 dB at `rt60`.
pub fn exponential_ir(rt60: f64, sample_rate: u32, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sr = sample_rate as f64;
    let n = (rt60 * sr).round() as usize;
    // Amplitude decays 60 dB over rt60: exp(-6.9078 t / rt60).
    let k = 6.907_755 / rt60;
    let mut ir: Vec<f32> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let g: f32 = rng.random_range(-1.0..1.0);
            g * (-k * t).exp() as f32
        })
        .collect();
    let norm = ir.iter().map(|x| x * x).sum::<f32>().sqrt();
    if norm > 0.0 {
        ir.iter_mut().for_each(|x| *x /= norm);
    }
    ir
}

/// Full linear convolution via FFT.
pub fn convolve(signal: &[f32], kernel: &[f32]) -> Vec<f32> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + kernel.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f32>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f32>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    a.resize(n, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f32>> = kernel.iter().map(|&x| Complex::new(x, 0.0)).collect();
    b.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);
    a.truncate(out_len);
    a.into_iter().map(|c| c.re / n as f32).collect()
}
