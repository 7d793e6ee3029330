use crate::audio::Waveform;
use crate::error::{Error, Result};
use crate::synth;

/// Speech decoder conditioned on a free-text style prompt.
pub trait TtsAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn sample_rate(&self) -> u32;
    /// `style` is `None` in no-prompt mode.
    fn synthesize(&self, text: &str, style: Option<&str>) -> Result<Waveform>;
}

/// Empty descriptions run the adapter without a style prompt.
pub fn synthesize_speech(response_text: &str, description_text: &str, tts: &dyn TtsAdapter) -> Result<Waveform> {
    if response_text.trim().is_empty() {
        return Err(Error::invalid("cannot synthesize an empty response"));
    }
    let style = Some(description_text.trim()).filter(|d| !d.is_empty());
    let wave = tts.synthesize(response_text, style).map_err(|e| match e {
        Error::Adapter { .. } => e,
        other => Error::adapter(tts.name(), other.to_string()),
    })?;
    if wave.sample_rate != tts.sample_rate() {
        return Err(Error::Contract {
            adapter: tts.name().into(),
            message: format!("declared {} Hz but produced {} Hz", tts.sample_rate(), wave.sample_rate),
        });
    }
    Ok(wave)
}

/// Built-in stand-in decoder: one decaying tone burst per word. The style
/// prompt steers gender, pitch level, pitch movement, pace and room.
#[derive(Debug, Clone)]
pub struct ToneTts {
    pub sample_rate: u32,
}

impl Default for ToneTts {
    fn default() -> Self {
        Self { sample_rate: crate::audio::CORPUS_SAMPLE_RATE }
    }
}

const WORD_DECAY_S: f64 = 0.025;

struct Style {
    f0: f64,
    spread: f64,
    words_per_s: f64,
    rt60: Option<f64>,
}

fn parse_style(style: Option<&str>) -> Style {
    let s = style.unwrap_or("").to_lowercase();
    let has = |w: &str| s.contains(w);
    let mut f0: f64 = if has("female") { 210.0 } else if has("male") { 120.0 } else { 160.0 };
    if has("low-pitched") {
        f0 *= 0.8;
    } else if has("high-pitched") {
        f0 *= 1.25;
    }
    let spread = if has("monotone") { 0.0 } else if has("expressive") { 0.35 } else { 0.1 };
    let words_per_s = if has("slow pace") { 1.8 } else if has("fast pace") { 3.8 } else { 2.7 };
    let rt60 = if has("slightly echoey") {
        Some(0.35)
    } else if has("echoey") {
        Some(0.9)
    } else {
        None
    };
    Style { f0, spread, words_per_s, rt60 }
}

impl TtsAdapter for ToneTts {
    fn name(&self) -> &str {
        "tone-tts"
    }

    fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    fn synthesize(&self, text: &str, style: Option<&str>) -> Result<Waveform> {
        let st = parse_style(style);
        let words = text.split_whitespace().count().max(1);
        let sr = self.sample_rate;
        let slot = (sr as f64 / st.words_per_s).round() as usize;
        let mut samples = Vec::with_capacity(words * slot);
        for i in 0..words {
            let f = if i % 2 == 0 { st.f0 * (1.0 + st.spread) } else { st.f0 * (1.0 - st.spread) };
            let burst = synth::tone_track(&[(f, slot as f64 / sr as f64)], sr, 0.5);
            samples.extend(burst.iter().enumerate().map(|(n, v)| v * (-(n as f64) / (WORD_DECAY_S * sr as f64)).exp() as f32));
        }
        if let Some(rt60) = st.rt60 {
            let wet = synth::convolve(&samples, &synth::exponential_ir(rt60, sr, 7));
            let peak = wet.iter().fold(0f32, |m, v| m.max(v.abs())).max(1e-9);
            samples = wet.iter().map(|v| v * 0.5 / peak).collect();
        }
        Ok(Waveform::new(samples, sr))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::paralinguistics::{estimate_pitch, estimate_reverberation};

    #[derive(Default)]
    struct Echo {
        calls: Mutex<Vec<(String, Option<String>)>>,
    }

    impl TtsAdapter for Echo {
        fn name(&self) -> &str {
            "echo"
        }
        fn sample_rate(&self) -> u32 {
            8000
        }
        fn synthesize(&self, text: &str, style: Option<&str>) -> Result<Waveform> {
            self.calls.lock().unwrap().push((text.into(), style.map(String::from)));
            Ok(Waveform::new(vec![0.0; 80], 8000))
        }
    }

    #[test]
    fn adapter_receives_response_and_description() {
        let tts = Echo::default();
        synthesize_speech("Hello there.", "A calm voice.", &tts).unwrap();
        synthesize_speech("Hello there.", "", &tts).unwrap();
        let calls = tts.calls.lock().unwrap();
        assert_eq!(calls[0], ("Hello there.".into(), Some("A calm voice.".into())));
        assert_eq!(calls[1], ("Hello there.".into(), None));
    }

    #[test]
    fn empty_response_is_an_error() {
        assert!(synthesize_speech("  ", "A calm voice.", &Echo::default()).is_err());
    }

    #[test]
    fn tone_voice_follows_the_description() {
        let tts = ToneTts::default();
        let text = "one two three four five six seven eight";
        let low = tts.synthesize(text, Some("A male speaker with a low-pitched, monotone voice")).unwrap();
        let high = tts.synthesize(text, Some("A female speaker with a high-pitched, expressive voice")).unwrap();
        let (lm, ls) = estimate_pitch(&low.samples, low.sample_rate).unwrap();
        let (hm, hs) = estimate_pitch(&high.samples, high.sample_rate).unwrap();
        assert!((lm - 96.0).abs() < 5.0 && ls < 10.0, "{lm} {ls}");
        assert!(hm > 220.0 && hs > 25.0, "{hm} {hs}");
        let slow = tts.synthesize(text, Some("at a slow pace")).unwrap().duration();
        let fast = tts.synthesize(text, Some("at a fast pace")).unwrap().duration();
        assert!(slow > fast * 1.5);
        let dry = tts.synthesize(text, Some("in a very clear environment")).unwrap();
        let wet = tts.synthesize(text, Some("in an echoey environment")).unwrap();
        let d = estimate_reverberation(&dry.samples, dry.sample_rate).unwrap();
        let w = estimate_reverberation(&wet.samples, wet.sample_rate).unwrap();
        assert!(d > 15.0 && w < d, "dry {d} wet {w}");
    }
}
