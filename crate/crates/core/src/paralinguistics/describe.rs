use serde::{Deserialize, Serialize};
use tracing::warn;

use super::SpeechAnnotation;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoiceDescription(pub String);

impl VoiceDescription {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Paraphrases an annotation into free text, e.g. with a language model.
pub trait DescriptionAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn describe(&self, annotation: &SpeechAnnotation) -> Result<String>;
}

pub enum Renderer<'a> {
    Template,
    Llm(&'a dyn DescriptionAdapter),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedDescription {
    pub description: VoiceDescription,
    /// Set when adapter output was rejected and the template used instead.
    pub fallback_used: bool,
}

pub fn render_template(a: &SpeechAnnotation) -> VoiceDescription {
    VoiceDescription(format!(
        "A {} speaker with a {}-pitched, {} voice speaks at a {} pace in a {} environment.",
        a.gender, a.pitch_level, a.monotony, a.pace_level, a.reverberation_level
    ))
}

fn contains_word(haystack: &str, phrase: &str) -> bool {
    let is_word = |c: char| c.is_alphanumeric();
    haystack.match_indices(phrase).any(|(i, _)| {
        let before = haystack[..i].chars().next_back();
        let after = haystack[i + phrase.len()..].chars().next();
        before.is_none_or(|c| !is_word(c)) && after.is_none_or(|c| !is_word(c))
    })
}

/// True when every attribute's bin word appears as a whole word (case
/// insensitive). "echoey" must appear outside "slightly echoey".
pub fn mentions_all_attributes(text: &str, a: &SpeechAnnotation) -> bool {
    let lower = text.to_lowercase();
    let reverb_ok = match a.reverberation_level {
        super::ReverberationLevel::Echoey => {
            contains_word(&lower.replace("slightly echoey", " "), "echoey")
        }
        level => contains_word(&lower, level.word()),
    };
    reverb_ok
        && contains_word(&lower, a.gender.word())
        && contains_word(&lower, a.pitch_level.word())
        && contains_word(&lower, a.monotony.word())
        && contains_word(&lower, a.pace_level.word())
}

pub fn render_description(a: &SpeechAnnotation, renderer: &Renderer<'_>) -> RenderedDescription {
    match renderer {
        Renderer::Template => RenderedDescription {
            description: render_template(a),
            fallback_used: false,
        },
        Renderer::Llm(adapter) => match adapter.describe(a) {
            Ok(text) if !text.trim().is_empty() && mentions_all_attributes(&text, a) => RenderedDescription {
                description: VoiceDescription(text.trim().to_string()),
                fallback_used: false,
            },
            Ok(_) => {
                warn!(adapter = adapter.name(), "description misses an attribute, using template");
                RenderedDescription { description: render_template(a), fallback_used: true }
            }
            Err(e) => {
                warn!(adapter = adapter.name(), error = %e, "description adapter failed, using template");
                RenderedDescription { description: render_template(a), fallback_used: true }
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paralinguistics::{Gender, Monotony, PaceLevel, PitchLevel, ReverberationLevel};
    use proptest::prelude::*;

    fn sample() -> SpeechAnnotation {
        SpeechAnnotation {
            gender: Gender::Female,
            pitch_level: PitchLevel::High,
            monotony: Monotony::Expressive,
            pace_level: PaceLevel::Fast,
            reverberation_level: ReverberationLevel::VeryClear,
        }
    }

    struct Canned(&'static str);

    impl DescriptionAdapter for Canned {
        fn name(&self) -> &str {
            "canned"
        }
        fn describe(&self, _a: &SpeechAnnotation) -> Result<String> {
            Ok(self.0.to_string())
        }
    }

    #[test]
    fn template_contains_all_five_phrases() {
        let d = render_description(&sample(), &Renderer::Template);
        assert_eq!(
            d.description.as_str(),
            "A female speaker with a high-pitched, expressive voice speaks at a fast pace in a very clear environment."
        );
        assert!(!d.fallback_used);
        assert_eq!(d, render_description(&sample(), &Renderer::Template));
    }

    #[test]
    fn llm_output_missing_an_attribute_falls_back() {
        let llm = Canned("A lively female voice, high and expressive, in a very clear room.");
        let d = render_description(&sample(), &Renderer::Llm(&llm));
        assert!(d.fallback_used);
        assert_eq!(d.description, render_template(&sample()));
    }

    #[test]
    fn valid_llm_output_is_kept() {
        let llm = Canned("An expressive female voice, high in pitch, talking at a fast clip; the audio is very clear.");
        let d = render_description(&sample(), &Renderer::Llm(&llm));
        assert!(!d.fallback_used);
        assert!(d.description.as_str().starts_with("An expressive"));
    }

    #[test]
    fn whole_word_matching() {
        let mut a = sample();
        a.gender = Gender::Male;
        assert!(!mentions_all_attributes("a female, high, expressive, fast, very clear voice", &a));
        a.reverberation_level = ReverberationLevel::Echoey;
        assert!(!mentions_all_attributes("male high expressive fast slightly echoey", &a));
        assert!(mentions_all_attributes("Male, high, expressive, fast and echoey", &a));
    }

    fn annotation() -> impl Strategy<Value = SpeechAnnotation> {
        (0..2usize, 0..3usize, 0..2usize, 0..3usize, 0..3usize).prop_map(|(g, p, m, s, r)| SpeechAnnotation {
            gender: [Gender::Male, Gender::Female][g],
            pitch_level: [PitchLevel::Low, PitchLevel::Moderate, PitchLevel::High][p],
            monotony: [Monotony::Monotone, Monotony::Expressive][m],
            pace_level: [PaceLevel::Slow, PaceLevel::Moderate, PaceLevel::Fast][s],
            reverberation_level: [
                ReverberationLevel::VeryClear,
                ReverberationLevel::SlightlyEchoey,
                ReverberationLevel::Echoey,
            ][r],
        })
    }

    proptest! {
        #[test]
        fn template_always_passes_its_validator(a in annotation()) {
            prop_assert!(mentions_all_attributes(render_template(&a).as_str(), &a));
        }
    }
}
