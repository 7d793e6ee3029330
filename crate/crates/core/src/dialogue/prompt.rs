use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::lm::TinyLm;
use super::tokenizer::{keep_tail, ByteTokenizer};
use crate::error::{Error, Result};
use crate::fusion::{Modality, ModalitySet};
use crate::nn::ParamStore;
use crate::speakers::SpeakerId;

/// Instruction wrapper: a preamble, one labeled line per utterance, and a
/// closing directive asking for the response and its voice description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstructionTemplate {
    pub system_preamble: String,
    pub speaker_line_format: String,
    pub description_directive: String,
}

impl Default for InstructionTemplate {
    fn default() -> Self {
        Self {
            system_preamble: "You are taking part in a conversation recorded on video. Every turn below is labeled \
                              with its speaker ID and carries the speaker's face and voice along with the words. \
                              Continue the conversation as the next speaker.\n"
                .into(),
            speaker_line_format: "{speaker}: {content}\n".into(),
            description_directive: "Write the next response, then [DESC], then describe the voice that should speak it.\n"
                .into(),
        }
    }
}

impl InstructionTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.system_preamble.is_empty() || self.description_directive.is_empty() {
            return Err(Error::invalid("template preamble and directive must be non-empty"));
        }
        let f = &self.speaker_line_format;
        if f.matches("{speaker}").count() != 1 || f.matches("{content}").count() != 1 {
            return Err(Error::invalid("speaker_line_format needs exactly one {speaker} and one {content} slot"));
        }
        Ok(())
    }

    /// Text before and after the content slot for `speaker`.
    fn line_parts(&self, speaker: SpeakerId) -> (String, String) {
        let (before, after) = self.speaker_line_format.split_once("{content}").expect("validated template");
        let label = speaker.to_string();
        (before.replace("{speaker}", &label), after.replace("{speaker}", &label))
    }
}

/// One utterance ready for the prompt: projected query tokens per present
/// modality plus its transcript.
#[derive(Debug, Clone)]
pub struct PromptUtterance {
    pub speaker: SpeakerId,
    pub text: String,
    pub video: Option<Tensor>,
    pub audio: Option<Tensor>,
}

impl PromptUtterance {
    pub fn text_only(speaker: SpeakerId, text: impl Into<String>) -> Self {
        Self { speaker, text: text.into(), video: None, audio: None }
    }

    fn rows(t: &Option<Tensor>) -> usize {
        t.as_ref().map(|t| t.dims()[0]).unwrap_or(0)
    }

    /// Length split into the part that cannot shrink and the transcript.
    fn cost(&self, template: &InstructionTemplate, modalities: ModalitySet) -> UtteranceCost {
        let (pre, post) = template.line_parts(self.speaker);
        let tok = ByteTokenizer;
        let mut fixed = tok.count(&pre) + tok.count(&post);
        if modalities.video {
            fixed += Self::rows(&self.video);
        }
        if modalities.audio {
            fixed += Self::rows(&self.audio);
        }
        let text = if modalities.text { tok.count(&self.text) } else { 0 };
        UtteranceCost { fixed, text }
    }
}

#[derive(Debug, Clone)]
pub enum PromptPiece {
    Text(String),
    Embeddings { modality: Modality, tensor: Tensor },
}

#[derive(Debug, Clone, Default)]
pub struct Prompt {
    pub pieces: Vec<PromptPiece>,
}

impl Prompt {
    /// Textual form with multimodal segments shown as `<video:N>` / `<audio:N>`.
    pub fn render(&self) -> String {
        self.pieces
            .iter()
            .map(|p| match p {
                PromptPiece::Text(s) => s.clone(),
                PromptPiece::Embeddings { modality, tensor } => format!("<{modality}:{}>", tensor.dims()[0]),
            })
            .collect()
    }

    /// Length in language-model positions.
    pub fn len(&self) -> usize {
        self.pieces
            .iter()
            .map(|p| match p {
                PromptPiece::Text(s) => ByteTokenizer.count(s),
                PromptPiece::Embeddings { tensor, .. } => tensor.dims()[0],
            })
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Positions occupied by each modality's query tokens.
    pub fn modality_len(&self, m: Modality) -> usize {
        self.pieces
            .iter()
            .map(|p| match p {
                PromptPiece::Embeddings { modality, tensor } if *modality == m => tensor.dims()[0],
                _ => 0,
            })
            .sum()
    }

    pub fn embed(&self, lm: &TinyLm, store: &ParamStore) -> Result<Tensor> {
        let mut parts = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            match p {
                PromptPiece::Text(s) => {
                    let ids = ByteTokenizer.encode(s);
                    if !ids.is_empty() {
                        parts.push(lm.embed(store, &ids)?);
                    }
                }
                PromptPiece::Embeddings { tensor, .. } => parts.push(tensor.clone()),
            }
        }
        Ok(Tensor::cat(&parts, 0)?)
    }
}

/// Preamble, then each utterance as its speaker label followed by
/// `[video ∥ audio ∥ text]`, then the directive.
pub fn assemble_prompt(
    history: &[PromptUtterance],
    current: &PromptUtterance,
    template: &InstructionTemplate,
    modalities: ModalitySet,
) -> Prompt {
    let mut pieces = vec![PromptPiece::Text(template.system_preamble.clone())];
    for u in history.iter().chain(std::iter::once(current)) {
        let (pre, post) = template.line_parts(u.speaker);
        pieces.push(PromptPiece::Text(pre));
        if modalities.video {
            if let Some(t) = &u.video {
                pieces.push(PromptPiece::Embeddings { modality: Modality::Video, tensor: t.clone() });
            }
        }
        if modalities.audio {
            if let Some(t) = &u.audio {
                pieces.push(PromptPiece::Embeddings { modality: Modality::Audio, tensor: t.clone() });
            }
        }
        if modalities.text && !u.text.is_empty() {
            pieces.push(PromptPiece::Text(u.text.clone()));
        }
        pieces.push(PromptPiece::Text(post));
    }
    pieces.push(PromptPiece::Text(template.description_directive.clone()));
    merge_text(pieces)
}

fn merge_text(pieces: Vec<PromptPiece>) -> Prompt {
    let mut out: Vec<PromptPiece> = Vec::with_capacity(pieces.len());
    for p in pieces {
        match (out.last_mut(), p) {
            (_, PromptPiece::Text(s)) if s.is_empty() => {}
            (Some(PromptPiece::Text(prev)), PromptPiece::Text(s)) => prev.push_str(&s),
            (_, p) => out.push(p),
        }
    }
    Prompt { pieces: out }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UtteranceCost {
    pub fixed: usize,
    pub text: usize,
}

impl UtteranceCost {
    pub fn total(&self) -> usize {
        self.fixed + self.text
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextWindow {
    /// Index of the oldest retained history utterance.
    pub first_kept: usize,
    pub kept: usize,
    /// Transcript tokens of the current utterance that survive.
    pub current_text_tokens: usize,
    pub current_truncated: bool,
    pub total: usize,
}

/// Drops whole history utterances oldest-first until the total fits;
/// the current utterance always stays, losing text from the left if it
/// alone is too long.
pub fn truncate_context(history: &[usize], current: UtteranceCost, max_input_len: usize) -> ContextWindow {
    if current.total() > max_input_len {
        let keep = max_input_len.saturating_sub(current.fixed);
        return ContextWindow {
            first_kept: history.len(),
            kept: 0,
            current_text_tokens: keep,
            current_truncated: true,
            total: current.fixed + keep,
        };
    }
    let mut total: usize = history.iter().sum::<usize>() + current.total();
    let mut first = 0;
    while total > max_input_len {
        total -= history[first];
        first += 1;
    }
    ContextWindow {
        first_kept: first,
        kept: history.len() - first,
        current_text_tokens: current.text,
        current_truncated: false,
        total,
    }
}

/// Truncates to fit `max_input_len` LM positions, then assembles. The
/// preamble and directive are charged against the budget first.
pub fn build_prompt(
    history: &[PromptUtterance],
    current: &PromptUtterance,
    template: &InstructionTemplate,
    modalities: ModalitySet,
    max_input_len: usize,
) -> Result<(Prompt, ContextWindow)> {
    template.validate()?;
    let tok = ByteTokenizer;
    let overhead = tok.count(&template.system_preamble) + tok.count(&template.description_directive);
    let budget = max_input_len
        .checked_sub(overhead)
        .ok_or_else(|| Error::invalid(format!("max_input_len {max_input_len} is below the template overhead {overhead}")))?;
    let costs: Vec<usize> = history.iter().map(|u| u.cost(template, modalities).total()).collect();
    let window = truncate_context(&costs, current.cost(template, modalities), budget);
    let mut cur = current.clone();
    if window.current_truncated {
        cur.text = keep_tail(&current.text, window.current_text_tokens).to_string();
    }
    let prompt = assemble_prompt(&history[window.first_kept..], &cur, template, modalities);
    let len = prompt.len();
    if len > max_input_len {
        return Err(Error::invalid(format!(
            "current utterance alone needs {len} positions, more than max_input_len {max_input_len}"
        )));
    }
    Ok((prompt, window))
}
