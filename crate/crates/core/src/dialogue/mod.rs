//! Instruction assembly, context truncation, the training objective,
//! adapter fine-tuning, generation, output parsing and speech synthesis.

mod loader;
mod lm;
mod loss;
mod model;
mod prompt;
pub mod synthetic;
mod tokenizer;
mod train;
mod tts;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use loader::FeatureLoader;
pub use lm::{adapter_params, alibi_bias, LoraConfig, TinyLm, TinyLmConfig, ADAPTED};
pub use loss::compute_loss;
pub use model::{ModelConfig, ModelExample, MultisensoryModel, UtteranceInput};
pub use prompt::{
    assemble_prompt, build_prompt, truncate_context, ContextWindow, InstructionTemplate, Prompt, PromptPiece,
    PromptUtterance, UtteranceCost,
};
pub use tokenizer::{keep_tail, ByteTokenizer};
pub use train::{lr_at_epoch, train, EpochLog, StepLog, TrainConfig, TrainReport};
pub use tts::{synthesize_speech, ToneTts, TtsAdapter};

/// Marker between the response and its voice description.
pub const DESC_DELIMITER: &str = "[DESC]";

/// Training target: `response [DESC] description`.
pub fn target_text(response: &str, description: &str) -> String {
    format!("{} {DESC_DELIMITER} {}", response.trim(), description.trim())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub response_text: String,
    pub description_text: String,
    pub parse_ok: bool,
}

/// Splits on the first delimiter; a missing delimiter or empty response
/// is flagged rather than treated as an error.
pub fn parse_output(raw: &str) -> ModelOutput {
    match raw.split_once(DESC_DELIMITER) {
        Some((r, d)) => {
            let response_text = r.trim().to_string();
            ModelOutput {
                parse_ok: !response_text.is_empty(),
                response_text,
                description_text: d.trim().to_string(),
            }
        }
        None => ModelOutput { response_text: raw.trim().to_string(), description_text: String::new(), parse_ok: false },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    Greedy,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerationConfig {
    pub max_new_tokens: usize,
    pub decode_mode: DecodeMode,
    pub seed: u64,
    pub temperature: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { max_new_tokens: 200, decode_mode: DecodeMode::Greedy, seed: 0, temperature: 1.0 }
    }
}

/// Anything that can continue a prompt with text.
pub trait TextBackbone {
    fn complete(&self, prompt: &Prompt, config: &GenerationConfig) -> Result<String>;
}

pub fn generate(backbone: &dyn TextBackbone, prompt: &Prompt, config: &GenerationConfig) -> Result<ModelOutput> {
    let raw = backbone.complete(prompt, config)?;
    if raw.trim().is_empty() {
        return Err(Error::invalid("model produced an empty generation"));
    }
    Ok(parse_output(&raw))
}
