use std::path::Path;

use candle_core::{DType, Tensor, D};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use super::lm::{LoraConfig, TinyLm, TinyLmConfig};
use super::loss::compute_loss;
use super::prompt::{build_prompt, ContextWindow, InstructionTemplate, Prompt, PromptUtterance};
use super::tokenizer::ByteTokenizer;
use super::{generate, target_text, DecodeMode, GenerationConfig, ModelOutput, TextBackbone};
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::fusion::{FeatureSequence, FusionConfig, FusionModel, Modality, ModalitySet};
use crate::nn::ParamStore;
use crate::speakers::SpeakerId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub fusion: FusionConfig,
    pub lm: TinyLmConfig,
    pub lora: LoraConfig,
    pub modalities: ModalitySet,
    pub max_input_len: usize,
    pub template: InstructionTemplate,
    /// Seed for the frozen backbone weights, which are rebuilt on load.
    pub backbone_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let lm = TinyLmConfig::default();
        Self {
            fusion: FusionConfig {
                n_query: 32,
                hidden: 64,
                heads: 4,
                blocks: 2,
                ffn_dim: 128,
                video_feature_dim: 66,
                audio_feature_dim: 40,
                lm_dim: lm.d_model,
            },
            lm,
            lora: LoraConfig::default(),
            modalities: ModalitySet::ALL,
            max_input_len: 800,
            template: InstructionTemplate::default(),
            backbone_seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fusion.lm_dim != self.lm.d_model {
            return Err(Error::Shape(format!(
                "projection width {} does not match the language model width {}",
                self.fusion.lm_dim, self.lm.d_model
            )));
        }
        if self.lm.vocab != ByteTokenizer::VOCAB {
            return Err(Error::invalid(format!("tiny backbone needs vocab {}", ByteTokenizer::VOCAB)));
        }
        if !(self.modalities.video || self.modalities.audio || self.modalities.text) {
            return Err(Error::invalid("at least one modality must be enabled"));
        }
        self.template.validate()
    }
}

/// One utterance with its pre-extracted (frozen) features.
#[derive(Debug, Clone)]
pub struct UtteranceInput {
    pub speaker: SpeakerId,
    pub text: String,
    pub video: Option<FeatureSequence>,
    pub audio: Option<FeatureSequence>,
}

/// History `u_1..u_t` (the last entry is the current utterance) and the
/// next turn's response and description.
#[derive(Debug, Clone)]
pub struct ModelExample {
    pub history: Vec<UtteranceInput>,
    pub target_text: String,
    pub target_description: String,
}

impl ModelExample {
    pub fn target(&self) -> String {
        target_text(&self.target_text, &self.target_description)
    }
}

pub struct MultisensoryModel {
    pub config: ModelConfig,
    pub fusion: FusionModel,
    pub lm: TinyLm,
    pub store: ParamStore,
}

impl MultisensoryModel {
    /// Frozen backbone from `config.backbone_seed`; Q-Formers, projections
    /// and adapters from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new(DType::F32);
        let mut lm = TinyLm::new(config.lm);
        lm.init(&mut store, &mut ChaCha8Rng::seed_from_u64(config.backbone_seed))?;
        let fusion = FusionModel::new(config.fusion);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        fusion.init(&mut store, &mut rng)?;
        lm.attach_adapters(&mut store, config.lora, &mut rng)?;
        Ok(Self { config, fusion, lm, store })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let config = serde_json::json!({ "model": self.config });
        checkpoint::save(path, &self.store.tensors(true), &config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let loaded = checkpoint::load(path)?;
        let config: ModelConfig = serde_json::from_value(loaded.config.get("model").cloned().unwrap_or_default())?;
        let model = Self::new(config, 0)?;
        let expected = model.store.tensors(true);
        if let Some(name) = expected.keys().find(|k| !loaded.tensors.contains_key(*k)) {
            return Err(Error::Checkpoint(format!("checkpoint lacks tensor `{name}`")));
        }
        model.store.load(&loaded.tensors)?;
        Ok(model)
    }

    pub fn prompt_utterance(&self, u: &UtteranceInput) -> Result<PromptUtterance> {
        let m = self.config.modalities;
        let encode = |on: bool, modality, f: &Option<FeatureSequence>| -> Result<Option<Tensor>> {
            match (on, f) {
                (true, Some(f)) => Ok(Some(self.fusion.encode(&self.store, modality, f)?)),
                _ => Ok(None),
            }
        };
        Ok(PromptUtterance {
            speaker: u.speaker,
            text: u.text.clone(),
            video: encode(m.video, Modality::Video, &u.video)?,
            audio: encode(m.audio, Modality::Audio, &u.audio)?,
        })
    }

    pub fn prompt(&self, history: &[UtteranceInput]) -> Result<(Prompt, ContextWindow)> {
        let (current, earlier) = history.split_last().ok_or_else(|| Error::invalid("history is empty"))?;
        // only encode utterances that can possibly fit
        let skip = earlier.len().saturating_sub(self.config.max_input_len);
        let earlier = earlier[skip..].iter().map(|u| self.prompt_utterance(u)).collect::<Result<Vec<_>>>()?;
        let current = self.prompt_utterance(current)?;
        build_prompt(&earlier, &current, &self.config.template, self.config.modalities, self.config.max_input_len)
    }

    /// Cross-entropy over the target positions only (target ∥ end-of-sequence).
    pub fn example_loss(&self, ex: &ModelExample) -> Result<Tensor> {
        let (prompt, _) = self.prompt(&ex.history)?;
        let mut target = ByteTokenizer.encode(&ex.target());
        target.push(ByteTokenizer::EOS);
        let p = prompt.len();
        let prefix = prompt.embed(&self.lm, &self.store)?;
        let inputs = Tensor::cat(&[&prefix, &self.lm.embed(&self.store, &target[..target.len() - 1])?], 0)?;
        let logits = self.lm.forward(&self.store, &inputs)?;
        compute_loss(&logits.narrow(0, p - 1, target.len())?, &target)
    }

    pub fn generate(&self, history: &[UtteranceInput], config: &GenerationConfig) -> Result<ModelOutput> {
        let (prompt, _) = self.prompt(history)?;
        generate(self, &prompt, config)
    }
}

impl TextBackbone for MultisensoryModel {
    fn complete(&self, prompt: &Prompt, config: &GenerationConfig) -> Result<String> {
        let mut seq = prompt.embed(&self.lm, &self.store)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut out = Vec::new();
        for _ in 0..config.max_new_tokens {
            let logits = self.lm.forward(&self.store, &seq)?;
            let last = logits.get(logits.dims()[0] - 1)?;
            let next = match config.decode_mode {
                DecodeMode::Greedy => last.argmax(D::Minus1)?.to_scalar::<u32>()?,
                DecodeMode::Sample => {
                    let t = config.temperature.max(1e-6);
                    let probs: Vec<f32> = candle_nn::ops::softmax(&(last / t)?, D::Minus1)?.to_vec1()?;
                    let dist = WeightedIndex::new(&probs).map_err(|e| Error::invalid(format!("decode failed: {e}")))?;
                    dist.sample(&mut rng) as u32
                }
            };
            if next == ByteTokenizer::EOS {
                break;
            }
            out.push(next);
            seq = Tensor::cat(&[&seq, &self.lm.embed(&self.store, &[next])?], 0)?;
        }
        Ok(ByteTokenizer.decode(&out))
    }
}
