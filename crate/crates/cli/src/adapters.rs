use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use msense_core::audio::Waveform;
use msense_core::dialogue::{ToneTts, TtsAdapter};
use msense_core::eval::{EmotionAdapter, ProsodyEmotionClassifier};
use msense_core::paralinguistics::{GenderAdapter, PitchGenderClassifier, Renderer};
use msense_core::segment::tables::{AsrTable, DiarizationTable, SceneTable};
use msense_core::segment::{AsrAdapter, ContentSceneDetector, DiarizationAdapter, SceneAdapter};
use msense_core::speakers::{read_embedding_cache, EmbeddingAdapter, SpectrumEmbedder, SpeechEmbedding};

use crate::config::{Binding, PipelineConfig};

fn path_of(b: &Binding, slot: &str) -> Result<PathBuf> {
    b.path.clone().ok_or_else(|| anyhow!("adapters.{slot}: `{}` needs a path", b.kind))
}

pub fn asr(cfg: &PipelineConfig) -> Result<Box<dyn AsrAdapter>> {
    let b = cfg.binding("asr");
    let p = path_of(&b, "asr")?;
    Ok(Box::new(AsrTable::load(&p).with_context(|| format!("loading ASR table {}", p.display()))?))
}

pub fn diarization(cfg: &PipelineConfig) -> Result<Box<dyn DiarizationAdapter>> {
    let b = cfg.binding("diarization");
    let p = path_of(&b, "diarization")?;
    Ok(Box::new(DiarizationTable::load(&p).with_context(|| format!("loading diarization table {}", p.display()))?))
}

pub fn scene(cfg: &PipelineConfig) -> Result<Box<dyn SceneAdapter>> {
    let b = cfg.binding("scene");
    match b.kind.as_str() {
        "content" => Ok(Box::new(ContentSceneDetector { config: cfg.segmentation.scene })),
        "table" => {
            let p = path_of(&b, "scene")?;
            Ok(Box::new(SceneTable::load(&p).with_context(|| format!("loading scene table {}", p.display()))?))
        }
        other => bail!("adapters.scene: unknown kind `{other}`"),
    }
}

/// Speaker embeddings either computed from audio or read from a cache file.
pub enum Embeddings {
    Model(Box<dyn EmbeddingAdapter>),
    Cache(HashMap<String, SpeechEmbedding>),
}

impl Embeddings {
    pub fn get(&self, utterance_id: &str, audio: impl FnOnce() -> Result<Waveform>) -> Result<SpeechEmbedding> {
        match self {
            Embeddings::Model(m) => {
                let wave = audio()?;
                let raw = m.embed(&wave).with_context(|| format!("embedding `{utterance_id}`"))?;
                Ok(SpeechEmbedding::new(utterance_id, &raw)?)
            }
            Embeddings::Cache(c) => {
                c.get(utterance_id).cloned().ok_or_else(|| anyhow!("embedding cache has no entry for `{utterance_id}`"))
            }
        }
    }
}

pub fn embeddings(cfg: &PipelineConfig) -> Result<Embeddings> {
    let b = cfg.binding("embedding");
    match b.kind.as_str() {
        "spectrum" => Ok(Embeddings::Model(Box::new(SpectrumEmbedder::default()))),
        "cache" => {
            let p = path_of(&b, "embedding")?;
            let file = std::fs::File::open(&p).with_context(|| format!("opening embedding cache {}", p.display()))?;
            let all = read_embedding_cache(std::io::BufReader::new(file))?;
            Ok(Embeddings::Cache(all.into_iter().map(|e| (e.utterance_id.clone(), e)).collect()))
        }
        other => bail!("adapters.embedding: unknown kind `{other}`"),
    }
}

pub fn gender(_cfg: &PipelineConfig) -> Box<dyn GenderAdapter> {
    Box::new(PitchGenderClassifier::default())
}

pub fn description(_cfg: &PipelineConfig) -> Renderer<'static> {
    Renderer::Template
}

pub fn tts(_cfg: &PipelineConfig) -> Box<dyn TtsAdapter> {
    Box::new(ToneTts::default())
}

pub fn emotion(_cfg: &PipelineConfig) -> Box<dyn EmotionAdapter> {
    Box::new(ProsodyEmotionClassifier)
}

pub fn live_asr(_cfg: &PipelineConfig) -> Option<Box<dyn AsrAdapter>> {
    None
}
