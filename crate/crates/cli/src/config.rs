//! Pipeline configuration: one TOML file, every section optional.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `seed` | 0 | seed for splits, model init and training |
//! | `paths.sources` | `sources.json` | JSON array of media sources |
//! | `paths.annotations` | `annotations` | dialogue-split sidecars, `{source_id}.json` |
//! | `paths.work_dir` | `work` | drafts and intermediate manifests |
//! | `paths.dataset_dir` | `dataset` | final manifest, splits, media, examples |
//! | `paths.runs_dir` | `runs` | checkpoints, logs, generations, reports |
//! | `adapters.*` | see [`AdapterBindings`] | `kind` or `kind:path` bindings |
//! | `segmentation.max_clip_s` | 25 | longest clip sent to ASR |
//! | `segmentation.scene` | threshold 27, min_scene_len 0.6 | content scene detector |
//! | `clustering` | min_cluster_size 2 | HDBSCAN parameters |
//! | `paralinguistics` | see `BinThresholds` | bin edges |
//! | `splits.ratios` | 0.815, 0.098, 0.087 | train/valid/test shares |
//! | `model` | see `ModelConfig` | fusion, backbone, adapters, prompt |
//! | `train` | batch 6, lr 5e-5, decay 0.98 | optimizer schedule |
//! | `generation` | 200 tokens, greedy | decoding |
//! | `serve` | port 8080, 10 turns, 1 h TTL | HTTP service |
//!
//! Relative paths resolve against the directory holding the config file.

use std::path::{Path, PathBuf};

use msense_core::dataset::DEFAULT_SPLIT_RATIOS;
use msense_core::dialogue::{GenerationConfig, ModelConfig, TrainConfig};
use msense_core::paralinguistics::BinThresholds;
use msense_core::segment::{SceneDetectorConfig, DEFAULT_MAX_CLIP_S};
use msense_core::speakers::ClusterParams;
use serde::{Deserialize, Serialize};

pub const CONFIG_ENV: &str = "MSENSE_CONFIG";

#[derive(Debug)]
pub struct ConfigError {
    pub violations: Vec<String>,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration:")?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub sources: PathBuf,
    pub annotations: PathBuf,
    pub work_dir: PathBuf,
    pub dataset_dir: PathBuf,
    pub runs_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            sources: "sources.json".into(),
            annotations: "annotations".into(),
            work_dir: "work".into(),
            dataset_dir: "dataset".into(),
            runs_dir: "runs".into(),
        }
    }
}

/// Which implementation backs each external model. Values are `kind` or
/// `kind:path`.
///
/// | adapter | kinds |
/// |---|---|
/// | `asr` | `table:<json>` |
/// | `diarization` | `table:<json>` |
/// | `scene` | `content`, `table:<json>` |
/// | `embedding` | `spectrum`, `cache:<bin>` |
/// | `gender` | `pitch` |
/// | `description` | `template` |
/// | `tts` | `tone` |
/// | `emotion` | `prosody` |
/// | `live_asr` | `none` |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdapterBindings {
    pub asr: String,
    pub diarization: String,
    pub scene: String,
    pub embedding: String,
    pub gender: String,
    pub description: String,
    pub tts: String,
    pub emotion: String,
    pub live_asr: String,
}

impl Default for AdapterBindings {
    fn default() -> Self {
        Self {
            asr: "table:asr.json".into(),
            diarization: "table:diarization.json".into(),
            scene: "content".into(),
            embedding: "spectrum".into(),
            gender: "pitch".into(),
            description: "template".into(),
            tts: "tone".into(),
            emotion: "prosody".into(),
            live_asr: "none".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub kind: String,
    pub path: Option<PathBuf>,
}

impl Binding {
    pub fn parse(value: &str) -> Self {
        match value.split_once(':') {
            Some((kind, path)) => Binding { kind: kind.to_string(), path: Some(PathBuf::from(path)) },
            None => Binding { kind: value.to_string(), path: None },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Segmentation {
    pub max_clip_s: f64,
    pub scene: SceneDetectorConfig,
}

impl Default for Segmentation {
    fn default() -> Self {
        Self { max_clip_s: DEFAULT_MAX_CLIP_S, scene: SceneDetectorConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Splits {
    pub ratios: [f64; 3],
}

impl Default for Splits {
    fn default() -> Self {
        Self { ratios: DEFAULT_SPLIT_RATIOS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Serve {
    pub port: u16,
    pub max_history: usize,
    pub session_ttl_s: u64,
    /// Cache for synthesized speech; defaults to `{runs_dir}/serve_audio`.
    pub audio_dir: Option<PathBuf>,
}

impl Default for Serve {
    fn default() -> Self {
        Self { port: 8080, max_history: 10, session_ttl_s: 3600, audio_dir: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub adapters: AdapterBindings,
    pub segmentation: Segmentation,
    pub clustering: ClusterParams,
    pub paralinguistics: BinThresholds,
    pub splits: Splits,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub generation: GenerationConfig,
    pub serve: Serve,
}

const BINDING_KINDS: [(&str, &[&str]); 9] = [
    ("asr", &["table"]),
    ("diarization", &["table"]),
    ("scene", &["content", "table"]),
    ("embedding", &["spectrum", "cache"]),
    ("gender", &["pitch"]),
    ("description", &["template"]),
    ("tts", &["tone"]),
    ("emotion", &["prosody"]),
    ("live_asr", &["none"]),
];

const NEEDS_PATH: [&str; 2] = ["table", "cache"];

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError { violations: vec![e.message().to_string()] })
    }

    /// Reads, resolves relative paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { violations: vec![format!("cannot read {}: {e}", path.display())] })?;
        let mut cfg = Self::from_toml(&text).map_err(|mut e| {
            e.violations = e.violations.into_iter().map(|v| format!("{}: {v}", path.display())).collect();
            e
        })?;
        cfg.resolve(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn binding(&self, name: &str) -> Binding {
        let a = &self.adapters;
        Binding::parse(match name {
            "asr" => &a.asr,
            "diarization" => &a.diarization,
            "scene" => &a.scene,
            "embedding" => &a.embedding,
            "gender" => &a.gender,
            "description" => &a.description,
            "tts" => &a.tts,
            "emotion" => &a.emotion,
            "live_asr" => &a.live_asr,
            other => panic!("no adapter slot `{other}`"),
        })
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        for path in [&mut p.sources, &mut p.annotations, &mut p.work_dir, &mut p.dataset_dir, &mut p.runs_dir] {
            fix(path);
        }
        if let Some(dir) = &mut self.serve.audio_dir {
            fix(dir);
        }
        let a = &mut self.adapters;
        for value in [
            &mut a.asr,
            &mut a.diarization,
            &mut a.scene,
            &mut a.embedding,
            &mut a.gender,
            &mut a.description,
            &mut a.tts,
            &mut a.emotion,
            &mut a.live_asr,
        ] {
            if let Some((kind, path)) = value.split_once(':') {
                let path = PathBuf::from(path);
                if path.is_relative() {
                    *value = format!("{kind}:{}", base.join(path).display());
                }
            }
        }
    }

    /// Collects every violation rather than stopping at the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Vec::new();
        for (slot, kinds) in BINDING_KINDS {
            let b = self.binding(slot);
            if !kinds.contains(&b.kind.as_str()) {
                v.push(format!("adapters.{slot}: unknown kind `{}` (expected one of {})", b.kind, kinds.join(", ")));
            } else if NEEDS_PATH.contains(&b.kind.as_str()) && b.path.as_ref().is_none_or(|p| p.as_os_str().is_empty()) {
                v.push(format!("adapters.{slot}: `{}` needs a path, e.g. `{}:file`", b.kind, b.kind));
            } else if !NEEDS_PATH.contains(&b.kind.as_str()) && b.path.is_some() {
                v.push(format!("adapters.{slot}: `{}` takes no path", b.kind));
            }
        }
        if !(self.segmentation.max_clip_s > 0.0) {
            v.push(format!("segmentation.max_clip_s must be positive, got {}", self.segmentation.max_clip_s));
        }
        if self.clustering.min_cluster_size < 2 {
            v.push(format!("clustering.min_cluster_size must be at least 2, got {}", self.clustering.min_cluster_size));
        }
        let r = self.splits.ratios;
        if r.iter().any(|x| !(*x >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            v.push(format!("splits.ratios must be non-negative and sum to 1, got {r:?}"));
        }
        let t = &self.paralinguistics;
        for (name, bands) in [("pitch_male", t.pitch_male), ("pitch_female", t.pitch_female)] {
            if !(bands.low < bands.high) {
                v.push(format!("paralinguistics.{name}: low {} must be below high {}", bands.low, bands.high));
            }
        }
        if !(t.pace_slow < t.pace_fast) {
            v.push(format!("paralinguistics: pace_slow {} must be below pace_fast {}", t.pace_slow, t.pace_fast));
        }
        if !(t.clarity_echoey < t.clarity_very_clear) {
            v.push(format!(
                "paralinguistics: clarity_echoey {} must be below clarity_very_clear {}",
                t.clarity_echoey, t.clarity_very_clear
            ));
        }
        if let Err(e) = self.model.validate() {
            v.push(format!("model: {e}"));
        }
        if let Err(e) = self.train.validate() {
            v.push(format!("train: {e}"));
        }
        if self.train.adapter_rank != self.model.lora.rank {
            v.push(format!(
                "train.adapter_rank {} differs from model.lora.rank {}",
                self.train.adapter_rank, self.model.lora.rank
            ));
        }
        if self.generation.max_new_tokens == 0 {
            v.push("generation.max_new_tokens must be positive".into());
        }
        if self.serve.max_history == 0 {
            v.push("serve.max_history must be positive".into());
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations: v })
        }
    }
}

/// The config path in effect: `MSENSE_CONFIG` wins over `--config`.
pub fn config_path(flag: Option<&Path>) -> Option<PathBuf> {
    std::env::var_os(CONFIG_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| flag.map(Path::to_path_buf))
}
