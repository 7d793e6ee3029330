//! Model subcommands: train, generate, evaluate, export-human-eval.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use msense_core::audio::Waveform;
use msense_core::dataset::{read_examples, Split, TrainingExample};
use msense_core::dialogue::{synthesize_speech, train, FeatureLoader, ModelExample, MultisensoryModel};
use msense_core::eval::{
    ablation_harness, emotion_consistency, export_human_eval_packet, render_csv, render_text, text_metrics, AblationRow,
    HumanEvalSample, ResponseText, TableLayout, CANONICAL_SETS, DEFAULT_CRITERIA,
};
use msense_core::fusion::ModalitySet;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use crate::adapters;
use crate::config::PipelineConfig;
use crate::io::{read_json, read_jsonl, to_jsonl, write_atomic};
use crate::pipeline::examples_path;

pub fn checkpoint_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.runs_dir.join("checkpoint.safetensors")
}

pub fn train_log_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.runs_dir.join("train_log.jsonl")
}

pub fn generations_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.runs_dir.join("generations.jsonl")
}

fn load_examples(path: &Path) -> Result<Vec<TrainingExample>> {
    let file = std::fs::File::open(path).with_context(|| format!("opening examples {}", path.display()))?;
    Ok(read_examples(std::io::BufReader::new(file))?)
}

/// Loads features for each example; examples whose media fail are skipped.
fn model_examples(loader: &FeatureLoader, examples: &[TrainingExample]) -> Vec<ModelExample> {
    examples
        .iter()
        .filter_map(|ex| match loader.example(ex) {
            Ok(m) => Some(m),
            Err(e) => {
                warn!(dialogue = %ex.dialogue_id, target = %ex.target_utterance_id, error = %e, "skipping example");
                None
            }
        })
        .collect()
}

pub struct TrainArgs {
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub max_steps: Option<usize>,
    pub epochs: Option<usize>,
}

pub fn train_cmd(cfg: &PipelineConfig, args: TrainArgs, dry_run: bool) -> Result<()> {
    let out = args.out.unwrap_or_else(|| checkpoint_path(cfg));
    let log = args.log.unwrap_or_else(|| train_log_path(cfg));
    let mut tc = cfg.train;
    tc.seed = cfg.seed;
    if args.max_steps.is_some() {
        tc.max_steps = args.max_steps;
    }
    if let Some(e) = args.epochs {
        tc.epochs = e;
    }
    tc.validate()?;
    let train_raw = load_examples(&examples_path(cfg, Split::Train))?;
    let valid_file = examples_path(cfg, Split::Valid);
    let valid_raw = if valid_file.is_file() { load_examples(&valid_file)? } else { Vec::new() };
    if train_raw.is_empty() {
        bail!("no training examples in {}", examples_path(cfg, Split::Train).display());
    }
    if dry_run {
        info!(train = train_raw.len(), valid = valid_raw.len(), "dry run: inputs valid, nothing written");
        return Ok(());
    }
    let loader = FeatureLoader::new(&cfg.paths.dataset_dir);
    let train_set = model_examples(&loader, &train_raw);
    let valid_set = model_examples(&loader, &valid_raw);
    if train_set.is_empty() {
        bail!("every training example failed to load");
    }
    let mut model = MultisensoryModel::new(cfg.model.clone(), cfg.seed)?;
    if let Some(dir) = log.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut log_file = std::io::BufWriter::new(
        std::fs::File::create(&log).with_context(|| format!("creating {}", log.display()))?,
    );
    let mut log_err = None;
    let report = train(&mut model, &train_set, &valid_set, &tc, |s| {
        info!(step = s.step, epoch = s.epoch, loss = s.loss, lr = s.lr, "step");
        let line = serde_json::json!({ "step": s.step, "loss": s.loss, "lr": s.lr });
        if let Err(e) = writeln!(log_file, "{line}") {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e).with_context(|| format!("writing {}", log.display()));
    }
    log_file.flush()?;
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    model.save(&out)?;
    let first = report.steps.first().map(|s| s.loss).unwrap_or(f64::NAN);
    let last = report.steps.last().map(|s| s.loss).unwrap_or(f64::NAN);
    println!("{} steps, loss {first:.4} -> {last:.4}; checkpoint {}", report.steps.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub dialogue_id: String,
    pub target_utterance_id: String,
    pub modalities: ModalitySet,
    pub response_text: String,
    pub description_text: String,
    pub parse_ok: bool,
    pub reference_text: String,
    pub reference_description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio: Option<PathBuf>,
}

pub struct GenerateArgs {
    pub checkpoint: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub limit: Option<usize>,
    pub speech_dir: Option<PathBuf>,
}

pub fn generate_cmd(cfg: &PipelineConfig, args: GenerateArgs, dry_run: bool) -> Result<()> {
    let ckpt = args.checkpoint.unwrap_or_else(|| checkpoint_path(cfg));
    let examples_file = args.examples.unwrap_or_else(|| examples_path(cfg, Split::Test));
    let out = args.out.unwrap_or_else(|| generations_path(cfg));
    let mut raw = load_examples(&examples_file)?;
    if let Some(n) = args.limit {
        raw.truncate(n);
    }
    let model = MultisensoryModel::load(&ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
    if dry_run {
        info!(examples = raw.len(), "dry run: inputs valid, nothing written");
        return Ok(());
    }
    let loader = FeatureLoader::new(&cfg.paths.dataset_dir);
    let tts = adapters::tts(cfg);
    let mut records = Vec::with_capacity(raw.len());
    for ex in &raw {
        let m = match loader.example(ex) {
            Ok(m) => m,
            Err(e) => {
                warn!(target = %ex.target_utterance_id, error = %e, "skipping example");
                continue;
            }
        };
        let output = model.generate(&m.history, &cfg.generation)?;
        let audio = match &args.speech_dir {
            Some(dir) if !output.response_text.trim().is_empty() => {
                let wave = synthesize_speech(&output.response_text, &output.description_text, tts.as_ref())?;
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let p = dir.join(format!("{}.wav", ex.target_utterance_id));
                wave.write_wav(&p)?;
                Some(p)
            }
            _ => None,
        };
        records.push(GenerationRecord {
            dialogue_id: ex.dialogue_id.clone(),
            target_utterance_id: ex.target_utterance_id.clone(),
            modalities: model.config.modalities,
            response_text: output.response_text,
            description_text: output.description_text,
            parse_ok: output.parse_ok,
            reference_text: ex.target_text.clone(),
            reference_description: ex.target_description.clone(),
            audio,
        });
    }
    write_atomic(&out, &to_jsonl(&records)?)?;
    let parsed = records.iter().filter(|r| r.parse_ok).count();
    println!("{} generations ({parsed} parsed) -> {}", records.len(), out.display());
    Ok(())
}

pub struct EvaluateArgs {
    pub generations: Option<PathBuf>,
    pub ablation: bool,
    pub checkpoint: Option<PathBuf>,
    pub examples: Option<PathBuf>,
    pub limit: Option<usize>,
    pub emotion_audio: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

fn wavs_in(dir: &Path) -> Result<Vec<Waveform>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    paths.iter().map(|p| Waveform::read_wav(p).with_context(|| format!("reading {}", p.display()))).collect()
}

pub fn evaluate_cmd(cfg: &PipelineConfig, args: EvaluateArgs, dry_run: bool) -> Result<()> {
    let out_dir = args.out_dir.unwrap_or_else(|| cfg.paths.runs_dir.clone());
    let (rows, name, layout) = if args.ablation {
        let ckpt = args.checkpoint.unwrap_or_else(|| checkpoint_path(cfg));
        let examples_file = args.examples.unwrap_or_else(|| examples_path(cfg, Split::Test));
        let mut raw = load_examples(&examples_file)?;
        if let Some(n) = args.limit {
            raw.truncate(n);
        }
        MultisensoryModel::load(&ckpt).with_context(|| format!("loading checkpoint {}", ckpt.display()))?;
        if dry_run {
            info!(examples = raw.len(), "dry run: inputs valid, nothing written");
            return Ok(());
        }
        let examples = model_examples(&FeatureLoader::new(&cfg.paths.dataset_dir), &raw);
        let rows = ablation_harness(
            |set| {
                let mut m = MultisensoryModel::load(&ckpt)?;
                m.config.modalities = set;
                Ok(m)
            },
            &examples,
            &CANONICAL_SETS,
            &cfg.generation,
        )?;
        (rows, "ablation", TableLayout::Ablation)
    } else {
        let path = args.generations.unwrap_or_else(|| generations_path(cfg));
        let records: Vec<GenerationRecord> = read_jsonl(&path)?;
        if records.is_empty() {
            bail!("no generations in {}", path.display());
        }
        if dry_run {
            info!(generations = records.len(), "dry run: inputs valid, nothing written");
            return Ok(());
        }
        let hyps: Vec<ResponseText> = records.iter().map(|r| ResponseText::new(r.response_text.clone())).collect();
        let refs: Vec<ResponseText> = records.iter().map(|r| ResponseText::new(r.reference_text.clone())).collect();
        let report = text_metrics(&hyps, &refs)?;
        let modalities = records[0].modalities;
        (vec![AblationRow { modalities, report }], "metrics", TableLayout::Full)
    };
    let text = render_text(&rows, layout);
    write_atomic(&out_dir.join(format!("{name}.txt")), text.as_bytes())?;
    write_atomic(&out_dir.join(format!("{name}.csv")), render_csv(&rows, layout)?.as_bytes())?;
    print!("{text}");
    if let Some(dir) = args.emotion_audio {
        let waves = wavs_in(&dir)?;
        let score = emotion_consistency(&waves, adapters::emotion(cfg).as_ref())?;
        println!("emotion consistency over {} clips: {:.2}%", waves.len(), 100.0 * score);
    }
    Ok(())
}

pub fn export_human_eval_cmd(cfg: &PipelineConfig, samples: &Path, out: &Path, dry_run: bool) -> Result<()> {
    let mut list: Vec<HumanEvalSample> = read_json(samples)?;
    let base = samples.parent().unwrap_or(Path::new("."));
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    for s in &mut list {
        fix(&mut s.baseline_audio);
        fix(&mut s.system_audio);
        for h in &mut s.history {
            if let Some(a) = &mut h.audio {
                fix(a);
            }
        }
    }
    if dry_run {
        info!(samples = list.len(), "dry run: inputs valid, nothing written");
        return Ok(());
    }
    export_human_eval_packet(&list, &DEFAULT_CRITERIA, out, cfg.seed)?;
    println!("{} samples -> {}", list.len(), out.display());
    Ok(())
}
