//! Corpus-building subcommands: ingest, speakers, annotate, build, stats.

use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use msense_core::audio::Waveform;
use msense_core::dataset::{
    build_training_examples, compute_stats, dialogues_from_groups, draft_utterance_id, make_splits, read_manifest_file,
    write_examples, write_manifest_file, Dialogue, DatasetStats, MediaLayout, Split, SplitSpec, SplitStats,
};
use msense_core::fusion::{sample_frame_indices, VIDEO_FPS, VIDEO_PAD};
use msense_core::paralinguistics::{bin_annotations, classify_gender, measure, render_description};
use msense_core::segment::{
    apply_dialogue_splits, read_drafts, segment_utterances, write_drafts, DialogueSplitAnnotation, FrameDirectory,
    MediaSource, UtteranceDraft,
};
use msense_core::speakers::{assign_speakers, SpeakerId};
use serde::Serialize;
use tracing::{info, warn};

use crate::adapters;
use crate::config::PipelineConfig;
use crate::io::{read_json, write_atomic};

/// Media directory inside the dataset; manifest media paths are relative to the dataset root.
pub const MEDIA_DIR: &str = "media";

pub fn drafts_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.work_dir.join("drafts.jsonl")
}

pub fn dialogues_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.work_dir.join("dialogues.jsonl")
}

pub fn annotated_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.work_dir.join("annotated.jsonl")
}

pub fn manifest_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.dataset_dir.join("manifest.jsonl")
}

pub fn splits_path(cfg: &PipelineConfig) -> PathBuf {
    cfg.paths.dataset_dir.join("splits.json")
}

pub fn examples_path(cfg: &PipelineConfig, split: Split) -> PathBuf {
    cfg.paths.dataset_dir.join("examples").join(format!("{split}.jsonl"))
}

/// Sources with media paths resolved against the sources file.
pub fn load_sources(path: &Path) -> Result<Vec<MediaSource>> {
    let mut sources: Vec<MediaSource> = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut seen = std::collections::HashSet::new();
    for s in &mut sources {
        s.validate()?;
        if !seen.insert(s.id.clone()) {
            bail!("{}: source id `{}` appears twice", path.display(), s.id);
        }
        for p in [&mut s.video_uri, &mut s.audio_uri] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    Ok(sources)
}

fn source_map(cfg: &PipelineConfig) -> Result<BTreeMap<String, MediaSource>> {
    Ok(load_sources(&cfg.paths.sources)?.into_iter().map(|s| (s.id.clone(), s)).collect())
}

fn read_source_audio(source: &MediaSource) -> Result<Waveform> {
    Waveform::read_wav(&source.audio_uri).with_context(|| format!("source `{}` audio", source.id))
}

fn clip(audio: &Waveform, start: f64, end: f64) -> Waveform {
    Waveform::new(audio.slice(start, end).to_vec(), audio.sample_rate)
}

pub fn ingest(cfg: &PipelineConfig, out: Option<PathBuf>, jobs: usize, dry_run: bool) -> Result<()> {
    let sources = load_sources(&cfg.paths.sources)?;
    let asr = adapters::asr(cfg)?;
    let diarizer = adapters::diarization(cfg)?;
    let scene = adapters::scene(cfg)?;
    let out = out.unwrap_or_else(|| drafts_path(cfg));
    for s in &sources {
        if !s.audio_uri.is_file() {
            bail!("source `{}`: audio {} not found", s.id, s.audio_uri.display());
        }
    }
    if dry_run {
        info!(sources = sources.len(), out = %out.display(), "dry run: inputs valid, nothing written");
        return Ok(());
    }
    let jobs = jobs.max(1).min(sources.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<msense_core::Result<Vec<UtteranceDraft>>>>> =
        sources.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(source) = sources.get(i) else { break };
                let r = segment_utterances(source, asr.as_ref(), diarizer.as_ref(), scene.as_ref(), cfg.segmentation.max_clip_s);
                *results[i].lock().expect("result slot poisoned") = Some(r);
            });
        }
    });
    let mut drafts = Vec::new();
    for (source, slot) in sources.iter().zip(results) {
        let r = slot.into_inner().expect("result slot poisoned").expect("every source processed");
        let d = r.with_context(|| format!("source `{}`", source.id))?;
        info!(source = %source.id, drafts = d.len(), "segmented");
        drafts.extend(d);
    }
    let mut buf = Vec::new();
    write_drafts(&mut buf, &drafts)?;
    write_atomic(&out, &buf)?;
    println!("{} drafts from {} sources -> {}", drafts.len(), sources.len(), out.display());
    Ok(())
}

pub fn speakers(cfg: &PipelineConfig, input: Option<PathBuf>, out: Option<PathBuf>, dry_run: bool) -> Result<()> {
    let input = input.unwrap_or_else(|| drafts_path(cfg));
    let out = out.unwrap_or_else(|| dialogues_path(cfg));
    let file = std::fs::File::open(&input).with_context(|| format!("opening drafts {}", input.display()))?;
    let drafts = read_drafts(BufReader::new(file))?;
    let sources = source_map(cfg)?;
    let mut by_source: BTreeMap<String, Vec<UtteranceDraft>> = BTreeMap::new();
    for d in drafts {
        if !sources.contains_key(&d.source_id) {
            bail!("draft from unknown source `{}`", d.source_id);
        }
        by_source.entry(d.source_id.clone()).or_default().push(d);
    }
    let mut annotations = BTreeMap::new();
    for id in by_source.keys() {
        let p = cfg.paths.annotations.join(format!("{id}.json"));
        let ann = if p.is_file() {
            DialogueSplitAnnotation::load(&p)?
        } else {
            warn!(source = %id, path = %p.display(), "no dialogue-split sidecar; treating the source as one dialogue");
            DialogueSplitAnnotation { source_id: id.clone(), ..Default::default() }
        };
        annotations.insert(id.clone(), ann);
    }
    let embeddings = adapters::embeddings(cfg)?;
    if dry_run {
        info!(sources = by_source.len(), out = %out.display(), "dry run: inputs valid, nothing written");
        return Ok(());
    }
    let layout = MediaLayout::new(MEDIA_DIR);
    let mut dialogues = Vec::new();
    for (id, drafts) in &by_source {
        let source = &sources[id];
        let groups = apply_dialogue_splits(drafts, &annotations[id])?;
        let mut audio = None;
        let mut speakers = Vec::with_capacity(groups.len());
        for group in &groups {
            let mut embs = Vec::with_capacity(group.len());
            for d in group {
                let e = embeddings.get(&draft_utterance_id(d), || {
                    if audio.is_none() {
                        audio = Some(read_source_audio(source)?);
                    }
                    Ok(clip(audio.as_ref().expect("loaded above"), d.start, d.end))
                })?;
                embs.push(e);
            }
            let ids = if group.len() < 2 {
                vec![SpeakerId(0); group.len()]
            } else {
                assign_speakers(&embs, &cfg.clustering).with_context(|| format!("source `{id}`: clustering"))?
            };
            speakers.push(ids);
        }
        let ds = dialogues_from_groups(id, &groups, &speakers, &layout);
        info!(source = %id, dialogues = ds.len(), "speakers assigned");
        dialogues.extend(ds);
    }
    write_manifest_file(&out, &dialogues)?;
    println!("{} dialogues -> {}", dialogues.len(), out.display());
    Ok(())
}

pub fn annotate(cfg: &PipelineConfig, input: Option<PathBuf>, out: Option<PathBuf>, dry_run: bool) -> Result<()> {
    let input = input.unwrap_or_else(|| dialogues_path(cfg));
    let out = out.unwrap_or_else(|| annotated_path(cfg));
    let mut dialogues = read_manifest_file(&input)?;
    let sources = source_map(cfg)?;
    for d in &dialogues {
        if !sources.contains_key(&d.source_id) {
            bail!("dialogue `{}` names unknown source `{}`", d.dialogue_id, d.source_id);
        }
    }
    if dry_run {
        info!(dialogues = dialogues.len(), out = %out.display(), "dry run: inputs valid, nothing written");
        return Ok(());
    }
    let gender = adapters::gender(cfg);
    let renderer = adapters::description(cfg);
    let mut audio_cache: Option<(String, Waveform)> = None;
    let (mut ok, mut failed) = (0usize, 0usize);
    for d in &mut dialogues {
        if audio_cache.as_ref().is_none_or(|(id, _)| *id != d.source_id) {
            audio_cache = Some((d.source_id.clone(), read_source_audio(&sources[&d.source_id])?));
        }
        let audio = &audio_cache.as_ref().expect("loaded above").1;
        for u in &mut d.utterances {
            let wave = clip(audio, u.start, u.end);
            let result = classify_gender(&u.utterance_id, &wave, gender.as_ref())
                .and_then(|g| measure(&wave, &u.text, u.duration(), g));
            match result {
                Ok(raw) => {
                    let a = bin_annotations(&raw, &cfg.paralinguistics);
                    u.description = Some(render_description(&a, &renderer).description.0);
                    u.annotation = Some(a);
                    ok += 1;
                }
                Err(e) => {
                    warn!(utterance = %u.utterance_id, error = %e, "annotation failed; left unannotated");
                    u.annotation = None;
                    u.description = None;
                    failed += 1;
                }
            }
        }
    }
    write_manifest_file(&out, &dialogues)?;
    println!("{ok} utterances annotated, {failed} failed -> {}", out.display());
    Ok(())
}

fn copy_frames(source: &MediaSource, frames: &FrameDirectory, u: &msense_core::dataset::Utterance, dataset: &Path) -> Result<Vec<PathBuf>> {
    let layout = MediaLayout::new(MEDIA_DIR);
    let picks = sample_frame_indices(frames.files().len(), source.video_fps, (u.start, u.end), VIDEO_FPS, VIDEO_PAD)?;
    let mut refs = Vec::with_capacity(picks.len());
    for (k, idx) in picks.into_iter().enumerate() {
        let src = &frames.files()[idx];
        let ext = src.extension().and_then(|e| e.to_str()).unwrap_or("jpg");
        let rel = layout.frame(&u.dialogue_id, &u.utterance_id, k).with_extension(ext);
        let dst = dataset.join(&rel);
        std::fs::copy(src, &dst).with_context(|| format!("copying {} to {}", src.display(), dst.display()))?;
        refs.push(rel);
    }
    Ok(refs)
}

pub fn build(cfg: &PipelineConfig, input: Option<PathBuf>, dry_run: bool) -> Result<()> {
    let input = input.unwrap_or_else(|| annotated_path(cfg));
    let mut dialogues = read_manifest_file(&input)?;
    let sources = source_map(cfg)?;
    let ids: Vec<&str> = dialogues.iter().map(|d| d.dialogue_id.as_str()).collect();
    let spec = make_splits(&ids, cfg.splits.ratios, cfg.seed)?;
    if dry_run {
        info!(dialogues = dialogues.len(), out = %cfg.paths.dataset_dir.display(), "dry run: inputs valid, nothing written");
        return Ok(());
    }
    let root = &cfg.paths.dataset_dir;
    let mut current: Option<(String, Waveform, Option<FrameDirectory>)> = None;
    for d in &mut dialogues {
        let source = sources.get(&d.source_id).with_context(|| format!("unknown source `{}`", d.source_id))?;
        if current.as_ref().is_none_or(|(id, _, _)| *id != source.id) {
            let frames = match FrameDirectory::open(&source.video_uri, source.video_fps) {
                Ok(f) if !f.files().is_empty() => Some(f),
                _ => {
                    warn!(source = %source.id, "no frames found; utterances get audio only");
                    None
                }
            };
            current = Some((source.id.clone(), read_source_audio(source)?, frames));
        }
        let (_, audio, frames) = current.as_ref().expect("loaded above");
        for u in &mut d.utterances {
            let dir = root.join(MediaLayout::new(MEDIA_DIR).utterance_dir(&u.dialogue_id, &u.utterance_id));
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let audio_ref = MediaLayout::new(MEDIA_DIR).audio(&u.dialogue_id, &u.utterance_id);
            clip(audio, u.start, u.end).write_wav(root.join(&audio_ref))?;
            u.audio_ref = audio_ref;
            u.frame_refs = match frames {
                Some(f) => copy_frames(source, f, u, root)?,
                None => Vec::new(),
            };
        }
    }
    write_manifest_file(manifest_path(cfg), &dialogues)?;
    write_atomic(&splits_path(cfg), serde_json::to_string_pretty(&spec)?.as_bytes())?;
    let mut counts = Vec::new();
    for split in Split::ALL {
        let mut examples = Vec::new();
        for d in dialogues.iter().filter(|d| spec.get(&d.dialogue_id) == Some(split)) {
            examples.extend(build_training_examples(d));
        }
        let mut buf = Vec::new();
        write_examples(&mut buf, &examples)?;
        write_atomic(&examples_path(cfg, split), &buf)?;
        counts.push(format!("{split} {}", examples.len()));
    }
    println!("{} dialogues -> {}; examples: {}", dialogues.len(), root.display(), counts.join(", "));
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StatsFormat {
    Text,
    Csv,
    Json,
}

#[derive(Serialize)]
struct StatsRow {
    split: String,
    dialogues: usize,
    utterances: usize,
    hours: f64,
    mean_utterance_s: f64,
    male: usize,
    female: usize,
}

fn row(name: &str, s: &SplitStats) -> StatsRow {
    StatsRow {
        split: name.to_string(),
        dialogues: s.dialogues,
        utterances: s.utterances,
        hours: s.hours(),
        mean_utterance_s: s.mean_utterance_seconds(),
        male: s.male,
        female: s.female,
    }
}

pub fn render_stats(stats: &DatasetStats, format: StatsFormat) -> Result<String> {
    let mut rows: Vec<StatsRow> = Split::ALL.iter().map(|&s| row(&s.to_string(), &stats.split(s))).collect();
    if stats.unassigned.dialogues > 0 {
        rows.push(row("unassigned", &stats.unassigned));
    }
    rows.push(row("total", &stats.total));
    Ok(match format {
        StatsFormat::Json => serde_json::to_string_pretty(&rows)? + "\n",
        StatsFormat::Csv => {
            let mut s = String::from("split,dialogues,utterances,hours,mean_utterance_s,male,female\n");
            for r in &rows {
                s += &format!(
                    "{},{},{},{:.2},{:.2},{},{}\n",
                    r.split, r.dialogues, r.utterances, r.hours, r.mean_utterance_s, r.male, r.female
                );
            }
            s
        }
        StatsFormat::Text => {
            let mut s = format!(
                "{:<10} {:>9} {:>10} {:>7} {:>10} {:>7} {:>7}\n",
                "split", "dialogues", "utterances", "hours", "mean utt s", "male", "female"
            );
            for r in &rows {
                s += &format!(
                    "{:<10} {:>9} {:>10} {:>7.1} {:>10.2} {:>7} {:>7}\n",
                    r.split, r.dialogues, r.utterances, r.hours, r.mean_utterance_s, r.male, r.female
                );
            }
            let t = &stats.total;
            s += &format!("\n{} dialogues / {} utterances / {:.1} h\n", t.dialogues, t.utterances, t.hours());
            s
        }
    })
}

pub fn stats(cfg: &PipelineConfig, manifest: Option<PathBuf>, splits: Option<PathBuf>, format: StatsFormat) -> Result<()> {
    let manifest = manifest.unwrap_or_else(|| manifest_path(cfg));
    let dialogues: Vec<Dialogue> = read_manifest_file(&manifest)?;
    let splits = splits.unwrap_or_else(|| splits_path(cfg));
    let spec: SplitSpec = if splits.is_file() {
        read_json(&splits)?
    } else {
        warn!(path = %splits.display(), "no split file; every dialogue counts as unassigned");
        SplitSpec { seed: cfg.seed, assignments: BTreeMap::new() }
    };
    print!("{}", render_stats(&compute_stats(&dialogues, &spec), format)?);
    Ok(())
}
