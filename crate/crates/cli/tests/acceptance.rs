//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use msense_core::audio::Waveform;
use msense_core::dataset::fixture::reference_corpus;
use msense_core::dataset::{compute_stats, Split};
use msense_core::dialogue::synthetic::{synthetic_examples, tiny_config};
use msense_core::dialogue::{
    assemble_prompt, build_prompt, compute_loss, keep_tail, train, ByteTokenizer, GenerationConfig, InstructionTemplate, LoraConfig,
    ModelConfig, MultisensoryModel, PromptUtterance, TinyLm, TinyLmConfig, ToneTts, TrainConfig,
};
use msense_core::eval::{
    ablation_harness, corpus_bleu, emotion_consistency, text_metrics, EmotionAdapter, EmotionLabel, ResponseText,
    CANONICAL_SETS,
};
use msense_core::fusion::{FeatureSequence, FusionModel, Modality, ModalitySet, AUDIO_PAD, VIDEO_PAD};
use msense_core::nn::ParamStore;
use msense_core::paralinguistics::{
    bin_annotations, estimate_pitch, estimate_reverberation, BinThresholds, Gender, RawAnnotation,
};
use msense_core::segment::synthetic::{write_synthetic_source, UTTERANCES};
use msense_core::segment::{
    segment_utterances, AsrAdapter, AsrSegment, AudioClip, ContentSceneDetector, MediaSource, DEFAULT_MAX_CLIP_S,
};
use msense_core::serve::{ConversationService, ScriptedAgent, ServeConfig};
use msense_core::speakers::synthetic::{clustered_embeddings, SyntheticSpec};
use msense_core::speakers::{assign_speakers, evaluate_assignment, ClusterParams, SpeakerId};
use msense_core::synth::{convolve, exponential_ir, speech_shaped_noise, tone};
use msense_core::{DType, Device, Tensor};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tower::ServiceExt;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, ok: impl Into<String>, fail: impl Into<String>) -> Outcome {
    if cond {
        Ok(ok.into())
    } else {
        Err(fail.into())
    }
}

fn within(limit: Duration, started: Instant) -> Outcome {
    let took = started.elapsed();
    check(took < limit, format!("{:.2} s", took.as_secs_f64()), format!("took {:.2} s, limit {} s", took.as_secs_f64(), limit.as_secs()))
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    (a - b).unwrap().abs().unwrap().flatten_all().unwrap().max(0).unwrap().to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

struct RecordingAsr {
    inner: Box<dyn AsrAdapter>,
    longest: Mutex<f64>,
}

impl AsrAdapter for RecordingAsr {
    fn name(&self) -> &str {
        "recording"
    }
    fn transcribe(&self, media: &MediaSource, clip: &AudioClip) -> msense_core::Result<Vec<AsrSegment>> {
        let mut longest = self.longest.lock().unwrap();
        *longest = longest.max(clip.duration());
        self.inner.transcribe(media, clip)
    }
}

fn segmentation() -> Outcome {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = write_synthetic_source(dir.path(), "syn").map_err(|e| e.to_string())?;
    let asr = RecordingAsr { inner: Box::new(src.asr), longest: Mutex::new(0.0) };
    let drafts = segment_utterances(&src.media, &asr, &src.diarization, &ContentSceneDetector::default(), DEFAULT_MAX_CLIP_S)
        .map_err(|e| e.to_string())?;
    if drafts.len() != UTTERANCES.len() {
        return Err(format!("{} drafts, expected {}", drafts.len(), UTTERANCES.len()));
    }
    let worst = drafts
        .iter()
        .zip(&UTTERANCES)
        .map(|(d, u)| (d.start - u.0).abs().max((d.end - u.1).abs()))
        .fold(0.0, f64::max);
    let longest = *asr.longest.lock().unwrap();
    check(worst <= 0.1, "", format!("boundary error {worst:.3} s > 0.1 s"))?;
    check(longest <= 25.0, "", format!("ASR clip of {longest:.2} s > 25 s"))?;
    let t = within(Duration::from_secs(10), started)?;
    Ok(format!("max boundary error {worst:.3} s, longest ASR clip {longest:.2} s, {t}"))
}

fn speaker_clustering() -> Outcome {
    let started = Instant::now();
    let spec = SyntheticSpec { speakers: 3, per_speaker: 20, dim: 192, jitter: 0.05 };
    let mut worst = 1.0f64;
    for seed in 0..10 {
        let (embeddings, truth) = clustered_embeddings(&spec, seed);
        let predicted = assign_speakers(&embeddings, &ClusterParams::default()).map_err(|e| e.to_string())?;
        let gold: Vec<SpeakerId> = truth.iter().map(|&s| SpeakerId(s as u32)).collect();
        let acc = evaluate_assignment(&predicted, &gold).map_err(|e| e.to_string())?;
        worst = worst.min(acc);
    }
    check(worst >= 0.95, "", format!("worst instance accuracy {worst:.4} < 0.95"))?;
    let t = within(Duration::from_secs(5), started)?;
    Ok(format!("worst accuracy {worst:.4} over 10 instances, {t}"))
}

fn paralinguistics() -> Outcome {
    let sr = 16_000;
    let mut worst_pitch = 0.0f64;
    for f in (80..=400).step_by(5) {
        let (mean, _) = estimate_pitch(&tone(f as f64, 1.0, sr), sr).map_err(|e| e.to_string())?;
        worst_pitch = worst_pitch.max((mean - f as f64).abs());
    }
    check(worst_pitch <= 2.0, "", format!("pitch error {worst_pitch:.3} Hz > 2 Hz"))?;

    let mut reverb_ok = 0;
    for seed in 0..20u64 {
        let dry = speech_shaped_noise(2.0, sr, seed);
        let rt60 = 0.3 + 0.035 * seed as f64;
        let wet = convolve(&dry, &exponential_ir(rt60, sr, seed + 100));
        let d = estimate_reverberation(&dry, sr).map_err(|e| e.to_string())?;
        let w = estimate_reverberation(&wet, sr).map_err(|e| e.to_string())?;
        if w < d {
            reverb_ok += 1;
        }
    }
    check(reverb_ok == 20, "", format!("only {reverb_ok}/20 reverberant copies scored less clear"))?;

    let thresholds = BinThresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let specials = [0.0, f64::MIN_POSITIVE, 1e-12, 1e12, f64::MAX, f64::INFINITY, f64::NAN];
    let pick = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        if rng.random_bool(0.1) {
            specials[rng.random_range(0..specials.len())]
        } else {
            rng.random_range(lo..hi)
        }
    };
    let mut total = 0;
    for _ in 0..1000 {
        let raw = RawAnnotation {
            f0_mean: pick(&mut rng, 0.0, 600.0),
            f0_std: pick(&mut rng, 0.0, 120.0),
            pace: pick(&mut rng, 0.0, 8.0),
            reverberation: pick(&mut rng, -40.0, 80.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            gender: if rng.random_bool(0.5) { Gender::Male } else { Gender::Female },
            gender_confidence: rng.random_range(0.0..=1.0),
        };
        let binned = std::panic::catch_unwind(|| bin_annotations(&raw, &thresholds));
        if binned.is_ok_and(|a| a.gender == raw.gender) {
            total += 1;
        }
    }
    check(total == 1000, "", format!("binning failed on {} of 1000 inputs", 1000 - total))?;
    Ok(format!("pitch error <= {worst_pitch:.3} Hz on 80..400 Hz, reverb 20/20 monotone, bins total on 1000/1000"))
}

fn fusion() -> Outcome {
    let started = Instant::now();
    let cfg = tiny_config().fusion;
    let model = FusionModel::new(cfg);
    let mut store = ParamStore::new(DType::F32);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    model.init(&mut store, &mut rng).map_err(|e| e.to_string())?;
    for valid in 1..=VIDEO_PAD {
        let f = FeatureSequence::from_rows(random_rows(&mut rng, valid, cfg.video_feature_dim), cfg.video_feature_dim, VIDEO_PAD)
            .map_err(|e| e.to_string())?;
        let out = model.encode(&store, Modality::Video, &f).map_err(|e| e.to_string())?;
        check(out.dims() == [cfg.n_query, cfg.lm_dim], "", format!("valid_count {valid}: shape {:?}", out.dims()))?;
    }

    let mut worst_pad = 0.0f64;
    for valid in [1, 7, 20, 40] {
        let rows = random_rows(&mut rng, valid, cfg.audio_feature_dim);
        let a = FeatureSequence::from_rows(rows.clone(), cfg.audio_feature_dim, AUDIO_PAD).map_err(|e| e.to_string())?;
        let b = FeatureSequence::from_rows(rows, cfg.audio_feature_dim, valid + 3).map_err(|e| e.to_string())?;
        let ea = model.encode(&store, Modality::Audio, &a).map_err(|e| e.to_string())?;
        let eb = model.encode(&store, Modality::Audio, &b).map_err(|e| e.to_string())?;
        worst_pad = worst_pad.max(max_abs_diff(&ea, &eb));
    }
    check(worst_pad <= 1e-5, "", format!("padding changed output by {worst_pad:e}"))?;

    let mut store = ParamStore::new(DType::F64);
    model.init(&mut store, &mut ChaCha8Rng::seed_from_u64(2)).map_err(|e| e.to_string())?;
    let feats = FeatureSequence::from_rows(random_rows(&mut rng, 5, cfg.video_feature_dim), cfg.video_feature_dim, 8)
        .map_err(|e| e.to_string())?;
    let probe_vals: Vec<f64> = (0..cfg.n_query * cfg.lm_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let probe = Tensor::from_vec(probe_vals, (cfg.n_query, cfg.lm_dim), &Device::Cpu).unwrap();
    let loss = |store: &ParamStore| -> f64 {
        let out = model.encode(store, Modality::Video, &feats).unwrap();
        (out * &probe).unwrap().sum_all().unwrap().to_scalar::<f64>().unwrap()
    };
    let out = model.encode(&store, Modality::Video, &feats).map_err(|e| e.to_string())?;
    let grads = (out * &probe).unwrap().sum_all().unwrap().backward().map_err(|e| e.to_string())?;
    let names = [
        "video_qformer.query",
        "video_qformer.blocks.0.self.q.weight",
        "video_qformer.blocks.0.cross.k.weight",
        "video_qformer.blocks.0.cross.v.weight",
        "video_qformer.blocks.0.ffn.up.weight",
        "video_proj.weight",
        "video_proj.bias",
    ];
    let mut worst_rel = 0.0f64;
    let mut checked = 0;
    for name in names {
        let var = store.var(name).ok_or(format!("no parameter {name}"))?.clone();
        let analytic: Vec<f64> = grads.get(&var).ok_or(format!("no gradient for {name}"))?.flatten_all().unwrap().to_vec1().unwrap();
        let base: Vec<f64> = var.as_tensor().flatten_all().unwrap().to_vec1().unwrap();
        let shape = var.as_tensor().shape().clone();
        for idx in [0, base.len() / 3, base.len() / 2, base.len() - 1] {
            let eps = 1e-6;
            let mut plus = base.clone();
            plus[idx] += eps;
            var.set(&Tensor::from_vec(plus, shape.clone(), &Device::Cpu).unwrap()).unwrap();
            let lp = loss(&store);
            let mut minus = base.clone();
            minus[idx] -= eps;
            var.set(&Tensor::from_vec(minus, shape.clone(), &Device::Cpu).unwrap()).unwrap();
            let lm = loss(&store);
            var.set(&Tensor::from_vec(base.clone(), shape.clone(), &Device::Cpu).unwrap()).unwrap();
            let numeric = (lp - lm) / (2.0 * eps);
            let denom = numeric.abs().max(analytic[idx].abs()).max(1e-6);
            worst_rel = worst_rel.max((numeric - analytic[idx]).abs() / denom);
            checked += 1;
        }
    }
    check(worst_rel <= 1e-3, "", format!("gradient relative error {worst_rel:e} > 1e-3"))?;
    let t = within(Duration::from_secs(60), started)?;
    Ok(format!("fixed shape for 1..=50 frames, padding diff {worst_pad:.1e}, worst gradient rel err {worst_rel:.1e} over {checked} coords, {t}"))
}

fn ce_oracle(rows: &[Vec<f64>], targets: &[u32]) -> f64 {
    let mut total = 0.0;
    for (row, &t) in rows.iter().zip(targets) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - m).exp()).sum();
        total += -(row[t as usize] - m - z.ln());
    }
    total / targets.len() as f64
}

fn loss() -> Outcome {
    let dev = Device::Cpu;
    let scalar = |t: Tensor| t.to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap();
    let v = ByteTokenizer::VOCAB;
    let uniform = scalar(compute_loss(&Tensor::zeros((12, v), DType::F64, &dev).unwrap(), &[7; 12]).map_err(|e| e.to_string())?);
    let err = (uniform - (v as f64).ln()).abs();
    check(err <= 1e-6, "", format!("uniform logits gave {uniform}, ln V = {}", (v as f64).ln()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..20);
        let vocab = rng.random_range(2..300);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..vocab).map(|_| rng.random_range(-8.0..8.0)).collect()).collect();
        let targets: Vec<u32> = (0..n).map(|_| rng.random_range(0..vocab as u32)).collect();
        let logits = Tensor::from_vec(rows.concat(), (n, vocab), &dev).unwrap();
        let got = scalar(compute_loss(&logits, &targets).map_err(|e| e.to_string())?);
        worst = worst.max((got - ce_oracle(&rows, &targets)).abs());
    }
    check(worst <= 1e-6, "", format!("oracle mismatch {worst:e}"))?;

    let lm_cfg = TinyLmConfig::default();
    let mut lm = TinyLm::new(lm_cfg);
    let mut store = ParamStore::new(DType::F32);
    lm.init(&mut store, &mut rng).map_err(|e| e.to_string())?;
    let x = lm.embed(&store, &ByteTokenizer.encode("zero adapters change nothing")).map_err(|e| e.to_string())?;
    let base = lm.forward(&store, &x).map_err(|e| e.to_string())?;
    lm.attach_adapters(&mut store, LoraConfig::default(), &mut rng).map_err(|e| e.to_string())?;
    let adapted = lm.forward(&store, &x).map_err(|e| e.to_string())?;
    let diff = max_abs_diff(&base, &adapted);
    check(diff == 0.0, "", format!("zero adapters moved logits by {diff:e}"))?;
    Ok(format!("|loss - ln V| = {err:.1e}, oracle max err {worst:.1e} on 100 cases, zero-adapter diff 0"))
}

fn truncation() -> Outcome {
    const MAX: usize = 800;
    let template = InstructionTemplate::default();
    let dev = Device::Cpu;
    let q = tiny_config().fusion.n_query;
    let tokens = Tensor::zeros((q, 8), DType::F32, &dev).unwrap();
    let mut runner = TestRunner::new(PropConfig { cases: 256, failure_persistence: None, ..PropConfig::default() });
    let strategy = (proptest::collection::vec(("[a-z ]{0,300}", any::<bool>()), 0..25), "[a-z ]{1,1200}", any::<bool>());
    let result = runner.run(&strategy, |(history, current, with_media)| {
        let make = |i: usize, text: &str, media: bool| {
            let mut u = PromptUtterance::text_only(SpeakerId((i % 2) as u32), text);
            if media {
                u.video = Some(tokens.clone());
                u.audio = Some(tokens.clone());
            }
            u
        };
        let hist: Vec<PromptUtterance> = history.iter().enumerate().map(|(i, (t, m))| make(i, t, *m)).collect();
        let cur = make(hist.len(), &current, with_media);
        let (prompt, window) = build_prompt(&hist, &cur, &template, ModalitySet::ALL, MAX).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(prompt.len() <= MAX, "prompt length {}", prompt.len());
        prop_assert_eq!(window.first_kept + window.kept, hist.len());
        if window.first_kept > 0 {
            let wider = assemble_prompt(&hist[window.first_kept - 1..], &cur, &template, ModalitySet::ALL);
            prop_assert!(window.current_truncated || wider.len() > MAX, "dropped an utterance that fit");
        }
        let rendered = prompt.render();
        let tail = keep_tail(&current, window.current_text_tokens);
        prop_assert!(!tail.is_empty() && rendered.contains(tail));
        if !window.current_truncated {
            prop_assert_eq!(tail, current.as_str());
        }
        for (u, _) in &history[window.first_kept..] {
            prop_assert!(rendered.contains(u.as_str()));
        }
        Ok(())
    });
    match result {
        Ok(()) => Ok("256 random histories: length <= 800, suffix retained, latest kept".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn overfit() -> Outcome {
    let started = Instant::now();
    let data = synthetic_examples(10, 6);
    let cfg = TrainConfig { lr: 1e-2, epochs: 25, max_steps: Some(50), seed: 5, ..TrainConfig::default() };
    let run = || -> msense_core::Result<Vec<f64>> {
        let mut model = MultisensoryModel::new(tiny_config(), 7)?;
        Ok(train(&mut model, &data, &[], &cfg, |_| {})?.steps.iter().map(|s| s.loss).collect())
    };
    let a = run().map_err(|e| e.to_string())?;
    let b = run().map_err(|e| e.to_string())?;
    check(a.len() == 50, "", format!("{} steps instead of 50", a.len()))?;
    let ratio = a[49] / a[0];
    check(ratio < 0.1, "", format!("final/initial loss {ratio:.4} >= 0.1 ({} -> {})", a[0], a[49]))?;
    let same = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    check(same, "", "two seeded runs diverged")?;
    let t = within(Duration::from_secs(300), started)?;
    Ok(format!("loss {:.3} -> {:.4} (ratio {ratio:.4}), bitwise reproducible, {t} for two runs", a[0], a[49]))
}

fn oracle_bleu(h: &[u8], r: &[u8], max_n: usize) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        if h.len() < n {
            return 0.0;
        }
        let grams: Vec<&[u8]> = h.windows(n).collect();
        let mut seen: Vec<&[u8]> = Vec::new();
        let mut matched = 0;
        for g in &grams {
            if seen.contains(g) {
                continue;
            }
            seen.push(g);
            let in_h = grams.iter().filter(|x| *x == g).count();
            let in_r = if r.len() >= n { r.windows(n).filter(|x| x == g).count() } else { 0 };
            matched += in_h.min(in_r);
        }
        if matched == 0 {
            return 0.0;
        }
        log_sum += (matched as f64 / grams.len() as f64).ln() / max_n as f64;
    }
    let bp = if h.len() > r.len() { 1.0 } else { (1.0 - r.len() as f64 / h.len() as f64).exp() };
    bp * log_sum.exp()
}

struct ScriptedEmotion;

impl EmotionAdapter for ScriptedEmotion {
    fn name(&self) -> &str {
        "scripted"
    }
    fn classify(&self, wave: &Waveform) -> msense_core::Result<EmotionLabel> {
        Ok(EmotionLabel::ALL[wave.samples[0] as usize])
    }
}

/// Label index sequences with consecutive-agreement fractions counted by hand.
const EMOTION_CASES: [(&[usize], f64); 20] = [
    (&[0, 0], 1.0),
    (&[0, 1], 0.0),
    (&[5, 5, 5], 1.0),
    (&[5, 5, 1], 0.5),
    (&[1, 5, 5], 0.5),
    (&[1, 2, 3, 4], 0.0),
    (&[2, 2, 3, 3], 2.0 / 3.0),
    (&[4, 4, 4, 4, 4], 1.0),
    (&[4, 3, 4, 3, 4], 0.0),
    (&[6, 6, 7, 7, 6], 0.5),
    (&[0, 0, 0, 1, 1, 1], 0.8),
    (&[7, 6, 5, 4, 3, 2, 1], 0.0),
    (&[3, 3, 2, 3, 3, 2, 3], 2.0 / 6.0),
    (&[1, 1, 1, 1, 2, 2, 2, 2], 6.0 / 7.0),
    (&[5, 0, 5, 5, 0, 0, 5, 5, 5], 4.0 / 8.0),
    (&[2, 2, 2, 7, 2, 2, 2, 7, 2, 2], 5.0 / 9.0),
    (&[0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1], 0.9),
    (&[6, 6], 1.0),
    (&[3, 4, 4, 5, 5, 5, 6, 6, 6, 6], 6.0 / 9.0),
    (&[7, 7, 0, 0, 7, 7, 0, 0, 7, 7, 0, 0, 7], 6.0 / 12.0),
];

fn metrics() -> Outcome {
    let mut sentences: Vec<Vec<u8>> = vec![vec![]];
    let mut frontier: Vec<Vec<u8>> = vec![vec![]];
    for _ in 0..6 {
        frontier = frontier
            .iter()
            .flat_map(|s| (0..3u8).map(move |c| s.iter().copied().chain([c]).collect::<Vec<u8>>()))
            .collect();
        sentences.extend(frontier.iter().cloned());
    }
    let words: Vec<Vec<&str>> = sentences.iter().map(|s| s.iter().map(|&c| ["a", "b", "c"][c as usize]).collect()).collect();
    let mut pairs = 0usize;
    let mut worst = 0.0f64;
    for (i, h) in sentences.iter().enumerate() {
        for (j, r) in sentences.iter().enumerate() {
            for n in [1, 2, 3, 4] {
                let got = corpus_bleu(&words[i..=i], &words[j..=j], n);
                worst = worst.max((got - oracle_bleu(h, r, n)).abs());
            }
            pairs += 1;
        }
    }
    check(worst <= 1e-12, "", format!("BLEU differs from oracle by {worst:e}"))?;

    let corpus: Vec<ResponseText> = ["the cat sat on the mat", "hello there", "a b c d e f", "what a lovely day it is"]
        .iter()
        .map(|s| ResponseText::new(*s))
        .collect();
    let report = text_metrics(&corpus, &corpus).map_err(|e| e.to_string())?;
    check(
        (report.bleu1 - 100.0).abs() < 1e-9 && (report.rouge_l - 100.0).abs() < 1e-9,
        "",
        format!("identity corpus scored BLEU@1 {} ROUGE-L {}", report.bleu1, report.rouge_l),
    )?;

    for (k, (labels, want)) in EMOTION_CASES.iter().enumerate() {
        let waves: Vec<Waveform> = labels.iter().map(|&l| Waveform::new(vec![l as f32; 4], 16_000)).collect();
        let got = emotion_consistency(&waves, &ScriptedEmotion).map_err(|e| e.to_string())?;
        check((got - want).abs() < 1e-12, "", format!("emotion case {k}: got {got}, hand count {want}"))?;
    }
    Ok(format!("BLEU matches oracle on {pairs} pairs x n=1..4, identity = 100, emotion 20/20"))
}

fn stats_fixture() -> Outcome {
    let (dialogues, spec) = reference_corpus();
    let stats = compute_stats(&dialogues, &spec);
    let want = [(Split::Train, 913, 25624, "17.5"), (Split::Valid, 110, 3145, "2.1"), (Split::Test, 97, 2640, "1.8")];
    for (split, d, u, h) in want {
        let s = stats.split(split);
        let hours = format!("{:.1}", s.hours());
        check(
            s.dialogues == d && s.utterances == u && hours == h,
            "",
            format!("{split:?}: {} dialogues, {} utterances, {hours} h", s.dialogues, s.utterances),
        )?;
    }
    let (m, f) = (stats.total.male, stats.total.female);
    check((m, f) == (12549, 18860), "", format!("gender totals {m}:{f}"))?;
    Ok("913/110/97 dialogues, 25624/3145/2640 utterances, 17.5/2.1/1.8 h, 12549:18860".into())
}

fn ablation() -> Outcome {
    let examples = synthetic_examples(3, 21);
    let gen = GenerationConfig { max_new_tokens: 6, ..Default::default() };
    let build = |modalities: ModalitySet| MultisensoryModel::new(ModelConfig { modalities, ..tiny_config() }, 0);
    let rows = ablation_harness(build, &examples, &CANONICAL_SETS, &gen).map_err(|e| e.to_string())?;
    let labels: Vec<String> = rows.iter().map(|r| r.modalities.label()).collect();
    check(
        labels == ["Text", "Text + Audio", "Text + Video", "Text + Audio + Video"],
        "",
        format!("rows {labels:?}"),
    )?;
    let n_query = tiny_config().fusion.n_query;
    let full = build(ModalitySet::ALL).map_err(|e| e.to_string())?;
    for set in CANONICAL_SETS {
        let masked = build(set).map_err(|e| e.to_string())?;
        let dropped = usize::from(!set.audio) + usize::from(!set.video);
        for ex in &examples {
            let (a, _) = full.prompt(&ex.history).map_err(|e| e.to_string())?;
            let (b, _) = masked.prompt(&ex.history).map_err(|e| e.to_string())?;
            let want = dropped * n_query * ex.history.len();
            check(a.len() - b.len() == want, "", format!("{}: delta {} != {want}", set.label(), a.len() - b.len()))?;
        }
    }
    Ok(format!("4 canonical rows, prompt deltas = {n_query} x masked modalities x utterances"))
}

fn serve_round_trip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let svc = ConversationService::new(ServeConfig::new(dir.path()), Box::new(ScriptedAgent::default()), Box::new(ToneTts::default()), None)
        .map_err(|e| e.to_string())?;
    let app = msense_cli::http::router(Arc::new(svc));
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let call = |req: Request<Body>| {
            let app = app.clone();
            async move {
                let resp = app.oneshot(req).await.unwrap();
                let status = resp.status();
                let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
                (status, serde_json::from_slice::<serde_json::Value>(&body).unwrap_or_default())
            }
        };
        let (s, v) = call(Request::post("/v1/sessions").body(Body::empty()).unwrap()).await;
        check(s == StatusCode::CREATED, "", format!("create session: {s}"))?;
        let id = v["session_id"].as_str().unwrap_or_default().to_string();
        let post = |text: &str, key: &str| {
            let boundary = "acceptance-boundary";
            let body = format!("--{boundary}\r\nContent-Disposition: form-data; name=\"text\"\r\n\r\n{text}\r\n--{boundary}--\r\n");
            Request::post(format!("/v1/sessions/{id}/utterance"))
                .header("content-type", format!("multipart/form-data; boundary={boundary}"))
                .header(msense_cli::http::IDEMPOTENCY_HEADER, key)
                .body(Body::from(body))
                .unwrap()
        };
        let mut first = serde_json::Value::Null;
        for i in 0..3 {
            let (s, v) = call(post(&format!("message {i}"), &format!("k{i}"))).await;
            check(s == StatusCode::OK, "", format!("turn {i}: {s} {v}"))?;
            if i == 0 {
                first = v;
            }
        }
        let (s, retry) = call(post("message 0", "k0")).await;
        check(s == StatusCode::OK && retry == first, "", "retry did not return the stored reply")?;
        let (_, h) = call(Request::get(format!("/v1/sessions/{id}/history")).body(Body::empty()).unwrap()).await;
        let turns = h.as_array().cloned().unwrap_or_default();
        check(turns.len() == 6, "", format!("history has {} turns", turns.len()))?;
        let alternating = turns.iter().enumerate().all(|(i, t)| t["speaker"] == format!("Speaker {}", i % 2));
        check(alternating, "", "speakers do not alternate")?;
        Ok("3 turns -> 6 alternating turns, retry stored nothing".to_string())
    })
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("segmentation golden", segmentation),
        ("speaker clustering", speaker_clustering),
        ("paralinguistics", paralinguistics),
        ("fusion", fusion),
        ("loss", loss),
        ("truncation", truncation),
        ("overfit smoke", overfit),
        ("metrics", metrics),
        ("stats fixture", stats_fixture),
        ("ablation harness", ablation),
        ("serve round-trip", serve_round_trip),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
