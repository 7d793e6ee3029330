use std::io::{BufRead, Write};

use tracing::warn;

use super::{
    AsrAdapter, AudioClip, DiarizationAdapter, MediaSource, Provenance, SceneAdapter,
    SceneBoundary, UtteranceDraft,
};
use crate::error::{Error, Result};

/// Longest clip the timestamping ASR model handles reliably.
pub const DEFAULT_MAX_CLIP_S: f64 = 25.0;

const TIME_EPS: f64 = 1e-9;

/// Tiles `[0, duration]` with one clip per scene.
pub fn split_by_scenes(media: &MediaSource, boundaries: &[SceneBoundary]) -> Result<Vec<AudioClip>> {
    media.validate()?;
    let mut prev = 0.0;
    for b in boundaries {
        if !(b.time > prev) || !(b.time < media.duration) {
            return Err(Error::Source {
                source_id: media.id.clone(),
                message: format!(
                    "scene boundary {} must be increasing and inside (0, {})",
                    b.time, media.duration
                ),
            });
        }
        prev = b.time;
    }
    let cuts: Vec<f64> = std::iter::once(0.0)
        .chain(boundaries.iter().map(|b| b.time))
        .chain(std::iter::once(media.duration))
        .collect();
    Ok(cuts
        .windows(2)
        .map(|w| AudioClip {
            source_id: media.id.clone(),
            start: w[0],
            end: w[1],
        })
        .collect())
}

/// Runs scene split, diarization of long clips, midpoint bisection of turns
/// that are still too long, and ASR on every resulting clip.
///
/// A failing adapter call skips the affected clip with a warning.
pub fn segment_utterances(
    media: &MediaSource,
    asr: &dyn AsrAdapter,
    diarizer: &dyn DiarizationAdapter,
    scene: &dyn SceneAdapter,
    max_clip_s: f64,
) -> Result<Vec<UtteranceDraft>> {
    media.validate()?;
    if !(max_clip_s > 0.0) {
        return Err(Error::invalid(format!("max_clip_s must be positive, got {max_clip_s}")));
    }
    let boundaries = scene.detect(media)?;
    let scene_clips = split_by_scenes(media, &boundaries)?;
    let whole_source = boundaries.is_empty();

    let mut asr_clips: Vec<(AudioClip, Provenance)> = Vec::new();
    for clip in scene_clips {
        if clip.duration() <= max_clip_s + TIME_EPS {
            let provenance = if whole_source {
                Provenance::AsrDirect
            } else {
                Provenance::SceneThenAsr
            };
            asr_clips.push((clip, provenance));
            continue;
        }
        let turns = match diarizer.diarize(media, &clip) {
            Ok(turns) => turns,
            Err(e) => {
                warn!(source = %media.id, start = clip.start, end = clip.end, error = %e,
                    "diarization failed, skipping clip");
                continue;
            }
        };
        let mut turns: Vec<_> = turns
            .into_iter()
            .filter_map(|t| {
                let start = t.start.max(clip.start);
                let end = t.end.min(clip.end);
                (end > start).then_some((start, end))
            })
            .collect();
        turns.sort_by(|a, b| a.0.total_cmp(&b.0));
        if turns.is_empty() {
            warn!(source = %media.id, start = clip.start, end = clip.end,
                "diarizer returned no turns, skipping clip");
        }
        let mut last_end = f64::NEG_INFINITY;
        for (start, end) in turns {
            let start = start.max(last_end);
            if end <= start {
                continue;
            }
            last_end = end;
            let mut pieces = Vec::new();
            bisect(start, end, max_clip_s, &mut pieces);
            for (a, b) in pieces {
                asr_clips.push((
                    AudioClip {
                        source_id: media.id.clone(),
                        start: a,
                        end: b,
                    },
                    Provenance::DiarizedThenAsr,
                ));
            }
        }
    }

    let mut drafts = Vec::new();
    for (clip, provenance) in &asr_clips {
        assert!(
            clip.duration() <= max_clip_s + TIME_EPS,
            "clip {:?} exceeds the ASR limit of {max_clip_s} s",
            clip
        );
        let segments = match asr.transcribe(media, clip) {
            Ok(s) => s,
            Err(e) => {
                warn!(source = %media.id, start = clip.start, end = clip.end, error = %e,
                    "asr failed, skipping clip");
                continue;
            }
        };
        for seg in segments {
            let text = seg.text.trim();
            let start = seg.start.max(clip.start);
            let end = seg.end.min(clip.end);
            if text.is_empty() || end <= start {
                continue;
            }
            drafts.push(UtteranceDraft {
                source_id: media.id.clone(),
                start,
                end,
                text: text.to_string(),
                provenance: *provenance,
            });
        }
    }

    drafts.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
    let mut out: Vec<UtteranceDraft> = Vec::with_capacity(drafts.len());
    for mut d in drafts {
        if let Some(prev) = out.last() {
            if d.start < prev.end {
                d.start = prev.end;
            }
        }
        if d.end > d.start {
            out.push(d);
        }
    }
    Ok(out)
}

fn bisect(start: f64, end: f64, max_len: f64, out: &mut Vec<(f64, f64)>) {
    if end - start <= max_len + TIME_EPS {
        out.push((start, end));
    } else {
        let mid = 0.5 * (start + end);
        bisect(start, mid, max_len, out);
        bisect(mid, end, max_len, out);
    }
}

/// Line-delimited JSON, one draft per line.
pub fn write_drafts(mut w: impl Write, drafts: &[UtteranceDraft]) -> Result<()> {
    for d in drafts {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n").map_err(|e| Error::io("<drafts>", e))?;
    }
    Ok(())
}

pub fn read_drafts(r: impl BufRead) -> Result<Vec<UtteranceDraft>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<drafts>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let draft = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(draft);
    }
    Ok(out)
}
