//! Packets for pairwise human preference judgments. No scoring happens here.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::speakers::SpeakerId;

pub const DEFAULT_CRITERIA: [&str; 3] = ["Emotional", "Suitability & Engagement", "Conversation Naturalism"];
pub const RESPONSE_OPTIONS: [&str; 3] = ["Speech 1", "Speech 2", "Tie"];
pub const MAX_HISTORY: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub speaker: SpeakerId,
    pub text: String,
    pub audio: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEvalSample {
    pub sample_id: String,
    pub history: Vec<HistoryEntry>,
    pub response_text: String,
    pub baseline_audio: PathBuf,
    pub system_audio: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PacketIndex {
    criteria: Vec<String>,
    options: Vec<String>,
    max_history: usize,
}

fn copy(from: &Path, to: &Path) -> Result<()> {
    if !from.is_file() {
        return Err(Error::io(from, std::io::Error::new(std::io::ErrorKind::NotFound, "audio file is missing")));
    }
    std::fs::copy(from, to).map_err(|e| Error::io(to, e))?;
    Ok(())
}

/// Writes `packet.csv` (one row per sample, one blank answer column per
/// criterion), `criteria.json`, `answer_key.csv` (which speech is the
/// system) and a folder per sample with the last five history turns and
/// the two candidate recordings in seeded random order.
pub fn export_human_eval_packet(samples: &[HumanEvalSample], criteria: &[&str], out_dir: &Path, seed: u64) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples to export"));
    }
    if criteria.is_empty() {
        return Err(Error::invalid("at least one criterion is required"));
    }
    for s in samples {
        for p in [&s.baseline_audio, &s.system_audio].into_iter().chain(s.history.iter().filter_map(|h| h.audio.as_ref())) {
            if !p.is_file() {
                return Err(Error::invalid(format!("sample `{}`: audio {} is missing", s.sample_id, p.display())));
            }
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sheet = csv::Writer::from_path(out_dir.join("packet.csv"))?;
    let mut header = vec!["sample_id", "history", "speech_1", "speech_2"];
    header.extend(criteria);
    sheet.write_record(&header)?;
    let mut key = csv::Writer::from_path(out_dir.join("answer_key.csv"))?;
    key.write_record(["sample_id", "system_is"])?;
    for s in samples {
        let dir = out_dir.join(&s.sample_id);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let recent = &s.history[s.history.len().saturating_sub(MAX_HISTORY)..];
        let mut transcript = String::new();
        for (i, h) in recent.iter().enumerate() {
            transcript.push_str(&format!("{}: {}\n", h.speaker, h.text));
            if let Some(a) = &h.audio {
                copy(a, &dir.join(format!("history_{i:02}.wav")))?;
            }
        }
        transcript.push_str(&format!("Response: {}\n", s.response_text));
        std::fs::write(dir.join("history.txt"), transcript).map_err(|e| Error::io(&dir, e))?;
        let system_first = rng.random_bool(0.5);
        let (first, second) = if system_first { (&s.system_audio, &s.baseline_audio) } else { (&s.baseline_audio, &s.system_audio) };
        copy(first, &dir.join("speech_1.wav"))?;
        copy(second, &dir.join("speech_2.wav"))?;
        let mut row = vec![
            s.sample_id.clone(),
            format!("{}/history.txt", s.sample_id),
            format!("{}/speech_1.wav", s.sample_id),
            format!("{}/speech_2.wav", s.sample_id),
        ];
        row.extend(criteria.iter().map(|_| String::new()));
        sheet.write_record(&row)?;
        key.write_record([s.sample_id.as_str(), if system_first { RESPONSE_OPTIONS[0] } else { RESPONSE_OPTIONS[1] }])?;
    }
    sheet.flush().map_err(|e| Error::io(out_dir, e))?;
    key.flush().map_err(|e| Error::io(out_dir, e))?;
    let index = PacketIndex {
        criteria: criteria.iter().map(|c| c.to_string()).collect(),
        options: RESPONSE_OPTIONS.iter().map(|o| o.to_string()).collect(),
        max_history: MAX_HISTORY,
    };
    let path = out_dir.join("criteria.json");
    std::fs::write(&path, serde_json::to_string_pretty(&index)?).map_err(|e| Error::io(&path, e))?;
    Ok(())
}
