//! Line-delimited JSON manifest, one utterance per line.
//!
//! | field          | type              | notes                              |
//! |----------------|-------------------|------------------------------------|
//! | msense_schema  | integer           | always [`SCHEMA_VERSION`]          |
//! | source_id      | string            | originating recording              |
//! | dialogue_id    | string            | groups lines into dialogues        |
//! | utterance_id   | string            | unique within the manifest         |
//! | speaker_id     | integer           | dense from 0 within a dialogue     |
//! | start, end     | seconds           | within the source recording        |
//! | text           | string            | transcript                         |
//! | audio_ref      | path              | 16 kHz mono WAV                    |
//! | frame_refs     | list of paths     | JPEG frames, may be empty          |
//! | annotation     | object, optional  | binned speech annotation           |
//! | description    | string, optional  | voice description                  |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dialogue, Utterance};
use crate::error::{Error, Result};
use crate::paralinguistics::SpeechAnnotation;
use crate::speakers::SpeakerId;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    msense_schema: u32,
    source_id: String,
    dialogue_id: String,
    utterance_id: String,
    speaker_id: SpeakerId,
    start: f64,
    end: f64,
    text: String,
    audio_ref: PathBuf,
    #[serde(default)]
    frame_refs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotation: Option<SpeechAnnotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
}

pub fn write_manifest(mut w: impl Write, dialogues: &[Dialogue]) -> Result<()> {
    for d in dialogues {
        d.validate().map_err(Error::InvalidInput)?;
        for u in &d.utterances {
            let rec = Record {
                msense_schema: SCHEMA_VERSION,
                source_id: d.source_id.clone(),
                dialogue_id: u.dialogue_id.clone(),
                utterance_id: u.utterance_id.clone(),
                speaker_id: u.speaker_id,
                start: u.start,
                end: u.end,
                text: u.text.clone(),
                audio_ref: u.audio_ref.clone(),
                frame_refs: u.frame_refs.clone(),
                annotation: u.annotation,
                description: u.description.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(|e| Error::io("<manifest>", e))?;
        }
    }
    Ok(())
}

/// Reads dialogues in order of first appearance; utterances keep file order.
pub fn read_manifest(r: impl BufRead) -> Result<Vec<Dialogue>> {
    let mut dialogues: Vec<Dialogue> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut first_line = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io("<manifest>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| Error::Manifest {
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.msense_schema != SCHEMA_VERSION {
            return Err(Error::Manifest {
                line: line_no,
                message: format!("field `msense_schema`: unsupported version {}", rec.msense_schema),
            });
        }
        let slot = *index.entry(rec.dialogue_id.clone()).or_insert_with(|| {
            dialogues.push(Dialogue {
                dialogue_id: rec.dialogue_id.clone(),
                source_id: rec.source_id.clone(),
                utterances: Vec::new(),
            });
            first_line.push(line_no);
            dialogues.len() - 1
        });
        if dialogues[slot].source_id != rec.source_id {
            return Err(Error::Manifest {
                line: line_no,
                message: format!("field `source_id`: dialogue `{}` spans two sources", rec.dialogue_id),
            });
        }
        dialogues[slot].utterances.push(Utterance {
            utterance_id: rec.utterance_id,
            dialogue_id: rec.dialogue_id,
            speaker_id: rec.speaker_id,
            start: rec.start,
            end: rec.end,
            text: rec.text,
            audio_ref: rec.audio_ref,
            frame_refs: rec.frame_refs,
            annotation: rec.annotation,
            description: rec.description,
        });
    }
    for (d, line) in dialogues.iter().zip(first_line) {
        d.validate().map_err(|message| Error::Manifest { line, message })?;
    }
    Ok(dialogues)
}

/// Writes under an exclusive advisory lock, replacing the file atomically.
pub fn write_manifest_file(path: impl AsRef<Path>, dialogues: &[Dialogue]) -> Result<()> {
    let path = path.as_ref();
    let lock_path = path.with_extension("lock");
    let lock = File::create(&lock_path).map_err(|e| Error::io(&lock_path, e))?;
    lock.lock().map_err(|e| Error::io(&lock_path, e))?;
    let tmp = path.with_extension("jsonl.tmp");
    {
        let f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(f);
        write_manifest(&mut w, dialogues)?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    lock.unlock().map_err(|e| Error::io(&lock_path, e))?;
    Ok(())
}

pub fn read_manifest_file(path: impl AsRef<Path>) -> Result<Vec<Dialogue>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(BufReader::new(f))
}
