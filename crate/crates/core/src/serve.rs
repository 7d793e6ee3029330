//! Live conversation sessions: the turn pipeline behind the HTTP service.
//!
//! The user is always Speaker 0 and the agent Speaker 1. Each session runs
//! at most one turn at a time; a second concurrent post gets
//! [`ServeError::Conflict`]. Synthesized speech is cached as WAV files and
//! referenced by URL.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::audio::{Waveform, CORPUS_SAMPLE_RATE};
use crate::dialogue::{
    synthesize_speech, GenerationConfig, ModelOutput, MultisensoryModel, TtsAdapter, UtteranceInput,
};
use crate::fusion::{
    audio_features, uniform_indices, video_features, AudioEncoder, FrameSequence, GridLumaEncoder, LogMelEncoder,
    VisualEncoder, AUDIO_PAD, VIDEO_PAD,
};
use crate::segment::{AsrAdapter, AudioClip, LumaFrame, MediaSource};
use crate::speakers::SpeakerId;

pub const USER: SpeakerId = SpeakerId(0);
pub const AGENT: SpeakerId = SpeakerId(1);
pub const DEFAULT_MAX_HISTORY: usize = 10;
pub const DEFAULT_SESSION_TTL: Duration = Duration::from_secs(3600);
pub const MAX_FRAMES: usize = VIDEO_PAD;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("unknown session `{0}`")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("session `{0}` already has a turn in flight")]
    Conflict(String),
    #[error("backend failure (diagnostic id {diagnostic_id})")]
    Backend { diagnostic_id: String, message: String },
}

impl ServeError {
    fn backend(context: &str, err: impl std::fmt::Display) -> Self {
        let diagnostic_id = uuid::Uuid::new_v4().simple().to_string();
        tracing::error!(%diagnostic_id, context, error = %err, "turn failed");
        ServeError::Backend { diagnostic_id, message: format!("{context}: {err}") }
    }
}

/// Produces the agent's reply from the multimodal history, current turn last.
pub trait DialogueAgent: Send + Sync {
    fn respond(&self, history: &[UtteranceInput], config: &GenerationConfig) -> crate::Result<ModelOutput>;
}

impl DialogueAgent for MultisensoryModel {
    fn respond(&self, history: &[UtteranceInput], config: &GenerationConfig) -> crate::Result<ModelOutput> {
        self.generate(history, config)
    }
}

/// Deterministic stand-in agent that echoes the user with a fixed description.
#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    pub description: String,
}

impl Default for ScriptedAgent {
    fn default() -> Self {
        Self { description: "A female speaker with a normal pitch and a moderate pace.".into() }
    }
}

impl DialogueAgent for ScriptedAgent {
    fn respond(&self, history: &[UtteranceInput], _config: &GenerationConfig) -> crate::Result<ModelOutput> {
        let last = history.last().ok_or_else(|| crate::Error::invalid("history is empty"))?;
        Ok(ModelOutput {
            response_text: format!("You said: {} (turn {})", last.text, history.len()),
            description_text: self.description.clone(),
            parse_ok: true,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub max_history: usize,
    pub session_ttl: Duration,
    /// Directory holding synthesized WAVs and transient uploads.
    pub audio_dir: PathBuf,
    pub generation: GenerationConfig,
}

impl ServeConfig {
    pub fn new(audio_dir: impl AsRef<Path>) -> Self {
        Self {
            max_history: DEFAULT_MAX_HISTORY,
            session_ttl: DEFAULT_SESSION_TTL,
            audio_dir: audio_dir.as_ref().to_path_buf(),
            generation: GenerationConfig::default(),
        }
    }
}

/// One stored turn as exposed by the history endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: String,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parse_ok: Option<bool>,
    /// Seconds since the Unix epoch.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnReply {
    pub response_text: String,
    pub description_text: String,
    pub audio_url: String,
    pub parse_ok: bool,
}

/// A user turn as received. At least one of text or audio is required.
#[derive(Debug, Clone, Default)]
pub struct TurnRequest {
    pub text: Option<String>,
    /// WAV bytes, 16 kHz mono.
    pub audio: Option<Vec<u8>>,
    /// Encoded images, at most [`MAX_FRAMES`].
    pub frames: Vec<Vec<u8>>,
    pub idempotency_key: Option<String>,
}

struct StoredTurn {
    public: Turn,
    input: UtteranceInput,
}

#[derive(Default)]
struct SessionState {
    turns: Vec<StoredTurn>,
    replies: HashMap<String, TurnReply>,
}

struct Session {
    busy: AtomicBool,
    last_active: Mutex<Instant>,
    state: Mutex<SessionState>,
}

struct BusyGuard<'a>(&'a AtomicBool);

impl Drop for BusyGuard<'_> {
    fn drop(&mut self) {
        self.0.store(false, Ordering::Release);
    }
}

pub struct ConversationService {
    config: ServeConfig,
    agent: Box<dyn DialogueAgent>,
    tts: Box<dyn TtsAdapter>,
    asr: Option<Box<dyn AsrAdapter>>,
    visual: Box<dyn VisualEncoder>,
    audio_encoder: Box<dyn AudioEncoder>,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
}

fn now_secs() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn speaker_label(s: SpeakerId) -> String {
    s.to_string()
}

impl ConversationService {
    pub fn new(
        config: ServeConfig,
        agent: Box<dyn DialogueAgent>,
        tts: Box<dyn TtsAdapter>,
        asr: Option<Box<dyn AsrAdapter>>,
    ) -> crate::Result<Self> {
        std::fs::create_dir_all(&config.audio_dir).map_err(|e| crate::Error::io(&config.audio_dir, e))?;
        Ok(Self {
            config,
            agent,
            tts,
            asr,
            visual: Box::new(GridLumaEncoder::default()),
            audio_encoder: Box::new(LogMelEncoder::default()),
            sessions: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ServeConfig {
        &self.config
    }

    /// Returns a fresh 32-character hex session ID.
    pub fn create_session(&self) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session {
            busy: AtomicBool::new(false),
            last_active: Mutex::new(Instant::now()),
            state: Mutex::new(SessionState::default()),
        };
        self.sessions.lock().expect("session map poisoned").insert(id.clone(), Arc::new(session));
        tracing::info!(session = %id, "session created");
        id
    }

    /// Drops sessions idle for longer than the TTL as of `now`. Returns how many went.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let ttl = self.config.session_ttl;
        let mut map = self.sessions.lock().expect("session map poisoned");
        let before = map.len();
        map.retain(|_, s| {
            let last = *s.last_active.lock().expect("session clock poisoned");
            now.saturating_duration_since(last) <= ttl
        });
        before - map.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session map poisoned").len()
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ServeError> {
        self.evict_idle(Instant::now());
        let s = self
            .sessions
            .lock()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ServeError::NotFound(id.to_string()))?;
        *s.last_active.lock().expect("session clock poisoned") = Instant::now();
        Ok(s)
    }

    pub fn history(&self, id: &str) -> Result<Vec<Turn>, ServeError> {
        let s = self.session(id)?;
        let state = s.state.lock().expect("session state poisoned");
        Ok(state.turns.iter().map(|t| t.public.clone()).collect())
    }

    /// Path of a cached WAV named by the last segment of an `audio_url`.
    pub fn audio_file(&self, name: &str) -> Option<PathBuf> {
        let stem = name.strip_suffix(".wav")?;
        uuid::Uuid::try_parse(stem).ok()?;
        let p = self.config.audio_dir.join(name);
        p.is_file().then_some(p)
    }

    pub fn post_utterance(&self, id: &str, req: TurnRequest) -> Result<TurnReply, ServeError> {
        let session = self.session(id)?;
        if let Some(key) = &req.idempotency_key {
            if let Some(done) = session.state.lock().expect("session state poisoned").replies.get(key) {
                return Ok(done.clone());
            }
        }
        if session.busy.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_err() {
            return Err(ServeError::Conflict(id.to_string()));
        }
        let _guard = BusyGuard(&session.busy);
        // a retry may have completed between the first check and acquiring the turn
        if let Some(key) = &req.idempotency_key {
            if let Some(done) = session.state.lock().expect("session state poisoned").replies.get(key) {
                return Ok(done.clone());
            }
        }

        let user = self.user_input(&req)?;
        let mut history: Vec<UtteranceInput> = {
            let state = session.state.lock().expect("session state poisoned");
            state.turns.iter().map(|t| t.input.clone()).collect()
        };
        history.push(user.clone());

        let output = self
            .agent
            .respond(&history, &self.config.generation)
            .map_err(|e| ServeError::backend("generation", e))?;
        let speech = synthesize_speech(&output.response_text, &output.description_text, self.tts.as_ref())
            .map_err(|e| ServeError::backend("speech synthesis", e))?;
        let audio_name = format!("{}.wav", uuid::Uuid::new_v4().simple());
        let audio_path = self.config.audio_dir.join(&audio_name);
        speech.write_wav(&audio_path).map_err(|e| ServeError::backend("audio cache", e))?;
        let audio_url = format!("/v1/audio/{audio_name}");
        let agent_features = audio_features(self.audio_encoder.as_ref(), &speech, AUDIO_PAD).ok();

        let reply = TurnReply {
            response_text: output.response_text.clone(),
            description_text: output.description_text.clone(),
            audio_url: audio_url.clone(),
            parse_ok: output.parse_ok,
        };
        let ts = now_secs();
        let mut state = session.state.lock().expect("session state poisoned");
        state.turns.push(StoredTurn {
            public: Turn {
                speaker: speaker_label(USER),
                text: user.text.clone(),
                description_text: None,
                audio_url: None,
                parse_ok: None,
                timestamp: ts,
            },
            input: user,
        });
        state.turns.push(StoredTurn {
            public: Turn {
                speaker: speaker_label(AGENT),
                text: output.response_text.clone(),
                description_text: Some(output.description_text.clone()),
                audio_url: Some(audio_url),
                parse_ok: Some(output.parse_ok),
                timestamp: ts,
            },
            input: UtteranceInput { speaker: AGENT, text: output.response_text, video: None, audio: agent_features },
        });
        let excess = state.turns.len().saturating_sub(self.config.max_history);
        state.turns.drain(..excess);
        if let Some(key) = req.idempotency_key {
            state.replies.insert(key, reply.clone());
        }
        Ok(reply)
    }

    fn user_input(&self, req: &TurnRequest) -> Result<UtteranceInput, ServeError> {
        let text = req.text.as_deref().map(str::trim).filter(|t| !t.is_empty()).map(String::from);
        if text.is_none() && req.audio.is_none() {
            return Err(ServeError::BadRequest("a turn needs text or audio".into()));
        }
        let wave = match &req.audio {
            Some(bytes) => {
                let w = Waveform::from_wav_bytes(bytes).map_err(|e| ServeError::BadRequest(format!("audio: {e}")))?;
                if w.sample_rate != CORPUS_SAMPLE_RATE {
                    return Err(ServeError::BadRequest(format!(
                        "audio must be {CORPUS_SAMPLE_RATE} Hz mono WAV, got {} Hz",
                        w.sample_rate
                    )));
                }
                if w.samples.is_empty() {
                    return Err(ServeError::BadRequest("audio is empty".into()));
                }
                Some(w)
            }
            None => None,
        };
        if req.frames.len() > MAX_FRAMES {
            return Err(ServeError::BadRequest(format!("at most {MAX_FRAMES} frames, got {}", req.frames.len())));
        }
        let video = if req.frames.is_empty() {
            None
        } else {
            let frames = req
                .frames
                .iter()
                .enumerate()
                .map(|(i, bytes)| decode_frame(bytes).map_err(|e| ServeError::BadRequest(format!("frame {i}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let keep = uniform_indices(frames.len(), VIDEO_PAD);
            let frames: Vec<LumaFrame> = keep.into_iter().map(|i| frames[i].clone()).collect();
            let seq = FrameSequence { valid_count: frames.len(), pad_size: VIDEO_PAD, frames };
            Some(video_features(self.visual.as_ref(), &seq).map_err(|e| ServeError::BadRequest(format!("frames: {e}")))?)
        };
        let audio = match &wave {
            Some(w) => Some(
                audio_features(self.audio_encoder.as_ref(), w, AUDIO_PAD)
                    .map_err(|e| ServeError::BadRequest(format!("audio: {e}")))?,
            ),
            None => None,
        };
        let text = match (text, &wave) {
            (Some(t), _) => t,
            (None, Some(w)) => self.transcribe(w)?,
            (None, None) => unreachable!("checked above"),
        };
        Ok(UtteranceInput { speaker: USER, text, video, audio })
    }

    fn transcribe(&self, wave: &Waveform) -> Result<String, ServeError> {
        let asr = self
            .asr
            .as_ref()
            .ok_or_else(|| ServeError::BadRequest("audio-only turns need a speech recognizer; send text".into()))?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let path = self.config.audio_dir.join(format!("upload-{id}.wav"));
        wave.write_wav(&path).map_err(|e| ServeError::backend("upload cache", e))?;
        let media = MediaSource {
            id: format!("upload-{id}"),
            video_uri: PathBuf::new(),
            audio_uri: path.clone(),
            duration: wave.duration(),
            sample_rate: wave.sample_rate,
            video_fps: 0.0,
        };
        let clip = AudioClip { source_id: media.id.clone(), start: 0.0, end: media.duration };
        let result = asr.transcribe(&media, &clip);
        let _ = std::fs::remove_file(&path);
        let segments = result.map_err(|e| ServeError::backend("speech recognition", e))?;
        let text = segments.iter().map(|s| s.text.trim()).filter(|t| !t.is_empty()).collect::<Vec<_>>().join(" ");
        if text.is_empty() {
            return Err(ServeError::BadRequest("no speech recognized in audio".into()));
        }
        Ok(text)
    }
}

fn decode_frame(bytes: &[u8]) -> crate::Result<LumaFrame> {
    let img = image::load_from_memory(bytes)?.to_luma8();
    let (width, height) = img.dimensions();
    Ok(LumaFrame { width, height, data: img.into_raw() })
}
