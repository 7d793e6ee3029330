use std::path::{Path, PathBuf};

use super::model::{ModelExample, UtteranceInput};
use crate::audio::Waveform;
use crate::dataset::{TrainingExample, Utterance};
use crate::error::Result;
use crate::fusion::{
    audio_features, load_frames, video_features, AudioEncoder, GridLumaEncoder, LogMelEncoder, VisualEncoder, AUDIO_PAD,
    VIDEO_PAD,
};

/// Turns stored utterances into model inputs with the frozen extractors.
/// Relative media paths resolve against `media_root`.
pub struct FeatureLoader {
    pub media_root: PathBuf,
    pub visual: Box<dyn VisualEncoder>,
    pub audio: Box<dyn AudioEncoder>,
}

impl FeatureLoader {
    pub fn new(media_root: impl AsRef<Path>) -> Self {
        Self {
            media_root: media_root.as_ref().to_path_buf(),
            visual: Box::new(GridLumaEncoder::default()),
            audio: Box::new(LogMelEncoder::default()),
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.media_root.join(p)
        }
    }

    pub fn utterance(&self, u: &Utterance) -> Result<UtteranceInput> {
        let wave = Waveform::read_wav(self.resolve(&u.audio_ref))?;
        let audio = Some(audio_features(self.audio.as_ref(), &wave, AUDIO_PAD)?);
        let video = if u.frame_refs.is_empty() {
            None
        } else {
            let paths: Vec<PathBuf> = u.frame_refs.iter().map(|p| self.resolve(p)).collect();
            Some(video_features(self.visual.as_ref(), &load_frames(&paths, VIDEO_PAD)?)?)
        };
        Ok(UtteranceInput { speaker: u.speaker_id, text: u.text.clone(), video, audio })
    }

    pub fn example(&self, ex: &TrainingExample) -> Result<ModelExample> {
        Ok(ModelExample {
            history: ex.history.iter().map(|u| self.utterance(u)).collect::<Result<_>>()?,
            target_text: ex.target_text.clone(),
            target_description: ex.target_description.clone(),
        })
    }
}
