//! Response-only text metrics, emotion consistency, the modality ablation
//! harness and human-evaluation packets.

mod ablation;
mod emotion;
mod human;
mod text;

pub use ablation::{
    ablation_harness, evaluate_responses, render_csv, render_text, AblationRow, ResponseModel, TableLayout,
    CANONICAL_SETS,
};
pub use emotion::{consistency_from_labels, emotion_consistency, EmotionAdapter, EmotionLabel, ProsodyEmotionClassifier};
pub use human::{export_human_eval_packet, HistoryEntry, HumanEvalSample, DEFAULT_CRITERIA, MAX_HISTORY, RESPONSE_OPTIONS};
pub use text::{corpus_bleu, rouge_l, text_metrics, tokenize, Meteor, ResponseText, SynonymAdapter, TextMetricReport};

#[cfg(test)]
mod tests;
