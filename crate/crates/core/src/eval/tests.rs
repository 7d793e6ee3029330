use super::*;
use crate::dialogue::{GenerationConfig, ModelConfig, MultisensoryModel};
use crate::fusion::{Modality, ModalitySet};

fn tiny(modalities: ModalitySet) -> crate::Result<MultisensoryModel> {
    let mut config = ModelConfig::default();
    config.fusion.n_query = 4;
    config.fusion.hidden = 32;
    config.fusion.ffn_dim = 64;
    config.fusion.blocks = 1;
    config.modalities = modalities;
    MultisensoryModel::new(config, 0)
}

fn examples() -> Vec<crate::dialogue::ModelExample> {
    use crate::dialogue::{ModelExample, UtteranceInput};
    use crate::fusion::{FeatureSequence, AUDIO_PAD, VIDEO_PAD};
    let feats = |dim: usize, pad: usize| FeatureSequence::from_rows(vec![vec![0.5; dim]; 3], dim, pad).unwrap();
    (0..3)
        .map(|i| ModelExample {
            history: (0..2)
                .map(|j| UtteranceInput {
                    speaker: crate::speakers::SpeakerId(j),
                    text: format!("hello number {i}"),
                    video: Some(feats(66, VIDEO_PAD)),
                    audio: Some(feats(40, AUDIO_PAD)),
                })
                .collect(),
            target_text: "fine thanks".into(),
            target_description: "A calm voice.".into(),
        })
        .collect()
}

#[test]
fn canonical_rows_in_order_with_finite_metrics() {
    let gen = GenerationConfig { max_new_tokens: 8, ..Default::default() };
    let rows = ablation_harness(tiny, &examples(), &CANONICAL_SETS, &gen).unwrap();
    let labels: Vec<String> = rows.iter().map(|r| r.modalities.label()).collect();
    assert_eq!(labels, vec!["Text", "Text + Audio", "Text + Video", "Text + Audio + Video"]);
    for r in &rows {
        let m = r.report;
        for v in [m.bleu1, m.bleu2, m.bleu3, m.bleu4, m.meteor, m.rouge_l] {
            assert!(v.is_finite() && (0.0..=100.0).contains(&v));
        }
    }
    let text = render_text(&rows, TableLayout::Ablation);
    assert!(text.lines().next().unwrap().contains("B@1") && text.lines().count() == 6);
    let csv = render_csv(&rows, TableLayout::Full).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "modality,B@1,B@2,B@3,B@4,METEOR,ROUGE");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn masking_audio_removes_its_query_tokens() {
    let ex = &examples()[0];
    let full = tiny(ModalitySet::ALL).unwrap();
    let no_audio = tiny(ModalitySet { audio: false, ..ModalitySet::ALL }).unwrap();
    let (a, _) = full.prompt(&ex.history).unwrap();
    let (b, _) = no_audio.prompt(&ex.history).unwrap();
    assert_eq!(a.len() - b.len(), 4 * ex.history.len());
    assert_eq!(b.modality_len(Modality::Audio), 0);
    assert_eq!(a.modality_len(Modality::Video), b.modality_len(Modality::Video));
}
