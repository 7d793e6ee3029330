use serde::{Deserialize, Serialize};

use super::text::{text_metrics, ResponseText, TextMetricReport};
use crate::dialogue::{GenerationConfig, ModelExample, ModelOutput, MultisensoryModel};
use crate::error::Result;
use crate::fusion::ModalitySet;

/// Text only, then text with audio, with video, and with both.
pub const CANONICAL_SETS: [ModalitySet; 4] = [
    ModalitySet::TEXT,
    ModalitySet { video: false, audio: true, text: true },
    ModalitySet { video: true, audio: false, text: true },
    ModalitySet::ALL,
];

/// Anything that answers a history with a parsed response.
pub trait ResponseModel {
    fn respond(&self, example: &ModelExample, config: &GenerationConfig) -> Result<ModelOutput>;
}

impl ResponseModel for MultisensoryModel {
    fn respond(&self, example: &ModelExample, config: &GenerationConfig) -> Result<ModelOutput> {
        self.generate(&example.history, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub modalities: ModalitySet,
    pub report: TextMetricReport,
}

/// Scores one model on `examples`; failed generations count as empty responses.
pub fn evaluate_responses(model: &dyn ResponseModel, examples: &[ModelExample], config: &GenerationConfig) -> Result<TextMetricReport> {
    let mut hyps = Vec::with_capacity(examples.len());
    let mut refs = Vec::with_capacity(examples.len());
    for (i, ex) in examples.iter().enumerate() {
        let hyp = match model.respond(ex, config) {
            Ok(out) => ResponseText::from(&out),
            Err(e) => {
                tracing::warn!(example = i, error = %e, "generation failed; scored as empty");
                ResponseText::new("")
            }
        };
        hyps.push(hyp);
        refs.push(ResponseText::new(ex.target_text.clone()));
    }
    text_metrics(&hyps, &refs)
}

/// Builds a model per modality set via `factory` and scores it.
pub fn ablation_harness<M: ResponseModel>(
    mut factory: impl FnMut(ModalitySet) -> Result<M>,
    examples: &[ModelExample],
    sets: &[ModalitySet],
    config: &GenerationConfig,
) -> Result<Vec<AblationRow>> {
    sets.iter()
        .map(|&modalities| {
            let model = factory(modalities)?;
            let report = evaluate_responses(&model, examples, config)?;
            tracing::info!(modalities = %modalities.label(), bleu1 = report.bleu1, "ablation row scored");
            Ok(AblationRow { modalities, report })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableLayout {
    /// Modality, B@1, B@3, METEOR, ROUGE.
    Ablation,
    /// Modality, B@1 to B@4, METEOR, ROUGE.
    Full,
}

type Column = (&'static str, fn(&TextMetricReport) -> f64);

impl TableLayout {
    fn columns(self) -> Vec<Column> {
        let b1: fn(&TextMetricReport) -> f64 = |r| r.bleu1;
        let b2: fn(&TextMetricReport) -> f64 = |r| r.bleu2;
        let b3: fn(&TextMetricReport) -> f64 = |r| r.bleu3;
        let b4: fn(&TextMetricReport) -> f64 = |r| r.bleu4;
        let m: fn(&TextMetricReport) -> f64 = |r| r.meteor;
        let rl: fn(&TextMetricReport) -> f64 = |r| r.rouge_l;
        match self {
            TableLayout::Ablation => vec![("B@1", b1), ("B@3", b3), ("METEOR", m), ("ROUGE", rl)],
            TableLayout::Full => vec![("B@1", b1), ("B@2", b2), ("B@3", b3), ("B@4", b4), ("METEOR", m), ("ROUGE", rl)],
        }
    }
}

pub fn render_text(rows: &[AblationRow], layout: TableLayout) -> String {
    let cols = layout.columns();
    let labels: Vec<String> = rows.iter().map(|r| r.modalities.label()).collect();
    let w0 = labels.iter().map(String::len).chain(["Modality".len()]).max().unwrap_or(8);
    let mut out = format!("{:<w0$}", "Modality");
    for (name, _) in &cols {
        out.push_str(&format!(" | {name:>7}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(out.len() - 1));
    out.push('\n');
    for (row, label) in rows.iter().zip(&labels) {
        out.push_str(&format!("{label:<w0$}"));
        for (_, get) in &cols {
            out.push_str(&format!(" | {:>7.2}", get(&row.report)));
        }
        out.push('\n');
    }
    out
}

pub fn render_csv(rows: &[AblationRow], layout: TableLayout) -> Result<String> {
    let cols = layout.columns();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["modality".to_string()];
    header.extend(cols.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.modalities.label()];
        rec.extend(cols.iter().map(|(_, get)| format!("{:.4}", get(&row.report))));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
