//! Corpus BLEU, METEOR (exact then stem matching) and ROUGE-L, scored on
//! response text only.

use std::collections::HashMap;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use crate::dialogue::ModelOutput;
use crate::error::{Error, Result};

/// A response transcript. Built from a [`ModelOutput`] it carries only the
/// response, so voice descriptions can never reach a metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseText(String);

impl ResponseText {
    pub fn new(text: impl Into<String>) -> Self {
        Self(text.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&ModelOutput> for ResponseText {
    fn from(out: &ModelOutput) -> Self {
        Self(out.response_text.clone())
    }
}

/// Lowercased words; punctuation marks become tokens of their own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '\'' {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_string());
            }
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TextMetricReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
}

fn ngram_counts<T: AsRef<str>>(tokens: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped matches and hypothesis n-gram total for one pair.
fn clipped<T: AsRef<str>>(hyp: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matched = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    (matched, hyp.len().saturating_sub(n - 1))
}

/// Corpus BLEU-`max_n` in [0, 1] with uniform weights, brevity penalty and
/// no smoothing: any zero precision gives zero.
pub fn corpus_bleu<T: AsRef<str>>(hyps: &[Vec<T>], refs: &[Vec<T>], max_n: usize) -> f64 {
    let hyp_len: usize = hyps.iter().map(Vec::len).sum();
    let ref_len: usize = refs.iter().map(Vec::len).sum();
    if hyp_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let (mut m, mut t) = (0, 0);
        for (h, r) in hyps.iter().zip(refs) {
            let (a, b) = clipped(h, r, n);
            m += a;
            t += b;
        }
        if m == 0 || t == 0 {
            return 0.0;
        }
        log_sum += (m as f64 / t as f64).ln() / max_n as f64;
    }
    let bp = if hyp_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / hyp_len as f64).exp() };
    bp * log_sum.exp()
}

/// Optional synonym stage for METEOR.
pub trait SynonymAdapter: Send + Sync {
    fn are_synonyms(&self, a: &str, b: &str) -> bool;
}

pub struct Meteor {
    stemmer: Stemmer,
    synonyms: Option<Box<dyn SynonymAdapter>>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for Meteor {
    fn default() -> Self {
        Self { stemmer: Stemmer::create(Algorithm::English), synonyms: None, alpha: 0.9, beta: 3.0, gamma: 0.5 }
    }
}

impl Meteor {
    pub fn with_synonyms(mut self, adapter: Box<dyn SynonymAdapter>) -> Self {
        self.synonyms = Some(adapter);
        self
    }

    /// Latest-first greedy alignment, stage by stage, as in the common
    /// reference implementation. Returns (hyp index, ref index) pairs.
    fn align(&self, hyp: &[String], reference: &[String]) -> Vec<(usize, usize)> {
        let mut h_free = vec![true; hyp.len()];
        let mut r_free = vec![true; reference.len()];
        let mut matches = Vec::new();
        let hs: Vec<String> = hyp.iter().map(|w| self.stemmer.stem(w).into_owned()).collect();
        let rs: Vec<String> = reference.iter().map(|w| self.stemmer.stem(w).into_owned()).collect();
        let stages: [&dyn Fn(usize, usize) -> bool; 3] = [
            &|i, j| hyp[i] == reference[j],
            &|i, j| hs[i] == rs[j],
            &|i, j| self.synonyms.as_ref().is_some_and(|s| s.are_synonyms(&hyp[i], &reference[j])),
        ];
        for stage in stages {
            for i in (0..hyp.len()).rev() {
                if !h_free[i] {
                    continue;
                }
                if let Some(j) = (0..reference.len()).rev().find(|&j| r_free[j] && stage(i, j)) {
                    h_free[i] = false;
                    r_free[j] = false;
                    matches.push((i, j));
                }
            }
        }
        matches.sort_unstable();
        matches
    }

    pub fn sentence(&self, hyp: &[String], reference: &[String]) -> f64 {
        let matches = self.align(hyp, reference);
        let m = matches.len();
        if m == 0 || hyp.is_empty() || reference.is_empty() {
            return 0.0;
        }
        let p = m as f64 / hyp.len() as f64;
        let r = m as f64 / reference.len() as f64;
        let fmean = p * r / (self.alpha * p + (1.0 - self.alpha) * r);
        let breaks = matches.windows(2).filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1)).count();
        let frag = (breaks + 1) as f64 / m as f64;
        (1.0 - self.gamma * frag.powf(self.beta)) * fmean
    }
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

/// ROUGE-L F1 for one pair.
pub fn rouge_l<T: PartialEq>(hyp: &[T], reference: &[T]) -> f64 {
    let l = lcs_len(hyp, reference);
    if l == 0 {
        return 0.0;
    }
    let p = l as f64 / hyp.len() as f64;
    let r = l as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// All metrics as percentages. METEOR and ROUGE-L are sentence means.
pub fn text_metrics(hypotheses: &[ResponseText], references: &[ResponseText]) -> Result<TextMetricReport> {
    if hypotheses.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} hypotheses for {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::invalid("cannot score an empty corpus"));
    }
    let hyps: Vec<Vec<String>> = hypotheses.iter().map(|h| tokenize(h.as_str())).collect();
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r.as_str())).collect();
    let meteor = Meteor::default();
    let n = hyps.len() as f64;
    let pct = |v: f64| 100.0 * v;
    Ok(TextMetricReport {
        bleu1: pct(corpus_bleu(&hyps, &refs, 1)),
        bleu2: pct(corpus_bleu(&hyps, &refs, 2)),
        bleu3: pct(corpus_bleu(&hyps, &refs, 3)),
        bleu4: pct(corpus_bleu(&hyps, &refs, 4)),
        meteor: pct(hyps.iter().zip(&refs).map(|(h, r)| meteor.sentence(h, r)).sum::<f64>() / n),
        rouge_l: pct(hyps.iter().zip(&refs).map(|(h, r)| rouge_l(h, r)).sum::<f64>() / n),
    })
}
