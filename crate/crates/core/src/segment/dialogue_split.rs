use std::path::Path;

use serde::{Deserialize, Serialize};

use super::UtteranceDraft;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitReason {
    ParticipantsChanged,
    SettingTransitioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitPoint {
    pub time: f64,
    pub reason: SplitReason,
}

/// Human-authored sidecar marking where one conversation ends and the next
/// begins, plus stretches to discard.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DialogueSplitAnnotation {
    pub source_id: String,
    #[serde(default)]
    pub splits: Vec<SplitPoint>,
    #[serde(default)]
    pub drops: Vec<(f64, f64)>,
}

impl DialogueSplitAnnotation {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ann: Self = serde_json::from_str(&text)?;
        ann.validate()?;
        Ok(ann)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.splits.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::invalid(format!(
                    "{}: split times must increase ({} then {})",
                    self.source_id, w[0].time, w[1].time
                )));
            }
        }
        let mut drops = self.drops.clone();
        for &(a, b) in &drops {
            if !(b > a) {
                return Err(Error::invalid(format!(
                    "{}: drop range ({a}, {b}) is empty",
                    self.source_id
                )));
            }
        }
        drops.sort_by(|x, y| x.0.total_cmp(&y.0));
        for w in drops.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::invalid(format!(
                    "{}: drop ranges ({}, {}) and ({}, {}) overlap",
                    self.source_id, w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(())
    }
}

/// Groups drafts into dialogues. A draft belongs to the group and the drop
/// range containing its temporal midpoint, so drafts straddling a split go
/// to whichever side holds most of them.
pub fn apply_dialogue_splits(
    drafts: &[UtteranceDraft],
    annotation: &DialogueSplitAnnotation,
) -> Result<Vec<Vec<UtteranceDraft>>> {
    annotation.validate()?;
    let mut groups: Vec<Vec<UtteranceDraft>> = vec![Vec::new(); annotation.splits.len() + 1];
    for d in drafts.iter().filter(|d| d.source_id == annotation.source_id) {
        let mid = d.midpoint();
        if annotation.drops.iter().any(|&(a, b)| mid >= a && mid <= b) {
            continue;
        }
        let group = annotation.splits.iter().filter(|s| s.time <= mid).count();
        groups[group].push(d.clone());
    }
    groups.retain(|g| !g.is_empty());
    Ok(groups)
}
