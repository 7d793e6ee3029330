use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Train/valid/test proportions of the reference corpus (913/110/97 of 1120).
pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [0.815, 0.098, 0.087];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub assignments: BTreeMap<String, Split>,
}

impl SplitSpec {
    pub fn get(&self, dialogue_id: &str) -> Option<Split> {
        self.assignments.get(dialogue_id).copied()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignments.values().filter(|&&s| s == split).count()
    }
}

/// Per-split counts: rounded shares, then nudged by largest rounding
/// residual until they sum to `n`.
fn split_counts(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: [usize; 3] = [0, 1, 2].map(|i| exact[i].round() as usize);
    loop {
        let total: usize = counts.iter().sum();
        if total == n {
            break;
        }
        let residual = |i: usize| exact[i] - counts[i] as f64;
        if total < n {
            let i = (0..3).max_by(|&a, &b| residual(a).total_cmp(&residual(b))).unwrap();
            counts[i] += 1;
        } else {
            let i = (0..3)
                .filter(|&i| counts[i] > 0)
                .min_by(|&a, &b| residual(a).total_cmp(&residual(b)))
                .unwrap();
            counts[i] -= 1;
        }
    }
    counts
}

/// Seeded random partition of dialogues (never of utterances).
pub fn make_splits<S: AsRef<str>>(dialogue_ids: &[S], ratios: [f64; 3], seed: u64) -> Result<SplitSpec> {
    let n = dialogue_ids.len();
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 dialogues to split, got {n}")));
    }
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::invalid(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let mut ids: Vec<&str> = dialogue_ids.iter().map(AsRef::as_ref).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != n {
        return Err(Error::invalid("dialogue IDs must be unique"));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [train, valid, _] = split_counts(n, ratios);
    let assignments = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let split = if i < train {
                Split::Train
            } else if i < train + valid {
                Split::Valid
            } else {
                Split::Test
            };
            (id.to_string(), split)
        })
        .collect();
    Ok(SplitSpec { seed, assignments })
}
