//! Dialogue-scoped speaker IDs from clustered speech embeddings.

mod accuracy;
mod cache;
mod embed;
mod hdbscan;
mod resolve;
pub mod synthetic;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use accuracy::{evaluate_assignment, max_weight_assignment};
pub use cache::{read_embedding_cache, write_embedding_cache};
pub use embed::{
    cosine_similarity, embed_utterances, normalize, EmbeddingAdapter, SpectrumEmbedder,
    SpeechEmbedding,
};
pub use hdbscan::{cluster_speakers, ClusterParams, ClusterResult, NOISE};
pub use resolve::{medoid, resolve_noise};

/// Speaker index within one dialogue, rendered as `Speaker k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpeakerId(pub u32);

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Speaker {}", self.0)
    }
}

/// Renumbers labels densely from 0 in order of first appearance.
pub fn renumber_dense<T: Eq + std::hash::Hash + Copy>(labels: &[T]) -> Vec<SpeakerId> {
    let mut seen = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = seen.len() as u32;
            SpeakerId(*seen.entry(*l).or_insert(next))
        })
        .collect()
}

/// Full assignment for one dialogue: cluster, then resolve noise.
pub fn assign_speakers(embeddings: &[SpeechEmbedding], params: &ClusterParams) -> crate::Result<Vec<SpeakerId>> {
    let result = cluster_speakers(embeddings, params)?;
    Ok(resolve_noise(&result, embeddings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_and_renumbering() {
        assert_eq!(SpeakerId(3).to_string(), "Speaker 3");
        let ids = renumber_dense(&[7, 7, 2, 9, 2]);
        assert_eq!(ids.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 0, 1, 2, 1]);
    }
}
