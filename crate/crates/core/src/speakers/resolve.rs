use super::{cosine_similarity, renumber_dense, ClusterResult, SpeakerId, SpeechEmbedding, NOISE};

/// Index of the member minimizing total cosine distance to the others.
pub fn medoid(members: &[usize], embeddings: &[SpeechEmbedding]) -> Option<usize> {
    members
        .iter()
        .map(|&i| {
            let total: f64 = members
                .iter()
                .map(|&j| 1.0 - cosine_similarity(&embeddings[i].vector, &embeddings[j].vector))
                .sum();
            (i, total)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// Gives every noise point the cluster whose medoid is most similar, then
/// renumbers IDs densely by first appearance. With no clusters at all,
/// every point becomes its own speaker.
pub fn resolve_noise(result: &ClusterResult, embeddings: &[SpeechEmbedding]) -> Vec<SpeakerId> {
    let n = result.labels.len();
    if result.num_clusters == 0 {
        return (0..n as u32).map(SpeakerId).collect();
    }
    let medoids: Vec<Option<usize>> = (0..result.num_clusters as i32)
        .map(|c| {
            let members: Vec<usize> = (0..n).filter(|&i| result.labels[i] == c).collect();
            medoid(&members, embeddings)
        })
        .collect();
    let resolved: Vec<i32> = (0..n)
        .map(|i| {
            if result.labels[i] != NOISE {
                return result.labels[i];
            }
            medoids
                .iter()
                .enumerate()
                .filter_map(|(c, m)| m.map(|m| (c as i32, cosine_similarity(&embeddings[i].vector, &embeddings[m].vector))))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(c, _)| c)
                .unwrap_or(0)
        })
        .collect();
    renumber_dense(&resolved)
}
