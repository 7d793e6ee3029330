//! Seeded synthetic speaker embeddings: unit vectors jittered around
//! well-separated random centres.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::SpeechEmbedding;

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub speakers: usize,
    pub per_speaker: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of the jitter added to a centre.
    pub jitter: f32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            speakers: 3,
            per_speaker: 60,
            dim: 256,
            jitter: 0.02,
        }
    }
}

/// Returns embeddings in shuffled speaker order together with the true speaker of each.
pub fn clustered_embeddings(spec: &SyntheticSpec, seed: u64) -> (Vec<SpeechEmbedding>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = |rng: &mut ChaCha8Rng| -> f32 { StandardNormal.sample(rng) };
    let centres: Vec<Vec<f32>> = (0..spec.speakers)
        .map(|_| {
            let v: Vec<f32> = (0..spec.dim).map(|_| gauss(&mut rng)).collect();
            super::normalize(&v).expect("non-zero gaussian vector")
        })
        .collect();
    let mut order: Vec<usize> = (0..spec.speakers).flat_map(|s| std::iter::repeat_n(s, spec.per_speaker)).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let embeddings = order
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let v: Vec<f32> = centres[s].iter().map(|&c| c + spec.jitter * gauss(&mut rng)).collect();
            SpeechEmbedding::new(format!("u{i:04}"), &v).expect("jittered centre is non-zero")
        })
        .collect();
    (embeddings, order)
}
