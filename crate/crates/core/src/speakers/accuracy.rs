use std::collections::HashMap;

use super::SpeakerId;
use crate::error::{Error, Result};

/// Fraction of utterances labelled correctly under the best one-to-one
/// mapping between predicted and gold speaker IDs.
pub fn evaluate_assignment(predicted: &[SpeakerId], gold: &[SpeakerId]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::invalid(format!(
            "predicted has {} labels, gold has {}",
            predicted.len(),
            gold.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("cannot score an empty assignment"));
    }
    let index = |ids: &[SpeakerId]| {
        let mut m = HashMap::new();
        for id in ids {
            let next = m.len();
            m.entry(*id).or_insert(next);
        }
        m
    };
    let p_idx = index(predicted);
    let g_idx = index(gold);
    let mut counts = vec![vec![0i64; g_idx.len()]; p_idx.len()];
    for (p, g) in predicted.iter().zip(gold) {
        counts[p_idx[p]][g_idx[g]] += 1;
    }
    let matched: i64 = max_weight_assignment(&counts)
        .into_iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| counts[r][c]))
        .sum();
    Ok(matched as f64 / predicted.len() as f64)
}

/// Hungarian algorithm on a rectangular weight matrix; returns the column
/// matched to each row (rows beyond the column count may stay unmatched).
pub fn max_weight_assignment(weights: &[Vec<i64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, |r| r.len());
    let n = rows.max(cols);
    if n == 0 {
        return Vec::new();
    }
    let max_w = weights.iter().flatten().copied().max().unwrap_or(0);
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            max_w - weights[i][j]
        } else {
            max_w
        }
    };
    // Potentials formulation, 1-indexed with a virtual column 0.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; rows];
    for (j, &i) in p.iter().enumerate().skip(1) {
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<SpeakerId> {
        v.iter().copied().map(SpeakerId).collect()
    }

    /// Enumerates every injective mapping from predicted labels to gold labels.
    fn brute_force(pred: &[u32], gold: &[u32]) -> f64 {
        let p_max = *pred.iter().max().unwrap() as usize + 1;
        let g_max = *gold.iter().max().unwrap() as usize + 1;
        #[allow(clippy::too_many_arguments)]
        fn rec(k: usize, p_max: usize, g_max: usize, used: &mut Vec<bool>, map: &mut Vec<Option<usize>>, pred: &[u32], gold: &[u32], best: &mut usize) {
            if k == p_max {
                let hits = pred.iter().zip(gold).filter(|(p, g)| map[**p as usize] == Some(**g as usize)).count();
                *best = (*best).max(hits);
                return;
            }
            map[k] = None;
            rec(k + 1, p_max, g_max, used, map, pred, gold, best);
            for g in 0..g_max {
                if !used[g] {
                    used[g] = true;
                    map[k] = Some(g);
                    rec(k + 1, p_max, g_max, used, map, pred, gold, best);
                    used[g] = false;
                }
            }
            map[k] = None;
        }
        let mut best = 0;
        rec(0, p_max, g_max, &mut vec![false; g_max], &mut vec![None; p_max], pred, gold, &mut best);
        best as f64 / pred.len() as f64
    }

    #[test]
    fn identical_and_permuted_labels_score_one() {
        let gold = ids(&[0, 0, 1, 2, 1]);
        assert_eq!(evaluate_assignment(&gold, &gold).unwrap(), 1.0);
        let permuted = ids(&[2, 2, 0, 1, 0]);
        assert_eq!(evaluate_assignment(&permuted, &gold).unwrap(), 1.0);
    }

    #[test]
    fn hand_example_matches_enumeration() {
        let gold = [0, 0, 1, 1];
        let pred = [0, 1, 1, 1];
        assert_eq!(brute_force(&pred, &gold), 0.75);
        assert_eq!(evaluate_assignment(&ids(&pred), &ids(&gold)).unwrap(), 0.75);
    }

    #[test]
    fn matches_enumeration_on_pseudo_random_cases() {
        let mut state = 12345u64;
        let mut next = |m: u32| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) % m as u64) as u32
        };
        for _ in 0..300 {
            let n = 1 + next(9) as usize;
            let kp = 1 + next(4);
            let kg = 1 + next(4);
            let pred: Vec<u32> = (0..n).map(|_| next(kp)).collect();
            let gold: Vec<u32> = (0..n).map(|_| next(kg)).collect();
            let got = evaluate_assignment(&ids(&pred), &ids(&gold)).unwrap();
            assert!((got - brute_force(&pred, &gold)).abs() < 1e-12, "{pred:?} vs {gold:?}");
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(evaluate_assignment(&ids(&[0]), &ids(&[0, 1])).is_err());
    }
}
