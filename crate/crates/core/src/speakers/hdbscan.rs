//! HDBSCAN over cosine distance.
//!
//! Mutual-reachability minimum spanning tree, single-linkage hierarchy,
//! condensed tree pruned at `min_cluster_size`, and excess-of-mass cluster
//! selection. The root is only selected when the hierarchy never splits
//! into two clusters of sufficient size, so a single speaker yields one
//! cluster instead of all noise.

use serde::{Deserialize, Serialize};

use super::SpeechEmbedding;
use crate::error::{Error, Result};

pub const NOISE: i32 = -1;

/// Distances below this are treated as equal for the 1/distance density scale.
const MIN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    /// Neighbourhood size for core distances, counting the point itself.
    /// Defaults to `min_cluster_size`.
    #[serde(default)]
    pub min_samples: Option<usize>,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 2,
            min_samples: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// One entry per input; [`NOISE`] for unclustered points.
    pub labels: Vec<i32>,
    pub num_clusters: usize,
    pub params: ClusterParams,
}

#[derive(Debug, Clone, Copy)]
struct CondensedEdge {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

pub fn cluster_speakers(embeddings: &[SpeechEmbedding], params: &ClusterParams) -> Result<ClusterResult> {
    let n = embeddings.len();
    if n == 0 {
        return Err(Error::invalid("cannot cluster an empty embedding set"));
    }
    if params.min_cluster_size < 2 {
        return Err(Error::invalid("min_cluster_size must be at least 2"));
    }
    let dim = embeddings[0].vector.len();
    if let Some(bad) = embeddings.iter().find(|e| e.vector.len() != dim) {
        return Err(Error::Shape(format!(
            "embedding `{}` has dimension {}, expected {dim}",
            bad.utterance_id,
            bad.vector.len()
        )));
    }
    if n < params.min_cluster_size {
        return Ok(ClusterResult {
            labels: vec![0; n],
            num_clusters: 1,
            params: *params,
        });
    }

    let dist = cosine_distances(embeddings);
    let k = params.min_samples.unwrap_or(params.min_cluster_size).clamp(1, n);
    let core: Vec<f64> = dist
        .iter()
        .map(|row| {
            let mut r = row.clone();
            r.sort_by(f64::total_cmp);
            r[k - 1]
        })
        .collect();

    let mst = prim_mst(&dist, &core);
    let (children, node_dist, node_size) = single_linkage(n, &mst);
    let condensed = condense(n, &children, &node_dist, &node_size, params.min_cluster_size);
    let labels = select_and_label(n, &condensed);

    let num_clusters = labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0);
    Ok(ClusterResult {
        labels,
        num_clusters,
        params: *params,
    })
}

fn cosine_distances(embeddings: &[SpeechEmbedding]) -> Vec<Vec<f64>> {
    let n = embeddings.len();
    let norms: Vec<f64> = embeddings
        .iter()
        .map(|e| e.vector.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let dot: f64 = embeddings[i]
                .vector
                .iter()
                .zip(&embeddings[j].vector)
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            let v = (1.0 - dot / (norms[i] * norms[j])).max(0.0);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Prim's algorithm on the dense mutual-reachability graph.
fn prim_mst(dist: &[Vec<f64>], core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = dist.len();
    let mr = |i: usize, j: usize| dist[i][j].max(core[i]).max(core[j]);
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for j in 0..n {
            if !in_tree[j] {
                let w = mr(current, j);
                if w < best[j] {
                    best[j] = w;
                    from[j] = current;
                }
            }
        }
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b)))
            .expect("unvisited vertex remains");
        in_tree[next] = true;
        edges.push((from[next], next, best[next]));
        current = next;
    }
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    edges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Children, merge distance and size per node.
type Dendrogram = (Vec<Option<(usize, usize)>>, Vec<f64>, Vec<usize>);

/// Dendrogram over `2n - 1` nodes; leaves are `0..n`, the root is `2n - 2`.
fn single_linkage(n: usize, mst: &[(usize, usize, f64)]) -> Dendrogram {
    let total = 2 * n - 1;
    let mut children = vec![None; total];
    let mut node_dist = vec![0.0; total];
    let mut node_size = vec![1usize; total];
    let mut uf = UnionFind::new(total);
    for (step, &(a, b, w)) in mst.iter().enumerate() {
        let node = n + step;
        let ra = uf.find(a);
        let rb = uf.find(b);
        children[node] = Some((ra, rb));
        node_dist[node] = w;
        node_size[node] = node_size[ra] + node_size[rb];
        uf.parent[ra] = node;
        uf.parent[rb] = node;
    }
    (children, node_dist, node_size)
}

fn leaves(node: usize, children: &[Option<(usize, usize)>], out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(x) = stack.pop() {
        match children[x] {
            None => out.push(x),
            Some((l, r)) => {
                stack.push(r);
                stack.push(l);
            }
        }
    }
}

/// Condensed tree; cluster ids start at `n` (the root).
fn condense(
    n: usize,
    children: &[Option<(usize, usize)>],
    node_dist: &[f64],
    node_size: &[usize],
    min_cluster_size: usize,
) -> Vec<CondensedEdge> {
    let root = 2 * n - 2;
    let mut relabel = vec![usize::MAX; children.len()];
    relabel[root] = n;
    let mut next_label = n + 1;
    let mut out = Vec::new();
    let mut queue = std::collections::VecDeque::from([root]);
    while let Some(node) = queue.pop_front() {
        let Some((left, right)) = children[node] else {
            continue;
        };
        let lambda = 1.0 / node_dist[node].max(MIN_DISTANCE);
        let parent = relabel[node];
        let (ls, rs) = (node_size[left], node_size[right]);
        let fall_out = |sub: usize, out: &mut Vec<CondensedEdge>| {
            let mut pts = Vec::new();
            leaves(sub, children, &mut pts);
            for p in pts {
                out.push(CondensedEdge { parent, child: p, lambda, size: 1 });
            }
        };
        match (ls >= min_cluster_size, rs >= min_cluster_size) {
            (true, true) => {
                for (c, s) in [(left, ls), (right, rs)] {
                    relabel[c] = next_label;
                    out.push(CondensedEdge { parent, child: next_label, lambda, size: s });
                    next_label += 1;
                    queue.push_back(c);
                }
            }
            (false, false) => {
                fall_out(left, &mut out);
                fall_out(right, &mut out);
            }
            (true, false) => {
                fall_out(right, &mut out);
                relabel[left] = parent;
                queue.push_back(left);
            }
            (false, true) => {
                fall_out(left, &mut out);
                relabel[right] = parent;
                queue.push_back(right);
            }
        }
    }
    out
}

fn select_and_label(n: usize, condensed: &[CondensedEdge]) -> Vec<i32> {
    let root = n;
    let max_cluster = condensed.iter().map(|e| e.parent.max(if e.size > 1 { e.child } else { 0 })).max().unwrap_or(root);
    let count = max_cluster - root + 1;
    let idx = |c: usize| c - root;

    let mut birth = vec![0.0f64; count];
    let mut cluster_parent = vec![usize::MAX; count];
    for e in condensed.iter().filter(|e| e.size > 1) {
        birth[idx(e.child)] = e.lambda;
        cluster_parent[idx(e.child)] = e.parent;
    }
    let mut stability = vec![0.0f64; count];
    for e in condensed {
        let c = idx(e.parent);
        stability[c] += (e.lambda - birth[c]) * e.size as f64;
    }

    let mut selected = vec![false; count];
    if count == 1 {
        selected[0] = true;
    } else {
        // Children always carry larger ids than their parent.
        let mut child_clusters: Vec<Vec<usize>> = vec![Vec::new(); count];
        for e in condensed.iter().filter(|e| e.size > 1) {
            child_clusters[idx(e.parent)].push(idx(e.child));
        }
        for c in (1..count).rev() {
            let subtree: f64 = child_clusters[c].iter().map(|&k| stability[k]).sum();
            if !child_clusters[c].is_empty() && subtree > stability[c] {
                stability[c] = subtree;
            } else {
                selected[c] = true;
                let mut stack = child_clusters[c].clone();
                while let Some(k) = stack.pop() {
                    selected[k] = false;
                    stack.extend(child_clusters[k].iter().copied());
                }
            }
        }
    }

    // Dense label per selected cluster in order of its smallest member.
    let mut point_parent = vec![usize::MAX; n];
    let mut point_lambda = vec![0.0f64; n];
    for e in condensed.iter().filter(|e| e.size == 1) {
        point_parent[e.child] = idx(e.parent);
        point_lambda[e.child] = e.lambda;
    }
    let root_max_lambda = condensed
        .iter()
        .filter(|e| e.parent == root && e.size == 1)
        .map(|e| e.lambda)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut raw = vec![usize::MAX; n];
    for p in 0..n {
        let mut c = point_parent[p];
        loop {
            if selected[c] {
                // A selected root keeps only its densest points.
                if c == 0 && point_lambda[p] < root_max_lambda {
                    break;
                }
                raw[p] = c;
                break;
            }
            if c == 0 {
                break;
            }
            c = idx(cluster_parent[c]);
        }
    }
    let mut dense = std::collections::HashMap::new();
    raw.iter()
        .map(|&c| {
            if c == usize::MAX {
                NOISE
            } else {
                let next = dense.len() as i32;
                *dense.entry(c).or_insert(next)
            }
        })
        .collect()
}
