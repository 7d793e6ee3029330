use candle_core::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QFormerConfig {
    pub n_query: usize,
    pub hidden: usize,
    pub heads: usize,
    pub blocks: usize,
    pub ffn_dim: usize,
    pub feature_dim: usize,
}

/// Learned queries refined by blocks of self-attention, cross-attention to
/// the input features, and a feed-forward layer (each post-norm residual).
#[derive(Debug, Clone)]
pub struct QFormer {
    pub prefix: String,
    pub config: QFormerConfig,
}

impl QFormer {
    pub fn new(prefix: impl Into<String>, config: QFormerConfig) -> Self {
        Self { prefix: prefix.into(), config }
    }

    fn name(&self, rest: &str) -> String {
        format!("{}.{rest}", self.prefix)
    }

    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let c = self.config;
        if c.heads == 0 || !c.hidden.is_multiple_of(c.heads) {
            return Err(Error::Shape(format!("hidden {} not divisible by {} heads", c.hidden, c.heads)));
        }
        let std = 0.02f64.max(1.0 / (c.hidden as f64).sqrt() * 0.5);
        store.normal(self.name("query"), (c.n_query, c.hidden), std, rng)?;
        store.layer_norm(&self.name("feature_ln"), c.feature_dim)?;
        for b in 0..c.blocks {
            let p = |s: &str| self.name(&format!("blocks.{b}.{s}"));
            for s in ["self.q", "self.k", "self.v", "self.o", "cross.q"] {
                store.linear(&p(s), c.hidden, c.hidden, std, rng)?;
            }
            store.linear(&p("cross.k"), c.feature_dim, c.hidden, std, rng)?;
            store.linear(&p("cross.v"), c.feature_dim, c.hidden, std, rng)?;
            store.linear(&p("cross.o"), c.hidden, c.hidden, std, rng)?;
            store.linear(&p("ffn.up"), c.hidden, c.ffn_dim, std, rng)?;
            store.linear(&p("ffn.down"), c.ffn_dim, c.hidden, std, rng)?;
            for ln in ["self_ln", "cross_ln", "ffn_ln"] {
                store.layer_norm(&p(ln), c.hidden)?;
            }
        }
        Ok(())
    }

    /// `features` is `(pad, feature_dim)`; `mask[i]` is false for padding.
    /// Returns `(n_query, hidden)` regardless of how many rows are valid.
    pub fn forward(&self, store: &ParamStore, features: &Tensor, mask: &[bool]) -> Result<Tensor> {
        let c = self.config;
        let (rows, dim) = features.dims2()?;
        if dim != c.feature_dim {
            return Err(Error::Shape(format!("{}: features have width {dim}, expected {}", self.prefix, c.feature_dim)));
        }
        if mask.len() != rows {
            return Err(Error::Shape(format!("mask length {} does not match {rows} feature rows", mask.len())));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::invalid(format!("{}: every input position is masked", self.prefix)));
        }
        let feats = nn::layer_norm(store, &self.name("feature_ln"), features)?;
        let bias = nn::key_bias(mask, store.dtype(), store.device())?;
        let mut x = store.get(&self.name("query"))?;
        for b in 0..c.blocks {
            let p = |s: &str| self.name(&format!("blocks.{b}.{s}"));
            let q = nn::linear(store, &p("self.q"), &x)?;
            let k = nn::linear(store, &p("self.k"), &x)?;
            let v = nn::linear(store, &p("self.v"), &x)?;
            let a = nn::linear(store, &p("self.o"), &nn::attention(&q, &k, &v, c.heads, None)?)?;
            x = nn::layer_norm(store, &p("self_ln"), &(x + a)?)?;

            let q = nn::linear(store, &p("cross.q"), &x)?;
            let k = nn::linear(store, &p("cross.k"), &feats)?;
            let v = nn::linear(store, &p("cross.v"), &feats)?;
            let a = nn::linear(store, &p("cross.o"), &nn::attention(&q, &k, &v, c.heads, Some(&bias))?)?;
            x = nn::layer_norm(store, &p("cross_ln"), &(x + a)?)?;

            let h = nn::linear(store, &p("ffn.up"), &x)?.gelu()?;
            let h = nn::linear(store, &p("ffn.down"), &h)?;
            x = nn::layer_norm(store, &p("ffn_ln"), &(x + h)?)?;
        }
        Ok(x)
    }
}
