//! Tiny pre-norm decoder used as the desk-scale backbone, with low-rank
//! adapters on the attention projections. Position information comes from
//! a per-head distance penalty in attention rather than added encodings.

use candle_core::{DType, Device, Tensor};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, ParamStore};

pub const ADAPTED: [&str; 4] = ["q", "k", "v", "o"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TinyLmConfig {
    pub vocab: usize,
    pub d_model: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
}

impl Default for TinyLmConfig {
    fn default() -> Self {
        Self { vocab: 256, d_model: 128, layers: 2, heads: 8, ffn_dim: 512 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoraConfig {
    pub rank: usize,
    pub alpha: f64,
}

impl Default for LoraConfig {
    fn default() -> Self {
        Self { rank: 8, alpha: 16.0 }
    }
}

/// Tunable parameters of one rank-`rank` adapter on a `d_out x d_in` matrix.
pub fn adapter_params(d_in: usize, d_out: usize, rank: usize) -> usize {
    rank * (d_in + d_out)
}

#[derive(Debug, Clone)]
pub struct TinyLm {
    pub config: TinyLmConfig,
    pub lora: Option<LoraConfig>,
}

impl TinyLm {
    pub fn new(config: TinyLmConfig) -> Self {
        Self { config, lora: None }
    }

    /// Base weights under `lm.`, frozen once created.
    pub fn init(&self, store: &mut ParamStore, rng: &mut impl Rng) -> Result<()> {
        let c = self.config;
        if c.heads == 0 || !c.d_model.is_multiple_of(c.heads) {
            return Err(Error::Shape(format!("d_model {} not divisible by {} heads", c.d_model, c.heads)));
        }
        let std = 1.0 / (c.d_model as f64).sqrt();
        store.normal("lm.tok_emb", (c.vocab, c.d_model), 1.0, rng)?;
        for l in 0..c.layers {
            let p = |s: &str| format!("lm.layers.{l}.{s}");
            store.layer_norm(&p("attn_ln"), c.d_model)?;
            for m in ADAPTED {
                store.linear(&p(m), c.d_model, c.d_model, std, rng)?;
            }
            store.layer_norm(&p("ffn_ln"), c.d_model)?;
            store.linear(&p("up"), c.d_model, c.ffn_dim, std, rng)?;
            store.linear(&p("down"), c.ffn_dim, c.d_model, 1.0 / (c.ffn_dim as f64).sqrt(), rng)?;
        }
        store.layer_norm("lm.final_ln", c.d_model)?;
        store.linear("lm.head", c.d_model, c.vocab, std, rng)?;
        store.freeze_prefix("lm.");
        Ok(())
    }

    /// Adds rank-`r` adapters `B A` to every attention projection, with `A`
    /// random and `B` zero so the backbone output is initially unchanged.
    /// Returns the number of new tunable parameters.
    pub fn attach_adapters(&mut self, store: &mut ParamStore, lora: LoraConfig, rng: &mut impl Rng) -> Result<usize> {
        let d = self.config.d_model;
        if lora.rank == 0 || lora.rank >= d {
            return Err(Error::invalid(format!("adapter rank {} must be in 1..{d}", lora.rank)));
        }
        let before = store.trainable_count();
        for l in 0..self.config.layers {
            for m in ADAPTED {
                store.normal(format!("lora.layers.{l}.{m}.a"), (lora.rank, d), 1.0 / (d as f64).sqrt(), rng)?;
                store.constant(format!("lora.layers.{l}.{m}.b"), (d, lora.rank), 0.0)?;
            }
        }
        self.lora = Some(lora);
        Ok(store.trainable_count() - before)
    }

    fn projection(&self, store: &ParamStore, layer: usize, m: &str, x: &Tensor) -> Result<Tensor> {
        let y = nn::linear(store, &format!("lm.layers.{layer}.{m}"), x)?;
        match self.lora {
            None => Ok(y),
            Some(lora) => {
                let a = store.get(&format!("lora.layers.{layer}.{m}.a"))?;
                let b = store.get(&format!("lora.layers.{layer}.{m}.b"))?;
                let delta = x.matmul(&a.t()?)?.matmul(&b.t()?)?;
                Ok((y + (delta * (lora.alpha / lora.rank as f64))?)?)
            }
        }
    }

    /// Token embeddings `(n, d_model)` for `ids`.
    pub fn embed(&self, store: &ParamStore, ids: &[u32]) -> Result<Tensor> {
        let emb = store.get("lm.tok_emb")?;
        let idx = Tensor::from_vec(ids.to_vec(), ids.len(), store.device())?;
        Ok(emb.index_select(&idx, 0)?)
    }

    /// Next-token logits `(n, vocab)` for an input embedding sequence.
    pub fn forward(&self, store: &ParamStore, inputs: &Tensor) -> Result<Tensor> {
        let c = self.config;
        let (n, d) = inputs.dims2()?;
        if d != c.d_model {
            return Err(Error::Shape(format!("input width {d}, model width {}", c.d_model)));
        }
        let mask = alibi_bias(n, c.heads, store.dtype(), store.device())?;
        let mut x = inputs.clone();
        for l in 0..c.layers {
            let h = nn::layer_norm(store, &format!("lm.layers.{l}.attn_ln"), &x)?;
            let q = self.projection(store, l, "q", &h)?;
            let k = self.projection(store, l, "k", &h)?;
            let v = self.projection(store, l, "v", &h)?;
            let a = nn::attention(&q, &k, &v, c.heads, Some(&mask))?;
            x = (x + self.projection(store, l, "o", &a)?)?;
            let h = nn::layer_norm(store, &format!("lm.layers.{l}.ffn_ln"), &x)?;
            let h = nn::linear(store, &format!("lm.layers.{l}.up"), &h)?.gelu()?;
            x = (x + nn::linear(store, &format!("lm.layers.{l}.down"), &h)?)?;
        }
        let x = nn::layer_norm(store, "lm.final_ln", &x)?;
        nn::linear(store, "lm.head", &x)
    }
}

/// Causal attention bias `(heads, n, n)` with a per-head linear penalty on
/// distance, so some heads look mostly at the last few positions.
pub fn alibi_bias(n: usize, heads: usize, dtype: DType, device: &Device) -> Result<Tensor> {
    let mut v = Vec::with_capacity(heads * n * n);
    for h in 0..heads {
        let slope = 2f64.powf(-8.0 * h as f64 / heads as f64);
        for i in 0..n {
            for j in 0..n {
                v.push(if j <= i { (-slope * (i - j) as f64) as f32 } else { -1e9 });
            }
        }
    }
    Ok(Tensor::from_vec(v, (heads, n, n), device)?.to_dtype(dtype)?)
}
