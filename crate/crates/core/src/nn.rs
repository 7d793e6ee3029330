//! Named parameters and the few layers shared by the Q-Former and the
//! tiny language model. Tensors are 2-D `(rows, features)` throughout.

use std::collections::{BTreeMap, BTreeSet};

use candle_core::{DType, Device, Tensor, Var, D};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Parameters keyed by dotted name. Frozen entries are detached on read so
/// no gradient ever reaches them.
pub struct ParamStore {
    device: Device,
    dtype: DType,
    vars: BTreeMap<String, Var>,
    frozen: BTreeSet<String>,
}

impl ParamStore {
    pub fn new(dtype: DType) -> Self {
        Self { device: Device::Cpu, dtype, vars: BTreeMap::new(), frozen: BTreeSet::new() }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn insert(&mut self, name: impl Into<String>, value: &Tensor) -> Result<()> {
        let value = value.to_dtype(self.dtype)?.to_device(&self.device)?;
        self.vars.insert(name.into(), Var::from_tensor(&value)?);
        Ok(())
    }

    pub fn normal(&mut self, name: impl Into<String>, shape: (usize, usize), std: f64, rng: &mut impl Rng) -> Result<()> {
        let dist = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
        let data: Vec<f64> = (0..shape.0 * shape.1).map(|_| dist.sample(rng)).collect();
        self.insert(name, &Tensor::from_vec(data, shape, &self.device)?)
    }

    pub fn constant(&mut self, name: impl Into<String>, shape: (usize, usize), value: f64) -> Result<()> {
        let t = (Tensor::ones(shape, self.dtype, &self.device)? * value)?;
        self.insert(name, &t)
    }

    /// A linear layer `{name}.weight` of shape `(d_out, d_in)` and `{name}.bias`.
    pub fn linear(&mut self, name: &str, d_in: usize, d_out: usize, std: f64, rng: &mut impl Rng) -> Result<()> {
        self.normal(format!("{name}.weight"), (d_out, d_in), std, rng)?;
        self.constant(format!("{name}.bias"), (1, d_out), 0.0)
    }

    pub fn layer_norm(&mut self, name: &str, dim: usize) -> Result<()> {
        self.constant(format!("{name}.weight"), (1, dim), 1.0)?;
        self.constant(format!("{name}.bias"), (1, dim), 0.0)
    }

    pub fn get(&self, name: &str) -> Result<Tensor> {
        let var = self
            .vars
            .get(name)
            .ok_or_else(|| Error::Shape(format!("missing parameter `{name}`")))?;
        Ok(if self.frozen.contains(name) { var.as_tensor().detach() } else { var.as_tensor().clone() })
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn set(&self, name: &str, value: &Tensor) -> Result<()> {
        let var = self
            .vars
            .get(name)
            .ok_or_else(|| Error::Shape(format!("missing parameter `{name}`")))?;
        var.set(&value.to_dtype(self.dtype)?)?;
        Ok(())
    }

    pub fn freeze_prefix(&mut self, prefix: &str) {
        let names: Vec<String> = self.vars.keys().filter(|k| k.starts_with(prefix)).cloned().collect();
        self.frozen.extend(names);
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen.contains(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn trainable(&self) -> Vec<(String, Var)> {
        self.vars
            .iter()
            .filter(|(k, _)| !self.frozen.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.trainable().iter().map(|(_, v)| v.elem_count()).sum()
    }

    pub fn tensors(&self, trainable_only: bool) -> BTreeMap<String, Tensor> {
        self.vars
            .iter()
            .filter(|(k, _)| !trainable_only || !self.frozen.contains(*k))
            .map(|(k, v)| (k.clone(), v.as_tensor().clone()))
            .collect()
    }

    /// Overwrites existing parameters with same-named tensors.
    pub fn load(&self, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        for (name, t) in tensors {
            let var = self
                .vars
                .get(name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor `{name}`")))?;
            if var.dims() != t.dims() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(self.dtype)?)?;
        }
        Ok(())
    }
}

/// `x W^T + b` for `x` of shape `(n, d_in)`.
pub fn linear(store: &ParamStore, name: &str, x: &Tensor) -> Result<Tensor> {
    let w = store.get(&format!("{name}.weight"))?;
    let b = store.get(&format!("{name}.bias"))?;
    affine(x, &w, &b)
}

pub fn affine(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (_, d_in) = x.dims2()?;
    let (_, w_in) = w.dims2()?;
    if d_in != w_in {
        return Err(Error::Shape(format!("input width {d_in} does not match weight width {w_in}")));
    }
    Ok(x.matmul(&w.t()?)?.broadcast_add(b)?)
}

pub fn layer_norm(store: &ParamStore, name: &str, x: &Tensor) -> Result<Tensor> {
    let g = store.get(&format!("{name}.weight"))?;
    let b = store.get(&format!("{name}.bias"))?;
    let mean = x.mean_keepdim(D::Minus1)?;
    let centered = x.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
    let normed = centered.broadcast_div(&(var + 1e-5)?.sqrt()?)?;
    Ok(normed.broadcast_mul(&g)?.broadcast_add(&b)?)
}

/// Additive attention bias: 0 for kept keys, -1e9 for masked ones.
pub fn key_bias(keep: &[bool], dtype: DType, device: &Device) -> Result<Tensor> {
    let v: Vec<f32> = keep.iter().map(|&k| if k { 0.0 } else { -1e9 }).collect();
    Ok(Tensor::from_vec(v, (1, keep.len()), device)?.to_dtype(dtype)?)
}

/// Causal bias of shape `(n, n)`.
pub fn causal_bias(n: usize, dtype: DType, device: &Device) -> Result<Tensor> {
    let v: Vec<f32> = (0..n)
        .flat_map(|i| (0..n).map(move |j| if j <= i { 0.0 } else { -1e9 }))
        .collect();
    Ok(Tensor::from_vec(v, (n, n), device)?.to_dtype(dtype)?)
}

/// Scaled dot-product attention over `heads` heads. `q` is `(nq, d)`,
/// `k` and `v` are `(nk, d)`, `bias` broadcasts to `(nq, nk)`.
pub fn attention(q: &Tensor, k: &Tensor, v: &Tensor, heads: usize, bias: Option<&Tensor>) -> Result<Tensor> {
    let (nq, d) = q.dims2()?;
    let (nk, _) = k.dims2()?;
    if d % heads != 0 {
        return Err(Error::Shape(format!("width {d} not divisible by {heads} heads")));
    }
    let dh = d / heads;
    let split = |t: &Tensor, n: usize| -> Result<Tensor> { Ok(t.reshape((n, heads, dh))?.transpose(0, 1)?.contiguous()?) };
    let (qh, kh, vh) = (split(q, nq)?, split(k, nk)?, split(v, nk)?);
    let mut scores = (qh.matmul(&kh.transpose(1, 2)?.contiguous()?)? / (dh as f64).sqrt())?;
    if let Some(b) = bias {
        scores = scores.broadcast_add(b)?;
    }
    let probs = candle_nn::ops::softmax(&scores, D::Minus1)?;
    let out = probs.matmul(&vh)?;
    Ok(out.transpose(0, 1)?.contiguous()?.reshape((nq, d))?)
}
