use candle_core::{DType, Tensor, D};

use crate::error::{Error, Result};

/// Mean token cross-entropy of `logits` `(n, vocab)` against `targets`.
pub fn compute_loss(logits: &Tensor, targets: &[u32]) -> Result<Tensor> {
    let (n, vocab) = logits.dims2()?;
    if n != targets.len() {
        return Err(Error::Shape(format!("{n} logit rows for {} target tokens", targets.len())));
    }
    if n == 0 {
        return Err(Error::invalid("empty target"));
    }
    if let Some(t) = targets.iter().find(|&&t| t as usize >= vocab) {
        return Err(Error::Shape(format!("target token {t} outside vocabulary of {vocab}")));
    }
    let logp = candle_nn::ops::log_softmax(logits, D::Minus1)?;
    let idx = Tensor::from_vec(targets.to_vec(), (n, 1), logits.device())?;
    let picked = logp.gather(&idx, 1)?;
    Ok((picked.sum_all()? / -(n as f64))?)
}

pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}
