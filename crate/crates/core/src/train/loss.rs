use candle_core::{DType, Device, Tensor, Var};

use crate::error::{Error, Result};
use crate::nn::{indicator, masked_log_softmax, TeacherOutputs};

/// Head order used by [`HeadLosses::stack`] and [`LossWeights`].
pub const HEADS: [&str; 4] = ["type", "src", "dst", "label"];

/// Scalar mean negative log-likelihood per head.
#[derive(Debug, Clone)]
pub struct HeadLosses {
    pub kind: Tensor,
    pub src: Tensor,
    pub dst: Tensor,
    pub label: Tensor,
}

impl HeadLosses {
    /// `(4,)` in [`HEADS`] order.
    pub fn stack(&self) -> Result<Tensor> {
        Ok(Tensor::stack(&[&self.kind, &self.src, &self.dst, &self.label], 0)?)
    }

    pub fn values(&self) -> Result<[f64; 4]> {
        let v: Vec<f64> = self.stack()?.to_dtype(DType::F64)?.to_vec1()?;
        Ok([v[0], v[1], v[2], v[3]])
    }
}

/// Mean `-log p[target]` over rows where `active` holds; 0 when none do.
pub fn nll(log_probs: &Tensor, targets: &[u32], active: &[bool]) -> Result<Tensor> {
    let support = log_probs.dim(1)?;
    if let Some(&bad) = targets
        .iter()
        .zip(active)
        .find(|(&t, &a)| a && t as usize >= support)
        .map(|(t, _)| t)
    {
        return Err(Error::Invalid(format!("target {bad} outside a support of {support}")));
    }
    let count = active.iter().filter(|&&a| a).count();
    if count == 0 {
        return Ok(Tensor::zeros((), log_probs.dtype(), log_probs.device())?);
    }
    // inactive rows may carry any in-range index; they are weighted out
    let safe: Vec<u32> = targets
        .iter()
        .zip(active)
        .map(|(&t, &a)| if a { t } else { 0 })
        .collect();
    let idx = Tensor::from_vec(safe, (targets.len(), 1), log_probs.device())?;
    let picked = log_probs.gather(&idx, 1)?.squeeze(1)?;
    let weight = indicator(active, log_probs)?;
    Ok(((picked * weight)?.sum_all()? / -(count as f64))?)
}

/// Per-head losses of a teacher-forced pass. Node heads normalize over the
/// real nodes of each snapshot only.
pub fn head_losses(out: &TeacherOutputs) -> Result<HeadLosses> {
    let t = &out.targets;
    let all = vec![true; t.kinds.len()];
    let kind = nll(&candle_nn::ops::log_softmax(&out.type_logits, 1)?, &t.kinds, &all)?;
    let src = nll(
        &masked_log_softmax(&out.src_logits, &out.node_mask, 1)?,
        &t.src,
        &t.src_active,
    )?;
    let dst = nll(
        &masked_log_softmax(&out.dst_logits, &out.node_mask, 1)?,
        &t.dst,
        &t.dst_active,
    )?;
    let label = nll(
        &candle_nn::ops::log_softmax(&out.label_logits, 1)?,
        &t.labels,
        &t.label_active,
    )?;
    Ok(HeadLosses { kind, src, dst, label })
}

/// Learned uncertainty weights `s`, one per head, starting at 0.
#[derive(Debug, Clone)]
pub struct LossWeights {
    s: Var,
}

impl LossWeights {
    pub fn new(dtype: DType, device: &Device) -> Result<Self> {
        Ok(Self {
            s: Var::zeros(HEADS.len(), dtype, device)?,
        })
    }

    pub fn from_values(values: &[f64], dtype: DType, device: &Device) -> Result<Self> {
        if values.len() != HEADS.len() {
            return Err(Error::Invalid(format!("expected {} loss weights", HEADS.len())));
        }
        let t = Tensor::new(values, device)?.to_dtype(dtype)?;
        Ok(Self {
            s: Var::from_tensor(&t)?,
        })
    }

    pub fn var(&self) -> &Var {
        &self.s
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        Ok(self.s.as_tensor().to_dtype(DType::F64)?.to_vec1()?)
    }

    /// `Σ exp(-s_i) L_i + ln(1 + exp(s_i))`.
    pub fn total(&self, losses: &Tensor) -> Result<Tensor> {
        total_loss(losses, self.s.as_tensor())
    }
}

/// Uncertainty-weighted sum of the `(4,)` head losses under weights `s`.
pub fn total_loss(losses: &Tensor, s: &Tensor) -> Result<Tensor> {
    let weighted = (s.neg()?.exp()? * losses)?;
    let regularizer = (s.exp()? + 1.0)?.log()?;
    Ok((weighted + regularizer)?.sum_all()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: &[f64]) -> Tensor {
        Tensor::new(v, &Device::Cpu).unwrap()
    }

    #[test]
    fn total_at_zero_weights() {
        let w = LossWeights::new(DType::F64, &Device::Cpu).unwrap();
        let zero: f64 = w.total(&t(&[0.0; 4])).unwrap().to_scalar().unwrap();
        assert!((zero - 4.0 * 2f64.ln()).abs() < 1e-12);
        let some: f64 = w.total(&t(&[1.0, 2.0, 0.5, 0.25])).unwrap().to_scalar().unwrap();
        assert!((some - (3.75 + 4.0 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn uniform_type_loss_is_ln6() {
        let logp = candle_nn::ops::log_softmax(&Tensor::zeros((3, 6), DType::F64, &Device::Cpu).unwrap(), 1).unwrap();
        let l: f64 = nll(&logp, &[0, 3, 5], &[true; 3]).unwrap().to_scalar().unwrap();
        assert!((l - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn inactive_rows_are_ignored() {
        let logp = t(&[-0.1, -2.0, -3.0, -0.5]).reshape((2, 2)).unwrap();
        let l: f64 = nll(&logp, &[0, 7], &[true, false]).unwrap().to_scalar().unwrap();
        assert!((l - 0.1).abs() < 1e-12);
        let none: f64 = nll(&logp, &[9, 9], &[false, false]).unwrap().to_scalar().unwrap();
        assert_eq!(none, 0.0);
        assert!(nll(&logp, &[2, 0], &[true, true]).is_err());
    }
}
