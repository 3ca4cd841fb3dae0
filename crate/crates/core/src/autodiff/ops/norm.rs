use super::Mode;
use crate::autodiff::tape::{GradBufs, Op, Tape, Var};
use crate::autodiff::{AutodiffError, ParamId, Scalar, Tensor};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Parameters and buffers of one batch-normalization layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BnParams {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    /// Single-element buffer counting running-statistic updates.
    pub tracked: ParamId,
}

pub(crate) struct BnCache<T> {
    x: Var,
    gamma: Var,
    beta: Var,
    x_hat: Vec<T>,
    inv_std: Vec<T>,
    dims: [usize; 4],
    train: bool,
}

impl<T: Scalar> Tape<'_, T> {
    /// Per-channel normalization of `x [B, C, H, W]` over `(B, H, W)`.
    pub fn batch_norm(&mut self, x: Var, bn: &BnParams, mode: Mode) -> Result<Var, AutodiffError> {
        let dims = self.value(x).dims4("batch_norm input")?;
        let [b, c, h, w] = dims;
        let plane = h * w;
        let m = b * plane;
        let store = self.params();
        for id in [bn.gamma, bn.beta, bn.running_mean, bn.running_var] {
            if store.get(id).value.shape() != [c] {
                return Err(AutodiffError::Shape(format!(
                    "batch_norm `{}`: expected [{c}], got {:?}",
                    store.get(id).name,
                    store.get(id).value.shape()
                )));
            }
        }
        let eps = T::of(BN_EPS);
        let data = self.value(x).data();
        let (mean, var) = match mode {
            Mode::Train => {
                if m < 2 {
                    return Err(AutodiffError::Shape(format!(
                        "batch_norm in train mode needs at least 2 values per channel, got {m}"
                    )));
                }
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                for ch in 0..c {
                    let mut s = 0.0f64;
                    for bi in 0..b {
                        s += data[(bi * c + ch) * plane..][..plane].iter().map(|v| v.as_f64()).sum::<f64>();
                    }
                    let mu = s / m as f64;
                    let mut q = 0.0f64;
                    for bi in 0..b {
                        q += data[(bi * c + ch) * plane..][..plane]
                            .iter()
                            .map(|v| (v.as_f64() - mu).powi(2))
                            .sum::<f64>();
                    }
                    mean[ch] = T::of(mu);
                    var[ch] = T::of(q / m as f64);
                }
                (mean, var)
            }
            Mode::Eval => {
                if store.get(bn.tracked).value.item() == T::zero() {
                    return Err(AutodiffError::EvalBeforeStats {
                        name: store.get(bn.running_mean).name.clone(),
                    });
                }
                (
                    store.get(bn.running_mean).value.data().to_vec(),
                    store.get(bn.running_var).value.data().to_vec(),
                )
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let gamma = store.get(bn.gamma).value.data();
        let beta = store.get(bn.beta).value.data();
        let mut x_hat = vec![T::zero(); data.len()];
        let mut out = vec![T::zero(); data.len()];
        for bi in 0..b {
            for ch in 0..c {
                let off = (bi * c + ch) * plane;
                for i in off..off + plane {
                    let xh = (data[i] - mean[ch]) * inv_std[ch];
                    x_hat[i] = xh;
                    out[i] = gamma[ch] * xh + beta[ch];
                }
            }
        }
        if mode == Mode::Train {
            let mom = T::of(BN_MOMENTUM);
            let unbias = T::of(m as f64 / (m - 1) as f64);
            let rm = store.get(bn.running_mean).value.data();
            let rv = store.get(bn.running_var).value.data();
            let new_mean = (0..c).map(|i| (T::one() - mom) * rm[i] + mom * mean[i]).collect();
            let new_var = (0..c)
                .map(|i| (T::one() - mom) * rv[i] + mom * var[i] * unbias)
                .collect();
            let tracked = store.get(bn.tracked).value.item() + T::one();
            self.push_update(bn.running_mean, Tensor::new([c], new_mean)?);
            self.push_update(bn.running_var, Tensor::new([c], new_var)?);
            self.push_update(bn.tracked, Tensor::scalar(tracked));
        }
        let gv = self.param(bn.gamma);
        let bv = self.param(bn.beta);
        let requires = self.requires_grad(x) || self.requires_grad(gv) || self.requires_grad(bv);
        let record = self.recording();
        let cache = BnCache {
            x,
            gamma: gv,
            beta: bv,
            x_hat: if record { x_hat } else { Vec::new() },
            inv_std,
            dims,
            train: mode == Mode::Train,
        };
        Ok(self.push(Tensor::new(dims.to_vec(), out)?, Op::BatchNorm(cache), requires))
    }
}

pub(crate) fn backward<T: Scalar>(tape: &Tape<'_, T>, cache: &BnCache<T>, g: &[T], bufs: &mut GradBufs<T>) {
    let [b, c, h, w] = cache.dims;
    let plane = h * w;
    let m = T::of((b * plane) as f64);
    let mut sum_g = vec![T::zero(); c];
    let mut sum_gx = vec![T::zero(); c];
    for bi in 0..b {
        for ch in 0..c {
            let off = (bi * c + ch) * plane;
            for (gi, xi) in g[off..off + plane].iter().zip(&cache.x_hat[off..off + plane]) {
                sum_g[ch] += *gi;
                sum_gx[ch] += *gi * *xi;
            }
        }
    }
    if let Some(dg) = bufs.get(cache.gamma) {
        dg.iter_mut().zip(&sum_gx).for_each(|(d, s)| *d += *s);
    }
    if let Some(db) = bufs.get(cache.beta) {
        db.iter_mut().zip(&sum_g).for_each(|(d, s)| *d += *s);
    }
    let gamma = tape.value(cache.gamma).data();
    if let Some(dx) = bufs.get(cache.x) {
        for bi in 0..b {
            for ch in 0..c {
                let off = (bi * c + ch) * plane;
                let scale = gamma[ch] * cache.inv_std[ch];
                for i in off..off + plane {
                    dx[i] += if cache.train {
                        scale * (g[i] - (sum_g[ch] + cache.x_hat[i] * sum_gx[ch]) / m)
                    } else {
                        scale * g[i]
                    };
                }
            }
        }
    }
}
