use crate::autodiff::tape::{GradBufs, Op, Tape, Var};
use crate::autodiff::{AutodiffError, Scalar, Tensor};

/// Probability floor applied by the unfused cross-entropy.
pub const PROB_FLOOR: f64 = 1e-12;

fn softmax_rows<T: Scalar>(logits: &[T], k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); logits.len()];
    for (src, dst) in logits.chunks(k).zip(out.chunks_mut(k)) {
        let max = src.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for (d, s) in dst.iter_mut().zip(src) {
            *d = (*s - max).exp();
            sum += *d;
        }
        dst.iter_mut().for_each(|d| *d /= sum);
    }
    out
}

fn check_labels(labels: &[usize], batch: usize, k: usize) -> Result<(), AutodiffError> {
    if labels.len() != batch {
        return Err(AutodiffError::Shape(format!("{} labels for a batch of {batch}", labels.len())));
    }
    match labels.iter().find(|&&l| l >= k) {
        Some(&label) => Err(AutodiffError::Label { label, classes: k }),
        None => Ok(()),
    }
}

impl<T: Scalar> Tape<'_, T> {
    /// Max-subtracted softmax over the last axis of `[B, K]`.
    pub fn softmax(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let [b, k] = self.value(x).dims2("softmax input")?;
        if k == 0 {
            return Err(AutodiffError::Shape("softmax over zero classes".into()));
        }
        let out = softmax_rows(self.value(x).data(), k);
        let r = self.requires_grad(x);
        Ok(self.push(Tensor::new([b, k], out)?, Op::Softmax(x), r))
    }

    /// Mean of `-ln p[b, label_b]` over the batch, with probabilities clamped
    /// below at [`PROB_FLOOR`].
    pub fn cross_entropy(&mut self, p: Var, labels: &[usize]) -> Result<Var, AutodiffError> {
        let [b, k] = self.value(p).dims2("cross_entropy input")?;
        check_labels(labels, b, k)?;
        let floor = T::of(PROB_FLOOR);
        let data = self.value(p).data();
        let loss = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| -data[i * k + l].max(floor).ln())
            .sum::<T>()
            / T::of(b as f64);
        let r = self.requires_grad(p);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                p,
                labels: labels.to_vec(),
                floor,
            },
            r,
        ))
    }

    /// Softmax followed by cross-entropy, differentiated as `softmax - onehot`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, AutodiffError> {
        let [b, k] = self.value(logits).dims2("softmax_cross_entropy input")?;
        check_labels(labels, b, k)?;
        let data = self.value(logits).data();
        let mut loss = T::zero();
        for (row, &l) in data.chunks(k).zip(labels) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|v| (*v - max).exp()).sum::<T>().ln() + max;
            loss += lse - row[l];
        }
        loss /= T::of(b as f64);
        let probs = if self.recording() { softmax_rows(data, k) } else { Vec::new() };
        let r = self.requires_grad(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            r,
        ))
    }
}

pub(crate) fn softmax_backward<T: Scalar>(tape: &Tape<'_, T>, x: Var, out: Var, g: &[T], bufs: &mut GradBufs<T>) {
    let k = tape.shape(x)[1];
    let y = tape.value(out).data();
    if let Some(dx) = bufs.get(x) {
        for ((yr, gr), dr) in y.chunks(k).zip(g.chunks(k)).zip(dx.chunks_mut(k)) {
            let inner = yr.iter().zip(gr).map(|(a, b)| *a * *b).sum::<T>();
            for ((d, yi), gi) in dr.iter_mut().zip(yr).zip(gr) {
                *d += *yi * (*gi - inner);
            }
        }
    }
}

pub(crate) fn cross_entropy_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    p: Var,
    labels: &[usize],
    floor: T,
    g: &[T],
    bufs: &mut GradBufs<T>,
) {
    let k = tape.shape(p)[1];
    let data = tape.value(p).data();
    let scale = g[0] / T::of(labels.len() as f64);
    if let Some(dp) = bufs.get(p) {
        for (i, &l) in labels.iter().enumerate() {
            let v = data[i * k + l];
            if v > floor {
                dp[i * k + l] -= scale / v;
            }
        }
    }
}

pub(crate) fn fused_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    logits: Var,
    labels: &[usize],
    probs: &[T],
    g: &[T],
    bufs: &mut GradBufs<T>,
) {
    let k = tape.shape(logits)[1];
    let scale = g[0] / T::of(labels.len() as f64);
    if let Some(dx) = bufs.get(logits) {
        for (i, &l) in labels.iter().enumerate() {
            for j in 0..k {
                let onehot = if j == l { T::one() } else { T::zero() };
                dx[i * k + j] += scale * (probs[i * k + j] - onehot);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{check_input_grad, coeffs, random};
    use super::*;
    use crate::autodiff::ParamStore;
    use proptest::prelude::*;

    fn run_softmax(row: Vec<f64>) -> Vec<f64> {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let k = row.len();
        let x = tape.constant(Tensor::new([1, k], row).unwrap());
        let y = tape.softmax(x).unwrap();
        tape.value(y).data().to_vec()
    }

    #[test]
    fn known_values() {
        assert_eq!(run_softmax(vec![0.0, 0.0]), vec![0.5, 0.5]);
        let p = run_softmax(vec![2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn cross_entropy_values() {
        let store = ParamStore::new();
        let mut tape = Tape::<f64>::new(&store);
        let onehot = tape.constant(Tensor::new([1, 3], vec![0.0, 1.0, 0.0]).unwrap());
        let l = tape.cross_entropy(onehot, &[1]).unwrap();
        assert_eq!(tape.value(l).item(), 0.0);
        let uniform = tape.constant(Tensor::full([2, 20], 0.05));
        let l = tape.cross_entropy(uniform, &[0, 19]).unwrap();
        assert!((tape.value(l).item() - 20f64.ln()).abs() < 1e-12);
        let l = tape.cross_entropy(onehot, &[0]).unwrap();
        assert!((tape.value(l).item() + PROB_FLOOR.ln()).abs() < 1e-9);
        assert!(matches!(
            tape.cross_entropy(uniform, &[0, 20]),
            Err(AutodiffError::Label { label: 20, classes: 20 })
        ));
    }

    #[test]
    fn fused_gradient_is_softmax_minus_onehot() {
        let store = ParamStore::new();
        let mut tape = Tape::<f64>::new(&store);
        let logits = random(&[3, 4], 1);
        let x = tape.variable(logits.clone());
        let l = tape.softmax_cross_entropy(x, &[0, 3, 1]).unwrap();
        let g = tape.backward(l).unwrap();
        let p = softmax_rows(logits.data(), 4);
        for i in 0..3 {
            for j in 0..4 {
                let onehot = if j == [0, 3, 1][i] { 1.0 } else { 0.0 };
                let want = (p[i * 4 + j] - onehot) / 3.0;
                assert!((g.wrt(x).unwrap().data()[i * 4 + j] - want).abs() < 1e-15);
            }
        }
        let err = check_input_grad(logits.clone(), |t, x| t.softmax_cross_entropy(x, &[0, 3, 1]).unwrap());
        assert!(err < 1e-7, "{err}");
        // the unfused path agrees with the fused loss and gradient
        let err = check_input_grad(logits, |t, x| {
            let p = t.softmax(x).unwrap();
            t.cross_entropy(p, &[0, 3, 1]).unwrap()
        });
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let c = coeffs(10, 2);
        let err = check_input_grad(random(&[2, 5], 3), |t, x| {
            let y = t.softmax(x).unwrap();
            t.dot(y, &c).unwrap()
        });
        assert!(err < 1e-7, "{err}");
    }

    proptest! {
        #[test]
        fn rows_sum_to_one_and_shift_invariant(row in prop::collection::vec(-50.0f64..50.0, 1..30), c in -100.0f64..100.0) {
            let p = run_softmax(row.clone());
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let q = run_softmax(row.iter().map(|v| v + c).collect());
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
