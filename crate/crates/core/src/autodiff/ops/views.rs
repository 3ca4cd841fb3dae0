//! Reductions across views stacked example-major in the batch axis: row
//! `b * views + v` of the input is view `v` of example `b`.

use crate::autodiff::tape::{GradBufs, Op, Tape, Var};
use crate::autodiff::{AutodiffError, Scalar, Tensor};

fn split_views(op: &str, shape: &[usize], views: usize) -> Result<(Vec<usize>, usize), AutodiffError> {
    if views == 0 || shape.is_empty() || !shape[0].is_multiple_of(views) {
        return Err(AutodiffError::Shape(format!(
            "{op}: leading dimension of {shape:?} is not a multiple of {views} views"
        )));
    }
    let mut out = shape.to_vec();
    out[0] /= views;
    let inner = shape[1..].iter().product();
    Ok((out, inner))
}

impl<T: Scalar> Tape<'_, T> {
    /// Element-wise maximum over views; ties keep the lowest view index.
    pub fn view_max(&mut self, x: Var, views: usize) -> Result<Var, AutodiffError> {
        let (shape, inner) = split_views("view_max", self.shape(x), views)?;
        let data = self.value(x).data();
        let b = shape[0];
        let mut out = Vec::with_capacity(b * inner);
        let mut argmax = Vec::with_capacity(b * inner);
        for bi in 0..b {
            for i in 0..inner {
                let mut best = bi * views * inner + i;
                for v in 1..views {
                    let idx = (bi * views + v) * inner + i;
                    if data[idx] > data[best] {
                        best = idx;
                    }
                }
                out.push(data[best]);
                argmax.push(best as u32);
            }
        }
        let r = self.requires_grad(x);
        let argmax = if self.recording() { argmax } else { Vec::new() };
        Ok(self.push(Tensor::new(shape, out)?, Op::ViewMax { x, views, argmax }, r))
    }

    /// Arithmetic mean over views.
    pub fn view_mean(&mut self, x: Var, views: usize) -> Result<Var, AutodiffError> {
        let (shape, inner) = split_views("view_mean", self.shape(x), views)?;
        let data = self.value(x).data();
        let scale = T::one() / T::of(views as f64);
        let mut out = vec![T::zero(); shape[0] * inner];
        for (bi, dst) in out.chunks_mut(inner).enumerate() {
            for v in 0..views {
                let src = &data[(bi * views + v) * inner..][..inner];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += *s);
            }
            dst.iter_mut().for_each(|d| *d *= scale);
        }
        let r = self.requires_grad(x);
        Ok(self.push(Tensor::new(shape, out)?, Op::ViewMean { x, views }, r))
    }

    /// `out[b] = Σ_v w[b, v] · x[b·V + v]` with `w [B, V]`.
    pub fn view_weighted_sum(&mut self, x: Var, w: Var) -> Result<Var, AutodiffError> {
        let [b, views] = self.value(w).dims2("view_weighted_sum weights")?;
        let (shape, inner) = split_views("view_weighted_sum", self.shape(x), views)?;
        if shape[0] != b {
            return Err(AutodiffError::Shape(format!(
                "view_weighted_sum: {b} weight rows for {} examples",
                shape[0]
            )));
        }
        let data = self.value(x).data();
        let wd = self.value(w).data();
        let mut out = vec![T::zero(); b * inner];
        for (bi, dst) in out.chunks_mut(inner).enumerate() {
            for v in 0..views {
                let wv = wd[bi * views + v];
                let src = &data[(bi * views + v) * inner..][..inner];
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += wv * *s);
            }
        }
        let r = self.requires_grad(x) || self.requires_grad(w);
        Ok(self.push(Tensor::new(shape, out)?, Op::ViewWeightedSum { x, w, views }, r))
    }
}

pub(crate) fn max_backward<T: Scalar>(
    _tape: &Tape<'_, T>,
    x: Var,
    _views: usize,
    argmax: &[u32],
    g: &[T],
    bufs: &mut GradBufs<T>,
) {
    if let Some(dx) = bufs.get(x) {
        for (gi, &idx) in g.iter().zip(argmax) {
            dx[idx as usize] += *gi;
        }
    }
}

pub(crate) fn mean_backward<T: Scalar>(tape: &Tape<'_, T>, x: Var, views: usize, g: &[T], bufs: &mut GradBufs<T>) {
    let inner: usize = tape.shape(x)[1..].iter().product();
    let scale = T::one() / T::of(views as f64);
    if let Some(dx) = bufs.get(x) {
        for (bi, grow) in g.chunks(inner).enumerate() {
            for v in 0..views {
                let dst = &mut dx[(bi * views + v) * inner..][..inner];
                dst.iter_mut().zip(grow).for_each(|(d, gi)| *d += *gi * scale);
            }
        }
    }
}

pub(crate) fn weighted_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    x: Var,
    w: Var,
    views: usize,
    g: &[T],
    bufs: &mut GradBufs<T>,
) {
    let inner: usize = tape.shape(x)[1..].iter().product();
    let xd = tape.value(x).data();
    let wd = tape.value(w).data();
    if let Some(dw) = bufs.get(w) {
        for (bi, grow) in g.chunks(inner).enumerate() {
            for v in 0..views {
                let src = &xd[(bi * views + v) * inner..][..inner];
                dw[bi * views + v] += grow.iter().zip(src).map(|(a, b)| *a * *b).sum::<T>();
            }
        }
    }
    if let Some(dx) = bufs.get(x) {
        for (bi, grow) in g.chunks(inner).enumerate() {
            for v in 0..views {
                let wv = wd[bi * views + v];
                let dst = &mut dx[(bi * views + v) * inner..][..inner];
                dst.iter_mut().zip(grow).for_each(|(d, gi)| *d += wv * *gi);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{check_input_grad, coeffs, random};
    use super::*;
    use crate::autodiff::ParamStore;

    #[test]
    fn max_over_two_views() {
        let store = ParamStore::new();
        let mut tape = Tape::<f64>::new(&store);
        let x = tape.variable(Tensor::new([2, 2], vec![1.0, -2.0, 0.0, 5.0]).unwrap());
        let y = tape.view_max(x, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 5.0]);
        let x1 = tape.constant(Tensor::new([1, 2], vec![1.0, -2.0]).unwrap());
        assert_eq!(tape.view_max(x1, 1).map(|v| tape.value(v).clone()).unwrap().data(), &[1.0, -2.0]);
    }

    #[test]
    fn tied_views_route_to_the_first() {
        let store = ParamStore::new();
        let mut tape = Tape::<f64>::new(&store);
        let x = tape.variable(Tensor::full([3, 2], 1.0));
        let y = tape.view_max(x, 3).unwrap();
        let l = tape.dot(y, &[1.0, 1.0]).unwrap();
        let g = tape.backward(l).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn rejects_indivisible_batches() {
        let store = ParamStore::new();
        let mut tape = Tape::<f64>::new(&store);
        let x = tape.constant(Tensor::zeros([5, 2]));
        assert!(tape.view_max(x, 2).is_err());
        assert!(tape.view_mean(x, 0).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut x = random(&[6, 4], 1);
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v += i as f64 * 0.013;
        }
        let c = coeffs(8, 2);
        let err = check_input_grad(x.clone(), |t, x| {
            let y = t.view_max(x, 3).unwrap();
            t.dot(y, &c).unwrap()
        });
        assert!(err < 1e-7, "{err}");
        let err = check_input_grad(x.clone(), |t, x| {
            let y = t.view_mean(x, 3).unwrap();
            t.dot(y, &c).unwrap()
        });
        assert!(err < 1e-7, "{err}");
        let w = random(&[2, 3], 3);
        let err = check_input_grad(x.clone(), |t, x| {
            let w = t.constant(w.clone());
            let y = t.view_weighted_sum(x, w).unwrap();
            t.dot(y, &c).unwrap()
        });
        assert!(err < 1e-7, "{err}");
        let err = check_input_grad(w, |t, w| {
            let x = t.constant(x.clone());
            let y = t.view_weighted_sum(x, w).unwrap();
            t.dot(y, &c).unwrap()
        });
        assert!(err < 1e-7, "{err}");
    }
}
