use crate::autodiff::tape::{GradBufs, Op, Tape, Var};
use crate::autodiff::{gemm, AutodiffError, Mat, Scalar, Tensor};

impl<T: Scalar> Tape<'_, T> {
    pub fn tanh(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let t = self.value(x);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v.tanh()).collect())?;
        let r = self.requires_grad(x);
        Ok(self.push(out, Op::Tanh(x), r))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, AutodiffError> {
        let t = self.value(x);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v.max(T::zero())).collect())?;
        let r = self.requires_grad(x);
        Ok(self.push(out, Op::Relu(x), r))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(AutodiffError::Shape(format!(
                "add: {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let out = Tensor::new(
            ta.shape().to_vec(),
            ta.data().iter().zip(tb.data()).map(|(x, y)| *x + *y).collect(),
        )?;
        let r = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(out, Op::Add(a, b), r))
    }

    pub fn reshape(&mut self, x: Var, shape: impl Into<Vec<usize>>) -> Result<Var, AutodiffError> {
        let out = self.value(x).clone().reshaped(shape)?;
        let r = self.requires_grad(x);
        Ok(self.push(out, Op::Reshape(x), r))
    }

    /// `x [B, D] · wᵀ [D, K] + b` with `w [K, D]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, AutodiffError> {
        let [batch, d] = self.value(x).dims2("linear input")?;
        let [k, wd] = self.value(w).dims2("linear weight")?;
        if wd != d {
            return Err(AutodiffError::Shape(format!(
                "linear inner dimension: input has {d}, weight expects {wd}"
            )));
        }
        let mut out = vec![T::zero(); batch * k];
        if let Some(b) = b {
            let bias = self.value(b);
            if bias.shape() != [k] {
                return Err(AutodiffError::Shape(format!(
                    "linear bias: expected [{k}], got {:?}",
                    bias.shape()
                )));
            }
            for row in out.chunks_mut(k) {
                row.copy_from_slice(bias.data());
            }
        }
        gemm(
            Mat::row_major(self.value(x).data(), batch, d),
            Mat::transposed(self.value(w).data(), k, d),
            T::one(),
            &mut out,
        );
        let r = self.requires_grad(x) || self.requires_grad(w) || b.is_some_and(|b| self.requires_grad(b));
        Ok(self.push(Tensor::new([batch, k], out)?, Op::Linear { x, w, b }, r))
    }

    /// Scalar `Σ xᵢ·cᵢ` against constant coefficients.
    pub fn dot(&mut self, x: Var, coeffs: &[T]) -> Result<Var, AutodiffError> {
        let t = self.value(x);
        if t.numel() != coeffs.len() {
            return Err(AutodiffError::Shape(format!(
                "dot: {} values against {} coefficients",
                t.numel(),
                coeffs.len()
            )));
        }
        let s = t.data().iter().zip(coeffs).map(|(a, b)| *a * *b).sum();
        let r = self.requires_grad(x);
        Ok(self.push(
            Tensor::scalar(s),
            Op::Dot {
                x,
                coeffs: coeffs.to_vec(),
            },
            r,
        ))
    }
}

pub(crate) fn tanh_backward<T: Scalar>(tape: &Tape<'_, T>, x: Var, out: Var, g: &[T], bufs: &mut GradBufs<T>) {
    let y = tape.value(out).data();
    if let Some(dx) = bufs.get(x) {
        for ((d, gi), yi) in dx.iter_mut().zip(g).zip(y) {
            *d += *gi * (T::one() - *yi * *yi);
        }
    }
}

pub(crate) fn relu_backward<T: Scalar>(tape: &Tape<'_, T>, x: Var, _out: Var, g: &[T], bufs: &mut GradBufs<T>) {
    let xv = tape.value(x).data();
    if let Some(dx) = bufs.get(x) {
        for ((d, gi), xi) in dx.iter_mut().zip(g).zip(xv) {
            if *xi > T::zero() {
                *d += *gi;
            }
        }
    }
}

pub(crate) fn add_backward<T: Scalar>(a: Var, b: Var, g: &[T], bufs: &mut GradBufs<T>) {
    pass_backward(a, g, bufs);
    pass_backward(b, g, bufs);
}

pub(crate) fn pass_backward<T: Scalar>(x: Var, g: &[T], bufs: &mut GradBufs<T>) {
    if let Some(dx) = bufs.get(x) {
        dx.iter_mut().zip(g).for_each(|(d, gi)| *d += *gi);
    }
}

pub(crate) fn linear_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    x: Var,
    w: Var,
    b: Option<Var>,
    g: &[T],
    bufs: &mut GradBufs<T>,
) {
    let [batch, d] = [tape.shape(x)[0], tape.shape(x)[1]];
    let k = tape.shape(w)[0];
    if let Some(b) = b {
        if let Some(db) = bufs.get(b) {
            for row in g.chunks(k) {
                db.iter_mut().zip(row).for_each(|(d, gi)| *d += *gi);
            }
        }
    }
    if let Some(dw) = bufs.get(w) {
        gemm(
            Mat::transposed(g, batch, k),
            Mat::row_major(tape.value(x).data(), batch, d),
            T::one(),
            dw,
        );
    }
    if let Some(dx) = bufs.get(x) {
        gemm(
            Mat::row_major(g, batch, k),
            Mat::row_major(tape.value(w).data(), k, d),
            T::one(),
            dx,
        );
    }
}

pub(crate) fn dot_backward<T: Scalar>(x: Var, coeffs: &[T], g: &[T], bufs: &mut GradBufs<T>) {
    if let Some(dx) = bufs.get(x) {
        dx.iter_mut().zip(coeffs).for_each(|(d, c)| *d += g[0] * *c);
    }
}
