use crate::autodiff::tape::{GradBufs, Op, Tape, Var};
use crate::autodiff::{AutodiffError, Scalar, Tensor};

fn pooled_width(op: &str, w: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize, AutodiffError> {
    if kernel == 0 || stride == 0 {
        return Err(AutodiffError::Shape(format!("{op}: kernel and stride must be positive")));
    }
    if kernel > w + 2 * padding {
        return Err(AutodiffError::Shape(format!(
            "{op}: window {kernel} exceeds padded width {}",
            w + 2 * padding
        )));
    }
    if padding >= kernel {
        return Err(AutodiffError::Shape(format!("{op}: padding {padding} must be below the kernel {kernel}")));
    }
    Ok((w + 2 * padding - kernel) / stride + 1)
}

impl<T: Scalar> Tape<'_, T> {
    /// Max pooling along the width of `[B, C, H, W]`; padded positions never win.
    pub fn max_pool_w(&mut self, x: Var, kernel: usize, stride: usize, padding: usize) -> Result<Var, AutodiffError> {
        let [b, c, h, w] = self.value(x).dims4("max_pool input")?;
        let ow = pooled_width("max_pool", w, kernel, stride, padding)?;
        let data = self.value(x).data();
        let rows = b * c * h;
        let mut out = Vec::with_capacity(rows * ow);
        let mut argmax = Vec::with_capacity(rows * ow);
        for r in 0..rows {
            let row = &data[r * w..][..w];
            for o in 0..ow {
                let start = (o * stride) as isize - padding as isize;
                let lo = start.max(0) as usize;
                let hi = ((start + kernel as isize) as usize).min(w);
                let mut best = lo;
                for i in lo + 1..hi {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                out.push(row[best]);
                argmax.push((r * w + best) as u32);
            }
        }
        let req = self.requires_grad(x);
        let argmax = if self.recording() { argmax } else { Vec::new() };
        Ok(self.push(Tensor::new([b, c, h, ow], out)?, Op::MaxPool { x, argmax }, req))
    }

    /// Average pooling along the width; padded positions count as zeros.
    pub fn avg_pool_w(&mut self, x: Var, kernel: usize, stride: usize, padding: usize) -> Result<Var, AutodiffError> {
        let [b, c, h, w] = self.value(x).dims4("avg_pool input")?;
        let ow = pooled_width("avg_pool", w, kernel, stride, padding)?;
        let data = self.value(x).data();
        let rows = b * c * h;
        let scale = T::one() / T::of(kernel as f64);
        let mut out = Vec::with_capacity(rows * ow);
        for r in 0..rows {
            let row = &data[r * w..][..w];
            for o in 0..ow {
                let start = (o * stride) as isize - padding as isize;
                let lo = start.max(0) as usize;
                let hi = ((start + kernel as isize) as usize).min(w);
                out.push(row[lo..hi].iter().copied().sum::<T>() * scale);
            }
        }
        let req = self.requires_grad(x);
        Ok(self.push(
            Tensor::new([b, c, h, ow], out)?,
            Op::AvgPool {
                x,
                kernel,
                stride,
                padding,
            },
            req,
        ))
    }
}

pub(crate) fn max_backward<T: Scalar>(x: Var, argmax: &[u32], g: &[T], bufs: &mut GradBufs<T>) {
    if let Some(dx) = bufs.get(x) {
        for (gi, &idx) in g.iter().zip(argmax) {
            dx[idx as usize] += *gi;
        }
    }
}

pub(crate) fn avg_backward<T: Scalar>(
    tape: &Tape<'_, T>,
    x: Var,
    kernel: usize,
    stride: usize,
    padding: usize,
    g: &[T],
    bufs: &mut GradBufs<T>,
) {
    let w = tape.shape(x)[3];
    let ow = (w + 2 * padding - kernel) / stride + 1;
    let scale = T::one() / T::of(kernel as f64);
    if let Some(dx) = bufs.get(x) {
        for (r, grow) in g.chunks(ow).enumerate() {
            let row = &mut dx[r * w..][..w];
            for (o, gi) in grow.iter().enumerate() {
                let start = (o * stride) as isize - padding as isize;
                let lo = start.max(0) as usize;
                let hi = ((start + kernel as isize) as usize).min(w);
                row[lo..hi].iter_mut().for_each(|d| *d += *gi * scale);
            }
        }
    }
}
