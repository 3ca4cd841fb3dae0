use crate::autodiff::tape::{GradBufs, Op, Tape, Var};
use crate::autodiff::{gemm, gemm_new, AutodiffError, Mat, Scalar, Tensor};

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    batch: usize,
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeom {
    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn l(&self) -> usize {
        self.oh * self.ow
    }
}

pub(crate) struct ConvCache<T> {
    x: Var,
    w: Var,
    b: Option<Var>,
    cols: Vec<T>,
    geom: ConvGeom,
}

/// Output positions `lo..hi` along one axis whose input index
/// `o * stride + tap - pad` lands inside `0..len`.
fn valid_range(len: usize, out: usize, stride: usize, tap: usize, pad: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(tap).div_ceil(stride);
    if len + pad <= tap {
        return (0, 0);
    }
    let hi = ((len + pad - tap - 1) / stride + 1).min(out);
    (lo.min(hi), hi)
}

/// Unfolds `x` into a `[C*kH*kW, B*oH*oW]` row-major matrix.
fn im2col<T: Scalar>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let zero = T::zero();
    let mut cols = Vec::with_capacity(g.k() * g.batch * g.l());
    for c in 0..g.c_in {
        for i in 0..g.kh {
            let (y0, y1) = valid_range(g.h, g.oh, g.sh, i, g.ph);
            for j in 0..g.kw {
                let (x0, x1) = valid_range(g.w, g.ow, g.sw, j, g.pw);
                for b in 0..g.batch {
                    let plane = &x[(b * g.c_in + c) * g.h * g.w..][..g.h * g.w];
                    for oy in 0..g.oh {
                        if oy < y0 || oy >= y1 || x0 == x1 {
                            cols.resize(cols.len() + g.ow, zero);
                            continue;
                        }
                        let src = &plane[(oy * g.sh + i - g.ph) * g.w..][..g.w];
                        let start = x0 * g.sw + j - g.pw;
                        cols.resize(cols.len() + x0, zero);
                        if g.sw == 1 {
                            cols.extend_from_slice(&src[start..start + x1 - x0]);
                        } else {
                            cols.extend(src[start..].iter().step_by(g.sw).take(x1 - x0));
                        }
                        cols.resize(cols.len() + g.ow - x1, zero);
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters `dcols` back onto `dx`.
fn col2im<T: Scalar>(dcols: &[T], g: &ConvGeom, dx: &mut [T]) {
    let n = g.batch * g.l();
    for c in 0..g.c_in {
        for i in 0..g.kh {
            let (y0, y1) = valid_range(g.h, g.oh, g.sh, i, g.ph);
            for j in 0..g.kw {
                let (x0, x1) = valid_range(g.w, g.ow, g.sw, j, g.pw);
                if x0 == x1 {
                    continue;
                }
                let row = (c * g.kh + i) * g.kw + j;
                let src = &dcols[row * n..(row + 1) * n];
                for b in 0..g.batch {
                    let plane = &mut dx[(b * g.c_in + c) * g.h * g.w..][..g.h * g.w];
                    for oy in y0..y1 {
                        let dst = &mut plane[(oy * g.sh + i - g.ph) * g.w..][..g.w];
                        let from = &src[b * g.l() + oy * g.ow..][x0..x1];
                        let start = x0 * g.sw + j - g.pw;
                        if g.sw == 1 {
                            for (d, s) in dst[start..start + from.len()].iter_mut().zip(from) {
                                *d += *s;
                            }
                        } else {
                            for (d, s) in dst[start..].iter_mut().step_by(g.sw).zip(from) {
                                *d += *s;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn out_extent(name: &str, len: usize, pad: usize, k: usize, stride: usize) -> Result<usize, AutodiffError> {
    if stride == 0 {
        return Err(AutodiffError::Shape(format!("conv2d {name} stride must be positive")));
    }
    if len + 2 * pad < k {
        return Err(AutodiffError::Shape(format!(
            "conv2d {name}: kernel {k} exceeds padded extent {}",
            len + 2 * pad
        )));
    }
    Ok((len + 2 * pad - k) / stride + 1)
}

impl<T: Scalar> Tape<'_, T> {
    /// Cross-correlation of `x [B, C, H, W]` with `w [O, C, kH, kW]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Result<Var, AutodiffError> {
        let [batch, c_in, h, wd] = self.value(x).dims4("conv2d input")?;
        let [c_out, wc, kh, kw] = self.value(w).dims4("conv2d weight")?;
        if wc != c_in {
            return Err(AutodiffError::Shape(format!(
                "conv2d input channels: input has {c_in}, weight expects {wc}"
            )));
        }
        if let Some(b) = b {
            if self.shape(b) != [c_out] {
                return Err(AutodiffError::Shape(format!(
                    "conv2d bias: expected [{c_out}], got {:?}",
                    self.shape(b)
                )));
            }
        }
        let oh = out_extent("height", h, padding.0, kh, stride.0)?;
        let ow = out_extent("width", wd, padding.1, kw, stride.1)?;
        let geom = ConvGeom {
            batch,
            c_in,
            h,
            w: wd,
            c_out,
            kh,
            kw,
            sh: stride.0,
            sw: stride.1,
            ph: padding.0,
            pw: padding.1,
            oh,
            ow,
        };
        let cols = im2col(self.value(x).data(), &geom);
        let n = batch * geom.l();
        let mat = gemm_new(
            Mat::row_major(self.value(w).data(), c_out, geom.k()),
            Mat::row_major(&cols, geom.k(), n),
        );
        // [O, B*L] -> [B, O, L]
        let l = geom.l();
        let bias = b.map(|b| self.value(b).data());
        let mut out = Vec::with_capacity(c_out * n);
        for bi in 0..batch {
            for o in 0..c_out {
                let bo = bias.map_or(T::zero(), |bv| bv[o]);
                out.extend(mat[o * n + bi * l..][..l].iter().map(|&v| v + bo));
            }
        }
        let requires = self.requires_grad(x) || self.requires_grad(w) || b.is_some_and(|b| self.requires_grad(b));
        let cache = ConvCache {
            x,
            w,
            b,
            cols: if self.recording() { cols } else { Vec::new() },
            geom,
        };
        Ok(self.push(Tensor::new([batch, c_out, oh, ow], out)?, Op::Conv2d(cache), requires))
    }
}

pub(crate) fn backward<T: Scalar>(tape: &Tape<'_, T>, cache: &ConvCache<T>, g: &[T], bufs: &mut GradBufs<T>) {
    let geom = &cache.geom;
    let (l, n, k) = (geom.l(), geom.batch * geom.l(), geom.k());
    // [B, O, L] -> [O, B*L]
    let mut gmat = Vec::with_capacity(geom.c_out * n);
    for o in 0..geom.c_out {
        for bi in 0..geom.batch {
            gmat.extend_from_slice(&g[(bi * geom.c_out + o) * l..][..l]);
        }
    }
    if let Some(b) = cache.b {
        if let Some(db) = bufs.get(b) {
            for o in 0..geom.c_out {
                db[o] += gmat[o * n..(o + 1) * n].iter().copied().sum::<T>();
            }
        }
    }
    if let Some(dw) = bufs.get(cache.w) {
        gemm(
            Mat::row_major(&gmat, geom.c_out, n),
            Mat::transposed(&cache.cols, k, n),
            T::one(),
            dw,
        );
    }
    if tape.requires_grad(cache.x) {
        let dcols = gemm_new(
            Mat::transposed(tape.value(cache.w).data(), geom.c_out, k),
            Mat::row_major(&gmat, geom.c_out, n),
        );
        if let Some(dx) = bufs.get(cache.x) {
            col2im(&dcols, geom, dx);
        }
    }
}
