use rand::Rng;

use crate::autodiff::{AutodiffError, BnParams, Mode, ParamStore, Scalar, Tape, Tensor, Var};

pub(crate) fn batch_norm_params<T: Scalar>(store: &mut ParamStore<T>, name: &str, c: usize) -> BnParams {
    BnParams {
        gamma: store.trainable(format!("{name}.gamma"), Tensor::full([c], T::one())),
        beta: store.trainable(format!("{name}.beta"), Tensor::zeros([c])),
        running_mean: store.buffer(format!("{name}.running_mean"), Tensor::zeros([c])),
        running_var: store.buffer(format!("{name}.running_var"), Tensor::full([c], T::one())),
        tracked: store.buffer(format!("{name}.tracked"), Tensor::zeros([1])),
    }
}

/// Bias-free convolution followed by batch normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBn {
    pub weight: crate::autodiff::ParamId,
    pub bn: BnParams,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
}

impl ConvBn {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        rng: &mut R,
    ) -> Self {
        let weight = store.he_normal(
            format!("{name}.conv.weight"),
            &[c_out, c_in, kernel.0, kernel.1],
            c_in * kernel.0 * kernel.1,
            rng,
        );
        let bn = batch_norm_params(store, &format!("{name}.bn"), c_out);
        Self {
            weight,
            bn,
            stride,
            padding,
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, AutodiffError> {
        let w = tape.param(self.weight);
        let y = tape.conv2d(x, w, None, self.stride, self.padding)?;
        tape.batch_norm(y, &self.bn, mode)
    }
}

/// Two 1x3 conv/BN layers with a ReLU between them, added to the input (or
/// its 1x1 projection) and passed through a final ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub c_in: usize,
    pub c_out: usize,
    pub conv1: ConvBn,
    pub conv2: ConvBn,
    pub shortcut: Option<ConvBn>,
}

impl ResidualBlock {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        c_in: usize,
        c_out: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let conv1 = ConvBn::new(store, &format!("{name}.a"), c_in, c_out, (1, 3), (1, stride), (0, 1), rng);
        let conv2 = ConvBn::new(store, &format!("{name}.b"), c_out, c_out, (1, 3), (1, 1), (0, 1), rng);
        let shortcut = (stride != 1 || c_in != c_out)
            .then(|| ConvBn::new(store, &format!("{name}.proj"), c_in, c_out, (1, 1), (1, stride), (0, 0), rng));
        Self {
            c_in,
            c_out,
            conv1,
            conv2,
            shortcut,
        }
    }

    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, AutodiffError> {
        let c = tape.shape(x).get(1).copied().unwrap_or(0);
        if c != self.c_in {
            return Err(AutodiffError::Shape(format!(
                "residual block expects {} input channels, got {c}",
                self.c_in
            )));
        }
        let y = self.conv1.forward(tape, x, mode)?;
        let y = tape.relu(y)?;
        let y = self.conv2.forward(tape, y, mode)?;
        let s = match &self.shortcut {
            Some(p) => p.forward(tape, x, mode)?,
            None => x,
        };
        let sum = tape.add(y, s)?;
        tape.relu(sum)
    }
}
