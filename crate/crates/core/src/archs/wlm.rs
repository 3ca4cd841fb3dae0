use rand::Rng;

use super::layers::{ConvBn, ResidualBlock};
use crate::autodiff::{AutodiffError, Mode, ParamId, ParamStore, Scalar, Tape, Tensor, Var};

/// Filters in every layer of the weight-learning module.
pub const WLM_CHANNELS: usize = 16;

/// Maps one antenna's raw `[1, 2, N]` signal to a scalar combining weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Wlm {
    pub stem: ConvBn,
    pub blocks: Vec<ResidualBlock>,
    pub fc_weight: ParamId,
    pub fc_bias: ParamId,
}

impl Wlm {
    pub fn new<T: Scalar, R: Rng + ?Sized>(store: &mut ParamStore<T>, frame_len: usize, rng: &mut R) -> Self {
        let c = WLM_CHANNELS;
        let stem = ConvBn::new(store, "wlm.stem", 1, c, (2, 7), (1, 2), (0, 3), rng);
        let blocks = (0..3)
            .map(|i| ResidualBlock::new(store, &format!("wlm.block{i}"), c, c, 2, rng))
            .collect();
        let flat = c * frame_len / 16;
        let fc_weight = store.he_normal("wlm.fc.weight", &[1, flat], flat, rng);
        let fc_bias = store.trainable("wlm.fc.bias", Tensor::zeros([1]));
        Self {
            stem,
            blocks,
            fc_weight,
            fc_bias,
        }
    }

    /// `[B, 1, 2, N]` to unnormalized weights `[B, 1]`.
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, AutodiffError> {
        let y = self.stem.forward(tape, x, mode)?;
        let mut y = tape.tanh(y)?;
        tape.annotate("wlm.conv", y);
        for (i, b) in self.blocks.iter().enumerate() {
            y = b.forward(tape, y, mode)?;
            tape.annotate(format!("wlm.block{}", i + 1), y);
        }
        let batch = tape.shape(y)[0];
        let flat: usize = tape.shape(y)[1..].iter().product();
        let y = tape.reshape(y, [batch, flat])?;
        let (w, b) = (tape.param(self.fc_weight), tape.param(self.fc_bias));
        let out = tape.linear(y, w, Some(b))?;
        tape.annotate("wlm.fc", out);
        Ok(out)
    }
}
