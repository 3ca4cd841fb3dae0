use rand::Rng;

use super::layers::{ConvBn, ResidualBlock};
use crate::autodiff::{AutodiffError, Mode, ParamId, ParamStore, Scalar, Tape, Tensor, Var};

/// Blocks per stage of the 34-layer layout.
pub const STAGE_BLOCKS: [usize; 4] = [3, 4, 6, 3];
/// Nominal channels per stage.
pub const STAGE_CHANNELS: [usize; 4] = [64, 128, 256, 512];

pub(crate) fn scaled(channels: usize, width: f64) -> usize {
    ((channels as f64 * width).round() as usize).max(1)
}

/// The single-antenna residual network, split into the feature extractor
/// `cnn1` (stem, max pool, first stage) and the head `cnn2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseCnn {
    pub stem: ConvBn,
    pub cnn1_blocks: Vec<ResidualBlock>,
    pub cnn2_blocks: Vec<ResidualBlock>,
    pub fc_weight: ParamId,
    pub fc_bias: ParamId,
}

impl BaseCnn {
    pub fn new<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        width: f64,
        n_classes: usize,
        rng: &mut R,
    ) -> Self {
        let ch = STAGE_CHANNELS.map(|c| scaled(c, width));
        let stem = ConvBn::new(store, "cnn1.stem", 1, ch[0], (2, 7), (1, 2), (0, 3), rng);
        let cnn1_blocks = (0..STAGE_BLOCKS[0])
            .map(|i| ResidualBlock::new(store, &format!("cnn1.stage1.{i}"), ch[0], ch[0], 1, rng))
            .collect();
        let mut cnn2_blocks = Vec::new();
        for stage in 1..4 {
            for i in 0..STAGE_BLOCKS[stage] {
                let (c_in, stride) = if i == 0 { (ch[stage - 1], 2) } else { (ch[stage], 1) };
                let name = format!("cnn2.stage{}.{i}", stage + 1);
                cnn2_blocks.push(ResidualBlock::new(store, &name, c_in, ch[stage], stride, rng));
            }
        }
        let fc_weight = store.he_normal("cnn2.fc.weight", &[n_classes, ch[3]], ch[3], rng);
        let fc_bias = store.trainable("cnn2.fc.bias", Tensor::zeros([n_classes]));
        Self {
            stem,
            cnn1_blocks,
            cnn2_blocks,
            fc_weight,
            fc_bias,
        }
    }

    /// `[B, 1, 2, N]` to `[B, C, 1, N/4]`.
    pub fn cnn1<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, AutodiffError> {
        let y = self.stem.forward(tape, x, mode)?;
        let y = tape.tanh(y)?;
        tape.annotate("cnn1.conv", y);
        let mut y = tape.max_pool_w(y, 3, 2, 1)?;
        tape.annotate("cnn1.maxpool", y);
        for b in &self.cnn1_blocks {
            y = b.forward(tape, y, mode)?;
        }
        tape.annotate("cnn1.stage1", y);
        Ok(y)
    }

    /// Features to class logits `[B, K]`.
    pub fn cnn2<T: Scalar>(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, AutodiffError> {
        let mut y = x;
        let mut start = 0;
        for (stage, &n) in STAGE_BLOCKS.iter().enumerate().skip(1) {
            for b in &self.cnn2_blocks[start..start + n] {
                y = b.forward(tape, y, mode)?;
            }
            start += n;
            tape.annotate(format!("cnn2.stage{}", stage + 1), y);
        }
        let width = tape.shape(y)[3];
        let y = tape.avg_pool_w(y, width, 1, 0)?;
        tape.annotate("cnn2.avgpool", y);
        let batch = tape.shape(y)[0];
        let c = tape.shape(y)[1];
        let flat = tape.reshape(y, [batch, c])?;
        let (w, b) = (tape.param(self.fc_weight), tape.param(self.fc_bias));
        let logits = tape.linear(flat, w, Some(b))?;
        tape.annotate("cnn2.fc", logits);
        Ok(logits)
    }
}
