//! Base residual CNN and the multi-antenna fusion models built from it.
//!
//! Multi-antenna inputs `[B, N_r, 2, N]` are folded into `[B·N_r, 1, 2, N]` so
//! one pass of the shared `cnn1` serves every antenna; the fused features are
//! then reduced back to `[B, …]` by a view operation.

mod base;
mod layers;
mod persist;
mod wlm;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::autodiff::{AutodiffError, Mode, ParamKind, ParamStore, Scalar, Tape, Tensor, Var};

pub use base::{BaseCnn, STAGE_BLOCKS, STAGE_CHANNELS};
pub use layers::{ConvBn, ResidualBlock};
pub use persist::{decode_header, encode_header};
pub use wlm::{Wlm, WLM_CHANNELS};

#[derive(Debug, thiserror::Error)]
pub enum ArchError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid architecture config: {0}")]
    Config(String),
    #[error("{kind} expects {expected} antennas, input has {got}")]
    Antennas { kind: ArchKind, expected: usize, got: usize },
    #[error("{0} has no end-to-end logits; it fuses decisions")]
    NoLogits(ArchKind),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchKind {
    Base,
    Mvcnn,
    Wlcnn,
    CoAmc,
}

impl ArchKind {
    pub const ALL: [ArchKind; 4] = [ArchKind::Base, ArchKind::Mvcnn, ArchKind::Wlcnn, ArchKind::CoAmc];

    pub fn name(self) -> &'static str {
        match self {
            ArchKind::Base => "base",
            ArchKind::Mvcnn => "mvcnn",
            ArchKind::Wlcnn => "wlcnn",
            ArchKind::CoAmc => "coamc",
        }
    }
}

impl fmt::Display for ArchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchKind {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        ArchKind::ALL
            .into_iter()
            .find(|k| k.name() == lower || (lower == "co-amc" && *k == ArchKind::CoAmc))
            .ok_or_else(|| ArchError::Config(format!("unknown arch `{s}`")))
    }
}

/// Reduction applied across antennas by the multi-view model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViewPool {
    #[default]
    Max,
    Mean,
}

impl FromStr for ViewPool {
    type Err = ArchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(ViewPool::Max),
            "mean" => Ok(ViewPool::Mean),
            _ => Err(ArchError::Config(format!("unknown view pool `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchConfig {
    pub kind: ArchKind,
    pub n_antennas: usize,
    pub frame_len: usize,
    pub n_classes: usize,
    pub width_multiplier: f64,
    pub view_pool: ViewPool,
}

impl ArchConfig {
    /// Full-width layout on 512-sample frames with 20 classes.
    pub fn nominal(kind: ArchKind, n_antennas: usize) -> Self {
        Self {
            kind,
            n_antennas,
            frame_len: 512,
            n_classes: 20,
            width_multiplier: 1.0,
            view_pool: ViewPool::Max,
        }
    }

    pub fn validate(&self) -> Result<(), ArchError> {
        let bad = |m: String| Err(ArchError::Config(m));
        if self.n_antennas == 0 {
            return bad("n_antennas must be at least 1".into());
        }
        if self.kind == ArchKind::Base && self.n_antennas != 1 {
            return bad("the base model takes exactly one antenna".into());
        }
        if self.frame_len < 32 || !self.frame_len.is_multiple_of(32) {
            return bad(format!("frame_len {} must be a positive multiple of 32", self.frame_len));
        }
        if self.n_classes < 2 {
            return bad("n_classes must be at least 2".into());
        }
        if !(self.width_multiplier > 0.0 && self.width_multiplier <= 4.0) {
            return bad(format!("width_multiplier {} outside (0, 4]", self.width_multiplier));
        }
        Ok(())
    }
}

/// Class probabilities and argmax decisions for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    /// `[B, K]`.
    pub probabilities: Tensor<T>,
    pub decisions: Vec<usize>,
}

/// Index of the largest value, lowest index on ties.
pub fn argmax<T: PartialOrd + Copy>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// A model and the parameters it owns. Every antenna branch refers to the same
/// `cnn1` entries of `store`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T: Scalar> {
    config: ArchConfig,
    store: ParamStore<T>,
    base: BaseCnn,
    wlm: Option<Wlm>,
}

impl<T: Scalar> Model<T> {
    pub fn new<R: Rng + ?Sized>(config: ArchConfig, rng: &mut R) -> Result<Self, ArchError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let base = BaseCnn::new(&mut store, config.width_multiplier, config.n_classes, rng);
        let wlm = (config.kind == ArchKind::Wlcnn).then(|| Wlm::new(&mut store, config.frame_len, rng));
        Ok(Self {
            config,
            store,
            base,
            wlm,
        })
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn base(&self) -> &BaseCnn {
        &self.base
    }

    pub fn wlm(&self) -> Option<&Wlm> {
        self.wlm.as_ref()
    }

    /// Trainable scalars whose entry names start with `prefix`.
    pub fn count_params(&self, prefix: &str) -> usize {
        self.store
            .iter()
            .filter(|(_, p)| p.kind == ParamKind::Trainable && p.name.starts_with(prefix))
            .map(|(_, p)| p.value.numel())
            .sum()
    }

    pub fn num_params(&self) -> usize {
        self.store.num_trainable()
    }

    /// Same model with another element type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config,
            store: self.store.cast(),
            base: self.base.clone(),
            wlm: self.wlm.clone(),
        }
    }

    /// Same architecture, with a different antenna count and kind, reusing
    /// these parameters. Fails if the parameter sets differ.
    pub fn reconfigured(&self, kind: ArchKind, n_antennas: usize) -> Result<Self, ArchError> {
        let config = ArchConfig {
            kind,
            n_antennas,
            ..self.config
        };
        config.validate()?;
        if (kind == ArchKind::Wlcnn) != self.wlm.is_some() {
            return Err(ArchError::Config(format!(
                "cannot reuse {} parameters for {kind}",
                self.config.kind
            )));
        }
        Ok(Self {
            config,
            ..self.clone()
        })
    }

    fn fold(&self, tape: &mut Tape<'_, T>, x: Var, check: bool) -> Result<(Var, usize, usize), ArchError> {
        let shape = tape.shape(x).to_vec();
        let [b, v, iq, n] = match shape[..] {
            [b, v, iq, n] => [b, v, iq, n],
            _ => return Err(AutodiffError::Shape(format!("model input must be [B, N_r, 2, N], got {shape:?}")).into()),
        };
        if iq != 2 || n != self.config.frame_len {
            return Err(AutodiffError::Shape(format!(
                "model input must be [B, N_r, 2, {}], got {shape:?}",
                self.config.frame_len
            ))
            .into());
        }
        if check && v != self.config.n_antennas {
            return Err(ArchError::Antennas {
                kind: self.config.kind,
                expected: self.config.n_antennas,
                got: v,
            });
        }
        let folded = tape.reshape(x, [b * v, 1, 2, n])?;
        Ok((folded, b, v))
    }

    /// Base CNN logits per antenna: `[B, N_r, 2, N]` to `[B·N_r, K]`.
    pub fn branch_logits(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, ArchError> {
        let (folded, _, _) = self.fold(tape, x, false)?;
        let f = self.base.cnn1(tape, folded, mode)?;
        Ok(self.base.cnn2(tape, f, mode)?)
    }

    /// Softmax-normalized combining weights `[B, N_r]` (weight-learning model only).
    pub fn wlm_weights(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, ArchError> {
        let wlm = self
            .wlm
            .as_ref()
            .ok_or_else(|| ArchError::Config(format!("{} has no weight-learning module", self.config.kind)))?;
        let (folded, b, v) = self.fold(tape, x, true)?;
        let raw = wlm.forward(tape, folded, mode)?;
        let raw = tape.reshape(raw, [b, v])?;
        Ok(tape.softmax(raw)?)
    }

    /// End-to-end logits `[B, K]`; not defined for decision fusion.
    pub fn logits(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, ArchError> {
        let kind = self.config.kind;
        if kind == ArchKind::CoAmc {
            return Err(ArchError::NoLogits(kind));
        }
        let (folded, _, v) = self.fold(tape, x, true)?;
        let features = self.base.cnn1(tape, folded, mode)?;
        let fused = match kind {
            ArchKind::Base => features,
            ArchKind::Mvcnn => match self.config.view_pool {
                ViewPool::Max => tape.view_max(features, v)?,
                ViewPool::Mean => tape.view_mean(features, v)?,
            },
            ArchKind::Wlcnn => {
                let w = self.wlm_weights(tape, x, mode)?;
                tape.view_weighted_sum(features, w)?
            }
            ArchKind::CoAmc => unreachable!(),
        };
        tape.annotate("fusion", fused);
        Ok(self.base.cnn2(tape, fused, mode)?)
    }

    /// Class probabilities `[B, K]`; decision fusion averages per-antenna
    /// distributions.
    pub fn probabilities(&self, tape: &mut Tape<'_, T>, x: Var, mode: Mode) -> Result<Var, ArchError> {
        if self.config.kind == ArchKind::CoAmc {
            let v = tape.shape(x).get(1).copied().unwrap_or(0);
            if v != self.config.n_antennas {
                return Err(ArchError::Antennas {
                    kind: self.config.kind,
                    expected: self.config.n_antennas,
                    got: v,
                });
            }
            let logits = self.branch_logits(tape, x, mode)?;
            let p = tape.softmax(logits)?;
            return Ok(tape.view_mean(p, v)?);
        }
        let logits = self.logits(tape, x, mode)?;
        Ok(tape.softmax(logits)?)
    }

    /// Mean cross-entropy. Decision fusion is trained per antenna: every
    /// antenna slice of `x` is an independent single-antenna example.
    pub fn loss(&self, tape: &mut Tape<'_, T>, x: Var, labels: &[usize], mode: Mode) -> Result<Var, ArchError> {
        if self.config.kind == ArchKind::CoAmc {
            let v = tape.shape(x).get(1).copied().unwrap_or(1);
            let logits = self.branch_logits(tape, x, mode)?;
            let repeated: Vec<usize> = labels.iter().flat_map(|&l| std::iter::repeat_n(l, v)).collect();
            return Ok(tape.softmax_cross_entropy(logits, &repeated)?);
        }
        let logits = self.logits(tape, x, mode)?;
        Ok(tape.softmax_cross_entropy(logits, labels)?)
    }

    /// Eval-mode probabilities and argmax decisions for `x [B, N_r, 2, N]`.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Prediction<T>, ArchError> {
        let mut tape = Tape::inference(&self.store);
        let xv = tape.constant(x.clone());
        let p = self.probabilities(&mut tape, xv, Mode::Eval)?;
        let probabilities = tape.value(p).clone();
        let k = self.config.n_classes;
        let decisions = probabilities.data().chunks(k).map(argmax).collect();
        Ok(Prediction {
            probabilities,
            decisions,
        })
    }

    /// Per-layer output shapes (batch dimension included) of one train-mode
    /// forward pass on zeros.
    pub fn trace_shapes(&self, batch: usize) -> Result<Vec<(String, Vec<usize>)>, ArchError> {
        let mut tape = Tape::inference(&self.store);
        tape.enable_trace();
        let c = &self.config;
        let x = tape.constant(Tensor::zeros([batch, c.n_antennas, 2, c.frame_len]));
        self.probabilities(&mut tape, x, Mode::Train)?;
        Ok(tape.trace().to_vec())
    }

    /// One train-mode pass whose running statistics are kept; used to make
    /// eval mode available without training.
    pub fn warm_up(&mut self, x: &Tensor<T>) -> Result<(), ArchError> {
        let updates = {
            let mut tape = Tape::inference(&self.store);
            let xv = tape.constant(x.clone());
            self.probabilities(&mut tape, xv, Mode::Train)?;
            tape.take_updates()
        };
        self.store.apply_updates(updates);
        Ok(())
    }
}
