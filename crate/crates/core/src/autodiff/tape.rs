//! The execution record and reverse sweep.

use super::ops::{conv, norm};
use super::{AutodiffError, ParamId, ParamStore, Scalar, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

pub(crate) enum Op<T> {
    Leaf,
    Param(ParamId),
    Conv2d(conv::ConvCache<T>),
    BatchNorm(norm::BnCache<T>),
    Tanh(Var),
    Relu(Var),
    Add(Var, Var),
    MaxPool { x: Var, argmax: Vec<u32> },
    AvgPool { x: Var, kernel: usize, stride: usize, padding: usize },
    Reshape(Var),
    Linear { x: Var, w: Var, b: Option<Var> },
    Softmax(Var),
    CrossEntropy { p: Var, labels: Vec<usize>, floor: T },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<T> },
    ViewMax { x: Var, views: usize, argmax: Vec<u32> },
    ViewMean { x: Var, views: usize },
    ViewWeightedSum { x: Var, w: Var, views: usize },
    Dot { x: Var, coeffs: Vec<T> },
}

pub(crate) struct Node<T> {
    pub value: Option<Tensor<T>>,
    pub op: Op<T>,
    pub requires_grad: bool,
}

/// Records a forward computation over parameters borrowed from a
/// [`ParamStore`] so that [`Tape::backward`] can replay the adjoints in exact
/// reverse order.
///
/// Running-statistic updates produced by training-mode batch normalization are
/// collected rather than written, see [`Tape::take_updates`].
pub struct Tape<'p, T: Scalar> {
    params: &'p ParamStore<T>,
    pub(crate) nodes: Vec<Node<T>>,
    param_vars: Vec<Option<Var>>,
    updates: Vec<(ParamId, Tensor<T>)>,
    record: bool,
    trace: Option<Vec<(String, Vec<usize>)>>,
}

/// Gradients produced by one reverse sweep.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub(crate) leaves: Vec<Option<Tensor<T>>>,
    pub(crate) params: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to a leaf created by [`Tape::variable`].
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(v.0).and_then(Option::as_ref)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(id.0).and_then(Option::as_ref)
    }
}

/// Per-node adjoint buffers, allocated on first write.
pub(crate) struct GradBufs<T> {
    slots: Vec<Option<Vec<T>>>,
    requires: Vec<bool>,
    lens: Vec<usize>,
}

impl<T: Scalar> GradBufs<T> {
    /// Mutable adjoint of `v`, or `None` when `v` does not need a gradient.
    pub fn get(&mut self, v: Var) -> Option<&mut [T]> {
        if !self.requires[v.0] {
            return None;
        }
        let len = self.lens[v.0];
        Some(self.slots[v.0].get_or_insert_with(|| vec![T::zero(); len]))
    }
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
            updates: Vec::new(),
            record: true,
            trace: None,
        }
    }

    /// A tape that skips backward caches; `backward` is unavailable.
    pub fn inference(params: &'p ParamStore<T>) -> Self {
        Self {
            record: false,
            ..Self::new(params)
        }
    }

    pub fn params(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub(crate) fn recording(&self) -> bool {
        self.record
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            requires_grad: requires_grad && self.record,
        });
        Var(self.nodes.len() - 1)
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf whose gradient is reported by [`Gradients::wrt`].
    pub fn variable(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// The parameter `id`; repeated calls return the same handle.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let trainable = self.params.get(id).kind == super::ParamKind::Trainable;
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            requires_grad: trainable && self.record,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => &self.params.get(*id).value,
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    pub(crate) fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub(crate) fn push_update(&mut self, id: ParamId, value: Tensor<T>) {
        self.updates.push((id, value));
    }

    /// Buffer updates (BN running statistics) recorded by the forward pass.
    pub fn take_updates(&mut self) -> Vec<(ParamId, Tensor<T>)> {
        std::mem::take(&mut self.updates)
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    /// Records `(label, shape of v)` when tracing is enabled.
    pub fn annotate(&mut self, label: impl Into<String>, v: Var) {
        if self.trace.is_some() {
            let shape = self.shape(v).to_vec();
            if let Some(t) = self.trace.as_mut() {
                t.push((label.into(), shape));
            }
        }
    }

    pub fn trace(&self) -> &[(String, Vec<usize>)] {
        self.trace.as_deref().unwrap_or(&[])
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, AutodiffError> {
        if !self.record {
            return Err(AutodiffError::NotRecorded);
        }
        if self.value(loss).numel() != 1 {
            return Err(AutodiffError::Shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let n = self.nodes.len();
        let mut bufs = GradBufs {
            slots: (0..n).map(|_| None).collect(),
            requires: self.nodes.iter().map(|nd| nd.requires_grad).collect(),
            lens: (0..n).map(|i| self.value(Var(i)).numel()).collect(),
        };
        let mut leaves: Vec<Option<Tensor<T>>> = (0..n).map(|_| None).collect();
        let mut params: Vec<Option<Tensor<T>>> = (0..self.params.len()).map(|_| None).collect();
        if let Some(g) = bufs.get(loss) {
            g[0] = T::one();
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = bufs.slots[i].take() else { continue };
            let out = Var(i);
            match &self.nodes[i].op {
                Op::Leaf => {
                    leaves[i] = Some(Tensor::new(self.shape(out).to_vec(), g)?);
                }
                Op::Param(id) => {
                    params[id.0] = Some(Tensor::new(self.shape(out).to_vec(), g)?);
                }
                op => self.backward_op(op, out, &g, &mut bufs),
            }
        }
        Ok(Gradients { leaves, params })
    }

    fn backward_op(&self, op: &Op<T>, out: Var, g: &[T], bufs: &mut GradBufs<T>) {
        use super::ops::{basic, pool, softmax, views};
        match op {
            Op::Leaf | Op::Param(_) => {}
            Op::Conv2d(cache) => conv::backward(self, cache, g, bufs),
            Op::BatchNorm(cache) => norm::backward(self, cache, g, bufs),
            Op::Tanh(x) => basic::tanh_backward(self, *x, out, g, bufs),
            Op::Relu(x) => basic::relu_backward(self, *x, out, g, bufs),
            Op::Add(a, b) => basic::add_backward(*a, *b, g, bufs),
            Op::Reshape(x) => basic::pass_backward(*x, g, bufs),
            Op::Linear { x, w, b } => basic::linear_backward(self, *x, *w, *b, g, bufs),
            Op::Dot { x, coeffs } => basic::dot_backward(*x, coeffs, g, bufs),
            Op::MaxPool { x, argmax } => pool::max_backward(*x, argmax, g, bufs),
            Op::AvgPool {
                x,
                kernel,
                stride,
                padding,
            } => pool::avg_backward(self, *x, *kernel, *stride, *padding, g, bufs),
            Op::Softmax(x) => softmax::softmax_backward(self, *x, out, g, bufs),
            Op::CrossEntropy { p, labels, floor } => {
                softmax::cross_entropy_backward(self, *p, labels, *floor, g, bufs)
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                softmax::fused_backward(self, *logits, labels, probs, g, bufs)
            }
            Op::ViewMax { x, views, argmax } => views::max_backward(self, *x, *views, argmax, g, bufs),
            Op::ViewMean { x, views } => views::mean_backward(self, *x, *views, g, bufs),
            Op::ViewWeightedSum { x, w, views } => views::weighted_backward(self, *x, *w, *views, g, bufs),
        }
    }
}
