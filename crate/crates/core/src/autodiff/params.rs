use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{AutodiffError, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Updated by the optimizer.
    Trainable,
    /// State carried between steps but never differentiated (BN running stats).
    Buffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor<T>,
    pub grad: Option<Tensor<T>>,
    pub adam: AdamState<T>,
}

impl<T: Scalar> Parameter<T> {
    fn new(name: String, kind: ParamKind, value: Tensor<T>) -> Self {
        let n = value.numel();
        Self {
            name,
            kind,
            value,
            grad: None,
            adam: AdamState {
                first_moment: vec![T::zero(); n],
                second_moment: vec![T::zero(); n],
                step: 0,
            },
        }
    }
}

/// Owns every parameter and buffer of a model. Layers refer to entries by
/// [`ParamId`], so sharing a layer between branches shares its storage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, kind: ParamKind, value: Tensor<T>) -> ParamId {
        self.params.push(Parameter::new(name.into(), kind, value));
        ParamId(self.params.len() - 1)
    }

    pub fn trainable(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.add(name, ParamKind::Trainable, value)
    }

    pub fn buffer(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.add(name, ParamKind::Buffer, value)
    }

    /// He-normal initialization: `N(0, 2 / fan_in)`.
    pub fn he_normal<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let n = shape.iter().product();
        let data = (0..n).map(|_| T::of(normal.sample(rng))).collect();
        self.trainable(name, Tensor::new(shape.to_vec(), data).expect("consistent shape"))
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter<T>)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Total element count of trainable entries.
    pub fn num_trainable(&self) -> usize {
        self.params
            .iter()
            .filter(|p| p.kind == ParamKind::Trainable)
            .map(|p| p.value.numel())
            .sum()
    }

    /// Adds `grads` into each parameter's gradient slot.
    pub fn accumulate(&mut self, grads: &super::Gradients<T>) {
        for (i, g) in grads.params.iter().enumerate() {
            let Some(g) = g else { continue };
            let p = &mut self.params[i];
            match &mut p.grad {
                Some(existing) => existing
                    .data_mut()
                    .iter_mut()
                    .zip(g.data())
                    .for_each(|(a, b)| *a += *b),
                slot @ None => *slot = Some(g.clone()),
            }
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad = None;
        }
    }

    /// Overwrites buffer values recorded during a training-mode forward pass.
    pub fn apply_updates(&mut self, updates: Vec<(ParamId, Tensor<T>)>) {
        for (id, value) in updates {
            self.params[id.0].value = value;
        }
    }

    /// Replaces values (not optimizer state) with those of `other`, entry by entry.
    pub fn copy_values_from(&mut self, other: &ParamStore<T>) -> Result<(), AutodiffError> {
        if other.len() != self.len() {
            return Err(AutodiffError::Shape(format!(
                "store has {} entries, source has {}",
                self.len(),
                other.len()
            )));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            if dst.value.shape() != src.value.shape() || dst.name != src.name {
                return Err(AutodiffError::Shape(format!(
                    "entry `{}` {:?} does not match `{}` {:?}",
                    dst.name,
                    dst.value.shape(),
                    src.name,
                    src.value.shape()
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(())
    }

    /// Same entries converted to another element type; optimizer state is reset.
    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Parameter::new(p.name.clone(), p.kind, p.value.cast()))
                .collect(),
        }
    }
}
