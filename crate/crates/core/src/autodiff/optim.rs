use super::{AutodiffError, ParamKind, ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment state lives on each parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Adam {
    pub config: AdamConfig,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config }
    }

    /// Updates every trainable entry from its accumulated gradient, then clears
    /// all gradients. Fails before touching anything if a gradient is missing.
    pub fn step<T: Scalar>(&self, store: &mut ParamStore<T>) -> Result<(), AutodiffError> {
        if let Some((_, p)) = store
            .iter()
            .find(|(_, p)| p.kind == ParamKind::Trainable && p.grad.is_none())
        {
            return Err(AutodiffError::MissingGradient { name: p.name.clone() });
        }
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (lr, eps) = (T::of(c.learning_rate), T::of(c.epsilon));
        for p in store.iter_mut() {
            if p.kind != ParamKind::Trainable {
                continue;
            }
            let grad = p.grad.take().expect("checked above");
            p.adam.step += 1;
            let t = p.adam.step as i32;
            let corr1 = T::one() - T::of(c.beta1.powi(t));
            let corr2 = T::one() - T::of(c.beta2.powi(t));
            let state = p
                .value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(p.adam.first_moment.iter_mut().zip(p.adam.second_moment.iter_mut()));
            for ((value, &g), (m, v)) in state {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *value -= lr * (*m / corr1) / ((*v / corr2).sqrt() + eps);
            }
        }
        store.zero_grad();
        Ok(())
    }
}
