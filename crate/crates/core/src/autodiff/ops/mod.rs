pub(crate) mod basic;
pub(crate) mod conv;
pub(crate) mod norm;
pub(crate) mod pool;
pub mod softmax;
pub(crate) mod views;

pub use norm::{BnParams, BN_EPS, BN_MOMENTUM};

/// Batch-normalization behaviour of a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Running statistics.
    Eval,
}

#[cfg(test)]
pub(crate) mod testutil {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::autodiff::{ParamStore, Tape, Tensor, Var};

    pub fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Compares the reverse-mode gradient of `f` at `x` with central differences.
    pub fn check_input_grad<F>(x: Tensor<f64>, f: F) -> f64
    where
        F: Fn(&mut Tape<'_, f64>, Var) -> Var,
    {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store);
        let v = tape.variable(x.clone());
        let out = f(&mut tape, v);
        let grads = tape.backward(out).unwrap();
        let analytic = grads.wrt(v).map(|t| t.data().to_vec()).unwrap_or(vec![0.0; x.numel()]);
        let eval = |t: Tensor<f64>| {
            let mut tape = Tape::new(&store);
            let v = tape.variable(t);
            let out = f(&mut tape, v);
            tape.value(out).item()
        };
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = x.clone();
            plus.data_mut()[i] += h;
            let mut minus = x.clone();
            minus.data_mut()[i] -= h;
            let numeric = (eval(plus) - eval(minus)) / (2.0 * h);
            let err = (numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-3);
            worst = worst.max(err);
        }
        worst
    }

    /// Random projection weights turning any tensor into a scalar loss.
    pub fn coeffs(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0EF);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }
}
