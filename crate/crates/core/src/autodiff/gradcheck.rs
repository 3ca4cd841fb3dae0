use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AutodiffError, ParamKind, ParamStore, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
    /// Entries sampled per parameter; 0 checks every entry.
    pub samples_per_param: usize,
    /// Skip entries where the loss is not smooth within `step`: the central
    /// quotient changes between `step` and `step / 2`, or the second
    /// difference fails to scale with the step (a kink at the point itself).
    pub skip_kinks: bool,
    /// Relative size of either discrepancy that marks a kink.
    pub kink_tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            floor: 1e-6,
            samples_per_param: 0,
            skip_kinks: true,
            kink_tolerance: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.params.iter().map(|p| p.checked).sum()
    }

    pub fn skipped(&self) -> usize {
        self.params.iter().map(|p| p.skipped).sum()
    }

    /// Parameters whose worst error reaches `tolerance`.
    pub fn violations(&self, tolerance: f64) -> Vec<&ParamCheck> {
        self.params.iter().filter(|p| p.max_rel_error >= tolerance).collect()
    }
}

fn rel_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Compares reverse-mode gradients of the scalar built by `loss` with central
/// differences over every trainable entry of `store`.
pub fn check_gradients<F>(store: &ParamStore<f64>, loss: F, config: &GradCheckConfig) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape<'_, f64>) -> Result<Var, AutodiffError>,
{
    let eval = |s: &ParamStore<f64>| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new(s);
        let l = loss(&mut tape)?;
        Ok(tape.value(l).item())
    };
    let grads = {
        let mut tape = Tape::new(store);
        let l = loss(&mut tape)?;
        tape.backward(l)?
    };
    let center = eval(store)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut work = store.clone();
    let mut report = GradCheckReport::default();
    for (id, p) in store.iter() {
        if p.kind != ParamKind::Trainable {
            continue;
        }
        let n = p.value.numel();
        let indices: Vec<usize> = if config.samples_per_param == 0 || config.samples_per_param >= n {
            (0..n).collect()
        } else {
            sample(&mut rng, n, config.samples_per_param).into_vec()
        };
        let analytic = grads.param(id).map(|g| g.data().to_vec()).unwrap_or_else(|| vec![0.0; n]);
        let mut entry = ParamCheck {
            name: p.name.clone(),
            checked: 0,
            skipped: 0,
            max_rel_error: 0.0,
        };
        let original = p.value.data().to_vec();
        // Central quotient and second difference (f(x+h) - 2 f(x) + f(x-h)) / h.
        let mut differences = |i: usize, h: f64| -> Result<(f64, f64), AutodiffError> {
            work.get_mut(id).value.data_mut()[i] = original[i] + h;
            let plus = eval(&work)?;
            work.get_mut(id).value.data_mut()[i] = original[i] - h;
            let minus = eval(&work)?;
            work.get_mut(id).value.data_mut()[i] = original[i];
            Ok(((plus - minus) / (2.0 * h), (plus - 2.0 * center + minus) / h))
        };
        for i in indices {
            let (numeric, second) = differences(i, config.step)?;
            if config.skip_kinks {
                let (half, half_second) = differences(i, config.step / 2.0)?;
                let scale = numeric.abs().max(half.abs()).max(config.floor);
                let tol = config.kink_tolerance * scale;
                if (numeric - half).abs() > tol || (second - 2.0 * half_second).abs() > tol {
                    entry.skipped += 1;
                    continue;
                }
            }
            entry.checked += 1;
            entry.max_rel_error = entry.max_rel_error.max(rel_error(analytic[i], numeric, config.floor));
        }
        report.params.push(entry);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ops::testutil::{coeffs, random};
    use crate::autodiff::Tensor;

    #[test]
    fn linear_layer_is_exact_to_rounding() {
        let mut store = ParamStore::new();
        let w = store.trainable("w", random(&[5, 4], 1));
        let b = store.trainable("b", random(&[5], 2));
        let x = random(&[3, 4], 3);
        let c = coeffs(15, 4);
        let report = check_gradients(
            &store,
            |t| {
                let xv = t.constant(x.clone());
                let (wv, bv) = (t.param(w), t.param(b));
                let y = t.linear(xv, wv, Some(bv))?;
                t.dot(y, &c)
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!(report.checked(), 25);
        assert!(report.max_rel_error() < 1e-7, "{report:?}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        // At x = 0 the difference quotient of relu is 0.5 for every step while
        // the subgradient is 0. Only the second difference reveals the kink.
        let mut store = ParamStore::new();
        let x = store.trainable("x", Tensor::zeros([1]));
        let f = |t: &mut Tape<'_, f64>| {
            let v = t.param(x);
            let r = t.relu(v)?;
            t.dot(r, &[1.0])
        };
        let strict = GradCheckConfig {
            skip_kinks: false,
            ..GradCheckConfig::default()
        };
        let report = check_gradients(&store, f, &strict).unwrap();
        assert_eq!(report.violations(1e-4).len(), 1);
        let report = check_gradients(&store, f, &GradCheckConfig::default()).unwrap();
        assert_eq!((report.checked(), report.skipped()), (0, 1));
    }

    #[test]
    fn kinks_near_the_point_are_skipped_and_smooth_curvature_is_not() {
        let mut store = ParamStore::new();
        let x = store.trainable("x", Tensor::new([3], vec![3e-6, -7e-6, 0.5]).unwrap());
        let report = check_gradients(
            &store,
            |t| {
                let v = t.param(x);
                let r = t.relu(v)?;
                let s = t.tanh(v)?;
                let y = t.add(r, s)?;
                t.dot(y, &[1.0, 1.0, 1.0])
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert_eq!((report.checked(), report.skipped()), (1, 2));
        assert!(report.max_rel_error() < 1e-8);
    }
}
