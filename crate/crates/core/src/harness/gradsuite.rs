//! Finite-difference checks of every layer and of whole architectures at
//! float64 on reduced shapes (N = 64, width 0.125).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::archs::{ArchConfig, ArchKind, Model, ResidualBlock, ViewPool};
use crate::autodiff::{
    check_gradients, AutodiffError, BnParams, GradCheckConfig, GradCheckReport, Mode, ParamId, ParamStore, Tape,
    Tensor, Var,
};

/// Maximum relative error accepted by the suite.
pub const SUITE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradSuiteEntry {
    pub name: String,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

impl GradSuiteEntry {
    fn from_report(name: &str, r: &GradCheckReport) -> Self {
        Self {
            name: name.to_string(),
            max_rel_error: r.max_rel_error(),
            checked: r.checked(),
            skipped: r.skipped(),
        }
    }

    /// Error below `tolerance` with at least half of the examined entries
    /// away from kinks.
    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.skipped <= self.checked && self.max_rel_error < tolerance
    }
}

struct Fixture {
    rng: ChaCha8Rng,
    store: ParamStore<f64>,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            store: ParamStore::new(),
        }
    }

    fn tensor(&mut self, shape: &[usize]) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| self.rng.random_range(-1.0..1.0)).collect()).expect("shape")
    }

    fn param(&mut self, name: &str, shape: &[usize]) -> ParamId {
        let t = self.tensor(shape);
        self.store.trainable(name, t)
    }

    /// Values spread at least `gap` apart, so maxima and signs are stable
    /// under the finite-difference step.
    fn separated(&mut self, name: &str, shape: &[usize], gap: f64) -> ParamId {
        let n: usize = shape.iter().product();
        let mut vals: Vec<f64> = (0..n).map(|i| (i as f64 - n as f64 / 2.0 + 0.5) * gap).collect();
        for i in (1..n).rev() {
            vals.swap(i, self.rng.random_range(0..=i));
        }
        self.store.trainable(name, Tensor::new(shape.to_vec(), vals).expect("shape"))
    }

    fn bn(&mut self, c: usize, tracked: bool) -> BnParams {
        let gamma = self.tensor(&[c]).data().iter().map(|v| 1.0 + 0.5 * v).collect();
        let mean = self.tensor(&[c]);
        let var = self.tensor(&[c]).data().iter().map(|v| 1.0 + 0.5 * v.abs()).collect();
        let beta = self.tensor(&[c]);
        BnParams {
            gamma: self.store.trainable("bn.gamma", Tensor::new([c], gamma).expect("shape")),
            beta: self.store.trainable("bn.beta", beta),
            running_mean: self.store.buffer("bn.running_mean", mean),
            running_var: self.store.buffer("bn.running_var", Tensor::new([c], var).expect("shape")),
            tracked: self.store.buffer("bn.tracked", Tensor::scalar(f64::from(u8::from(tracked)))),
        }
    }

    fn coeffs(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.rng.random_range(-1.0..1.0)).collect()
    }

    fn check<F>(&self, name: &str, f: F, config: &GradCheckConfig) -> Result<GradSuiteEntry, HarnessError>
    where
        F: Fn(&mut Tape<'_, f64>) -> Result<Var, AutodiffError>,
    {
        let report = check_gradients(&self.store, f, config)?;
        Ok(GradSuiteEntry::from_report(name, &report))
    }
}

fn layer_checks(seed: u64) -> Result<Vec<GradSuiteEntry>, HarnessError> {
    let cfg = GradCheckConfig {
        seed,
        ..GradCheckConfig::default()
    };
    let mut out = Vec::new();

    let mut f = Fixture::new(seed);
    let (x, w, b) = (f.param("x", &[2, 1, 2, 16]), f.param("w", &[4, 1, 2, 7]), f.param("b", &[4]));
    let c = f.coeffs(2 * 4 * 8);
    out.push(f.check(
        "conv2d 2x7 stride (1,2)",
        |t| {
            let (xv, wv, bv) = (t.param(x), t.param(w), t.param(b));
            let y = t.conv2d(xv, wv, Some(bv), (1, 2), (0, 3))?;
            t.dot(y, &c)
        },
        &cfg,
    )?);

    let mut f = Fixture::new(seed + 1);
    let (x, w) = (f.param("x", &[2, 3, 1, 9]), f.param("w", &[4, 3, 1, 3]));
    let c = f.coeffs(2 * 4 * 5);
    out.push(f.check(
        "conv2d 1x3 stride (1,2)",
        |t| {
            let (xv, wv) = (t.param(x), t.param(w));
            let y = t.conv2d(xv, wv, None, (1, 2), (0, 1))?;
            t.dot(y, &c)
        },
        &cfg,
    )?);

    for (mode, label) in [(Mode::Train, "batch_norm train"), (Mode::Eval, "batch_norm eval")] {
        let mut f = Fixture::new(seed + 2);
        let x = f.param("x", &[3, 2, 1, 5]);
        let bn = f.bn(2, true);
        let c = f.coeffs(30);
        out.push(f.check(
            label,
            |t| {
                let xv = t.param(x);
                let y = t.batch_norm(xv, &bn, mode)?;
                let y = t.tanh(y)?;
                t.dot(y, &c)
            },
            &cfg,
        )?);
    }

    let mut f = Fixture::new(seed + 3);
    let x = f.param("x", &[4, 6]);
    let c = f.coeffs(24);
    out.push(f.check(
        "tanh",
        |t| {
            let xv = t.param(x);
            let y = t.tanh(xv)?;
            t.dot(y, &c)
        },
        &cfg,
    )?);

    let mut f = Fixture::new(seed + 4);
    let x = f.separated("x", &[4, 6], 0.05);
    let c = f.coeffs(24);
    out.push(f.check(
        "relu",
        |t| {
            let xv = t.param(x);
            let y = t.relu(xv)?;
            t.dot(y, &c)
        },
        &cfg,
    )?);

    let mut f = Fixture::new(seed + 5);
    let x = f.separated("x", &[2, 3, 1, 10], 0.01);
    let c = f.coeffs(2 * 3 * 5);
    let c2 = f.coeffs(2 * 3 * 4);
    out.push(f.check(
        "max_pool k3 s2 p1",
        |t| {
            let xv = t.param(x);
            let y = t.max_pool_w(xv, 3, 2, 1)?;
            t.dot(y, &c)
        },
        &cfg,
    )?);
    out.push(f.check(
        "avg_pool k4 s2",
        |t| {
            let xv = t.param(x);
            let y = t.avg_pool_w(xv, 4, 2, 0)?;
            t.dot(y, &c2)
        },
        &cfg,
    )?);

    let mut f = Fixture::new(seed + 6);
    let (x, w, b) = (f.param("x", &[3, 8]), f.param("w", &[5, 8]), f.param("b", &[5]));
    let c = f.coeffs(15);
    out.push(f.check(
        "fully_connected",
        |t| {
            let (xv, wv, bv) = (t.param(x), t.param(w), t.param(b));
            let y = t.linear(xv, wv, Some(bv))?;
            t.dot(y, &c)
        },
        &cfg,
    )?);

    let mut f = Fixture::new(seed + 7);
    let x = f.param("x", &[3, 6]);
    let c = f.coeffs(18);
    let labels = [0, 5, 2];
    out.push(f.check(
        "softmax",
        |t| {
            let xv = t.param(x);
            let y = t.softmax(xv)?;
            t.dot(y, &c)
        },
        &cfg,
    )?);
    out.push(f.check(
        "softmax + cross_entropy (fused)",
        |t| {
            let xv = t.param(x);
            t.softmax_cross_entropy(xv, &labels)
        },
        &cfg,
    )?);
    out.push(f.check(
        "softmax + cross_entropy (unfused)",
        |t| {
            let xv = t.param(x);
            let p = t.softmax(xv)?;
            t.cross_entropy(p, &labels)
        },
        &cfg,
    )?);

    let mut f = Fixture::new(seed + 8);
    let x = f.separated("x", &[6, 2, 1, 4], 0.01);
    let w = f.param("w", &[2, 3]);
    let c = f.coeffs(16);
    out.push(f.check(
        "view_pool max",
        |t| {
            let xv = t.param(x);
            let y = t.view_max(xv, 3)?;
            t.dot(y, &c)
        },
        &cfg,
    )?);
    out.push(f.check(
        "view_pool mean",
        |t| {
            let xv = t.param(x);
            let y = t.view_mean(xv, 3)?;
            t.dot(y, &c)
        },
        &cfg,
    )?);
    out.push(f.check(
        "view weighted sum",
        |t| {
            let (xv, wv) = (t.param(x), t.param(w));
            let wv = t.softmax(wv)?;
            let y = t.view_weighted_sum(xv, wv)?;
            t.dot(y, &c)
        },
        &cfg,
    )?);

    for (c_in, c_out, stride, label) in [(4, 4, 1, "residual block identity"), (4, 6, 2, "residual block projection")] {
        let mut f = Fixture::new(seed + 9);
        let x = f.param("x", &[3, c_in, 1, 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 10);
        let block = ResidualBlock::new(&mut f.store, "block", c_in, c_out, stride, &mut rng);
        let c = f.coeffs(3 * c_out * 8 / stride);
        out.push(f.check(
            label,
            |t| {
                let xv = t.param(x);
                let y = block.forward(t, xv, Mode::Train)?;
                t.dot(y, &c)
            },
            &cfg,
        )?);
    }
    Ok(out)
}

/// Reduced-shape configuration of the architecture checks.
pub fn reduced_arch(kind: ArchKind, n_antennas: usize) -> ArchConfig {
    ArchConfig {
        kind,
        n_antennas,
        frame_len: 64,
        n_classes: 20,
        width_multiplier: 0.125,
        view_pool: ViewPool::Max,
    }
}

fn arch_checks(seed: u64, samples_per_param: usize) -> Result<Vec<GradSuiteEntry>, HarnessError> {
    let cfg = GradCheckConfig {
        seed,
        samples_per_param,
        ..GradCheckConfig::default()
    };
    let mut out = Vec::new();
    for (kind, n) in [(ArchKind::Base, 1), (ArchKind::Mvcnn, 2), (ArchKind::Wlcnn, 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5);
        let model = Model::<f64>::new(reduced_arch(kind, n), &mut rng)?;
        let batch = 4;
        let data: Vec<f64> = (0..batch * n * 2 * 64).map(|_| rng.random_range(-1.5..1.5)).collect();
        let x = Tensor::new([batch, n, 2, 64], data).expect("shape");
        let labels: Vec<usize> = (0..batch).map(|_| rng.random_range(0..20)).collect();
        let report = check_gradients(
            model.store(),
            |t| {
                let xv = t.constant(x.clone());
                model.loss(t, xv, &labels, Mode::Train).map_err(|e| match e {
                    crate::archs::ArchError::Autodiff(a) => a,
                    other => AutodiffError::Shape(other.to_string()),
                })
            },
            &cfg,
        )?;
        let name = if n == 1 { kind.to_string() } else { format!("{kind} N_r={n}") };
        out.push(GradSuiteEntry::from_report(&name, &report));
    }
    Ok(out)
}

/// Runs every layer check and the base, MVCNN and WLCNN architecture checks.
pub fn gradient_suite(seed: u64) -> Result<Vec<GradSuiteEntry>, HarnessError> {
    let mut out = layer_checks(seed)?;
    out.extend(arch_checks(seed, 4)?);
    Ok(out)
}
