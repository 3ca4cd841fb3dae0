use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{evaluate, HarnessError, TrainConfig};
use crate::archs::{ArchConfig, ArchKind, Model};
use crate::autodiff::{Adam, AdamConfig, Mode, Tape, Tensor};
use crate::dataset::{split, Dataset};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
}

/// Stacks `indices` into `[B, V, 2, N]`. `antennas[i]` lists the antenna slots
/// taken from example `indices[i]`, in order.
pub fn batch_input(data: &Dataset, indices: &[usize], antennas: &[Vec<usize>]) -> Tensor<f32> {
    let n = data.frame_len();
    let v = antennas.first().map_or(0, Vec::len);
    let mut buf = Vec::with_capacity(indices.len() * v * 2 * n);
    for (&i, ants) in indices.iter().zip(antennas) {
        for &a in ants {
            buf.extend_from_slice(data.examples[i].antenna(a, n));
        }
    }
    Tensor::new([indices.len(), v, 2, n], buf).expect("consistent batch")
}

/// Rotates every `2 x N` antenna slice of `x` by an independent uniform
/// phase. Fading phases are uniform and noise is circularly symmetric, so
/// the data distribution is unchanged.
pub fn rotate_phases<R: Rng>(x: &mut Tensor<f32>, rng: &mut R) {
    let n = x.shape()[3];
    for slice in x.data_mut().chunks_mut(2 * n) {
        let theta: f32 = rng.random_range(0.0..std::f32::consts::TAU);
        let (sin, cos) = theta.sin_cos();
        let (i, q) = slice.split_at_mut(n);
        for (a, b) in i.iter_mut().zip(q.iter_mut()) {
            let (re, im) = (*a, *b);
            *a = re * cos - im * sin;
            *b = re * sin + im * cos;
        }
    }
}

/// Decision fusion and the single-antenna base train on one antenna per
/// example, drawn afresh each epoch; end-to-end fusion sees all antennas.
fn training_antennas<R: Rng>(kind: ArchKind, n_antennas: usize, count: usize, rng: &mut R) -> Vec<Vec<usize>> {
    match kind {
        ArchKind::Base | ArchKind::CoAmc if n_antennas > 1 => {
            (0..count).map(|_| vec![rng.random_range(0..n_antennas)]).collect()
        }
        ArchKind::Base | ArchKind::CoAmc => vec![vec![0]; count],
        ArchKind::Mvcnn | ArchKind::Wlcnn => vec![(0..n_antennas).collect(); count],
    }
}

/// Mini-batch Adam on the cross-entropy loss with validation early stopping.
/// The parameters of the best validation epoch are returned.
pub fn train(
    config: &TrainConfig,
    data: &Dataset,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, HarnessError> {
    config.validate()?;
    if data.is_empty() {
        return Err(HarnessError::Config("training set is empty".into()));
    }
    if config.n_antennas > data.n_antennas() {
        return Err(HarnessError::Config(format!(
            "{} antennas requested, dataset has {}",
            config.n_antennas,
            data.n_antennas()
        )));
    }
    // Separate streams keep data order independent of how many parameters
    // the architecture draws at initialization.
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let (fit, val) = if config.validation_fraction > 0.0 {
        let (fit, val) = split(data, 1.0 - config.validation_fraction, &mut rng)?;
        (fit, Some(val))
    } else {
        (data.clone(), None)
    };
    let arch = ArchConfig {
        kind: config.arch,
        n_antennas: config.n_antennas,
        frame_len: data.frame_len(),
        n_classes: data.header.n_classes as usize,
        width_multiplier: config.width_multiplier,
        view_pool: config.view_pool,
    };
    let mut model = Model::<f32>::new(arch, &mut init_rng)?;
    let adam = Adam::new(AdamConfig {
        learning_rate: config.learning_rate,
        ..AdamConfig::default()
    });
    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Model<f32>)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..fit.len()).collect();
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let antennas = training_antennas(config.arch, config.n_antennas, chunk.len(), &mut rng);
            let mut x = batch_input(&fit, chunk, &antennas);
            if config.phase_augment {
                rotate_phases(&mut x, &mut rng);
            }
            let labels: Vec<usize> = chunk.iter().map(|&i| fit.examples[i].label as usize).collect();
            let (loss, grads, updates) = {
                let mut tape = Tape::new(model.store());
                let xv = tape.constant(x);
                let l = model.loss(&mut tape, xv, &labels, Mode::Train)?;
                let loss = tape.value(l).item() as f64;
                if !loss.is_finite() {
                    return Err(HarnessError::Diverged {
                        epoch,
                        batch: batch_no,
                        loss,
                    });
                }
                (loss, tape.backward(l)?, tape.take_updates())
            };
            let store = model.store_mut();
            store.apply_updates(updates);
            store.accumulate(&grads);
            adam.step(store)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let val_accuracy = match &val {
            Some(v) => Some(evaluate(&model, v, config.batch_size)?.accuracy()),
            None => None,
        };
        let entry = EpochLog {
            epoch,
            train_loss: loss_sum / fit.len() as f64,
            val_accuracy,
        };
        let reached = config.target_loss.is_some_and(|t| entry.train_loss < t);
        on_epoch(&entry);
        log.push(entry);
        if let Some(acc) = val_accuracy {
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, model.clone()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    break;
                }
            }
        }
        if reached {
            break;
        }
    }
    let (model, best_epoch) = match best {
        Some((_, epoch, m)) => (m, epoch),
        None => (model, log.len()),
    };
    Ok(TrainOutcome {
        model,
        log,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamKind;
    use crate::dataset::{generate_dataset, DatasetManifest};
    use crate::modem::ModulationScheme;

    fn tiny(n_antennas: usize, per_cell: usize) -> Dataset {
        generate_dataset(&DatasetManifest {
            schemes: vec![ModulationScheme::Bpsk, ModulationScheme::Qam16],
            snr_grid_db: vec![10.0],
            n_antennas,
            frame_len: 64,
            examples_per_cell: per_cell,
            ..DatasetManifest::default()
        })
        .unwrap()
    }

    fn quick(arch: ArchKind, n_antennas: usize) -> TrainConfig {
        TrainConfig {
            arch,
            n_antennas,
            batch_size: 8,
            max_epochs: 2,
            width_multiplier: 0.125,
            validation_fraction: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn batches_stack_selected_antennas() {
        let d = tiny(3, 2);
        let x = batch_input(&d, &[1, 0], &[vec![2], vec![0]]);
        assert_eq!(x.shape(), &[2, 1, 2, 64]);
        assert_eq!(&x.data()[..128], d.examples[1].antenna(2, 64));
        assert_eq!(&x.data()[128..], d.examples[0].antenna(0, 64));
    }

    #[test]
    fn phase_rotation_keeps_per_sample_power() {
        let d = tiny(2, 2);
        let x = batch_input(&d, &[0, 1, 2], &[vec![0, 1], vec![1, 0], vec![0, 1]]);
        let mut y = x.clone();
        rotate_phases(&mut y, &mut ChaCha8Rng::seed_from_u64(5));
        let mut z = x.clone();
        rotate_phases(&mut z, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(y, z);
        assert_ne!(x, y);
        for (a, b) in x.data().chunks(128).zip(y.data().chunks(128)) {
            for k in 0..64 {
                let p = a[k] * a[k] + a[64 + k] * a[64 + k];
                let q = b[k] * b[k] + b[64 + k] * b[64 + k];
                assert!((p - q).abs() <= 1e-5 * p.max(1.0));
            }
        }
    }

    #[test]
    fn same_seed_same_result() {
        let d = tiny(2, 8);
        let run = || train(&quick(ArchKind::Wlcnn, 2), &d, |_| {}).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.log, b.log);
        assert_eq!(a.model.store(), b.model.store());
    }

    #[test]
    fn zero_learning_rate_freezes_trainables() {
        let d = tiny(2, 8);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..quick(ArchKind::Mvcnn, 2)
        };
        let out = train(&cfg, &d, |_| {}).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let fresh = Model::<f32>::new(*out.model.config(), &mut rng).unwrap();
        for ((_, a), (_, b)) in out.model.store().iter().zip(fresh.store().iter()) {
            if a.kind == ParamKind::Trainable {
                assert_eq!(a.value, b.value, "{}", a.name);
            }
        }
    }

    #[test]
    fn early_stopping_restores_the_best_epoch() {
        let d = tiny(1, 20);
        let cfg = TrainConfig {
            validation_fraction: 0.25,
            max_epochs: 6,
            patience: 2,
            ..quick(ArchKind::Base, 1)
        };
        let out = train(&cfg, &d, |_| {}).unwrap();
        let best = out.log.iter().map(|e| e.val_accuracy.unwrap()).fold(0.0, f64::max);
        assert_eq!(out.log[out.best_epoch - 1].val_accuracy.unwrap(), best);
        assert!(out.log.len() <= 6);
    }

    #[test]
    fn too_many_antennas_is_a_config_error() {
        let d = tiny(1, 4);
        assert!(matches!(
            train(&quick(ArchKind::Mvcnn, 2), &d, |_| {}),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn single_antenna_weight_learning_trains_like_the_base() {
        // With one antenna the combining weight is exactly 1 and the WLM gets
        // zero gradient, so the shared parameters follow the base trajectory.
        let d = tiny(1, 8);
        let base = train(&quick(ArchKind::Base, 1), &d, |_| {}).unwrap();
        let wl = train(&quick(ArchKind::Wlcnn, 1), &d, |_| {}).unwrap();
        assert_eq!(base.log, wl.log);
        for (_, p) in base.model.store().iter() {
            let id = wl.model.store().find(&p.name).unwrap();
            assert_eq!(wl.model.store().get(id).value, p.value, "{}", p.name);
        }
    }
}
