use super::{batch_input, HarnessError};
use crate::archs::Model;
use crate::dataset::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrAccuracy {
    pub snr_db: f32,
    pub correct: u64,
    pub total: u64,
}

impl SnrAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

/// Test-set accuracy of one model, stratified by SNR, with its confusion matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Curve label, normally the architecture name.
    pub label: String,
    pub n_antennas: usize,
    pub n_classes: usize,
    /// Row = true class, column = decision, row-major `K x K`.
    pub confusion: Vec<u64>,
    /// Ascending SNR.
    pub by_snr: Vec<SnrAccuracy>,
}

impl EvalReport {
    pub fn from_decisions(
        label: impl Into<String>,
        n_antennas: usize,
        n_classes: usize,
        labels: &[usize],
        snrs: &[f32],
        decisions: &[usize],
    ) -> Self {
        let mut confusion = vec![0; n_classes * n_classes];
        let mut by_snr: Vec<SnrAccuracy> = Vec::new();
        for ((&y, &snr), &d) in labels.iter().zip(snrs).zip(decisions) {
            confusion[y * n_classes + d] += 1;
            let slot = match by_snr.iter().position(|s| s.snr_db.to_bits() == snr.to_bits()) {
                Some(i) => i,
                None => {
                    by_snr.push(SnrAccuracy {
                        snr_db: snr,
                        correct: 0,
                        total: 0,
                    });
                    by_snr.len() - 1
                }
            };
            by_snr[slot].total += 1;
            by_snr[slot].correct += u64::from(y == d);
        }
        by_snr.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        Self {
            label: label.into(),
            n_antennas,
            n_classes,
            confusion,
            by_snr,
        }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes).map(|k| self.confusion[k * self.n_classes + k]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    pub fn accuracy_at(&self, snr_db: f32) -> Option<f64> {
        self.by_snr
            .iter()
            .find(|s| s.snr_db == snr_db)
            .map(SnrAccuracy::accuracy)
    }

    /// Test examples per true class.
    pub fn class_counts(&self) -> Vec<u64> {
        self.confusion.chunks(self.n_classes).map(|r| r.iter().sum()).collect()
    }

    /// Pools the counts of two reports of the same curve.
    pub fn merge(&mut self, other: &EvalReport) -> Result<(), HarnessError> {
        if self.label != other.label || self.n_antennas != other.n_antennas || self.n_classes != other.n_classes {
            return Err(HarnessError::Config(format!(
                "cannot merge {}@{} with {}@{}",
                self.label, self.n_antennas, other.label, other.n_antennas
            )));
        }
        self.confusion.iter_mut().zip(&other.confusion).for_each(|(a, b)| *a += b);
        for s in &other.by_snr {
            match self.by_snr.iter_mut().find(|t| t.snr_db.to_bits() == s.snr_db.to_bits()) {
                Some(t) => {
                    t.correct += s.correct;
                    t.total += s.total;
                }
                None => self.by_snr.push(*s),
            }
        }
        self.by_snr.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        Ok(())
    }
}

/// Eval-mode predictions over `data`, using its first `n_antennas` antennas.
pub fn evaluate(model: &Model<f32>, data: &Dataset, batch_size: usize) -> Result<EvalReport, HarnessError> {
    if data.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }
    let c = model.config();
    if c.n_antennas > data.n_antennas() {
        return Err(HarnessError::Config(format!(
            "model needs {} antennas, dataset has {}",
            c.n_antennas,
            data.n_antennas()
        )));
    }
    let antennas: Vec<usize> = (0..c.n_antennas).collect();
    let mut decisions = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let x = batch_input(data, chunk, &vec![antennas.clone(); chunk.len()]);
        decisions.extend(model.predict(&x)?.decisions);
    }
    let labels: Vec<usize> = data.examples.iter().map(|e| e.label as usize).collect();
    let snrs: Vec<f32> = data.examples.iter().map(|e| e.snr_db).collect();
    Ok(EvalReport::from_decisions(
        c.kind.name(),
        c.n_antennas,
        c.n_classes,
        &labels,
        &snrs,
        &decisions,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::archs::{ArchConfig, ArchKind, ViewPool};
    use crate::dataset::{generate_dataset, DatasetManifest};
    use crate::modem::ModulationScheme;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_predictor() {
        let labels = [0, 1, 2, 2, 1];
        let snrs = [0.0, 0.0, 10.0, 10.0, -10.0];
        let r = EvalReport::from_decisions("x", 1, 3, &labels, &snrs, &labels);
        assert_eq!(r.accuracy(), 1.0);
        assert_eq!(r.confusion, vec![1, 0, 0, 0, 2, 0, 0, 0, 2]);
        assert_eq!(r.by_snr.iter().map(|s| s.snr_db).collect::<Vec<_>>(), vec![-10.0, 0.0, 10.0]);
        assert_eq!(r.class_counts(), vec![1, 2, 2]);
    }

    #[test]
    fn trace_matches_accuracy_and_merge_pools_counts() {
        let labels = [0, 1, 1, 0];
        let snrs = [0.0, 0.0, 5.0, 5.0];
        let mut r = EvalReport::from_decisions("m", 2, 2, &labels, &snrs, &[0, 0, 1, 1]);
        assert_eq!(r.correct() as f64 / r.total() as f64, r.accuracy());
        assert_eq!(r.accuracy_at(0.0), Some(0.5));
        let other = r.clone();
        r.merge(&other).unwrap();
        assert_eq!(r.total(), 8);
        assert_eq!(r.by_snr[0].total, 4);
        let mut wrong = r.clone();
        wrong.label = "z".into();
        assert!(r.merge(&wrong).is_err());
    }

    #[test]
    fn random_model_is_near_chance() {
        let data = generate_dataset(&DatasetManifest {
            schemes: ModulationScheme::ALL.to_vec(),
            snr_grid_db: vec![0.0],
            n_antennas: 1,
            frame_len: 64,
            examples_per_cell: 20,
            ..DatasetManifest::default()
        })
        .unwrap();
        let config = ArchConfig {
            kind: ArchKind::Base,
            n_antennas: 1,
            frame_len: 64,
            n_classes: 20,
            width_multiplier: 0.125,
            view_pool: ViewPool::Max,
        };
        // Balanced over all twenty classes: any input-independent predictor
        // scores exactly 1/20. Pool over independent initializations.
        let mut correct = 0;
        let mut total = 0;
        for seed in 0..10 {
            let mut model = Model::<f32>::new(config, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let x = batch_input(&data, &(0..32).collect::<Vec<_>>(), &vec![vec![0]; 32]);
            model.warm_up(&x).unwrap();
            let r = evaluate(&model, &data, 64).unwrap();
            correct += r.correct();
            total += r.total();
        }
        let acc = correct as f64 / total as f64;
        let sigma = (0.05 * 0.95 / 400.0f64).sqrt();
        assert!((acc - 0.05).abs() < 3.0 * sigma, "{acc}");
    }

    #[test]
    fn empty_set_is_an_error() {
        let mut data = generate_dataset(&DatasetManifest {
            schemes: vec![ModulationScheme::Bpsk],
            snr_grid_db: vec![0.0],
            n_antennas: 1,
            frame_len: 64,
            examples_per_cell: 2,
            ..DatasetManifest::default()
        })
        .unwrap();
        data.examples.clear();
        let model = Model::<f32>::new(
            ArchConfig {
                frame_len: 64,
                ..ArchConfig::nominal(ArchKind::Base, 1)
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(matches!(evaluate(&model, &data, 8), Err(HarnessError::EmptyTestSet)));
    }
}
