use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate, train, Config, EvalReport, HarnessError, TrainConfig};
use crate::archs::ArchKind;
use crate::dataset::{generate_dataset, load_dataset, split, Dataset};

/// The configured dataset file, or a fresh one generated from the manifest.
pub fn load_or_generate(config: &Config) -> Result<Dataset, HarnessError> {
    Ok(match &config.dataset_path {
        Some(path) => load_dataset(path)?,
        None => generate_dataset(&config.manifest)?,
    })
}

/// Test reports of every configured curve for one seed.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub seed: u64,
    pub reports: Vec<EvalReport>,
}

impl ExperimentRun {
    pub fn report(&self, label: &str, n_antennas: usize) -> Option<&EvalReport> {
        self.reports
            .iter()
            .find(|r| r.label == label && r.n_antennas == n_antennas)
    }
}

/// Trains and tests every (architecture, antenna count) pair for each seed.
///
/// Each seed regenerates the dataset with that master seed (unless a dataset
/// file is configured) and splits it into train and test halves. With one
/// antenna all fusion schemes coincide with the base CNN, so a single base
/// model trained on antenna 0 stands in for each of them.
pub fn run_experiment(config: &Config, mut progress: impl FnMut(&str)) -> Result<Vec<ExperimentRun>, HarnessError> {
    let exp = &config.experiment;
    if exp.archs.is_empty() || exp.antennas.is_empty() || exp.seeds.is_empty() {
        return Err(HarnessError::Config("experiment needs archs, antennas and seeds".into()));
    }
    let mut runs = Vec::new();
    for &seed in &exp.seeds {
        let mut seeded = config.clone();
        seeded.manifest.master_seed = seed;
        let data = load_or_generate(&seeded)?;
        let (train_set, test_set) = split(&data, config.manifest.split_ratio, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let mut reports = Vec::new();
        for &n in &exp.antennas {
            let train_n = train_set.select_antennas(n)?;
            let test_n = test_set.select_antennas(n)?;
            let kinds: Vec<ArchKind> = if n == 1 { vec![ArchKind::Base] } else { exp.archs.clone() };
            for kind in kinds {
                let tc = TrainConfig {
                    arch: kind,
                    n_antennas: n,
                    seed,
                    ..config.train.clone()
                };
                let outcome = train(&tc, &train_n, |e| {
                    progress(&format!(
                        "seed {seed} {kind} N_r={n} epoch {} loss {:.4} val {}",
                        e.epoch,
                        e.train_loss,
                        e.val_accuracy.map_or("-".into(), |a| format!("{a:.4}"))
                    ))
                })?;
                let report = evaluate(&outcome.model, &test_n, tc.batch_size)?;
                progress(&format!("seed {seed} {kind} N_r={n} test accuracy {:.4}", report.accuracy()));
                if kind == ArchKind::Base {
                    for arch in &exp.archs {
                        reports.push(EvalReport {
                            label: arch.name().to_string(),
                            ..report.clone()
                        });
                    }
                } else {
                    reports.push(report);
                }
            }
        }
        runs.push(ExperimentRun { seed, reports });
    }
    Ok(runs)
}

/// Reports of the same curve pooled over all seeds, in first-seen order.
pub fn pooled_reports(runs: &[ExperimentRun]) -> Result<Vec<EvalReport>, HarnessError> {
    let mut pooled: Vec<EvalReport> = Vec::new();
    for r in runs.iter().flat_map(|run| &run.reports) {
        match pooled.iter_mut().find(|p| p.label == r.label && p.n_antennas == r.n_antennas) {
            Some(p) => p.merge(r)?,
            None => pooled.push(r.clone()),
        }
    }
    Ok(pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentConfig;
    use crate::modem::ModulationScheme;

    #[test]
    fn tiny_experiment_produces_every_curve() {
        let mut config = Config::default();
        config.manifest.schemes = vec![ModulationScheme::Bpsk, ModulationScheme::Fm];
        config.manifest.snr_grid_db = vec![0.0, 10.0];
        config.manifest.frame_len = 64;
        config.manifest.n_antennas = 2;
        config.manifest.examples_per_cell = 8;
        config.train.max_epochs = 1;
        config.train.width_multiplier = 0.125;
        config.train.validation_fraction = 0.0;
        config.experiment = ExperimentConfig {
            archs: vec![ArchKind::Mvcnn, ArchKind::Wlcnn, ArchKind::CoAmc],
            antennas: vec![1, 2],
            seeds: vec![5],
        };
        let runs = run_experiment(&config, |_| {}).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].reports.len(), 6);
        let one = runs[0].report("mvcnn", 1).unwrap();
        assert_eq!(one.confusion, runs[0].report("coamc", 1).unwrap().confusion);
        assert_eq!(one.total(), 16);
        assert!(runs[0].report("wlcnn", 2).is_some());
        let doubled = pooled_reports(&[runs[0].clone(), runs[0].clone()]).unwrap();
        assert_eq!(doubled.len(), 6);
        assert_eq!(doubled[0].total(), 2 * runs[0].reports[0].total());
        assert_eq!(doubled[0].accuracy(), runs[0].reports[0].accuracy());
    }
}
