//! Sectioned `key = value` experiment configuration. See `docs/config.md`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::{Ini, Properties};

use super::HarnessError;
use crate::archs::{ArchKind, ViewPool};
use crate::dataset::{DatasetManifest, Normalization};
use crate::modem::{ModemConfig, ModulationScheme};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub arch: ArchKind,
    pub n_antennas: usize,
    pub view_pool: ViewPool,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a validation improvement before stopping.
    pub patience: usize,
    pub width_multiplier: f64,
    /// Share of the training set held out for early stopping; 0 disables it.
    pub validation_fraction: f64,
    /// Stop once an epoch's mean training loss falls below this.
    pub target_loss: Option<f64>,
    /// Rotate each training antenna slice by a random phase every batch.
    pub phase_augment: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: ArchKind::Mvcnn,
            n_antennas: 4,
            view_pool: ViewPool::Max,
            batch_size: 64,
            learning_rate: 1e-3,
            max_epochs: 15,
            patience: 4,
            width_multiplier: 0.25,
            validation_fraction: 0.1,
            target_loss: None,
            phase_augment: true,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation_fraction must be in [0, 1), got {}", self.validation_fraction));
        }
        Ok(())
    }
}

/// Which architectures and antenna counts the curve experiment covers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub archs: Vec<ArchKind>,
    pub antennas: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            archs: vec![ArchKind::Mvcnn, ArchKind::Wlcnn, ArchKind::CoAmc],
            antennas: vec![1, 4],
            seeds: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub manifest: DatasetManifest,
    /// Pre-generated dataset to use instead of generating from the manifest.
    pub dataset_path: Option<PathBuf>,
    pub train: TrainConfig,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::parse(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        if let Some(p) = &config.dataset_path {
            if p.is_relative() {
                config.dataset_path = Some(path.parent().unwrap_or(Path::new(".")).join(p));
            }
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let ini = Ini::load_from_str(text).map_err(|e| e.to_string())?;
        let mut c = Config::default();
        for (section, props) in ini.iter() {
            match section {
                None if props.is_empty() => {}
                None => return Err("keys must appear inside a section".into()),
                Some("dataset") => c.read_dataset(props)?,
                Some("modem") => read_modem(&mut c.manifest.modem, props)?,
                Some("train") => read_train(&mut c.train, props)?,
                Some("experiment") => read_experiment(&mut c.experiment, props)?,
                Some(other) => return Err(format!("unknown section [{other}]")),
            }
        }
        c.manifest.validate().map_err(|e| e.to_string())?;
        c.train.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }

    /// Replaces every seed, including the experiment seed list, with `seed`.
    pub fn override_seed(&mut self, seed: u64) {
        self.manifest.master_seed = seed;
        self.train.seed = seed;
        self.experiment.seeds = vec![seed];
    }

    fn read_dataset(&mut self, props: &Properties) -> Result<(), String> {
        let m = &mut self.manifest;
        for (key, value) in props.iter() {
            match key {
                "schemes" => m.schemes = list(key, value)?,
                "snr_grid_db" => m.snr_grid_db = list(key, value)?,
                "n_antennas" => m.n_antennas = scalar(key, value)?,
                "frame_len" => m.frame_len = scalar(key, value)?,
                "examples_per_cell" => m.examples_per_cell = scalar(key, value)?,
                "split_ratio" => m.split_ratio = scalar(key, value)?,
                "master_seed" => m.master_seed = scalar(key, value)?,
                "normalization" => {
                    m.normalization = match value.trim() {
                        "per_antenna" => Normalization::PerAntenna,
                        "per_example" => Normalization::PerExample,
                        other => return Err(format!("normalization: unknown value `{other}`")),
                    }
                }
                "path" => self.dataset_path = Some(PathBuf::from(value.trim())),
                _ => return Err(format!("[dataset]: unknown key `{key}`")),
            }
        }
        Ok(())
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e| format!("{key}: `{value}`: {e}"))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(format!("{key}: empty list"));
    }
    Ok(items)
}

fn read_modem(m: &mut ModemConfig, props: &Properties) -> Result<(), String> {
    for (key, value) in props.iter() {
        match key {
            "roll_off" => m.roll_off = scalar(key, value)?,
            "samples_per_symbol" => m.samples_per_symbol = scalar(key, value)?,
            "span_symbols" => m.span_symbols = scalar(key, value)?,
            "am_index" => m.am_index = scalar(key, value)?,
            "fm_deviation" => m.fm_deviation = scalar(key, value)?,
            "gmsk_bt" => m.gmsk_bt = scalar(key, value)?,
            "message_tones" => m.message_tones = scalar(key, value)?,
            "message_max_freq" => m.message_max_freq = scalar(key, value)?,
            _ => return Err(format!("[modem]: unknown key `{key}`")),
        }
    }
    Ok(())
}

fn read_train(t: &mut TrainConfig, props: &Properties) -> Result<(), String> {
    for (key, value) in props.iter() {
        match key {
            "arch" => t.arch = value.parse().map_err(|e: crate::archs::ArchError| e.to_string())?,
            "n_antennas" => t.n_antennas = scalar(key, value)?,
            "view_pool" => t.view_pool = value.parse().map_err(|e: crate::archs::ArchError| e.to_string())?,
            "batch_size" => t.batch_size = scalar(key, value)?,
            "learning_rate" => t.learning_rate = scalar(key, value)?,
            "max_epochs" => t.max_epochs = scalar(key, value)?,
            "patience" => t.patience = scalar(key, value)?,
            "width_multiplier" => t.width_multiplier = scalar(key, value)?,
            "validation_fraction" => t.validation_fraction = scalar(key, value)?,
            "target_loss" => t.target_loss = Some(scalar(key, value)?),
            "phase_augment" => t.phase_augment = scalar(key, value)?,
            "seed" => t.seed = scalar(key, value)?,
            _ => return Err(format!("[train]: unknown key `{key}`")),
        }
    }
    Ok(())
}

fn read_experiment(e: &mut ExperimentConfig, props: &Properties) -> Result<(), String> {
    for (key, value) in props.iter() {
        match key {
            "archs" => {
                e.archs = value
                    .split(',')
                    .map(|s| s.parse::<ArchKind>().map_err(|err| err.to_string()))
                    .collect::<Result<_, _>>()?
            }
            "antennas" => e.antennas = list(key, value)?,
            "seeds" => e.seeds = list(key, value)?,
            _ => return Err(format!("[experiment]: unknown key `{key}`")),
        }
    }
    Ok(())
}

/// Scheme names for a `schemes = ...` line.
pub fn scheme_list(schemes: &[ModulationScheme]) -> String {
    schemes.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_desk_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.manifest, DatasetManifest::default());
        assert_eq!(c.train, TrainConfig::default());
        assert_eq!(c.train.learning_rate, 1e-3);
        assert_eq!(c.train.batch_size, 64);
    }

    #[test]
    fn full_file() {
        let text = "
# desk run
[dataset]
schemes = BPSK, 16QAM
snr_grid_db = -4, 2.5
n_antennas = 2
frame_len = 128
examples_per_cell = 10
normalization = per_example

[modem]
roll_off = 0.25

[train]
arch = wlcnn
view_pool = mean
max_epochs = 3
learning_rate = 0.01

[experiment]
archs = mvcnn, coamc
antennas = 1, 2
seeds = 7
";
        let c = Config::parse(text).unwrap();
        assert_eq!(c.manifest.schemes, vec![ModulationScheme::Bpsk, ModulationScheme::Qam16]);
        assert_eq!(c.manifest.snr_grid_db, vec![-4.0, 2.5]);
        assert_eq!(c.manifest.normalization, Normalization::PerExample);
        assert_eq!(c.manifest.modem.roll_off, 0.25);
        assert_eq!(c.train.arch, ArchKind::Wlcnn);
        assert_eq!(c.train.view_pool, ViewPool::Mean);
        assert_eq!(c.experiment.archs, vec![ArchKind::Mvcnn, ArchKind::CoAmc]);
        assert_eq!(c.experiment.seeds, vec![7]);
        assert_eq!(scheme_list(&c.manifest.schemes), "BPSK, 16QAM");
    }

    #[test]
    fn errors_name_the_problem() {
        for (text, needle) in [
            ("[train]\nbatch = 3", "batch"),
            ("[train]\nlearning_rate = -1", "learning_rate"),
            ("[train]\nbatch_size = 0", "batch_size"),
            ("[nope]\na = 1", "nope"),
            ("[dataset]\nschemes = BPSK, XYZ", "XYZ"),
            ("[train]\narch = resnet", "resnet"),
        ] {
            let err = Config::parse(text).unwrap_err();
            assert!(err.contains(needle), "{text}: {err}");
        }
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = Config::load("/definitely/not/here.cfg").unwrap_err();
        assert!(err.to_string().contains("/definitely/not/here.cfg"));
    }
}
