//! Labeled multi-antenna examples: framing, generation, stratified splits and
//! the binary container format.

pub(crate) mod format;
mod seed;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::channel::{apply_channel, draw_fading, ChannelDraw, ChannelError, ReceivedFrame};
use crate::modem::{synthesize, ModemConfig, ModemError, ModulationScheme};

pub use format::{encoded_len, load_dataset, read_dataset, save_dataset, write_dataset, FORMAT_VERSION, MAGIC};
pub use seed::{derive_seed, mix64};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("cannot split: {0}")]
    Split(String),
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How received frames are scaled before they reach the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Each antenna's 2xN slice gets unit mean power.
    #[default]
    PerAntenna,
    /// One scale for the whole N_r x 2 x N tensor, unit mean power per sample.
    PerExample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiAntennaExample {
    /// `n_antennas x 2 x frame_len`, row-major; row 0 of each slice is I, row 1 is Q.
    pub tensor: Vec<f32>,
    pub label: u16,
    pub snr_db: f32,
    pub seed: u64,
}

impl MultiAntennaExample {
    /// The 2 x N slice for antenna `a`.
    pub fn antenna(&self, a: usize, frame_len: usize) -> &[f32] {
        &self.tensor[a * 2 * frame_len..(a + 1) * 2 * frame_len]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub n_antennas: u32,
    pub frame_len: u32,
    pub n_classes: u32,
    pub snr_grid_db: Vec<f32>,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub examples: Vec<MultiAntennaExample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_antennas(&self) -> usize {
        self.header.n_antennas as usize
    }

    pub fn frame_len(&self) -> usize {
        self.header.frame_len as usize
    }

    fn with_examples(&self, examples: Vec<MultiAntennaExample>) -> Dataset {
        Dataset {
            header: self.header.clone(),
            examples,
        }
    }

    /// Keeps only the first `count` antennas of every example.
    pub fn select_antennas(&self, count: usize) -> Result<Dataset, DatasetError> {
        if count == 0 || count > self.n_antennas() {
            return Err(DatasetError::Manifest(format!(
                "cannot keep {count} of {} antennas",
                self.n_antennas()
            )));
        }
        let keep = count * 2 * self.frame_len();
        let examples = self
            .examples
            .iter()
            .map(|e| MultiAntennaExample {
                tensor: e.tensor[..keep].to_vec(),
                ..e.clone()
            })
            .collect();
        let mut out = self.with_examples(examples);
        out.header.n_antennas = count as u32;
        Ok(out)
    }

    /// Examples grouped by (label, snr) cell, in first-appearance order of the keys.
    pub fn cells(&self) -> BTreeMap<(u16, u32), Vec<usize>> {
        let mut cells: BTreeMap<(u16, u32), Vec<usize>> = BTreeMap::new();
        for (i, e) in self.examples.iter().enumerate() {
            cells.entry((e.label, e.snr_db.to_bits())).or_default().push(i);
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub schemes: Vec<ModulationScheme>,
    pub snr_grid_db: Vec<f64>,
    pub n_antennas: usize,
    pub frame_len: usize,
    pub examples_per_cell: usize,
    pub split_ratio: f64,
    pub master_seed: u64,
    pub normalization: Normalization,
    pub modem: ModemConfig,
}

impl Default for DatasetManifest {
    /// The desk-scale manifest: four schemes, three SNRs, 400 examples per cell.
    fn default() -> Self {
        Self {
            schemes: vec![
                ModulationScheme::Bpsk,
                ModulationScheme::Qpsk,
                ModulationScheme::Qam16,
                ModulationScheme::Fm,
            ],
            snr_grid_db: vec![-10.0, 0.0, 10.0],
            n_antennas: 4,
            frame_len: 512,
            examples_per_cell: 400,
            split_ratio: 0.5,
            master_seed: 1,
            normalization: Normalization::PerAntenna,
            modem: ModemConfig::default(),
        }
    }
}

impl DatasetManifest {
    /// All twenty schemes, 2000 examples per cell, a 2 dB SNR grid from -20 to 18 dB.
    pub fn full_scale(n_antennas: usize) -> Self {
        Self {
            schemes: ModulationScheme::ALL.to_vec(),
            snr_grid_db: (-10..=9).map(|k| 2.0 * k as f64).collect(),
            n_antennas,
            examples_per_cell: 2000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |msg: String| Err(DatasetError::Manifest(msg));
        if self.schemes.is_empty() {
            return fail("no schemes".into());
        }
        if self.snr_grid_db.is_empty() {
            return fail("empty SNR grid".into());
        }
        if !(1..=8).contains(&self.n_antennas) {
            return fail(format!("n_antennas must be in 1..=8, got {}", self.n_antennas));
        }
        if self.frame_len == 0 {
            return fail("frame_len must be >= 1".into());
        }
        if self.examples_per_cell == 0 {
            return fail("examples_per_cell must be >= 1".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return fail(format!("split_ratio must be in (0, 1), got {}", self.split_ratio));
        }
        if self.examples_per_cell < 2 {
            return fail("examples_per_cell must be >= 2 for a two-way split".into());
        }
        Ok(())
    }

    pub fn expected_len(&self) -> usize {
        self.schemes.len() * self.snr_grid_db.len() * self.examples_per_cell
    }
}

/// Splits complex rows into I/Q rows and applies the chosen power normalization.
///
/// Returns `n_antennas * 2 * frame_len` values in f64.
pub fn frame_iq(received: &ReceivedFrame, normalization: Normalization) -> Vec<f64> {
    let n = received.frame_len();
    let mut out = Vec::with_capacity(received.n_antennas() * 2 * n);
    for row in &received.samples {
        out.extend(row.iter().map(|z| z.re));
        out.extend(row.iter().map(|z| z.im));
    }
    normalize_iq(&mut out, received.n_antennas(), n, normalization);
    out
}

/// Power-normalizes an `n_antennas x 2 x frame_len` I/Q tensor in place.
pub fn normalize_iq(iq: &mut [f64], n_antennas: usize, frame_len: usize, normalization: Normalization) {
    let slice = 2 * frame_len;
    match normalization {
        Normalization::PerAntenna => {
            for chunk in iq.chunks_mut(slice).take(n_antennas) {
                scale_to_unit(chunk, frame_len);
            }
        }
        Normalization::PerExample => scale_to_unit(iq, n_antennas * frame_len),
    }
}

fn scale_to_unit(values: &mut [f64], samples: usize) {
    let power = values.iter().map(|v| v * v).sum::<f64>() / samples as f64;
    if power > 0.0 {
        let scale = power.sqrt().recip();
        values.iter_mut().for_each(|v| *v *= scale);
    }
}

pub fn frame_example(
    received: &ReceivedFrame,
    label: u16,
    seed: u64,
    normalization: Normalization,
) -> MultiAntennaExample {
    MultiAntennaExample {
        tensor: frame_iq(received, normalization).into_iter().map(|v| v as f32).collect(),
        label,
        snr_db: received.draw.snr_db as f32,
        seed,
    }
}

/// Builds one example from its derived seed: fresh waveform, fading and noise.
pub fn generate_example(
    manifest: &DatasetManifest,
    scheme: ModulationScheme,
    snr_db: f64,
    seed: u64,
) -> Result<MultiAntennaExample, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = synthesize(scheme, manifest.frame_len, &manifest.modem, &mut rng)?;
    let coefficients = draw_fading(manifest.n_antennas, &mut rng)?;
    let draw = ChannelDraw {
        coefficients,
        snr_db,
        noise_seed: rng.next_u64(),
    };
    let received = apply_channel(&signal, &draw)?;
    Ok(frame_example(
        &received,
        scheme.class_index() as u16,
        seed,
        manifest.normalization,
    ))
}

pub fn generate_dataset(manifest: &DatasetManifest) -> Result<Dataset, DatasetError> {
    manifest.validate()?;
    let mut examples = Vec::with_capacity(manifest.expected_len());
    for &scheme in &manifest.schemes {
        for (snr_idx, &snr_db) in manifest.snr_grid_db.iter().enumerate() {
            for i in 0..manifest.examples_per_cell {
                let seed = derive_seed(
                    manifest.master_seed,
                    scheme.class_index() as u64,
                    snr_idx as u64,
                    i as u64,
                );
                examples.push(generate_example(manifest, scheme, snr_db, seed)?);
            }
        }
    }
    Ok(Dataset {
        header: DatasetHeader {
            n_antennas: manifest.n_antennas as u32,
            frame_len: manifest.frame_len as u32,
            n_classes: ModulationScheme::COUNT as u32,
            snr_grid_db: manifest.snr_grid_db.iter().map(|&s| s as f32).collect(),
            master_seed: manifest.master_seed,
        },
        examples,
    })
}

/// Stratified split: each (label, snr) cell contributes `round(ratio * n)`
/// examples to the first set and the rest to the second. Original order is kept.
pub fn split<R: Rng + ?Sized>(dataset: &Dataset, ratio: f64, rng: &mut R) -> Result<(Dataset, Dataset), DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::Split(format!("ratio must be in (0, 1), got {ratio}")));
    }
    let mut in_first = vec![false; dataset.len()];
    for ((label, snr_bits), mut idx) in dataset.cells() {
        let n = idx.len();
        let take = (ratio * n as f64).round() as usize;
        if take == 0 || take == n {
            return Err(DatasetError::Split(format!(
                "cell (label {label}, snr {} dB) has {n} examples, too few for ratio {ratio}",
                f32::from_bits(snr_bits)
            )));
        }
        idx.shuffle(rng);
        for &i in &idx[..take] {
            in_first[i] = true;
        }
    }
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for (e, &f) in dataset.examples.iter().zip(&in_first) {
        if f {
            first.push(e.clone());
        } else {
            second.push(e.clone());
        }
    }
    Ok((dataset.with_examples(first), dataset.with_examples(second)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn small_manifest() -> DatasetManifest {
        DatasetManifest {
            schemes: vec![ModulationScheme::Bpsk, ModulationScheme::Fm],
            snr_grid_db: vec![0.0, 10.0],
            n_antennas: 2,
            frame_len: 64,
            examples_per_cell: 6,
            ..DatasetManifest::default()
        }
    }

    fn frame(rows: Vec<Vec<Complex64>>) -> ReceivedFrame {
        ReceivedFrame {
            draw: ChannelDraw {
                coefficients: vec![Complex64::new(1.0, 0.0); rows.len()],
                snr_db: 3.0,
                noise_seed: 0,
            },
            samples: rows,
        }
    }

    #[test]
    fn iq_split_before_scaling() {
        let rx = frame(vec![vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, -4.0)]]);
        let iq = frame_iq(&rx, Normalization::PerAntenna);
        // mean power (|1+2j|^2 + |3-4j|^2) / 2 = 15
        let s = 15f64.sqrt();
        let want = [1.0 / s, 3.0 / s, 2.0 / s, -4.0 / s];
        for (g, w) in iq.iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }
    }

    #[test]
    fn per_antenna_normalization_and_idempotence() {
        let rows = vec![
            (0..512).map(|i| Complex64::new((i as f64).sin() * 3.0, 0.5)).collect(),
            (0..512).map(|i| Complex64::new(0.01, (i as f64 * 0.3).cos() * 0.02)).collect(),
        ];
        let rx = frame(rows);
        let iq = frame_iq(&rx, Normalization::PerAntenna);
        for a in 0..2 {
            let p: f64 = iq[a * 1024..(a + 1) * 1024].iter().map(|v| v * v).sum::<f64>() / 512.0;
            assert!((p - 1.0).abs() < 1e-9);
        }
        let mut again = iq.clone();
        normalize_iq(&mut again, 2, 512, Normalization::PerAntenna);
        for (a, b) in iq.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12);
        }
        let joint = frame_iq(&rx, Normalization::PerExample);
        let p: f64 = joint.iter().map(|v| v * v).sum::<f64>() / 1024.0;
        assert!((p - 1.0).abs() < 1e-9);
    }

    #[test]
    fn framing_recovers_direction() {
        let row: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let rx = frame(vec![row.clone()]);
        let iq = frame_iq(&rx, Normalization::PerAntenna);
        let scale = iq[1] / row[1].re;
        for (i, z) in row.iter().enumerate() {
            let back = Complex64::new(iq[i], iq[16 + i]) / scale;
            assert!((back - z).norm() < 1e-12);
        }
    }

    #[test]
    fn generated_dataset_shape_balance_and_determinism() {
        let m = small_manifest();
        let d = generate_dataset(&m).unwrap();
        assert_eq!(d.len(), 2 * 2 * 6);
        for e in &d.examples {
            assert_eq!(e.tensor.len(), 2 * 2 * 64);
            for a in 0..2 {
                let p: f64 = e.antenna(a, 64).iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / 64.0;
                assert!((p - 1.0).abs() < 1e-6);
            }
        }
        for s in &m.schemes {
            let n = d.examples.iter().filter(|e| e.label as usize == s.class_index()).count();
            assert_eq!(n, 2 * 6);
        }
        assert_eq!(d, generate_dataset(&m).unwrap());
    }

    #[test]
    fn full_scale_shape_is_nr_by_2_by_512() {
        let m = DatasetManifest {
            examples_per_cell: 2,
            snr_grid_db: vec![0.0],
            schemes: vec![ModulationScheme::Qam16],
            ..DatasetManifest::default()
        };
        let d = generate_dataset(&m).unwrap();
        assert_eq!(d.examples[0].tensor.len(), 4 * 2 * 512);
    }

    #[test]
    fn manifest_validation() {
        let mut m = small_manifest();
        m.n_antennas = 9;
        assert!(generate_dataset(&m).is_err());
        let mut m = small_manifest();
        m.split_ratio = 1.0;
        assert!(m.validate().is_err());
        let mut m = small_manifest();
        m.examples_per_cell = 1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn split_is_a_stratified_partition() {
        let mut m = small_manifest();
        m.examples_per_cell = 10;
        let d = generate_dataset(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = split(&d, 0.5, &mut rng).unwrap();
        assert_eq!(a.len() + b.len(), d.len());
        for cell in a.cells().values().chain(b.cells().values()) {
            assert_eq!(cell.len(), 5);
        }
        let seeds_a: std::collections::HashSet<u64> = a.examples.iter().map(|e| e.seed).collect();
        assert!(b.examples.iter().all(|e| !seeds_a.contains(&e.seed)));
        let mut all: Vec<u64> = a.examples.iter().chain(&b.examples).map(|e| e.seed).collect();
        let mut orig: Vec<u64> = d.examples.iter().map(|e| e.seed).collect();
        all.sort_unstable();
        orig.sort_unstable();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_rejects_tiny_cells_and_bad_ratio() {
        let mut m = small_manifest();
        m.examples_per_cell = 2;
        let d = generate_dataset(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(split(&d, 0.1, &mut rng).is_err());
        assert!(split(&d, 0.0, &mut rng).is_err());
        assert!(split(&d, 0.5, &mut rng).is_ok());
    }

    #[test]
    fn select_antennas_keeps_leading_slices() {
        let d = generate_dataset(&small_manifest()).unwrap();
        let one = d.select_antennas(1).unwrap();
        assert_eq!(one.n_antennas(), 1);
        assert_eq!(one.examples[3].tensor, d.examples[3].antenna(0, 64));
        assert!(d.select_antennas(3).is_err());
    }
}
