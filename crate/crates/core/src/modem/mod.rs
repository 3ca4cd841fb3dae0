//! Baseband waveform synthesis for the twenty supported modulation schemes.
//!
//! Linear digital schemes map random bits onto a unit-energy alphabet and are
//! pulse-shaped with a root-raised-cosine filter at 8 samples per symbol.
//! Analog schemes modulate a band-limited random multi-tone message. Every
//! frame leaves this module with unit mean power.

mod analog;
mod constellation;
mod pulse;
mod scheme;

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

pub use analog::synthesize_analog;
pub use constellation::{build_constellation, map_symbols, random_symbols, Constellation};
pub use pulse::{pulse_shape, pulse_shape_full, rrc_taps, symbols_needed};
pub use scheme::ModulationScheme;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("unknown modulation scheme `{0}`")]
    UnknownScheme(String),
    #[error("{0} has no symbol constellation")]
    NotLinearDigital(ModulationScheme),
    #[error("{0} is not an analog or continuous-phase scheme")]
    NotAnalog(ModulationScheme),
    #[error("{len} bits is not a multiple of {bits_per_symbol} bits per symbol")]
    BitLength { len: usize, bits_per_symbol: usize },
    #[error("roll-off {0} outside (0, 1]")]
    InvalidRollOff(f64),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("{symbols} symbols give {available} steady-state samples, {needed} needed; supply more symbols")]
    TooFewSymbols {
        available: usize,
        needed: usize,
        symbols: usize,
    },
    #[error("num_samples must be >= 1")]
    EmptyFrame,
}

/// Waveform parameters shared by all schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModemConfig {
    pub roll_off: f64,
    pub samples_per_symbol: usize,
    pub span_symbols: usize,
    pub am_index: f64,
    /// Peak frequency deviation per unit message amplitude, cycles/sample.
    pub fm_deviation: f64,
    pub gmsk_bt: f64,
    pub message_tones: usize,
    /// Upper edge of the message band, cycles/sample.
    pub message_max_freq: f64,
}

impl Default for ModemConfig {
    fn default() -> Self {
        Self {
            roll_off: 0.35,
            samples_per_symbol: 8,
            span_symbols: 16,
            am_index: 0.8,
            fm_deviation: 0.05,
            gmsk_bt: 0.3,
            message_tones: 8,
            message_max_freq: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    pub samples: Vec<Complex64>,
    pub samples_per_symbol: usize,
}

impl BasebandSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        mean_power(&self.samples)
    }
}

pub(crate) fn mean_power(samples: &[Complex64]) -> f64 {
    samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / samples.len() as f64
}

/// Rescales in place to unit mean power; an all-zero frame is left untouched.
pub(crate) fn normalize_power(samples: &mut [Complex64]) {
    let p = mean_power(samples);
    if p > 0.0 {
        let scale = p.sqrt().recip();
        samples.iter_mut().for_each(|z| *z *= scale);
    }
}

/// One unit-power frame of `num_samples` samples for `scheme`.
pub fn synthesize<R: Rng + ?Sized>(
    scheme: ModulationScheme,
    num_samples: usize,
    config: &ModemConfig,
    rng: &mut R,
) -> Result<BasebandSignal, ModemError> {
    if num_samples == 0 {
        return Err(ModemError::EmptyFrame);
    }
    if !scheme.is_linear_digital() {
        return synthesize_analog(scheme, num_samples, config, rng);
    }
    let constellation = build_constellation(scheme)?;
    let sps = config.samples_per_symbol;
    let taps = rrc_taps(config.roll_off, sps, config.span_symbols)?;
    let symbols = random_symbols(
        &constellation,
        symbols_needed(num_samples, sps, config.span_symbols),
        rng,
    );
    pulse_shape(&symbols, &taps, sps, num_samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn every_scheme_gives_unit_power_frames_of_requested_length() {
        let cfg = ModemConfig::default();
        for scheme in ModulationScheme::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(scheme.class_index() as u64);
            let sig = synthesize(scheme, 512, &cfg, &mut rng).unwrap();
            assert_eq!(sig.len(), 512, "{scheme}");
            assert!((sig.mean_power() - 1.0).abs() < 1e-9, "{scheme}");
        }
    }

    #[test]
    fn same_seed_same_frame() {
        let cfg = ModemConfig::default();
        for scheme in ModulationScheme::ALL {
            let a = synthesize(scheme, 300, &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
            let b = synthesize(scheme, 300, &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
            let bits = |s: &BasebandSignal| -> Vec<u64> {
                s.samples.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
            };
            assert_eq!(bits(&a), bits(&b), "{scheme}");
        }
    }

    #[test]
    fn zero_length_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            synthesize(ModulationScheme::Bpsk, 0, &ModemConfig::default(), &mut rng),
            Err(ModemError::EmptyFrame)
        );
    }
}
