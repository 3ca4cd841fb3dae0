//! Flat Rayleigh fading plus AWGN across `N_r` receive antennas.
//!
//! Each antenna sees `r_n = h_n * s + w_n` with `h_n ~ CN(0, 1)` held constant
//! over a frame and `w_n ~ CN(0, sigma^2)`. `snr_db` is the per-antenna
//! *average* SNR, so `sigma^2 = 10^(-snr_db / 10)` for a unit-power `s`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::modem::BasebandSignal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("at least one antenna is required")]
    NoAntennas,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub coefficients: Vec<Complex64>,
    /// Per-antenna average SNR; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub noise_seed: u64,
}

impl ChannelDraw {
    pub fn n_antennas(&self) -> usize {
        self.coefficients.len()
    }

    pub fn noise_variance(&self) -> f64 {
        noise_variance(self.snr_db)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    /// One row of `N` samples per antenna.
    pub samples: Vec<Vec<Complex64>>,
    pub draw: ChannelDraw,
}

impl ReceivedFrame {
    pub fn n_antennas(&self) -> usize {
        self.samples.len()
    }

    pub fn frame_len(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }
}

/// Complex noise variance for a unit-power signal at `snr_db`.
pub fn noise_variance(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    Complex64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

/// I.i.d. `CN(0, 1)` coefficients, one per antenna.
pub fn draw_fading<R: Rng + ?Sized>(n_antennas: usize, rng: &mut R) -> Result<Vec<Complex64>, ChannelError> {
    if n_antennas < 1 {
        return Err(ChannelError::NoAntennas);
    }
    Ok((0..n_antennas).map(|_| complex_normal(rng)).collect())
}

pub fn apply_channel(signal: &BasebandSignal, draw: &ChannelDraw) -> Result<ReceivedFrame, ChannelError> {
    if draw.coefficients.is_empty() {
        return Err(ChannelError::NoAntennas);
    }
    let sigma = draw.noise_variance().sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(draw.noise_seed);
    let samples = draw
        .coefficients
        .iter()
        .map(|&h| {
            signal
                .samples
                .iter()
                .map(|&s| {
                    let faded = h * s;
                    if sigma > 0.0 {
                        faded + complex_normal(&mut rng) * sigma
                    } else {
                        faded
                    }
                })
                .collect()
        })
        .collect();
    Ok(ReceivedFrame {
        samples,
        draw: draw.clone(),
    })
}

/// `10 log10(sum |clean|^2 / sum |noisy - clean|^2)`; `+inf` when noise-free.
pub fn measured_snr(clean: &[Vec<Complex64>], noisy: &[Vec<Complex64>]) -> Result<f64, ChannelError> {
    if clean.len() != noisy.len() || clean.iter().zip(noisy).any(|(a, b)| a.len() != b.len()) {
        return Err(ChannelError::Shape("clean and noisy frames differ in shape".into()));
    }
    let mut signal = 0.0;
    let mut noise = 0.0;
    for (c_row, n_row) in clean.iter().zip(noisy) {
        for (c, n) in c_row.iter().zip(n_row) {
            signal += c.norm_sqr();
            noise += (n - c).norm_sqr();
        }
    }
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::{synthesize, ModemConfig, ModulationScheme};

    fn unit_signal(seed: u64, n: usize) -> BasebandSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        synthesize(ModulationScheme::Qpsk, n, &ModemConfig::default(), &mut rng).unwrap()
    }

    #[test]
    fn fading_requires_an_antenna() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(draw_fading(0, &mut rng), Err(ChannelError::NoAntennas));
    }

    #[test]
    fn fading_is_seed_deterministic() {
        let a = draw_fading(4, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = draw_fading(4, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_channel_is_pure_scaling() {
        let sig = unit_signal(1, 128);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let draw = ChannelDraw {
            coefficients: draw_fading(3, &mut rng).unwrap(),
            snr_db: f64::INFINITY,
            noise_seed: 5,
        };
        let rx = apply_channel(&sig, &draw).unwrap();
        for (row, h) in rx.samples.iter().zip(&draw.coefficients) {
            for (r, s) in row.iter().zip(&sig.samples) {
                assert_eq!(*r, h * s);
            }
        }
    }

    #[test]
    fn measured_snr_edge_cases() {
        let clean = vec![vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)]];
        assert_eq!(measured_snr(&clean, &clean).unwrap(), f64::INFINITY);
        let doubled: Vec<Vec<Complex64>> =
            clean.iter().map(|r| r.iter().map(|z| z * 2.0).collect()).collect();
        assert!(measured_snr(&clean, &doubled).unwrap().abs() < 1e-12);
        assert!(measured_snr(&clean, &[vec![]]).is_err());
    }

    #[test]
    fn noise_variance_at_10_db() {
        let sig = BasebandSignal {
            samples: vec![Complex64::new(0.0, 0.0); 200_000],
            samples_per_symbol: 8,
        };
        let draw = ChannelDraw {
            coefficients: vec![Complex64::new(1.0, 0.0)],
            snr_db: 10.0,
            noise_seed: 77,
        };
        let rx = apply_channel(&sig, &draw).unwrap();
        let var = rx.samples[0].iter().map(|z| z.norm_sqr()).sum::<f64>() / 200_000.0;
        assert!((var - 0.1).abs() / 0.1 < 0.01, "{var}");
    }

    #[test]
    fn snr_zero_db_power_ratio() {
        // Average of |h s|^2 over average |w|^2 across many frames.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (mut sig_p, mut noise_p) = (0.0, 0.0);
        for f in 0..20_000u64 {
            let sig = unit_signal(f, 16);
            let draw = ChannelDraw {
                coefficients: draw_fading(1, &mut rng).unwrap(),
                snr_db: 0.0,
                noise_seed: f ^ 0xabcdef,
            };
            let rx = apply_channel(&sig, &draw).unwrap();
            for (r, s) in rx.samples[0].iter().zip(&sig.samples) {
                let clean = draw.coefficients[0] * s;
                sig_p += clean.norm_sqr();
                noise_p += (r - clean).norm_sqr();
            }
        }
        let ratio = sig_p / noise_p;
        assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn cross_antenna_noise_is_uncorrelated() {
        let sig = BasebandSignal {
            samples: vec![Complex64::new(0.0, 0.0); 1_000_000],
            samples_per_symbol: 8,
        };
        let draw = ChannelDraw {
            coefficients: vec![Complex64::new(1.0, 0.0); 2],
            snr_db: 0.0,
            noise_seed: 3,
        };
        let rx = apply_channel(&sig, &draw).unwrap();
        let corr: Complex64 = rx.samples[0]
            .iter()
            .zip(&rx.samples[1])
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            / 1_000_000.0;
        assert!(corr.norm() < 0.01, "{corr}");
    }

    #[test]
    fn fading_is_flat_within_a_frame() {
        let sig = unit_signal(4, 64);
        let draw = ChannelDraw {
            coefficients: vec![Complex64::new(0.3, -0.7), Complex64::new(-1.1, 0.2)],
            snr_db: f64::INFINITY,
            noise_seed: 0,
        };
        let rx = apply_channel(&sig, &draw).unwrap();
        for (row, h) in rx.samples.iter().zip(&draw.coefficients) {
            for (r, s) in row.iter().zip(&sig.samples) {
                assert!((r / s - h).norm() < 1e-12);
            }
        }
    }
}
