//! Analog and continuous-phase schemes: AM, DSB, SSB, FM and GMSK.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use super::{normalize_power, BasebandSignal, ModemConfig, ModemError, ModulationScheme};

/// Random message tones as (frequency in cycles/sample, phase).
fn message_tones<R: Rng + ?Sized>(config: &ModemConfig, rng: &mut R) -> Vec<(f64, f64)> {
    (0..config.message_tones)
        .map(|_| {
            // (0, max] rather than [0, max): no DC tone.
            let f = (1.0 - rng.random::<f64>()) * config.message_max_freq;
            let phase = rng.random::<f64>() * 2.0 * PI;
            (f, phase)
        })
        .collect()
}

/// Band-limited message and its analytic (positive-frequency) counterpart,
/// both scaled so the real message has unit RMS.
fn message<R: Rng + ?Sized>(
    num_samples: usize,
    config: &ModemConfig,
    rng: &mut R,
) -> (Vec<f64>, Vec<Complex64>) {
    let tones = message_tones(config, rng);
    let analytic: Vec<Complex64> = (0..num_samples)
        .map(|n| {
            tones
                .iter()
                .map(|&(f, ph)| Complex64::from_polar(1.0, 2.0 * PI * f * n as f64 + ph))
                .sum()
        })
        .collect();
    let real: Vec<f64> = analytic.iter().map(|z| z.re).collect();
    let rms = (real.iter().map(|x| x * x).sum::<f64>() / num_samples as f64).sqrt();
    let scale = if rms > 0.0 { rms.recip() } else { 1.0 };
    (
        real.iter().map(|x| x * scale).collect(),
        analytic.iter().map(|z| z * scale).collect(),
    )
}

fn gaussian_taps(bt: f64, sps: usize, span_symbols: usize) -> Vec<f64> {
    let len = span_symbols * sps + 1;
    let center = (len / 2) as f64;
    let sigma = (2f64.ln()).sqrt() / (2.0 * PI * bt);
    let mut taps: Vec<f64> = (0..len)
        .map(|k| {
            let t = (k as f64 - center) / sps as f64;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    taps
}

const GMSK_FILTER_SPAN: usize = 4;

fn gmsk<R: Rng + ?Sized>(num_samples: usize, config: &ModemConfig, rng: &mut R) -> Vec<Complex64> {
    let sps = config.samples_per_symbol;
    let taps = gaussian_taps(config.gmsk_bt, sps, GMSK_FILTER_SPAN);
    let transient = taps.len() - 1;
    let n_bits = (num_samples + transient).div_ceil(sps) + 1;
    let bits: Vec<f64> = (0..n_bits)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let held: Vec<f64> = bits.iter().flat_map(|&b| std::iter::repeat_n(b, sps)).collect();
    // Modulation index 1/2: every full symbol advances the phase by ±π/2.
    let step = 0.5 * PI / sps as f64;
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(num_samples);
    for n in transient..transient + num_samples {
        let freq: f64 = taps.iter().enumerate().map(|(k, h)| h * held[n - k]).sum();
        phase += step * freq;
        out.push(Complex64::from_polar(1.0, phase));
    }
    out
}

/// Synthesizes one frame of an analog or continuous-phase scheme.
pub fn synthesize_analog<R: Rng + ?Sized>(
    scheme: ModulationScheme,
    num_samples: usize,
    config: &ModemConfig,
    rng: &mut R,
) -> Result<BasebandSignal, ModemError> {
    let mut samples = match scheme {
        ModulationScheme::Gmsk => gmsk(num_samples, config, rng),
        ModulationScheme::Fm => {
            let (msg, _) = message(num_samples, config, rng);
            let mut phase = 0.0;
            msg.iter()
                .map(|m| {
                    phase += 2.0 * PI * config.fm_deviation * m;
                    Complex64::from_polar(1.0, phase)
                })
                .collect()
        }
        ModulationScheme::Am => {
            let (msg, _) = message(num_samples, config, rng);
            let peak = msg.iter().fold(0.0f64, |a, m| a.max(m.abs())).max(f64::MIN_POSITIVE);
            msg.iter()
                .map(|m| Complex64::new(1.0 + config.am_index * m / peak, 0.0))
                .collect()
        }
        ModulationScheme::Dsb => {
            let (msg, _) = message(num_samples, config, rng);
            msg.into_iter().map(|m| Complex64::new(m, 0.0)).collect()
        }
        ModulationScheme::Ssb => message(num_samples, config, rng).1,
        other => return Err(ModemError::NotAnalog(other)),
    };
    normalize_power(&mut samples);
    Ok(BasebandSignal {
        samples,
        samples_per_symbol: config.samples_per_symbol,
    })
}
