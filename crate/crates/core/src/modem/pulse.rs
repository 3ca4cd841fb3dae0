//! Root-raised-cosine pulse shaping.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;

use super::{BasebandSignal, ModemError};

/// Unnormalized RRC impulse response at `t` symbol periods (T = 1).
fn rrc_value(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let edge = 1.0 / (4.0 * beta);
    if (t.abs() - edge).abs() < 1e-9 {
        let arg = PI / (4.0 * beta);
        return beta * FRAC_1_SQRT_2 * ((1.0 + 2.0 / PI) * arg.sin() + (1.0 - 2.0 / PI) * arg.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// `span_symbols * samples_per_symbol + 1` RRC taps, symmetric, scaled to unit energy.
pub fn rrc_taps(roll_off: f64, samples_per_symbol: usize, span_symbols: usize) -> Result<Vec<f64>, ModemError> {
    if !(roll_off > 0.0 && roll_off <= 1.0) {
        return Err(ModemError::InvalidRollOff(roll_off));
    }
    if span_symbols < 4 || !span_symbols.is_multiple_of(2) {
        return Err(ModemError::InvalidFilter(format!(
            "span_symbols must be even and >= 4, got {span_symbols}"
        )));
    }
    if samples_per_symbol < 2 {
        return Err(ModemError::InvalidFilter(format!(
            "samples_per_symbol must be >= 2, got {samples_per_symbol}"
        )));
    }
    let len = span_symbols * samples_per_symbol + 1;
    let center = (len / 2) as isize;
    let mut taps: Vec<f64> = (0..len as isize)
        .map(|k| rrc_value((k - center) as f64 / samples_per_symbol as f64, roll_off))
        .collect();
    let norm = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|h| *h /= norm);
    // Enforce exact symmetry against rounding in the two halves.
    for k in 0..len / 2 {
        let avg = 0.5 * (taps[k] + taps[len - 1 - k]);
        taps[k] = avg;
        taps[len - 1 - k] = avg;
    }
    Ok(taps)
}

/// Zero-insertion upsampling followed by full linear convolution with `taps`.
///
/// Output length is `symbols.len() * sps + taps.len() - 1`.
pub fn pulse_shape_full(symbols: &[Complex64], taps: &[f64], sps: usize) -> Vec<Complex64> {
    let upsampled_len = symbols.len() * sps;
    let mut out = vec![Complex64::new(0.0, 0.0); upsampled_len + taps.len() - 1];
    for (i, &s) in symbols.iter().enumerate() {
        let base = i * sps;
        for (k, &h) in taps.iter().enumerate() {
            out[base + k] += s * h;
        }
    }
    out
}

/// Number of symbols `pulse_shape` needs to emit `num_samples` steady-state samples.
pub fn symbols_needed(num_samples: usize, sps: usize, span_symbols: usize) -> usize {
    num_samples.div_ceil(sps) + span_symbols
}

/// Pulse-shapes `symbols` and keeps the first `num_samples` samples for which the
/// filter overlaps only symbol-populated positions, rescaled to unit mean power.
pub fn pulse_shape(
    symbols: &[Complex64],
    taps: &[f64],
    sps: usize,
    num_samples: usize,
) -> Result<BasebandSignal, ModemError> {
    if symbols.is_empty() || taps.is_empty() {
        return Err(ModemError::InvalidFilter("empty symbols or taps".into()));
    }
    let available = (symbols.len() * sps + 1).saturating_sub(taps.len());
    if available < num_samples {
        return Err(ModemError::TooFewSymbols {
            available,
            needed: num_samples,
            symbols: symbols.len(),
        });
    }
    let full = pulse_shape_full(symbols, taps, sps);
    let start = taps.len() - 1;
    let mut samples = full[start..start + num_samples].to_vec();
    super::normalize_power(&mut samples);
    Ok(BasebandSignal {
        samples,
        samples_per_symbol: sps,
    })
}

/// Plain complex-by-real convolution (full length).
#[cfg(test)]
pub(crate) fn convolve(signal: &[Complex64], taps: &[f64]) -> Vec<Complex64> {
    pulse_shape_full(signal, taps, 1)
}
