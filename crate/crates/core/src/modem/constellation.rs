//! Digital symbol alphabets and bit-to-symbol mapping.
//!
//! Point sets follow common industry choices: square Gray-coded QAM for
//! 16/64/256 points, cross QAM for 32/128 points, DVB-S2 ring ratios for
//! 16/32APSK with larger ring stacks for 64/128APSK, unipolar OOK and
//! Gray-coded 4ASK. Every alphabet is scaled to unit mean symbol energy.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use rand::Rng;

use super::{ModemError, ModulationScheme};

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub points: Vec<Complex64>,
    pub bits_per_symbol: usize,
    /// `labeling[pattern]` is the index into `points` for the bit pattern
    /// `pattern`, read most-significant bit first.
    pub labeling: Vec<usize>,
}

impl Constellation {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    pub fn point_for_pattern(&self, pattern: usize) -> Complex64 {
        self.points[self.labeling[pattern]]
    }

    fn normalized(mut self) -> Self {
        let scale = self.mean_energy().sqrt().recip();
        for p in &mut self.points {
            *p *= scale;
        }
        self
    }
}

fn gray(n: usize) -> usize {
    n ^ (n >> 1)
}

fn psk(order: usize, offset: f64) -> Constellation {
    let bits = order.trailing_zeros() as usize;
    let points = (0..order)
        .map(|k| Complex64::from_polar(1.0, offset + 2.0 * PI * k as f64 / order as f64))
        .collect();
    let mut labeling = vec![0; order];
    for k in 0..order {
        labeling[gray(k)] = k;
    }
    Constellation {
        points,
        bits_per_symbol: bits,
        labeling,
    }
}

fn square_qam(order: usize) -> Constellation {
    let side = (order as f64).sqrt().round() as usize;
    let half_bits = side.trailing_zeros() as usize;
    let level = |i: usize| (2 * i) as f64 - (side - 1) as f64;
    let mut points = Vec::with_capacity(order);
    for i in 0..side {
        for q in 0..side {
            points.push(Complex64::new(level(i), level(q)));
        }
    }
    let mut labeling = vec![0; order];
    for i in 0..side {
        for q in 0..side {
            labeling[(gray(i) << half_bits) | gray(q)] = i * side + q;
        }
    }
    Constellation {
        points,
        bits_per_symbol: 2 * half_bits,
        labeling,
    }
    .normalized()
}

/// Square grid with the corners cut away; natural binary labeling in raster order.
fn cross_qam(order: usize) -> Constellation {
    let (side, corner) = match order {
        32 => (6, 1),
        128 => (12, 2),
        _ => unreachable!("cross QAM defined for 32 and 128 points"),
    };
    let level = |i: usize| (2 * i) as f64 - (side - 1) as f64;
    let is_corner = |i: usize| i < corner || i >= side - corner;
    let mut points = Vec::with_capacity(order);
    for i in 0..side {
        for q in 0..side {
            if !(is_corner(i) && is_corner(q)) {
                points.push(Complex64::new(level(i), level(q)));
            }
        }
    }
    debug_assert_eq!(points.len(), order);
    Constellation {
        points,
        bits_per_symbol: order.trailing_zeros() as usize,
        labeling: (0..order).collect(),
    }
    .normalized()
}

/// Rings given as (points, radius, phase offset); natural labeling, inner ring first.
fn apsk(rings: &[(usize, f64, f64)]) -> Constellation {
    let mut points = Vec::new();
    for &(count, radius, offset) in rings {
        for k in 0..count {
            points.push(Complex64::from_polar(
                radius,
                offset + 2.0 * PI * k as f64 / count as f64,
            ));
        }
    }
    let order = points.len();
    Constellation {
        points,
        bits_per_symbol: order.trailing_zeros() as usize,
        labeling: (0..order).collect(),
    }
    .normalized()
}

pub fn build_constellation(scheme: ModulationScheme) -> Result<Constellation, ModemError> {
    use ModulationScheme::*;
    let c = match scheme {
        Bpsk => psk(2, 0.0),
        Qpsk => psk(4, FRAC_PI_4),
        Psk8 => psk(8, 0.0),
        Psk16 => psk(16, 0.0),
        Qam16 => square_qam(16),
        Qam64 => square_qam(64),
        Qam256 => square_qam(256),
        Qam32 => cross_qam(32),
        Qam128 => cross_qam(128),
        Apsk16 => apsk(&[(4, 1.0, FRAC_PI_4), (12, 2.85, PI / 12.0)]),
        Apsk32 => apsk(&[(4, 1.0, FRAC_PI_4), (12, 2.84, PI / 12.0), (16, 5.27, 0.0)]),
        Apsk64 => apsk(&[
            (4, 1.0, FRAC_PI_4),
            (12, 2.73, PI / 12.0),
            (20, 4.52, 0.0),
            (28, 6.31, PI / 28.0),
        ]),
        Apsk128 => apsk(&[
            (4, 1.0, FRAC_PI_4),
            (12, 2.6, PI / 12.0),
            (20, 4.2, 0.0),
            (28, 5.8, PI / 28.0),
            (64, 7.4, 0.0),
        ]),
        Ook => Constellation {
            points: vec![Complex64::new(0.0, 0.0), Complex64::new(2f64.sqrt(), 0.0)],
            bits_per_symbol: 1,
            labeling: vec![0, 1],
        },
        Ask4 => {
            let points = [-3.0, -1.0, 1.0, 3.0]
                .iter()
                .map(|&a| Complex64::new(a / 5f64.sqrt(), 0.0))
                .collect();
            let mut labeling = vec![0; 4];
            for k in 0..4 {
                labeling[gray(k)] = k;
            }
            Constellation {
                points,
                bits_per_symbol: 2,
                labeling,
            }
        }
        Gmsk | Fm | Am | Dsb | Ssb => return Err(ModemError::NotLinearDigital(scheme)),
    };
    Ok(c)
}

/// Maps each group of `bits_per_symbol` bits (MSB first) to a point.
pub fn map_symbols(constellation: &Constellation, bits: &[u8]) -> Result<Vec<Complex64>, ModemError> {
    let k = constellation.bits_per_symbol;
    if !bits.len().is_multiple_of(k) {
        return Err(ModemError::BitLength {
            len: bits.len(),
            bits_per_symbol: k,
        });
    }
    Ok(bits
        .chunks(k)
        .map(|group| {
            let pattern = group.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            constellation.point_for_pattern(pattern)
        })
        .collect())
}

/// Draws `count` uniformly random symbols through the bit labeling.
pub fn random_symbols<R: Rng + ?Sized>(
    constellation: &Constellation,
    count: usize,
    rng: &mut R,
) -> Vec<Complex64> {
    let bits: Vec<u8> = (0..count * constellation.bits_per_symbol)
        .map(|_| rng.random_range(0..2u8))
        .collect();
    map_symbols(constellation, &bits).expect("bit count is a multiple of bits_per_symbol")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn every_digital_alphabet_has_unit_energy_and_full_size() {
        for scheme in ModulationScheme::ALL.into_iter().filter(|s| s.is_linear_digital()) {
            let c = build_constellation(scheme).unwrap();
            assert!((c.mean_energy() - 1.0).abs() < 1e-12, "{scheme}: {}", c.mean_energy());
            assert_eq!(c.len(), 1 << c.bits_per_symbol, "{scheme}");
            let mut seen = c.labeling.clone();
            seen.sort_unstable();
            assert_eq!(seen, (0..c.len()).collect::<Vec<_>>(), "{scheme} labeling not a bijection");
        }
    }

    #[test]
    fn analog_schemes_have_no_constellation() {
        for s in [
            ModulationScheme::Gmsk,
            ModulationScheme::Fm,
            ModulationScheme::Am,
            ModulationScheme::Dsb,
            ModulationScheme::Ssb,
        ] {
            assert!(matches!(build_constellation(s), Err(ModemError::NotLinearDigital(_))));
        }
    }

    #[test]
    fn bpsk_and_qpsk_mapping() {
        let bpsk = build_constellation(ModulationScheme::Bpsk).unwrap();
        let out = map_symbols(&bpsk, &[0, 1]).unwrap();
        assert!(close(out[0], Complex64::new(1.0, 0.0)));
        assert!(close(out[1], Complex64::new(-1.0, 0.0)));

        let qpsk = build_constellation(ModulationScheme::Qpsk).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(map_symbols(&qpsk, &[0, 0]).unwrap()[0], Complex64::new(s, s)));
        for p in &qpsk.points {
            assert!((p.re.abs() - s).abs() < 1e-12 && (p.im.abs() - s).abs() < 1e-12);
        }
    }

    #[test]
    fn qam16_is_scaled_square_grid() {
        // Independent enumeration of the raw {±1,±3}² grid.
        let mut raw = Vec::new();
        for i in [-3.0, -1.0, 1.0, 3.0] {
            for q in [-3.0, -1.0, 1.0, 3.0] {
                raw.push(Complex64::new(i, q));
            }
        }
        let raw_energy: f64 = raw.iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
        assert!((raw_energy - 10.0).abs() < 1e-12);

        let c = build_constellation(ModulationScheme::Qam16).unwrap();
        for r in &raw {
            let scaled = r / 10f64.sqrt();
            assert!(c.points.iter().any(|p| close(*p, scaled)), "missing {scaled}");
        }
    }

    #[test]
    fn square_qam_neighbours_differ_in_one_bit() {
        let c = build_constellation(ModulationScheme::Qam64).unwrap();
        let min_dist = 2.0 / 42f64.sqrt();
        for a in 0..64 {
            for b in 0..64 {
                let d = (c.point_for_pattern(a) - c.point_for_pattern(b)).norm();
                if (d - min_dist).abs() < 1e-9 {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn ook_and_ask_points() {
        let ook = build_constellation(ModulationScheme::Ook).unwrap();
        assert!(close(ook.point_for_pattern(0), Complex64::new(0.0, 0.0)));
        assert!(close(ook.point_for_pattern(1), Complex64::new(2f64.sqrt(), 0.0)));
        let ask = build_constellation(ModulationScheme::Ask4).unwrap();
        let mut re: Vec<f64> = ask.points.iter().map(|p| p.re * 5f64.sqrt()).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in re.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn map_symbols_rejects_partial_groups() {
        let c = build_constellation(ModulationScheme::Qam16).unwrap();
        assert!(matches!(
            map_symbols(&c, &[0, 1, 1]),
            Err(ModemError::BitLength { len: 3, bits_per_symbol: 4 })
        ));
        assert_eq!(map_symbols(&c, &[0; 12]).unwrap().len(), 3);
    }

    #[test]
    fn random_symbols_stay_on_alphabet() {
        let c = build_constellation(ModulationScheme::Apsk32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in random_symbols(&c, 200, &mut rng) {
            assert!(c.points.iter().any(|p| close(*p, s)));
        }
    }
}
