//! Square-QAM mapping with Gray labels, exact-posterior soft demapping, and
//! the bit-wise binary cross-entropy loss (base-2 logs).
//!
//! Labeling convention (frozen): for a 2^(2m)-point constellation the first
//! m bits of a symbol label select the I level and the last m bits the Q
//! level, each through a binary-reflected Gray code over descending
//! amplitude. For QPSK this makes bits 00 -> (+1+j)/sqrt(2).

use num_complex::Complex64;

use crate::{DbuError, Result};

/// Probability clamp applied to soft demapper outputs.
pub const PROB_EPS: f64 = 1e-12;

/// Supported modulation orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Qpsk,
    Qam16,
    Qam64,
}

impl Modulation {
    pub fn order(self) -> usize {
        match self {
            Modulation::Qpsk => 4,
            Modulation::Qam16 => 16,
            Modulation::Qam64 => 64,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
            Modulation::Qam64 => 6,
        }
    }
}

impl std::str::FromStr for Modulation {
    type Err = DbuError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" | "16" => Ok(Modulation::Qam16),
            "64qam" | "qam64" | "64" => Ok(Modulation::Qam64),
            other => Err(DbuError::Config(format!("unknown modulation '{other}'"))),
        }
    }
}

/// Unit-average-energy square QAM constellation with Gray bit labels.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub modulation: Modulation,
    /// points[label] where label is the integer formed by the symbol bits
    /// (first bit = MSB).
    pub points: Vec<Complex64>,
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = 0usize;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let m = modulation.bits_per_symbol() / 2; // bits per axis
        let levels_per_axis = 1usize << m;
        // Mean point energy = 2*(L^2 - 1)/3 before normalization.
        let norm = (2.0 * ((levels_per_axis * levels_per_axis - 1) as f64) / 3.0).sqrt();
        let axis_level = |bits: usize| -> f64 {
            let k = gray_decode(bits);
            (levels_per_axis as f64 - 1.0 - 2.0 * k as f64) / norm
        };
        let order = modulation.order();
        let points = (0..order)
            .map(|label| {
                let i_bits = label >> m;
                let q_bits = label & ((1 << m) - 1);
                Complex64::new(axis_level(i_bits), axis_level(q_bits))
            })
            .collect();
        Constellation { modulation, points }
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    /// Map a bit stream to symbols. Length must divide evenly.
    pub fn map_bits(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let bps = self.bits_per_symbol();
        if bits.len() % bps != 0 {
            return Err(DbuError::Dimension {
                expected: bits.len().next_multiple_of(bps),
                got: bits.len(),
            });
        }
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(DbuError::Config(format!("non-binary input bit {b}")));
        }
        Ok(bits
            .chunks(bps)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
                self.points[label]
            })
            .collect())
    }

    /// Exact Gaussian posterior per bit: p(b=1 | y) via the full sum over
    /// constellation points, clamped to [eps, 1-eps].
    pub fn soft_demap(&self, y: Complex64, noise_var: f64) -> Vec<f64> {
        let bps = self.bits_per_symbol();
        let inv = 1.0 / noise_var.max(1e-300);
        // Subtract the max exponent for overflow safety; cancels in the ratio.
        let exps: Vec<f64> = self
            .points
            .iter()
            .map(|&x| -(y - x).norm_sqr() * inv)
            .collect();
        let emax = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = exps.iter().map(|&e| (e - emax).exp()).collect();
        let total: f64 = weights.iter().sum();
        (0..bps)
            .map(|bit| {
                let mask = 1usize << (bps - 1 - bit);
                let one: f64 = weights
                    .iter()
                    .enumerate()
                    .filter(|(label, _)| label & mask != 0)
                    .map(|(_, w)| w)
                    .sum();
                (one / total).clamp(PROB_EPS, 1.0 - PROB_EPS)
            })
            .collect()
    }

    /// Minimum-distance hard decision, returned as bits.
    pub fn hard_demap(&self, y: Complex64) -> Vec<u8> {
        let bps = self.bits_per_symbol();
        let label = self
            .points
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (y - *a)
                    .norm_sqr()
                    .partial_cmp(&(y - *b).norm_sqr())
                    .unwrap()
            })
            .map(|(l, _)| l)
            .unwrap();
        (0..bps).map(|b| ((label >> (bps - 1 - b)) & 1) as u8).collect()
    }
}

/// Bit-wise binary cross-entropy in bits: -(1/N) sum d*log2(p) + (1-d)*log2(1-p).
pub fn bce_loss(sent_bits: &[u8], predicted_probs: &[f64]) -> Result<f64> {
    if sent_bits.len() != predicted_probs.len() {
        return Err(DbuError::Dimension {
            expected: sent_bits.len(),
            got: predicted_probs.len(),
        });
    }
    let n = sent_bits.len() as f64;
    let sum: f64 = sent_bits
        .iter()
        .zip(predicted_probs)
        .map(|(&d, &p)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            if d == 1 {
                p.log2()
            } else {
                (1.0 - p).log2()
            }
        })
        .sum();
    Ok(-sum / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit_average_energy() {
        for m in [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64] {
            let c = Constellation::new(m);
            let e: f64 =
                c.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / c.points.len() as f64;
            assert!((e - 1.0).abs() < 1e-12, "{m:?} energy {e}");
        }
    }

    #[test]
    fn gray_adjacency_per_axis() {
        // Adjacent levels along each axis differ in exactly one bit.
        for m in [Modulation::Qam16, Modulation::Qam64] {
            let c = Constellation::new(m);
            let half = m.bits_per_symbol() / 2;
            for a in 0..(1usize << half) - 1 {
                let la = gray_like_level(&c, a, half);
                let lb = gray_like_level(&c, a + 1, half);
                assert_eq!((la ^ lb).count_ones(), 1);
            }
        }
    }

    // Helper: find the I-bit label whose level rank (descending) is k.
    fn gray_like_level(c: &Constellation, k: usize, half: usize) -> usize {
        let mut levels: Vec<(usize, f64)> = (0..(1usize << half))
            .map(|bits| (bits, c.points[bits << half].re))
            .collect();
        levels.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        levels[k].0
    }

    #[test]
    fn qpsk_zero_bits() {
        let c = Constellation::new(Modulation::Qpsk);
        let s = c.map_bits(&[0, 0]).unwrap();
        let expect = Complex64::new(1.0, 1.0) / 2f64.sqrt();
        assert!((s[0] - expect).norm() < 1e-15);
    }

    #[test]
    fn qam16_zero_bits_corner() {
        let c = Constellation::new(Modulation::Qam16);
        let s = c.map_bits(&[0, 0, 0, 0]).unwrap();
        assert!((s[0].norm_sqr() - 1.8).abs() < 1e-12);
    }

    #[test]
    fn map_hard_demap_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [Modulation::Qpsk, Modulation::Qam16, Modulation::Qam64] {
            let c = Constellation::new(m);
            let bits: Vec<u8> = (0..c.bits_per_symbol() * 50)
                .map(|_| rng.random_range(0..2u8))
                .collect();
            let syms = c.map_bits(&bits).unwrap();
            let rec: Vec<u8> = syms.iter().flat_map(|&y| c.hard_demap(y)).collect();
            assert_eq!(bits, rec);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let c = Constellation::new(Modulation::Qpsk);
        assert!(c.map_bits(&[0]).is_err());
        assert!(c.map_bits(&[0, 2]).is_err());
    }

    #[test]
    fn soft_demap_concentrates_at_low_noise() {
        let c = Constellation::new(Modulation::Qam16);
        let bits = [1u8, 0, 1, 1];
        let y = c.map_bits(&bits).unwrap()[0];
        let probs = c.soft_demap(y, 1e-6);
        for (b, p) in bits.iter().zip(&probs) {
            if *b == 1 {
                assert!(*p > 1.0 - 1e-9);
            } else {
                assert!(*p < 1e-9);
            }
        }
    }

    #[test]
    fn soft_demap_symmetry_at_origin() {
        let c = Constellation::new(Modulation::Qpsk);
        let probs = c.soft_demap(Complex64::ZERO, 0.3);
        assert!((probs[0] - 0.5).abs() < 1e-12);
        assert!((probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn soft_demap_matches_exhaustive_oracle() {
        // Independent brute-force posterior over all 16 points.
        let c = Constellation::new(Modulation::Qam16);
        let y = Complex64::new(0.3, 0.1);
        let sigma2 = 0.5;
        let probs = c.soft_demap(y, sigma2);
        for bit in 0..4 {
            let mut num = 0.0;
            let mut den = 0.0;
            for label in 0..16usize {
                let w = (-(y - c.points[label]).norm_sqr() / sigma2).exp();
                den += w;
                if (label >> (3 - bit)) & 1 == 1 {
                    num += w;
                }
            }
            assert!((probs[bit] - num / den).abs() < 1e-12);
        }
    }

    #[test]
    fn soft_threshold_equals_min_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = Constellation::new(Modulation::Qam16);
        for _ in 0..200 {
            let y = Complex64::new(rng.random::<f64>() * 3.0 - 1.5, rng.random::<f64>() * 3.0 - 1.5);
            let soft: Vec<u8> = c
                .soft_demap(y, 0.01)
                .iter()
                .map(|&p| u8::from(p > 0.5))
                .collect();
            assert_eq!(soft, c.hard_demap(y));
        }
    }

    #[test]
    fn bce_values() {
        // Perfect prediction ~ 0.
        let loss = bce_loss(&[1, 0], &[1.0 - PROB_EPS, PROB_EPS]).unwrap();
        assert!(loss.abs() < 1e-10);
        // Uninformative prediction = 1 bit.
        let loss = bce_loss(&[1, 0, 1], &[0.5, 0.5, 0.5]).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);
        // Direct evaluation: -(log2(0.9) + log2(0.8))/2.
        let loss = bce_loss(&[1, 0], &[0.9, 0.2]).unwrap();
        let expect = -(0.9f64.log2() + 0.8f64.log2()) / 2.0;
        assert!((loss - expect).abs() < 1e-12);
        assert!((loss - 0.2370).abs() < 5e-4);
    }
}
