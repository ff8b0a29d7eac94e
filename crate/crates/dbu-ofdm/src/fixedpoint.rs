//! Bit-accurate model of the hardware Householder datapath: Q-format
//! quantization with round-to-nearest-even and saturation, the merged
//! two-stage reflection x2 = x0 - [2 a1 u1 + 2 (a2 - 2 a1 rho) u2], and the
//! full cascade of K/2 merged stages plus the element-wise phase stage.
//!
//! The fixed path is integer-only: complex products accumulate in i64 at the
//! combined fractional scale before a single requantization, so identical
//! inputs produce identical raw outputs on any platform.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::unitary::{HouseholderParams, ZERO_VEC_GUARD};
use crate::{DbuError, Result};

/// Reflection vectors u: Q(12,10).
pub const Q_U: QFormat = QFormat {
    total_bits: 12,
    frac_bits: 10,
};
/// Signal samples x: Q(10,6).
pub const Q_X: QFormat = QFormat {
    total_bits: 10,
    frac_bits: 6,
};
/// Intermediate scalars (a1, a2, rho and derived terms): Q(12,6).
pub const Q_INT: QFormat = QFormat {
    total_bits: 12,
    frac_bits: 6,
};

/// Measured ceiling on the per-component |fixed - float| error of the K = 4
/// cascade at the formats above, on unit-norm inputs (see the
/// characterization test). Dominated by the Q(10,6) signal grid (step
/// 2^-6 = 0.015625) and the Q(12,6) scalar grid.
pub const FIXED_ERROR_BOUND: f64 = 0.1;

/// a-bit two's-complement representation with b fractional bits, Q(a,b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QFormat {
    pub total_bits: u32,
    pub frac_bits: u32,
}

impl QFormat {
    pub fn new(total_bits: u32, frac_bits: u32) -> Result<Self> {
        let q = QFormat {
            total_bits,
            frac_bits,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frac_bits >= self.total_bits || self.total_bits > 32 {
            return Err(DbuError::Config(format!(
                "invalid format Q({},{})",
                self.total_bits, self.frac_bits
            )));
        }
        Ok(())
    }

    /// Largest representable raw value, 2^(a-1) - 1.
    pub fn raw_max(&self) -> i64 {
        (1i64 << (self.total_bits - 1)) - 1
    }

    /// Smallest representable raw value, -2^(a-1).
    pub fn raw_min(&self) -> i64 {
        -(1i64 << (self.total_bits - 1))
    }

    /// Value of one LSB, 2^-b.
    pub fn step(&self) -> f64 {
        (self.frac_bits as f64 * -1.0).exp2()
    }
}

/// Round x * 2^b to the nearest integer (ties to even) and saturate.
pub fn quantize(x: f64, fmt: QFormat) -> i32 {
    let scaled = (x * (fmt.frac_bits as f64).exp2()).round_ties_even();
    scaled.clamp(fmt.raw_min() as f64, fmt.raw_max() as f64) as i32
}

/// Raw integer back to a real value.
pub fn dequantize(raw: i32, fmt: QFormat) -> f64 {
    raw as f64 * fmt.step()
}

/// Rescale a double-width value at fractional scale `from_frac` into a
/// target format: arithmetic right shift with round-to-nearest-even, then
/// saturate. `from_frac` must not be below the target's fractional bits.
pub fn requantize(value: i64, from_frac: u32, fmt: QFormat) -> i32 {
    debug_assert!(from_frac >= fmt.frac_bits);
    let shift = from_frac - fmt.frac_bits;
    let rounded = if shift == 0 {
        value
    } else {
        let floor = value >> shift;
        let rem = value - (floor << shift);
        let half = 1i64 << (shift - 1);
        match rem.cmp(&half) {
            std::cmp::Ordering::Less => floor,
            std::cmp::Ordering::Greater => floor + 1,
            std::cmp::Ordering::Equal => floor + (floor & 1),
        }
    };
    rounded.clamp(fmt.raw_min(), fmt.raw_max()) as i32
}

/// Complex value as a pair of raw two's-complement integers at a shared
/// format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedComplex {
    pub re: i32,
    pub im: i32,
}

impl FixedComplex {
    pub const ZERO: FixedComplex = FixedComplex { re: 0, im: 0 };

    pub fn quantize(x: Complex64, fmt: QFormat) -> Self {
        FixedComplex {
            re: quantize(x.re, fmt),
            im: quantize(x.im, fmt),
        }
    }

    pub fn dequantize(&self, fmt: QFormat) -> Complex64 {
        Complex64::new(dequantize(self.re, fmt), dequantize(self.im, fmt))
    }

    pub fn conj(&self) -> Self {
        FixedComplex {
            re: self.re,
            im: -self.im,
        }
    }
}

/// Double-width complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    re: i64,
    im: i64,
}

impl Acc {
    /// acc += a * b at the combined fractional scale.
    fn mac(&mut self, a: FixedComplex, b: FixedComplex) {
        let (ar, ai) = (a.re as i64, a.im as i64);
        let (br, bi) = (b.re as i64, b.im as i64);
        self.re += ar * br - ai * bi;
        self.im += ar * bi + ai * br;
    }

    fn requantize(&self, from_frac: u32, fmt: QFormat) -> FixedComplex {
        FixedComplex {
            re: requantize(self.re, from_frac, fmt),
            im: requantize(self.im, from_frac, fmt),
        }
    }
}

/// Saturating raw add within a format.
fn sat_add(a: i32, b: i32, fmt: QFormat) -> i32 {
    (a as i64 + b as i64).clamp(fmt.raw_min(), fmt.raw_max()) as i32
}

fn sat_cadd(a: FixedComplex, b: FixedComplex, fmt: QFormat) -> FixedComplex {
    FixedComplex {
        re: sat_add(a.re, b.re, fmt),
        im: sat_add(a.im, b.im, fmt),
    }
}

/// Double the raw value with saturation (multiply by 2 in any format).
fn sat_double(a: FixedComplex, fmt: QFormat) -> FixedComplex {
    sat_cadd(a, a, fmt)
}

// ---------------------------------------------------------------------------
// Merged two-stage reflection
// ---------------------------------------------------------------------------

/// Exact-arithmetic merged two-stage Householder:
/// a1 = u1^H x0, a2 = u2^H x0, rho = u2^H u1,
/// x2 = x0 - 2 a1 u1 - 2 (a2 - 2 a1 rho) u2.
/// u1, u2 must be pre-normalized (or zero for an inert stage).
pub fn merged_householder(
    x0: &[Complex64],
    u1: &[Complex64],
    u2: &[Complex64],
) -> Result<Vec<Complex64>> {
    if u1.len() != x0.len() || u2.len() != x0.len() {
        return Err(DbuError::Dimension {
            expected: x0.len(),
            got: u1.len().min(u2.len()),
        });
    }
    let inner = |u: &[Complex64], x: &[Complex64]| -> Complex64 {
        u.iter().zip(x).map(|(uk, xk)| uk.conj() * xk).sum()
    };
    let a1 = inner(u1, x0);
    let a2 = inner(u2, x0);
    let rho = inner(u2, u1);
    let w1 = 2.0 * a1;
    let w2 = 2.0 * (a2 - 2.0 * a1 * rho);
    Ok(x0
        .iter()
        .zip(u1)
        .zip(u2)
        .map(|((&xk, &u1k), &u2k)| xk - w1 * u1k - w2 * u2k)
        .collect())
}

/// Fixed-point merged two-stage module. `x0` sits in `fx`, the reflection
/// vectors in `fu`, intermediate scalars in `fi`; the output returns to `fx`.
pub fn merged_householder_fixed(
    x0: &[FixedComplex],
    u1: &[FixedComplex],
    u2: &[FixedComplex],
    fu: QFormat,
    fx: QFormat,
    fi: QFormat,
) -> Result<Vec<FixedComplex>> {
    if u1.len() != x0.len() || u2.len() != x0.len() {
        return Err(DbuError::Dimension {
            expected: x0.len(),
            got: u1.len().min(u2.len()),
        });
    }
    let inner_ux = |u: &[FixedComplex], x: &[FixedComplex]| -> FixedComplex {
        let mut acc = Acc::default();
        for (uk, xk) in u.iter().zip(x) {
            acc.mac(uk.conj(), *xk);
        }
        acc.requantize(fu.frac_bits + fx.frac_bits, fi)
    };
    let a1 = inner_ux(u1, x0);
    let a2 = inner_ux(u2, x0);
    let rho = {
        let mut acc = Acc::default();
        for (u2k, u1k) in u2.iter().zip(u1) {
            acc.mac(u2k.conj(), *u1k);
        }
        acc.requantize(2 * fu.frac_bits, fi)
    };
    // w1 = 2 a1; w2 = 2 (a2 - 2 a1 rho), all held in the intermediate format.
    let neg = |c: FixedComplex| FixedComplex { re: -c.re, im: -c.im };
    let w1 = sat_double(a1, fi);
    let a1rho = {
        let mut acc = Acc::default();
        acc.mac(a1, rho);
        acc.requantize(2 * fi.frac_bits, fi)
    };
    let w2 = sat_double(sat_cadd(a2, neg(sat_double(a1rho, fi)), fi), fi);

    // x2_k = x0_k - w1 u1_k - w2 u2_k, accumulated double-width at the
    // product scale, one requantization back to the signal format.
    let prod_frac = fi.frac_bits + fu.frac_bits;
    let x_shift = prod_frac - fx.frac_bits;
    Ok(x0
        .iter()
        .zip(u1)
        .zip(u2)
        .map(|((&xk, &u1k), &u2k)| {
            let mut acc = Acc {
                re: (xk.re as i64) << x_shift,
                im: (xk.im as i64) << x_shift,
            };
            acc.mac(neg(w1), u1k);
            acc.mac(neg(w2), u2k);
            acc.requantize(prod_frac, fx)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Full cascade
// ---------------------------------------------------------------------------

/// Quantized model: the float schema plus formats and raw integer arrays.
#[derive(Debug, Serialize, Deserialize)]
pub struct QuantizedModelFile {
    pub version: u32,
    pub n_data: usize,
    pub k_factors: usize,
    pub blocks: Vec<usize>,
    pub qformat_u: QFormat,
    pub qformat_x: QFormat,
    pub qformat_intermediate: QFormat,
    /// Normalized-then-quantized reflection vectors, raw [re, im] pairs.
    pub u_raw: Vec<Vec<[i32; 2]>>,
    /// Quantized phase multipliers e^{j d_n}, raw [re, im] pairs.
    pub d_raw: Vec<[i32; 2]>,
}

/// Fixed-point evaluator for the full per-block cascade: K/2 merged
/// reflection stages followed by the element-wise phase multiply. Odd K pads
/// an inert (zero) second vector into the last stage.
#[derive(Debug, Clone)]
pub struct FixedCascade {
    blocks: Vec<usize>,
    k_factors: usize,
    /// Normalized reflection vectors, block-major like HouseholderParams::v.
    u_float: Vec<Vec<Complex64>>,
    u_fixed: Vec<Vec<FixedComplex>>,
    /// Phase multipliers e^{j d_n}.
    d_float: Vec<Complex64>,
    d_fixed: Vec<FixedComplex>,
    pub fu: QFormat,
    pub fx: QFormat,
    pub fi: QFormat,
}

impl FixedCascade {
    /// Normalize and quantize a float model. Vectors under the zero guard
    /// become inert (all-zero) stages, mirroring the float applier.
    pub fn new(params: &HouseholderParams, fu: QFormat, fx: QFormat, fi: QFormat) -> Result<Self> {
        params.validate()?;
        fu.validate()?;
        fx.validate()?;
        fi.validate()?;
        let u_float: Vec<Vec<Complex64>> = params
            .v
            .iter()
            .map(|v| {
                let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if norm < ZERO_VEC_GUARD {
                    vec![Complex64::ZERO; v.len()]
                } else {
                    // u_k = conj(v_k) / ||v||, the applier's convention.
                    v.iter().map(|c| c.conj() / norm).collect()
                }
            })
            .collect();
        let u_fixed = u_float
            .iter()
            .map(|u| u.iter().map(|&c| FixedComplex::quantize(c, fu)).collect())
            .collect();
        let d_float: Vec<Complex64> = params
            .d
            .iter()
            .map(|&ph| Complex64::from_polar(1.0, ph))
            .collect();
        let d_fixed = d_float
            .iter()
            .map(|&c| FixedComplex::quantize(c, fu))
            .collect();
        Ok(FixedCascade {
            blocks: params.blocks.clone(),
            k_factors: params.k_factors,
            u_float,
            u_fixed,
            d_float,
            d_fixed,
            fu,
            fx,
            fi,
        })
    }

    pub fn n_data(&self) -> usize {
        self.blocks.iter().sum()
    }

    /// Stage plan for one block: vector-index pairs in application order
    /// (None = inert pad), plus whether phases come first (adjoint).
    fn stage_pairs(&self, adjoint: bool) -> Vec<(usize, Option<usize>)> {
        let k = self.k_factors;
        let mut pairs = Vec::with_capacity(k.div_ceil(2));
        if adjoint {
            // Apply factors 0, 1, ..., K-1.
            let mut i = 0;
            while i < k {
                pairs.push((i, if i + 1 < k { Some(i + 1) } else { None }));
                i += 2;
            }
        } else {
            // Apply factors K-1, K-2, ..., 0.
            let mut i = k;
            while i > 0 {
                if i >= 2 {
                    pairs.push((i - 1, Some(i - 2)));
                    i -= 2;
                } else {
                    pairs.push((0, None));
                    i = 0;
                }
            }
        }
        pairs
    }

    /// Double-precision reference through the same merged-stage structure.
    pub fn float_apply(&self, x: &[Complex64], adjoint: bool) -> Result<Vec<Complex64>> {
        if x.len() != self.n_data() {
            return Err(DbuError::Dimension {
                expected: self.n_data(),
                got: x.len(),
            });
        }
        let k = self.k_factors;
        let mut out = Vec::with_capacity(x.len());
        let mut offset = 0usize;
        for (b, &nb) in self.blocks.iter().enumerate() {
            let mut seg: Vec<Complex64> = x[offset..offset + nb].to_vec();
            let phases = &self.d_float[offset..offset + nb];
            if adjoint {
                for (s, p) in seg.iter_mut().zip(phases) {
                    *s *= p.conj();
                }
            }
            let zero = vec![Complex64::ZERO; nb];
            for (i1, i2) in self.stage_pairs(adjoint) {
                let u1 = &self.u_float[b * k + i1];
                let u2 = i2.map_or(&zero[..], |i| &self.u_float[b * k + i][..]);
                seg = merged_householder(&seg, u1, u2)?;
            }
            if !adjoint {
                for (s, p) in seg.iter_mut().zip(phases) {
                    *s *= p;
                }
            }
            out.extend(seg);
            offset += nb;
        }
        Ok(out)
    }

    /// Integer-only cascade on raw fixed inputs.
    pub fn fixed_apply(&self, x: &[FixedComplex], adjoint: bool) -> Result<Vec<FixedComplex>> {
        if x.len() != self.n_data() {
            return Err(DbuError::Dimension {
                expected: self.n_data(),
                got: x.len(),
            });
        }
        let k = self.k_factors;
        let mut out = Vec::with_capacity(x.len());
        let mut offset = 0usize;
        for (b, &nb) in self.blocks.iter().enumerate() {
            let mut seg: Vec<FixedComplex> = x[offset..offset + nb].to_vec();
            let phases = &self.d_fixed[offset..offset + nb];
            if adjoint {
                seg = self.phase_multiply(&seg, phases, true);
            }
            let zero = vec![FixedComplex::ZERO; nb];
            for (i1, i2) in self.stage_pairs(adjoint) {
                let u1 = &self.u_fixed[b * k + i1];
                let u2 = i2.map_or(&zero[..], |i| &self.u_fixed[b * k + i][..]);
                seg = merged_householder_fixed(&seg, u1, u2, self.fu, self.fx, self.fi)?;
            }
            if !adjoint {
                seg = self.phase_multiply(&seg, phases, false);
            }
            out.extend(seg);
            offset += nb;
        }
        Ok(out)
    }

    /// Element-wise complex multiply by the (possibly conjugated) quantized
    /// phases, double-width product requantized back to the signal format.
    fn phase_multiply(
        &self,
        seg: &[FixedComplex],
        phases: &[FixedComplex],
        conj: bool,
    ) -> Vec<FixedComplex> {
        seg.iter()
            .zip(phases)
            .map(|(&s, &p)| {
                let p = if conj { p.conj() } else { p };
                let mut acc = Acc::default();
                acc.mac(s, p);
                acc.requantize(self.fx.frac_bits + self.fu.frac_bits, self.fx)
            })
            .collect()
    }

    /// Convenience: quantize a float vector, run the fixed cascade, return
    /// floats.
    pub fn fixed_apply_f64(&self, x: &[Complex64], adjoint: bool) -> Result<Vec<Complex64>> {
        let xq: Vec<FixedComplex> = x
            .iter()
            .map(|&c| FixedComplex::quantize(c, self.fx))
            .collect();
        Ok(self
            .fixed_apply(&xq, adjoint)?
            .iter()
            .map(|f| f.dequantize(self.fx))
            .collect())
    }

    /// Raw-integer model dump.
    pub fn to_file(&self) -> QuantizedModelFile {
        QuantizedModelFile {
            version: 1,
            n_data: self.n_data(),
            k_factors: self.k_factors,
            blocks: self.blocks.clone(),
            qformat_u: self.fu,
            qformat_x: self.fx,
            qformat_intermediate: self.fi,
            u_raw: self
                .u_fixed
                .iter()
                .map(|u| u.iter().map(|c| [c.re, c.im]).collect())
                .collect(),
            d_raw: self.d_fixed.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}
