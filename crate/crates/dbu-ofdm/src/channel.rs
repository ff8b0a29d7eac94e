//! Channel models: AWGN, the two-ray Rayleigh frequency-selective channel,
//! and the delay-Doppler multipath channel synthesized directly in the
//! frequency domain for sensing.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fft::fft_raw;
use crate::grid::GridConfig;
use crate::{DbuError, Result};

/// One draw of a circularly symmetric complex Gaussian with unit variance
/// (variance 1/2 per real component), via Box-Muller.
pub fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt(); // magnitude for variance 1/2 per component
    let theta = 2.0 * std::f64::consts::PI * u2;
    Complex64::from_polar(r, theta)
}

/// Frequency-selective tap channel. The CP must cover the tap memory.
#[derive(Debug, Clone)]
pub struct TapChannel {
    pub taps: Vec<Complex64>,
    /// Unnormalized N-point DFT of the zero-padded taps.
    pub freq_response: Vec<Complex64>,
}

impl TapChannel {
    pub fn new(taps: Vec<Complex64>, n_subcarriers: usize) -> Self {
        let mut padded = vec![Complex64::ZERO; n_subcarriers];
        padded[..taps.len()].copy_from_slice(&taps);
        fft_raw(&mut padded);
        TapChannel {
            taps,
            freq_response: padded,
        }
    }

    /// Identity channel (single unit tap).
    pub fn flat(n_subcarriers: usize) -> Self {
        TapChannel::new(vec![Complex64::new(1.0, 0.0)], n_subcarriers)
    }
}

/// Two independent unit-variance Rayleigh taps at sample delays {0, 1}.
pub fn draw_tworay<R: Rng>(rng: &mut R, n_subcarriers: usize) -> TapChannel {
    let taps = vec![complex_gaussian(rng), complex_gaussian(rng)];
    TapChannel::new(taps, n_subcarriers)
}

/// Pass CP-extended time samples (one Vec per OFDM symbol) through the tap
/// channel by linear convolution over the concatenated stream, then add
/// i.i.d. CN(0, noise_var) noise per sample.
pub fn apply_channel<R: Rng>(
    symbols: &[Vec<Complex64>],
    ch: &TapChannel,
    noise_var: f64,
    cp_len: usize,
    rng: &mut R,
) -> Result<Vec<Vec<Complex64>>> {
    if ch.taps.len() > cp_len + 1 {
        return Err(DbuError::Config(format!(
            "tap count {} exceeds CP coverage {}",
            ch.taps.len(),
            cp_len + 1
        )));
    }
    let stream: Vec<Complex64> = symbols.iter().flatten().copied().collect();
    let mut out = vec![Complex64::ZERO; stream.len()];
    for (k, &h) in ch.taps.iter().enumerate() {
        for n in k..stream.len() {
            out[n] += h * stream[n - k];
        }
    }
    if noise_var > 0.0 {
        let noise_std = noise_var.sqrt();
        for v in out.iter_mut() {
            *v += noise_std * complex_gaussian(rng);
        }
    }
    // Re-chunk to per-symbol vectors.
    let mut result = Vec::with_capacity(symbols.len());
    let mut pos = 0usize;
    for s in symbols {
        result.push(out[pos..pos + s.len()].to_vec());
        pos += s.len();
    }
    Ok(result)
}

/// Sensing scene: complex reflection coefficient, delay (s), Doppler (Hz)
/// per dominant path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Path {
    /// Reflection coefficient as [re, im].
    pub beta: [f64; 2],
    pub tau_s: f64,
    pub nu_hz: f64,
}

impl Path {
    pub fn beta_c(&self) -> Complex64 {
        Complex64::new(self.beta[0], self.beta[1])
    }
}

impl PathSet {
    /// Check delays stay within the CP and Dopplers within the unambiguous
    /// span for the given grid timing.
    pub fn validate(&self, cfg: &GridConfig) -> Result<()> {
        let t_cp = cfg.cp_duration();
        let t_o = cfg.total_symbol_duration();
        for p in &self.paths {
            if p.tau_s < 0.0 || p.tau_s >= t_cp {
                return Err(DbuError::Config(format!(
                    "path delay {} outside [0, T_cp={})",
                    p.tau_s, t_cp
                )));
            }
            if p.nu_hz.abs() >= 0.5 / t_o {
                return Err(DbuError::Config(format!(
                    "path Doppler {} outside the unambiguous span +/-{}",
                    p.nu_hz,
                    0.5 / t_o
                )));
            }
        }
        Ok(())
    }
}

/// Synthesize the frequency-domain sensing observation
/// Y[n][m] = sum_l beta_l * Sbar[n][m] * e^{-j2pi n df tau_l} * e^{j2pi m T_o nu_l} + W,
/// with `sbar` indexed [symbol m][subcarrier n].
pub fn sensing_observe<R: Rng>(
    sbar: &[Vec<Complex64>],
    paths: &PathSet,
    noise_var: f64,
    cfg: &GridConfig,
    rng: &mut R,
) -> Result<Vec<Vec<Complex64>>> {
    paths.validate(cfg)?;
    let df = cfg.subcarrier_spacing_hz;
    let t_o = cfg.total_symbol_duration();
    let n = cfg.n_subcarriers;
    let noise_std = noise_var.sqrt();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(sbar.len());
    for (m, col) in sbar.iter().enumerate() {
        if col.len() != n {
            return Err(DbuError::Dimension {
                expected: n,
                got: col.len(),
            });
        }
        let mut y = vec![Complex64::ZERO; n];
        for p in &paths.paths {
            let beta = p.beta_c();
            let doppler = Complex64::from_polar(1.0, two_pi * m as f64 * t_o * p.nu_hz);
            let step = Complex64::from_polar(1.0, -two_pi * df * p.tau_s);
            let mut delay_phase = Complex64::new(1.0, 0.0);
            for (yn, &s) in y.iter_mut().zip(col) {
                *yn += beta * s * delay_phase * doppler;
                delay_phase *= step;
            }
        }
        if noise_var > 0.0 {
            for yn in y.iter_mut() {
                *yn += noise_std * complex_gaussian(rng);
            }
        }
        out.push(y);
    }
    Ok(out)
}
