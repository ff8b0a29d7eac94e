//! One-tap MMSE equalization in the grouped frequency domain and symbol
//! recovery through the adjoint unitary, with the per-block effective noise
//! variance used by the soft demapper.

use num_complex::Complex64;

use crate::grid::ResourceGrid;
use crate::unitary::UdataApplier;
use crate::{DbuError, Result};

/// Per-subcarrier MMSE gains g_n = conj(lambda_n) / (|lambda_n|^2 + sigma0^2).
pub fn mmse_gains(lambda: &[Complex64], noise_var: f64) -> Result<Vec<Complex64>> {
    if noise_var < 0.0 {
        return Err(DbuError::Config("noise variance must be >= 0".into()));
    }
    Ok(lambda
        .iter()
        .map(|&l| {
            let denom = l.norm_sqr() + noise_var;
            if denom <= 0.0 {
                log::warn!("zero channel gain with zero noise; equalizer gain set to 0");
                Complex64::ZERO
            } else {
                l.conj() / denom
            }
        })
        .collect())
}

/// Recovered symbols and the effective noise variance handed to demapping.
#[derive(Debug, Clone)]
pub struct Recovered {
    /// Data-symbol estimates in grouped order.
    pub symbols: Vec<Complex64>,
    /// Effective noise variance per data subcarrier: sigma0^2 |g_n|^2
    /// averaged within each unitary block (diagonal approximation of the
    /// colored post-adjoint noise).
    pub noise_var: Vec<f64>,
}

/// Equalize the grouped data observations and undo the unitary:
/// s_hat = U_data^H (g .* y).
pub fn recover(
    y_data: &[Complex64],
    gains: &[Complex64],
    noise_var: f64,
    udata: &UdataApplier,
) -> Result<Recovered> {
    let nd = udata.n_data();
    if y_data.len() != nd {
        return Err(DbuError::Dimension {
            expected: nd,
            got: y_data.len(),
        });
    }
    if gains.len() != nd {
        return Err(DbuError::Dimension {
            expected: nd,
            got: gains.len(),
        });
    }
    let mut symbols: Vec<Complex64> = y_data.iter().zip(gains).map(|(y, g)| y * g).collect();
    udata.adjoint(&mut symbols)?;

    let mut noise = vec![0.0; nd];
    let mut offset = 0usize;
    for &nb in &udata.params().blocks {
        let avg = gains[offset..offset + nb]
            .iter()
            .map(|g| noise_var * g.norm_sqr())
            .sum::<f64>()
            / nb as f64;
        noise[offset..offset + nb].fill(avg);
        offset += nb;
    }
    Ok(Recovered {
        symbols,
        noise_var: noise,
    })
}

/// Gather the per-data-subcarrier channel gains in grouped order from a
/// physical-order frequency response.
pub fn data_lambda(grid: &ResourceGrid, freq_response: &[Complex64]) -> Vec<Complex64> {
    grid.data_idx.iter().map(|&i| freq_response[i]).collect()
}

/// Least-squares channel estimate at the pilot comb with linear
/// interpolation (in centered frequency order) across the data bins.
/// Alternative to genie CSI, selected by a flag at the call sites.
pub fn ls_pilot_estimate(
    grid: &ResourceGrid,
    y_physical: &[Complex64],
) -> Result<Vec<Complex64>> {
    if grid.pilot_idx.is_empty() {
        return Err(DbuError::Config("no pilots available for estimation".into()));
    }
    let n = grid.n();
    if y_physical.len() != n {
        return Err(DbuError::Dimension {
            expected: n,
            got: y_physical.len(),
        });
    }
    let pilots = grid.pilot_symbols();
    let centered = |bin: usize| (bin + n / 2) % n;
    // Pilot estimates ordered by centered position.
    let mut est: Vec<(usize, Complex64)> = grid
        .pilot_idx
        .iter()
        .zip(&pilots)
        .map(|(&bin, &p)| (centered(bin), y_physical[bin] / p))
        .collect();
    est.sort_by_key(|&(c, _)| c);

    let interp = |c: usize| -> Complex64 {
        match est.binary_search_by_key(&c, |&(pc, _)| pc) {
            Ok(i) => est[i].1,
            Err(i) => {
                if i == 0 {
                    est[0].1
                } else if i == est.len() {
                    est[est.len() - 1].1
                } else {
                    let (c0, h0) = est[i - 1];
                    let (c1, h1) = est[i];
                    let t = (c - c0) as f64 / (c1 - c0) as f64;
                    h0 * (1.0 - t) + h1 * t
                }
            }
        }
    };
    Ok(grid
        .data_idx
        .iter()
        .map(|&bin| interp(centered(bin)))
        .collect())
}
