//! Unitary DFT helpers backed by rustfft, with a per-thread plan cache so
//! hot simulation loops do not re-plan transforms.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

thread_local! {
    static PLANS: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cache| {
        cache
            .borrow_mut()
            .entry((len, inverse))
            .or_insert_with(|| {
                let dir = if inverse {
                    FftDirection::Inverse
                } else {
                    FftDirection::Forward
                };
                FftPlanner::new().plan_fft(len, dir)
            })
            .clone()
    })
}

/// In-place unitary forward DFT (scaled by 1/sqrt(N)).
pub fn fft_unitary(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, false).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// In-place unitary inverse DFT (scaled by 1/sqrt(N)).
pub fn ifft_unitary(buf: &mut [Complex64]) {
    let n = buf.len();
    plan(n, true).process(buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// In-place unnormalized forward DFT.
pub fn fft_raw(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_round_trip() {
        let mut x: Vec<Complex64> = (0..16)
            .map(|i| Complex64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let orig = x.clone();
        fft_unitary(&mut x);
        ifft_unitary(&mut x);
        for (a, b) in x.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval() {
        let mut x: Vec<Complex64> = (0..8).map(|i| Complex64::new(1.0, i as f64)).collect();
        let e0: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        fft_unitary(&mut x);
        let e1: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        assert!((e0 - e1).abs() < 1e-10);
    }
}
