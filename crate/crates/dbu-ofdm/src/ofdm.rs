//! OFDM modulation chain (T = F_N^H U with CP), PAPR metrics and the
//! exceedance proxy loss, oversampled evaluation, and the DFT-s-OFDM
//! baselines with block- and comb-type pilots.
//!
//! Grids are stored symbol-major: `grid[m][n]` is subcarrier n of OFDM
//! symbol m, in physical DFT-bin order. The DFT is unitary throughout.

use num_complex::Complex64;
use rand::Rng;

use crate::fft::{fft_unitary, ifft_unitary};
use crate::grid::{ResourceGrid, PILOT_SEED};
use crate::modem::Constellation;
use crate::unitary::UnitaryTransform;
use crate::{DbuError, Result};

/// One frame: frequency grid, CP-extended time samples, payload bits.
#[derive(Debug, Clone)]
pub struct Frame {
    pub freq: Vec<Vec<Complex64>>,
    pub time: Vec<Vec<Complex64>>,
    pub payload_bits: Vec<u8>,
}

/// Number of payload bits one frame carries.
pub fn frame_bits(grid: &ResourceGrid, constellation: &Constellation) -> usize {
    grid.n_data() * grid.config.symbols_per_frame * constellation.bits_per_symbol()
}

/// Populate the frequency grid: payload symbols on data subcarriers (grouped
/// order), the fixed pilot sequence on pilot subcarriers, zeros elsewhere.
pub fn build_freq_grid(
    grid: &ResourceGrid,
    constellation: &Constellation,
    bits: &[u8],
) -> Result<Vec<Vec<Complex64>>> {
    let m = grid.config.symbols_per_frame;
    let expected = frame_bits(grid, constellation);
    if bits.len() != expected {
        return Err(DbuError::Dimension {
            expected,
            got: bits.len(),
        });
    }
    let symbols = constellation.map_bits(bits)?;
    let pilots = grid.pilot_symbols();
    let nd = grid.n_data();
    let mut freq = vec![vec![Complex64::ZERO; grid.n()]; m];
    for (mi, col) in freq.iter_mut().enumerate() {
        for (j, &bin) in grid.data_idx.iter().enumerate() {
            col[bin] = symbols[mi * nd + j];
        }
        for (&bin, &p) in grid.pilot_idx.iter().zip(&pilots) {
            col[bin] = p;
        }
    }
    Ok(freq)
}

/// Per symbol: x = IDFT(U s) with a unitary N-point IDFT, then prepend the
/// CP. Pass `None` for conventional OFDM.
pub fn modulate(
    freq: &[Vec<Complex64>],
    u: Option<&UnitaryTransform>,
    cp_len: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let mut out = Vec::with_capacity(freq.len());
    for col in freq {
        let mut body = col.clone();
        if let Some(u) = u {
            u.forward(&mut body)?;
        }
        ifft_unitary(&mut body);
        let n = body.len();
        if cp_len > n {
            return Err(DbuError::Config(format!(
                "CP length {cp_len} exceeds symbol length {n}"
            )));
        }
        let mut sym = Vec::with_capacity(n + cp_len);
        sym.extend_from_slice(&body[n - cp_len..]);
        sym.extend_from_slice(&body);
        out.push(sym);
    }
    Ok(out)
}

/// Strip the CP and apply the unitary N-point DFT per symbol.
pub fn demodulate(time: &[Vec<Complex64>], n: usize, cp_len: usize) -> Result<Vec<Vec<Complex64>>> {
    let mut out = Vec::with_capacity(time.len());
    for sym in time {
        if sym.len() != n + cp_len {
            return Err(DbuError::Dimension {
                expected: n + cp_len,
                got: sym.len(),
            });
        }
        let mut body = sym[cp_len..].to_vec();
        fft_unitary(&mut body);
        out.push(body);
    }
    Ok(out)
}

/// Build a full frame (map bits, insert pilots, modulate).
pub fn make_frame(
    grid: &ResourceGrid,
    u: Option<&UnitaryTransform>,
    constellation: &Constellation,
    bits: Vec<u8>,
) -> Result<Frame> {
    let freq = build_freq_grid(grid, constellation, &bits)?;
    let time = modulate(&freq, u, grid.config.cp_len)?;
    Ok(Frame {
        freq,
        time,
        payload_bits: bits,
    })
}

/// Peak-to-average power ratio in dB of a sample vector.
pub fn papr_db(x: &[Complex64]) -> Result<f64> {
    if x.is_empty() {
        return Err(DbuError::Config("empty PAPR input".into()));
    }
    let mut peak = 0.0f64;
    let mut total = 0.0f64;
    for v in x {
        let p = v.norm_sqr();
        peak = peak.max(p);
        total += p;
    }
    if total <= 0.0 {
        return Err(DbuError::Numeric("zero-energy PAPR input".into()));
    }
    let mean = total / x.len() as f64;
    Ok(10.0 * (peak / mean).log10())
}

/// Empirical CCDF: fraction of samples strictly above each threshold.
pub fn ccdf(papr_samples_db: &[f64], thresholds_db: &[f64]) -> Vec<f64> {
    let n = papr_samples_db.len() as f64;
    thresholds_db
        .iter()
        .map(|&t| papr_samples_db.iter().filter(|&&s| s > t).count() as f64 / n)
        .collect()
}

/// Interpolate the PAPR threshold at which the empirical CCDF crosses a
/// target level, from per-sample PAPR values.
pub fn ccdf_threshold_at(papr_samples_db: &[f64], level: f64) -> f64 {
    let mut sorted = papr_samples_db.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // CCDF(sorted[i]) ~ (n - 1 - i)/n; pick the sample where it reaches level.
    let n = sorted.len();
    let rank = ((1.0 - level) * n as f64).floor() as usize;
    sorted[rank.min(n - 1)]
}

/// CCDF-inspired exceedance proxy loss, (1/M) sum ReLU(PAPR - gamma_tar)^p
/// over OFDM symbol bodies at Nyquist rate.
pub fn papr_loss(bodies: &[Vec<Complex64>], target_db: f64, hardness: u32) -> Result<f64> {
    if bodies.is_empty() {
        return Err(DbuError::Config("empty PAPR loss batch".into()));
    }
    if hardness != 1 && hardness != 2 {
        return Err(DbuError::Config(format!(
            "hardness must be 1 or 2, got {hardness}"
        )));
    }
    let mut acc = 0.0;
    for body in bodies {
        let e = (papr_db(body)? - target_db).max(0.0);
        acc += if hardness == 1 { e } else { e * e };
    }
    Ok(acc / bodies.len() as f64)
}

/// Zero-pad the centered spectrum to L*N bins and take a unitary L*N-point
/// IDFT scaled by sqrt(L), so per-sample power statistics match L = 1.
pub fn oversample(freq_col: &[Complex64], factor: usize) -> Result<Vec<Complex64>> {
    if factor < 1 {
        return Err(DbuError::Config("oversampling factor must be >= 1".into()));
    }
    let n = freq_col.len();
    let ln = n * factor;
    let mut padded = vec![Complex64::ZERO; ln];
    // DFT bins 0..N/2 are non-negative frequencies, N/2..N negative; keep
    // them at the spectrum edges of the longer transform.
    let half = n / 2;
    padded[..half].copy_from_slice(&freq_col[..half]);
    padded[ln - (n - half)..].copy_from_slice(&freq_col[half..]);
    ifft_unitary(&mut padded);
    let scale = (factor as f64).sqrt();
    for v in padded.iter_mut() {
        *v *= scale;
    }
    Ok(padded)
}

/// Pilot placement style for the DFT-s-OFDM baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotMode {
    /// Dedicated pilot OFDM symbols; data symbols keep an intact spread.
    Block,
    /// Pilot bins puncture the spread signal in every OFDM symbol.
    Comb,
}

/// A DFT-s-OFDM frame with its frequency grid and per-symbol pilot flags.
#[derive(Debug, Clone)]
pub struct DftsFrame {
    pub freq: Vec<Vec<Complex64>>,
    pub time: Vec<Vec<Complex64>>,
    /// True for dedicated pilot symbols (block mode only).
    pub pilot_symbol: Vec<bool>,
}

/// Interior (non-null) bins in centered-ascending frequency order.
pub fn interior_bins(grid: &ResourceGrid) -> Vec<usize> {
    let n = grid.n();
    let mut bins: Vec<usize> = grid
        .data_idx
        .iter()
        .chain(&grid.pilot_idx)
        .copied()
        .collect();
    bins.sort_by_key(|&b| (b + n / 2) % n);
    bins
}

/// Deterministic unit-modulus QPSK sequence used for dedicated pilot
/// symbols in block mode.
fn block_pilot_sequence(len: usize) -> Vec<Complex64> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(PILOT_SEED ^ 0xb10c);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..len)
        .map(|_| {
            let i = if rng.random::<bool>() { s } else { -s };
            let q = if rng.random::<bool>() { s } else { -s };
            Complex64::new(i, q)
        })
        .collect()
}

/// DFT-spread OFDM baseline. `data` holds one vector of N_used = N_data+N_p
/// data symbols per data-carrying OFDM symbol: M of them in comb mode,
/// M - 1 in block mode (the first symbol is a dedicated pilot symbol).
pub fn dfts_modulate(
    data: &[Vec<Complex64>],
    grid: &ResourceGrid,
    pilot_mode: PilotMode,
) -> Result<DftsFrame> {
    let m = grid.config.symbols_per_frame;
    let bins = interior_bins(grid);
    let n_used = bins.len();
    let expected_syms = match pilot_mode {
        PilotMode::Comb => m,
        PilotMode::Block => m - 1,
    };
    if data.len() != expected_syms {
        return Err(DbuError::Dimension {
            expected: expected_syms,
            got: data.len(),
        });
    }
    let pilots = grid.pilot_symbols();
    let mut freq = Vec::with_capacity(m);
    let mut pilot_symbol = Vec::with_capacity(m);
    let mut data_iter = data.iter();
    for mi in 0..m {
        let mut col = vec![Complex64::ZERO; grid.n()];
        if pilot_mode == PilotMode::Block && mi == 0 {
            // Dedicated pilot symbol carried directly on the interior bins.
            for (&bin, &p) in bins.iter().zip(block_pilot_sequence(n_used).iter()) {
                col[bin] = p;
            }
            pilot_symbol.push(true);
        } else {
            let d = data_iter.next().unwrap();
            if d.len() != n_used {
                return Err(DbuError::Dimension {
                    expected: n_used,
                    got: d.len(),
                });
            }
            let mut spread = d.clone();
            fft_unitary(&mut spread);
            for (&bin, &s) in bins.iter().zip(&spread) {
                col[bin] = s;
            }
            if pilot_mode == PilotMode::Comb {
                // Puncture: pilot bins overwrite the spread signal.
                for (&bin, &p) in grid.pilot_idx.iter().zip(&pilots) {
                    col[bin] = p;
                }
            }
            pilot_symbol.push(false);
        }
        freq.push(col);
    }
    let time = modulate(&freq, None, grid.config.cp_len)?;
    Ok(DftsFrame {
        freq,
        time,
        pilot_symbol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, complex_gaussian, TapChannel};
    use crate::grid::{build_grid, GridConfig};
    use crate::modem::Modulation;
    use crate::unitary::{assemble_global, build_udata_applier, HouseholderParams};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tone_grid(n: usize, k: usize, m: usize) -> Vec<Vec<Complex64>> {
        let mut g = vec![vec![Complex64::ZERO; n]; m];
        for col in g.iter_mut() {
            col[k] = Complex64::new(1.0, 0.0);
        }
        g
    }

    #[test]
    fn single_tone_constant_envelope() {
        let time = modulate(&tone_grid(64, 5, 1), None, 0).unwrap();
        let expect = 1.0 / 8.0;
        for v in &time[0] {
            assert!((v.norm() - expect).abs() < 1e-12);
        }
        assert!(papr_db(&time[0]).unwrap().abs() < 1e-10);
    }

    #[test]
    fn parseval_per_symbol() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let freq: Vec<Vec<Complex64>> = vec![(0..32).map(|_| complex_gaussian(&mut rng)).collect()];
        let e_f: f64 = freq[0].iter().map(|v| v.norm_sqr()).sum();
        let time = modulate(&freq, None, 8).unwrap();
        let e_t: f64 = time[0][8..].iter().map(|v| v.norm_sqr()).sum();
        assert!((e_f - e_t).abs() < 1e-10);
    }

    #[test]
    fn cp_is_tail_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let freq: Vec<Vec<Complex64>> = vec![(0..16).map(|_| complex_gaussian(&mut rng)).collect()];
        let time = modulate(&freq, None, 4).unwrap();
        let sym = &time[0];
        assert_eq!(&sym[..4], &sym[16..]);
    }

    #[test]
    fn modulate_demodulate_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let freq: Vec<Vec<Complex64>> =
            vec![(0..64).map(|_| complex_gaussian(&mut rng)).collect(); 3];
        let time = modulate(&freq, None, 16).unwrap();
        let back = demodulate(&time, 64, 16).unwrap();
        for (a, b) in back.iter().flatten().zip(freq.iter().flatten()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn modulate_matches_dense_transform_oracle() {
        // x = F^H U s against an explicit dense construction.
        let grid = build_grid(GridConfig::config1()).unwrap();
        let params = HouseholderParams::random_init(grid.n_data(), 3, 1, 17);
        let u = assemble_global(build_udata_applier(params).unwrap(), &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s: Vec<Complex64> = (0..64).map(|_| complex_gaussian(&mut rng)).collect();
        let time = modulate(&[s.clone()], Some(&u), 0).unwrap();

        let mut us = s;
        u.forward(&mut us).unwrap();
        let n = 64usize;
        let two_pi = 2.0 * std::f64::consts::PI;
        for t in 0..n {
            let expect: Complex64 = (0..n)
                .map(|k| us[k] * Complex64::from_polar(1.0, two_pi * (t * k) as f64 / n as f64))
                .sum::<Complex64>()
                / (n as f64).sqrt();
            assert!((time[0][t] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn two_tap_channel_diagonalizes() {
        // Post-DFT relation Y = diag(H) * (U s), noiseless.
        let grid = build_grid(GridConfig::config1()).unwrap();
        let params = HouseholderParams::random_init(grid.n_data(), 4, 1, 23);
        let u = assemble_global(build_udata_applier(params).unwrap(), &grid).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let freq: Vec<Vec<Complex64>> =
            vec![(0..64).map(|_| complex_gaussian(&mut rng)).collect(); 2];
        let time = modulate(&freq, Some(&u), 16).unwrap();
        let ch = TapChannel::new(vec![complex_gaussian(&mut rng), complex_gaussian(&mut rng)], 64);
        let rx = apply_channel(&time, &ch, 0.0, 16, &mut rng).unwrap();
        let y = demodulate(&rx, 64, 16).unwrap();
        for (mi, col) in y.iter().enumerate() {
            let mut us = freq[mi].clone();
            u.forward(&mut us).unwrap();
            for k in 0..64 {
                assert!((col[k] - ch.freq_response[k] * us[k]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn circular_shift_channel_phase_ramp() {
        let freq: Vec<Vec<Complex64>> = vec![(0..16)
            .map(|i| Complex64::new(1.0 + i as f64 * 0.1, -0.2))
            .collect()];
        let time = modulate(&freq, None, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = TapChannel::new(vec![Complex64::ZERO, Complex64::new(1.0, 0.0)], 16);
        let rx = apply_channel(&time, &ch, 0.0, 4, &mut rng).unwrap();
        let y = demodulate(&rx, 16, 4).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        for k in 0..16 {
            let expect = freq[0][k] * Complex64::from_polar(1.0, -two_pi * k as f64 / 16.0);
            assert!((y[0][k] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn papr_known_values() {
        let x = [
            Complex64::new(1.0, 0.0),
            Complex64::ZERO,
            Complex64::ZERO,
            Complex64::ZERO,
        ];
        assert!((papr_db(&x).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-12);

        // IDFT of all-ones is an impulse: PAPR = 10 log10(64).
        let ones = vec![vec![Complex64::new(1.0, 0.0); 64]];
        let time = modulate(&ones, None, 0).unwrap();
        assert!((papr_db(&time[0]).unwrap() - 10.0 * 64f64.log10()).abs() < 1e-9);

        assert!(papr_db(&[]).is_err());
        assert!(papr_db(&[Complex64::ZERO]).is_err());
    }

    #[test]
    fn papr_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<Complex64> = (0..64).map(|_| complex_gaussian(&mut rng)).collect();
        let a = papr_db(&x).unwrap();
        let scaled: Vec<Complex64> = x.iter().map(|v| v * Complex64::new(-3.7, 1.2)).collect();
        assert!((papr_db(&scaled).unwrap() - a).abs() < 1e-10);
    }

    #[test]
    fn ccdf_counting() {
        let samples = [3.0, 5.0, 7.0];
        let c = ccdf(&samples, &[2.0, 4.0, 8.0]);
        assert_eq!(c, vec![1.0, 2.0 / 3.0, 0.0]);
    }

    #[test]
    fn papr_loss_arithmetic() {
        let below = vec![vec![Complex64::new(1.0, 0.0); 8]; 3];
        assert_eq!(papr_loss(&below, 1.0, 2).unwrap(), 0.0);

        // One symbol exceeding by exactly 1 dB, p = 2, M = 1.
        let mut sym = vec![Complex64::new(1.0, 0.0); 8];
        sym[0] = Complex64::new(1.2, 0.0);
        let actual = papr_db(&sym).unwrap();
        let loss = papr_loss(&[sym.clone()], actual - 1.0, 2).unwrap();
        assert!((loss - 1.0).abs() < 1e-12);

        // Two exceed by {0.5, 1.5} dB, p = 1, M = 4.
        let mk = |db_over: f64, tar: f64| {
            let mut s = vec![Complex64::new(1.0, 0.0); 64];
            // Raise peak until papr = tar + db_over.
            let target = tar + db_over;
            let peak = (10f64.powf(target / 10.0) * 63.0 / (64.0 - 10f64.powf(target / 10.0)))
                .sqrt();
            s[0] = Complex64::new(peak, 0.0);
            assert!((papr_db(&s).unwrap() - target).abs() < 1e-9);
            s
        };
        let tar = 3.0;
        let batch = vec![
            mk(0.5, tar),
            mk(1.5, tar),
            vec![Complex64::new(1.0, 0.0); 64],
            vec![Complex64::new(1.0, 0.0); 64],
        ];
        let loss = papr_loss(&batch, tar, 1).unwrap();
        assert!((loss - 0.5).abs() < 1e-8);
    }

    #[test]
    fn papr_loss_monotone_in_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let freq: Vec<Vec<Complex64>> =
            vec![(0..64).map(|_| complex_gaussian(&mut rng)).collect(); 4];
        let time = modulate(&freq, None, 0).unwrap();
        let mut prev = f64::INFINITY;
        for tar in [0.0, 2.0, 4.0, 6.0, 8.0, 100.0] {
            let l = papr_loss(&time, tar, 1).unwrap();
            assert!(l <= prev + 1e-12);
            prev = l;
        }
        assert_eq!(prev, 0.0);
    }

    #[test]
    fn oversample_factor_one_matches_modulate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let freq: Vec<Complex64> = (0..32).map(|_| complex_gaussian(&mut rng)).collect();
        let body = oversample(&freq, 1).unwrap();
        let time = modulate(&[freq.clone()], None, 0).unwrap();
        for (a, b) in body.iter().zip(&time[0]) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn oversample_single_tone_flat() {
        let mut freq = vec![Complex64::ZERO; 32];
        freq[3] = Complex64::new(1.0, 0.0);
        let body = oversample(&freq, 4).unwrap();
        assert_eq!(body.len(), 128);
        assert!(papr_db(&body).unwrap().abs() < 1e-9);
    }

    #[test]
    fn oversample_papr_not_below_nyquist() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let grid = build_grid(GridConfig::config1()).unwrap();
        let constellation = Constellation::new(Modulation::Qam16);
        for _ in 0..50 {
            let bits: Vec<u8> = (0..frame_bits(&grid, &constellation))
                .map(|_| rng.random_range(0..2u8))
                .collect();
            let freq = build_freq_grid(&grid, &constellation, &bits).unwrap();
            for col in &freq {
                let nyq = papr_db(&oversample(col, 1).unwrap()).unwrap();
                let over = papr_db(&oversample(col, 4).unwrap()).unwrap();
                assert!(over >= nyq - 0.01, "nyq {nyq} over {over}");
            }
        }
    }

    #[test]
    fn dfts_constant_input_low_papr() {
        // Full-band mapping, no pilots, constant input: single-carrier-like.
        let cfg = GridConfig {
            n_subcarriers: 64,
            cp_len: 16,
            guard_per_side: 0,
            dc_nulls: 0,
            pilot_count: 0,
            symbols_per_frame: 2,
            subcarrier_spacing_hz: 120e3,
            carrier_freq_hz: 3.6e9,
        };
        let grid = build_grid(cfg).unwrap();
        let data = vec![vec![Complex64::new(1.0, 1.0); 64]; 2];
        let frame = dfts_modulate(&data, &grid, PilotMode::Comb).unwrap();
        for sym in &frame.time {
            assert!(papr_db(&sym[16..]).unwrap() <= 0.5);
        }
    }

    #[test]
    fn dfts_block_pilot_pass_through() {
        let grid = build_grid(GridConfig::config1()).unwrap();
        let n_used = interior_bins(&grid).len();
        let m = grid.config.symbols_per_frame;
        let data = vec![vec![Complex64::ZERO; n_used]; m - 1];
        let frame = dfts_modulate(&data, &grid, PilotMode::Block).unwrap();
        assert!(frame.pilot_symbol[0]);
        let bins = interior_bins(&grid);
        let seq = super::block_pilot_sequence(n_used);
        for (&bin, &p) in bins.iter().zip(&seq) {
            assert_eq!(frame.freq[0][bin], p);
        }
        // Data symbols are all-zero after spreading zero input.
        for col in &frame.freq[1..] {
            assert!(col.iter().all(|v| v.norm() < 1e-15));
        }
    }

    #[test]
    fn dfts_comb_punctures_pilot_bins() {
        let grid = build_grid(GridConfig::config1()).unwrap();
        let n_used = interior_bins(&grid).len();
        let m = grid.config.symbols_per_frame;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<Vec<Complex64>> = (0..m)
            .map(|_| (0..n_used).map(|_| complex_gaussian(&mut rng)).collect())
            .collect();
        let frame = dfts_modulate(&data, &grid, PilotMode::Comb).unwrap();
        let pilots = grid.pilot_symbols();
        for col in &frame.freq {
            for (&bin, &p) in grid.pilot_idx.iter().zip(&pilots) {
                assert_eq!(col[bin], p);
            }
        }
    }
}
