//! Monte Carlo statistics engine: CCDF, BER/BLER with binomial confidence
//! intervals and early stopping, sensing MSE with bootstrap intervals, and
//! the stochastic loss evaluators driven by the trainer.
//!
//! Trials fan out across rayon workers with per-trial seeds derived from
//! (base seed, trial index), so reductions are order-independent and every
//! curve is reproducible bit-exactly from (config, seed).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{apply_channel, draw_tworay, sensing_observe, Path, PathSet};
use crate::equalize::{data_lambda, ls_pilot_estimate, mmse_gains, recover};
use crate::grid::ResourceGrid;
use crate::modem::{bce_loss, Constellation, Modulation};
use crate::ofdm::{
    build_freq_grid, demodulate, dfts_modulate, frame_bits, interior_bins, modulate, oversample,
    papr_db, PilotMode,
};
use crate::sensing::{
    active_mask, matched_demod, sic_extract, to_range_velocity, EstimatorMode, SearchGrid,
};
use crate::trainer::step_seed;
use crate::unitary::{assemble_global, build_udata_applier, HouseholderParams, UnitaryTransform};
use crate::{DbuError, Result};

/// Transmit waveform under evaluation.
#[derive(Debug, Clone)]
pub enum Waveform {
    /// Conventional OFDM (identity unitary).
    Ofdm,
    /// DBU-OFDM with the given parameters.
    Dbu(HouseholderParams),
    /// DFT-s-OFDM with a dedicated pilot symbol per frame.
    DftsBlock,
    /// DFT-s-OFDM with comb pilots puncturing every symbol.
    DftsComb,
}

impl Waveform {
    fn transform(&self, grid: &ResourceGrid) -> Result<Option<UnitaryTransform>> {
        match self {
            Waveform::Ofdm | Waveform::DftsBlock | Waveform::DftsComb => Ok(None),
            Waveform::Dbu(params) => {
                let applier = build_udata_applier(params.clone())?;
                Ok(Some(assemble_global(applier, grid)?))
            }
        }
    }
}

fn random_bits<R: Rng>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Post-unitary frequency-domain grid for one frame of random payload.
fn tx_freq_grid<R: Rng>(
    grid: &ResourceGrid,
    u: Option<&UnitaryTransform>,
    constellation: &Constellation,
    rng: &mut R,
) -> Result<Vec<Vec<Complex64>>> {
    let bits = random_bits(rng, frame_bits(grid, constellation));
    let mut freq = build_freq_grid(grid, constellation, &bits)?;
    if let Some(u) = u {
        for col in freq.iter_mut() {
            u.forward(col)?;
        }
    }
    Ok(freq)
}

// ---------------------------------------------------------------------------
// PAPR / CCDF
// ---------------------------------------------------------------------------

/// Per-symbol PAPR samples for a waveform.
#[derive(Debug, Clone)]
pub struct PaprRun {
    pub samples_db: Vec<f64>,
}

impl PaprRun {
    /// CCDF over a 0.1 dB threshold sweep spanning the observed range.
    pub fn ccdf_table(&self) -> Vec<(f64, f64)> {
        let lo = self
            .samples_db
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .samples_db
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let start = (lo * 10.0).floor() / 10.0;
        let steps = (((hi - start) * 10.0).ceil() as usize).max(1) + 1;
        (0..steps)
            .map(|i| {
                let t = start + 0.1 * i as f64;
                let c = self.samples_db.iter().filter(|&&s| s > t).count() as f64
                    / self.samples_db.len() as f64;
                (t, c)
            })
            .collect()
    }

    /// PAPR threshold where the empirical CCDF crosses `level`.
    pub fn threshold_at(&self, level: f64) -> f64 {
        crate::ofdm::ccdf_threshold_at(&self.samples_db, level)
    }
}

/// Collect `n_symbols` per-symbol PAPR samples (oversampled by `l`).
/// Dedicated pilot symbols of block-pilot DFT-s-OFDM carry no payload and
/// are excluded from the statistic.
pub fn run_papr_ccdf(
    wf: &Waveform,
    grid: &ResourceGrid,
    modulation: Modulation,
    n_symbols: usize,
    l: usize,
    seed: u64,
) -> Result<PaprRun> {
    if n_symbols == 0 {
        return Err(DbuError::Config("need at least one PAPR symbol".into()));
    }
    let constellation = Constellation::new(modulation);
    let u = wf.transform(grid)?;
    let m = grid.config.symbols_per_frame;
    let per_frame = match wf {
        Waveform::DftsBlock => m - 1,
        _ => m,
    };
    let n_frames = n_symbols.div_ceil(per_frame);
    let mut samples: Vec<f64> = (0..n_frames)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>> {
            let mut rng = ChaCha8Rng::seed_from_u64(step_seed(seed, f));
            let freq = match wf {
                Waveform::Ofdm | Waveform::Dbu(_) => {
                    tx_freq_grid(grid, u.as_ref(), &constellation, &mut rng)?
                }
                Waveform::DftsBlock | Waveform::DftsComb => {
                    let mode = if matches!(wf, Waveform::DftsBlock) {
                        PilotMode::Block
                    } else {
                        PilotMode::Comb
                    };
                    let n_used = interior_bins(grid).len();
                    let n_syms = if mode == PilotMode::Block { m - 1 } else { m };
                    let data: Vec<Vec<Complex64>> = (0..n_syms)
                        .map(|_| -> Result<Vec<Complex64>> {
                            let bits =
                                random_bits(&mut rng, n_used * constellation.bits_per_symbol());
                            constellation.map_bits(&bits)
                        })
                        .collect::<Result<_>>()?;
                    let frame = dfts_modulate(&data, grid, mode)?;
                    frame
                        .freq
                        .into_iter()
                        .zip(frame.pilot_symbol)
                        .filter(|(_, p)| !p)
                        .map(|(col, _)| col)
                        .collect()
                }
            };
            freq.iter()
                .map(|col| papr_db(&oversample(col, l)?))
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?
        .into_iter()
        .flatten()
        .collect();
    samples.truncate(n_symbols);
    Ok(PaprRun {
        samples_db: samples,
    })
}

// ---------------------------------------------------------------------------
// BER / BLER
// ---------------------------------------------------------------------------

/// One BER/BLER curve point.
#[derive(Debug, Clone)]
pub struct BlerPoint {
    pub snr_db: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub block_errors: u64,
    pub bler: f64,
    /// 95% Wilson interval on BLER.
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// 95% Wilson score interval for k successes in n trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.96f64;
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = (z / denom) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Uncoded BER and frame BLER over the two-ray Rayleigh channel with MMSE
/// equalization and hard decisions. One block = one frame payload. Each
/// point stops early once `min_block_errors` blocks have failed.
pub fn run_ber_bler(
    wf: &Waveform,
    grid: &ResourceGrid,
    modulation: Modulation,
    snr_db_list: &[f64],
    max_blocks: u64,
    min_block_errors: u64,
    ls_pilots: bool,
    seed: u64,
) -> Result<Vec<BlerPoint>> {
    let u = match wf {
        Waveform::Ofdm => UnitaryTransform::identity(grid),
        Waveform::Dbu(params) => {
            assemble_global(build_udata_applier(params.clone())?, grid)?
        }
        _ => {
            return Err(DbuError::Config(
                "BER/BLER evaluation supports ofdm and DBU models".into(),
            ))
        }
    };
    if max_blocks == 0 {
        return Err(DbuError::Config("need at least one block".into()));
    }
    let constellation = Constellation::new(modulation);
    let chunk: u64 = 1024;
    let mut points = Vec::with_capacity(snr_db_list.len());
    for (si, &snr_db) in snr_db_list.iter().enumerate() {
        let noise_var = 10f64.powf(-snr_db / 10.0);
        let point_seed = seed ^ ((si as u64 + 1) << 48);
        let mut trials = 0u64;
        let mut bit_errors = 0u64;
        let mut block_errors = 0u64;
        while trials < max_blocks {
            let batch = chunk.min(max_blocks - trials);
            let (be, ble) = (trials..trials + batch)
                .into_par_iter()
                .map(|t| -> Result<(u64, u64)> {
                    let mut rng = ChaCha8Rng::seed_from_u64(step_seed(point_seed, t as usize));
                    ber_trial(grid, &u, &constellation, noise_var, ls_pilots, &mut rng)
                })
                .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
            bit_errors += be;
            block_errors += ble;
            trials += batch;
            if block_errors >= min_block_errors {
                break;
            }
        }
        let bits_per_block = frame_bits(grid, &constellation) as u64;
        let (ci_lo, ci_hi) = wilson_interval(block_errors, trials);
        points.push(BlerPoint {
            snr_db,
            trials,
            bit_errors,
            ber: bit_errors as f64 / (trials * bits_per_block) as f64,
            block_errors,
            bler: block_errors as f64 / trials as f64,
            ci_lo,
            ci_hi,
        });
    }
    Ok(points)
}

/// One block-fading trial: returns (bit errors, block error flag).
fn ber_trial(
    grid: &ResourceGrid,
    u: &UnitaryTransform,
    constellation: &Constellation,
    noise_var: f64,
    ls_pilots: bool,
    rng: &mut ChaCha8Rng,
) -> Result<(u64, u64)> {
    let bits = random_bits(rng, frame_bits(grid, constellation));
    let frame = crate::ofdm::make_frame(grid, Some(u), constellation, bits)?;
    let ch = draw_tworay(rng, grid.n());
    let rx = apply_channel(&frame.time, &ch, noise_var, grid.config.cp_len, rng)?;
    let y = demodulate(&rx, grid.n(), grid.config.cp_len)?;
    let nd = grid.n_data();
    let bps = constellation.bits_per_symbol();
    let mut bit_errors = 0u64;
    for (mi, col) in y.iter().enumerate() {
        let lambda = if ls_pilots {
            let est = ls_pilot_estimate(grid, col)?;
            est
        } else {
            data_lambda(grid, &ch.freq_response)
        };
        let gains = mmse_gains(&lambda, noise_var)?;
        let y_data: Vec<Complex64> = grid.data_idx.iter().map(|&i| col[i]).collect();
        let rec = recover(&y_data, &gains, noise_var, &u.udata)?;
        for (j, &s) in rec.symbols.iter().enumerate() {
            let hard = constellation.hard_demap(s);
            let sent = &frame.payload_bits[(mi * nd + j) * bps..(mi * nd + j + 1) * bps];
            bit_errors += hard.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
        }
    }
    Ok((bit_errors, u64::from(bit_errors > 0)))
}

// ---------------------------------------------------------------------------
// Sensing
// ---------------------------------------------------------------------------

/// One sensing MSE curve point.
#[derive(Debug, Clone)]
pub struct SensePoint {
    pub snr_db: f64,
    pub trials: u64,
    pub range_mse: f64,
    pub vel_mse: f64,
    /// 95% bootstrap intervals on the MSEs.
    pub range_ci: (f64, f64),
    pub vel_ci: (f64, f64),
}

/// Random multipath scene: delays in [0.1, 0.9] T_cp, Dopplers within
/// +/-0.4/T_o, |beta| in [0.5, 1], uniform phase, and every pair at least
/// two resolution cells apart in delay or Doppler.
pub fn draw_scene<R: Rng>(
    rng: &mut R,
    cfg: &crate::grid::GridConfig,
    n_paths: usize,
) -> Result<PathSet> {
    let t_cp = cfg.cp_duration();
    let t_o = cfg.total_symbol_duration();
    let tau_res = 1.0 / (cfg.n_subcarriers as f64 * cfg.subcarrier_spacing_hz);
    let nu_res = 1.0 / (cfg.symbols_per_frame as f64 * t_o);
    let mut paths: Vec<Path> = Vec::with_capacity(n_paths);
    let mut attempts = 0usize;
    while paths.len() < n_paths {
        attempts += 1;
        if attempts > 100_000 {
            return Err(DbuError::Config(
                "scene rejection sampling failed; grid too small for path count".into(),
            ));
        }
        let tau = (0.1 + 0.8 * rng.random::<f64>()) * t_cp;
        let nu = (rng.random::<f64>() - 0.5) * 0.8 / t_o;
        let separated = paths.iter().all(|p| {
            let dt = (p.tau_s - tau).abs() / tau_res;
            let dn = (p.nu_hz - nu).abs() / nu_res;
            dt.max(dn) >= 2.0
        });
        if !separated {
            continue;
        }
        let mag = 0.5 + 0.5 * rng.random::<f64>();
        let phase = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let beta = Complex64::from_polar(mag, phase);
        paths.push(Path {
            beta: [beta.re, beta.im],
            tau_s: tau,
            nu_hz: nu,
        });
    }
    Ok(PathSet { paths })
}

/// Pair truth and estimates: truth sorted by |beta| descending matches the
/// SIC extraction order; both are converted to (range, velocity).
fn paired_range_velocity(
    truth: &PathSet,
    estimates: &[(f64, f64)],
    carrier_hz: f64,
) -> Result<Vec<((f64, f64), (f64, f64))>> {
    let mut order: Vec<&Path> = truth.paths.iter().collect();
    order.sort_by(|a, b| {
        b.beta_c()
            .norm()
            .partial_cmp(&a.beta_c().norm())
            .unwrap()
    });
    order
        .iter()
        .zip(estimates)
        .map(|(p, &(tau_e, nu_e))| {
            let t = to_range_velocity(p.tau_s, p.nu_hz, carrier_hz)?;
            let e = to_range_velocity(tau_e, nu_e, carrier_hz)?;
            Ok((t, e))
        })
        .collect()
}

/// Range/velocity MSE vs SNR with hard-argmax SIC over random scenes.
pub fn run_sensing(
    wf: &Waveform,
    grid: &ResourceGrid,
    search: &SearchGrid,
    modulation: Modulation,
    snr_db_list: &[f64],
    trials: u64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SensePoint>> {
    let u = wf.transform(grid)?;
    if matches!(wf, Waveform::DftsBlock | Waveform::DftsComb) {
        return Err(DbuError::Config(
            "sensing evaluation supports ofdm and DBU models".into(),
        ));
    }
    if trials == 0 {
        return Err(DbuError::Config("need at least one sensing trial".into()));
    }
    let constellation = Constellation::new(modulation);
    let mask = active_mask(grid);
    let mut points = Vec::with_capacity(snr_db_list.len());
    for (si, &snr_db) in snr_db_list.iter().enumerate() {
        let noise_var = 10f64.powf(-snr_db / 10.0);
        let point_seed = seed ^ ((si as u64 + 1) << 48);
        let per_trial: Vec<(f64, f64)> = (0..trials)
            .into_par_iter()
            .map(|t| -> Result<(f64, f64)> {
                let mut rng = ChaCha8Rng::seed_from_u64(step_seed(point_seed, t as usize));
                let sbar = tx_freq_grid(grid, u.as_ref(), &constellation, &mut rng)?;
                let scene = draw_scene(&mut rng, &grid.config, n_paths)?;
                let y = sensing_observe(&sbar, &scene, noise_var, &grid.config, &mut rng)?;
                let z = matched_demod(&y, &sbar, &mask)?;
                let ext = sic_extract(&z, search, &grid.config, &mask, n_paths, EstimatorMode::Hard)?;
                let est: Vec<(f64, f64)> = ext.iter().map(|p| (p.tau, p.nu)).collect();
                let pairs =
                    paired_range_velocity(&scene, &est, grid.config.carrier_freq_hz)?;
                let l = pairs.len() as f64;
                let rse: f64 = pairs.iter().map(|(t, e)| (e.0 - t.0).powi(2)).sum::<f64>() / l;
                let vse: f64 = pairs.iter().map(|(t, e)| (e.1 - t.1).powi(2)).sum::<f64>() / l;
                Ok((rse, vse))
            })
            .collect::<Result<_>>()?;
        let n = per_trial.len() as f64;
        let range_mse = per_trial.iter().map(|p| p.0).sum::<f64>() / n;
        let vel_mse = per_trial.iter().map(|p| p.1).sum::<f64>() / n;
        let mut boot_rng = ChaCha8Rng::seed_from_u64(point_seed ^ 0xb007);
        let range_ci = bootstrap_ci(&per_trial.iter().map(|p| p.0).collect::<Vec<_>>(), &mut boot_rng);
        let vel_ci = bootstrap_ci(&per_trial.iter().map(|p| p.1).collect::<Vec<_>>(), &mut boot_rng);
        points.push(SensePoint {
            snr_db,
            trials,
            range_mse,
            vel_mse,
            range_ci,
            vel_ci,
        });
    }
    Ok(points)
}

/// 95% percentile bootstrap interval on the mean, 200 resamples.
fn bootstrap_ci<R: Rng>(samples: &[f64], rng: &mut R) -> (f64, f64) {
    let n = samples.len();
    let mut means: Vec<f64> = (0..200)
        .map(|_| {
            (0..n)
                .map(|_| samples[rng.random_range(0..n)])
                .sum::<f64>()
                / n as f64
        })
        .collect();
    means.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (means[4], means[194])
}

// ---------------------------------------------------------------------------
// Training objectives
// ---------------------------------------------------------------------------

/// PAPR exceedance loss over a fresh batch of frames at Nyquist rate.
pub fn papr_loss_eval(
    params: &HouseholderParams,
    grid: &ResourceGrid,
    modulation: Modulation,
    batch_frames: usize,
    gamma_tar_db: f64,
    hardness: u32,
    seed: u64,
) -> Result<f64> {
    let constellation = Constellation::new(modulation);
    let u = assemble_global(build_udata_applier(params.clone())?, grid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bodies = Vec::with_capacity(batch_frames * grid.config.symbols_per_frame);
    for _ in 0..batch_frames {
        let freq = tx_freq_grid(grid, Some(&u), &constellation, &mut rng)?;
        bodies.extend(modulate(&freq, None, 0)?);
    }
    crate::ofdm::papr_loss(&bodies, gamma_tar_db, hardness)
}

/// Bit-wise binary cross-entropy through the full link at one SNR.
pub fn comm_loss_eval(
    params: &HouseholderParams,
    grid: &ResourceGrid,
    modulation: Modulation,
    batch_frames: usize,
    snr_db: f64,
    seed: u64,
) -> Result<f64> {
    let constellation = Constellation::new(modulation);
    let u = assemble_global(build_udata_applier(params.clone())?, grid)?;
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let nd = grid.n_data();
    let bps = constellation.bits_per_symbol();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..batch_frames {
        let bits = random_bits(&mut rng, frame_bits(grid, &constellation));
        let frame = crate::ofdm::make_frame(grid, Some(&u), &constellation, bits)?;
        let ch = draw_tworay(&mut rng, grid.n());
        let rx = apply_channel(&frame.time, &ch, noise_var, grid.config.cp_len, &mut rng)?;
        let y = demodulate(&rx, grid.n(), grid.config.cp_len)?;
        let lambda = data_lambda(grid, &ch.freq_response);
        let gains = mmse_gains(&lambda, noise_var)?;
        let mut probs = Vec::with_capacity(frame.payload_bits.len());
        for col in &y {
            let y_data: Vec<Complex64> = grid.data_idx.iter().map(|&i| col[i]).collect();
            let rec = recover(&y_data, &gains, noise_var, &u.udata)?;
            for (j, &s) in rec.symbols.iter().enumerate() {
                probs.extend(constellation.soft_demap(s, rec.noise_var[j]));
            }
        }
        debug_assert_eq!(probs.len(), nd * grid.config.symbols_per_frame * bps);
        acc += bce_loss(&frame.payload_bits, &probs)?;
    }
    Ok(acc / batch_frames as f64)
}

/// Soft-SIC range/velocity MSE over a batch of random scenes at one SNR.
#[allow(clippy::too_many_arguments)]
pub fn sense_loss_eval(
    params: &HouseholderParams,
    grid: &ResourceGrid,
    search: &SearchGrid,
    modulation: Modulation,
    batch_frames: usize,
    snr_db: f64,
    n_paths: usize,
    seed: u64,
) -> Result<f64> {
    let constellation = Constellation::new(modulation);
    let u = assemble_global(build_udata_applier(params.clone())?, grid)?;
    let noise_var = 10f64.powf(-snr_db / 10.0);
    let mask = active_mask(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..batch_frames {
        let sbar = tx_freq_grid(grid, Some(&u), &constellation, &mut rng)?;
        let scene = draw_scene(&mut rng, &grid.config, n_paths)?;
        let y = sensing_observe(&sbar, &scene, noise_var, &grid.config, &mut rng)?;
        let z = matched_demod(&y, &sbar, &mask)?;
        let ext = sic_extract(&z, search, &grid.config, &mask, n_paths, EstimatorMode::Soft)?;
        let est: Vec<(f64, f64)> = ext.iter().map(|p| (p.tau, p.nu)).collect();
        let pairs = paired_range_velocity(&scene, &est, grid.config.carrier_freq_hz)?;
        let l = pairs.len() as f64;
        acc += pairs
            .iter()
            .map(|(t, e)| (e.0 - t.0).powi(2) + (e.1 - t.1).powi(2))
            .sum::<f64>()
            / (2.0 * l);
    }
    Ok(acc / batch_frames as f64)
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

/// Format with 6 significant digits, printf `%g` style: fixed-point in the
/// mid range, scientific outside it, trailing zeros stripped.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    };
    if let Some((mant, e)) = s.split_once('e') {
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}e{e}")
    } else if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// CCDF table as CSV rows `threshold_db,ccdf`.
pub fn ccdf_csv(run: &PaprRun, header: &str) -> String {
    let mut out = format!("{header}\nthreshold_db,ccdf\n");
    for (t, c) in run.ccdf_table() {
        out.push_str(&format!("{},{}\n", fmt_g6(t), fmt_g6(c)));
    }
    out
}

/// BER/BLER curve as CSV.
pub fn ber_csv(points: &[BlerPoint], header: &str) -> String {
    let mut out =
        format!("{header}\nsnr_db,trials,bit_errors,ber,block_errors,bler,ci_lo,ci_hi\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_g6(p.snr_db),
            p.trials,
            p.bit_errors,
            fmt_g6(p.ber),
            p.block_errors,
            fmt_g6(p.bler),
            fmt_g6(p.ci_lo),
            fmt_g6(p.ci_hi),
        ));
    }
    out
}

/// Sensing MSE curve as CSV.
pub fn sense_csv(points: &[SensePoint], header: &str) -> String {
    let mut out = format!("{header}\nsnr_db,trials,range_mse,vel_mse\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_g6(p.snr_db),
            p.trials,
            fmt_g6(p.range_mse),
            fmt_g6(p.vel_mse),
        ));
    }
    out
}
