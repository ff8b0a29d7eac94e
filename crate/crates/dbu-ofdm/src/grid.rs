//! OFDM resource layout: the data/pilot/null partition of the subcarrier set
//! and the permutation between grouped order `[data | pilot | null]` and
//! physical DFT-bin order.
//!
//! Allocation is done in centered (negative-to-positive frequency) order:
//! guard bands at both edges, DC nulls around bin 0, a uniform pilot comb
//! over the remaining interior, data everywhere else. Centered positions are
//! then converted to conventional DFT bin indices.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{DbuError, Result};

/// Seed for the fixed unit-modulus QPSK pilot sequence.
pub const PILOT_SEED: u64 = 0x70696c_6f74; // "pilot"

/// Static OFDM frame dimensions and spectrum layout counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// Total subcarriers N.
    pub n_subcarriers: usize,
    /// Cyclic prefix length in samples.
    pub cp_len: usize,
    /// Guard subcarriers per band edge (total nulled guards = 2x this).
    pub guard_per_side: usize,
    /// Nulled subcarriers around DC.
    pub dc_nulls: usize,
    /// Comb pilot subcarriers per OFDM symbol.
    pub pilot_count: usize,
    /// OFDM symbols per frame (one coherent processing interval).
    pub symbols_per_frame: usize,
    /// Subcarrier spacing in Hz.
    #[serde(default = "default_scs")]
    pub subcarrier_spacing_hz: f64,
    /// Carrier frequency in Hz.
    #[serde(default = "default_fc")]
    pub carrier_freq_hz: f64,
}

fn default_scs() -> f64 {
    120e3
}

fn default_fc() -> f64 {
    3.6e9
}

impl GridConfig {
    /// Number of data subcarriers, N - 2*Ng - Ndc - Np.
    pub fn n_data(&self) -> isize {
        self.n_subcarriers as isize
            - 2 * self.guard_per_side as isize
            - self.dc_nulls as isize
            - self.pilot_count as isize
    }

    /// Useful symbol duration T = 1/df in seconds.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz
    }

    /// CP duration in seconds.
    pub fn cp_duration(&self) -> f64 {
        self.cp_len as f64 * self.symbol_duration() / self.n_subcarriers as f64
    }

    /// Total symbol duration T_o = T + T_cp in seconds.
    pub fn total_symbol_duration(&self) -> f64 {
        self.symbol_duration() + self.cp_duration()
    }

    /// Config 1 from the standard parameter table: N=64, Ncp=16, Ng=4/side,
    /// Np=8, Ndc=2, M=8.
    pub fn config1() -> Self {
        GridConfig {
            n_subcarriers: 64,
            cp_len: 16,
            guard_per_side: 4,
            dc_nulls: 2,
            pilot_count: 8,
            symbols_per_frame: 8,
            subcarrier_spacing_hz: default_scs(),
            carrier_freq_hz: default_fc(),
        }
    }

    /// Config 2: N=128, Ncp=32, Ng=8/side, Np=16, Ndc=2, M=8.
    pub fn config2() -> Self {
        GridConfig {
            n_subcarriers: 128,
            cp_len: 32,
            guard_per_side: 8,
            dc_nulls: 2,
            pilot_count: 16,
            symbols_per_frame: 8,
            subcarrier_spacing_hz: default_scs(),
            carrier_freq_hz: default_fc(),
        }
    }

    /// Config 3: N=256, Ncp=64, Ng=16/side, Np=16, Ndc=2, M=8.
    pub fn config3() -> Self {
        GridConfig {
            n_subcarriers: 256,
            cp_len: 64,
            guard_per_side: 16,
            dc_nulls: 2,
            pilot_count: 16,
            symbols_per_frame: 8,
            subcarrier_spacing_hz: default_scs(),
            carrier_freq_hz: default_fc(),
        }
    }
}

/// Resolved resource layout: index lists in physical DFT-bin order plus the
/// grouped-to-physical permutation. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ResourceGrid {
    pub config: GridConfig,
    /// Physical bin indices of data subcarriers (centered-ascending order).
    pub data_idx: Vec<usize>,
    /// Physical bin indices of pilot subcarriers.
    pub pilot_idx: Vec<usize>,
    /// Physical bin indices of null subcarriers (guards + DC).
    pub null_idx: Vec<usize>,
    /// perm[g] = physical index of grouped position g, grouped order being
    /// data_idx ++ pilot_idx ++ null_idx.
    pub perm: Vec<usize>,
}

/// Convert a centered position c (0 = most negative frequency) to a DFT bin.
fn centered_to_bin(c: usize, n: usize) -> usize {
    (c + n / 2) % n
}

/// Lay out the resource grid from a validated config.
pub fn build_grid(config: GridConfig) -> Result<ResourceGrid> {
    let n = config.n_subcarriers;
    if n == 0 || n % 2 != 0 {
        return Err(DbuError::Config(format!(
            "n_subcarriers must be a positive even count, got {n}"
        )));
    }
    if config.subcarrier_spacing_hz <= 0.0 {
        return Err(DbuError::Config("subcarrier spacing must be > 0".into()));
    }
    if config.n_data() <= 0 {
        return Err(DbuError::Config(format!(
            "layout leaves no data subcarriers (N_data = {})",
            config.n_data()
        )));
    }

    let ng = config.guard_per_side;
    let ndc = config.dc_nulls;
    let np = config.pilot_count;

    // Centered positions: 0..N; DC sits at c = N/2. The DC null block takes
    // the Ndc positions starting at N/2 - floor(Ndc/2).
    let dc_start = n / 2 - ndc / 2;
    let is_guard = |c: usize| c < ng || c >= n - ng;
    let is_dc = |c: usize| c >= dc_start && c < dc_start + ndc;

    let interior: Vec<usize> = (0..n).filter(|&c| !is_guard(c) && !is_dc(c)).collect();
    if np > 0 {
        let stride = interior.len() / np;
        if stride < 1 {
            return Err(DbuError::Config(format!(
                "pilot spacing < 1 ({} pilots over {} interior subcarriers)",
                np,
                interior.len()
            )));
        }
    }

    // Uniform pilot comb starting at the lowest interior position.
    let stride = if np > 0 { interior.len() / np } else { 0 };
    let pilot_pos: Vec<usize> = (0..np).map(|k| interior[k * stride]).collect();
    let data_pos: Vec<usize> = interior
        .iter()
        .copied()
        .filter(|c| !pilot_pos.contains(c))
        .collect();
    let null_pos: Vec<usize> = (0..n).filter(|&c| is_guard(c) || is_dc(c)).collect();

    let data_idx: Vec<usize> = data_pos.iter().map(|&c| centered_to_bin(c, n)).collect();
    let pilot_idx: Vec<usize> = pilot_pos.iter().map(|&c| centered_to_bin(c, n)).collect();
    let null_idx: Vec<usize> = null_pos.iter().map(|&c| centered_to_bin(c, n)).collect();

    let mut perm = Vec::with_capacity(n);
    perm.extend(&data_idx);
    perm.extend(&pilot_idx);
    perm.extend(&null_idx);
    debug_assert_eq!(perm.len(), n);

    Ok(ResourceGrid {
        config,
        data_idx,
        pilot_idx,
        null_idx,
        perm,
    })
}

impl ResourceGrid {
    pub fn n(&self) -> usize {
        self.config.n_subcarriers
    }

    pub fn n_data(&self) -> usize {
        self.data_idx.len()
    }

    /// Scatter a grouped-order vector [data | pilot | null] into physical
    /// bin order. Pure index shuffle.
    pub fn permute(&self, grouped: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n();
        if grouped.len() != n {
            return Err(DbuError::Dimension {
                expected: n,
                got: grouped.len(),
            });
        }
        let mut physical = vec![Complex64::ZERO; n];
        for (g, &p) in self.perm.iter().enumerate() {
            physical[p] = grouped[g];
        }
        Ok(physical)
    }

    /// Gather a physical-order vector back into grouped order.
    pub fn inverse_permute(&self, physical: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.n();
        if physical.len() != n {
            return Err(DbuError::Dimension {
                expected: n,
                got: physical.len(),
            });
        }
        Ok(self.perm.iter().map(|&p| physical[p]).collect())
    }

    /// The fixed unit-modulus QPSK pilot sequence, one value per pilot
    /// subcarrier, generated from `PILOT_SEED`.
    pub fn pilot_symbols(&self) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(PILOT_SEED);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        (0..self.pilot_idx.len())
            .map(|_| {
                let i = if rng.random::<bool>() { s } else { -s };
                let q = if rng.random::<bool>() { s } else { -s };
                Complex64::new(i, q)
            })
            .collect()
    }

    /// Dense N x N permutation matrix P with P[phys][grouped] = 1. Test and
    /// oracle support.
    pub fn dense_permutation(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut p = vec![vec![0.0; n]; n];
        for (g, &phys) in self.perm.iter().enumerate() {
            p[phys][g] = 1.0;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config1_data_count() {
        let grid = build_grid(GridConfig::config1()).unwrap();
        assert_eq!(grid.n_data(), 46);
    }

    #[test]
    fn config3_data_count() {
        let grid = build_grid(GridConfig::config3()).unwrap();
        assert_eq!(grid.n_data(), 206);
    }

    #[test]
    fn degenerate_all_data() {
        let cfg = GridConfig {
            n_subcarriers: 32,
            cp_len: 8,
            guard_per_side: 0,
            dc_nulls: 0,
            pilot_count: 0,
            symbols_per_frame: 4,
            subcarrier_spacing_hz: 120e3,
            carrier_freq_hz: 3.6e9,
        };
        let grid = build_grid(cfg).unwrap();
        assert_eq!(grid.n_data(), 32);
        assert!(grid.pilot_idx.is_empty());
        assert!(grid.null_idx.is_empty());
    }

    #[test]
    fn rejects_empty_data() {
        let cfg = GridConfig {
            n_subcarriers: 16,
            cp_len: 4,
            guard_per_side: 4,
            dc_nulls: 2,
            pilot_count: 8,
            symbols_per_frame: 2,
            subcarrier_spacing_hz: 120e3,
            carrier_freq_hz: 3.6e9,
        };
        assert!(build_grid(cfg).is_err());
    }

    #[test]
    fn partition_is_exact() {
        let grid = build_grid(GridConfig::config1()).unwrap();
        let n = grid.n();
        let mut seen = vec![0u8; n];
        for &i in grid
            .data_idx
            .iter()
            .chain(&grid.pilot_idx)
            .chain(&grid.null_idx)
        {
            seen[i] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(grid.null_idx.len(), 2 * 4 + 2);
    }

    #[test]
    fn pilot_comb_spacing() {
        let grid = build_grid(GridConfig::config1()).unwrap();
        // Spacing is constant in centered order; allow +/-1 where the DC gap
        // interrupts the comb.
        let n = grid.n();
        let mut centered: Vec<usize> = grid
            .pilot_idx
            .iter()
            .map(|&b| (b + n / 2) % n)
            .collect();
        centered.sort_unstable();
        let diffs: Vec<isize> = centered
            .windows(2)
            .map(|w| w[1] as isize - w[0] as isize)
            .collect();
        let base = diffs[0];
        assert!(diffs.iter().all(|&d| (d - base).abs() <= grid.config.dc_nulls as isize));
    }

    #[test]
    fn permute_round_trip() {
        let grid = build_grid(GridConfig::config1()).unwrap();
        let x: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new(i as f64, -(i as f64)))
            .collect();
        let y = grid.inverse_permute(&grid.permute(&x).unwrap()).unwrap();
        assert_eq!(x, y);
        let nx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let ny: f64 = grid
            .permute(&x)
            .unwrap()
            .iter()
            .map(|v| v.norm_sqr())
            .sum();
        assert!((nx - ny).abs() < 1e-12);
    }

    #[test]
    fn permute_matches_dense_oracle() {
        // P*e0 must land on the first physical data subcarrier.
        let grid = build_grid(GridConfig::config1()).unwrap();
        let n = grid.n();
        let p = grid.dense_permutation();
        let mut grouped = vec![Complex64::ZERO; n];
        grouped[0] = Complex64::new(1.0, 0.0);
        let shuffled = grid.permute(&grouped).unwrap();
        for phys in 0..n {
            let expect: f64 = p[phys][0];
            assert!((shuffled[phys].re - expect).abs() < 1e-15);
        }
        assert!((shuffled[grid.data_idx[0]].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_layout_permute_is_identity() {
        // With no pilots/nulls, grouped order equals centered order mapped to
        // bins; check the permutation is a bijection either way.
        let cfg = GridConfig {
            n_subcarriers: 8,
            cp_len: 2,
            guard_per_side: 0,
            dc_nulls: 0,
            pilot_count: 0,
            symbols_per_frame: 1,
            subcarrier_spacing_hz: 120e3,
            carrier_freq_hz: 3.6e9,
        };
        let grid = build_grid(cfg).unwrap();
        let mut sorted = grid.perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn pilot_symbols_deterministic_unit_modulus() {
        let grid = build_grid(GridConfig::config1()).unwrap();
        let p1 = grid.pilot_symbols();
        let p2 = grid.pilot_symbols();
        assert_eq!(p1, p2);
        assert!(p1.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = GridConfig::config1();
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"n_subcarriers\":64"));
        assert!(s.contains("\"guard_per_side\":4"));
        let back: GridConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
    }
}
