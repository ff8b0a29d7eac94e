//! Trainable Householder-chain parameterization of the data-block unitary
//! U_data = D * U^(1) * ... * U^(K), its block-wise variant, and the global
//! matrix-free applier U = P * blkdiag(U_data, I, I) * P^T acting on a
//! physical-order subcarrier vector.
//!
//! Forward apply runs factor K first and factor 1 last, then the diagonal
//! phases; the adjoint conjugates the phases and runs factors 1..K. Both
//! directions share the same reflection kernel.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::complex_gaussian;
use crate::grid::ResourceGrid;
use crate::{DbuError, Result};

/// Reflection vectors below this norm degrade to identity instead of
/// dividing by ~0.
pub const ZERO_VEC_GUARD: f64 = 1e-12;

/// Largest dimension `materialize` will build densely.
pub const MATERIALIZE_CAP: usize = 1024;

/// Trainable state: K reflection vectors per block plus the diagonal phase
/// vector, with a contiguous block partition of the data subcarriers.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholderParams {
    /// Block sizes N_b, summing to N_data.
    pub blocks: Vec<usize>,
    /// Reflection factors per block (shared across blocks).
    pub k_factors: usize,
    /// Block-major vector storage: v[b * K + i] is factor i+1 of block b,
    /// length blocks[b].
    pub v: Vec<Vec<Complex64>>,
    /// Phases in radians, one per data subcarrier.
    pub d: Vec<f64>,
}

impl HouseholderParams {
    /// Identity transform: no reflections, zero phases.
    pub fn identity(n_data: usize, n_blocks: usize) -> Self {
        HouseholderParams {
            blocks: partition(n_data, n_blocks),
            k_factors: 0,
            v: Vec::new(),
            d: vec![0.0; n_data],
        }
    }

    /// Random initialization: i.i.d. standard complex Gaussian reflection
    /// entries, zero phases.
    pub fn random_init(n_data: usize, k_factors: usize, n_blocks: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let blocks = partition(n_data, n_blocks);
        let mut v = Vec::with_capacity(blocks.len() * k_factors);
        for &nb in &blocks {
            for _ in 0..k_factors {
                v.push((0..nb).map(|_| complex_gaussian(&mut rng)).collect());
            }
        }
        HouseholderParams {
            blocks,
            k_factors,
            v,
            d: vec![0.0; n_data],
        }
    }

    pub fn n_data(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.iter().any(|&b| b == 0) {
            return Err(DbuError::Config("empty block in partition".into()));
        }
        let n_data = self.n_data();
        if self.d.len() != n_data {
            return Err(DbuError::Dimension {
                expected: n_data,
                got: self.d.len(),
            });
        }
        if self.v.len() != self.blocks.len() * self.k_factors {
            return Err(DbuError::Dimension {
                expected: self.blocks.len() * self.k_factors,
                got: self.v.len(),
            });
        }
        for (b, &nb) in self.blocks.iter().enumerate() {
            for i in 0..self.k_factors {
                let len = self.v[b * self.k_factors + i].len();
                if len != nb {
                    return Err(DbuError::Dimension {
                        expected: nb,
                        got: len,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Split n into `n_blocks` contiguous groups, the first `n % n_blocks`
/// groups one element larger.
pub fn partition(n: usize, n_blocks: usize) -> Vec<usize> {
    let n_blocks = n_blocks.clamp(1, n.max(1));
    let base = n / n_blocks;
    let extra = n % n_blocks;
    (0..n_blocks)
        .map(|b| base + usize::from(b < extra))
        .collect()
}

/// Apply the reflection defined by v (u = v^H / ||v||) to x in place:
/// x' = x - 2 u (u^H x). Norm-preserving and involutive.
pub fn householder_apply(v: &[Complex64], x: &mut [Complex64]) {
    debug_assert_eq!(v.len(), x.len());
    let norm_sqr: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if norm_sqr < ZERO_VEC_GUARD * ZERO_VEC_GUARD {
        log::warn!("near-zero Householder vector; factor degraded to identity");
        return;
    }
    // u_k = conj(v_k)/||v||, so u^H x = sum_k v_k x_k / ||v||.
    let inner: Complex64 = v.iter().zip(x.iter()).map(|(vk, xk)| vk * xk).sum();
    let scale = 2.0 * inner / norm_sqr;
    for (xk, vk) in x.iter_mut().zip(v.iter()) {
        *xk -= scale * vk.conj();
    }
}

/// Matrix-free applier for U_data over the grouped data vector.
#[derive(Debug, Clone)]
pub struct UdataApplier {
    params: HouseholderParams,
}

/// Build the applier, validating the block partition.
pub fn build_udata_applier(params: HouseholderParams) -> Result<UdataApplier> {
    params.validate()?;
    Ok(UdataApplier { params })
}

impl UdataApplier {
    pub fn params(&self) -> &HouseholderParams {
        &self.params
    }

    pub fn n_data(&self) -> usize {
        self.params.n_data()
    }

    /// Forward apply U_data in place on a grouped data vector.
    pub fn forward(&self, x: &mut [Complex64]) -> Result<()> {
        self.apply(x, false)
    }

    /// Adjoint apply U_data^H in place.
    pub fn adjoint(&self, x: &mut [Complex64]) -> Result<()> {
        self.apply(x, true)
    }

    fn apply(&self, x: &mut [Complex64], adjoint: bool) -> Result<()> {
        let n_data = self.n_data();
        if x.len() != n_data {
            return Err(DbuError::Dimension {
                expected: n_data,
                got: x.len(),
            });
        }
        let k = self.params.k_factors;
        let mut offset = 0usize;
        for (b, &nb) in self.params.blocks.iter().enumerate() {
            let seg = &mut x[offset..offset + nb];
            let phases = &self.params.d[offset..offset + nb];
            if adjoint {
                for (xk, &ph) in seg.iter_mut().zip(phases) {
                    *xk *= Complex64::from_polar(1.0, -ph);
                }
                for i in 0..k {
                    householder_apply(&self.params.v[b * k + i], seg);
                }
            } else {
                for i in (0..k).rev() {
                    householder_apply(&self.params.v[b * k + i], seg);
                }
                for (xk, &ph) in seg.iter_mut().zip(phases) {
                    *xk *= Complex64::from_polar(1.0, ph);
                }
            }
            offset += nb;
        }
        Ok(())
    }
}

/// Build the dense N_data x N_data matrix, column j = forward(e_j).
/// Oracle and test support; refuses dimensions above `MATERIALIZE_CAP`.
pub fn materialize(applier: &UdataApplier) -> Result<Vec<Vec<Complex64>>> {
    let n = applier.n_data();
    if n > MATERIALIZE_CAP {
        return Err(DbuError::Config(format!(
            "materialize cap exceeded: {n} > {MATERIALIZE_CAP}"
        )));
    }
    let mut m = vec![vec![Complex64::ZERO; n]; n];
    for j in 0..n {
        let mut e = vec![Complex64::ZERO; n];
        e[j] = Complex64::new(1.0, 0.0);
        applier.forward(&mut e)?;
        for (row, val) in m.iter_mut().zip(e) {
            row[j] = val;
        }
    }
    Ok(m)
}

/// Global transform on physical-order length-N vectors: data entries are
/// gathered through the grid permutation, passed through U_data, and
/// scattered back; pilot and null entries are copied unchanged.
#[derive(Debug, Clone)]
pub struct UnitaryTransform {
    pub grid: ResourceGrid,
    pub udata: UdataApplier,
}

/// Bind a data-block applier to a resource grid.
pub fn assemble_global(udata: UdataApplier, grid: &ResourceGrid) -> Result<UnitaryTransform> {
    if udata.n_data() != grid.n_data() {
        return Err(DbuError::Dimension {
            expected: grid.n_data(),
            got: udata.n_data(),
        });
    }
    Ok(UnitaryTransform {
        grid: grid.clone(),
        udata,
    })
}

impl UnitaryTransform {
    /// Identity transform over a grid (conventional OFDM).
    pub fn identity(grid: &ResourceGrid) -> Self {
        let params = HouseholderParams::identity(grid.n_data(), 1);
        UnitaryTransform {
            grid: grid.clone(),
            udata: UdataApplier { params },
        }
    }

    fn apply_physical(&self, x: &mut [Complex64], adjoint: bool) -> Result<()> {
        let n = self.grid.n();
        if x.len() != n {
            return Err(DbuError::Dimension {
                expected: n,
                got: x.len(),
            });
        }
        let mut data: Vec<Complex64> =
            self.grid.data_idx.iter().map(|&i| x[i]).collect();
        if adjoint {
            self.udata.adjoint(&mut data)?;
        } else {
            self.udata.forward(&mut data)?;
        }
        for (&i, val) in self.grid.data_idx.iter().zip(data) {
            x[i] = val;
        }
        Ok(())
    }

    /// Apply U in place on a physical-order vector.
    pub fn forward(&self, x: &mut [Complex64]) -> Result<()> {
        self.apply_physical(x, false)
    }

    /// Apply U^H in place on a physical-order vector.
    pub fn adjoint(&self, x: &mut [Complex64]) -> Result<()> {
        self.apply_physical(x, true)
    }
}

// ---------------------------------------------------------------------------
// Model file I/O
// ---------------------------------------------------------------------------

/// On-disk model schema. Complex entries are [re, im] pairs.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub n_data: usize,
    pub k_factors: usize,
    pub blocks: Vec<usize>,
    pub v: Vec<Vec<[f64; 2]>>,
    pub d: Vec<f64>,
}

impl ModelFile {
    pub fn from_params(params: &HouseholderParams) -> Self {
        ModelFile {
            version: 1,
            n_data: params.n_data(),
            k_factors: params.k_factors,
            blocks: params.blocks.clone(),
            v: params
                .v
                .iter()
                .map(|vec| vec.iter().map(|c| [c.re, c.im]).collect())
                .collect(),
            d: params.d.clone(),
        }
    }

    pub fn into_params(self) -> Result<HouseholderParams> {
        let params = HouseholderParams {
            blocks: self.blocks,
            k_factors: self.k_factors,
            v: self
                .v
                .into_iter()
                .map(|vec| vec.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                .collect(),
            d: self.d,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Save a model as JSON. Floats use the shortest decimal representation
/// that round-trips the underlying f64 bits exactly, so save followed by
/// load reproduces the parameters bit-identically.
pub fn save_model(params: &HouseholderParams, path: &std::path::Path) -> Result<()> {
    let file = ModelFile::from_params(params);
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_model(path: &std::path::Path) -> Result<HouseholderParams> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    file.into_params()
}

// ---------------------------------------------------------------------------
