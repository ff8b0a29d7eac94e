//! Application configuration: the JSON schema consumed by the CLI, wrapping
//! the resource grid plus training and evaluation settings, and the FNV-1a
//! hash stamped into CSV headers.

use serde::{Deserialize, Serialize};

use crate::grid::GridConfig;
use crate::modem::Modulation;
use crate::Result;

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Papr,
    Comm,
    Sense,
}

impl std::str::FromStr for Task {
    type Err = crate::DbuError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "papr" => Ok(Task::Papr),
            "comm" => Ok(Task::Comm),
            "sense" => Ok(Task::Sense),
            other => Err(crate::DbuError::Config(format!("unknown task '{other}'"))),
        }
    }
}

/// Training settings; every field has a default so sparse JSON works.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    pub task: Task,
    /// Reflections per block.
    pub k_factors: usize,
    /// Number of data blocks B.
    pub blocks: usize,
    pub steps: usize,
    pub lr: f64,
    pub fd_step: f64,
    /// Frames per stochastic batch.
    pub batch_frames: usize,
    /// PAPR exceedance target gamma_tar in dB.
    pub gamma_tar_db: f64,
    /// Exceedance exponent p (1 or 2).
    pub hardness: u32,
    /// Operating SNR for the comm and sense tasks.
    pub snr_db: f64,
    /// Paths per sensing scene.
    pub n_paths: usize,
    pub modulation: Modulation,
    pub seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            task: Task::Papr,
            k_factors: 16,
            blocks: 1,
            steps: 500,
            lr: 0.015,
            fd_step: 1e-4,
            batch_frames: 2,
            gamma_tar_db: 5.0,
            hardness: 2,
            snr_db: 15.0,
            n_paths: 3,
            modulation: Modulation::Qam16,
            seed: 1,
        }
    }
}

/// Evaluation settings shared by the eval subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSpec {
    pub snr_db_list: Vec<f64>,
    /// PAPR sample count (OFDM symbols).
    pub papr_symbols: usize,
    /// Trial cap per BER/BLER point.
    pub max_blocks: u64,
    /// Early-stop threshold on block errors per point.
    pub min_block_errors: u64,
    pub sense_trials: u64,
    pub n_paths: usize,
    pub modulation: Modulation,
    /// LS pilot channel estimation instead of genie CSI.
    pub ls_pilots: bool,
    pub seed: u64,
}

impl Default for EvalSpec {
    fn default() -> Self {
        EvalSpec {
            snr_db_list: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            papr_symbols: 100_000,
            max_blocks: 20_000,
            min_block_errors: 200,
            sense_trials: 500,
            n_paths: 3,
            modulation: Modulation::Qpsk,
            ls_pilots: false,
            seed: 1,
        }
    }
}

/// Top-level config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AppConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub train: TrainSpec,
    #[serde(default)]
    pub eval: EvalSpec,
}

impl AppConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Stable hash of the serialized config, stamped into CSV headers.
    pub fn hash(&self) -> u64 {
        fnv1a(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
