//! DBU-OFDM: a trainable block-unitary precoder embedded in a standard OFDM
//! chain, together with the simulation machinery needed to evaluate it:
//! PAPR statistics, uncoded BER/BLER over frequency-selective fading,
//! delay-Doppler sensing with SIC extraction, a finite-difference trainer,
//! and a bit-accurate fixed-point model of the Householder datapath.

pub mod adjoint;
pub mod channel;
pub mod config;
pub mod equalize;
pub mod fft;
pub mod fixedpoint;
pub mod grid;
pub mod modem;
pub mod montecarlo;
pub mod ofdm;
pub mod sensing;
pub mod trainer;
pub mod unitary;

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum DbuError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DbuError>;

/// Speed of light in m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
