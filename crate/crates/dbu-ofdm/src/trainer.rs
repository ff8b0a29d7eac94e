//! Gradient-free training of the Householder parameters: a flat parameter
//! packing, central finite-difference gradients with common random numbers
//! per step, and an Adam optimizer loop.
//!
//! The loss is supplied as a closure `(params, step_seed) -> loss`; using the
//! same step seed for every probe of a step keeps the stochastic batch fixed
//! while coordinates are perturbed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::unitary::HouseholderParams;
use crate::{DbuError, Result};

/// Optimizer settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Number of Adam steps.
    pub steps: usize,
    /// Learning rate.
    pub lr: f64,
    /// Central finite-difference step.
    pub fd_step: f64,
    /// Base seed; each step derives its own batch seed from it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 500,
            lr: 0.01,
            fd_step: 1e-4,
            seed: 0,
        }
    }
}

/// Number of real parameters: 2 K N_b per block plus one phase per data
/// subcarrier.
pub fn param_count(params: &HouseholderParams) -> usize {
    let k = params.k_factors;
    params.blocks.iter().map(|&nb| 2 * k * nb).sum::<usize>() + params.n_data()
}

/// Flatten to a real vector: per block, per factor, Re(v) then Im(v); the
/// phase vector d last.
pub fn pack(params: &HouseholderParams) -> Vec<f64> {
    let mut theta = Vec::with_capacity(param_count(params));
    for v in &params.v {
        theta.extend(v.iter().map(|c| c.re));
        theta.extend(v.iter().map(|c| c.im));
    }
    theta.extend_from_slice(&params.d);
    theta
}

/// Rebuild parameters from a flat vector using the block layout of a
/// template. Inverse of `pack` for matching layouts.
pub fn unpack(theta: &[f64], template: &HouseholderParams) -> Result<HouseholderParams> {
    let expected = param_count(template);
    if theta.len() != expected {
        return Err(DbuError::Dimension {
            expected,
            got: theta.len(),
        });
    }
    let k = template.k_factors;
    let mut v = Vec::with_capacity(template.v.len());
    let mut pos = 0usize;
    for &nb in &template.blocks {
        for _ in 0..k {
            let re = &theta[pos..pos + nb];
            let im = &theta[pos + nb..pos + 2 * nb];
            v.push(
                re.iter()
                    .zip(im)
                    .map(|(&a, &b)| num_complex::Complex64::new(a, b))
                    .collect(),
            );
            pos += 2 * nb;
        }
    }
    let d = theta[pos..].to_vec();
    let params = HouseholderParams {
        blocks: template.blocks.clone(),
        k_factors: k,
        v,
        d,
    };
    params.validate()?;
    Ok(params)
}

/// Central finite-difference gradient, one coordinate pair per probe,
/// evaluated in parallel. The loss closure must be deterministic for a
/// fixed parameter vector.
pub fn fd_gradient<F>(loss: &F, params: &HouseholderParams, h: f64) -> Result<Vec<f64>>
where
    F: Fn(&HouseholderParams) -> Result<f64> + Sync,
{
    if h <= 0.0 {
        return Err(DbuError::Config("finite-difference step must be > 0".into()));
    }
    let theta = pack(params);
    (0..theta.len())
        .into_par_iter()
        .map(|j| {
            let mut tp = theta.clone();
            tp[j] += h;
            let lp = loss(&unpack(&tp, params)?)?;
            tp[j] = theta[j] - h;
            let lm = loss(&unpack(&tp, params)?)?;
            Ok((lp - lm) / (2.0 * h))
        })
        .collect()
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl AdamState {
    pub fn new(dim: usize, lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One bias-corrected Adam update in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(DbuError::Dimension {
                expected: self.m.len(),
                got: theta.len().max(grad.len()),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for j in 0..theta.len() {
            self.m[j] = self.beta1 * self.m[j] + (1.0 - self.beta1) * grad[j];
            self.v[j] = self.beta2 * self.v[j] + (1.0 - self.beta2) * grad[j] * grad[j];
            let mhat = self.m[j] / bc1;
            let vhat = self.v[j] / bc2;
            theta[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Training outcome: final parameters and per-step batch losses.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: HouseholderParams,
    pub history: Vec<f64>,
}

/// Derive a decorrelated batch seed for a step.
pub fn step_seed(base: u64, step: usize) -> u64 {
    base ^ (step as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Adam over finite-difference gradients. A non-finite loss aborts the run
/// and returns the parameters from the last finite step.
pub fn train<F>(init: HouseholderParams, cfg: &TrainConfig, loss: F) -> Result<TrainResult>
where
    F: Fn(&HouseholderParams, u64) -> Result<f64> + Sync,
{
    init.validate()?;
    if cfg.lr <= 0.0 {
        return Err(DbuError::Config("learning rate must be > 0".into()));
    }
    let mut theta = pack(&init);
    let mut params = init.clone();
    let mut adam = AdamState::new(theta.len(), cfg.lr);
    let mut history = Vec::with_capacity(cfg.steps);
    let mut last_good = params.clone();
    for step in 0..cfg.steps {
        let seed = step_seed(cfg.seed, step);
        let batch_loss = loss(&params, seed)?;
        if !batch_loss.is_finite() {
            log::warn!("non-finite loss at step {step}; keeping last good parameters");
            return Ok(TrainResult {
                params: last_good,
                history,
            });
        }
        last_good = params.clone();
        history.push(batch_loss);
        log::info!("step {step}: loss {batch_loss:.6}");
        let grad = fd_gradient(&|p| loss(p, seed), &params, cfg.fd_step)?;
        adam.step(&mut theta, &grad)?;
        params = unpack(&theta, &init)?;
    }
    Ok(TrainResult { params, history })
}

/// Same optimization loop as [`train`], but driven by a loss evaluator that
/// also returns the full gradient (e.g. the analytic adjoint), avoiding the
/// per-coordinate finite-difference cost.
pub fn train_with_grad<F>(init: HouseholderParams, cfg: &TrainConfig, eval: F) -> Result<TrainResult>
where
    F: Fn(&HouseholderParams, u64) -> Result<(f64, Vec<f64>)>,
{
    init.validate()?;
    if cfg.lr <= 0.0 {
        return Err(DbuError::Config("learning rate must be > 0".into()));
    }
    let mut theta = pack(&init);
    let mut params = init.clone();
    let mut adam = AdamState::new(theta.len(), cfg.lr);
    let mut history = Vec::with_capacity(cfg.steps);
    let mut last_good = params.clone();
    for step in 0..cfg.steps {
        let seed = step_seed(cfg.seed, step);
        let (batch_loss, grad) = eval(&params, seed)?;
        if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            log::warn!("non-finite loss/gradient at step {step}; keeping last good parameters");
            return Ok(TrainResult {
                params: last_good,
                history,
            });
        }
        last_good = params.clone();
        history.push(batch_loss);
        log::info!("step {step}: loss {batch_loss:.6}");
        adam.step(&mut theta, &grad)?;
        params = unpack(&theta, &init)?;
    }
    Ok(TrainResult { params, history })
}
