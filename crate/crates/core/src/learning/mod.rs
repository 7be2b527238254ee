//! Models, data, gradients, and the estimate-update arithmetic shared by all
//! protocols.

mod dataset;
mod idx;
mod model;

pub use dataset::{partition_iid, synth_blobs, BlobSpec, Dataset};
pub use idx::{load_idx, write_idx};
pub use model::{evaluate_accuracy, Model, ModelParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LearningError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid learning config: {0}")]
    InvalidConfig(String),
    #[error("idx format error: {0}")]
    Idx(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LearningError>;

/// Hyper-parameters of the local update rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningConfig {
    /// Weight of the agent's own estimate in the aggregation.
    pub alpha: f64,
    pub lambda0: f64,
    /// Iterations over which the learning rate fades to half of `lambda0`.
    pub fade_iters: u64,
    pub clip: f64,
    pub batch_size: usize,
}

impl LearningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(LearningError::InvalidConfig(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.clip > 0.0) {
            return Err(LearningError::InvalidConfig(format!(
                "clip must be positive, got {}",
                self.clip
            )));
        }
        if !(self.lambda0 >= 0.0) || self.batch_size == 0 || self.fade_iters == 0 {
            return Err(LearningError::InvalidConfig(
                "lambda0 must be non-negative, batch_size and fade_iters positive".into(),
            ));
        }
        Ok(())
    }

    /// `lambda0 / (1 + t / fade_iters)`.
    pub fn learning_rate(&self, t: u64) -> f64 {
        self.lambda0 / (1.0 + t as f64 / self.fade_iters as f64)
    }
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            alpha: 0.25,
            lambda0: 0.05,
            fade_iters: 2000,
            clip: 4.0,
            batch_size: 1,
        }
    }
}

/// Rescales `g` so that its l2 norm is at most `clip`.
pub fn clip_gradient(g: &[f64], clip: f64) -> Vec<f64> {
    assert!(clip > 0.0, "clipping threshold must be positive");
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = (norm / clip).max(1.0);
    g.iter().map(|v| v / scale).collect()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(LearningError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `alpha x_i + (1 - alpha) x_k - lambda gbar + noise`.
pub fn aggregate_update(
    x_i: &ModelParams,
    x_k: &ModelParams,
    alpha: f64,
    lambda: f64,
    gbar: &[f64],
    noise: &[f64],
) -> Result<ModelParams> {
    let d = x_i.len();
    check_len(d, x_k.len())?;
    check_len(d, gbar.len())?;
    check_len(d, noise.len())?;
    let values = x_i
        .iter()
        .zip(x_k.iter())
        .zip(gbar.iter().zip(noise))
        .map(|((a, b), (g, z))| alpha * a + (1.0 - alpha) * b - lambda * g + z)
        .collect();
    Ok(ModelParams::new(values))
}

/// `x_i - lambda gbar + noise`.
pub fn local_update(
    x_i: &ModelParams,
    lambda: f64,
    gbar: &[f64],
    noise: &[f64],
) -> Result<ModelParams> {
    let d = x_i.len();
    check_len(d, gbar.len())?;
    check_len(d, noise.len())?;
    let values = x_i
        .iter()
        .zip(gbar.iter().zip(noise))
        .map(|(a, (g, z))| a - lambda * g + z)
        .collect();
    Ok(ModelParams::new(values))
}
