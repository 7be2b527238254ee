//! Gaussian mechanism, calibration, step decay and the reduced-noise
//! calculus.
//!
//! All noise parameters here are *multipliers*: the per-coordinate standard
//! deviation actually added to an estimate is `sigma * C` where `C` is the
//! gradient clipping threshold (see [`NoiseDraw`]).
//!
//! Logarithms are natural.

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrivacyError {
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("delta must be in (0, 1), got {0}")]
    BadDelta(f64),
    #[error("sigma0 must be positive, got {0}")]
    BadSigma(f64),
    #[error("gamma must be in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("decay period must be at least 1")]
    BadPeriod,
}

/// Per-agent `(epsilon, delta)` guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    epsilon: f64,
    delta: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self, PrivacyError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(PrivacyError::BadEpsilon(epsilon));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(PrivacyError::BadDelta(delta));
        }
        Ok(PrivacyBudget { epsilon, delta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// `8 * sqrt(t * ln(1/delta) * ln(1.25/delta))`, shared by calibration and
/// its inverse.
fn composition_numerator(t: f64, delta: f64) -> f64 {
    8.0 * (t * (1.0 / delta).ln() * (1.25 / delta).ln()).sqrt()
}

/// Smallest initial noise multiplier for which `iterations` composed
/// Gaussian releases on a shard of `dataset_size` records stay within
/// `budget`:
///
/// `sigma0 = 8 * sqrt(T ln(1/δ) ln(1.25/δ)) / (ε |D|)`
pub fn calibrate_sigma0(budget: PrivacyBudget, iterations: u64, dataset_size: usize) -> f64 {
    assert!(iterations >= 1, "calibration needs at least one iteration");
    assert!(dataset_size >= 1, "calibration needs a non-empty shard");
    composition_numerator(iterations as f64, budget.delta)
        / (budget.epsilon * dataset_size as f64)
}

/// Privacy spent after `t` iterations at noise multiplier `sigma0`; the
/// inverse of [`calibrate_sigma0`] in `epsilon`.
pub fn accumulated_epsilon(sigma0: f64, t: u64, delta: f64, dataset_size: usize) -> f64 {
    assert!(sigma0 > 0.0, "sigma0 must be positive");
    if t == 0 {
        return 0.0;
    }
    composition_numerator(t as f64, delta) / (sigma0 * dataset_size as f64)
}

/// Step-decay schedule `sigma_t = sigma0 * gamma^floor(t / period)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSchedule {
    sigma0: f64,
    gamma: f64,
    period: u64,
}

impl NoiseSchedule {
    pub fn new(sigma0: f64, gamma: f64, period: u64) -> Result<Self, PrivacyError> {
        if !(sigma0 > 0.0 && sigma0.is_finite()) {
            return Err(PrivacyError::BadSigma(sigma0));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(PrivacyError::BadGamma(gamma));
        }
        if period == 0 {
            return Err(PrivacyError::BadPeriod);
        }
        Ok(NoiseSchedule { sigma0, gamma, period })
    }

    /// A schedule that never decays.
    pub fn constant(sigma0: f64) -> Result<Self, PrivacyError> {
        Self::new(sigma0, 1.0, 1)
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn decayed(&self, t: u64) -> f64 {
        decayed_sigma(self, t)
    }
}

pub fn decayed_sigma(schedule: &NoiseSchedule, t: u64) -> f64 {
    let steps = t / schedule.period;
    schedule.sigma0 * schedule.gamma.powi(steps.min(i32::MAX as u64) as i32)
}

/// Outcome of the reduced-noise computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReducedSigma {
    Reduced(f64),
    /// The helper's scaled noise alone already exceeds the sender's; the
    /// caller must fall back to full-scale noise.
    FullScaleFallback,
}

impl ReducedSigma {
    /// The multiplier to draw with, given the sender's full-scale value.
    pub fn or_full(self, full: f64) -> f64 {
        match self {
            ReducedSigma::Reduced(s) => s,
            ReducedSigma::FullScaleFallback => full,
        }
    }

    pub fn is_fallback(&self) -> bool {
        matches!(self, ReducedSigma::FullScaleFallback)
    }
}

/// `sqrt(sigma_i^2 - (1 - alpha)^2 sigma_k^2)`: the noise the sender still
/// has to add once a helper estimate carrying `(1 - alpha)` of the helper's
/// own noise is mixed in.
pub fn reduced_sigma(sigma_i: f64, sigma_k: f64, alpha: f64) -> ReducedSigma {
    if sigma_i == sigma_k {
        // Closed form; also avoids cancellation for alpha near 0.
        return if alpha > 0.0 {
            ReducedSigma::Reduced(sigma_i * reduction_factor(alpha))
        } else {
            ReducedSigma::FullScaleFallback
        };
    }
    let masked = (1.0 - alpha) * sigma_k;
    let radicand = sigma_i * sigma_i - masked * masked;
    if radicand > 0.0 {
        ReducedSigma::Reduced(radicand.sqrt())
    } else {
        ReducedSigma::FullScaleFallback
    }
}

/// `sqrt(2 alpha - alpha^2)`, the reduced-to-full ratio for equal budgets.
pub fn reduction_factor(alpha: f64) -> f64 {
    (alpha * (2.0 - alpha)).sqrt()
}

/// `dim` i.i.d. zero-mean Gaussian draws with standard deviation `stddev`.
pub fn sample_noise<R: Rng + ?Sized>(dim: usize, stddev: f64, rng: &mut R) -> Vec<f64> {
    if stddev == 0.0 {
        return vec![0.0; dim];
    }
    (0..dim)
        .map(|_| stddev * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Noise to add to one outgoing or local estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDraw {
    /// Per-coordinate standard deviation, `sigma * C`.
    pub stddev: f64,
    pub dim: usize,
}

impl NoiseDraw {
    pub fn new(sigma: f64, clip: f64, dim: usize) -> Self {
        NoiseDraw { stddev: sigma * clip, dim }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        sample_noise(self.dim, self.stddev, rng)
    }
}

/// Running privacy expenditure of one agent.
///
/// Every charged iteration costs a full-scale release, whether or not the
/// agent emitted reduced-noise estimates in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Accountant {
    sigma0: f64,
    delta: f64,
    dataset_size: usize,
    iterations: u64,
}

impl Accountant {
    pub fn new(sigma0: f64, delta: f64, dataset_size: usize) -> Self {
        Accountant {
            sigma0,
            delta,
            dataset_size,
            iterations: 0,
        }
    }

    pub fn charge(&mut self) {
        self.iterations += 1;
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn spent(&self) -> f64 {
        accumulated_epsilon(self.sigma0, self.iterations, self.delta, self.dataset_size)
    }
}
