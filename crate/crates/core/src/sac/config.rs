use serde::{Deserialize, Serialize};

use super::policy::{LOG_STD_MAX, LOG_STD_MIN};
use crate::error::{ensure, Result};

/// Soft actor-critic hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    /// Fixed entropy weight.
    pub alpha: f64,
    pub tau_soft: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub hidden_sizes: Vec<usize>,
    pub replay_capacity: usize,
    /// Bounds of the emitted action in insulin units.
    pub action_low: f64,
    pub action_high: f64,
    /// Starting squashed-mean action in units; the actor's mean bias is set
    /// so an untrained policy acts here instead of mid-range.
    pub initial_action: Option<f64>,
    /// Starting log standard deviation of the pre-squash Gaussian.
    pub initial_log_std: Option<f64>,
    pub seed: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            alpha: 0.2,
            tau_soft: 0.005,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            batch_size: 256,
            hidden_sizes: vec![128, 128],
            replay_capacity: 200_000,
            action_low: 0.0,
            action_high: 1.0,
            initial_action: None,
            initial_log_std: None,
            seed: 0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        ensure((0.0..1.0).contains(&self.gamma), || format!("gamma must be in [0, 1), got {}", self.gamma))?;
        ensure(self.alpha >= 0.0 && self.alpha.is_finite(), || format!("alpha must be >= 0, got {}", self.alpha))?;
        ensure(self.tau_soft > 0.0 && self.tau_soft <= 1.0, || format!("tau_soft must be in (0, 1], got {}", self.tau_soft))?;
        ensure(self.lr_actor > 0.0 && self.lr_critic > 0.0, || "learning rates must be positive".into())?;
        ensure(self.batch_size >= 1, || "batch_size must be >= 1".into())?;
        ensure(self.replay_capacity >= 1, || "replay_capacity must be >= 1".into())?;
        ensure(self.hidden_sizes.iter().all(|&h| h > 0), || "hidden sizes must be positive".into())?;
        ensure(self.action_low < self.action_high, || {
            format!("action_low ({}) must be below action_high ({})", self.action_low, self.action_high)
        })?;
        if let Some(a) = self.initial_action {
            ensure(a > self.action_low && a < self.action_high, || {
                format!("initial_action {a} must lie strictly inside the action bounds")
            })?;
        }
        if let Some(l) = self.initial_log_std {
            ensure(l > LOG_STD_MIN && l < LOG_STD_MAX, || format!("initial_log_std must be in ({LOG_STD_MIN}, {LOG_STD_MAX})"))?;
        }
        Ok(())
    }
}
