//! Tanh-squashed diagonal Gaussian policy head.
//!
//! The actor emits `[mean, raw_log_std]` per action dimension. The raw value
//! is squashed smoothly into `[LOG_STD_MIN, LOG_STD_MAX]` so the bound never
//! kills gradients. A normalized action is `tanh(u)` with
//! `u = mean + std·ε`; the emitted action is its affine image in
//! `[low, high]`, and its log-density is
//!
//! ```text
//! log N(u; mean, std) − log(1 − tanh²u) − log((high − low)/2)
//! ```

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use super::nn::Mlp;
use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -10.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Affine map between normalized `[-1, 1]` actions and insulin units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionScale {
    pub low: f64,
    pub high: f64,
}

impl ActionScale {
    pub fn to_units(&self, a: f64) -> f64 {
        self.low + (a + 1.0) * 0.5 * (self.high - self.low)
    }

    pub fn to_normalized(&self, units: f64) -> f64 {
        2.0 * (units - self.low) / (self.high - self.low) - 1.0
    }

    pub fn log_half_width(&self) -> f64 {
        (0.5 * (self.high - self.low)).ln()
    }
}

/// `log_std` from the raw network output and its derivative.
pub fn squash_log_std(raw: f64) -> (f64, f64) {
    let t = raw.tanh();
    let half = 0.5 * (LOG_STD_MAX - LOG_STD_MIN);
    (LOG_STD_MIN + half * (t + 1.0), half * (1.0 - t * t))
}

/// Raw output giving `log_std`; inverse of [`squash_log_std`].
pub fn unsquash_log_std(log_std: f64) -> f64 {
    let half = 0.5 * (LOG_STD_MAX - LOG_STD_MIN);
    ((log_std - LOG_STD_MIN) / half - 1.0).atanh()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 − tanh²u)`, stable for large |u|.
pub fn log1m_tanh2(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Log-density, in action units, of the action produced by pre-squash
/// value `u`.
pub fn squashed_log_prob(u: f64, mean: f64, log_std: f64, scale: &ActionScale) -> f64 {
    let z = (u - mean) / log_std.exp();
    -0.5 * z * z - log_std - HALF_LN_2PI - log1m_tanh2(u) - scale.log_half_width()
}

/// Reparameterized samples for a batch of observations.
#[derive(Debug, Clone)]
pub struct PolicySample {
    pub mean: Array2<f64>,
    pub log_std: Array2<f64>,
    /// d log_std / d raw output.
    pub dlog_std: Array2<f64>,
    pub eps: Array2<f64>,
    pub u: Array2<f64>,
    /// Normalized actions, tanh(u).
    pub action: Array2<f64>,
    /// Summed over action dimensions, in action units.
    pub log_prob: Array1<f64>,
}

/// Splits a raw actor output `[mean | raw_log_std]` and applies `eps`.
pub fn sample_from_output(out: &Array2<f64>, eps: &Array2<f64>, scale: &ActionScale) -> Result<PolicySample> {
    let act_dim = out.ncols() / 2;
    let n = out.nrows();
    if eps.dim() != (n, act_dim) {
        return Err(Error::ShapeMismatch(format!("noise {:?} for {} actions of dim {act_dim}", eps.dim(), n)));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss { what: "actor output", step: 0 });
    }
    let mut s = PolicySample {
        mean: Array2::zeros((n, act_dim)),
        log_std: Array2::zeros((n, act_dim)),
        dlog_std: Array2::zeros((n, act_dim)),
        eps: eps.clone(),
        u: Array2::zeros((n, act_dim)),
        action: Array2::zeros((n, act_dim)),
        log_prob: Array1::zeros(n),
    };
    for i in 0..n {
        for j in 0..act_dim {
            let mean = out[[i, j]];
            let (log_std, d) = squash_log_std(out[[i, act_dim + j]]);
            let u = mean + log_std.exp() * eps[[i, j]];
            s.mean[[i, j]] = mean;
            s.log_std[[i, j]] = log_std;
            s.dlog_std[[i, j]] = d;
            s.u[[i, j]] = u;
            s.action[[i, j]] = u.tanh();
            s.log_prob[i] += squashed_log_prob(u, mean, log_std, scale);
        }
    }
    Ok(s)
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.sample(StandardNormal))
}

/// One stochastic action for one observation: `(units, normalized, log_prob)`.
pub fn policy_sample<R: Rng + ?Sized>(actor: &Mlp, obs: &[f64], scale: &ActionScale, rng: &mut R) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("observation is not finite".into()));
    }
    let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let out = actor.forward(&x);
    let eps = standard_normal(rng, (1, out.ncols() / 2));
    let s = sample_from_output(&out, &eps, scale)?;
    let norm: Vec<f64> = s.action.row(0).to_vec();
    Ok((norm.iter().map(|&a| scale.to_units(a)).collect(), norm, s.log_prob[0]))
}

/// Squashed mean: `(units, normalized)`.
pub fn deterministic_action(actor: &Mlp, obs: &[f64], scale: &ActionScale) -> Result<(Vec<f64>, Vec<f64>)> {
    if obs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("observation is not finite".into()));
    }
    let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let out = actor.forward(&x);
    let act_dim = out.ncols() / 2;
    let norm: Vec<f64> = (0..act_dim).map(|j| out[[0, j]].tanh()).collect();
    if norm.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss { what: "actor output", step: 0 });
    }
    Ok((norm.iter().map(|&a| scale.to_units(a)).collect(), norm))
}
