//! Twin-critic soft actor-critic with a fixed entropy weight.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;

use super::config::SacConfig;
use super::nn::{soft_update, Adam, Mlp};
use super::policy::{deterministic_action, policy_sample, sample_from_output, standard_normal, unsquash_log_std, ActionScale};
use super::replay::Batch;
use crate::error::{Error, Result};
use crate::rng::{stream, streams::INIT};

/// Actor, critics and critic targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub step: u64,
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !self.q1.same_shape(&self.q1_target) || !self.q2.same_shape(&self.q2_target) || !self.q1.same_shape(&self.q2) {
            return Err(Error::ShapeMismatch("critic and target shapes differ".into()));
        }
        let nets = [&self.actor, &self.q1, &self.q2, &self.q1_target, &self.q2_target];
        if nets.iter().any(|n| !n.all_finite()) {
            return Err(Error::NonFiniteLoss { what: "network weights", step: self.step });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub mean_log_prob: f64,
}

#[derive(Debug, Clone)]
pub struct Sac {
    pub config: SacConfig,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub params: PolicyParams,
    opt_actor: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
}

/// Objectives use the density of the normalized action; the affine map to
/// units only shifts log π by a constant.
const NORMALIZED: ActionScale = ActionScale { low: -1.0, high: 1.0 };

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

/// Mean-squared error of `q(sa)` against `y` and its parameter gradient.
pub fn critic_loss_grad(q: &Mlp, sa: &Array2<f64>, y: &Array1<f64>) -> (f64, Mlp) {
    let n = y.len() as f64;
    let (out, cache) = q.forward_cached(sa);
    let err = &out.column(0) - y;
    let loss = err.mapv(|e| e * e).sum() / n;
    let grad_out = (err * (2.0 / n)).insert_axis(Axis(1));
    let mut grads = q.zeros_like();
    q.backward(&cache, &grad_out, &mut grads);
    (loss, grads)
}

/// `mean(α·log π(a|s) − min(Q1, Q2)(s, a))` with `a` reparameterized by
/// `eps`, and its gradient with respect to the actor.
pub fn actor_loss_grad(
    actor: &Mlp,
    q1: &Mlp,
    q2: &Mlp,
    s: &Array2<f64>,
    eps: &Array2<f64>,
    alpha: f64,
    scale: &ActionScale,
) -> Result<(f64, f64, Mlp)> {
    let n = s.nrows();
    let nf = n as f64;
    let (out, actor_cache) = actor.forward_cached(s);
    let ps = sample_from_output(&out, eps, scale)?;
    let act_dim = ps.action.ncols();
    let sa = concatenate![Axis(1), *s, ps.action];
    let (o1, c1) = q1.forward_cached(&sa);
    let (o2, c2) = q2.forward_cached(&sa);

    // route the min through whichever critic is lower per sample
    let mut g1 = Array2::zeros((n, 1));
    let mut g2 = Array2::zeros((n, 1));
    let mut q_min_sum = 0.0;
    for i in 0..n {
        if o1[[i, 0]] <= o2[[i, 0]] {
            g1[[i, 0]] = 1.0;
            q_min_sum += o1[[i, 0]];
        } else {
            g2[[i, 0]] = 1.0;
            q_min_sum += o2[[i, 0]];
        }
    }
    let mut scratch = q1.zeros_like();
    let dq1 = q1.backward(&c1, &g1, &mut scratch);
    let mut scratch = q2.zeros_like();
    let dq2 = q2.backward(&c2, &g2, &mut scratch);
    let dq_da = (dq1 + dq2).slice(s![.., s.ncols()..]).to_owned();

    let loss = (alpha * ps.log_prob.sum() - q_min_sum) / nf;
    let mut grad_out = Array2::zeros((n, 2 * act_dim));
    for i in 0..n {
        for j in 0..act_dim {
            let (t, std, e) = (ps.action[[i, j]], ps.log_std[[i, j]].exp(), ps.eps[[i, j]]);
            let du = 1.0 - t * t;
            // at fixed ε only the tanh Jacobian of log π moves with u
            let dlogp_du = 2.0 * t;
            let dloss_du = alpha * dlogp_du - dq_da[[i, j]] * du;
            let dloss_dmean = dloss_du;
            let dloss_dlogstd = dloss_du * std * e - alpha;
            grad_out[[i, j]] = dloss_dmean / nf;
            grad_out[[i, act_dim + j]] = dloss_dlogstd * ps.dlog_std[[i, j]] / nf;
        }
    }
    let mut grads = actor.zeros_like();
    actor.backward(&actor_cache, &grad_out, &mut grads);
    Ok((loss, ps.log_prob.mean().unwrap_or(0.0), grads))
}

impl Sac {
    pub fn new(obs_dim: usize, act_dim: usize, config: SacConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.seed, INIT);
        let mut actor = Mlp::new(&sizes(obs_dim, &config.hidden_sizes, 2 * act_dim), &mut rng);
        let head = actor.layers.last_mut().expect("actor has an output layer");
        if let Some(units) = config.initial_action {
            let a = ActionScale { low: config.action_low, high: config.action_high }.to_normalized(units);
            head.b.slice_mut(s![..act_dim]).fill(a.atanh());
        }
        if let Some(log_std) = config.initial_log_std {
            head.b.slice_mut(s![act_dim..]).fill(unsquash_log_std(log_std));
        }
        let critic_sizes = sizes(obs_dim + act_dim, &config.hidden_sizes, 1);
        let q1 = Mlp::new(&critic_sizes, &mut rng);
        let q2 = Mlp::new(&critic_sizes, &mut rng);
        let params = PolicyParams { q1_target: q1.clone(), q2_target: q2.clone(), actor, q1, q2, step: 0 };
        Ok(Self::from_params(obs_dim, act_dim, config, params))
    }

    pub fn from_params(obs_dim: usize, act_dim: usize, config: SacConfig, params: PolicyParams) -> Self {
        Self {
            opt_actor: Adam::new(&params.actor, config.lr_actor),
            opt_q1: Adam::new(&params.q1, config.lr_critic),
            opt_q2: Adam::new(&params.q2, config.lr_critic),
            config,
            obs_dim,
            act_dim,
            params,
        }
    }

    pub fn scale(&self) -> ActionScale {
        ActionScale { low: self.config.action_low, high: self.config.action_high }
    }

    pub fn step(&self) -> u64 {
        self.params.step
    }

    /// Stochastic action: `(units, normalized, log_prob)`.
    pub fn act<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        policy_sample(&self.params.actor, obs, &self.scale(), rng)
    }

    pub fn act_deterministic(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        deterministic_action(&self.params.actor, obs, &self.scale())
    }

    /// Soft Bellman targets `r + γ(1 − done)(min Q'(s', a') − α log π(a'|s'))`.
    pub fn critic_targets(&self, batch: &Batch, eps_next: &Array2<f64>) -> Result<Array1<f64>> {
        let out = self.params.actor.forward(&batch.s_next);
        let ps = sample_from_output(&out, eps_next, &NORMALIZED)?;
        let sa = concatenate![Axis(1), batch.s_next, ps.action];
        let t1 = self.params.q1_target.forward(&sa);
        let t2 = self.params.q2_target.forward(&sa);
        let (gamma, alpha) = (self.config.gamma, self.config.alpha);
        Ok(Array1::from_shape_fn(batch.len(), |i| {
            let soft_v = t1[[i, 0]].min(t2[[i, 0]]) - alpha * ps.log_prob[i];
            batch.r[i] + gamma * (1.0 - batch.done[i]) * soft_v
        }))
    }

    pub fn critic_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let eps = standard_normal(rng, (batch.len(), self.act_dim));
        let y = self.critic_targets(batch, &eps)?;
        let sa = concatenate![Axis(1), batch.s, batch.a];
        let (l1, g1) = critic_loss_grad(&self.params.q1, &sa, &y);
        let (l2, g2) = critic_loss_grad(&self.params.q2, &sa, &y);
        let loss = l1 + l2;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { what: "critic", step: self.params.step });
        }
        self.opt_q1.step(&mut self.params.q1, &g1);
        self.opt_q2.step(&mut self.params.q2, &g2);
        Ok(loss)
    }

    /// Returns `(loss, mean log π)`.
    pub fn actor_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<(f64, f64)> {
        if batch.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let eps = standard_normal(rng, (batch.len(), self.act_dim));
        let p = &self.params;
        let (loss, mean_lp, grads) = actor_loss_grad(&p.actor, &p.q1, &p.q2, &batch.s, &eps, self.config.alpha, &NORMALIZED)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { what: "actor", step: self.params.step });
        }
        self.opt_actor.step(&mut self.params.actor, &grads);
        Ok((loss, mean_lp))
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let tau = self.config.tau_soft;
        soft_update(&mut self.params.q1_target, &self.params.q1, tau)?;
        soft_update(&mut self.params.q2_target, &self.params.q2, tau)
    }

    /// Critic step, actor step, target blend.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateStats> {
        let critic_loss = self.critic_update(batch, rng)?;
        let (actor_loss, mean_log_prob) = self.actor_update(batch, rng)?;
        self.soft_update_targets()?;
        self.params.step += 1;
        if !self.params.actor.all_finite() || !self.params.q1.all_finite() || !self.params.q2.all_finite() {
            return Err(Error::NonFiniteLoss { what: "network weights", step: self.params.step });
        }
        Ok(UpdateStats { critic_loss, actor_loss, mean_log_prob })
    }
}
