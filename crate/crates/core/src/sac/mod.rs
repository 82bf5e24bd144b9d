//! Soft actor-critic for one continuous action, written against ndarray
//! with manual backpropagation.

mod agent;
mod checkpoint;
mod config;
pub mod nn;
pub mod policy;
mod replay;

pub use agent::{actor_loss_grad, critic_loss_grad, PolicyParams, Sac, UpdateStats};
pub use checkpoint::{Checkpoint, CheckpointHeader, NetworkEntry, MAGIC, VERSION};
pub use config::SacConfig;
pub use nn::{soft_update, Adam, Mlp, MlpShape};
pub use policy::{deterministic_action, policy_sample, squashed_log_prob, ActionScale};
pub use replay::{Batch, ReplayBuffer, Transition};
