//! Versioned binary checkpoint container.
//!
//! ```text
//! magic       8 bytes   "BBSACCKP"
//! version     u32 LE
//! header_len  u64 LE
//! header      JSON (agent, dims, step, SacConfig, network shapes, meta)
//! tensors     f64 LE, networks in header order, each layer as w then b
//! checksum    SHA-256 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::agent::PolicyParams;
use super::config::SacConfig;
use super::nn::{Mlp, MlpShape};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 8] = *b"BBSACCKP";
pub const VERSION: u32 = 1;

const NETWORK_NAMES: [&str; 5] = ["actor", "q1", "q2", "q1_target", "q2_target"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    pub shape: MlpShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    /// Free-form role, e.g. `basal` or `bolus`.
    pub agent: String,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub step: u64,
    pub config: SacConfig,
    pub networks: Vec<NetworkEntry>,
    /// Caller-defined data such as the observation layout.
    #[serde(default)]
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: PolicyParams,
}

fn nets(p: &PolicyParams) -> [&Mlp; 5] {
    [&p.actor, &p.q1, &p.q2, &p.q1_target, &p.q2_target]
}

impl Checkpoint {
    pub fn new(agent: &str, obs_dim: usize, act_dim: usize, config: SacConfig, params: PolicyParams, meta: serde_json::Value) -> Self {
        let networks =
            NETWORK_NAMES.iter().zip(nets(&params)).map(|(name, n)| NetworkEntry { name: name.to_string(), shape: n.shape() }).collect();
        let header = CheckpointHeader { agent: agent.to_string(), obs_dim, act_dim, step: params.step, config, networks, meta };
        Self { header, params }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for net in nets(&self.params) {
            for t in net.tensors() {
                for v in t {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Checkpoint(m.to_string());
        if bytes.len() < MAGIC.len() + 4 + 8 + 32 {
            return Err(bad("file too short"));
        }
        if bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch"));
        }
        let version = u32::from_le_bytes(body[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let header_len = u64::from_le_bytes(body[12..20].try_into().expect("8 bytes")) as usize;
        let header_end = 20usize.checked_add(header_len).filter(|&e| e <= body.len()).ok_or_else(|| bad("truncated header"))?;
        let header: CheckpointHeader = serde_json::from_slice(&body[20..header_end]).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if header.networks.len() != NETWORK_NAMES.len() {
            return Err(bad("wrong number of networks"));
        }

        let mut cursor = &body[header_end..];
        let mut read_net = |shape: &MlpShape| -> Result<Mlp> {
            if shape.0.len() < 2 {
                return Err(bad("network shape needs at least two widths"));
            }
            let mut net = Mlp::zeros(&shape.0);
            for t in net.tensors_mut() {
                let need = t.len() * 8;
                if cursor.len() < need {
                    return Err(bad("truncated tensor data"));
                }
                for (v, chunk) in t.iter_mut().zip(cursor[..need].chunks_exact(8)) {
                    *v = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
                }
                cursor = &cursor[need..];
            }
            Ok(net)
        };
        let mut loaded = Vec::with_capacity(5);
        for (entry, name) in header.networks.iter().zip(NETWORK_NAMES) {
            if entry.name != name {
                return Err(Error::Checkpoint(format!("expected network `{name}`, found `{}`", entry.name)));
            }
            loaded.push(read_net(&entry.shape)?);
        }
        if !cursor.is_empty() {
            return Err(bad("trailing bytes after tensors"));
        }
        let mut it = loaded.into_iter();
        let mut next = || it.next().expect("five networks");
        let params = PolicyParams { actor: next(), q1: next(), q2: next(), q1_target: next(), q2_target: next(), step: header.step };
        params.validate()?;
        Ok(Self { header, params })
    }

    /// Writes through a temporary file so an interrupted save never leaves a
    /// half-written checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    /// Human-readable summary of shapes and hyperparameters.
    pub fn describe(&self) -> String {
        let h = &self.header;
        let c = &h.config;
        let mut s =
            format!("agent: {}\nformat version: {VERSION}\nobs_dim: {}\nact_dim: {}\nstep: {}\n", h.agent, h.obs_dim, h.act_dim, h.step);
        s.push_str("networks:\n");
        for (e, net) in h.networks.iter().zip(nets(&self.params)) {
            s.push_str(&format!("  {:<10} {:?} ({} params)\n", e.name, e.shape.0, net.n_params()));
        }
        s.push_str(&format!(
            "config:\n  gamma: {}\n  alpha: {}\n  tau_soft: {}\n  lr_actor: {}\n  lr_critic: {}\n  batch_size: {}\n  hidden_sizes: {:?}\n  replay_capacity: {}\n  action range: [{}, {}]\n  seed: {}\n",
            c.gamma, c.alpha, c.tau_soft, c.lr_actor, c.lr_critic, c.batch_size, c.hidden_sizes, c.replay_capacity, c.action_low, c.action_high, c.seed
        ));
        if let Some(a) = c.initial_action {
            s.push_str(&format!("  initial_action: {a}\n"));
        }
        if let Some(l) = c.initial_log_std {
            s.push_str(&format!("  initial_log_std: {l}\n"));
        }
        if !h.meta.is_null() {
            s.push_str(&format!("meta: {}\n", h.meta));
        }
        s
    }
}
