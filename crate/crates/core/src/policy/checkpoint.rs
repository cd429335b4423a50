//! Self-describing checkpoint files.
//!
//! Layout: the 8-byte magic `ASVLABCK`, a little-endian `u32` header length,
//! a JSON header, then every parameter as a little-endian `f32` in the
//! network's flat order. The header records layer sizes, the iteration, the
//! resolved configuration text and its SHA-256.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mlp::MlpShape;
use super::ppo::ActorCritic;
use crate::env::{ACT_DIM, OBS_DIM};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ASVLABCK";
const FORMAT: u32 = 1;

/// Hex SHA-256 of a configuration text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: ActorCritic<f32>,
    pub iteration: u64,
    pub variant: Option<String>,
    /// Resolved configuration the network was trained with.
    pub config: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: u32,
    obs_dim: usize,
    act_dim: usize,
    actor: Vec<usize>,
    critic: Vec<usize>,
    n_params: usize,
    iteration: u64,
    variant: Option<String>,
    config_hash: String,
    config: String,
}

impl Checkpoint {
    pub fn config_hash(&self) -> String {
        config_hash(&self.config)
    }

    /// Rejects a network built for other observation or action sizes.
    pub fn check_dims(&self, obs_dim: usize, act_dim: usize) -> Result<()> {
        let (i, o) = (self.net.actor.input(), self.net.actor.output());
        if i != obs_dim || o != act_dim {
            return Err(Error::Checkpoint(format!(
                "network maps {i} observations to {o} actions, environment has {obs_dim} and {act_dim}"
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            format: FORMAT,
            obs_dim: self.net.actor.input(),
            act_dim: self.net.actor.output(),
            actor: self.net.actor.sizes.clone(),
            critic: self.net.critic.sizes.clone(),
            n_params: self.net.n_params(),
            iteration: self.iteration,
            variant: self.variant.clone(),
            config_hash: self.config_hash(),
            config: self.config.clone(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(12 + json.len() + 4 * self.net.n_params());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for p in &self.net.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file (bad magic)".into()));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let json = bytes.get(12..12 + len).ok_or_else(|| bad("truncated header".into()))?;
        let h: Header = serde_json::from_slice(json).map_err(|e| bad(format!("malformed header: {e}")))?;
        if h.format != FORMAT {
            return Err(bad(format!("unsupported format version {}", h.format)));
        }
        if h.obs_dim != OBS_DIM || h.act_dim != ACT_DIM {
            return Err(bad(format!(
                "network maps {} observations to {} actions, environment has {OBS_DIM} and {ACT_DIM}",
                h.obs_dim, h.act_dim
            )));
        }
        let payload = &bytes[12 + len..];
        if payload.len() != 4 * h.n_params {
            return Err(bad(format!("payload holds {} bytes, header declares {} parameters", payload.len(), h.n_params)));
        }
        if config_hash(&h.config) != h.config_hash {
            return Err(bad(format!("config hash mismatch: header {}, content {}", h.config_hash, config_hash(&h.config))));
        }
        let params: Vec<f32> =
            payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter".into()));
        }
        let shape = |sizes: Vec<usize>| MlpShape::new(sizes).map_err(|e| bad(e.to_string()));
        let net = ActorCritic::from_parts(shape(h.actor)?, shape(h.critic)?, Some(params)).map_err(|e| bad(e.to_string()))?;
        Ok(Checkpoint { net, iteration: h.iteration, variant: h.variant, config: h.config })
    }
}

/// Writes through a temporary file so an interrupted save never leaves a
/// partial checkpoint behind.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, ckpt.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
