//! Trained-policy checkpoints: a versioned JSON document with nested arrays.
//!
//! ```text
//! { version, modality_id,
//!   schedule: {kind, num_steps, beta_start, beta_end},
//!   arch: {horizon, action_dim, cond_dim, hidden, freqs, activation},
//!   params: {layer_0: {w: [[..]], b: [..]}, ...},
//!   train_meta: {seed, steps, final_loss, initial_loss} }
//! ```
//!
//! Floats are written in shortest round-trip form, so a load/save cycle
//! reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{NoiseSchedule, ScheduleDescriptor};
use crate::trajectory::{Condition, TrajShape, Trajectory};

use super::denoiser::{DenoiserArch, DenoiserNet, DenseLayer};
use super::ScoreModel;

pub const CHECKPOINT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub steps: u64,
    /// Mean loss over the last 10% of steps; `None` for an untrained net.
    pub final_loss: Option<f64>,
    /// Mean loss over the first 10% of steps.
    pub initial_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    modality_id: String,
    schedule: NoiseSchedule,
    net: DenoiserNet,
    meta: TrainMeta,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    version: u64,
    modality_id: String,
    schedule: ScheduleDescriptor,
    arch: DenoiserArch,
    params: BTreeMap<String, LayerFile>,
    train_meta: TrainMeta,
}

impl Checkpoint {
    pub fn new(modality_id: String, schedule: NoiseSchedule, net: DenoiserNet, meta: TrainMeta) -> Self {
        Self {
            modality_id,
            schedule,
            net,
            meta,
        }
    }

    pub fn modality_id(&self) -> &str {
        &self.modality_id
    }

    pub fn net(&self) -> &DenoiserNet {
        &self.net
    }

    pub fn meta(&self) -> &TrainMeta {
        &self.meta
    }

    pub fn to_json(&self) -> Result<String> {
        let params = self
            .net
            .layers()
            .iter()
            .enumerate()
            .map(|(k, l)| {
                let w = l.weights.chunks_exact(l.in_dim).map(<[f64]>::to_vec).collect();
                (format!("layer_{k}"), LayerFile { w, b: l.bias.clone() })
            })
            .collect();
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            modality_id: self.modality_id.clone(),
            schedule: *self.schedule.descriptor(),
            arch: self.net.arch().clone(),
            params,
            train_meta: self.meta.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let version = value
            .get("version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Checkpoint("missing numeric version field".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let file: CheckpointFile =
            serde_json::from_value(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if file.modality_id.is_empty() {
            return Err(Error::Checkpoint("empty modality_id".into()));
        }
        let schedule = NoiseSchedule::from_descriptor(&file.schedule)?;

        let n_layers = file.arch.layer_dims().len();
        let mut params = file.params;
        let mut layers = Vec::with_capacity(n_layers);
        for (k, (in_dim, out_dim)) in file.arch.layer_dims().into_iter().enumerate() {
            let key = format!("layer_{k}");
            let lf = params
                .remove(&key)
                .ok_or_else(|| Error::Checkpoint(format!("missing {key}")))?;
            if lf.w.len() != out_dim || lf.w.iter().any(|row| row.len() != in_dim) {
                return Err(Error::Checkpoint(format!("{key} weights are not {out_dim}x{in_dim}")));
            }
            layers.push(DenseLayer {
                in_dim,
                out_dim,
                weights: lf.w.into_iter().flatten().collect(),
                bias: lf.b,
            });
        }
        if let Some(extra) = params.keys().next() {
            return Err(Error::Checkpoint(format!("unexpected parameter block {extra}")));
        }
        let net = DenoiserNet::from_layers(file.arch, layers)?;
        Ok(Self {
            modality_id: file.modality_id,
            schedule,
            net,
            meta: file.train_meta,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ckpt.to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    Checkpoint::from_json(&text)
}

impl ScoreModel for Checkpoint {
    fn predict_eps(&self, tau_t: &Trajectory, t: usize, cond: Option<&Condition>) -> Result<Vec<f64>> {
        self.schedule.check_timestep(t)?;
        let features = cond.map(Condition::features).unwrap_or(&[]);
        self.net.forward(tau_t.values(), t, features)
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn shape(&self) -> TrajShape {
        self.net.arch().shape()
    }

    fn label(&self) -> String {
        format!("checkpoint(modality={}, schedule={})", self.modality_id, self.schedule.id())
    }
}
