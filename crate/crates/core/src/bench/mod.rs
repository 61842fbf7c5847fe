//! Synthetic two-modality reaching tasks and the weight-sweep harness.
//!
//! A task hides a goal `g` in `[-r, r]^2`. The expert moves from the origin to
//! `g` in `H` evenly spaced waypoints. Each modality observes `g` through its
//! own per-axis noise, so a policy conditioned on one modality is only as
//! precise as that modality's observation.

mod sweep;

pub use sweep::{
    run_sweep, summarize, write_sweep_csv, EpisodeRecord, Policy, SeedResult, Side, SweepResult,
    SweepSummary, SWEEP_CSV_HEADER,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{train_denoiser_with, Checkpoint, Demonstration, TrainConfig};
use crate::rng::{mix, Domain, RngStream};
use crate::schedule::NoiseSchedule;
use crate::trajectory::{Condition, TrajShape, Trajectory};

pub const FAMILY_NAMES: [&str; 3] = ["reach2d_complementary", "reach2d_noisyB", "reach2d_matched"];
pub const DEFAULT_TRAIN_EPISODES: usize = 10_000;

const TRAIN_TAG: u64 = 0x7472_6169_6e;
const EVAL_TAG: u64 = 0x6576_616c;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ObservationModel {
    /// `g + N(0, diag(std^2))`.
    Gaussian { std: [f64; 2] },
    /// Uniform on the goal box, independent of `g`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub id: String,
    pub observation: ObservationModel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskFamily {
    pub name: String,
    pub goal_range: f64,
    pub horizon: usize,
    pub jitter_std: f64,
    pub success_radius: f64,
    pub modalities: Vec<ModalitySpec>,
}

impl TaskFamily {
    fn reach2d(name: &str, a: ObservationModel, b: ObservationModel) -> Self {
        Self {
            name: name.into(),
            goal_range: 0.8,
            horizon: 8,
            jitter_std: 0.01,
            success_radius: 0.1,
            modalities: vec![
                ModalitySpec { id: "A".into(), observation: a },
                ModalitySpec { id: "B".into(), observation: b },
            ],
        }
    }

    /// A sees x precisely, B sees y precisely.
    pub fn reach2d_complementary() -> Self {
        Self::reach2d(
            "reach2d_complementary",
            ObservationModel::Gaussian { std: [0.02, 0.5] },
            ObservationModel::Gaussian { std: [0.12, 0.05] },
        )
    }

    /// B carries no information about the goal.
    pub fn reach2d_noisy_b() -> Self {
        Self::reach2d(
            "reach2d_noisyB",
            ObservationModel::Gaussian { std: [0.03, 0.03] },
            ObservationModel::Uniform,
        )
    }

    /// Both modalities share one observation model.
    pub fn reach2d_matched() -> Self {
        let obs = ObservationModel::Gaussian { std: [0.05, 0.05] };
        Self::reach2d("reach2d_matched", obs.clone(), obs)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "reach2d_complementary" => Ok(Self::reach2d_complementary()),
            "reach2d_noisyB" => Ok(Self::reach2d_noisy_b()),
            "reach2d_matched" => Ok(Self::reach2d_matched()),
            other => Err(Error::InvalidParameter(format!(
                "unknown task family {other:?}; expected one of {}",
                FAMILY_NAMES.join(", ")
            ))),
        }
    }

    pub fn shape(&self) -> TrajShape {
        TrajShape::new(self.horizon, 2)
    }

    pub fn modality_index(&self, id: &str) -> Result<usize> {
        self.modalities.iter().position(|m| m.id == id).ok_or_else(|| {
            Error::InvalidParameter(format!("family {} has no modality {id:?}", self.name))
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("family {}: {what}", self.name)));
        if !(self.goal_range > 0.0) {
            return bad("goal_range must be positive");
        }
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if !(self.jitter_std >= 0.0) {
            return bad("jitter_std must be non-negative");
        }
        if !(self.success_radius > 0.0) {
            return bad("success_radius must be positive");
        }
        for m in &self.modalities {
            if let ObservationModel::Gaussian { std } = &m.observation {
                if std.iter().any(|s| !(*s >= 0.0)) {
                    return bad("observation noise stds must be non-negative");
                }
            }
        }
        Ok(())
    }
}

fn name_key(name: &str) -> u64 {
    name.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskInstance {
    pub task_name: String,
    pub latent_goal: [f64; 2],
    pub obs_by_modality: BTreeMap<String, Condition>,
    pub success_radius: f64,
    pub horizon: usize,
    pub episode_seed: u64,
}

impl TaskInstance {
    /// Everything is a function of `(family.name, episode_seed)`.
    pub fn generate(family: &TaskFamily, episode_seed: u64) -> Result<Self> {
        family.validate()?;
        let rng = instance_stream(family, episode_seed);
        let r = family.goal_range;
        let mut goal_draws = rng.draws(Domain::TaskGoal, 0, 0);
        let goal = [goal_draws.uniform_in(-r, r), goal_draws.uniform_in(-r, r)];
        let mut obs_by_modality = BTreeMap::new();
        for (k, m) in family.modalities.iter().enumerate() {
            let mut d = rng.draws(Domain::TaskObservation, k as u64, 0);
            let features = match &m.observation {
                ObservationModel::Gaussian { std } => vec![goal[0] + std[0] * d.normal(), goal[1] + std[1] * d.normal()],
                ObservationModel::Uniform => vec![d.uniform_in(-r, r), d.uniform_in(-r, r)],
            };
            obs_by_modality.insert(m.id.clone(), Condition::new(m.id.clone(), features)?);
        }
        Ok(Self {
            task_name: family.name.clone(),
            latent_goal: goal,
            obs_by_modality,
            success_radius: family.success_radius,
            horizon: family.horizon,
            episode_seed,
        })
    }

    pub fn observation(&self, modality_id: &str) -> Result<&Condition> {
        self.obs_by_modality
            .get(modality_id)
            .ok_or_else(|| Error::InvalidParameter(format!("task {} has no modality {modality_id:?}", self.task_name)))
    }

    /// Straight line from the origin to the goal, waypoint `k` at `k / H`, plus jitter.
    pub fn expert_trajectory(&self, family: &TaskFamily) -> Result<Trajectory> {
        let rng = instance_stream(family, self.episode_seed);
        let mut d = rng.draws(Domain::TaskJitter, 0, 0);
        let h = self.horizon;
        let mut values = Vec::with_capacity(2 * h);
        for k in 1..=h {
            let s = k as f64 / h as f64;
            for g in self.latent_goal {
                let jitter = if family.jitter_std > 0.0 { family.jitter_std * d.normal() } else { 0.0 };
                values.push(s * g + jitter);
            }
        }
        Trajectory::new(values, TrajShape::new(h, 2))
    }
}

fn instance_stream(family: &TaskFamily, episode_seed: u64) -> RngStream {
    RngStream::new(mix(name_key(&family.name), episode_seed))
}

pub(crate) fn train_episode_seed(seed: u64, episode: u64) -> u64 {
    mix(mix(seed, TRAIN_TAG), episode)
}

pub(crate) fn eval_episode_seed(seed: u64, episode: u64) -> u64 {
    mix(mix(seed, EVAL_TAG), episode)
}

/// Expert demonstrations paired with one modality's observations.
pub fn make_dataset(family: &TaskFamily, modality_id: &str, num_episodes: usize, seed: u64) -> Result<Vec<Demonstration>> {
    if num_episodes == 0 {
        return Err(Error::InvalidParameter("num_episodes must be at least 1".into()));
    }
    family.modality_index(modality_id)?;
    (0..num_episodes as u64)
        .map(|e| {
            let inst = TaskInstance::generate(family, train_episode_seed(seed, e))?;
            Ok(Demonstration {
                trajectory: inst.expert_trajectory(family)?,
                condition: inst.observation(modality_id)?.clone(),
            })
        })
        .collect()
}

/// Is the final waypoint within the success radius of the goal (boundary included)?
pub fn rollout_success(traj: &Trajectory, task: &TaskInstance) -> Result<bool> {
    if traj.horizon() != task.horizon || traj.action_dim() != 2 {
        return Err(Error::ShapeMismatch {
            context: "rollout horizon",
            expected: task.horizon * 2,
            found: traj.len(),
        });
    }
    let w = traj.final_waypoint();
    let d = (w[0] - task.latent_goal[0]).hypot(w[1] - task.latent_goal[1]);
    Ok(d <= task.success_radius)
}

/// Trains one per-modality policy on `DEFAULT_TRAIN_EPISODES` demonstrations drawn with `config.seed`.
pub fn train_policy(
    family: &TaskFamily,
    modality_id: &str,
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    observe: impl FnMut(usize, f64),
) -> Result<Checkpoint> {
    let data = make_dataset(family, modality_id, DEFAULT_TRAIN_EPISODES, config.seed)?;
    train_denoiser_with(&data, schedule, config, observe)
}
