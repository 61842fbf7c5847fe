//! Weight sweeps over an MCDP pair with paired evaluation.
//!
//! For evaluation seed `s` and episode `e`, the task instance, the sampler
//! seed and the chain index depend only on `(s, e)`. Every weight column and
//! both unimodal baselines therefore see the same goals, observations,
//! initial noise and step noise.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compose::{validate_spec, CompositionEntry, CompositionSpec};
use crate::error::{Error, Result};
use crate::models::{Checkpoint, ScoreModel};
use crate::rng::mix;
use crate::sampler::{sample_chain, SamplerConfig, SingleSource};

use super::{eval_episode_seed, rollout_success, TaskFamily, TaskInstance};

const ROLLOUT_TAG: u64 = 0x726f_6c6c;

pub const SWEEP_CSV_HEADER: &str = "task,seed,episodes,w1,success_dp1,success_dp2,success_composed";

/// A score model together with the modality whose observations it consumes.
#[derive(Clone)]
pub struct Policy {
    pub model: Arc<dyn ScoreModel>,
    pub modality_id: String,
}

impl Policy {
    pub fn new(model: Arc<dyn ScoreModel>, modality_id: impl Into<String>) -> Self {
        Self {
            model,
            modality_id: modality_id.into(),
        }
    }

    pub fn from_checkpoint(ckpt: Checkpoint) -> Self {
        let id = ckpt.modality_id().to_string();
        Self::new(Arc::new(ckpt), id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub episode: u64,
    pub goal: [f64; 2],
    pub dp1_final: [f64; 2],
    pub dp2_final: [f64; 2],
    pub dp1_success: bool,
    pub dp2_success: bool,
    /// One entry per grid weight.
    pub composed_final: Vec<[f64; 2]>,
    pub composed_success: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub success_dp1: f64,
    pub success_dp2: f64,
    pub success_composed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub task_name: String,
    pub modality_1: String,
    pub modality_2: String,
    pub weight_grid: Vec<f64>,
    pub success_dp1: f64,
    pub success_dp2: f64,
    /// Aligned with `weight_grid`.
    pub success_composed: Vec<f64>,
    /// Episodes per seed.
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    /// Root-mean-square final-waypoint error per axis.
    pub rmse_dp1: [f64; 2],
    pub rmse_dp2: [f64; 2],
    #[serde(skip)]
    pub records: Vec<EpisodeRecord>,
}

impl SweepResult {
    pub fn total_episodes(&self) -> usize {
        self.episodes * self.seeds.len()
    }
}

fn final_xy(traj: &crate::trajectory::Trajectory) -> [f64; 2] {
    let w = traj.final_waypoint();
    [w[0], w[1]]
}

fn run_episode(
    family: &TaskFamily,
    p1: &Policy,
    p2: &Policy,
    grid: &[f64],
    base: &SamplerConfig,
    seed: u64,
    episode: u64,
) -> Result<EpisodeRecord> {
    let inst = TaskInstance::generate(family, eval_episode_seed(seed, episode))?;
    let o1 = inst.observation(&p1.modality_id)?;
    let o2 = inst.observation(&p2.modality_id)?;
    let cfg = SamplerConfig {
        seed: mix(seed, ROLLOUT_TAG),
        ..base.clone()
    };
    let t1 = sample_chain(&SingleSource { model: p1.model.as_ref(), condition: Some(o1) }, &cfg, episode)?;
    let t2 = sample_chain(&SingleSource { model: p2.model.as_ref(), condition: Some(o2) }, &cfg, episode)?;
    let mut composed_final = Vec::with_capacity(grid.len());
    let mut composed_success = Vec::with_capacity(grid.len());
    for &w in grid {
        let spec = CompositionSpec::mcdp(vec![
            CompositionEntry::new(p1.model.clone(), Some(o1.clone()), w),
            CompositionEntry::new(p2.model.clone(), Some(o2.clone()), 1.0 - w),
        ]);
        let t = sample_chain(&spec, &cfg, episode)?;
        composed_success.push(rollout_success(&t, &inst)?);
        composed_final.push(final_xy(&t));
    }
    Ok(EpisodeRecord {
        seed,
        episode,
        goal: inst.latent_goal,
        dp1_final: final_xy(&t1),
        dp2_final: final_xy(&t2),
        dp1_success: rollout_success(&t1, &inst)?,
        dp2_success: rollout_success(&t2, &inst)?,
        composed_final,
        composed_success,
    })
}

fn rate(xs: impl Iterator<Item = bool>) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for x in xs {
        hit += usize::from(x);
        n += 1;
    }
    hit as f64 / n as f64
}

fn rmse(records: &[EpisodeRecord], pick: impl Fn(&EpisodeRecord) -> [f64; 2]) -> [f64; 2] {
    let mut acc = [0.0; 2];
    for r in records {
        let p = pick(r);
        for a in 0..2 {
            acc[a] += (p[a] - r.goal[a]).powi(2);
        }
    }
    acc.map(|s| (s / records.len() as f64).sqrt())
}

/// Success rates of both policies and of their MCDP composition at each `w_1`.
pub fn run_sweep(
    family: &TaskFamily,
    policy_1: &Policy,
    policy_2: &Policy,
    weight_grid: &[f64],
    episodes: usize,
    seeds: &[u64],
) -> Result<SweepResult> {
    if weight_grid.is_empty() {
        return Err(Error::Empty("weight grid"));
    }
    if let Some(w) = weight_grid.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::InvalidParameter(format!("grid weight {w} is outside [0, 1]")));
    }
    if episodes == 0 {
        return Err(Error::InvalidParameter("episodes must be at least 1".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    family.modality_index(&policy_1.modality_id)?;
    family.modality_index(&policy_2.modality_id)?;
    validate_spec(&CompositionSpec::mcdp(vec![
        CompositionEntry::new(policy_1.model.clone(), None, 0.5),
        CompositionEntry::new(policy_2.model.clone(), None, 0.5),
    ]))?;
    if policy_1.model.shape() != family.shape() {
        return Err(Error::ShapeMismatch {
            context: "policy trajectory length",
            expected: family.shape().len(),
            found: policy_1.model.shape().len(),
        });
    }

    let base = SamplerConfig::new(policy_1.model.schedule().clone(), 0, 1);
    let jobs: Vec<(u64, u64)> = seeds
        .iter()
        .flat_map(|&s| (0..episodes as u64).map(move |e| (s, e)))
        .collect();
    let records: Vec<EpisodeRecord> = jobs
        .par_iter()
        .map(|&(s, e)| run_episode(family, policy_1, policy_2, weight_grid, &base, s, e))
        .collect::<Result<_>>()?;

    let per_seed: Vec<SeedResult> = records
        .chunks(episodes)
        .zip(seeds)
        .map(|(rs, &seed)| SeedResult {
            seed,
            success_dp1: rate(rs.iter().map(|r| r.dp1_success)),
            success_dp2: rate(rs.iter().map(|r| r.dp2_success)),
            success_composed: (0..weight_grid.len())
                .map(|k| rate(rs.iter().map(|r| r.composed_success[k])))
                .collect(),
        })
        .collect();
    let mean = |f: &dyn Fn(&SeedResult) -> f64| per_seed.iter().map(f).sum::<f64>() / per_seed.len() as f64;

    Ok(SweepResult {
        task_name: family.name.clone(),
        modality_1: policy_1.modality_id.clone(),
        modality_2: policy_2.modality_id.clone(),
        weight_grid: weight_grid.to_vec(),
        success_dp1: mean(&|r| r.success_dp1),
        success_dp2: mean(&|r| r.success_dp2),
        success_composed: (0..weight_grid.len()).map(|k| mean(&|r| r.success_composed[k])).collect(),
        episodes,
        seeds: seeds.to_vec(),
        rmse_dp1: rmse(&records, |r| r.dp1_final),
        rmse_dp2: rmse(&records, |r| r.dp2_final),
        per_seed,
        records,
    })
}

/// Rows per `(seed, w1)` followed by one aggregate row per `w1` with seed `all`.
pub fn write_sweep_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for s in &result.per_seed {
        for (k, w) in result.weight_grid.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                result.task_name, s.seed, result.episodes, w, s.success_dp1, s.success_dp2, s.success_composed[k]
            );
        }
    }
    for (k, w) in result.weight_grid.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},all,{},{},{},{},{}",
            result.task_name,
            result.total_episodes(),
            w,
            result.success_dp1,
            result.success_dp2,
            result.success_composed[k]
        );
    }
    out
}

/// Which policy a weight favours.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Dp1,
    Dp2,
    Balanced,
}

impl Side {
    fn of(w1: f64) -> Self {
        if w1 > 0.5 {
            Side::Dp1
        } else if w1 < 0.5 {
            Side::Dp2
        } else {
            Side::Balanced
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub task_name: String,
    pub best_w1: f64,
    pub best_rate: f64,
    pub best_unimodal: f64,
    /// `best_rate - best_unimodal`.
    pub gain: f64,
    pub side: Side,
    /// Axis whose best unimodal RMSE is largest.
    pub binding_axis: usize,
    /// 1 or 2: the policy with lower RMSE on the binding axis.
    pub stronger_on_binding_axis: u8,
    pub weight_on_stronger: f64,
    pub table: String,
}

/// Picks the best weight.
///
/// Ties go toward the better unimodal policy: the largest tied `w_1` when
/// DP1 is better, the smallest when DP2 is better, and the one nearest 0.5
/// (then the smaller) when both are equal.
pub fn summarize(sweep: &SweepResult) -> SweepSummary {
    let best_rate = sweep.success_composed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<f64> = sweep
        .weight_grid
        .iter()
        .zip(&sweep.success_composed)
        .filter(|(_, r)| **r == best_rate)
        .map(|(w, _)| *w)
        .collect();
    let best_w1 = if sweep.success_dp1 > sweep.success_dp2 {
        tied.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else if sweep.success_dp2 > sweep.success_dp1 {
        tied.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        tied.iter()
            .copied()
            .min_by(|a, b| (a - 0.5).abs().total_cmp(&(b - 0.5).abs()).then(a.total_cmp(b)))
            .unwrap_or(0.5)
    };

    let axis_floor = |a: usize| sweep.rmse_dp1[a].min(sweep.rmse_dp2[a]);
    let binding_axis = if axis_floor(1) > axis_floor(0) { 1 } else { 0 };
    let stronger = if sweep.rmse_dp1[binding_axis] <= sweep.rmse_dp2[binding_axis] { 1 } else { 2 };
    let weight_on_stronger = if stronger == 1 { best_w1 } else { 1.0 - best_w1 };
    let best_unimodal = sweep.success_dp1.max(sweep.success_dp2);

    let n = sweep.total_episodes() as f64;
    let ci = |p: f64| 1.96 * (p * (1.0 - p) / n).sqrt();
    let mut table = String::new();
    let _ = writeln!(table, "task {}  ({} episodes x {} seeds)", sweep.task_name, sweep.episodes, sweep.seeds.len());
    let _ = writeln!(table, "  DP1 [{}]  {:.3} +/- {:.3}", sweep.modality_1, sweep.success_dp1, ci(sweep.success_dp1));
    let _ = writeln!(table, "  DP2 [{}]  {:.3} +/- {:.3}", sweep.modality_2, sweep.success_dp2, ci(sweep.success_dp2));
    for (w, r) in sweep.weight_grid.iter().zip(&sweep.success_composed) {
        let mark = if *w == best_w1 { "  <- best" } else { "" };
        let _ = writeln!(table, "  w1={w:<5} {r:.3} +/- {:.3}{mark}", ci(*r));
    }
    let side = Side::of(best_w1);
    let side_text = match side {
        Side::Dp1 => "the DP1-favouring side (w1 > 0.5)",
        Side::Dp2 => "the DP2-favouring side (w1 < 0.5)",
        Side::Balanced => "the balanced point (w1 = 0.5)",
    };
    let _ = writeln!(table, "  best w1 = {best_w1} ({best_rate:.3}, {:+.3} vs best unimodal); peak lies on {side_text}", best_rate - best_unimodal);
    let axis = ["x", "y"][binding_axis];
    let _ = writeln!(
        table,
        "  binding axis {axis}: DP{stronger} is stronger there and receives weight {weight_on_stronger:.2}"
    );

    SweepSummary {
        task_name: sweep.task_name.clone(),
        best_w1,
        best_rate,
        best_unimodal,
        gain: best_rate - best_unimodal,
        side,
        binding_axis,
        stronger_on_binding_axis: stronger,
        weight_on_stronger,
        table,
    }
}
