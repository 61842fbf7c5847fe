//! Reverse-process samplers.
//!
//! Every chain starts from `tau_T ~ N(0, I)` and walks `t = T, ..., 1`. Noise
//! for chain `c` at step `t` comes from its own keyed RNG block, so results do
//! not depend on how chains are scheduled across threads.

mod density;
mod langevin;

pub use density::{histogram_tv, reverse_density_1d, DensityGrid, DensityResult};
pub use langevin::{langevin_ebm_sample, LangevinConfig};

use std::sync::Arc;

use rayon::prelude::*;

use crate::compose::{validate_spec, CompositionSpec, ValidationReport, Violation};
use crate::error::{check_len, Error, Result};
use crate::models::ScoreModel;
use crate::rng::{Domain, RngStream};
use crate::schedule::{NoiseSchedule, StepCoefficients};
use crate::trajectory::{Condition, TrajShape, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Solver {
    Ancestral,
    /// `eta = 0` is deterministic; `eta = 1` matches the ancestral noise scale.
    Ddim { eta: f64 },
}

#[derive(Clone, Debug)]
pub struct SamplerConfig {
    pub schedule: NoiseSchedule,
    pub seed: u64,
    pub num_chains: usize,
    pub solver: Solver,
}

impl SamplerConfig {
    pub fn new(schedule: NoiseSchedule, seed: u64, num_chains: usize) -> Self {
        Self {
            schedule,
            seed,
            num_chains,
            solver: Solver::Ancestral,
        }
    }

    pub fn with_solver(mut self, solver: Solver) -> Self {
        self.solver = solver;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.num_chains == 0 {
            return Err(Error::InvalidParameter("num_chains must be at least 1".into()));
        }
        if let Solver::Ddim { eta } = self.solver {
            check_eta(eta)?;
        }
        Ok(())
    }
}

/// Anything that yields a noise estimate for a noised trajectory.
pub trait EpsSource: Sync {
    fn eps(&self, tau_t: &Trajectory, t: usize) -> Result<Vec<f64>>;
    fn shape(&self) -> TrajShape;
}

impl EpsSource for CompositionSpec {
    fn eps(&self, tau_t: &Trajectory, t: usize) -> Result<Vec<f64>> {
        self.composed_eps(tau_t, t)
    }

    fn shape(&self) -> TrajShape {
        CompositionSpec::shape(self).unwrap_or(TrajShape::point(0))
    }
}

/// One model queried directly, without the composition layer.
pub struct SingleSource<'a> {
    pub model: &'a dyn ScoreModel,
    pub condition: Option<&'a Condition>,
}

impl EpsSource for SingleSource<'_> {
    fn eps(&self, tau_t: &Trajectory, t: usize) -> Result<Vec<f64>> {
        self.model.predict_eps(tau_t, t, self.condition)
    }

    fn shape(&self) -> TrajShape {
        self.model.shape()
    }
}

/// `recip_sqrt_alpha * (tau_t - eps_coef * eps) + noise_std * noise`.
pub fn ancestral_step(tau_t: &[f64], eps: &[f64], coef: &StepCoefficients, noise: &[f64]) -> Result<Vec<f64>> {
    check_len("ancestral eps", tau_t.len(), eps.len())?;
    check_len("ancestral noise", tau_t.len(), noise.len())?;
    let mut out: Vec<f64> = tau_t
        .iter()
        .zip(eps)
        .map(|(x, e)| coef.recip_sqrt_alpha * (x - coef.eps_coef * e))
        .collect();
    if coef.noise_std != 0.0 {
        for (o, z) in out.iter_mut().zip(noise) {
            *o += coef.noise_std * z;
        }
    }
    Ok(out)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("ddim eta must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// `eta * sqrt((1 - ab_{t-1}) / (1 - ab_t)) * sqrt(1 - ab_t / ab_{t-1})`.
pub fn ddim_sigma(schedule: &NoiseSchedule, t: usize, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let ab = schedule.alpha_bar(t)?;
    let ab_prev = schedule.alpha_bar(t - 1)?;
    Ok(eta * ((1.0 - ab_prev) / (1.0 - ab)).sqrt() * (1.0 - ab / ab_prev).sqrt())
}

/// Predicted-`tau_0` step. `noise` is read only when sigma is nonzero.
pub fn ddim_step(tau_t: &[f64], t: usize, eps: &[f64], schedule: &NoiseSchedule, eta: f64, noise: &[f64]) -> Result<Vec<f64>> {
    check_len("ddim eps", tau_t.len(), eps.len())?;
    check_len("ddim noise", tau_t.len(), noise.len())?;
    let sigma = ddim_sigma(schedule, t, eta)?;
    let (sa, s1a) = schedule.forward_marginal(t)?;
    let ab_prev = schedule.alpha_bar(t - 1)?;
    let dir = (1.0 - ab_prev - sigma * sigma).max(0.0).sqrt();
    let sa_prev = ab_prev.sqrt();
    let mut out: Vec<f64> = tau_t
        .iter()
        .zip(eps)
        .map(|(x, e)| {
            let x0 = (x - s1a * e) / sa;
            sa_prev * x0 + dir * e
        })
        .collect();
    if sigma != 0.0 {
        for (o, z) in out.iter_mut().zip(noise) {
            *o += sigma * z;
        }
    }
    Ok(out)
}

/// Per-step states of one chain, `tau_T` first and `tau_0` last.
pub type ChainTrace = Vec<Vec<f64>>;

/// Runs chain number `chain` to `tau_0`. The chain index keys its noise.
pub fn sample_chain<S: EpsSource + ?Sized>(source: &S, config: &SamplerConfig, chain: u64) -> Result<Trajectory> {
    run_chain(source, config, chain, None)
}

fn run_chain<S: EpsSource + ?Sized>(
    source: &S,
    config: &SamplerConfig,
    chain: u64,
    mut trace: Option<&mut ChainTrace>,
) -> Result<Trajectory> {
    let shape = source.shape();
    let rng = RngStream::new(config.seed);
    let schedule = &config.schedule;
    let mut tau = rng.draws(Domain::InitialNoise, chain, 0).normal_vec(shape.len());
    let mut noise = vec![0.0; shape.len()];
    if let Some(tr) = trace.as_deref_mut() {
        tr.push(tau.clone());
    }
    for t in (1..=schedule.num_steps()).rev() {
        let state = Trajectory::from_raw(tau, shape);
        let eps = source.eps(&state, t)?;
        rng.draws(Domain::StepNoise, chain, t as u64).fill_normal(&mut noise);
        tau = match config.solver {
            Solver::Ancestral => ancestral_step(state.values(), &eps, &schedule.step_coefficients(t)?, &noise)?,
            Solver::Ddim { eta } => ddim_step(state.values(), t, &eps, schedule, eta, &noise)?,
        };
        if tau.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { chain: chain as usize, t });
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(tau.clone());
        }
    }
    Ok(Trajectory::from_raw(tau, shape))
}

fn check_source_schedule(spec: &CompositionSpec, config: &SamplerConfig) -> Result<()> {
    validate_spec(spec)?;
    let own = spec.schedule().expect("validated spec has entries").id();
    if own != config.schedule.id() {
        return Err(ValidationReport {
            violations: vec![Violation::ScheduleMismatch {
                index: 0,
                expected: config.schedule.id().clone(),
                found: own.clone(),
            }],
        }
        .into());
    }
    Ok(())
}

fn run_all<S: EpsSource + ?Sized>(source: &S, config: &SamplerConfig) -> Result<Vec<Trajectory>> {
    config.validate()?;
    (0..config.num_chains as u64)
        .into_par_iter()
        .map(|c| run_chain(source, config, c, None))
        .collect()
}

/// Composed sampling: every model is queried at each step and the estimates combined.
pub fn sample_composed(spec: &CompositionSpec, config: &SamplerConfig) -> Result<Vec<Trajectory>> {
    check_source_schedule(spec, config)?;
    run_all(spec, config)
}

/// As [`sample_composed`], also returning every intermediate state.
pub fn sample_composed_traced(spec: &CompositionSpec, config: &SamplerConfig) -> Result<(Vec<Trajectory>, Vec<ChainTrace>)> {
    check_source_schedule(spec, config)?;
    config.validate()?;
    let pairs: Vec<(Trajectory, ChainTrace)> = (0..config.num_chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut tr = Vec::with_capacity(config.schedule.num_steps() + 1);
            run_chain(spec, config, c, Some(&mut tr)).map(|x| (x, tr))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

pub fn sample_single(model: &dyn ScoreModel, condition: Option<&Condition>, config: &SamplerConfig) -> Result<Vec<Trajectory>> {
    if model.schedule().id() != config.schedule.id() {
        return Err(ValidationReport {
            violations: vec![Violation::ScheduleMismatch {
                index: 0,
                expected: config.schedule.id().clone(),
                found: model.schedule().id().clone(),
            }],
        }
        .into());
    }
    run_all(&SingleSource { model, condition }, config)
}

/// Convenience for owned models.
pub fn sample_single_arc(model: &Arc<dyn ScoreModel>, condition: Option<&Condition>, config: &SamplerConfig) -> Result<Vec<Trajectory>> {
    sample_single(model.as_ref(), condition, config)
}
