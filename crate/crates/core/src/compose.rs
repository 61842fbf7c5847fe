//! Composition of noise estimates from several score models.
//!
//! * **MCDP**: `sum_i w_i eps_i` with `sum_i w_i = 1`. Each model sees its own
//!   modality's condition; no unconditional pass is needed.
//! * **CFG**: `eps_u + sum_i w_i (eps_{c_i} - eps_u)`, requiring an
//!   unconditional estimate.
//! * **Energy**: plain summation of energy gradients (a product of experts).
//!   In a sampled composition each entry's weight scales its estimate before
//!   summation; unit weights give the plain product.
//!
//! Sums are always accumulated in entry order.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::models::ScoreModel;
use crate::schedule::{NoiseSchedule, ScheduleId};
use crate::trajectory::{Condition, TrajShape, Trajectory};

pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompositionMode {
    Mcdp,
    Cfg,
    Energy,
}

impl fmt::Display for CompositionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompositionMode::Mcdp => "mcdp",
            CompositionMode::Cfg => "cfg",
            CompositionMode::Energy => "energy",
        })
    }
}

impl std::str::FromStr for CompositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcdp" => Ok(CompositionMode::Mcdp),
            "cfg" => Ok(CompositionMode::Cfg),
            "energy" => Ok(CompositionMode::Energy),
            other => Err(Error::Parse(format!("unknown composition mode {other:?}"))),
        }
    }
}

#[derive(Clone)]
pub struct CompositionEntry {
    pub model: Arc<dyn ScoreModel>,
    pub condition: Option<Condition>,
    pub weight: f64,
}

impl CompositionEntry {
    pub fn new(model: Arc<dyn ScoreModel>, condition: Option<Condition>, weight: f64) -> Self {
        Self {
            model,
            condition,
            weight,
        }
    }
}

#[derive(Clone)]
pub struct CompositionSpec {
    pub entries: Vec<CompositionEntry>,
    pub mode: CompositionMode,
    pub unconditional: Option<Arc<dyn ScoreModel>>,
    pub guidance_exponent: Option<f64>,
}

impl CompositionSpec {
    pub fn mcdp(entries: Vec<CompositionEntry>) -> Self {
        Self {
            entries,
            mode: CompositionMode::Mcdp,
            unconditional: None,
            guidance_exponent: None,
        }
    }

    pub fn cfg(unconditional: Arc<dyn ScoreModel>, entries: Vec<CompositionEntry>) -> Self {
        Self {
            entries,
            mode: CompositionMode::Cfg,
            unconditional: Some(unconditional),
            guidance_exponent: None,
        }
    }

    pub fn energy(entries: Vec<CompositionEntry>) -> Self {
        Self {
            entries,
            mode: CompositionMode::Energy,
            unconditional: None,
            guidance_exponent: None,
        }
    }

    /// One model at weight 1.
    pub fn single(model: Arc<dyn ScoreModel>, condition: Option<Condition>) -> Self {
        Self::mcdp(vec![CompositionEntry::new(model, condition, 1.0)])
    }

    /// Sets a shared guidance exponent and fills every entry weight with it.
    pub fn with_guidance_exponent(mut self, alpha: f64) -> Self {
        self.guidance_exponent = Some(alpha);
        for e in &mut self.entries {
            e.weight = alpha;
        }
        self
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    /// Schedule shared by all entries; meaningful only after validation.
    pub fn schedule(&self) -> Option<&NoiseSchedule> {
        self.entries.first().map(|e| e.model.schedule())
    }

    pub fn shape(&self) -> Option<TrajShape> {
        self.entries.first().map(|e| e.model.shape())
    }

    /// Queries every model at `(tau_t, t)` and combines the estimates.
    pub fn composed_eps(&self, tau_t: &Trajectory, t: usize) -> Result<Vec<f64>> {
        let eps: Vec<Vec<f64>> = self
            .entries
            .iter()
            .map(|e| e.model.predict_eps(tau_t, t, e.condition.as_ref()))
            .collect::<Result<_>>()?;
        let weights = self.weights();
        match self.mode {
            CompositionMode::Mcdp => compose_mcdp(&eps, &weights),
            CompositionMode::Cfg => {
                let uncond = self
                    .unconditional
                    .as_ref()
                    .ok_or_else(|| Error::Validation(ValidationReport::single(Violation::MissingUnconditional)))?;
                let eps_u = uncond.predict_eps(tau_t, t, None)?;
                compose_cfg(&eps_u, &eps, &weights)
            }
            CompositionMode::Energy => {
                let scaled: Vec<Vec<f64>> = eps
                    .into_iter()
                    .zip(&weights)
                    .map(|(e, w)| e.into_iter().map(|x| w * x).collect())
                    .collect();
                compose_energy(&scaled)
            }
        }
    }
}

fn check_equal_lengths<E: AsRef<[f64]>>(context: &'static str, vs: &[E], expected: usize) -> Result<()> {
    for v in vs {
        check_len(context, expected, v.as_ref().len())?;
    }
    Ok(())
}

/// `sum_i w_i eps_i`, weights summing to one within [`WEIGHT_SUM_TOLERANCE`].
pub fn compose_mcdp<E: AsRef<[f64]>>(eps_list: &[E], weights: &[f64]) -> Result<Vec<f64>> {
    check_len("mcdp weights", eps_list.len(), weights.len())?;
    let first = eps_list.first().ok_or(Error::Empty("mcdp estimates"))?.as_ref();
    check_equal_lengths("mcdp estimates", eps_list, first.len())?;
    if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
        return Err(ValidationReport::single(Violation::NonFiniteWeight { index: i, weight: weights[i] }).into());
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(ValidationReport::single(Violation::WeightSum { sum, tolerance: WEIGHT_SUM_TOLERANCE }).into());
    }
    Ok(weighted_sum(eps_list, weights, first.len()))
}

fn weighted_sum<E: AsRef<[f64]>>(eps_list: &[E], weights: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (i, (e, &w)) in eps_list.iter().zip(weights).enumerate() {
        if i == 0 {
            for (o, x) in out.iter_mut().zip(e.as_ref()) {
                *o = w * x;
            }
        } else {
            for (o, x) in out.iter_mut().zip(e.as_ref()) {
                *o += w * x;
            }
        }
    }
    out
}

/// `eps_u + sum_i w_i (eps_{c_i} - eps_u)`; weights are unconstrained.
pub fn compose_cfg<E: AsRef<[f64]>>(eps_uncond: &[f64], eps_cond_list: &[E], weights: &[f64]) -> Result<Vec<f64>> {
    check_len("cfg weights", eps_cond_list.len(), weights.len())?;
    check_equal_lengths("cfg estimates", eps_cond_list, eps_uncond.len())?;
    let mut out = eps_uncond.to_vec();
    for (e, &w) in eps_cond_list.iter().zip(weights) {
        for ((o, c), u) in out.iter_mut().zip(e.as_ref()).zip(eps_uncond) {
            *o += w * (c - u);
        }
    }
    Ok(out)
}

/// Elementwise sum of energy gradients.
pub fn compose_energy<E: AsRef<[f64]>>(grads: &[E]) -> Result<Vec<f64>> {
    let first = grads.first().ok_or(Error::Empty("energy gradients"))?.as_ref();
    check_equal_lengths("energy gradients", grads, first.len())?;
    let mut out = first.to_vec();
    for g in &grads[1..] {
        for (o, x) in out.iter_mut().zip(g.as_ref()) {
            *o += x;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NoEntries,
    NonFiniteWeight { index: usize, weight: f64 },
    WeightSum { sum: f64, tolerance: f64 },
    MissingUnconditional,
    ScheduleMismatch { index: usize, expected: ScheduleId, found: ScheduleId },
    ShapeMismatch { index: usize, expected: TrajShape, found: TrajShape },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoEntries => write!(f, "composition has no entries"),
            Violation::NonFiniteWeight { index, weight } => {
                write!(f, "entry {index}: weight {weight} is not finite")
            }
            Violation::WeightSum { sum, tolerance } => {
                write!(f, "weights sum to {sum}, must equal 1 within tolerance {tolerance:e}")
            }
            Violation::MissingUnconditional => write!(f, "cfg mode requires an unconditional model"),
            Violation::ScheduleMismatch { index, expected, found } => write!(
                f,
                "entry {index}: schedule {found} differs from entry 0 schedule {expected}"
            ),
            Violation::ShapeMismatch { index, expected, found } => write!(
                f,
                "entry {index}: trajectory shape {}x{} differs from entry 0 shape {}x{}",
                found.horizon, found.action_dim, expected.horizon, expected.action_dim
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn single(v: Violation) -> Self {
        Self { violations: vec![v] }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

/// Checks mode invariants and that all models share one schedule and shape.
pub fn validate_spec(spec: &CompositionSpec) -> std::result::Result<(), ValidationReport> {
    let mut violations = Vec::new();
    let Some(first) = spec.entries.first() else {
        return Err(ValidationReport::single(Violation::NoEntries));
    };

    for (index, e) in spec.entries.iter().enumerate() {
        if !e.weight.is_finite() {
            violations.push(Violation::NonFiniteWeight { index, weight: e.weight });
        }
    }
    match spec.mode {
        CompositionMode::Mcdp => {
            let sum: f64 = spec.entries.iter().map(|e| e.weight).sum();
            if sum.is_finite() && (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                violations.push(Violation::WeightSum { sum, tolerance: WEIGHT_SUM_TOLERANCE });
            }
        }
        CompositionMode::Cfg => {
            if spec.unconditional.is_none() {
                violations.push(Violation::MissingUnconditional);
            }
        }
        CompositionMode::Energy => {}
    }

    let expected = first.model.schedule().id().clone();
    let shape = first.model.shape();
    let others = spec
        .entries
        .iter()
        .map(|e| &e.model)
        .chain(spec.unconditional.iter())
        .enumerate()
        .skip(1);
    for (index, model) in others {
        let found = model.schedule().id();
        if *found != expected {
            violations.push(Violation::ScheduleMismatch {
                index,
                expected: expected.clone(),
                found: found.clone(),
            });
        }
        if model.shape() != shape {
            violations.push(Violation::ShapeMismatch { index, expected: shape, found: model.shape() });
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(ValidationReport { violations })
    }
}
