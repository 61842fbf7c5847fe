//! Discrete DDPM noise schedules and the per-step solver coefficients.
//!
//! Timesteps are 1-based: `t = 1..=T`, with `alpha_bar(0) = 1`. Sampling runs
//! `t = T, ..., 1`; the final step (`t = 1`) injects no noise.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_NUM_STEPS: usize = 100;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    Linear,
}

/// Serializable recipe that reconstructs a schedule deterministically.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDescriptor {
    pub kind: ScheduleKind,
    pub num_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleDescriptor {
    fn default() -> Self {
        Self {
            kind: ScheduleKind::Linear,
            num_steps: DEFAULT_NUM_STEPS,
            beta_start: DEFAULT_BETA_START,
            beta_end: DEFAULT_BETA_END,
        }
    }
}

/// Content hash of `(num_steps, betas)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScheduleId(String);

impl ScheduleId {
    fn of(betas: &[f64]) -> Self {
        let mut hasher = Sha256::new();
        hasher.update((betas.len() as u64).to_le_bytes());
        for b in betas {
            hasher.update(b.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        ScheduleId(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ScheduleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    descriptor: ScheduleDescriptor,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    id: ScheduleId,
}

/// Coefficients of one ancestral step `t -> t-1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepCoefficients {
    /// `1 / sqrt(alpha_t)`
    pub recip_sqrt_alpha: f64,
    /// `beta_t / sqrt(1 - alpha_bar_t)`
    pub eps_coef: f64,
    /// Posterior standard deviation; zero at `t = 1`.
    pub noise_std: f64,
    pub sqrt_alpha_bar: f64,
    pub sqrt_one_minus_alpha_bar: f64,
}

pub fn make_linear_schedule(num_steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    NoiseSchedule::linear(num_steps, beta_start, beta_end)
}

impl NoiseSchedule {
    pub fn linear(num_steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if num_steps < 2 {
            return Err(Error::InvalidSchedule(format!(
                "num_steps must be at least 2, got {num_steps}"
            )));
        }
        for (name, b) in [("beta_start", beta_start), ("beta_end", beta_end)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidSchedule(format!("{name} = {b} is outside (0, 1)")));
            }
        }
        if beta_start > beta_end {
            return Err(Error::InvalidSchedule(format!(
                "beta_start {beta_start} exceeds beta_end {beta_end}"
            )));
        }
        let last = (num_steps - 1) as f64;
        let betas: Vec<f64> = (0..num_steps)
            .map(|i| beta_start + (beta_end - beta_start) * (i as f64 / last))
            .collect();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bars = Vec::with_capacity(num_steps);
        let mut running = 1.0;
        for a in &alphas {
            running *= a;
            alpha_bars.push(running);
        }
        let id = ScheduleId::of(&betas);
        Ok(Self {
            descriptor: ScheduleDescriptor {
                kind: ScheduleKind::Linear,
                num_steps,
                beta_start,
                beta_end,
            },
            betas,
            alphas,
            alpha_bars,
            id,
        })
    }

    pub fn from_descriptor(d: &ScheduleDescriptor) -> Result<Self> {
        match d.kind {
            ScheduleKind::Linear => Self::linear(d.num_steps, d.beta_start, d.beta_end),
        }
    }

    pub fn num_steps(&self) -> usize {
        self.betas.len()
    }

    pub fn descriptor(&self) -> &ScheduleDescriptor {
        &self.descriptor
    }

    pub fn id(&self) -> &ScheduleId {
        &self.id
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn check_timestep(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.num_steps() {
            Err(Error::TimestepOutOfRange {
                t,
                num_steps: self.num_steps(),
            })
        } else {
            Ok(())
        }
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        self.check_timestep(t)?;
        Ok(self.betas[t - 1])
    }

    /// `alpha_bar_t` for `t` in `0..=T`; `alpha_bar_0 = 1`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        match t {
            0 => Ok(1.0),
            _ => {
                self.check_timestep(t)?;
                Ok(self.alpha_bars[t - 1])
            }
        }
    }

    pub fn step_coefficients(&self, t: usize) -> Result<StepCoefficients> {
        self.check_timestep(t)?;
        let beta = self.betas[t - 1];
        let alpha_bar = self.alpha_bars[t - 1];
        let alpha_bar_prev = if t == 1 { 1.0 } else { self.alpha_bars[t - 2] };
        let sqrt_one_minus_alpha_bar = (1.0 - alpha_bar).sqrt();
        let noise_std = if t == 1 {
            0.0
        } else {
            (beta * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)).sqrt()
        };
        Ok(StepCoefficients {
            recip_sqrt_alpha: 1.0 / (1.0 - beta).sqrt(),
            eps_coef: beta / sqrt_one_minus_alpha_bar,
            noise_std,
            sqrt_alpha_bar: alpha_bar.sqrt(),
            sqrt_one_minus_alpha_bar,
        })
    }

    /// `(sqrt(alpha_bar_t), sqrt(1 - alpha_bar_t))` of `q(tau_t | tau_0)`.
    pub fn forward_marginal(&self, t: usize) -> Result<(f64, f64)> {
        self.check_timestep(t)?;
        let ab = self.alpha_bars[t - 1];
        Ok(marginal_scales(ab))
    }
}

pub(crate) fn marginal_scales(alpha_bar: f64) -> (f64, f64) {
    (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt())
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::from_descriptor(&ScheduleDescriptor::default()).expect("default schedule is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default() -> NoiseSchedule {
        NoiseSchedule::default()
    }

    // Product of (1 - beta) over betas rebuilt from their closed form,
    // accumulated with a compensated sum of logs.
    fn brute_alpha_bar(num_steps: usize, b0: f64, b1: f64, t: usize) -> f64 {
        let mut log_sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in 0..t {
            let beta = b0 + (b1 - b0) * i as f64 / (num_steps - 1) as f64;
            let y = (1.0 - beta).ln() - comp;
            let s = log_sum + y;
            comp = (s - log_sum) - y;
            log_sum = s;
        }
        log_sum.exp()
    }

    #[test]
    fn first_alpha_bar_is_one_minus_beta() {
        assert_eq!(default().alpha_bars()[0], 1.0 - 1e-4);
    }

    #[test]
    fn last_alpha_bar_matches_direct_product() {
        let s = default();
        let expected = brute_alpha_bar(100, 1e-4, 0.02, 100);
        assert!((s.alpha_bars()[99] - 0.364).abs() < 1e-3);
        assert!((s.alpha_bars()[99] - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_beta_gives_geometric_alpha_bars() {
        let s = make_linear_schedule(2, 0.5, 0.5).unwrap();
        assert_eq!(s.alpha_bars(), &[0.5, 0.25]);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(make_linear_schedule(0, 1e-4, 0.02).is_err());
        assert!(make_linear_schedule(1, 1e-4, 0.02).is_err());
        assert!(make_linear_schedule(10, 0.0, 0.02).is_err());
        assert!(make_linear_schedule(10, 1e-4, 1.0).is_err());
        assert!(make_linear_schedule(10, 0.03, 0.02).is_err());
        assert!(make_linear_schedule(10, f64::NAN, 0.02).is_err());
    }

    #[test]
    fn first_step_coefficients() {
        let c = default().step_coefficients(1).unwrap();
        assert!((c.eps_coef - 0.01).abs() < 1e-12);
        assert_eq!(c.noise_std, 0.0);
    }

    #[test]
    fn last_step_eps_coef() {
        let s = default();
        let c = s.step_coefficients(100).unwrap();
        let direct = 0.02 / (1.0 - brute_alpha_bar(100, 1e-4, 0.02, 100)).sqrt();
        assert!((c.eps_coef - 0.02508).abs() < 5e-5);
        assert!((c.eps_coef - direct).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_timesteps() {
        let s = default();
        assert!(matches!(
            s.step_coefficients(0),
            Err(Error::TimestepOutOfRange { t: 0, num_steps: 100 })
        ));
        assert!(s.step_coefficients(101).is_err());
        assert!(s.forward_marginal(0).is_err());
        assert!(s.forward_marginal(101).is_err());
    }

    #[test]
    fn forward_marginal_examples() {
        let s = make_linear_schedule(2, 0.5, 0.5).unwrap();
        let (a, b) = s.forward_marginal(2).unwrap();
        assert_eq!(a, 0.5);
        assert!((b - 0.75f64.sqrt()).abs() < 1e-15);

        let (a, b) = default().forward_marginal(1).unwrap();
        assert!((a - 0.9999f64.sqrt()).abs() < 1e-15);
        assert!((a - 0.99995).abs() < 1e-6);
        assert!((b - 0.01).abs() < 1e-12);

        assert_eq!(marginal_scales(1.0), (1.0, 0.0));
    }

    #[test]
    fn coefficients_agree_with_recomputation_from_betas() {
        let s = default();
        for t in 1..=100 {
            let c = s.step_coefficients(t).unwrap();
            let ab = brute_alpha_bar(100, 1e-4, 0.02, t);
            let ab_prev = brute_alpha_bar(100, 1e-4, 0.02, t - 1);
            let beta = 1e-4 + (0.02 - 1e-4) * (t - 1) as f64 / 99.0;
            let rel = |x: f64, y: f64| if y == 0.0 { x.abs() } else { ((x - y) / y).abs() };
            assert!(rel(c.recip_sqrt_alpha, 1.0 / (1.0 - beta).sqrt()) < 1e-12);
            assert!(rel(c.eps_coef, beta / (1.0 - ab).sqrt()) < 1e-12, "t={t}");
            let sigma = if t == 1 { 0.0 } else { (beta * (1.0 - ab_prev) / (1.0 - ab)).sqrt() };
            assert!(rel(c.noise_std, sigma) < 1e-12, "t={t}");
            assert!(rel(c.sqrt_alpha_bar, ab.sqrt()) < 1e-12);
            assert!(rel(c.sqrt_one_minus_alpha_bar, (1.0 - ab).sqrt()) < 1e-12);
            assert!((c.sqrt_alpha_bar.powi(2) + c.sqrt_one_minus_alpha_bar.powi(2) - 1.0).abs() < 1e-12);
            assert_eq!(s.forward_marginal(t).unwrap(), (c.sqrt_alpha_bar, c.sqrt_one_minus_alpha_bar));
        }
    }

    #[test]
    fn invariants_hold() {
        let s = default();
        let ab = s.alpha_bars();
        for t in 0..ab.len() {
            assert!(ab[t] > 0.0 && ab[t] <= 1.0);
            assert!(s.betas()[t] > 0.0 && s.betas()[t] < 1.0);
            let prev = if t == 0 { 1.0 } else { ab[t - 1] };
            assert_eq!(ab[t], prev * s.alphas()[t]);
            assert!(ab[t] < prev);
        }
        let mut last = 0.0;
        for t in 1..=100 {
            let (_, noise) = s.forward_marginal(t).unwrap();
            assert!(noise > last);
            last = noise;
        }
    }

    #[test]
    fn schedule_id_tracks_content() {
        let a = make_linear_schedule(100, 1e-4, 0.02).unwrap();
        let b = NoiseSchedule::from_descriptor(a.descriptor()).unwrap();
        assert_eq!(a.id(), b.id());
        assert_ne!(a.id(), make_linear_schedule(50, 1e-4, 0.02).unwrap().id());
        assert_ne!(a.id(), make_linear_schedule(100, 1e-4, 0.021).unwrap().id());
    }
}
