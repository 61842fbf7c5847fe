//! Unadjusted Langevin sampling of a product of quadratic energies:
//! `x' = x - gamma * sum_i grad E_i(x) + sqrt(2 gamma) xi`.

use rayon::prelude::*;

use crate::compose::compose_energy;
use crate::error::{check_len, Error, Result};
use crate::models::QuadraticEnergy;
use crate::rng::{Domain, RngStream};

use super::SamplerConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LangevinConfig {
    pub step_size: f64,
    pub num_steps: usize,
    /// With `false` the update is plain gradient descent.
    pub inject_noise: bool,
}

impl LangevinConfig {
    pub fn new(step_size: f64, num_steps: usize) -> Self {
        Self {
            step_size,
            num_steps,
            inject_noise: true,
        }
    }
}

/// Final states of `config.num_chains` chains started from `N(0, I)`.
/// The schedule and solver fields of `config` are unused.
pub fn langevin_ebm_sample(energies: &[QuadraticEnergy], lc: &LangevinConfig, config: &SamplerConfig) -> Result<Vec<Vec<f64>>> {
    if !(lc.step_size > 0.0 && lc.step_size.is_finite()) {
        return Err(Error::InvalidParameter(format!("step_size must be positive, got {}", lc.step_size)));
    }
    if config.num_chains == 0 {
        return Err(Error::InvalidParameter("num_chains must be at least 1".into()));
    }
    let dim = energies.first().ok_or(Error::Empty("energies"))?.dim();
    for e in energies {
        check_len("energy dimension", dim, e.dim())?;
    }
    let rng = RngStream::new(config.seed);
    let noise_scale = (2.0 * lc.step_size).sqrt();
    (0..config.num_chains as u64)
        .into_par_iter()
        .map(|chain| {
            let mut x = rng.draws(Domain::Langevin, chain, 0).normal_vec(dim);
            let mut xi = vec![0.0; dim];
            for k in 1..=lc.num_steps {
                let grads = energies.iter().map(|e| e.grad(&x)).collect::<Result<Vec<_>>>()?;
                let g = compose_energy(&grads)?;
                if lc.inject_noise {
                    rng.draws(Domain::Langevin, chain, k as u64).fill_normal(&mut xi);
                }
                for ((v, gi), z) in x.iter_mut().zip(&g).zip(&xi) {
                    *v -= lc.step_size * gi;
                    if lc.inject_noise {
                        *v += noise_scale * z;
                    }
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { chain: chain as usize, t: k });
                }
            }
            Ok(x)
        })
        .collect()
}
