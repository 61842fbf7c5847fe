//! MCDP composition of two analytic Gaussian scores at several weights.
//!
//! Each source is N(mu_i, 0.2^2) on a 1-D trajectory. The composed sampler
//! lands between the two means, pulled toward the heavier weight.

use std::sync::Arc;

use composable_diffusion::compose::{CompositionEntry, CompositionSpec};
use composable_diffusion::models::{GaussianDataScore, ScoreModel};
use composable_diffusion::sampler::{sample_composed, SamplerConfig};
use composable_diffusion::schedule::NoiseSchedule;

fn main() -> composable_diffusion::Result<()> {
    let schedule = NoiseSchedule::default();
    let left: Arc<dyn ScoreModel> = Arc::new(GaussianDataScore::new(vec![-1.0], 0.2, schedule.clone())?);
    let right: Arc<dyn ScoreModel> = Arc::new(GaussianDataScore::new(vec![1.0], 0.2, schedule.clone())?);
    println!("{:>5} {:>9} {:>9}", "w1", "mean", "std");
    for w1 in [0.0, 0.3, 0.5, 0.7, 1.0] {
        let spec = CompositionSpec::mcdp(vec![
            CompositionEntry::new(left.clone(), None, w1),
            CompositionEntry::new(right.clone(), None, 1.0 - w1),
        ]);
        let samples = sample_composed(&spec, &SamplerConfig::new(schedule.clone(), 7, 5000))?;
        let xs: Vec<f64> = samples.iter().map(|s| s.values()[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        println!("{w1:>5.1} {mean:>9.4} {:>9.4}", var.sqrt());
    }
    Ok(())
}
