//! DDIM against ancestral sampling on the same score. With eta = 0 the update
//! is deterministic given the initial noise.

use std::sync::Arc;

use composable_diffusion::compose::CompositionSpec;
use composable_diffusion::models::{GaussianDataScore, ScoreModel};
use composable_diffusion::sampler::{ddim_sigma, sample_composed, SamplerConfig, Solver};
use composable_diffusion::schedule::NoiseSchedule;

fn main() -> composable_diffusion::Result<()> {
    let schedule = NoiseSchedule::default();
    let model: Arc<dyn ScoreModel> = Arc::new(GaussianDataScore::new(vec![0.5], 0.3, schedule.clone())?);
    let spec = CompositionSpec::single(model, None);
    for (label, solver) in [
        ("ancestral", Solver::Ancestral),
        ("ddim eta=0", Solver::Ddim { eta: 0.0 }),
        ("ddim eta=1", Solver::Ddim { eta: 1.0 }),
    ] {
        let config = SamplerConfig::new(schedule.clone(), 1, 5000).with_solver(solver);
        let xs: Vec<f64> = sample_composed(&spec, &config)?.iter().map(|s| s.values()[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt();
        println!("{label:<11} mean {mean:.4} std {std:.4}");
    }
    println!("ddim sigma at t=50, eta=1: {:.6}", ddim_sigma(&schedule, 50, 1.0)?);
    Ok(())
}
