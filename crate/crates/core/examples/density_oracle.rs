//! Exact 1-D law of the reverse sampler on a grid, compared with a histogram
//! of actual samples by total variation.

use std::sync::Arc;

use composable_diffusion::compose::CompositionSpec;
use composable_diffusion::models::{GaussianDataScore, MixtureComponent, MixtureDataScore, ScoreModel};
use composable_diffusion::sampler::{histogram_tv, reverse_density_1d, sample_composed, DensityGrid, SamplerConfig};
use composable_diffusion::schedule::NoiseSchedule;

fn main() -> composable_diffusion::Result<()> {
    let schedule = NoiseSchedule::default();
    let mixture: Arc<dyn ScoreModel> = Arc::new(MixtureDataScore::new(
        vec![
            MixtureComponent { weight: 0.5, mean: vec![-1.0], std: 0.2 },
            MixtureComponent { weight: 0.5, mean: vec![1.0], std: 0.2 },
        ],
        schedule.clone(),
    )?);
    let narrow: Arc<dyn ScoreModel> = Arc::new(GaussianDataScore::new(vec![0.3], 0.2, schedule.clone())?);
    let cases = [
        ("mixture", CompositionSpec::single(mixture, None)),
        ("gaussian", CompositionSpec::single(narrow, None)),
    ];
    for (name, spec) in cases {
        let oracle = reverse_density_1d(&spec, &schedule, &DensityGrid::default())?;
        let samples = sample_composed(&spec, &SamplerConfig::new(schedule.clone(), 5, 20_000))?;
        let xs: Vec<f64> = samples.iter().map(|s| s.values()[0]).collect();
        let tv = histogram_tv(&xs, &oracle, 50)?;
        println!(
            "{name:<9} oracle mean {:+.4} var {:.4}  leaked {:.1e}  TV vs 20000 samples {tv:.4}",
            oracle.mean(),
            oracle.variance(),
            oracle.leaked
        );
    }
    Ok(())
}
