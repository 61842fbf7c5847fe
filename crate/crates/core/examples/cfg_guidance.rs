//! Classifier-free guidance: stronger guidance pushes samples past the
//! conditional mean, away from the unconditional one.

use std::sync::Arc;

use composable_diffusion::compose::{validate_spec, CompositionEntry, CompositionSpec};
use composable_diffusion::models::{GaussianDataScore, ScoreModel};
use composable_diffusion::sampler::{sample_composed, SamplerConfig};
use composable_diffusion::schedule::NoiseSchedule;

fn main() -> composable_diffusion::Result<()> {
    let schedule = NoiseSchedule::default();
    let uncond: Arc<dyn ScoreModel> = Arc::new(GaussianDataScore::new(vec![0.0, 0.0], 1.0, schedule.clone())?);
    let cond: Arc<dyn ScoreModel> = Arc::new(GaussianDataScore::new(vec![1.0, 0.5], 0.3, schedule.clone())?);
    for alpha in [0.0, 1.0, 1.5, 3.0] {
        let spec = CompositionSpec::cfg(uncond.clone(), vec![CompositionEntry::new(cond.clone(), None, 0.0)])
            .with_guidance_exponent(alpha);
        validate_spec(&spec).map_err(composable_diffusion::Error::Validation)?;
        let samples = sample_composed(&spec, &SamplerConfig::new(schedule.clone(), 11, 4000))?;
        let n = samples.len() as f64;
        let mx = samples.iter().map(|s| s.values()[0]).sum::<f64>() / n;
        let my = samples.iter().map(|s| s.values()[1]).sum::<f64>() / n;
        println!("alpha {alpha:>3.1}: mean ({mx:.3}, {my:.3})");
    }

    // A CFG spec without its unconditional model is rejected before sampling.
    let mut broken = CompositionSpec::cfg(uncond, vec![CompositionEntry::new(cond, None, 1.0)]);
    broken.unconditional = None;
    if let Err(report) = validate_spec(&broken) {
        println!("rejected: {report}");
    }
    Ok(())
}
