//! Sample a composed 2-D policy stand-in and render the final points as SVG.
//!
//! `cargo run --example scatter_report -- [out.svg]`

use std::sync::Arc;

use composable_diffusion::compose::{CompositionEntry, CompositionSpec};
use composable_diffusion::models::{GaussianDataScore, ScoreModel};
use composable_diffusion::report::{point_moments, read_samples_csv, scatter_svg, write_samples_csv, ScatterStyle};
use composable_diffusion::sampler::{sample_composed, SamplerConfig};
use composable_diffusion::schedule::NoiseSchedule;

fn main() -> composable_diffusion::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "composed.svg".into());
    let schedule = NoiseSchedule::default();
    let a: Arc<dyn ScoreModel> = Arc::new(GaussianDataScore::new(vec![0.4, -0.2], 0.1, schedule.clone())?);
    let b: Arc<dyn ScoreModel> = Arc::new(GaussianDataScore::new(vec![-0.2, 0.3], 0.1, schedule.clone())?);
    let spec = CompositionSpec::mcdp(vec![CompositionEntry::new(a, None, 0.6), CompositionEntry::new(b, None, 0.4)]);
    let samples = sample_composed(&spec, &SamplerConfig::new(schedule, 0, 500))?;
    let table = read_samples_csv(&write_samples_csv(&samples)?)?;
    let points = table.final_points()?;
    let (mean, std) = point_moments(&points);
    println!("mean ({:.3}, {:.3}) std ({:.3}, {:.3})", mean[0], mean[1], std[0], std[1]);
    let style = ScatterStyle { title: "MCDP 0.6 / 0.4".into(), annotation: "weights (0.6, 0.4)".into(), bounds: None };
    std::fs::write(&out, scatter_svg(&points, &style)?)?;
    println!("wrote {out}");
    Ok(())
}
