//! Train both modality policies of a family, then sweep the MCDP weight.
//!
//! `cargo run --release --example weight_sweep -- [family] [steps] [episodes]`
//! Full-length training (20000 steps) takes a few minutes per policy.

use composable_diffusion::bench::{run_sweep, summarize, train_policy, Policy, TaskFamily};
use composable_diffusion::models::TrainConfig;
use composable_diffusion::schedule::NoiseSchedule;

fn main() -> composable_diffusion::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let family = TaskFamily::by_name(args.first().map_or("reach2d_complementary", String::as_str))?;
    let steps = args.get(1).map_or(3000, |s| s.parse().expect("steps must be an integer"));
    let episodes = args.get(2).map_or(100, |s| s.parse().expect("episodes must be an integer"));
    let schedule = NoiseSchedule::default();
    let config = TrainConfig { steps, ..TrainConfig::default() };
    let a = train_policy(&family, "A", &schedule, &config, |_, _| {})?;
    let b = train_policy(&family, "B", &schedule, &config, |_, _| {})?;
    let grid: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
    let result = run_sweep(&family, &Policy::from_checkpoint(a), &Policy::from_checkpoint(b), &grid, episodes, &[0, 1, 2, 3, 4])?;
    print!("{}", summarize(&result).table);
    Ok(())
}
