//! Train a small denoiser on one modality of a task family and save it.
//!
//! `cargo run --release --example train_denoiser -- [steps] [out.ckpt]`

use composable_diffusion::bench::{train_policy, TaskFamily};
use composable_diffusion::models::{save_checkpoint, TrainConfig};
use composable_diffusion::schedule::NoiseSchedule;

fn main() -> composable_diffusion::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps = args.next().map_or(Ok(2000), |s| s.parse()).expect("steps must be an integer");
    let out = args.next().unwrap_or_else(|| "reach2d_complementary_A.ckpt".into());
    let family = TaskFamily::by_name("reach2d_complementary")?;
    let config = TrainConfig { steps, ..TrainConfig::default() };
    let ckpt = train_policy(&family, "A", &NoiseSchedule::default(), &config, |step, loss| {
        if step % 500 == 0 {
            println!("step {step:>6} loss {loss:.5}");
        }
    })?;
    save_checkpoint(&ckpt, &out)?;
    println!(
        "saved {out}: loss {:.4} -> {:.4}",
        ckpt.meta().initial_loss.unwrap_or(f64::NAN),
        ckpt.meta().final_loss.unwrap_or(f64::NAN)
    );
    Ok(())
}
