//! Score models: anything mapping `(tau_t, t, condition)` to a noise estimate.

mod analytic;
mod checkpoint;
mod denoiser;
mod train;

pub use analytic::{
    energy_grad, gaussian_eps, mixture_eps, GaussianDataScore, MixtureComponent, MixtureDataScore,
    QuadraticEnergy,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainMeta, CHECKPOINT_VERSION};
pub use denoiser::{
    denoiser_forward, time_embedding, Activation, DenoiserArch, DenoiserNet, DenseLayer,
    NetGradients,
};
pub use train::{
    denoiser_backward, denoiser_loss, draw_training_samples, train_denoiser, train_denoiser_with, Adam, Demonstration,
    TrainConfig, TrainingSample,
};

use crate::error::Result;
use crate::schedule::NoiseSchedule;
use crate::trajectory::{Condition, TrajShape, Trajectory};

/// Predicts the noise `eps` present in `tau_t`.
///
/// Implementations must be deterministic in their inputs and return a vector
/// of the same length as `tau_t`. The estimate relates to the score of the
/// diffused density by `eps = -sqrt(1 - alpha_bar_t) * grad log p_t(tau_t)`.
pub trait ScoreModel: Send + Sync {
    fn predict_eps(&self, tau_t: &Trajectory, t: usize, cond: Option<&Condition>) -> Result<Vec<f64>>;

    fn schedule(&self) -> &NoiseSchedule;

    fn shape(&self) -> TrajShape;

    /// Short human-readable label for reports and error messages.
    fn label(&self) -> String;
}
