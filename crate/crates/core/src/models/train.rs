//! Epsilon-prediction training: `E |eps - eps_theta(sqrt(ab) tau_0 + sqrt(1-ab) eps, t, c)|^2`.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::rng::{Domain, Draws, RngStream};
use crate::schedule::NoiseSchedule;
use crate::trajectory::{Condition, Trajectory};

use super::checkpoint::{Checkpoint, TrainMeta};
use super::denoiser::{DenoiserArch, DenoiserNet, NetGradients};

/// Samples per gradient chunk. Chunks are summed in index order, so the result
/// does not depend on how many threads evaluate them.
const CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub trajectory: Trajectory,
    pub condition: Condition,
}

/// One noised training example: `(tau_0, c)` plus its drawn `(t, eps)`.
#[derive(Clone, Debug)]
pub struct TrainingSample<'a> {
    pub demo: &'a Demonstration,
    pub t: usize,
    pub noise: Vec<f64>,
}

pub fn draw_training_samples<'a>(
    dataset: &'a [Demonstration],
    schedule: &NoiseSchedule,
    batch_size: usize,
    draws: &mut Draws,
) -> Vec<TrainingSample<'a>> {
    (0..batch_size)
        .map(|_| {
            let demo = &dataset[draws.index(dataset.len())];
            let t = draws.int_inclusive(1, schedule.num_steps());
            let noise = draws.normal_vec(demo.trajectory.len());
            TrainingSample { demo, t, noise }
        })
        .collect()
}

fn noised_input(net: &DenoiserNet, schedule: &NoiseSchedule, s: &TrainingSample<'_>) -> Result<Vec<f64>> {
    check_len("training noise", s.demo.trajectory.len(), s.noise.len())?;
    let (a, b) = schedule.forward_marginal(s.t)?;
    let tau_t: Vec<f64> = s
        .demo
        .trajectory
        .values()
        .iter()
        .zip(&s.noise)
        .map(|(x0, e)| a * x0 + b * e)
        .collect();
    net.assemble_input(&tau_t, s.t, s.demo.condition.features())
}

/// Mean squared error over batch and output coordinates.
pub fn denoiser_loss(net: &DenoiserNet, schedule: &NoiseSchedule, batch: &[TrainingSample<'_>]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let mut total = 0.0;
    for s in batch {
        let out = net.forward_input(noised_input(net, schedule, s)?);
        total += out.iter().zip(&s.noise).map(|(o, e)| (o - e).powi(2)).sum::<f64>();
    }
    Ok(total / (batch.len() * net.arch().output_dim()) as f64)
}

/// Loss and exact parameter gradients for one batch.
pub fn denoiser_backward(
    net: &DenoiserNet,
    schedule: &NoiseSchedule,
    batch: &[TrainingSample<'_>],
) -> Result<(f64, NetGradients)> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch"));
    }
    let scale = 1.0 / (batch.len() * net.arch().output_dim()) as f64;
    let partials: Vec<Result<(f64, NetGradients)>> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut grads = NetGradients::zeros_like(net);
            let mut sq = 0.0;
            for s in chunk {
                let (out, cache) = net.forward_cached(noised_input(net, schedule, s)?);
                let d_out: Vec<f64> = out
                    .iter()
                    .zip(&s.noise)
                    .map(|(o, e)| {
                        sq += (o - e).powi(2);
                        2.0 * (o - e) * scale
                    })
                    .collect();
                net.backward(&cache, d_out, &mut grads);
            }
            Ok((sq, grads))
        })
        .collect();

    let mut total = 0.0;
    let mut grads = NetGradients::zeros_like(net);
    for p in partials {
        let (sq, g) = p?;
        total += sq;
        grads.add_assign(&g);
    }
    Ok((total * scale, grads))
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: NetGradients,
    v: NetGradients,
}

impl Adam {
    pub fn new(net: &DenoiserNet, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: NetGradients::zeros_like(net),
            v: NetGradients::zeros_like(net),
        }
    }

    pub fn step(&mut self, net: &mut DenoiserNet, grads: &NetGradients) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for (((layer, g), m), v) in net
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weights.iter().chain(&g.bias);
            let ms = m.weights.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weights.iter_mut().chain(v.bias.iter_mut());
            for (((p, &g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub freqs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            steps: 20_000,
            batch_size: 256,
            learning_rate: 1e-3,
            hidden: vec![128, 128],
            freqs: 8,
        }
    }
}

const INIT_TAG: u64 = 0x696e_6974;
const BATCH_TAG: u64 = 0x6261_7463;

pub fn train_denoiser(dataset: &[Demonstration], schedule: &NoiseSchedule, config: &TrainConfig) -> Result<Checkpoint> {
    train_denoiser_with(dataset, schedule, config, |_, _| {})
}

/// As [`train_denoiser`], calling `observe(step, loss)` after every step.
pub fn train_denoiser_with(
    dataset: &[Demonstration],
    schedule: &NoiseSchedule,
    config: &TrainConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<Checkpoint> {
    let first = dataset.first().ok_or(Error::Empty("training dataset"))?;
    let shape = first.trajectory.shape();
    let cond_dim = first.condition.features().len();
    let modality = first.condition.modality_id().to_string();
    for (i, d) in dataset.iter().enumerate() {
        if d.trajectory.shape() != shape || d.condition.features().len() != cond_dim {
            return Err(Error::InvalidParameter(format!(
                "demonstration {i} does not match the layout of demonstration 0"
            )));
        }
        if d.condition.modality_id() != modality {
            return Err(Error::InvalidParameter(format!(
                "demonstration {i} has modality {} but the dataset is {modality}",
                d.condition.modality_id()
            )));
        }
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidParameter("batch_size must be positive".into()));
    }
    if !(config.learning_rate > 0.0) {
        return Err(Error::InvalidParameter("learning_rate must be positive".into()));
    }

    let arch = DenoiserArch {
        hidden: config.hidden.clone(),
        freqs: config.freqs,
        ..DenoiserArch::standard(shape, cond_dim)
    };
    let stream = RngStream::new(config.seed);
    let mut net = DenoiserNet::init(arch, stream.derive(INIT_TAG).seed());
    let mut adam = Adam::new(&net, config.learning_rate);
    let batches = stream.derive(BATCH_TAG);

    let mut losses = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let mut draws = batches.draws(Domain::Training, 0, step as u64);
        let batch = draw_training_samples(dataset, schedule, config.batch_size, &mut draws);
        let (loss, grads) = denoiser_backward(&net, schedule, &batch)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        adam.step(&mut net, &grads);
        losses.push(loss);
        observe(step, loss);
    }

    let window = (config.steps / 10).max(1);
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let (initial_loss, final_loss) = if losses.is_empty() {
        (None, None)
    } else {
        (
            Some(mean(&losses[..window.min(losses.len())])),
            Some(mean(&losses[losses.len() - window.min(losses.len())..])),
        )
    };

    Ok(Checkpoint::new(
        modality,
        schedule.clone(),
        net,
        TrainMeta {
            seed: config.seed,
            steps: config.steps as u64,
            final_loss,
            initial_loss,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::denoiser::Activation;
    use crate::trajectory::TrajShape;

    fn point_mass_dataset(n: usize) -> Vec<Demonstration> {
        let traj = Trajectory::new(vec![0.3, -0.2, 0.5, 0.1], TrajShape::new(2, 2)).unwrap();
        let cond = Condition::new("A", vec![0.5, 0.1]).unwrap();
        (0..n)
            .map(|_| Demonstration { trajectory: traj.clone(), condition: cond.clone() })
            .collect()
    }

    #[test]
    fn empty_batch_is_an_error() {
        let net = DenoiserNet::zeros(DenoiserArch::standard(TrajShape::new(2, 2), 2));
        let s = NoiseSchedule::default();
        assert!(matches!(denoiser_backward(&net, &s, &[]), Err(Error::Empty(_))));
        assert!(train_denoiser(&[], &s, &TrainConfig::default()).is_err());
    }

    #[test]
    fn backward_loss_matches_forward_loss_and_is_reproducible() {
        let data = point_mass_dataset(4);
        let s = NoiseSchedule::default();
        let arch = DenoiserArch {
            horizon: 2,
            action_dim: 2,
            cond_dim: 2,
            hidden: vec![8, 8],
            freqs: 2,
            activation: Activation::Silu,
        };
        let net = DenoiserNet::init(arch, 1);
        let stream = RngStream::new(9);
        let batch = draw_training_samples(&data, &s, 40, &mut stream.draws(Domain::Training, 0, 0));
        let batch2 = draw_training_samples(&data, &s, 40, &mut stream.draws(Domain::Training, 0, 0));
        let (l1, g1) = denoiser_backward(&net, &s, &batch).unwrap();
        let (l2, g2) = denoiser_backward(&net, &s, &batch2).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
        let lf = denoiser_loss(&net, &s, &batch).unwrap();
        assert!((l1 - lf).abs() < 1e-12 * lf.max(1.0));
        assert!(l1 >= 0.0);
    }

    #[test]
    fn zero_steps_returns_initialisation() {
        let data = point_mass_dataset(3);
        let s = NoiseSchedule::default();
        let cfg = TrainConfig { steps: 0, hidden: vec![8], ..TrainConfig::default() };
        let ckpt = train_denoiser(&data, &s, &cfg).unwrap();
        let arch = DenoiserArch { hidden: vec![8], ..DenoiserArch::standard(TrajShape::new(2, 2), 2) };
        let init = DenoiserNet::init(arch, RngStream::new(0).derive(INIT_TAG).seed());
        assert_eq!(ckpt.net(), &init);
        assert_eq!(ckpt.meta().final_loss, None);
    }

    #[test]
    fn mixed_modalities_are_rejected() {
        let mut data = point_mass_dataset(2);
        data[1].condition = Condition::new("B", vec![0.0, 0.0]).unwrap();
        assert!(train_denoiser(&data, &NoiseSchedule::default(), &TrainConfig::default()).is_err());
    }
}
