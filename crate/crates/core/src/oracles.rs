//! Closed-form checks run by `cdiff check`.

use std::sync::Arc;
use std::time::Instant;

use crate::compose::{compose_cfg, CompositionEntry, CompositionSpec};
use crate::error::Result;
use crate::models::{
    denoiser_backward, denoiser_loss, Activation, Demonstration, DenoiserArch, DenoiserNet, GaussianDataScore,
    MixtureComponent, MixtureDataScore, QuadraticEnergy, ScoreModel, TrainingSample,
};
use crate::rng::{Domain, RngStream};
use crate::sampler::{
    ddim_sigma, histogram_tv, langevin_ebm_sample, reverse_density_1d, sample_composed, sample_single, DensityGrid,
    LangevinConfig, SamplerConfig,
};
use crate::schedule::NoiseSchedule;
use crate::trajectory::{Condition, Trajectory};

#[derive(Clone, Debug, PartialEq)]
pub struct OracleOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
    pub tolerance: String,
    pub seconds: f64,
}

pub struct Oracle {
    pub name: &'static str,
    pub description: &'static str,
    run: fn() -> Result<(bool, String, String)>,
}

impl Oracle {
    pub fn run(&self) -> OracleOutcome {
        let start = Instant::now();
        let (passed, measured, tolerance) = match (self.run)() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}"), String::new()),
        };
        OracleOutcome {
            name: self.name,
            passed,
            measured,
            tolerance,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

pub fn all_oracles() -> Vec<Oracle> {
    vec![
        Oracle { name: "schedule-brute-force", description: "coefficients vs. products recomputed from betas", run: schedule_brute_force },
        Oracle { name: "gaussian-composition", description: "MCDP of N((-1,0),0.2^2) and N((1,0),0.2^2) at (0.5,0.5)", run: gaussian_composition },
        Oracle { name: "weight-interpolation", description: "composed mean tracks w1*(-1)+(1-w1)*(+1) over the grid", run: weight_interpolation },
        Oracle { name: "degeneracy", description: "single-entry composition equals single-model sampling bitwise", run: degeneracy },
        Oracle { name: "cfg-algebra", description: "cfg collapses to conditional at w=1, unconditional at w=0", run: cfg_algebra },
        Oracle { name: "score-energy", description: "gaussian eps equals scaled quadratic-energy gradient", run: score_energy },
        Oracle { name: "ddim-sigma", description: "ddim sigma at eta=1 equals ancestral noise scale", run: ddim_identity },
        Oracle { name: "density-oracle", description: "Monte Carlo histograms vs. transfer-matrix densities (TV)", run: density_oracle },
        Oracle { name: "energy-langevin", description: "Langevin on two quadratic energies hits the product's moments", run: energy_langevin },
        Oracle { name: "gradient-check", description: "denoiser backprop vs. central finite differences", run: gradient_check },
    ]
}

fn gauss(mean: Vec<f64>, std: f64) -> Result<Arc<dyn ScoreModel>> {
    Ok(Arc::new(GaussianDataScore::new(mean, std, NoiseSchedule::default())?))
}

fn two_gaussian_spec(w1: f64) -> Result<CompositionSpec> {
    Ok(CompositionSpec::mcdp(vec![
        CompositionEntry::new(gauss(vec![-1.0, 0.0], 0.2)?, None, w1),
        CompositionEntry::new(gauss(vec![1.0, 0.0], 0.2)?, None, 1.0 - w1),
    ]))
}

fn moments(samples: &[Trajectory], axis: usize) -> (f64, f64) {
    let n = samples.len() as f64;
    let m = samples.iter().map(|s| s.values()[axis]).sum::<f64>() / n;
    let v = samples.iter().map(|s| (s.values()[axis] - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn schedule_brute_force() -> Result<(bool, String, String)> {
    let s = NoiseSchedule::default();
    let mut worst: f64 = 0.0;
    for t in 1..=s.num_steps() {
        let log_ab: f64 = (1..=t).map(|k| (1.0 - s.betas()[k - 1]).ln()).sum();
        let ab = log_ab.exp();
        let c = s.step_coefficients(t)?;
        let rel = |a: f64, b: f64| if b == 0.0 { a.abs() } else { ((a - b) / b).abs() };
        worst = worst
            .max(rel(s.alpha_bar(t)?, ab))
            .max(rel(c.eps_coef, s.betas()[t - 1] / (1.0 - ab).sqrt()))
            .max(rel(c.sqrt_alpha_bar, ab.sqrt()));
    }
    Ok((worst < 1e-12, format!("max rel err {worst:.2e}"), "1e-12".into()))
}

fn gaussian_composition() -> Result<(bool, String, String)> {
    let xs = sample_composed(&two_gaussian_spec(0.5)?, &SamplerConfig::new(NoiseSchedule::default(), 0, 10_000))?;
    let (mx, sx) = moments(&xs, 0);
    let (my, sy) = moments(&xs, 1);
    let ok = mx.abs() < 0.02 && my.abs() < 0.02 && (sx - 0.2).abs() < 0.05 && (sy - 0.2).abs() < 0.05;
    Ok((ok, format!("mean ({mx:.4}, {my:.4}) std ({sx:.4}, {sy:.4})"), "mean 0.02, std 0.05".into()))
}

fn weight_interpolation() -> Result<(bool, String, String)> {
    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let w1 = k as f64 / 10.0;
        let xs = sample_composed(&two_gaussian_spec(w1)?, &SamplerConfig::new(NoiseSchedule::default(), 0, 10_000))?;
        let target = -w1 + (1.0 - w1);
        worst = worst.max((moments(&xs, 0).0 - target).abs());
    }
    Ok((worst < 0.03, format!("max |mean_x - target| {worst:.4}"), "0.03".into()))
}

fn degeneracy() -> Result<(bool, String, String)> {
    let m = gauss(vec![0.4, -0.7], 0.3)?;
    let cfg = SamplerConfig::new(NoiseSchedule::default(), 11, 100);
    let a = sample_composed(&CompositionSpec::single(m.clone(), None), &cfg)?;
    let b = sample_single(m.as_ref(), None, &cfg)?;
    let same = a
        .iter()
        .zip(&b)
        .all(|(x, y)| x.values().iter().zip(y.values()).all(|(p, q)| p.to_bits() == q.to_bits()));
    Ok((same, format!("{} chains bitwise {}", a.len(), if same { "equal" } else { "different" }), "bitwise".into()))
}

fn cfg_algebra() -> Result<(bool, String, String)> {
    let u = gauss(vec![0.0, 0.0], 1.0)?;
    let c = gauss(vec![0.8, -0.3], 0.2)?;
    let tau = Trajectory::point(vec![0.35, 0.9])?;
    let mut worst: f64 = 0.0;
    for t in [1, 50, 100] {
        let eu = u.predict_eps(&tau, t, None)?;
        let ec = c.predict_eps(&tau, t, None)?;
        let one = compose_cfg(&eu, &[&ec], &[1.0])?;
        let zero = compose_cfg(&eu, &[&ec, &ec], &[0.0, 0.0])?;
        for i in 0..2 {
            worst = worst.max((one[i] - ec[i]).abs()).max((zero[i] - eu[i]).abs());
        }
    }
    Ok((worst <= 1e-12, format!("max abs err {worst:.2e}"), "1e-12".into()))
}

fn score_energy() -> Result<(bool, String, String)> {
    let s = NoiseSchedule::default();
    let mu = vec![0.3, -0.6];
    let g = GaussianDataScore::new(mu.clone(), 0.25, s.clone())?;
    let tau = [0.1, 0.45];
    let mut worst: f64 = 0.0;
    for t in [1, 10, 60, 100] {
        let ab = s.alpha_bar(t)?;
        let e = QuadraticEnergy::new(mu.iter().map(|m| ab.sqrt() * m).collect(), 1.0 / (ab * 0.0625 + 1.0 - ab))?;
        let grad = e.grad(&tau)?;
        let eps = g.eps(&tau, t)?;
        for i in 0..2 {
            worst = worst.max((eps[i] - (1.0 - ab).sqrt() * grad[i]).abs());
        }
    }
    Ok((worst < 1e-12, format!("max abs err {worst:.2e}"), "1e-12".into()))
}

fn ddim_identity() -> Result<(bool, String, String)> {
    let s = NoiseSchedule::default();
    let mut worst: f64 = 0.0;
    for t in 1..=s.num_steps() {
        worst = worst.max((ddim_sigma(&s, t, 1.0)? - s.step_coefficients(t)?.noise_std).abs());
    }
    Ok((worst < 1e-12, format!("max abs err {worst:.2e}"), "1e-12".into()))
}

/// The 1D test matrix shared by the density oracle.
pub fn density_test_matrix() -> Result<Vec<(String, CompositionSpec)>> {
    let s = NoiseSchedule::default();
    let g = |m: f64| -> Result<Arc<dyn ScoreModel>> { Ok(Arc::new(GaussianDataScore::new(vec![m], 0.2, s.clone())?)) };
    let mut out = vec![("gaussian(0.3, 0.2)".to_string(), CompositionSpec::single(g(0.3)?, None))];
    for w in [0.3, 0.5, 0.7] {
        out.push((
            format!("mcdp w={w}"),
            CompositionSpec::mcdp(vec![
                CompositionEntry::new(g(-1.0)?, None, w),
                CompositionEntry::new(g(1.0)?, None, 1.0 - w),
            ]),
        ));
    }
    let mix = MixtureDataScore::new(
        vec![
            MixtureComponent { weight: 0.5, mean: vec![-1.0], std: 0.2 },
            MixtureComponent { weight: 0.5, mean: vec![1.0], std: 0.2 },
        ],
        s,
    )?;
    out.push(("mixture(+-1, 0.2)".into(), CompositionSpec::single(Arc::new(mix), None)));
    Ok(out)
}

fn density_oracle() -> Result<(bool, String, String)> {
    let s = NoiseSchedule::default();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (label, spec) in density_test_matrix()? {
        let oracle = reverse_density_1d(&spec, &s, &DensityGrid::default())?;
        let xs = sample_composed(&spec, &SamplerConfig::new(s.clone(), 0, 50_000))?;
        let xs: Vec<f64> = xs.iter().map(|t| t.values()[0]).collect();
        let tv = histogram_tv(&xs, &oracle, 50)?;
        worst = worst.max(tv);
        parts.push(format!("{label}: {tv:.4}"));
    }
    Ok((worst < 0.05, parts.join("; "), "TV 0.05".into()))
}

fn energy_langevin() -> Result<(bool, String, String)> {
    let lambda = 4.0;
    let e1 = QuadraticEnergy::new(vec![-1.0, 0.5], lambda)?;
    let e2 = QuadraticEnergy::new(vec![1.0, 1.5], lambda)?;
    let lc = LangevinConfig::new(0.01, 1000);
    let xs = langevin_ebm_sample(&[e1, e2], &lc, &SamplerConfig::new(NoiseSchedule::default(), 0, 10_000))?;
    let total = 2.0 * lambda;
    let var_exact = 2.0 / (total * (2.0 - lc.step_size * total));
    let target = [0.0, 1.0];
    let n = xs.len() as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for a in 0..2 {
        let m = xs.iter().map(|x| x[a]).sum::<f64>() / n;
        let v = xs.iter().map(|x| (x[a] - m).powi(2)).sum::<f64>() / (n - 1.0);
        ok &= (m - target[a]).abs() < 0.02 && (v / var_exact - 1.0).abs() < 0.1;
        parts.push(format!("axis {a}: mean {m:.4} var {v:.4}"));
    }
    parts.push(format!("target var {var_exact:.4}"));
    Ok((ok, parts.join(", "), "mean 0.02, var 10%".into()))
}

/// Largest relative gap between backprop and central differences over all parameters.
pub fn max_gradient_rel_error(arch: DenoiserArch, seed: u64) -> Result<f64> {
    let s = NoiseSchedule::default();
    let mut net = DenoiserNet::init(arch.clone(), seed);
    let rng = RngStream::new(seed);
    let mut d = rng.draws(Domain::Init, 99, 0);
    for l in net.layers_mut() {
        for b in &mut l.bias {
            *b = d.uniform_in(-0.5, 0.5);
        }
    }
    let shape = arch.shape();
    let demos: Vec<Demonstration> = (0..3)
        .map(|_| -> Result<Demonstration> {
            Ok(Demonstration {
                trajectory: Trajectory::new(d.normal_vec(shape.len()), shape)?,
                condition: Condition::new("A", d.normal_vec(arch.cond_dim))?,
            })
        })
        .collect::<Result<_>>()?;
    let batch: Vec<TrainingSample<'_>> = demos
        .iter()
        .map(|demo| TrainingSample { demo, t: d.int_inclusive(1, s.num_steps()), noise: d.normal_vec(shape.len()) })
        .collect();
    let (_, grads) = denoiser_backward(&net, &s, &batch)?;
    let analytic = grads.flat();
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for (k, &an) in analytic.iter().enumerate() {
        let mut plus = net.clone();
        *plus.params_mut().nth(k).expect("param index") += h;
        let mut minus = net.clone();
        *minus.params_mut().nth(k).expect("param index") -= h;
        let fd = (denoiser_loss(&plus, &s, &batch)? - denoiser_loss(&minus, &s, &batch)?) / (2.0 * h);
        let denom = an.abs().max(fd.abs()).max(1e-6);
        worst = worst.max((an - fd).abs() / denom);
    }
    Ok(worst)
}

/// Three small architectures used by the gradient oracle.
pub fn gradient_test_archs() -> Vec<DenoiserArch> {
    let mk = |h, d, c, hidden: Vec<usize>, f| DenoiserArch {
        horizon: h,
        action_dim: d,
        cond_dim: c,
        hidden,
        freqs: f,
        activation: Activation::Silu,
    };
    vec![mk(2, 2, 2, vec![6, 5], 2), mk(1, 3, 0, vec![4], 1), mk(3, 1, 1, vec![5, 3, 4], 3)]
}

fn gradient_check() -> Result<(bool, String, String)> {
    let mut worst: f64 = 0.0;
    for (i, arch) in gradient_test_archs().into_iter().enumerate() {
        for input_seed in 0..3 {
            worst = worst.max(max_gradient_rel_error(arch.clone(), 100 * i as u64 + input_seed)?);
        }
    }
    Ok((worst < 1e-4, format!("max rel err {worst:.2e}"), "1e-4".into()))
}
