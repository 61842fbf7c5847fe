//! Closed-form score models used as oracles.

use crate::error::{check_len, Error, Result};
use crate::schedule::NoiseSchedule;
use crate::trajectory::{Condition, TrajShape, Trajectory};

use super::ScoreModel;

/// Data distributed as `N(mean, data_std^2 I)`, diffused by `schedule`.
#[derive(Clone, Debug)]
pub struct GaussianDataScore {
    mean: Vec<f64>,
    data_std: f64,
    shape: TrajShape,
    schedule: NoiseSchedule,
}

impl GaussianDataScore {
    pub fn new(mean: Vec<f64>, data_std: f64, schedule: NoiseSchedule) -> Result<Self> {
        let shape = TrajShape::point(mean.len());
        Self::with_shape(mean, data_std, shape, schedule)
    }

    pub fn with_shape(mean: Vec<f64>, data_std: f64, shape: TrajShape, schedule: NoiseSchedule) -> Result<Self> {
        if !(data_std > 0.0 && data_std.is_finite()) {
            return Err(Error::InvalidParameter(format!("data_std must be positive, got {data_std}")));
        }
        check_len("gaussian mean", shape.len(), mean.len())?;
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParameter("gaussian mean is not finite".into()));
        }
        Ok(Self {
            mean,
            data_std,
            shape,
            schedule,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn data_std(&self) -> f64 {
        self.data_std
    }

    /// Exact noise estimate for the diffused Gaussian.
    pub fn eps(&self, tau_t: &[f64], t: usize) -> Result<Vec<f64>> {
        check_len("gaussian_eps", self.mean.len(), tau_t.len())?;
        let ab = self.schedule.alpha_bar(t)?;
        self.schedule.check_timestep(t)?;
        let sqrt_ab = ab.sqrt();
        let sqrt_1mab = (1.0 - ab).sqrt();
        let var = ab * self.data_std * self.data_std + (1.0 - ab);
        Ok(tau_t
            .iter()
            .zip(&self.mean)
            .map(|(x, m)| sqrt_1mab * (x - sqrt_ab * m) / var)
            .collect())
    }
}

pub fn gaussian_eps(model: &GaussianDataScore, tau_t: &Trajectory, t: usize) -> Result<Vec<f64>> {
    model.eps(tau_t.values(), t)
}

impl ScoreModel for GaussianDataScore {
    fn predict_eps(&self, tau_t: &Trajectory, t: usize, _cond: Option<&Condition>) -> Result<Vec<f64>> {
        self.eps(tau_t.values(), t)
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn shape(&self) -> TrajShape {
        self.shape
    }

    fn label(&self) -> String {
        format!("gauss(mean={:?}, std={})", self.mean, self.data_std)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: f64,
}

/// Gaussian-mixture data; each component diffuses independently.
#[derive(Clone, Debug)]
pub struct MixtureDataScore {
    components: Vec<MixtureComponent>,
    shape: TrajShape,
    schedule: NoiseSchedule,
}

impl MixtureDataScore {
    pub fn new(components: Vec<MixtureComponent>, schedule: NoiseSchedule) -> Result<Self> {
        let first = components
            .first()
            .ok_or(Error::Empty("mixture components"))?;
        let dim = first.mean.len();
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            check_len("mixture component mean", dim, c.mean.len())?;
            if !(c.weight > 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidParameter(format!("component {k} weight {} must be positive", c.weight)));
            }
            if !(c.std > 0.0 && c.std.is_finite()) {
                return Err(Error::InvalidParameter(format!("component {k} std {} must be positive", c.std)));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self {
            components,
            shape: TrajShape::point(dim),
            schedule,
        })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn eps(&self, tau_t: &[f64], t: usize) -> Result<Vec<f64>> {
        check_len("mixture_eps", self.shape.len(), tau_t.len())?;
        self.schedule.check_timestep(t)?;
        let ab = self.schedule.alpha_bar(t)?;
        let sqrt_ab = ab.sqrt();
        let sqrt_1mab = (1.0 - ab).sqrt();
        let dim = tau_t.len() as f64;

        let vars: Vec<f64> = self
            .components
            .iter()
            .map(|c| ab * c.std * c.std + (1.0 - ab))
            .collect();
        let log_dens: Vec<f64> = self
            .components
            .iter()
            .zip(&vars)
            .map(|(c, &var)| {
                let sq: f64 = tau_t
                    .iter()
                    .zip(&c.mean)
                    .map(|(x, m)| (x - sqrt_ab * m).powi(2))
                    .sum();
                c.weight.ln() - 0.5 * dim * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * sq / var
            })
            .collect();
        let max = log_dens.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = log_dens.iter().map(|l| (l - max).exp()).sum();

        let mut eps = vec![0.0; tau_t.len()];
        for ((c, &var), &ld) in self.components.iter().zip(&vars).zip(&log_dens) {
            let r = (ld - max).exp() / norm;
            for ((e, x), m) in eps.iter_mut().zip(tau_t).zip(&c.mean) {
                *e += r * (sqrt_1mab * (x - sqrt_ab * m) / var);
            }
        }
        Ok(eps)
    }
}

pub fn mixture_eps(model: &MixtureDataScore, tau_t: &Trajectory, t: usize) -> Result<Vec<f64>> {
    model.eps(tau_t.values(), t)
}

impl ScoreModel for MixtureDataScore {
    fn predict_eps(&self, tau_t: &Trajectory, t: usize, _cond: Option<&Condition>) -> Result<Vec<f64>> {
        self.eps(tau_t.values(), t)
    }

    fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    fn shape(&self) -> TrajShape {
        self.shape
    }

    fn label(&self) -> String {
        format!("mixture({} components)", self.components.len())
    }
}

/// `E(tau) = 0.5 * inv_variance * |tau - mean|^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticEnergy {
    mean: Vec<f64>,
    inv_variance: f64,
}

impl QuadraticEnergy {
    pub fn new(mean: Vec<f64>, inv_variance: f64) -> Result<Self> {
        if !(inv_variance > 0.0 && inv_variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "inv_variance must be positive, got {inv_variance}"
            )));
        }
        Ok(Self { mean, inv_variance })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn inv_variance(&self) -> f64 {
        self.inv_variance
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn energy(&self, tau: &[f64]) -> Result<f64> {
        check_len("energy", self.mean.len(), tau.len())?;
        let sq: f64 = tau.iter().zip(&self.mean).map(|(x, m)| (x - m).powi(2)).sum();
        Ok(0.5 * self.inv_variance * sq)
    }

    pub fn grad(&self, tau: &[f64]) -> Result<Vec<f64>> {
        check_len("energy_grad", self.mean.len(), tau.len())?;
        Ok(tau
            .iter()
            .zip(&self.mean)
            .map(|(x, m)| self.inv_variance * (x - m))
            .collect())
    }
}

pub fn energy_grad(model: &QuadraticEnergy, tau: &Trajectory) -> Result<Vec<f64>> {
    model.grad(tau.values())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> NoiseSchedule {
        NoiseSchedule::default()
    }

    #[test]
    fn gaussian_eps_vanishes_at_marginal_mean() {
        let g = GaussianDataScore::new(vec![0.3, -0.7], 0.4, sched()).unwrap();
        for t in [1, 17, 100] {
            let sab = sched().alpha_bar(t).unwrap().sqrt();
            let tau: Vec<f64> = g.mean().iter().map(|m| sab * m).collect();
            let eps = g.eps(&tau, t).unwrap();
            assert!(eps.iter().all(|e| e.abs() < 1e-15), "{eps:?}");
        }
    }

    #[test]
    fn gaussian_eps_unit_variance_case() {
        let s = sched();
        let g = GaussianDataScore::new(vec![0.5], 1.0, s.clone()).unwrap();
        for t in [1, 50, 100] {
            let ab = s.alpha_bar(t).unwrap();
            let x = 0.9;
            let expected = (1.0 - ab).sqrt() * (x - ab.sqrt() * 0.5);
            assert!((g.eps(&[x], t).unwrap()[0] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn gaussian_eps_point_mass_limit() {
        let s = sched();
        let g = GaussianDataScore::new(vec![0.0], 1e-9, s.clone()).unwrap();
        let t = 40;
        let ab = s.alpha_bar(t).unwrap();
        let x = 0.37;
        let e = g.eps(&[x], t).unwrap()[0];
        assert!((e - x / (1.0 - ab).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn gaussian_shape_mismatch() {
        let g = GaussianDataScore::new(vec![0.0, 0.0], 0.2, sched()).unwrap();
        assert!(matches!(g.eps(&[0.0], 3), Err(Error::ShapeMismatch { .. })));
        assert!(g.eps(&[0.0, 0.0], 0).is_err());
    }

    #[test]
    fn one_component_mixture_is_gaussian() {
        let s = sched();
        let g = GaussianDataScore::new(vec![0.2, -0.4], 0.3, s.clone()).unwrap();
        let m = MixtureDataScore::new(
            vec![MixtureComponent { weight: 1.0, mean: vec![0.2, -0.4], std: 0.3 }],
            s,
        )
        .unwrap();
        for t in [1, 30, 100] {
            let tau = [0.71, -1.3];
            let a = g.eps(&tau, t).unwrap();
            let b = m.eps(&tau, t).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_mixture_is_zero_at_origin() {
        let m = MixtureDataScore::new(
            vec![
                MixtureComponent { weight: 0.5, mean: vec![-1.0], std: 0.2 },
                MixtureComponent { weight: 0.5, mean: vec![1.0], std: 0.2 },
            ],
            sched(),
        )
        .unwrap();
        for t in [1, 10, 100] {
            assert!(m.eps(&[0.0], t).unwrap()[0].abs() < 1e-15);
        }
    }

    // Diffused density tabulated by quadrature of data density times the
    // forward kernel, then differentiated by central differences.
    #[test]
    fn mixture_eps_matches_numerical_log_density_derivative() {
        let s = sched();
        let t = 100;
        let ab = s.alpha_bar(t).unwrap();
        let comps = [(0.5, -1.0, 0.2), (0.5, 1.0, 0.2)];
        let m = MixtureDataScore::new(
            comps
                .iter()
                .map(|&(w, mu, sd)| MixtureComponent { weight: w, mean: vec![mu], std: sd })
                .collect(),
            s,
        )
        .unwrap();

        let normal = |x: f64, mu: f64, sd: f64| {
            (-(x - mu).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        let data_density = |x0: f64| comps.iter().map(|&(w, mu, sd)| w * normal(x0, mu, sd)).sum::<f64>();
        let diffused = |x: f64| {
            let (lo, hi, n) = (-3.0, 3.0, 60_000);
            let dx = (hi - lo) / n as f64;
            (0..n)
                .map(|i| {
                    let x0 = lo + (i as f64 + 0.5) * dx;
                    data_density(x0) * normal(x, ab.sqrt() * x0, (1.0 - ab).sqrt())
                })
                .sum::<f64>()
                * dx
        };
        let x = 0.5;
        let h = 1e-4;
        let dlog = (diffused(x + h).ln() - diffused(x - h).ln()) / (2.0 * h);
        let expected = -(1.0 - ab).sqrt() * dlog;
        let got = m.eps(&[x], t).unwrap()[0];
        assert!((got - expected).abs() < 1e-6, "got {got}, expected {expected}");
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        let c = |w: f64| MixtureComponent { weight: w, mean: vec![0.0], std: 1.0 };
        assert!(MixtureDataScore::new(vec![c(0.5), c(0.6)], sched()).is_err());
        assert!(MixtureDataScore::new(vec![], sched()).is_err());
        assert!(MixtureDataScore::new(vec![c(-0.5), c(1.5)], sched()).is_err());
    }

    #[test]
    fn energy_gradient_examples() {
        let e = QuadraticEnergy::new(vec![0.0], 4.0).unwrap();
        assert_eq!(e.grad(&[0.5]).unwrap(), vec![2.0]);
        assert_eq!(e.grad(&[0.0]).unwrap(), vec![0.0]);
        assert!(QuadraticEnergy::new(vec![0.0], 0.0).is_err());
        assert!(e.grad(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn energy_gradient_matches_finite_differences() {
        let e = QuadraticEnergy::new(vec![0.3, -1.2, 0.8], 2.5).unwrap();
        let tau = [1.1, 0.4, -0.6];
        let g = e.grad(&tau).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut p = tau;
            let mut m = tau;
            p[i] += h;
            m[i] -= h;
            let fd = (e.energy(&p).unwrap() - e.energy(&m).unwrap()) / (2.0 * h);
            assert!(((fd - g[i]) / g[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn score_energy_consistency() {
        let s = sched();
        let mu = vec![0.4, -0.9];
        let sd = 0.35;
        let g = GaussianDataScore::new(mu.clone(), sd, s.clone()).unwrap();
        let tau = [0.1, 0.25];
        for t in 1..=100 {
            let ab = s.alpha_bar(t).unwrap();
            let energy = QuadraticEnergy::new(
                mu.iter().map(|m| ab.sqrt() * m).collect(),
                1.0 / (ab * sd * sd + 1.0 - ab),
            )
            .unwrap();
            let grad = energy.grad(&tau).unwrap();
            let eps = g.eps(&tau, t).unwrap();
            for (e, gr) in eps.iter().zip(&grad) {
                assert!((e - (1.0 - ab).sqrt() * gr).abs() < 1e-12);
            }
        }
    }
}
