//! Exact density evolution of a 1D ancestral chain on a uniform grid.
//!
//! Mass sits at cell centres. Each step moves a cell's mass to the ancestral
//! mean and spreads it with the step's Gaussian kernel, integrated over the
//! target cells. Binning itself adds `dx^2 / 12` of variance, so the kernel
//! variance is reduced by that amount and the discrete chain keeps the
//! continuous chain's second moment. The final noiseless step maps each cell to
//! the interval between its neighbours' images and spreads it uniformly.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::schedule::NoiseSchedule;
use crate::trajectory::{TrajShape, Trajectory};

use super::EpsSource;

const KERNEL_HALF_WIDTH: f64 = 8.0;
const MAX_LEAKAGE: f64 = 1e-3;
const COVERAGE: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityGrid {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl DensityGrid {
    pub fn new(lo: f64, hi: f64, cells: usize) -> Self {
        Self { lo, hi, cells }
    }

    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.dx()
    }

    pub fn edge(&self, k: usize) -> f64 {
        self.lo + k as f64 * self.dx()
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.center(i)).collect()
    }
}

impl Default for DensityGrid {
    /// `[-6, 6]` in 2000 cells.
    fn default() -> Self {
        Self::new(-COVERAGE, COVERAGE, 2000)
    }
}

#[derive(Clone, Debug)]
pub struct DensityResult {
    pub grid: DensityGrid,
    /// Density at cell centres; `sum(density) * dx = 1`.
    pub density: Vec<f64>,
    /// Mass kept on the grid by each step `T, ..., 1`, before renormalising.
    pub step_masses: Vec<f64>,
    /// Total mass lost off the grid edges.
    pub leaked: f64,
}

impl DensityResult {
    pub fn mean(&self) -> f64 {
        let dx = self.grid.dx();
        self.density.iter().enumerate().map(|(i, p)| p * dx * self.grid.center(i)).sum()
    }

    pub fn variance(&self) -> f64 {
        let dx = self.grid.dx();
        let m = self.mean();
        self.density
            .iter()
            .enumerate()
            .map(|(i, p)| p * dx * (self.grid.center(i) - m).powi(2))
            .sum()
    }
}

fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn check_grid(grid: &DensityGrid, schedule: &NoiseSchedule) -> Result<()> {
    if !(grid.lo.is_finite() && grid.hi.is_finite() && grid.lo < grid.hi && grid.cells >= 2) {
        return Err(Error::Grid(format!("invalid grid {grid:?}")));
    }
    if grid.lo > -COVERAGE || grid.hi < COVERAGE {
        return Err(Error::Grid(format!(
            "grid [{}, {}] must cover [-{COVERAGE}, {COVERAGE}]",
            grid.lo, grid.hi
        )));
    }
    let min_sigma = (2..=schedule.num_steps())
        .map(|t| schedule.step_coefficients(t).map(|c| c.noise_std))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if grid.dx() > min_sigma {
        return Err(Error::Grid(format!(
            "grid too coarse: spacing {:.3e} exceeds smallest step noise scale {min_sigma:.3e}",
            grid.dx()
        )));
    }
    Ok(())
}

/// Deposits `mass` of `N(m, var)` into `out`; returns the mass that fell off the grid.
fn deposit_gaussian(out: &mut [f64], grid: &DensityGrid, mass: f64, m: f64, var: f64) -> f64 {
    let sd = var.sqrt();
    let dx = grid.dx();
    let n = grid.cells;
    let reach = KERNEL_HALF_WIDTH * sd;
    let leaked = mass * (phi((grid.lo - m) / sd) + phi((m - grid.hi) / sd));
    let k0 = (((m - reach - grid.lo) / dx).floor().max(0.0) as usize).min(n);
    let k1 = (((m + reach - grid.lo) / dx).ceil().max(0.0) as usize).min(n);
    if k0 >= k1 {
        return leaked;
    }
    let mut prev = phi((grid.edge(k0) - m) / sd);
    for (k, o) in out.iter_mut().enumerate().take(k1).skip(k0) {
        let next = phi((grid.edge(k + 1) - m) / sd);
        *o += mass * (next - prev);
        prev = next;
    }
    leaked
}

/// Spreads `mass` uniformly over `[a, b]`.
fn deposit_interval(out: &mut [f64], grid: &DensityGrid, mass: f64, a: f64, b: f64) -> f64 {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let dx = grid.dx();
    let width = b - a;
    if width <= 1e-12 * dx {
        let k = ((a - grid.lo) / dx).floor();
        if k >= 0.0 && (k as usize) < grid.cells {
            out[k as usize] += mass;
            return 0.0;
        }
        return mass;
    }
    let n = grid.cells;
    let k0 = (((a - grid.lo) / dx).floor().max(0.0) as usize).min(n);
    let k1 = (((b - grid.lo) / dx).ceil().max(0.0) as usize).min(n);
    let mut placed = 0.0;
    for (k, o) in out.iter_mut().enumerate().take(k1).skip(k0) {
        let overlap = b.min(grid.edge(k + 1)) - a.max(grid.edge(k));
        if overlap > 0.0 {
            let share = mass * overlap / width;
            *o += share;
            placed += share;
        }
    }
    mass - placed
}

/// Evolves `N(0, 1)` backwards through every step of a 1D source.
pub fn reverse_density_1d<S: EpsSource + ?Sized>(source: &S, schedule: &NoiseSchedule, grid: &DensityGrid) -> Result<DensityResult> {
    if source.shape().len() != 1 {
        return Err(Error::ShapeMismatch {
            context: "density oracle source",
            expected: 1,
            found: source.shape().len(),
        });
    }
    check_grid(grid, schedule)?;
    let dx = grid.dx();
    let bin_var = dx * dx / 12.0;
    let mut p = vec![0.0; grid.cells];
    let initial_leak = deposit_gaussian(&mut p, grid, 1.0, 0.0, 1.0 - bin_var);
    let mut total_leak = initial_leak;
    normalise(&mut p);

    let mut step_masses = Vec::with_capacity(schedule.num_steps());
    for t in (1..=schedule.num_steps()).rev() {
        let coef = schedule.step_coefficients(t)?;
        let mut means = Vec::with_capacity(grid.cells);
        for i in 0..grid.cells {
            let x = grid.center(i);
            let eps = source.eps(&Trajectory::from_raw(vec![x], TrajShape::point(1)), t)?[0];
            let m = coef.recip_sqrt_alpha * (x - coef.eps_coef * eps);
            if !m.is_finite() {
                return Err(Error::NonFinite { chain: i, t });
            }
            means.push(m);
        }
        let mut next = vec![0.0; grid.cells];
        for (i, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let m = means[i];
            if coef.noise_std > 0.0 {
                deposit_gaussian(&mut next, grid, mass, m, coef.noise_std.powi(2) - bin_var);
            } else {
                let left = if i > 0 { 0.5 * (means[i - 1] + m) } else { m - 0.5 * (means[1] - m) };
                let right = if i + 1 < grid.cells { 0.5 * (m + means[i + 1]) } else { m + 0.5 * (m - means[i - 1]) };
                deposit_interval(&mut next, grid, mass, left, right);
            }
        }
        let kept: f64 = next.iter().sum();
        step_masses.push(kept);
        total_leak += 1.0 - kept;
        if total_leak > MAX_LEAKAGE {
            return Err(Error::Grid(format!(
                "mass leakage {total_leak:.3e} at step {t} exceeds {MAX_LEAKAGE:e}; widen the grid"
            )));
        }
        normalise(&mut next);
        p = next;
    }
    let density = p.iter().map(|m| m / dx).collect();
    Ok(DensityResult {
        grid: *grid,
        density,
        step_masses,
        leaked: total_leak,
    })
}

fn normalise(p: &mut [f64]) {
    let s: f64 = p.iter().sum();
    for v in p.iter_mut() {
        *v /= s;
    }
}

/// Total-variation distance between a sample histogram and the oracle.
///
/// The `bins` bins are whole multiples of grid cells spanning the oracle's
/// support (tail mass below 1e-5 on each side trimmed); a final bin collects
/// everything outside that span.
pub fn histogram_tv(samples: &[f64], oracle: &DensityResult, bins: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("histogram samples"));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be positive".into()));
    }
    let grid = &oracle.grid;
    let dx = grid.dx();
    let mass: Vec<f64> = oracle.density.iter().map(|d| d * dx).collect();
    let n = mass.len();
    let tail = 1e-5;
    let mut acc = 0.0;
    let mut i0 = 0;
    while i0 < n && acc + mass[i0] < tail {
        acc += mass[i0];
        i0 += 1;
    }
    acc = 0.0;
    let mut i1 = n;
    while i1 > i0 + 1 && acc + mass[i1 - 1] < tail {
        acc += mass[i1 - 1];
        i1 -= 1;
    }
    let per_bin = (i1 - i0).div_ceil(bins);
    let span = per_bin * bins;
    if span > n {
        return Err(Error::Grid(format!("{bins} bins need {span} cells, grid has {n}")));
    }
    let start = i0.saturating_sub((span - (i1 - i0)) / 2).min(n - span);

    let mut q = vec![0.0; bins + 1];
    for (b, qb) in q.iter_mut().take(bins).enumerate() {
        let a = start + b * per_bin;
        *qb = mass[a..a + per_bin].iter().sum();
    }
    q[bins] = (1.0 - q[..bins].iter().sum::<f64>()).max(0.0);

    let lo = grid.edge(start);
    let width = per_bin as f64 * dx;
    let mut counts = vec![0usize; bins + 1];
    for &x in samples {
        let u = (x - lo) / width;
        if u >= 0.0 && u < bins as f64 {
            counts[u as usize] += 1;
        } else {
            counts[bins] += 1;
        }
    }
    let total = samples.len() as f64;
    Ok(0.5 * counts.iter().zip(&q).map(|(&c, &qb)| (c as f64 / total - qb).abs()).sum::<f64>())
}
