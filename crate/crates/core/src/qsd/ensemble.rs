use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Moments, SpatialGrid, Spectral, WaveFunction};
use crate::model1::EnvironmentSpec;
use crate::potential::PotentialSpec;
use crate::states::PhysicalParams;

use super::moments::{run_moments, Closure, TrajectoryMoments};
use super::noise::NoiseStream;
use super::trajectory::{run_trajectory, Trajectory};

/// Fewest trajectories accepted by the ensemble statistics.
pub const MIN_SEEDS: usize = 64;

/// Mean of `|psi><psi|` over trajectories, as samples `rho[i][j] = rho(x_i, x_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDensity {
    pub grid: SpatialGrid,
    pub hbar: f64,
    /// Row-major `n x n`.
    pub rho: Vec<Complex64>,
    pub n_trajectories: usize,
}

/// Pairwise sum of `a[k] * conj(b[k])` over `k`, in a fixed order.
fn pairwise(states: &[&[Complex64]], i: usize, j: usize) -> Complex64 {
    match states.len() {
        1 => states[0][i] * states[0][j].conj(),
        n => {
            let (l, r) = states.split_at(n / 2);
            pairwise(l, i, j) + pairwise(r, i, j)
        }
    }
}

/// Ensemble density operator of normalized position-space trajectories.
pub fn ensemble_density(states: &[WaveFunction]) -> Result<EnsembleDensity> {
    let first = states.first().ok_or(Error::TooFewSeeds { got: 0, need: 1 })?;
    for s in states {
        if s.grid() != first.grid() || s.representation() != first.representation() || s.hbar() != first.hbar() {
            return Err(Error::GridMismatch);
        }
    }
    let n = first.grid().len();
    let views: Vec<&[Complex64]> = states.iter().map(|s| s.values()).collect();
    let w = 1.0 / states.len() as f64;
    // rows are independent, so the result does not depend on the thread count
    let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
    rho.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = pairwise(&views, i, j) * w;
        }
    });
    Ok(EnsembleDensity {
        grid: *first.grid(),
        hbar: first.hbar(),
        rho,
        n_trajectories: states.len(),
    })
}

impl EnsembleDensity {
    fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.rho[i * self.n() + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n()).map(|i| self.at(i, i).re).sum::<f64>() * self.grid.dx()
    }

    /// `max |rho(x, y) - rho(y, x)*|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n();
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in 0..i {
                e = e.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        e
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        let dx = self.grid.dx();
        self.rho.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx
    }

    /// Eigenvalues of the operator (kernel times `dx`), ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n();
        let dx = self.grid.dx();
        // symmetrize so the solver sees an exactly Hermitian matrix
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (self.at(i, j) + self.at(j, i).conj()) * dx);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Ensemble moments `Tr(rho A)` of `x`, `p` and their products.
    pub fn moments(&self) -> Moments {
        let n = self.n();
        let g = self.grid;
        let dx = g.dx();
        let xs = g.xs();
        let pk = g.ps_fft_order(self.hbar);
        let mut spec = Spectral::new(n);
        // columns of rho, transformed in x for each fixed y
        let (mut p1, mut p2, mut xp) = (0.0, 0.0, 0.0);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        let mut tmp = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.at(i, j);
            }
            tmp.copy_from_slice(&col);
            spec.forward(&mut tmp);
            for (v, p) in tmp.iter_mut().zip(&pk) {
                *v *= p;
            }
            spec.inverse(&mut tmp);
            // (p rho)(x_j, x_j) and (x p rho)(x_j, x_j)
            p1 += tmp[j].re;
            xp += xs[j] * tmp[j].re;
            tmp.copy_from_slice(&col);
            spec.forward(&mut tmp);
            for (v, p) in tmp.iter_mut().zip(&pk) {
                *v *= p * p;
            }
            spec.inverse(&mut tmp);
            p2 += tmp[j].re;
        }
        let (mut norm, mut x1, mut x2) = (0.0, 0.0, 0.0);
        for (i, x) in xs.iter().enumerate() {
            let w = self.at(i, i).re;
            norm += w;
            x1 += w * x;
            x2 += w * x * x;
        }
        let mean_x = x1 / norm;
        let mean_p = p1 / norm;
        Moments {
            norm: norm * dx,
            mean_x,
            mean_p,
            var_x: x2 / norm - mean_x * mean_x,
            var_p: p2 / norm - mean_p * mean_p,
            cov_xp: xp / norm - mean_x * mean_p,
        }
    }

    /// Fraction of `int |rho(x, y)|^2` carried by `|x - y| > width`.
    pub fn offdiagonal_mass(&self, width: f64) -> f64 {
        let n = self.n();
        let xs = self.grid.xs();
        let (mut far, mut all) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let w = self.at(i, j).norm_sqr();
                all += w;
                if (xs[i] - xs[j]).abs() > width {
                    far += w;
                }
            }
        }
        far / all
    }
}

/// Runs `n_traj` wavefunction trajectories in parallel; trajectory `k` uses
/// seed `base_seed + k`.
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    psi0: &WaveFunction,
    env: EnvironmentSpec,
    spec: &PotentialSpec,
    params: &PhysicalParams,
    dt: f64,
    n_steps: usize,
    n_traj: usize,
    base_seed: u64,
    record_every: usize,
) -> Result<Vec<Trajectory>> {
    (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut noise = NoiseStream::for_trajectory(base_seed, k);
            run_trajectory(psi0, env, spec, params, dt, n_steps, &mut noise, record_every)
        })
        .collect()
}

/// Moment-level counterpart of [`run_ensemble`].
#[allow(clippy::too_many_arguments)]
pub fn run_moment_ensemble(
    start: TrajectoryMoments,
    env: EnvironmentSpec,
    spec: &PotentialSpec,
    params: &PhysicalParams,
    dt: f64,
    n_steps: usize,
    n_traj: usize,
    base_seed: u64,
    closure: Closure,
    record_every: usize,
) -> Result<Vec<Vec<TrajectoryMoments>>> {
    (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut noise = NoiseStream::for_trajectory(base_seed, k);
            run_moments(start, params, env, spec, dt, n_steps, &mut noise, closure, record_every)
        })
        .collect()
}

/// Momentum fluctuations of an ensemble at each recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationReport {
    pub times: Vec<f64>,
    /// Sample variance of `<p>` over trajectories.
    pub stochastic_var_p: Vec<f64>,
    /// Mean of the quantum `Var(p)`.
    pub mean_var_p: Vec<f64>,
    pub total: Vec<f64>,
    /// Least-squares slope of `total` over the fit window.
    pub rate: f64,
}

/// Ensemble momentum fluctuations and their growth rate fitted over
/// `window = (t0, t1)`.
pub fn fluctuation_report(ensemble: &[Vec<TrajectoryMoments>], window: (f64, f64)) -> Result<FluctuationReport> {
    let k = ensemble.len();
    if k < MIN_SEEDS {
        return Err(Error::TooFewSeeds { got: k, need: MIN_SEEDS });
    }
    let len = ensemble[0].len();
    if ensemble.iter().any(|s| s.len() != len) {
        return Err(Error::invalid("ensemble", "trajectories recorded at different times"));
    }
    let kf = k as f64;
    let mut times = Vec::with_capacity(len);
    let mut stochastic = Vec::with_capacity(len);
    let mut mean_q = Vec::with_capacity(len);
    for t in 0..len {
        let mean_p = ensemble.iter().map(|s| s[t].mean_p).sum::<f64>() / kf;
        let var = ensemble.iter().map(|s| (s[t].mean_p - mean_p).powi(2)).sum::<f64>() / (kf - 1.0);
        times.push(ensemble[0][t].time);
        stochastic.push(var);
        mean_q.push(ensemble.iter().map(|s| s[t].var_p).sum::<f64>() / kf);
    }
    let total: Vec<f64> = stochastic.iter().zip(&mean_q).map(|(a, b)| a + b).collect();
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(&total)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("window", "needs at least two recorded times"));
    }
    Ok(FluctuationReport {
        times,
        stochastic_var_p: stochastic,
        mean_var_p: mean_q,
        total,
        rate: slope(&pts),
    })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mv = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mv)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    num / den
}

/// Ensemble mean of each moment at each recorded time.
pub fn mean_moments(ensemble: &[Vec<TrajectoryMoments>]) -> Vec<TrajectoryMoments> {
    let k = ensemble.len() as f64;
    let len = ensemble.first().map_or(0, |s| s.len());
    (0..len)
        .map(|t| {
            let avg = |f: fn(&TrajectoryMoments) -> f64| ensemble.iter().map(|s| f(&s[t])).sum::<f64>() / k;
            TrajectoryMoments {
                mean_x: avg(|m| m.mean_x),
                mean_p: avg(|m| m.mean_p),
                var_x: avg(|m| m.var_x),
                var_p: avg(|m| m.var_p),
                cov_xp: avg(|m| m.cov_xp),
                time: ensemble[0][t].time,
            }
        })
        .collect()
}

/// First recorded time at which `Var(x)` is at most `target`.
pub fn localization_time(series: &[TrajectoryMoments], target: f64) -> Option<f64> {
    series.iter().find(|m| m.var_x <= target).map(|m| m.time)
}

/// First recorded time at which `Var(p)` has fallen to half its initial value.
pub fn momentum_localization_time(series: &[TrajectoryMoments]) -> Option<f64> {
    let v0 = series.first()?.var_p;
    series.iter().find(|m| m.var_p <= 0.5 * v0).map(|m| m.time)
}

/// `(m^2 hbar^2 / D Var(p))^{1/3}`.
pub fn predicted_momentum_localization_time(params: &PhysicalParams, d: f64, var_p: f64) -> f64 {
    (params.m * params.m * params.hbar * params.hbar / (d * var_p)).cbrt()
}
