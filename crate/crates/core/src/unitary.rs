//! Split-operator propagation on the FFT grid and the first-order Born
//! reflection spectrum it is checked against.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Representation, SpatialGrid, Spectral, WaveFunction};
use crate::potential::PotentialSpec;
use crate::quadrature::{integrate, Tolerance};
use crate::states::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Fraction of the grid covered by each absorbing layer.
    pub absorber_fraction: f64,
    /// Peak absorber strength; `None` uses the mean kinetic energy.
    pub absorber_strength: Option<f64>,
    /// Largest tolerated probability lost into the absorbers.
    pub leak_tolerance: f64,
    /// Largest tolerated initial mass where the barrier is non-negligible.
    pub overlap_tolerance: f64,
    /// Safety factor applied to the shortest dynamical time.
    pub step_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            absorber_fraction: 0.05,
            absorber_strength: None,
            leak_tolerance: 1e-6,
            overlap_tolerance: 1e-8,
            step_factor: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotProbabilities {
    pub norm: f64,
    /// Mass at negative momentum.
    pub reflected: f64,
    /// Mass at positive momentum.
    pub transmitted: f64,
    /// Mass removed by a complex barrier.
    pub absorbed: f64,
    /// Mass removed by the absorbing layers at the grid edges.
    pub boundary_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub potential: PotentialSpec,
    pub times: Vec<f64>,
    pub states: Vec<WaveFunction>,
    pub probabilities: Vec<SnapshotProbabilities>,
}

impl SnapshotSeries {
    pub fn last(&self) -> Option<(&WaveFunction, &SnapshotProbabilities)> {
        self.states.last().zip(self.probabilities.last())
    }
}

/// Largest step accepted by `propagate` for this state and barrier.
pub fn max_time_step(
    psi: &WaveFunction,
    spec: &PotentialSpec,
    params: &PhysicalParams,
    opts: &SolverOptions,
) -> Result<f64> {
    let k = match psi.representation() {
        Representation::Position => psi.to_momentum()?,
        Representation::Momentum => psi.clone(),
    };
    let dens = k.density();
    let peak = dens.iter().cloned().fold(0.0, f64::max);
    let p_occ = k
        .coordinates()
        .iter()
        .zip(&dens)
        .filter(|(_, d)| **d > 1e-10 * peak)
        .map(|(p, _)| p.abs())
        .fold(0.0, f64::max)
        .max(params.p_bar);
    let band = 2.0 * params.m * params.hbar / (p_occ * p_occ);
    let t_e = 2.0 * params.m * params.hbar / (params.p_bar * params.p_bar);
    let v = spec.peak();
    let t_v = if v > 0.0 { params.hbar / v } else { f64::INFINITY };
    Ok(opts.step_factor * t_e.min(t_v).min(band))
}

fn absorber(grid: &SpatialGrid, fraction: f64, strength: f64) -> Vec<f64> {
    let n = grid.len();
    let width = fraction * (grid.x_max() - grid.x_min());
    (0..n)
        .map(|i| {
            let x = grid.x(i);
            let depth = (grid.x_min() + width - x).max(x - (grid.x_max() - width));
            if width > 0.0 && depth > 0.0 {
                strength * (0.5 * PI * depth / width).sin().powi(2)
            } else {
                0.0
            }
        })
        .collect()
}

/// Mass of `psi` inside `[lo, hi]`.
pub fn mass_in(psi: &WaveFunction, lo: f64, hi: f64) -> f64 {
    let g = psi.grid();
    psi.values()
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            let x = g.x(*i);
            x >= lo && x <= hi
        })
        .map(|(_, v)| v.norm_sqr())
        .sum::<f64>()
        * g.dx()
}

/// Reusable Strang splitting propagator for one grid, barrier and step.
pub struct SplitStepper {
    spec: Spectral,
    half_kinetic: Vec<Complex64>,
    potential: Vec<Complex64>,
    boundary: Vec<f64>,
    dx: f64,
}

impl SplitStepper {
    pub fn new(
        grid: &SpatialGrid,
        spec: &PotentialSpec,
        params: &PhysicalParams,
        dt: f64,
        opts: &SolverOptions,
    ) -> Self {
        let hbar = params.hbar;
        let half_kinetic = grid
            .ps_fft_order(hbar)
            .iter()
            .map(|p| Complex64::from_polar(1.0, -p * p / (2.0 * params.m) * dt / (2.0 * hbar)))
            .collect();
        let potential = grid
            .xs()
            .iter()
            .map(|&x| (Complex64::new(0.0, -dt / hbar) * spec.position(x)).exp())
            .collect();
        let strength = opts.absorber_strength.unwrap_or_else(|| params.energy());
        let boundary = absorber(grid, opts.absorber_fraction, strength)
            .iter()
            .map(|w| (-w * dt / hbar).exp())
            .collect();
        Self {
            spec: Spectral::new(grid.len()),
            half_kinetic,
            potential,
            boundary,
            dx: grid.dx(),
        }
    }

    /// One step; returns `(barrier_loss, boundary_loss)` for this step.
    pub fn step(&mut self, psi: &mut [Complex64]) -> (f64, f64) {
        self.spec.apply_diagonal(psi, &self.half_kinetic);
        let n0: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        for (v, f) in psi.iter_mut().zip(&self.potential) {
            *v *= f;
        }
        let n1: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        for (v, f) in psi.iter_mut().zip(&self.boundary) {
            *v *= f;
        }
        let n2: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        self.spec.apply_diagonal(psi, &self.half_kinetic);
        ((n0 - n1) * self.dx, (n1 - n2) * self.dx)
    }
}

/// Evolves `psi0` for `n_steps` steps of size `dt`, recording the state at
/// the steps closest to `snapshot_times` (the initial state is always kept).
pub fn propagate(
    psi0: &WaveFunction,
    spec: &PotentialSpec,
    params: &PhysicalParams,
    dt: f64,
    n_steps: usize,
    snapshot_times: &[f64],
    opts: &SolverOptions,
) -> Result<SnapshotSeries> {
    spec.validate()?;
    params.validate()?;
    if psi0.representation() != Representation::Position {
        return Err(Error::RepresentationMismatch {
            expected: Representation::Position,
            found: psi0.representation(),
        });
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    let limit = max_time_step(psi0, spec, params, opts)?;
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    let (lo, hi) = spec.support(1e-6);
    let overlap = mass_in(psi0, lo, hi);
    if overlap > opts.overlap_tolerance {
        return Err(Error::InitialOverlap { overlap });
    }

    let grid = *psi0.grid();
    let mut stepper = SplitStepper::new(&grid, spec, params, dt, opts);
    let mut wanted: Vec<usize> = snapshot_times
        .iter()
        .map(|t| ((t / dt).round().max(0.0) as usize).min(n_steps))
        .collect();
    wanted.push(0);
    wanted.sort_unstable();
    wanted.dedup();

    let mut psi = psi0.values().to_vec();
    let n_init = psi0.norm_sqr();
    let mut series = SnapshotSeries {
        potential: *spec,
        times: Vec::new(),
        states: Vec::new(),
        probabilities: Vec::new(),
    };
    let mut barrier_loss = 0.0;
    let mut boundary_loss = 0.0;
    let mut next = 0;
    for step in 0..=n_steps {
        if step > 0 {
            let (b, w) = stepper.step(&mut psi);
            barrier_loss += b;
            boundary_loss += w;
            if boundary_loss > opts.leak_tolerance * n_init {
                return Err(Error::BoundaryLeakage {
                    lost: boundary_loss,
                    step,
                });
            }
            if !psi[0].re.is_finite() {
                return Err(Error::NonFinite { step });
            }
        }
        if next < wanted.len() && wanted[next] == step {
            let state = WaveFunction::new(grid, params.hbar, psi.clone(), Representation::Position)?;
            let (reflected, transmitted) = state.to_momentum()?.split_mass();
            let norm = state.norm_sqr();
            series.times.push(step as f64 * dt);
            series.probabilities.push(SnapshotProbabilities {
                norm,
                reflected,
                transmitted,
                absorbed: if spec.is_real() { 0.0 } else { barrier_loss },
                boundary_loss,
            });
            series.states.push(state);
            next += 1;
        }
    }
    Ok(series)
}

/// Final `(reflected, transmitted, absorbed)` probabilities.
///
/// The reflected and transmitted parts are the negative- and positive-momentum
/// masses of the last snapshot. The barrier region, shifted by `boundary`,
/// must be empty to within `1e-4` first.
pub fn reflection_probability(series: &SnapshotSeries, boundary: f64) -> Result<(f64, f64, f64)> {
    let (state, prob) = series
        .last()
        .ok_or(Error::invalid("series", "no snapshots"))?;
    if let Some((lo, hi)) = series.potential.measurement_zone() {
        let overlap = mass_in(state, boundary + lo, boundary + hi);
        if overlap > 1e-4 {
            return Err(Error::PrematureMeasurement { overlap });
        }
    }
    let absorbed = if series.potential.is_real() {
        0.0
    } else {
        1.0 - prob.norm - prob.boundary_loss
    };
    Ok((prob.reflected, prob.transmitted, absorbed))
}

/// Expectation of `H = p^2/2m + V` for a real barrier.
pub fn energy(psi: &WaveFunction, spec: &PotentialSpec, params: &PhysicalParams) -> Result<f64> {
    let k = psi.to_momentum()?;
    let kin: f64 = k
        .coordinates()
        .iter()
        .zip(k.values())
        .map(|(p, v)| p * p / (2.0 * params.m) * v.norm_sqr())
        .sum::<f64>()
        * k.spacing();
    let pot: f64 = psi
        .grid()
        .xs()
        .iter()
        .zip(psi.values())
        .map(|(x, v)| spec.position(*x).re * v.norm_sqr())
        .sum::<f64>()
        * psi.spacing();
    Ok((kin + pot) / psi.norm_sqr())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BornResult {
    /// Negative momenta, ascending, zero excluded.
    pub ps: Vec<f64>,
    pub density: Vec<f64>,
    pub total: f64,
}

/// Momentum density of the incoming Gaussian packet.
pub fn incoming_density(params: &PhysicalParams, p: f64) -> f64 {
    let s = params.sigma / params.hbar;
    (2.0 * s * s / PI).sqrt() * (-2.0 * s * s * (p - params.p_bar).powi(2)).exp()
}

/// First-order Born density `(2 pi m^2 / hbar p^2) |V(2p)|^2 |phi_in(-p)|^2`.
pub fn born_density(params: &PhysicalParams, spec: &PotentialSpec, p: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    let m = params.m;
    let hbar = params.hbar;
    2.0 * PI * m * m / (hbar * p * p) * spec.momentum_sqr(2.0 * p, hbar) * incoming_density(params, -p)
}

/// Born reflection spectrum of the packet described by `params`.
pub fn born_reflection(params: &PhysicalParams, spec: &PotentialSpec, n_points: usize) -> Result<BornResult> {
    params.validate()?;
    spec.validate()?;
    if !spec.has_analytic_transform() {
        return Err(Error::Unsupported("Born reflection for a step barrier"));
    }
    let width = 12.0 * params.hbar / (2.0 * params.sigma);
    let lo = -params.p_bar - width;
    let hi = (-params.p_bar + width).min(0.0);
    let n = n_points.max(2);
    let h = (hi - lo) / n as f64;
    // half-open grid excluding the upper end (p = 0 when the window reaches it)
    let ps: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let density = ps.iter().map(|&p| born_density(params, spec, p)).collect();
    let mut points = vec![lo, -params.p_bar, hi];
    points.dedup();
    let total = integrate(|p| born_density(params, spec, p), &points, Tolerance::rel(1e-10))?.value;
    Ok(BornResult { ps, density, total })
}
