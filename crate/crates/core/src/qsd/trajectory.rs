use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{position_moments, Representation, SpatialGrid, Spectral, WaveFunction};
use crate::model1::EnvironmentSpec;
use crate::potential::PotentialSpec;
use crate::states::PhysicalParams;

use super::moments::TrajectoryMoments;
use super::noise::NoiseStream;

/// Largest admissible QSD step for this state:
/// `0.05 min(t_env, t_E, hbar / V_peak, 2 m hbar / p_occ^2)`, where `t_env` is
/// `t_loc` for position coupling and `t_p = 1 / (D_p p_bar^2)` for momentum coupling.
pub fn max_qsd_step(
    psi: &WaveFunction,
    env: EnvironmentSpec,
    spec: &PotentialSpec,
    params: &PhysicalParams,
) -> Result<f64> {
    let opts = crate::unitary::SolverOptions {
        step_factor: 0.05,
        ..Default::default()
    };
    let base = crate::unitary::max_time_step(psi, spec, params, &opts)?;
    let t_env = match env {
        EnvironmentSpec::PositionCoupling { d } if d > 0.0 => (params.m * params.hbar / d).sqrt(),
        EnvironmentSpec::MomentumCoupling { d_p } if d_p > 0.0 => 1.0 / (d_p * params.p_bar * params.p_bar),
        _ => f64::INFINITY,
    };
    Ok(base.min(0.05 * t_env))
}

/// Split-step integrator of the QSD equation with one real Wiener process.
///
/// Position coupling: `K/2, [V + noise](x), K/2`; momentum coupling:
/// `V/2, [K + noise](p), V/2`. The noise part multiplies by
/// `exp(-(L - <L>)^2 dt + (L - <L>) dB)`, the exact solution of the linear
/// diagonal SDE with `<L>` frozen over the step, and the state is renormalized.
pub struct QsdStepper {
    spectral: Spectral,
    env: EnvironmentSpec,
    xs: Vec<f64>,
    ps: Vec<f64>,
    kinetic: Vec<Complex64>,
    potential: Vec<Complex64>,
    dt: f64,
    hbar: f64,
    dx: f64,
    steps: usize,
}

impl QsdStepper {
    pub fn new(
        grid: &SpatialGrid,
        env: EnvironmentSpec,
        spec: &PotentialSpec,
        params: &PhysicalParams,
        dt: f64,
    ) -> Result<Self> {
        env.validate()?;
        spec.validate()?;
        if !spec.is_real() {
            return Err(Error::Unsupported("QSD trajectories need a real barrier"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        let hbar = params.hbar;
        let ps = grid.ps_fft_order(hbar);
        let momentum_side = matches!(env, EnvironmentSpec::MomentumCoupling { .. });
        let (kin_dt, pot_dt) = if momentum_side { (dt, 0.5 * dt) } else { (0.5 * dt, dt) };
        let kinetic = ps
            .iter()
            .map(|p| Complex64::from_polar(1.0, -p * p / (2.0 * params.m) * kin_dt / hbar))
            .collect();
        let xs = grid.xs();
        let potential = xs
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -spec.position(x).re * pot_dt / hbar))
            .collect();
        Ok(Self {
            spectral: Spectral::new(grid.len()),
            env,
            xs,
            ps,
            kinetic,
            potential,
            dt,
            hbar,
            dx: grid.dx(),
            steps: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn diag(buf: &mut [Complex64], f: &[Complex64]) {
        for (v, g) in buf.iter_mut().zip(f) {
            *v *= g;
        }
    }

    /// Multiplies by the noise factor of operator `coord` (`x` or `p` values)
    /// with coupling `c`, `L = c coord`.
    fn collapse(buf: &mut [Complex64], coord: &[f64], c: f64, dt: f64, db: f64) {
        let (mut w, mut m) = (0.0, 0.0);
        for (v, q) in buf.iter().zip(coord) {
            let a = v.norm_sqr();
            w += a;
            m += a * q;
        }
        let mean = m / w;
        for (v, q) in buf.iter_mut().zip(coord) {
            let l = c * (q - mean);
            *v *= (-l * l * dt + l * db).exp();
        }
    }

    /// Advances position-space samples by one step with increment `db`.
    pub fn step_with_increment(&mut self, psi: &mut [Complex64], db: f64) -> Result<()> {
        let dt = self.dt;
        match self.env {
            EnvironmentSpec::MomentumCoupling { d_p } => {
                Self::diag(psi, &self.potential);
                self.spectral.forward(psi);
                Self::diag(psi, &self.kinetic);
                if d_p > 0.0 {
                    Self::collapse(psi, &self.ps, (2.0 * d_p).sqrt(), dt, db);
                }
                self.spectral.inverse(psi);
                Self::diag(psi, &self.potential);
            }
            env => {
                self.spectral.apply_diagonal(psi, &self.kinetic);
                Self::diag(psi, &self.potential);
                if let EnvironmentSpec::PositionCoupling { d } = env {
                    if d > 0.0 {
                        Self::collapse(psi, &self.xs, (2.0 * d).sqrt() / self.hbar, dt, db);
                    }
                }
                self.spectral.apply_diagonal(psi, &self.kinetic);
            }
        }
        let step = self.steps;
        self.steps += 1;
        let norm: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NonFinite { step });
        }
        let s = norm.sqrt().recip();
        for v in psi.iter_mut() {
            *v *= s;
        }
        Ok(())
    }

    /// Advances by one step, drawing the increment from `noise`.
    pub fn step(&mut self, psi: &mut [Complex64], noise: &mut NoiseStream) -> Result<()> {
        let db = noise.next_increment(self.dt);
        self.step_with_increment(psi, db)
    }

    /// Moments of position-space samples, reusing the FFT plan.
    pub fn moments(&mut self, psi: &WaveFunction, time: f64) -> TrajectoryMoments {
        TrajectoryMoments::from_moments(&position_moments(psi, &mut self.spectral), time)
    }
}

fn require_position(psi: &WaveFunction) -> Result<()> {
    if psi.representation() != Representation::Position {
        return Err(Error::RepresentationMismatch {
            expected: Representation::Position,
            found: psi.representation(),
        });
    }
    Ok(())
}

/// One QSD step of `psi`; checks the step size against [`max_qsd_step`].
pub fn step_trajectory(
    psi: &WaveFunction,
    env: EnvironmentSpec,
    spec: &PotentialSpec,
    params: &PhysicalParams,
    dt: f64,
    noise: &mut NoiseStream,
) -> Result<WaveFunction> {
    require_position(psi)?;
    let limit = max_qsd_step(psi, env, spec, params)?;
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    let mut stepper = QsdStepper::new(psi.grid(), env, spec, params, dt)?;
    let mut out = psi.clone();
    stepper.step(out.values_mut(), noise)?;
    Ok(out)
}

/// A trajectory's recorded moments and final state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub moments: Vec<TrajectoryMoments>,
    pub last: WaveFunction,
}

/// Integrates one trajectory for `n_steps`, recording moments every
/// `record_every` steps (and at the start).
#[allow(clippy::too_many_arguments)]
pub fn run_trajectory(
    psi0: &WaveFunction,
    env: EnvironmentSpec,
    spec: &PotentialSpec,
    params: &PhysicalParams,
    dt: f64,
    n_steps: usize,
    noise: &mut NoiseStream,
    record_every: usize,
) -> Result<Trajectory> {
    require_position(psi0)?;
    let limit = max_qsd_step(psi0, env, spec, params)?;
    if dt > limit {
        return Err(Error::CflViolation { dt, limit });
    }
    let mut stepper = QsdStepper::new(psi0.grid(), env, spec, params, dt)?;
    let mut psi = psi0.clone();
    psi.normalize()?;
    let every = record_every.max(1);
    let mut moments = vec![stepper.moments(&psi, 0.0)];
    for k in 1..=n_steps {
        stepper.step(psi.values_mut(), noise)?;
        if k % every == 0 {
            moments.push(stepper.moments(&psi, k as f64 * dt));
        }
    }
    Ok(Trajectory { moments, last: psi })
}

/// Probability current `(hbar / m) Im(psi* psi')` at `x`. The derivative is
/// spectral; between grid points the current is interpolated linearly.
pub fn quantum_current(psi: &WaveFunction, m: f64, x: f64) -> Result<f64> {
    require_position(psi)?;
    let g = psi.grid();
    let n = g.len();
    let h = g.dx();
    let u = (x - g.x_min()) / h;
    if !(u >= 0.0 && u <= (n - 1) as f64) {
        return Err(Error::invalid("x", "outside the grid"));
    }
    let v = psi.values();
    let ik: Vec<Complex64> = g
        .ps_fft_order(psi.hbar())
        .iter()
        .map(|p| Complex64::new(0.0, p / psi.hbar()))
        .collect();
    let mut spec = Spectral::new(n);
    // real and imaginary parts are differentiated separately, so a real state
    // carries no current at all
    let mut deriv = |part: fn(&Complex64) -> f64| {
        let mut d: Vec<Complex64> = v.iter().map(|z| Complex64::new(part(z), 0.0)).collect();
        spec.apply_diagonal(&mut d, &ik);
        d.iter().map(|z| z.re).collect::<Vec<f64>>()
    };
    let dre = deriv(|z| z.re);
    let dim = deriv(|z| z.im);
    let at = |i: usize| v[i].re * dim[i] - v[i].im * dre[i];
    let i = (u.floor() as usize).min(n - 1);
    let f = u - i as f64;
    let j = if f > 1e-12 { at(i) * (1.0 - f) + at(i + 1) * f } else { at(i) };
    Ok(psi.hbar() / m * j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{gaussian_at, qsd_steady_packet};
    use crate::unitary::{SolverOptions, SplitStepper};

    #[test]
    fn free_limit_matches_unitary_stepper() {
        let g = SpatialGrid::centered(40.0, 512).unwrap();
        let p = PhysicalParams::default();
        let spec = PotentialSpec::Gaussian { v0: 0.5, a: 0.5 };
        let psi = gaussian_at(&g, 1.0, 2.0, -8.0, 1.0).unwrap();
        let dt = 0.02;
        let mut q = QsdStepper::new(&g, EnvironmentSpec::None, &spec, &p, dt).unwrap();
        let mut u = SplitStepper::new(&g, &spec, &p, dt, &SolverOptions::default());
        let mut a = psi.values().to_vec();
        let mut b = a.clone();
        let mut noise = NoiseStream::new(0);
        for _ in 0..100 {
            q.step(&mut a, &mut noise).unwrap();
            u.step(&mut b);
        }
        let err = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn norm_is_restored_every_step() {
        let g = SpatialGrid::centered(40.0, 512).unwrap();
        let p = PhysicalParams { d: 1.0, ..Default::default() };
        let psi = gaussian_at(&g, 1.0, 3.0, 0.0, 1.0).unwrap();
        let env = EnvironmentSpec::PositionCoupling { d: 1.0 };
        let mut noise = NoiseStream::new(11);
        let mut q = QsdStepper::new(&g, env, &PotentialSpec::Step { v0: 0.0 }, &p, 0.01).unwrap();
        let mut v = psi.into_values();
        for _ in 0..50 {
            q.step(&mut v, &mut noise).unwrap();
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>() * g.dx();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_size_is_checked() {
        let g = SpatialGrid::centered(40.0, 512).unwrap();
        let p = PhysicalParams { d: 1.0, ..Default::default() };
        let psi = gaussian_at(&g, 1.0, 3.0, 0.0, 1.0).unwrap();
        let env = EnvironmentSpec::PositionCoupling { d: 1.0 };
        let r = step_trajectory(&psi, env, &PotentialSpec::Step { v0: 0.0 }, &p, 1.0, &mut NoiseStream::new(0));
        assert!(matches!(r, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn current_of_boosted_and_real_states() {
        let g = SpatialGrid::centered(40.0, 2048).unwrap();
        let psi = gaussian_at(&g, 1.0, 4.0, 0.0, 1.5).unwrap();
        let j = quantum_current(&psi, 1.0, 0.0).unwrap();
        let rho = psi.density()[g.len() / 2];
        assert!((j / (1.5 * rho) - 1.0).abs() < 0.01);
        let real = WaveFunction::from_fn(g, 1.0, |x| Complex64::new((-x * x).exp(), 0.0));
        assert_eq!(quantum_current(&real, 1.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn current_of_steady_packet() {
        let g = SpatialGrid::centered(20.0, 8192).unwrap();
        let p = PhysicalParams { d: 2.0, ..Default::default() };
        let (cx, cp) = (0.3, 0.8);
        let psi = qsd_steady_packet(&p, &g, cx, cp).unwrap();
        let sq2 = p.sigma_q_sqr().unwrap();
        // (hbar/m)|psi|^2 Im(psi'/psi), psi'/psi = -(1 - i)(x - cx)/2 sq2 + i cp / hbar
        let x = 0.0;
        let rho = (-(x - cx) * (x - cx) / (2.0 * sq2)).exp() / (2.0 * std::f64::consts::PI * sq2).sqrt();
        let exact = rho * ((x - cx) / (2.0 * sq2) + cp);
        let j = quantum_current(&psi, 1.0, x).unwrap();
        assert!((j - exact).abs() < 1e-8 * exact.abs(), "{j} {exact}");
    }
}
