use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Moments;
use crate::model1::EnvironmentSpec;
use crate::potential::PotentialSpec;
use crate::states::PhysicalParams;

use super::noise::NoiseStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryMoments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
    pub time: f64,
}

impl TrajectoryMoments {
    pub fn from_moments(m: &Moments, time: f64) -> Self {
        Self {
            mean_x: m.mean_x,
            mean_p: m.mean_p,
            var_x: m.var_x,
            var_p: m.var_p,
            cov_xp: m.cov_xp,
            time,
        }
    }

    /// Stationary packet of position coupling centred at `(x, p)`.
    pub fn steady_state(params: &PhysicalParams, x: f64, p: f64) -> Result<Self> {
        let sq2 = params.sigma_q_sqr()?;
        let hbar = params.hbar;
        Ok(Self {
            mean_x: x,
            mean_p: p,
            var_x: sq2,
            var_p: hbar * hbar / (2.0 * sq2),
            cov_xp: 0.5 * hbar,
            time: 0.0,
        })
    }

    /// `Var(x) Var(p) - Cov(x, p)^2`, at least `hbar^2 / 4` for a pure state.
    pub fn uncertainty(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }
}

/// How the unclosed quantities of the moment equations are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    /// Packet shape fixed at the stationary form of position coupling.
    SteadyState,
    /// Pure Gaussian with the current variance and covariance.
    Gaussian,
}

/// Quantities the moment equations need but do not evolve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedQuantities {
    /// `|psi(0)|^2`.
    pub density_at_origin: f64,
    /// `J(0)`.
    pub current_at_origin: f64,
    pub cov_x_x2: f64,
    pub cov_x_p2: f64,
    /// `Cov(xp + px, x)`.
    pub cov_sym_x: f64,
    pub cov_p2_p: f64,
    pub cov_x2_p: f64,
    /// `Cov(xp + px, p)`.
    pub cov_sym_p: f64,
}

/// Evaluates the closure at the current moments.
pub fn closed_quantities(
    mom: &TrajectoryMoments,
    params: &PhysicalParams,
    closure: Closure,
) -> Result<ClosedQuantities> {
    let (vx, c) = match closure {
        Closure::SteadyState => (params.sigma_q_sqr()?, 0.5 * params.hbar),
        Closure::Gaussian => (mom.var_x, mom.cov_xp),
    };
    if !(vx > 0.0) {
        return Err(Error::invalid("var_x", "closure needs a positive width"));
    }
    let (x, p) = (mom.mean_x, mom.mean_p);
    // psi ~ exp(-(1 - 2iC/hbar)(x - X)^2 / 4 Vx + i P x / hbar)
    let rho0 = (-x * x / (2.0 * vx)).exp() / (2.0 * PI * vx).sqrt();
    let j0 = rho0 * (p - c * x / vx) / params.m;
    // Gaussian third central moments vanish; what is left is Wick's rule
    Ok(ClosedQuantities {
        density_at_origin: rho0,
        current_at_origin: j0,
        cov_x_x2: 2.0 * x * mom.var_x,
        cov_x_p2: 2.0 * p * mom.cov_xp,
        cov_sym_x: 2.0 * (p * mom.var_x + x * mom.cov_xp),
        cov_p2_p: 2.0 * p * mom.var_p,
        cov_x2_p: 2.0 * x * mom.cov_xp,
        cov_sym_p: 2.0 * (x * mom.var_p + p * mom.cov_xp),
    })
}

fn step_height(spec: &PotentialSpec) -> Result<f64> {
    match *spec {
        PotentialSpec::Step { v0 } => Ok(v0),
        _ if spec.v0() == 0.0 => Ok(0.0),
        _ => Err(Error::Unsupported("moment equations are closed for a step barrier only")),
    }
}

/// Drift and noise coefficients of `(X, P, Vx, Vp, C)`.
struct Coefficients {
    drift: [f64; 5],
    noise: [f64; 5],
}

fn coefficients(
    mom: &TrajectoryMoments,
    q: &ClosedQuantities,
    params: &PhysicalParams,
    env: EnvironmentSpec,
    v0: f64,
) -> Coefficients {
    let (m, hbar) = (params.m, params.hbar);
    let TrajectoryMoments {
        mean_x: x,
        mean_p: p,
        var_x: vx,
        var_p: vp,
        cov_xp: c,
        ..
    } = *mom;
    let rho0 = q.density_at_origin;
    let pot_p = -v0 * rho0;
    let pot_vp = -2.0 * m * v0 * q.current_at_origin + 2.0 * v0 * p * rho0;
    let pot_c = v0 * x * rho0;
    let free = [p / m, pot_p, 2.0 * c / m, pot_vp, vp / m + pot_c];
    match env {
        EnvironmentSpec::None => Coefficients {
            drift: free,
            noise: [0.0; 5],
        },
        EnvironmentSpec::PositionCoupling { d } => {
            let k = (8.0 * d).sqrt() / hbar;
            Coefficients {
                drift: [
                    free[0],
                    free[1],
                    free[2] - k * k * vx * vx,
                    free[3] + 2.0 * d * (1.0 - 4.0 * c * c / (hbar * hbar)),
                    free[4] - k * k * vx * c,
                ],
                noise: [
                    k * vx,
                    k * c,
                    k * q.cov_x_x2 - 2.0 * k * x * vx,
                    k * q.cov_x_p2 - 2.0 * k * p * c,
                    0.5 * k * q.cov_sym_x - k * x * c - k * p * vx,
                ],
            }
        }
        EnvironmentSpec::MomentumCoupling { d_p } => {
            let k = (8.0 * d_p).sqrt();
            Coefficients {
                drift: [
                    free[0],
                    free[1],
                    free[2] + 2.0 * d_p * hbar * hbar - k * k * c * c,
                    free[3] - k * k * vp * vp,
                    free[4] - k * k * vp * c,
                ],
                noise: [
                    k * c,
                    k * vp,
                    k * q.cov_x2_p - 2.0 * k * x * c,
                    k * q.cov_p2_p - 2.0 * k * p * vp,
                    0.5 * k * q.cov_sym_p - k * x * vp - k * p * c,
                ],
            }
        }
    }
}

/// Euler-Maruyama step of the moment equations with a given increment `db`.
///
/// `step` is only used to label errors.
#[allow(clippy::too_many_arguments)]
pub fn moment_step_with_increment(
    mom: &TrajectoryMoments,
    params: &PhysicalParams,
    env: EnvironmentSpec,
    spec: &PotentialSpec,
    dt: f64,
    db: f64,
    closure: Closure,
    step: usize,
) -> Result<TrajectoryMoments> {
    env.validate()?;
    if matches!(env, EnvironmentSpec::MomentumCoupling { .. }) && closure == Closure::SteadyState {
        return Err(Error::Unsupported("momentum coupling has no stationary packet"));
    }
    let v0 = step_height(spec)?;
    let q = closed_quantities(mom, params, closure)?;
    let co = coefficients(mom, &q, params, env, v0);
    let s = [mom.mean_x, mom.mean_p, mom.var_x, mom.var_p, mom.cov_xp];
    let mut n = [0.0; 5];
    for i in 0..5 {
        n[i] = s[i] + co.drift[i] * dt + co.noise[i] * db;
    }
    if n.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step });
    }
    if n[2] <= 0.0 || n[3] <= 0.0 {
        return Err(Error::ClosureInconsistent { step });
    }
    Ok(TrajectoryMoments {
        mean_x: n[0],
        mean_p: n[1],
        var_x: n[2],
        var_p: n[3],
        cov_xp: n[4],
        time: mom.time + dt,
    })
}

/// Moment step drawing its increment from `noise`.
pub fn moment_step(
    mom: &TrajectoryMoments,
    params: &PhysicalParams,
    env: EnvironmentSpec,
    spec: &PotentialSpec,
    dt: f64,
    noise: &mut NoiseStream,
    closure: Closure,
) -> Result<TrajectoryMoments> {
    let step = noise.counter() as usize;
    let db = noise.next_increment(dt);
    moment_step_with_increment(mom, params, env, spec, dt, db, closure, step)
}

/// Integrates `n_steps` moment steps, recording every `record_every`-th state
/// (the initial state is always recorded).
#[allow(clippy::too_many_arguments)]
pub fn run_moments(
    start: TrajectoryMoments,
    params: &PhysicalParams,
    env: EnvironmentSpec,
    spec: &PotentialSpec,
    dt: f64,
    n_steps: usize,
    noise: &mut NoiseStream,
    closure: Closure,
    record_every: usize,
) -> Result<Vec<TrajectoryMoments>> {
    let every = record_every.max(1);
    let mut out = vec![start];
    let mut cur = start;
    for k in 1..=n_steps {
        cur = moment_step(&cur, params, env, spec, dt, noise, closure)?;
        if k % every == 0 {
            out.push(cur);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: f64) -> PhysicalParams {
        PhysicalParams {
            d,
            ..Default::default()
        }
    }

    #[test]
    fn steady_state_is_static_without_barrier() {
        let p = params(0.5);
        let s = TrajectoryMoments::steady_state(&p, -3.0, 1.0).unwrap();
        let env = EnvironmentSpec::PositionCoupling { d: 0.5 };
        let free = PotentialSpec::Step { v0: 0.0 };
        let mut noise = NoiseStream::new(1);
        let mut cur = s;
        for _ in 0..100 {
            cur = moment_step(&cur, &p, env, &free, 1e-3, &mut noise, Closure::Gaussian).unwrap();
        }
        let tol = 1e-12;
        assert!((cur.var_x - s.var_x).abs() < tol);
        assert!((cur.var_p - s.var_p).abs() < tol);
        assert!((cur.cov_xp - s.cov_xp).abs() < tol);
        assert!((s.uncertainty() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn steady_state_potential_term() {
        let d = 0.5;
        let p = params(d);
        let v0 = 0.3;
        let s = TrajectoryMoments::steady_state(&p, -0.4, 1.0).unwrap();
        let env = EnvironmentSpec::PositionCoupling { d };
        let dt = 1e-3;
        let with = moment_step_with_increment(&s, &p, env, &PotentialSpec::Step { v0 }, dt, 0.0, Closure::SteadyState, 0).unwrap();
        let without = moment_step_with_increment(&s, &p, env, &PotentialSpec::Step { v0: 0.0 }, dt, 0.0, Closure::SteadyState, 0).unwrap();
        let sq2 = p.sigma_q_sqr().unwrap();
        let rho0 = (-0.16 / (2.0 * sq2)).exp() / (2.0 * PI * sq2).sqrt();
        let expected = v0 / sq2 * -0.4 * rho0 * dt;
        assert!(((with.var_p - without.var_p) - expected).abs() < 1e-15);
        assert!(((with.mean_p - without.mean_p) + v0 * rho0 * dt).abs() < 1e-15);
    }

    #[test]
    fn no_environment_is_deterministic() {
        let p = params(0.0);
        let s = TrajectoryMoments {
            mean_x: 0.0,
            mean_p: 1.0,
            var_x: 1.0,
            var_p: 0.25,
            cov_xp: 0.0,
            time: 0.0,
        };
        let free = PotentialSpec::Step { v0: 0.0 };
        let mut noise = NoiseStream::new(3);
        let out = run_moments(s, &p, EnvironmentSpec::None, &free, 0.01, 100, &mut noise, Closure::Gaussian, 100).unwrap();
        let last = out.last().unwrap();
        // free spreading: Vx = Vx0 + Vp t^2 / m^2, with Euler error O(dt)
        assert!((last.var_x - 1.25).abs() < 0.01);
        assert!((last.mean_x - 1.0).abs() < 1e-12);
        assert_eq!(last.var_p, 0.25);
    }

    #[test]
    fn rejects_other_barriers() {
        let p = params(1.0);
        let s = TrajectoryMoments::steady_state(&p, 0.0, 1.0).unwrap();
        let env = EnvironmentSpec::PositionCoupling { d: 1.0 };
        let r = moment_step_with_increment(&s, &p, env, &PotentialSpec::Gaussian { v0: 1.0, a: 0.1 }, 0.01, 0.0, Closure::Gaussian, 0);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn negative_variance_is_reported() {
        let p = params(1.0);
        let s = TrajectoryMoments {
            mean_x: 0.0,
            mean_p: 0.0,
            var_x: 1e-3,
            var_p: 1.0,
            cov_xp: -1.0,
            time: 0.0,
        };
        let r = moment_step_with_increment(&s, &p, EnvironmentSpec::None, &PotentialSpec::Step { v0: 0.0 }, 0.1, 0.0, Closure::Gaussian, 7);
        assert_eq!(r, Err(Error::ClosureInconsistent { step: 7 }));
    }
}
