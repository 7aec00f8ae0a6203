//! Perturbative reflection of a plane wave off a static barrier when the
//! particle itself is coupled to the environment, through either its
//! position or its momentum.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_cos, Tolerance};
use crate::states::PhysicalParams;

/// Lindblad coupling of the particle to its environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvironmentSpec {
    None,
    /// `L = (2D/hbar^2)^{1/2} x`.
    PositionCoupling { d: f64 },
    /// `L = D_p^{1/2} p`.
    MomentumCoupling { d_p: f64 },
}

impl EnvironmentSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EnvironmentSpec::PositionCoupling { d } if !(d >= 0.0 && d.is_finite()) => {
                Err(Error::invalid("D", "must be >= 0"))
            }
            EnvironmentSpec::MomentumCoupling { d_p } if !(d_p >= 0.0 && d_p.is_finite()) => {
                Err(Error::invalid("D_p", "must be >= 0"))
            }
            _ => Ok(()),
        }
    }
}

/// Interaction time: finite, or the long-time limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tau {
    Finite(f64),
    Infinite,
}

impl Tau {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Tau::Finite(t) => Some(t),
            Tau::Infinite => None,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Tau::Finite(t) if !(t > 0.0 && t.is_finite()) => Err(Error::invalid("tau", "must be positive")),
            _ => Ok(()),
        }
    }
}

fn elapsed(t: f64, t0: f64) -> Result<f64> {
    let dt = t - t0;
    if !(dt > 0.0) {
        return Err(Error::invalid("t", "propagator needs t > t'"));
    }
    Ok(dt)
}

/// Position-space density-matrix propagator `J(x, y, t | x', y', t')` for `V = 0`.
#[allow(clippy::too_many_arguments)]
pub fn propagator_position(
    x: f64,
    y: f64,
    t: f64,
    x0: f64,
    y0: f64,
    t0: f64,
    params: &PhysicalParams,
    d: f64,
) -> Result<Complex64> {
    let dt = elapsed(t, t0)?;
    let (m, hbar) = (params.m, params.hbar);
    let free = m / (2.0 * PI * hbar * dt);
    let phase = m / (2.0 * hbar * dt) * ((x - x0).powi(2) - (y - y0).powi(2));
    let (r, r0) = (x - y, x0 - y0);
    let decay = -d * dt / (3.0 * hbar * hbar) * (r * r + r * r0 + r0 * r0);
    Ok(Complex64::from_polar(free * decay.exp(), phase))
}

/// Smooth part of the momentum-space propagator.
///
/// For position coupling the factor multiplies `delta(p - q - p' + q')`; for
/// momentum coupling and no coupling it multiplies `delta(p - p') delta(q - q')`.
/// The constraints are left to the caller.
#[allow(clippy::too_many_arguments)]
pub fn propagator_momentum(
    p: f64,
    q: f64,
    t: f64,
    p0: f64,
    q0: f64,
    t0: f64,
    params: &PhysicalParams,
    env: EnvironmentSpec,
) -> Result<Complex64> {
    let dt = elapsed(t, t0)?;
    env.validate()?;
    let (m, hbar) = (params.m, params.hbar);
    match env {
        EnvironmentSpec::PositionCoupling { d } => {
            if d == 0.0 {
                return Err(Error::DeltaLimit("diffusion kernel at D = 0"));
            }
            let gauss = (-(p - p0).powi(2) / (4.0 * d * dt)).exp() / (4.0 * PI * d * dt).sqrt();
            let phase = -dt * (p * p - q * q + p0 * p0 - q0 * q0) / (4.0 * m * hbar);
            let decay = -d * dt.powi(3) * (p - q).powi(2) / (12.0 * m * m * hbar * hbar);
            Ok(Complex64::from_polar(gauss * decay.exp(), phase))
        }
        EnvironmentSpec::MomentumCoupling { d_p } => {
            let phase = -dt * (p * p - q * q) / (2.0 * m * hbar);
            Ok(Complex64::from_polar((-d_p * dt * (p - q).powi(2)).exp(), phase))
        }
        EnvironmentSpec::None => Ok(Complex64::from_polar(1.0, -dt * (p * p - q * q) / (2.0 * m * hbar))),
    }
}

/// `p_bar^2 / (D t_z)`; the narrow-diffusion replacement of the momentum
/// kernel by a delta function needs this to be large.
pub fn narrow_diffusion_ratio(params: &PhysicalParams, d: f64) -> f64 {
    let t_z = params.m * params.sigma / params.p_bar;
    params.p_bar * params.p_bar / (d * t_z)
}

fn prefactor(params: &PhysicalParams, p: f64) -> f64 {
    let (m, hbar, pb) = (params.m, params.hbar, params.p_bar);
    2.0 * m / (hbar * hbar * pb) * params.potential.momentum_sqr(p - pb, hbar)
}

fn frequency(params: &PhysicalParams, p: f64) -> f64 {
    (p * p - params.p_bar * params.p_bar) / (2.0 * params.m * params.hbar)
}

/// Relative accuracy of the time integrals.
const TIME_TOL: f64 = 1e-9;

/// Reflected density for position coupling,
/// `(2m / hbar^2 p_bar) V^2(p - p_bar) int_0^tau (1 - s/tau) cos(w s) exp(-k s^3) ds`.
///
/// At `D = 0` with infinite `tau` the density is a delta function at
/// `p = -p_bar` and `Error::DeltaLimit` is returned; use
/// [`plane_wave_born_weight`] for its weight.
pub fn reflected_density_x(p: f64, params: &PhysicalParams, d: f64, tau: Tau) -> Result<f64> {
    tau.validate()?;
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::invalid("D", "must be >= 0"));
    }
    let pre = prefactor(params, p);
    if pre == 0.0 {
        return Ok(0.0);
    }
    let (m, hbar) = (params.m, params.hbar);
    let w = frequency(params, p);
    let kappa = d * (p - params.p_bar).powi(2) / (12.0 * m * m * hbar * hbar);
    // beyond kappa s^3 = 60 the integrand is below e^-60
    let cut = if kappa > 0.0 { (60.0 / kappa).cbrt() } else { f64::INFINITY };
    let tol = Tolerance::rel(TIME_TOL);
    let integral = match tau {
        Tau::Finite(t) => {
            let upper = t.min(cut);
            integrate_cos(|s| (1.0 - s / t) * (-kappa * s.powi(3)).exp(), w, 0.0, upper, tol)?.value
        }
        Tau::Infinite => {
            if kappa == 0.0 {
                return Err(Error::DeltaLimit("D = 0 with infinite tau"));
            }
            integrate_cos(|s| (-kappa * s.powi(3)).exp(), w, 0.0, cut, tol)?.value
        }
    };
    Ok(pre * integral)
}

/// Closed form of the position-coupling density at `D = 0` and finite `tau`:
/// the Born prefactor times the Fejer kernel `(1 - cos w tau) / (w^2 tau)`.
pub fn plane_wave_born_density(p: f64, params: &PhysicalParams, tau: f64) -> f64 {
    let w = frequency(params, p);
    let x = w * tau;
    // (1 - cos x) / (w^2 tau) = tau * 2 sin^2(x/2) / x^2
    let fejer = if x.abs() < 1e-4 {
        tau * (0.5 - x * x / 24.0)
    } else {
        tau * 2.0 * (0.5 * x).sin().powi(2) / (x * x)
    };
    prefactor(params, p) * fejer
}

/// Weight of the delta function `delta(p + p_bar)` that the reflected density
/// tends to without environment: `(2 pi m^2 / hbar p_bar^2) V^2(-2 p_bar)`.
pub fn plane_wave_born_weight(params: &PhysicalParams) -> f64 {
    let (m, hbar, pb) = (params.m, params.hbar, params.p_bar);
    2.0 * PI * m * m / (hbar * pb * pb) * params.potential.momentum_sqr(-2.0 * pb, hbar)
}

/// The Lorentzian factor of the momentum-coupling density,
/// `4 m hbar D_p p_bar / (pi [(p + p_bar)^2 + (2 m hbar D_p)^2 (p - p_bar)^2])`.
/// It integrates to one over all `p` and tends to `delta(p + p_bar)` as `D_p -> 0`.
pub fn momentum_coupling_kernel(p: f64, params: &PhysicalParams, d_p: f64) -> f64 {
    let (m, hbar, pb) = (params.m, params.hbar, params.p_bar);
    let c = 2.0 * m * hbar * d_p;
    2.0 * c * pb / (PI * ((p + pb).powi(2) + c * c * (p - pb).powi(2)))
}

/// Reflected density for momentum coupling in the long-time limit.
///
/// The common factor `(p - p_bar)^2` is cancelled analytically, so the value
/// at `p = p_bar` is the continuous limit.
pub fn reflected_density_p(p: f64, params: &PhysicalParams, d_p: f64) -> Result<f64> {
    if !(d_p >= 0.0 && d_p.is_finite()) {
        return Err(Error::invalid("D_p", "must be >= 0"));
    }
    if d_p == 0.0 {
        return Err(Error::DeltaLimit("D_p = 0"));
    }
    Ok(plane_wave_born_weight_at(params, p) * momentum_coupling_kernel(p, params, d_p))
}

fn plane_wave_born_weight_at(params: &PhysicalParams, p: f64) -> f64 {
    let (m, hbar, pb) = (params.m, params.hbar, params.p_bar);
    2.0 * PI * m * m / (hbar * pb * pb) * params.potential.momentum_sqr(p - pb, hbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    X,
    P,
}

/// Density for the chosen coupling. For position coupling `strength` is
/// `D`; for momentum coupling it is `D_p` and `tau` is ignored.
pub fn reflected_density(coupling: Coupling, p: f64, params: &PhysicalParams, strength: f64, tau: Tau) -> Result<f64> {
    match coupling {
        Coupling::X => reflected_density_x(p, params, strength, tau),
        Coupling::P => reflected_density_p(p, params, strength),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedSpectrum {
    pub ps: Vec<f64>,
    pub density: Vec<f64>,
    pub total: f64,
    pub tau: Tau,
    pub environment: EnvironmentSpec,
}

/// Range and truncation check for reflected totals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalOptions {
    /// Momentum range; `None` is `(-8 p_bar, 0)`.
    pub range: Option<(f64, f64)>,
    /// Largest accepted density at the lower edge relative to the peak;
    /// `None` treats the range as part of the definition and skips the check.
    pub edge_tolerance: Option<f64>,
}

impl Default for TotalOptions {
    fn default() -> Self {
        Self {
            range: None,
            edge_tolerance: Some(1e-8),
        }
    }
}

impl TotalOptions {
    /// Totals defined over a fixed range, with no truncation check.
    pub fn fixed_range() -> Self {
        Self {
            range: None,
            edge_tolerance: None,
        }
    }

    pub fn resolve(&self, p_bar: f64) -> (f64, f64) {
        self.range.unwrap_or((-8.0 * p_bar, 0.0))
    }
}

/// Adaptive quadrature of a fallible density over the resolved range, with
/// break points at `-p_bar` and at `extra`.
pub(crate) fn integrate_density(
    f: impl Fn(f64) -> Result<f64> + Sync,
    p_bar: f64,
    extra: &[f64],
    opts: &TotalOptions,
) -> Result<f64> {
    let (lo, hi) = opts.resolve(p_bar);
    if !(lo < hi) {
        return Err(Error::invalid("p_range", "need lo < hi"));
    }
    if let Some(tol) = opts.edge_tolerance {
        let n = 32;
        let mut peak: f64 = 0.0;
        for i in 0..=n {
            peak = peak.max(f(lo + (hi - lo) * i as f64 / n as f64)?.abs());
        }
        if (lo..=hi).contains(&-p_bar) {
            peak = peak.max(f(-p_bar)?.abs());
        }
        let edge = f(lo)?.abs();
        if peak > 0.0 && edge > tol * peak {
            return Err(Error::GridRangeInsufficient {
                edge_ratio: edge / peak,
            });
        }
    }
    let mut points = vec![lo, hi];
    points.extend(extra.iter().chain([&-p_bar]).filter(|&&x| lo < x && x < hi));
    points.sort_by(f64::total_cmp);
    points.dedup();
    // the closure cannot return errors, so they are collected on the side
    let failure = std::sync::Mutex::new(None);
    let est = integrate(
        |p| match f(p) {
            Ok(v) => v,
            Err(e) => {
                failure.lock().expect("poisoned").get_or_insert(e);
                0.0
            }
        },
        &points,
        Tolerance {
            abs: 0.0,
            rel: 1e-7,
            max_intervals: 2000,
        },
    )?;
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(est.value)
}

/// Total reflected probability.
pub fn total_reflected(
    coupling: Coupling,
    params: &PhysicalParams,
    strength: f64,
    tau: Tau,
    opts: &TotalOptions,
) -> Result<f64> {
    if params.potential.v0() == 0.0 {
        return Ok(0.0);
    }
    integrate_density(|p| reflected_density(coupling, p, params, strength, tau), params.p_bar, &[], opts)
}

/// Density sampled on `n` uniform points of `[lo, hi)`, plus the total.
pub fn reflected_spectrum(
    coupling: Coupling,
    params: &PhysicalParams,
    strength: f64,
    tau: Tau,
    grid: (f64, f64, usize),
    opts: &TotalOptions,
) -> Result<ReflectedSpectrum> {
    let (lo, hi, n) = grid;
    let h = (hi - lo) / n.max(1) as f64;
    let ps: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let density = ps
        .par_iter()
        .map(|&p| reflected_density(coupling, p, params, strength, tau))
        .collect::<Result<Vec<f64>>>()?;
    let total = total_reflected(coupling, params, strength, tau, opts)?;
    let environment = match coupling {
        Coupling::X => EnvironmentSpec::PositionCoupling { d: strength },
        Coupling::P => EnvironmentSpec::MomentumCoupling { d_p: strength },
    };
    Ok(ReflectedSpectrum {
        ps,
        density,
        total,
        tau,
        environment,
    })
}

/// Totals over a sweep of coupling strengths, evaluated in parallel.
pub fn total_reflected_sweep(
    coupling: Coupling,
    params: &PhysicalParams,
    strengths: &[f64],
    tau: Tau,
    opts: &TotalOptions,
) -> Result<Vec<(f64, f64)>> {
    strengths
        .par_iter()
        .map(|&s| Ok((s, total_reflected(coupling, params, s, tau, opts)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use proptest::prelude::*;

    fn params() -> PhysicalParams {
        PhysicalParams {
            sigma: 10.0,
            potential: PotentialSpec::Gaussian { v0: 0.01, a: 0.1 },
            ..Default::default()
        }
    }

    #[test]
    fn position_propagator_limits() {
        let p = params();
        let diag = propagator_position(1.0, 1.0, 2.0, 0.3, 0.3, 0.0, &p, 5.0).unwrap();
        let free = propagator_position(1.0, 1.0, 2.0, 0.3, 0.3, 0.0, &p, 0.0).unwrap();
        assert!((diag - free).norm() < 1e-15);
        // D = 0 factorizes into a kernel for x times the conjugate kernel for y
        let k = |x: f64, x0: f64| {
            let dt = 2.0;
            Complex64::from_polar((1.0 / (2.0 * PI * dt)).sqrt(), (x - x0).powi(2) / (2.0 * dt))
        };
        let j = propagator_position(1.0, -0.5, 2.0, 0.3, 0.7, 0.0, &p, 0.0).unwrap();
        assert!((j - k(1.0, 0.3) * k(-0.5, 0.7).conj()).norm() < 1e-15);
        assert!(propagator_position(0.0, 0.0, 1.0, 0.0, 0.0, 1.0, &p, 1.0).is_err());
    }

    #[test]
    fn momentum_propagator_diagonal_and_damping() {
        let p = params();
        let env = EnvironmentSpec::MomentumCoupling { d_p: 2.0 };
        let on = propagator_momentum(0.7, 0.7, 1.0, 0.7, 0.7, 0.0, &p, env).unwrap();
        assert!((on - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        // D_p t (p - q)^2 = 1
        let off = propagator_momentum(1.0, 0.5, 2.0, 1.0, 0.5, 0.0, &p, env).unwrap();
        assert!((off.norm() - (-1.0f64).exp()).abs() < 1e-15);
        let x = EnvironmentSpec::PositionCoupling { d: 0.3 };
        let j = propagator_momentum(0.4, 0.4, 1.5, 0.4, 0.4, 0.0, &p, x).unwrap();
        assert!((j.norm() - 1.0 / (4.0 * PI * 0.3 * 1.5f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn finite_tau_at_zero_diffusion_is_fejer() {
        let p = params();
        let tau = p.default_tau();
        for &q in &[-1.7, -1.0, -0.99, -0.5, -0.2] {
            let a = reflected_density_x(q, &p, 0.0, Tau::Finite(tau)).unwrap();
            let b = plane_wave_born_density(q, &p, tau);
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300), "{q}: {a} {b}");
        }
    }

    #[test]
    fn infinite_tau_without_diffusion_is_a_delta() {
        let p = params();
        assert!(matches!(
            reflected_density_x(-1.0, &p, 0.0, Tau::Infinite),
            Err(Error::DeltaLimit(_))
        ));
        let w = plane_wave_born_weight(&p);
        assert!((w - 1e-4 * (-0.04f64).exp()).abs() < 1e-18);
    }

    #[test]
    fn momentum_density_at_minus_p_bar() {
        let p = params();
        for d_p in [0.1, 1.0, 3.0] {
            let v2 = 1e-4 * (-0.04f64).exp() / (2.0 * PI);
            let got = reflected_density_p(-1.0, &p, d_p).unwrap();
            assert!((got - v2 / (2.0 * d_p)).abs() < 1e-15 * got);
        }
        // finite at p = p_bar
        assert!(reflected_density_p(1.0, &p, 1.0).unwrap().is_finite());
    }

    #[test]
    fn kernel_integrates_to_one() {
        let p = params();
        for d_p in [1e-3, 0.1, 1.0, 10.0, 100.0] {
            let r = crate::quadrature::integrate_to_infinity(|u| momentum_coupling_kernel(u, &p, d_p) + momentum_coupling_kernel(-u, &p, d_p), 0.0, Tolerance::rel(1e-10));
            let r = r.unwrap().value;
            assert!((r - 1.0).abs() < 1e-4, "{d_p}: {r}");
        }
    }

    #[test]
    fn strong_momentum_coupling_spreads_into_transmission() {
        let p = params();
        let at_pos = reflected_density_p(0.5, &p, 1.0).unwrap();
        let at_peak = reflected_density_p(-1.0, &p, 1.0).unwrap();
        assert!(at_pos > 0.1 * at_peak);
        let weak = reflected_density_p(0.5, &p, 0.01).unwrap() / reflected_density_p(-1.0, &p, 0.01).unwrap();
        assert!(weak < 1e-3);
    }

    #[test]
    fn zero_barrier_gives_zero() {
        let p = PhysicalParams {
            potential: PotentialSpec::Gaussian { v0: 0.0, a: 0.1 },
            ..params()
        };
        assert_eq!(total_reflected(Coupling::P, &p, 1.0, Tau::Infinite, &TotalOptions::default()).unwrap(), 0.0);
        assert_eq!(reflected_density_x(-1.0, &p, 1.0, Tau::Infinite).unwrap(), 0.0);
    }

    #[test]
    fn range_check() {
        let p = PhysicalParams {
            potential: PotentialSpec::Gaussian { v0: 0.01, a: 0.01 },
            ..params()
        };
        assert!(matches!(
            total_reflected(Coupling::P, &p, 1.0, Tau::Infinite, &TotalOptions::default()),
            Err(Error::GridRangeInsufficient { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn densities_scale_as_barrier_squared(q in -3.0..-0.05f64, d in 0.01..3.0f64, v in 0.001..0.1f64) {
            let p1 = PhysicalParams { potential: PotentialSpec::Gaussian { v0: v, a: 0.1 }, ..params() };
            let p2 = PhysicalParams { potential: PotentialSpec::Gaussian { v0: 2.0 * v, a: 0.1 }, ..params() };
            let a = reflected_density_p(q, &p1, d).unwrap();
            let b = reflected_density_p(q, &p2, d).unwrap();
            prop_assert!((b / a - 4.0).abs() < 1e-12);
            let a = reflected_density_x(q, &p1, d, Tau::Finite(25.0)).unwrap();
            let b = reflected_density_x(q, &p2, d, Tau::Finite(25.0)).unwrap();
            prop_assert!((b / a - 4.0).abs() < 1e-12);
        }

        #[test]
        fn momentum_density_is_nonnegative(q in -8.0..8.0f64, d in 1e-4..100.0f64) {
            prop_assert!(reflected_density_p(q, &params(), d).unwrap() >= 0.0);
        }
    }
}
