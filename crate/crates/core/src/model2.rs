//! Two-particle scattering: a light particle reflects off a massive target
//! whose position couples to an environment. Reflected densities to second
//! order in the interaction, with and without the environment.

use std::f64::consts::PI;
use std::sync::Mutex;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model1::{integrate_density, Tau, TotalOptions};
use crate::quadrature::{integrate, integrate_cos, Tolerance};
use crate::states::PhysicalParams;
use crate::timescales::{compute_timescales, model2_kinematics, Thresholds};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model2Config {
    pub params: PhysicalParams,
    pub tau: Tau,
    /// Use the steady localized width `(hbar^3 / 8 M D)^{1/4}` for the target
    /// instead of `params.sigma_target`.
    pub steady_target: bool,
}

impl Model2Config {
    /// Finite `tau` from the approach distance, explicit target width.
    pub fn new(params: PhysicalParams) -> Self {
        Self {
            params,
            tau: Tau::Finite(params.default_tau()),
            steady_target: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate_two_body()?;
        self.tau.validate()
    }

    /// Target width used at diffusion constant `d`.
    pub fn sigma_target(&self, d: f64) -> Result<f64> {
        if self.steady_target {
            steady_target_width(&self.params, d)
        } else {
            Ok(self.params.sigma_target)
        }
    }
}

/// `(hbar^3 / 8 M D)^{1/4}`.
pub fn steady_target_width(params: &PhysicalParams, d: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::Undefined {
            quantity: "steady target width",
            reason: "requires D > 0",
        });
    }
    Ok((params.hbar.powi(3) / (8.0 * params.m_target * d)).powf(0.25))
}

/// Energy balance `E(p, P)` of a collision ending with momenta `(p, P)`;
/// the incoming target momentum is `P + p - p_bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyConstraint {
    /// `E(p, P)`; the density carries `delta(E)`.
    pub mismatch: f64,
    /// Outgoing target momentum solving `E = 0` at this `p`; `None` at `p = p_bar`.
    pub root: Option<f64>,
    /// `|dE/dP| = |p - p_bar| / M`.
    pub jacobian: f64,
}

impl EnergyConstraint {
    pub fn new(params: &PhysicalParams, p: f64, big_p: f64) -> Self {
        Self {
            mismatch: energy_mismatch(params, p, big_p),
            root: constraint_root(params, p),
            jacobian: (p - params.p_bar).abs() / params.m_target,
        }
    }
}

pub fn energy_mismatch(params: &PhysicalParams, p: f64, big_p: f64) -> f64 {
    let (m, big_m, pb) = (params.m, params.m_target, params.p_bar);
    let k = p - pb;
    (pb * pb - p * p) / (2.0 * m) + ((big_p + k).powi(2) - big_p * big_p) / (2.0 * big_m)
}

pub fn constraint_root(params: &PhysicalParams, p: f64) -> Option<f64> {
    let (m, big_m, pb) = (params.m, params.m_target, params.p_bar);
    let k = p - pb;
    if k == 0.0 {
        return None;
    }
    Some((big_m * (p * p - pb * pb) / m - k * k) / (2.0 * k))
}

/// Smooth coefficient of a density together with the energy constraint it
/// multiplies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrainedDensity {
    pub coefficient: f64,
    pub constraint: EnergyConstraint,
}

fn barrier_sqr(params: &PhysicalParams, k: f64) -> f64 {
    params.potential.momentum_sqr(k, params.hbar)
}

/// Energy mismatch at the mean target momentum, over `hbar`: the recoil
/// frequency of the time integrals.
fn recoil_frequency(params: &PhysicalParams, p: f64) -> f64 {
    let (m, big_m, pb, big_pb) = (params.m, params.m_target, params.p_bar, params.p_bar_target);
    let k = p - pb;
    ((pb * pb - p * p) / (2.0 * m) + (big_pb * big_pb - (big_pb - k).powi(2)) / (2.0 * big_m)) / params.hbar
}

/// Joint density of `(p, P)` without environment at infinite time.
pub fn joint_reflected_noenv(cfg: &Model2Config, p: f64, big_p: f64) -> Result<ConstrainedDensity> {
    cfg.validate()?;
    let pr = &cfg.params;
    let sigma = cfg.sigma_target(pr.d)?;
    let (m, hbar, pb) = (pr.m, pr.hbar, pr.p_bar);
    let k = p - pb;
    let dp = big_p - pr.p_bar_target;
    let coefficient = 2.0 * PI.sqrt() * sigma * m / (hbar * hbar * pb)
        * barrier_sqr(pr, k)
        * (-(sigma * (k + dp) / hbar).powi(2)).exp();
    Ok(ConstrainedDensity {
        coefficient,
        constraint: EnergyConstraint::new(pr, p, big_p),
    })
}

/// Marginal density of the reflected momentum; the energy constraint is
/// integrated out over the target momentum.
pub fn marginal_reflected_noenv(cfg: &Model2Config, p: f64) -> Result<f64> {
    cfg.validate()?;
    let pr = &cfg.params;
    let sigma = cfg.sigma_target(pr.d)?;
    let (m, big_m, hbar, pb) = (pr.m, pr.m_target, pr.hbar, pr.p_bar);
    let k = p - pb;
    if k == 0.0 {
        return Err(Error::invalid("p", "the marginal is singular at p = p_bar"));
    }
    let w = recoil_frequency(pr, p);
    let pre = 2.0 * PI.sqrt() * sigma * m * big_m / (hbar * hbar * pb * k.abs());
    Ok(pre * barrier_sqr(pr, k) * (-(sigma * big_m * w / k).powi(2)).exp())
}

/// Marginal for a heavy target at rest, keeping only the leading order in `m / M`.
pub fn marginal_reflected_heavy_target(cfg: &Model2Config, p: f64) -> Result<f64> {
    cfg.validate()?;
    let pr = &cfg.params;
    let sigma = cfg.sigma_target(pr.d)?;
    let (m, big_m, hbar, pb) = (pr.m, pr.m_target, pr.hbar, pr.p_bar);
    let k = p - pb;
    if k == 0.0 {
        return Err(Error::invalid("p", "the marginal is singular at p = p_bar"));
    }
    let pre = 2.0 * PI.sqrt() * sigma * m * big_m / (hbar * hbar * pb * k.abs());
    let e = sigma * big_m * (p + pb) / (2.0 * hbar * m);
    Ok(pre * barrier_sqr(pr, k) * (-e * e).exp())
}

/// Zeroth-order distribution of the target momentum.
pub fn target_momentum_distribution(cfg: &Model2Config, big_p: f64) -> Result<f64> {
    cfg.validate()?;
    let pr = &cfg.params;
    let sigma = cfg.sigma_target(pr.d)?;
    let dp = big_p - pr.p_bar_target;
    Ok(sigma / (PI.sqrt() * pr.hbar) * (-(sigma * dp / pr.hbar).powi(2)).exp())
}

/// Reflected density conditioned on finding the target at `big_p`.
pub fn conditional_reflected_noenv(cfg: &Model2Config, p: f64, big_p: f64) -> Result<ConstrainedDensity> {
    cfg.validate()?;
    let pr = &cfg.params;
    let sigma = cfg.sigma_target(pr.d)?;
    let (m, hbar, pb) = (pr.m, pr.hbar, pr.p_bar);
    let k = p - pb;
    let dp = big_p - pr.p_bar_target;
    let suppression = (-(sigma / hbar).powi(2) * ((k + dp).powi(2) - dp * dp)).exp();
    Ok(ConstrainedDensity {
        coefficient: 2.0 * PI * m / (hbar * pb) * barrier_sqr(pr, k) * suppression,
        constraint: EnergyConstraint::new(pr, p, big_p),
    })
}

const TIME_TOL: f64 = 1e-9;

/// `(1 - e^{-x}) / x`, with the removable point at 0.
fn relative_saturation(x: f64) -> f64 {
    if x < 1e-12 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// Marginal reflected density with the target coupled to an environment of
/// strength `d`, after the closed-form inner time integral.
pub fn reflected_density_env(cfg: &Model2Config, p: f64, d: f64) -> Result<f64> {
    cfg.validate()?;
    if !(d >= 0.0 && d.is_finite()) {
        return Err(Error::invalid("D", "must be >= 0"));
    }
    let pr = &cfg.params;
    let (m, big_m, hbar, pb) = (pr.m, pr.m_target, pr.hbar, pr.p_bar);
    let k = p - pb;
    let v2 = barrier_sqr(pr, k);
    if v2 == 0.0 {
        return Ok(0.0);
    }
    let tau = match cfg.tau {
        Tau::Finite(t) => t,
        Tau::Infinite if d == 0.0 => return marginal_reflected_noenv(cfg, p),
        Tau::Infinite => return Err(Error::DegenerateLimit("the environment density vanishes as 1/tau")),
    };
    let sigma = if d > 0.0 {
        cfg.sigma_target(d)?
    } else {
        cfg.sigma_target(pr.d)?
    };
    let w = recoil_frequency(pr, p);
    let c3 = d * k * k / (3.0 * (big_m * hbar).powi(2));
    let c2 = (k / (2.0 * sigma * big_m)).powi(2);
    let ce = d * (k / (big_m * hbar)).powi(2);
    let mut cut = tau;
    if c3 > 0.0 {
        cut = cut.min((60.0 / c3).cbrt());
    }
    if c2 > 0.0 {
        cut = cut.min((60.0 / c2).sqrt());
    }
    let g = |s: f64| {
        let eps = ce * s * s * (tau - s);
        (1.0 - s / tau) * relative_saturation(eps) * (-c3 * s.powi(3) - c2 * s * s).exp()
    };
    let integral = integrate_cos(g, w, 0.0, cut, Tolerance::rel(TIME_TOL))?.value;
    Ok(2.0 * m / (hbar * hbar * pb) * v2 * integral)
}

/// Leading exponential factor of the conditional density with environment,
/// `exp(-Sigma^2 [(k + dP)^2 - dP^2] / (4 D tau Sigma^2 + hbar^2))`.
pub fn conditional_env_prefactor(cfg: &Model2Config, p: f64, big_p: f64, d: f64) -> Result<f64> {
    cfg.validate()?;
    let pr = &cfg.params;
    let tau = cfg.tau.value().ok_or(Error::DegenerateLimit("requires finite tau"))?;
    let sigma = cfg.sigma_target(d)?;
    let k = p - pr.p_bar;
    let dp = big_p - pr.p_bar_target;
    let den = 4.0 * d * tau * sigma * sigma + pr.hbar * pr.hbar;
    Ok((-sigma * sigma / den * ((k + dp).powi(2) - dp * dp)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionalForm {
    /// Both time integrals evaluated numerically.
    Full,
    /// Large-`tau` form, in which the inner integral is elementary.
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalEnv {
    pub value: f64,
    /// `|Im|` of the integral plus its conjugate, relative to `|value|`.
    pub imaginary_residue: f64,
}

/// Reflected density conditioned on the target momentum, with environment.
pub fn conditional_reflected_env(
    cfg: &Model2Config,
    p: f64,
    big_p: f64,
    d: f64,
    form: ConditionalForm,
) -> Result<ConditionalEnv> {
    cfg.validate()?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid("D", "must be positive"));
    }
    let tau = cfg
        .tau
        .value()
        .ok_or(Error::DegenerateLimit("the conditional density vanishes as 1/tau"))?;
    if form == ConditionalForm::Reduced {
        let value = reflected_density_env(cfg, p, d)?;
        return Ok(ConditionalEnv {
            value,
            imaginary_residue: 0.0,
        });
    }
    let pr = &cfg.params;
    let (m, big_m, hbar, pb) = (pr.m, pr.m_target, pr.hbar, pr.p_bar);
    let sigma = cfg.sigma_target(d)?;
    let k = p - pb;
    let dp = big_p - pr.p_bar_target;
    let v2 = barrier_sqr(pr, k);
    if v2 == 0.0 {
        return Ok(ConditionalEnv {
            value: 0.0,
            imaginary_residue: 0.0,
        });
    }
    let s2 = sigma * sigma;
    let den = 4.0 * d * tau * s2 + hbar * hbar;
    let w = recoil_frequency(pr, p);
    let mh2 = (big_m * hbar).powi(2);
    let exponent = |s: f64, u: f64| {
        let v = s + 2.0 * u;
        let phase = -w * s - s / (2.0 * big_m * hbar) * (4.0 * d * v * s2 + 2.0 * hbar * hbar) / den * k * (k + dp);
        let real = -d * k * k * s.powi(3) / (3.0 * mh2) - d * k * k * s * s * u / mh2
            + d * s * s * k * k / (4.0 * mh2) * (4.0 * d * v * v * s2 + 4.0 * hbar * hbar * (v - tau)) / den;
        Complex64::new(real, phase).exp()
    };
    let failure = Mutex::new(None);
    let inner_tol = Tolerance::rel(1e-10);
    let inner = |s: f64| -> Complex64 {
        let span = tau - s;
        if span <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match integrate(|u| exponent(s, u), &[0.0, 0.5 * span, span], inner_tol) {
            Ok(e) => e.value,
            Err(e) => {
                failure.lock().expect("poisoned").get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    };
    let points: Vec<f64> = (0..=8).map(|i| tau * i as f64 / 8.0).collect();
    let z = integrate(inner, &points, Tolerance::rel(1e-8))?.value;
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    let both = z + z.conj();
    let pre = m / (hbar * hbar * pb) * v2 * conditional_env_prefactor(cfg, p, big_p, d)? / tau;
    let value = pre * both.re;
    Ok(ConditionalEnv {
        value,
        imaginary_residue: if value != 0.0 {
            (pre * both.im).abs() / value.abs()
        } else {
            0.0
        },
    })
}

/// Reflected density on `n` uniform points of `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model2Spectrum {
    pub d: f64,
    pub ps: Vec<f64>,
    pub density: Vec<f64>,
    /// Small negative values from quadrature truncation that were set to 0.
    pub clamped: usize,
}

/// Negative lobes below this fraction of the peak are truncation noise.
const NEGATIVE_FLOOR: f64 = 1e-6;

fn clamp_negative(values: &mut [f64]) -> Result<usize> {
    let peak = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut clamped = 0;
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_FLOOR * peak {
                return Err(Error::QuadratureNonConvergence {
                    achieved: -*v,
                    requested: NEGATIVE_FLOOR * peak,
                });
            }
            *v = 0.0;
            clamped += 1;
        }
    }
    Ok(clamped)
}

pub fn model2_spectrum(cfg: &Model2Config, d: f64, grid: (f64, f64, usize)) -> Result<Model2Spectrum> {
    let (lo, hi, n) = grid;
    let h = (hi - lo) / n.max(1) as f64;
    let ps: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
    let mut density = ps
        .par_iter()
        .map(|&p| reflected_density_env(cfg, p, d))
        .collect::<Result<Vec<f64>>>()?;
    let clamped = clamp_negative(&mut density)?;
    Ok(Model2Spectrum {
        d,
        ps,
        density,
        clamped,
    })
}

/// Joint, marginal and conditional densities on a `(p, P)` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointReflectedResult {
    pub ps: Vec<f64>,
    pub big_ps: Vec<f64>,
    /// Joint coefficients, row-major with one row per `p`.
    pub joint: Vec<f64>,
    /// Energy constraint root and Jacobian per `p`.
    pub constraints: Vec<EnergyConstraint>,
    pub marginal: Vec<f64>,
    /// Conditional coefficients at the requested target momentum.
    pub conditional: Option<(f64, Vec<f64>)>,
    /// Marginal integrated over the total range.
    pub total: f64,
}

impl JointReflectedResult {
    pub fn joint_at(&self, i: usize, j: usize) -> f64 {
        self.joint[i * self.big_ps.len() + j]
    }
}

pub fn joint_reflected_grid(
    cfg: &Model2Config,
    ps: &[f64],
    big_ps: &[f64],
    condition_on: Option<f64>,
    opts: &TotalOptions,
) -> Result<JointReflectedResult> {
    cfg.validate()?;
    let rows = ps
        .par_iter()
        .map(|&p| {
            let row = big_ps
                .iter()
                .map(|&q| joint_reflected_noenv(cfg, p, q).map(|j| j.coefficient))
                .collect::<Result<Vec<f64>>>()?;
            Ok((row, EnergyConstraint::new(&cfg.params, p, 0.0), marginal_reflected_noenv(cfg, p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut joint = Vec::with_capacity(ps.len() * big_ps.len());
    let mut constraints = Vec::with_capacity(ps.len());
    let mut marginal = Vec::with_capacity(ps.len());
    for (row, c, mg) in rows {
        joint.extend(row);
        constraints.push(c);
        marginal.push(mg);
    }
    let conditional = match condition_on {
        Some(q) => Some((
            q,
            ps.iter()
                .map(|&p| conditional_reflected_noenv(cfg, p, q).map(|c| c.coefficient))
                .collect::<Result<Vec<f64>>>()?,
        )),
        None => None,
    };
    let total = total_reflected_noenv(cfg, opts)?;
    Ok(JointReflectedResult {
        ps: ps.to_vec(),
        big_ps: big_ps.to_vec(),
        joint,
        constraints,
        marginal,
        conditional,
        total,
    })
}

/// Reflected momentum of a head-on collision with the target at its mean
/// momentum; the marginal peaks here.
pub fn elastic_peak(params: &PhysicalParams) -> Result<f64> {
    Ok(model2_kinematics(params.m, params.m_target, params.p_bar_target, params.p_bar)?.1)
}

fn integrate_marginal(cfg: &Model2Config, f: impl Fn(f64) -> Result<f64> + Sync, opts: &TotalOptions) -> Result<f64> {
    let pr = &cfg.params;
    // the peak at the elastic momentum can be far narrower than p_bar
    let peak = elastic_peak(pr)?;
    let width = pr.hbar * pr.m / (cfg.sigma_target(pr.d)? * pr.m_target);
    let extra: Vec<f64> = [-16.0, -4.0, -1.0, 0.0, 1.0, 4.0, 16.0]
        .iter()
        .map(|x| peak + x * width)
        .collect();
    integrate_density(f, pr.p_bar, &extra, opts)
}

pub fn total_reflected_noenv(cfg: &Model2Config, opts: &TotalOptions) -> Result<f64> {
    if cfg.params.potential.v0() == 0.0 {
        return Ok(0.0);
    }
    integrate_marginal(cfg, |p| marginal_reflected_noenv(cfg, p), opts)
}

/// Standard deviation of the no-environment marginal over the total range.
pub fn marginal_peak_width(cfg: &Model2Config, opts: &TotalOptions) -> Result<f64> {
    let f = |p: f64| marginal_reflected_noenv(cfg, p);
    let z = integrate_marginal(cfg, f, opts)?;
    if !(z > 0.0) {
        return Err(Error::Undefined {
            quantity: "peak width",
            reason: "no reflected weight",
        });
    }
    let mean = integrate_marginal(cfg, |p| Ok(p * f(p)?), opts)? / z;
    let var = integrate_marginal(cfg, |p| Ok((p - mean).powi(2) * f(p)?), opts)? / z;
    Ok(var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model2Curve {
    pub points: Vec<(f64, f64)>,
    /// Totals strictly decrease along the sweep, taken in increasing `D`.
    pub monotone_decreasing: bool,
}

/// Total reflected probability with environment for each `D` in the sweep.
pub fn total_reflected_model2(cfg: &Model2Config, d_sweep: &[f64], opts: &TotalOptions) -> Result<Model2Curve> {
    cfg.validate()?;
    let points = d_sweep
        .par_iter()
        .map(|&d| {
            if cfg.params.potential.v0() == 0.0 {
                return Ok((d, 0.0));
            }
            let total = integrate_density(|p| reflected_density_env(cfg, p, d), cfg.params.p_bar, &[], opts)?;
            Ok((d, total))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone_decreasing = sorted.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(Model2Curve {
        points,
        monotone_decreasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cutoff {
    /// `T_z = M Sigma / p_bar`.
    TargetZeno,
    /// `T_d_p = (M^2 hbar^2 / D p_bar^2)^{1/3}`.
    TargetDecoherence,
    /// `T_1 = M hbar / (p_bar (D t_z)^{1/2})`.
    Recoil,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model2Cutoffs {
    pub t_z: f64,
    pub t_d_p: f64,
    pub t_1: f64,
    pub t_e: f64,
    pub dominant: Cutoff,
    /// `min(T_z, T_d_p, T_1) / t_E`.
    pub margin: f64,
    pub suppressed: bool,
}

/// Cutoffs of the time integral in the environment density and the
/// resulting suppression verdict.
pub fn timescale_cutoffs_model2(cfg: &Model2Config, d: f64, thresholds: Thresholds) -> Result<Model2Cutoffs> {
    cfg.validate()?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::invalid("D", "must be positive"));
    }
    let params = PhysicalParams {
        d,
        sigma_target: cfg.sigma_target(d)?,
        ..cfg.params
    };
    let r = compute_timescales(&params, None)?;
    let undefined = || Error::Undefined {
        quantity: "target cutoffs",
        reason: "requires D > 0",
    };
    let t_d_p = r.big_t_d_p.ok_or_else(undefined)?;
    let t_1 = r.big_t_1.ok_or_else(undefined)?;
    let candidates = [
        (Cutoff::TargetZeno, r.big_t_z),
        (Cutoff::TargetDecoherence, t_d_p),
        (Cutoff::Recoil, t_1),
    ];
    let (dominant, smallest) = candidates
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let margin = smallest / r.t_e;
    Ok(Model2Cutoffs {
        t_z: r.big_t_z,
        t_d_p,
        t_1,
        t_e: r.t_e,
        dominant,
        margin,
        suppressed: margin < thresholds.much_less,
    })
}
