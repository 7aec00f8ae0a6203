//! Characteristic times of the light particle and the target, and the
//! regime verdicts built from their ratios.

use crate::error::{Error, Result};
use crate::states::PhysicalParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimescaleReport {
    /// `hbar / E` with `E = p_bar^2 / 2m`.
    pub t_e: f64,
    /// `m sigma / p_bar`.
    pub t_z: f64,
    /// `m sigma_q / p_bar`.
    pub t_z_qsd: Option<f64>,
    /// `hbar^2 / (D l^2)`.
    pub t_d: Option<f64>,
    pub ell: f64,
    /// `(m hbar / D)^{1/2}`.
    pub t_loc: Option<f64>,
    /// `(m^2 hbar^2 / D p_bar^2)^{1/3}`.
    pub t_d_p: Option<f64>,
    /// `1 / (D_p p_bar^2)`.
    pub t_p: Option<f64>,
    /// `p_bar^2 / D`.
    pub t_f: Option<f64>,
    /// `M Sigma / p_bar`.
    pub big_t_z: f64,
    /// `hbar^2 / (D Sigma^2)`.
    pub big_t_d: Option<f64>,
    /// `Sigma_p^2 / D`.
    pub big_t_f: Option<f64>,
    /// `(M hbar / D)^{1/2}`.
    pub big_t_loc: Option<f64>,
    /// `(M^2 hbar^2 / D p_bar^2)^{1/3}`.
    pub big_t_d_p: Option<f64>,
    /// `M hbar / (p_bar (D t_z)^{1/2})`.
    pub big_t_1: Option<f64>,
    pub sigma_q: Option<f64>,
    pub sigma_p: Option<f64>,
    /// Target momentum width, `hbar / Sigma`.
    pub big_sigma_p: f64,
}

/// A named, defined timescale together with its formula, for tabular output.
#[derive(Debug, Clone, PartialEq)]
pub struct TimescaleRow {
    pub name: &'static str,
    pub value: Option<f64>,
    pub formula: &'static str,
    pub inputs: &'static str,
}

fn need(value: Option<f64>, quantity: &'static str) -> Result<f64> {
    value.ok_or(Error::Undefined {
        quantity,
        reason: "requires D > 0",
    })
}

impl TimescaleReport {
    /// `sigma_p / p_bar`, the small-fluctuation parameter.
    pub fn fluctuation_parameter(&self, p_bar: f64) -> Option<f64> {
        self.sigma_p.map(|s| s / p_bar)
    }

    pub fn rows(&self) -> Vec<TimescaleRow> {
        let r = |name, value, formula, inputs| TimescaleRow {
            name,
            value,
            formula,
            inputs,
        };
        vec![
            r("t_E", Some(self.t_e), "2 m hbar / p_bar^2", "m hbar p_bar"),
            r("t_z", Some(self.t_z), "m sigma / p_bar", "m sigma p_bar"),
            r("t_z_qsd", self.t_z_qsd, "m sigma_q / p_bar", "m hbar p_bar D"),
            r("t_d", self.t_d, "hbar^2 / (D l^2)", "hbar D l"),
            r("t_loc", self.t_loc, "(m hbar / D)^(1/2)", "m hbar D"),
            r("t_d_p", self.t_d_p, "(m^2 hbar^2 / (D p_bar^2))^(1/3)", "m hbar p_bar D"),
            r("t_p", self.t_p, "1 / (D_p p_bar^2)", "p_bar D_p"),
            r("t_f", self.t_f, "p_bar^2 / D", "p_bar D"),
            r("T_z", Some(self.big_t_z), "M Sigma / p_bar", "M Sigma p_bar"),
            r("T_d", self.big_t_d, "hbar^2 / (D Sigma^2)", "hbar D Sigma"),
            r("T_f", self.big_t_f, "Sigma_p^2 / D", "hbar Sigma D"),
            r("T_loc", self.big_t_loc, "(M hbar / D)^(1/2)", "M hbar D"),
            r("T_d_p", self.big_t_d_p, "(M^2 hbar^2 / (D p_bar^2))^(1/3)", "M hbar p_bar D"),
            r("T_1", self.big_t_1, "M hbar / (p_bar (D t_z)^(1/2))", "M hbar p_bar D m sigma"),
            r("sigma_q", self.sigma_q, "(hbar^3 / (8 m D))^(1/4)", "m hbar D"),
            r("sigma_p", self.sigma_p, "(2 m hbar D)^(1/4)", "m hbar D"),
            r("Sigma_p", Some(self.big_sigma_p), "hbar / Sigma", "hbar Sigma"),
        ]
    }
}

/// All timescales for `params`; `ell` is the length entering `t_d`
/// (`None` uses `sigma`).
pub fn compute_timescales(params: &PhysicalParams, ell: Option<f64>) -> Result<TimescaleReport> {
    params.validate()?;
    let ell = ell.unwrap_or(params.sigma);
    if !(ell > 0.0 && ell.is_finite()) {
        return Err(Error::invalid("ell", "must be positive"));
    }
    let PhysicalParams {
        m,
        m_target: big_m,
        hbar,
        p_bar,
        sigma,
        sigma_target: big_sigma,
        d,
        d_p,
        ..
    } = *params;
    let has_d = d > 0.0;
    let when = |ok: bool, v: f64| if ok { Some(v) } else { None };

    let t_e = 2.0 * m * hbar / (p_bar * p_bar);
    let t_z = m * sigma / p_bar;
    let sigma_q = when(has_d, (hbar.powi(3) / (8.0 * m * d)).powf(0.25));
    let sigma_p = when(has_d, (2.0 * m * hbar * d).powf(0.25));
    let big_sigma_p = hbar / big_sigma;
    let big_t_d_p = when(has_d, (big_m * big_m * hbar * hbar / (d * p_bar * p_bar)).cbrt());
    let report = TimescaleReport {
        t_e,
        t_z,
        t_z_qsd: sigma_q.map(|s| m * s / p_bar),
        t_d: when(has_d, hbar * hbar / (d * ell * ell)),
        ell,
        t_loc: when(has_d, (m * hbar / d).sqrt()),
        t_d_p: when(has_d, (m * m * hbar * hbar / (d * p_bar * p_bar)).cbrt()),
        t_p: when(d_p > 0.0, 1.0 / (d_p * p_bar * p_bar)),
        t_f: when(has_d, p_bar * p_bar / d),
        big_t_z: big_m * big_sigma / p_bar,
        big_t_d: when(has_d, hbar * hbar / (d * big_sigma * big_sigma)),
        big_t_f: when(has_d, big_sigma_p * big_sigma_p / d),
        big_t_loc: when(has_d, (big_m * hbar / d).sqrt()),
        big_t_d_p,
        big_t_1: when(has_d, big_m * hbar / (p_bar * (d * t_z).sqrt())),
        sigma_q,
        sigma_p,
        big_sigma_p,
    };
    if let (Some(t1), Some(tdp)) = (report.big_t_1, big_t_d_p) {
        let alt = tdp.powf(1.5) / t_z.sqrt();
        if ((t1 - alt) / t1).abs() > 1e-12 {
            return Err(Error::invalid("timescales", "inconsistent T_1"));
        }
    }
    Ok(report)
}

/// Thresholds for "much less than". Every verdict is `ratio < threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub much_less: f64,
    /// Threshold on `1 / (m hbar D_p)`.
    pub suppression_p: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            much_less: 0.1,
            suppression_p: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeVerdict {
    /// `t_E << t_z_qsd << t_d_p << t_loc`, each adjacent ratio below threshold.
    pub small_fluctuations_chain: bool,
    /// `sigma_p / p_bar` below threshold.
    pub momentum_width_small: bool,
    /// `t_d_p < hbar / V` with `V` the barrier height.
    pub suppression_x_possible: bool,
    /// Both of the above at once; structurally impossible.
    pub suppression_x_with_small_fluctuations: bool,
    /// `1 / (m hbar D_p)` below threshold.
    pub suppression_p: bool,
    /// `(p_bar/m) / (Sigma_p/M)` below threshold.
    pub model2_velocity_condition: bool,
    /// `T_loc / ((m/M) t_E)` below threshold.
    pub model2_tloc_condition: bool,
    /// `T_1 / t_E` below threshold.
    pub model2_t1_condition: bool,
    /// `T_z / t_E` below threshold.
    pub model2_tz_condition: bool,
    /// `T_d_p / ((m/M)^{1/3} t_E)` below threshold.
    pub model2_tdp_condition: bool,
    /// `(name, ratio)` for every condition; undefined ratios are infinite.
    pub margins: Vec<(&'static str, f64)>,
}

impl RegimeVerdict {
    pub fn margin(&self, name: &str) -> Option<f64> {
        self.margins.iter().find(|(n, _)| *n == name).map(|m| m.1)
    }
}

pub fn check_regime(
    report: &TimescaleReport,
    params: &PhysicalParams,
    thresholds: Thresholds,
) -> RegimeVerdict {
    let th = thresholds.much_less;
    let inf = f64::INFINITY;
    let div = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => a / b,
        _ => inf,
    };
    let m_ratio = params.m / params.m_target;

    let chain = [
        ("t_E/t_z_qsd", div(Some(report.t_e), report.t_z_qsd)),
        ("t_z_qsd/t_d_p", div(report.t_z_qsd, report.t_d_p)),
        ("t_d_p/t_loc", div(report.t_d_p, report.t_loc)),
    ];
    let s = report.fluctuation_parameter(params.p_bar).unwrap_or(inf);
    let barrier = params.potential.peak();
    let hbar_over_v = if barrier > 0.0 { params.hbar / barrier } else { inf };
    let supp_x = div(report.t_d_p, Some(hbar_over_v));
    let supp_p = if params.d_p > 0.0 {
        1.0 / (params.m * params.hbar * params.d_p)
    } else {
        inf
    };
    let velocity = (params.p_bar / params.m) / (report.big_sigma_p / params.m_target);
    let tloc = div(report.big_t_loc, Some(m_ratio * report.t_e));
    let t1 = div(report.big_t_1, Some(report.t_e));
    let tz = report.big_t_z / report.t_e;
    let tdp = div(report.big_t_d_p, Some(m_ratio.cbrt() * report.t_e));

    let small = chain.iter().all(|(_, r)| *r < th);
    let possible = supp_x < 1.0;
    let mut margins: Vec<(&'static str, f64)> = chain.to_vec();
    margins.extend([
        ("sigma_p/p_bar", s),
        ("t_d_p/(hbar/V)", supp_x),
        ("1/(m hbar D_p)", supp_p),
        ("(p_bar/m)/(Sigma_p/M)", velocity),
        ("T_loc/((m/M) t_E)", tloc),
        ("T_1/t_E", t1),
        ("T_z/t_E", tz),
        ("T_d_p/((m/M)^(1/3) t_E)", tdp),
    ]);
    RegimeVerdict {
        small_fluctuations_chain: small,
        momentum_width_small: s < th,
        suppression_x_possible: possible,
        suppression_x_with_small_fluctuations: small && possible,
        suppression_p: supp_p < thresholds.suppression_p,
        model2_velocity_condition: velocity < th,
        model2_tloc_condition: tloc < th,
        model2_t1_condition: t1 < th,
        model2_tz_condition: tz < th,
        model2_tdp_condition: tdp < th,
        margins,
    }
}

/// Final momenta of an elastic collision between the target (`P_in`) and the
/// light particle (`p_in`). Returns `(P_out, p_out)`.
pub fn model2_kinematics(m: f64, big_m: f64, big_p_in: f64, p_in: f64) -> Result<(f64, f64)> {
    if !(m > 0.0 && big_m > 0.0) {
        return Err(Error::invalid("mass", "must be positive"));
    }
    let s = big_m + m;
    let big_p_out = ((big_m - m) * big_p_in + 2.0 * big_m * p_in) / s;
    let p_out = (2.0 * m * big_p_in - (big_m - m) * p_in) / s;
    Ok((big_p_out, p_out))
}

/// `p_bar^2 D t^3 / (m^2 hbar^2)`: squared momentum times the diffusive
/// spread `D t^3 / m^2`, in units of `hbar^2`.
pub fn wigner_spreading_ratio(params: &PhysicalParams, t: f64) -> Result<f64> {
    if !(params.d > 0.0) {
        return Err(Error::Undefined {
            quantity: "Wigner spreading",
            reason: "requires D > 0",
        });
    }
    let spread = params.d * t.powi(3) / (params.m * params.m);
    Ok(params.p_bar * params.p_bar * spread / (params.hbar * params.hbar))
}

/// True when the spreading ratio exceeds `threshold`.
pub fn wigner_spreading_check(params: &PhysicalParams, t: f64, threshold: f64) -> Result<bool> {
    Ok(wigner_spreading_ratio(params, t)? > threshold)
}

/// Momentum decoherence time alone; an error without diffusion.
pub fn momentum_decoherence_time(params: &PhysicalParams) -> Result<f64> {
    need(compute_timescales(params, None)?.t_d_p, "t_d_p")
}
