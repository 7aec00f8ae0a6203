//! One runner per command, each writing its tables into an [`OutputDir`].

use reflectlab::model1::{
    narrow_diffusion_ratio, reflected_spectrum, total_reflected_sweep, Coupling, EnvironmentSpec, Tau, TotalOptions,
};
use reflectlab::model2::{
    conditional_reflected_env, conditional_reflected_noenv, model2_spectrum, timescale_cutoffs_model2,
    total_reflected_model2, ConditionalForm, Cutoff, Model2Config,
};
use reflectlab::qsd::{
    fluctuation_report, max_qsd_step, mean_moments, run_ensemble, run_moment_ensemble, Closure, TrajectoryMoments,
};
use reflectlab::timescales::{check_regime, compute_timescales};
use reflectlab::unitary::{born_reflection, max_time_step, propagate, reflection_probability, SolverOptions};
use reflectlab::{gaussian_packet, PhysicalParams, PotentialSpec, SpatialGrid, WaveFunction};

use crate::config::{Command, CouplingKind, QsdMode, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_f64, OutputDir, Plot, Series, Table};

/// Outcome of a successful run.
#[derive(Debug, Default)]
pub struct Report {
    /// Regime conditions that failed; fatal under `strict`.
    pub warnings: Vec<String>,
    /// Human-readable summary for standard output.
    pub text: String,
}

/// Validates `cfg`, runs its command and writes all outputs.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let command = cfg.require()?;
    let mut out = OutputDir::create(&cfg.outdir, cfg)?;
    let report = match command {
        Command::Timescales => timescales(cfg, &mut out)?,
        Command::Unitary => unitary(cfg, &mut out)?,
        Command::Model1 => model1(cfg, &mut out)?,
        Command::Qsd => qsd(cfg, &mut out)?,
        Command::Model2 => model2(cfg, &mut out)?,
        Command::Figures => figures(cfg.figure.unwrap_or(1), &mut out)?,
    };
    if cfg.strict && !report.warnings.is_empty() {
        return Err(CliError::Regime(report.warnings));
    }
    Ok(report)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_f64)
}

fn timescales(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let params = cfg.params();
    let r = compute_timescales(&params, cfg.ell)?;
    let mut t = Table::new(&["name", "value", "defining_formula", "inputs"]);
    let mut text = String::new();
    for row in r.rows() {
        let value = row.value.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6e}"));
        text.push_str(&format!("{:8} {:>14}  {}\n", row.name, value, row.formula));
        t.push(vec![row.name.into(), opt_cell(row.value), row.formula.into(), row.inputs.into()]);
    }
    out.csv("timescales.csv", &t)?;

    let v = check_regime(&r, &params, cfg.thresholds());
    let mut t = Table::new(&["condition", "ratio"]);
    for (name, ratio) in &v.margins {
        t.push(vec![name.to_string(), fmt_f64(*ratio)]);
    }
    out.csv("margins.csv", &t)?;
    let mut t = Table::new(&["verdict", "holds"]);
    for (name, holds) in [
        ("small_fluctuations_chain", v.small_fluctuations_chain),
        ("momentum_width_small", v.momentum_width_small),
        ("suppression_x_possible", v.suppression_x_possible),
        ("suppression_x_with_small_fluctuations", v.suppression_x_with_small_fluctuations),
        ("suppression_p", v.suppression_p),
        ("model2_velocity_condition", v.model2_velocity_condition),
        ("model2_tloc_condition", v.model2_tloc_condition),
        ("model2_t1_condition", v.model2_t1_condition),
        ("model2_tz_condition", v.model2_tz_condition),
        ("model2_tdp_condition", v.model2_tdp_condition),
    ] {
        t.push(vec![name.into(), holds.to_string()]);
    }
    out.csv("regime.csv", &t)?;
    Ok(Report {
        text,
        ..Default::default()
    })
}

fn grid(cfg: &RunConfig) -> Result<SpatialGrid, CliError> {
    Ok(SpatialGrid::centered(cfg.grid_half_width, cfg.grid_points)?)
}

/// Ascending coordinates and densities of `psi` restricted to `[lo, hi]`.
fn window(psi: &WaveFunction, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    psi.coordinates()
        .into_iter()
        .zip(psi.density())
        .filter(|(c, _)| *c >= lo && *c <= hi)
        .collect()
}

fn unitary(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let params = cfg.params();
    let grid = grid(cfg)?;
    let psi = gaussian_packet(&params, &grid)?;
    let opts = SolverOptions::default();
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => max_time_step(&psi, &params.potential, &params, &opts)?,
    };
    let every = cfg.record_every.max(1);
    let times: Vec<f64> = (every..=cfg.steps).step_by(every).map(|k| k as f64 * dt).collect();
    let series = propagate(&psi, &params.potential, &params, dt, cfg.steps, &times, &opts)?;

    let mut t = Table::new(&["time", "norm", "reflected", "transmitted", "absorbed", "boundary_loss"]);
    for (time, p) in series.times.iter().zip(&series.probabilities) {
        t.push_f64(&[*time, p.norm, p.reflected, p.transmitted, p.absorbed, p.boundary_loss]);
    }
    out.csv("probabilities.csv", &t)?;

    let (last, _) = series.last().ok_or(CliError::Config("no snapshots recorded".into()))?;
    let k = last.to_momentum()?;
    let mut t = Table::new(&["p", "density"]);
    for (p, d) in window(&k, f64::NEG_INFINITY, f64::INFINITY) {
        t.push_f64(&[p, d]);
    }
    out.csv("momentum.csv", &t)?;
    let mut t = Table::new(&["x", "density"]);
    for (x, d) in window(last, f64::NEG_INFINITY, f64::INFINITY) {
        t.push_f64(&[x, d]);
    }
    out.csv("position.csv", &t)?;

    let (r, tr, a) = reflection_probability(&series, 0.0)?;
    let mut t = Table::new(&["quantity", "value"]);
    t.push(vec!["dt".into(), fmt_f64(dt)]);
    t.push(vec!["final_time".into(), fmt_f64(cfg.steps as f64 * dt)]);
    t.push(vec!["reflected".into(), fmt_f64(r)]);
    t.push(vec!["transmitted".into(), fmt_f64(tr)]);
    t.push(vec!["absorbed".into(), fmt_f64(a)]);
    if params.potential.has_analytic_transform() {
        let born = born_reflection(&params, &params.potential, 256)?;
        t.push(vec!["born_reflected".into(), fmt_f64(born.total)]);
    }
    out.csv("summary.csv", &t)?;
    Ok(Report::default())
}

fn total_options(cfg: &RunConfig) -> TotalOptions {
    TotalOptions {
        range: Some(cfg.p_range()),
        edge_tolerance: if cfg.range_check { Some(1e-8) } else { None },
    }
}

fn strengths(cfg: &RunConfig, default: f64) -> Vec<f64> {
    if cfg.sweep.is_empty() {
        vec![default]
    } else {
        cfg.sweep.clone()
    }
}

fn model1(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let params = cfg.params();
    let (coupling, sweep, name) = match cfg.coupling {
        Some(CouplingKind::P) => (Coupling::P, strengths(cfg, cfg.d_p), "D_p"),
        Some(CouplingKind::X) => (Coupling::X, strengths(cfg, cfg.d), "D"),
        _ => (Coupling::X, vec![0.0], "D"),
    };
    let tau = cfg.tau();
    let opts = total_options(cfg);
    let (lo, hi) = cfg.p_range();
    let mut report = Report::default();

    let mut density = Table::new(&[name, "p", "density"]);
    let mut curves = Vec::new();
    for &s in &sweep {
        if coupling == Coupling::X && s > 0.0 && narrow_diffusion_ratio(&params, s) < 100.0 {
            report.warnings.push(format!(
                "{name} = {s}: p_bar^2 / (D t_z) = {:.3} is below 100",
                narrow_diffusion_ratio(&params, s)
            ));
        }
        let spec = reflected_spectrum(coupling, &params, s, tau, (lo, hi, cfg.n_points), &opts)?;
        for (p, d) in spec.ps.iter().zip(&spec.density) {
            density.push_f64(&[s, *p, *d]);
        }
        curves.push(Series {
            label: format!("{name}={s}"),
            points: spec.ps.iter().copied().zip(spec.density.iter().copied()).collect(),
        });
    }
    out.csv("density.csv", &density)?;
    out.svg(
        "density.svg",
        &Plot {
            title: "Reflected momentum density".into(),
            x_label: "p".into(),
            y_label: "density".into(),
            log_x: false,
            series: curves,
        },
    )?;

    let totals = total_reflected_sweep(coupling, &params, &sweep, tau, &opts)?;
    let mut t = Table::new(&[name, "total"]);
    for (s, v) in &totals {
        t.push_f64(&[*s, *v]);
    }
    out.csv("totals.csv", &t)?;
    if totals.len() > 1 {
        out.svg(
            "totals.svg",
            &Plot {
                title: "Total reflected probability".into(),
                x_label: name.into(),
                y_label: "total".into(),
                log_x: totals.iter().all(|(s, _)| *s > 0.0),
                series: vec![Series {
                    label: format!("a={}", cfg.a),
                    points: totals,
                }],
            },
        )?;
    }
    Ok(report)
}

fn packet_moments(psi: &WaveFunction) -> Result<TrajectoryMoments, CliError> {
    Ok(TrajectoryMoments::from_moments(&psi.moments()?, 0.0))
}

fn qsd(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let params = cfg.params();
    let env = match cfg.coupling {
        Some(CouplingKind::X) => EnvironmentSpec::PositionCoupling { d: cfg.d },
        Some(CouplingKind::P) => EnvironmentSpec::MomentumCoupling { d_p: cfg.d_p },
        _ => EnvironmentSpec::None,
    };
    let grid = grid(cfg)?;
    let psi = gaussian_packet(&params, &grid)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => max_qsd_step(&psi, env, &params.potential, &params)?,
    };
    let every = cfg.record_every.max(1);
    let ensemble: Vec<Vec<TrajectoryMoments>> = match cfg.qsd_mode {
        QsdMode::Wavefunction => run_ensemble(
            &psi,
            env,
            &params.potential,
            &params,
            dt,
            cfg.steps,
            cfg.trajectories,
            cfg.seed,
            every,
        )?
        .into_iter()
        .map(|t| t.moments)
        .collect(),
        QsdMode::Moments => run_moment_ensemble(
            packet_moments(&psi)?,
            env,
            &params.potential,
            &params,
            dt,
            cfg.steps,
            cfg.trajectories,
            cfg.seed,
            Closure::Gaussian,
            every,
        )?,
    };

    let mean = mean_moments(&ensemble);
    let mut t = Table::new(&["time", "mean_x", "mean_p", "var_x", "var_p", "cov_xp"]);
    for m in &mean {
        t.push_f64(&[m.time, m.mean_x, m.mean_p, m.var_x, m.var_p, m.cov_xp]);
    }
    out.csv("moments.csv", &t)?;

    let mut trajectories = Table::new(&["trajectory", "time", "mean_x", "mean_p", "var_x", "var_p", "cov_xp"]);
    for (k, s) in ensemble.iter().enumerate() {
        for m in s {
            let mut row = vec![k.to_string()];
            row.extend([m.time, m.mean_x, m.mean_p, m.var_x, m.var_p, m.cov_xp].map(fmt_f64));
            trajectories.push(row);
        }
    }
    out.csv("trajectories.csv", &trajectories)?;

    let mut summary = Table::new(&["quantity", "value"]);
    summary.push(vec!["dt".into(), fmt_f64(dt)]);
    summary.push(vec!["trajectories".into(), cfg.trajectories.to_string()]);
    summary.push(vec!["seed".into(), cfg.seed.to_string()]);
    if cfg.trajectories >= 64 {
        let end = mean.last().map_or(0.0, |m| m.time);
        let f = fluctuation_report(&ensemble, (0.0, end))?;
        let mut t = Table::new(&["time", "stochastic_var_p", "mean_var_p", "total"]);
        for i in 0..f.times.len() {
            t.push_f64(&[f.times[i], f.stochastic_var_p[i], f.mean_var_p[i], f.total[i]]);
        }
        out.csv("fluctuations.csv", &t)?;
        summary.push(vec!["fluctuation_rate".into(), fmt_f64(f.rate)]);
    }
    out.csv("summary.csv", &summary)?;
    Ok(Report::default())
}

fn model2_config(cfg: &RunConfig, params: PhysicalParams) -> Model2Config {
    Model2Config {
        params,
        tau: cfg.tau(),
        steady_target: cfg.steady_target,
    }
}

fn cutoff_name(c: Cutoff) -> &'static str {
    match c {
        Cutoff::TargetZeno => "T_z",
        Cutoff::TargetDecoherence => "T_d_p",
        Cutoff::Recoil => "T_1",
    }
}

fn model2(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report, CliError> {
    let m2 = model2_config(cfg, cfg.params());
    m2.validate()?;
    let sweep = strengths(cfg, cfg.d);
    let (lo, hi) = cfg.p_range();
    let mut report = Report::default();

    let mut density = Table::new(&["D", "p", "density"]);
    let mut curves = Vec::new();
    for &d in &sweep {
        let s = model2_spectrum(&m2, d, (lo, hi, cfg.n_points))?;
        if s.clamped > 0 {
            report
                .warnings
                .push(format!("D = {d}: {} slightly negative samples set to zero", s.clamped));
        }
        for (p, v) in s.ps.iter().zip(&s.density) {
            density.push_f64(&[d, *p, *v]);
        }
        curves.push(Series {
            label: format!("D={d}"),
            points: s.ps.iter().copied().zip(s.density.iter().copied()).collect(),
        });
    }
    out.csv("density.csv", &density)?;
    out.svg(
        "density.svg",
        &Plot {
            title: "Reflected momentum density".into(),
            x_label: "p".into(),
            y_label: "density".into(),
            log_x: false,
            series: curves,
        },
    )?;

    let curve = total_reflected_model2(&m2, &sweep, &total_options(cfg))?;
    let mut t = Table::new(&["D", "total"]);
    for (d, v) in &curve.points {
        t.push_f64(&[*d, *v]);
    }
    out.csv("totals.csv", &t)?;

    let mut t = Table::new(&["D", "T_z", "T_d_p", "T_1", "t_E", "dominant", "margin", "suppressed"]);
    for &d in sweep.iter().filter(|d| **d > 0.0) {
        let c = timescale_cutoffs_model2(&m2, d, cfg.thresholds())?;
        let mut row: Vec<String> = [d, c.t_z, c.t_d_p, c.t_1, c.t_e].map(fmt_f64).to_vec();
        row.extend([cutoff_name(c.dominant).into(), fmt_f64(c.margin), c.suppressed.to_string()]);
        t.push(row);
    }
    out.csv("cutoffs.csv", &t)?;

    if let Some(big_p) = cfg.conditional_p {
        let h = (hi - lo) / cfg.n_points.max(1) as f64;
        let ps: Vec<f64> = (0..cfg.n_points).map(|i| lo + i as f64 * h).collect();
        let finite = matches!(m2.tau, Tau::Finite(_));
        let env_ds: Vec<f64> = sweep.iter().copied().filter(|d| *d > 0.0 && finite).collect();
        let mut header = vec!["p".to_string(), "no_environment".to_string()];
        header.extend(env_ds.iter().map(|d| format!("D={d}")));
        let mut t = Table {
            header,
            rows: Vec::new(),
        };
        for &p in &ps {
            let mut row = vec![fmt_f64(p), fmt_f64(conditional_reflected_noenv(&m2, p, big_p)?.coefficient)];
            for &d in &env_ds {
                row.push(fmt_f64(conditional_reflected_env(&m2, p, big_p, d, ConditionalForm::Full)?.value));
            }
            t.push(row);
        }
        out.csv("conditional.csv", &t)?;
    }
    Ok(report)
}

/// Coupling strengths of the suppression curves, log-spaced over three decades.
pub fn figure_sweep() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-2.0 + 0.25 * i as f64)).collect()
}

pub const FIGURE_WIDTHS: [f64; 3] = [0.1, 0.2, 0.4];

fn barrier(a: f64) -> PotentialSpec {
    PotentialSpec::Gaussian { v0: 0.01, a }
}

/// Writes the tables and plots for figure `which` using its fixed parameters.
pub fn figures(which: u8, out: &mut OutputDir) -> Result<Report, CliError> {
    match which {
        1 => figure1(out),
        2 => figure2(out),
        3 => figure3(out),
        4 => figure4(out),
        5 => figure5(out),
        _ => Err(CliError::Config(format!("unknown figure {which}"))),
    }
}

fn figure1(out: &mut OutputDir) -> Result<Report, CliError> {
    let params = PhysicalParams {
        sigma: 5.0,
        x_bar: -40.0,
        potential: PotentialSpec::Gaussian { v0: 0.5, a: 0.5 },
        ..Default::default()
    };
    let grid = SpatialGrid::centered(120.0, 4096)?;
    let psi = gaussian_packet(&params, &grid)?;
    let dt = 0.025;
    // uneven spacing, dense while the packet is on the barrier
    let times = [0.0, 30.0, 36.0, 40.0, 44.0, 50.0, 80.0];
    let steps = (80.0 / dt) as usize;
    let series = propagate(&psi, &params.potential, &params, dt, steps, &times, &SolverOptions::default())?;

    let mut pos = Table::new(&["time", "x", "density"]);
    let mut mom = Table::new(&["time", "p", "density"]);
    let (mut pos_curves, mut mom_curves) = (Vec::new(), Vec::new());
    for (t, state) in series.times.iter().zip(&series.states) {
        let xs = window(state, -80.0, 80.0);
        let ps = window(&state.to_momentum()?, -2.5, 2.5);
        for &(x, d) in &xs {
            pos.push_f64(&[*t, x, d]);
        }
        for &(p, d) in &ps {
            mom.push_f64(&[*t, p, d]);
        }
        pos_curves.push(Series {
            label: format!("t={t}"),
            points: xs,
        });
        mom_curves.push(Series {
            label: format!("t={t}"),
            points: ps,
        });
    }
    out.csv("fig1_position.csv", &pos)?;
    out.csv("fig1_momentum.csv", &mom)?;
    out.svg(
        "fig1_position.svg",
        &Plot {
            title: "Position probability".into(),
            x_label: "x".into(),
            y_label: "|psi(x)|^2".into(),
            log_x: false,
            series: pos_curves,
        },
    )?;
    out.svg(
        "fig1_momentum.svg",
        &Plot {
            title: "Momentum probability".into(),
            x_label: "p".into(),
            y_label: "|psi(p)|^2".into(),
            log_x: false,
            series: mom_curves,
        },
    )?;
    Ok(Report::default())
}

fn figure2(out: &mut OutputDir) -> Result<Report, CliError> {
    let params = PhysicalParams {
        potential: barrier(0.1),
        ..Default::default()
    };
    let mut t = Table::new(&["D_p", "p", "density"]);
    let mut curves = Vec::new();
    for d_p in [0.01, 0.1, 1.0, 10.0] {
        let s = reflected_spectrum(
            Coupling::P,
            &params,
            d_p,
            Tau::Infinite,
            (-4.0, 2.0, 600),
            &TotalOptions::fixed_range(),
        )?;
        for (p, v) in s.ps.iter().zip(&s.density) {
            t.push_f64(&[d_p, *p, *v]);
        }
        curves.push(Series {
            label: format!("D_p={d_p}"),
            points: s.ps.iter().copied().zip(s.density.iter().copied()).collect(),
        });
    }
    out.csv("fig2_density.csv", &t)?;
    out.svg(
        "fig2_density.svg",
        &Plot {
            title: "Reflected density, momentum coupling".into(),
            x_label: "p".into(),
            y_label: "density".into(),
            log_x: false,
            series: curves,
        },
    )?;
    Ok(Report::default())
}

fn totals_figure(
    out: &mut OutputDir,
    name: &str,
    var: &str,
    title: &str,
    curve: impl Fn(f64) -> Result<Vec<(f64, f64)>, CliError>,
) -> Result<Report, CliError> {
    let mut t = Table::new(&["a", var, "total"]);
    let mut series = Vec::new();
    for a in FIGURE_WIDTHS {
        let points = curve(a)?;
        for (s, v) in &points {
            t.push_f64(&[a, *s, *v]);
        }
        series.push(Series {
            label: format!("a={a}"),
            points,
        });
    }
    out.csv(&format!("{name}.csv"), &t)?;
    out.svg(
        &format!("{name}.svg"),
        &Plot {
            title: title.into(),
            x_label: var.into(),
            y_label: "total reflected probability".into(),
            log_x: true,
            series,
        },
    )?;
    Ok(Report::default())
}

fn figure3(out: &mut OutputDir) -> Result<Report, CliError> {
    totals_figure(out, "fig3_totals", "D_p", "Total reflection, momentum coupling", |a| {
        let params = PhysicalParams {
            potential: barrier(a),
            ..Default::default()
        };
        Ok(total_reflected_sweep(
            Coupling::P,
            &params,
            &figure_sweep(),
            Tau::Infinite,
            &TotalOptions::fixed_range(),
        )?)
    })
}

fn figure_model2(a: f64) -> Model2Config {
    Model2Config {
        steady_target: true,
        ..Model2Config::new(PhysicalParams {
            potential: barrier(a),
            ..Default::default()
        })
    }
}

fn figure4(out: &mut OutputDir) -> Result<Report, CliError> {
    let cfg = figure_model2(0.1);
    let mut t = Table::new(&["D", "p", "density"]);
    let mut curves = Vec::new();
    let mut report = Report::default();
    for d in [0.01, 0.1, 1.0, 10.0] {
        let s = model2_spectrum(&cfg, d, (-3.0, 0.5, 350))?;
        if s.clamped > 0 {
            report
                .warnings
                .push(format!("D = {d}: {} slightly negative samples set to zero", s.clamped));
        }
        for (p, v) in s.ps.iter().zip(&s.density) {
            t.push_f64(&[d, *p, *v]);
        }
        curves.push(Series {
            label: format!("D={d}"),
            points: s.ps.iter().copied().zip(s.density.iter().copied()).collect(),
        });
    }
    out.csv("fig4_density.csv", &t)?;
    out.svg(
        "fig4_density.svg",
        &Plot {
            title: "Reflected density, two-body model".into(),
            x_label: "p".into(),
            y_label: "density".into(),
            log_x: false,
            series: curves,
        },
    )?;
    Ok(report)
}

fn figure5(out: &mut OutputDir) -> Result<Report, CliError> {
    totals_figure(out, "fig5_totals", "D", "Total reflection, two-body model", |a| {
        Ok(total_reflected_model2(&figure_model2(a), &figure_sweep(), &TotalOptions::fixed_range())?.points)
    })
}
