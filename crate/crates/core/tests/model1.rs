use std::f64::consts::PI;

use reflectlab::model1::{
    momentum_coupling_kernel, narrow_diffusion_ratio, plane_wave_born_density, propagator_momentum,
    propagator_position, reflected_density_x, total_reflected, total_reflected_sweep, Coupling,
    EnvironmentSpec, Tau, TotalOptions,
};
use reflectlab::quadrature::{integrate, integrate_to_infinity, Tolerance};
use reflectlab::timescales::{check_regime, compute_timescales, Thresholds};
use reflectlab::unitary::{born_reflection, propagate, reflection_probability, SolverOptions};
use reflectlab::{gaussian_packet, PhysicalParams, PotentialSpec, SpatialGrid};

fn barrier(a: f64) -> PotentialSpec {
    PotentialSpec::Gaussian { v0: 0.01, a }
}

#[test]
fn grid_reflection_matches_born_total() {
    let params = PhysicalParams {
        sigma: 10.0,
        x_bar: -60.0,
        potential: barrier(0.1),
        ..Default::default()
    };
    let grid = SpatialGrid::centered(160.0, 16384).unwrap();
    let psi = gaussian_packet(&params, &grid).unwrap();
    // the narrow barrier couples to large momenta; at dt = 0.05 the splitting
    // error feeds about 2e-6 of probability into the absorbers
    let dt = 0.0125;
    let n = 9600;
    let s = propagate(&psi, &params.potential, &params, dt, n, &[n as f64 * dt], &SolverOptions::default()).unwrap();
    let (r, _, _) = reflection_probability(&s, 0.0).unwrap();
    let born = born_reflection(&params, &params.potential, 256).unwrap().total;
    assert!((r / born - 1.0).abs() < 0.05, "{r} {born}");
}

#[test]
fn position_coupling_density_is_born_without_diffusion() {
    let params = PhysicalParams::default();
    let tau = params.default_tau();
    for p in [-1.3, -1.0, -0.97, -0.5] {
        let a = reflected_density_x(p, &params, 0.0, Tau::Finite(tau)).unwrap();
        let b = plane_wave_born_density(p, &params, tau);
        assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-300), "{p} {a} {b}");
    }
}

#[test]
fn position_coupling_density_matches_the_double_time_integral() {
    let params = PhysicalParams::default();
    let (d, p) = (1.0, -1.0);
    let tau = params.default_tau();
    let k = p - params.p_bar;
    let w = (p * p - 1.0) / 2.0;
    let kappa = d * k * k / 12.0;
    let outer = |s: f64| {
        let inner = integrate(|_u: f64| 1.0, &[0.0, tau - s], Tolerance::rel(1e-12)).unwrap().value;
        2.0 * (w * s).cos() * (-kappa * s.powi(3)).exp() * inner
    };
    let pts: Vec<f64> = (0..=16).map(|i| tau * i as f64 / 16.0).collect();
    let brute = integrate(outer, &pts, Tolerance::rel(1e-11)).unwrap().value / tau
        * params.potential.momentum_sqr(k, 1.0);
    let kernel = reflected_density_x(p, &params, d, Tau::Finite(tau)).unwrap();
    assert!((kernel / brute - 1.0).abs() < 1e-4, "{kernel} {brute}");
}

#[test]
fn weak_position_coupling_leaves_reflection_unchanged() {
    // sigma_p / p_bar = 0.005 puts every ratio of the small-fluctuation chain below 0.1
    let s = 0.005f64;
    let d = s.powi(4) / 2.0;
    let params = PhysicalParams {
        sigma: 10.0,
        d,
        ..Default::default()
    };
    let v = check_regime(&compute_timescales(&params, None).unwrap(), &params, Thresholds::default());
    assert!(v.small_fluctuations_chain, "{:?}", v.margins);
    let tau = Tau::Finite(params.default_tau());
    let with = reflected_density_x(-1.0, &params, d, tau).unwrap();
    let without = reflected_density_x(-1.0, &params, 0.0, tau).unwrap();
    assert!(((with - without) / without).abs() < 0.01);
}

#[test]
fn position_propagator_preserves_the_trace() {
    // Tr rho_t for rho_0 = g(x') g(y'), g a real Gaussian, using the kernel alone
    let params = PhysicalParams::default();
    let (t, d) = (1.0, 0.5);
    let g = |x: f64| (2.0 * PI).powf(-0.25) * (-x * x / 4.0).exp();
    let (l, n) = (9.0, 241);
    let h = 2.0 * l / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| -l + i as f64 * h).collect();
    let diag = |x: f64| {
        let mut sum = 0.0;
        for &a in &xs {
            for &b in &xs {
                sum += (propagator_position(x, x, t, a, b, 0.0, &params, d).unwrap() * g(a) * g(b)).re;
            }
        }
        sum * h * h
    };
    let trace = integrate(diag, &[-12.0, 0.0, 12.0], Tolerance::rel(1e-9)).unwrap().value;
    assert!((trace - 1.0).abs() < 1e-6, "{trace}");
}

#[test]
fn narrow_momentum_diffusion_acts_as_a_delta() {
    let params = PhysicalParams {
        sigma: 10.0,
        ..Default::default()
    };
    let t_z = params.m * params.sigma / params.p_bar;
    let d = params.p_bar * params.p_bar / (100.0 * t_z);
    assert!(narrow_diffusion_ratio(&params, d) >= 100.0);
    let f = |p: f64| (-(p + 1.0).powi(2) / 8.0).exp();
    let env = EnvironmentSpec::PositionCoupling { d };
    for p in [-1.5, -1.0, -0.4] {
        // on the diagonal only the Gaussian factor survives
        let conv = integrate_to_infinity(
            |u: f64| {
                let k = |q: f64| propagator_momentum(p, p, t_z, q, q, 0.0, &params, env).unwrap().re * f(q);
                k(p + u) + k(p - u)
            },
            0.0,
            Tolerance::rel(1e-10),
        )
        .unwrap()
        .value;
        assert!((conv / f(p) - 1.0).abs() < 0.01, "{p} {conv}");
    }
}

fn kernel_moment(d_p: f64, f: &dyn Fn(f64) -> f64) -> f64 {
    let params = PhysicalParams::default();
    let w = 2.0 * params.m * params.hbar * d_p * 2.0 * params.p_bar;
    let c = -params.p_bar;
    let g = |p: f64| momentum_coupling_kernel(p, &params, d_p) * f(p);
    let mut pts = vec![c - 1.0];
    for k in [-64.0, -8.0, -1.0, 0.0, 1.0, 8.0, 64.0] {
        pts.push(c + k * w);
    }
    pts.push(c + 1.0);
    let tol = Tolerance::rel(1e-12);
    let mid = integrate(g, &pts, tol).unwrap().value;
    let right = integrate_to_infinity(g, c + 1.0, tol).unwrap().value;
    let left = integrate_to_infinity(|u| g(-u), -(c - 1.0), tol).unwrap().value;
    left + mid + right
}

#[test]
fn momentum_kernel_tends_to_a_delta_linearly() {
    let tests: [&dyn Fn(f64) -> f64; 3] = [
        &|p: f64| (-(p + 0.5f64).powi(2)).exp(),
        &|p: f64| 1.0 / p.cosh(),
        &|p: f64| p.cos() * (-p * p / 4.0).exp(),
    ];
    let dps = [1e-3, 2e-3, 4e-3, 8e-3];
    for f in tests {
        let errs: Vec<f64> = dps.iter().map(|&d| (kernel_moment(d, f) - f(-1.0)).abs()).collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = dps.iter().zip(&errs).map(|(d, e)| (d.ln(), e.ln())).unzip();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - 1.0).abs() < 0.2, "{slope} {errs:?}");
    }
}

#[test]
fn momentum_coupling_suppresses_reflection() {
    let dps = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];
    let mut curves = Vec::new();
    for a in [0.1, 0.2, 0.4] {
        let params = PhysicalParams {
            potential: barrier(a),
            ..Default::default()
        };
        let c = total_reflected_sweep(Coupling::P, &params, &dps, Tau::Infinite, &TotalOptions::fixed_range()).unwrap();
        assert!(c.windows(2).all(|w| w[1].1 < w[0].1), "{c:?}");
        curves.push(c);
    }
    let ratio = curves[0][6].1 / curves[0][0].1;
    // quadrature of the closed form done independently
    assert!((ratio / 0.027574 - 1.0).abs() < 1e-3, "{ratio}");
    assert!(ratio < 0.2);
    for i in 0..dps.len() {
        assert!(curves[0][i].1 > curves[1][i].1 && curves[1][i].1 > curves[2][i].1);
    }
}

#[test]
fn default_totals_check_the_range_edge() {
    let params = PhysicalParams::default();
    let r = total_reflected(Coupling::P, &params, 1.0, Tau::Infinite, &TotalOptions::default());
    assert!(matches!(r, Err(reflectlab::Error::GridRangeInsufficient { .. })));
    let narrow = PhysicalParams {
        potential: barrier(1.0),
        ..params
    };
    let opts = TotalOptions {
        range: Some((-12.0, 0.0)),
        ..Default::default()
    };
    assert!(total_reflected(Coupling::P, &narrow, 0.01, Tau::Infinite, &opts).unwrap() > 0.0);
}
