//! Adaptive Gauss–Kronrod quadrature and a panel scheme for cosine-weighted
//! integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077600015549720,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

/// Values that can be integrated: `f64` and `Complex64`.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 0.0,
            rel: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Self {
            rel,
            ..Default::default()
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    /// Integral of `|f|`, used for the round-off floor.
    pub abs_value: f64,
    pub evaluations: usize,
}

/// Single 21-point rule on `[a, b]`.
pub fn gk21<T: Scalar>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> Estimate<T> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut pairs = [(T::zero(), T::zero()); 10];
    let mut k = fc * WGK[10];
    let mut g = T::zero();
    let mut abs = fc.magnitude() * WGK[10];
    for (i, pair) in pairs.iter_mut().enumerate() {
        let dx = h * XGK[i];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        *pair = (f1, f2);
        k = k + (f1 + f2) * WGK[i];
        abs += (f1.magnitude() + f2.magnitude()) * WGK[i];
        if i % 2 == 1 {
            g = g + (f1 + f2) * WG[i / 2];
        }
    }
    // QUADPACK error heuristic
    let mean = k * 0.5;
    let mut asc = WGK[10] * (fc - mean).magnitude();
    for (i, (f1, f2)) in pairs.iter().enumerate() {
        asc += WGK[i] * ((*f1 - mean).magnitude() + (*f2 - mean).magnitude());
    }
    let h_abs = h.abs();
    let resabs = abs * h_abs;
    let resasc = asc * h_abs;
    let mut error = ((k - g) * h).magnitude();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Estimate {
        value: k * h,
        error,
        abs_value: resabs,
        evaluations: 21,
    }
}

struct Piece<T> {
    a: f64,
    b: f64,
    est: Estimate<T>,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.est.error == other.est.error
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.est.error.total_cmp(&other.est.error)
    }
}

/// Globally adaptive integration over `[a, b]` with optional interior break points.
pub fn integrate<T: Scalar>(
    f: impl Fn(f64) -> T,
    points: &[f64],
    tol: Tolerance,
) -> Result<Estimate<T>> {
    if points.len() < 2 || points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("limits", "need at least two finite points"));
    }
    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[0] != w[1] {
            heap.push(Piece {
                a: w[0],
                b: w[1],
                est: gk21(&f, w[0], w[1]),
            });
        }
    }
    let totals = |heap: &BinaryHeap<Piece<T>>| {
        heap.iter().fold((T::zero(), 0.0, 0.0), |(v, e, s), p| {
            (v + p.est.value, e + p.est.error, s + p.est.abs_value)
        })
    };
    let mut evaluations = 21 * heap.len();
    loop {
        let (value, error, abs_value) = totals(&heap);
        let done = error <= tol.target(value.magnitude()) || error <= ROUNDOFF * abs_value;
        if done || heap.is_empty() {
            return Ok(Estimate {
                value,
                error,
                abs_value,
                evaluations,
            });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                achieved: error,
                requested: tol.target(value.magnitude()),
            });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval cannot be split further
            heap.push(worst);
            let (value, error, _) = totals(&heap);
            return Err(Error::QuadratureNonConvergence {
                achieved: error,
                requested: tol.target(value.magnitude()),
            });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            heap.push(Piece {
                a,
                b,
                est: gk21(&f, a, b),
            });
        }
        evaluations += 42;
    }
}

/// `int_a^inf f(s) ds` through the substitution `s = a + t / (1 - t)`.
pub fn integrate_to_infinity<T: Scalar>(
    f: impl Fn(f64) -> T,
    a: f64,
    tol: Tolerance,
) -> Result<Estimate<T>> {
    integrate(
        |t: f64| {
            if t >= 1.0 {
                return T::zero();
            }
            let u = 1.0 - t;
            f(a + t / u) * (1.0 / (u * u))
        },
        &[0.0, 0.5, 1.0],
        tol,
    )
}

/// `int_a^b g(s) cos(omega s) ds` for finite limits and smooth `g`.
///
/// With many oscillations the range is cut into half periods between the
/// zeros of the cosine; each panel is integrated adaptively and the panels
/// are added with compensated summation.
pub fn integrate_cos(
    g: impl Fn(f64) -> f64,
    omega: f64,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate<f64>> {
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::invalid("limits", "need finite a <= b"));
    }
    let w = omega.abs();
    let f = |s: f64| g(s) * (omega * s).cos();
    let half = if w > 0.0 { PI / w } else { f64::INFINITY };
    if (b - a) / half < 16.0 {
        let mut points = vec![a];
        if half.is_finite() {
            let mut z = a + half;
            while z < b {
                points.push(z);
                z += half;
            }
        }
        points.push(b);
        return integrate(f, &points, tol);
    }

    // Zeros of cos(w s) sit at z_k = (k + 1/2) pi / w. Inside a panel anchored
    // at z_k, cos(w (z_k + u)) = -(-1)^k sin(w u), which keeps the phase
    // accurate when w s is large.
    let zero = |k: i64| (k as f64 + 0.5) * half;
    let k0 = (a / half - 0.5).ceil() as i64;
    let mut panels: Vec<(i64, f64, f64)> = Vec::new();
    if zero(k0) > a {
        panels.push((k0, a - zero(k0), 0.0f64.min(b - zero(k0))));
    }
    let mut k = k0;
    while zero(k) < b {
        let hi = if zero(k + 1) <= b { half } else { b - zero(k) };
        panels.push((k, 0.0, hi));
        k += 1;
    }

    let panel_tol = Tolerance {
        abs: 0.0,
        rel: 1e-13,
        max_intervals: 200,
    };
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut error = 0.0;
    let mut abs_value = 0.0;
    let mut evaluations = 0;
    for &(k, lo, hi) in &panels {
        if hi <= lo {
            continue;
        }
        let z = zero(k);
        let sign = if k.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
        let p = integrate(|u: f64| sign * g(z + u) * (w * u).sin(), &[lo, hi], panel_tol)?;
        let t = sum + p.value;
        // Neumaier summation
        if sum.abs() >= p.value.abs() {
            comp += (sum - t) + p.value;
        } else {
            comp += (p.value - t) + sum;
        }
        sum = t;
        // panel errors carry a per-panel round-off floor; keep only the excess
        error += (p.error - ROUNDOFF * p.abs_value).max(0.0);
        abs_value += p.abs_value;
        evaluations += p.evaluations;
    }
    let value = sum + comp;
    if error > tol.target(value.abs()) {
        return Err(Error::QuadratureNonConvergence {
            achieved: error,
            requested: tol.target(value.abs()),
        });
    }
    let error = error + f64::EPSILON * abs_value;
    Ok(Estimate {
        value,
        error,
        abs_value,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x: f64| x.powi(9) - 3.0 * x * x, &[0.0, 2.0], Tolerance::default()).unwrap();
        assert!((r.value - (102.4 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), &[0.0, 1.0], Tolerance::rel(1e-9)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn complex_integrand() {
        let r = integrate(
            |x: f64| Complex64::from_polar(1.0, 3.0 * x),
            &[0.0, 1.0],
            Tolerance::rel(1e-12),
        )
        .unwrap();
        let exact = (Complex64::from_polar(1.0, 3.0) - 1.0) / Complex64::new(0.0, 3.0);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn semi_infinite() {
        let r = integrate_to_infinity(|x: f64| (-x * x).exp(), 0.0, Tolerance::rel(1e-11)).unwrap();
        assert!((r.value - PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn cos_weighted_gaussian() {
        // int_0^20 e^{-s^2/2} cos(w s) ds ~ sqrt(pi/2) e^{-w^2/2}
        for w in [0.0, 0.3, 2.0, 7.0] {
            let r = integrate_cos(|s| (-s * s / 2.0).exp(), w, 0.0, 20.0, Tolerance::rel(1e-10)).unwrap();
            let exact = (PI / 2.0).sqrt() * (-w * w / 2.0).exp();
            assert!((r.value - exact).abs() < 1e-10, "{w}: {} vs {exact}", r.value);
        }
    }

    #[test]
    fn fejer_kernel_many_periods() {
        // int_0^T (1 - s/T) cos(w s) ds = (1 - cos wT) / (w^2 T)
        let t = 250.0;
        for w in [0.37, 3.1, 25.0] {
            let r = integrate_cos(|s| 1.0 - s / t, w, 0.0, t, Tolerance::rel(1e-10)).unwrap();
            let exact = (1.0 - (w * t).cos()) / (w * w * t);
            let scale = 1.0 / (w * w * t);
            assert!((r.value - exact).abs() < 1e-8 * scale, "{w}: {} {exact}", r.value);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let tol = Tolerance {
            abs: 0.0,
            rel: 1e-14,
            max_intervals: 4,
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), &[1e-6, 1.0], tol);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
