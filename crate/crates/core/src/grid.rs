use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform periodic grid on `[x_min, x_max)` with `n_points` samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::invalid("grid", "need finite x_max > x_min"));
        }
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::invalid(
                "n_points",
                format!("{n_points} is not a power of two >= 2"),
            ));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    /// Grid on `[-half_width, half_width)`.
    pub fn centered(half_width: f64, n_points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n_points)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    pub fn dp(&self, hbar: f64) -> f64 {
        2.0 * PI * hbar / (self.n_points as f64 * self.dx())
    }

    /// Momentum grid in ascending order, `p_k = k dp` for `k = -N/2 .. N/2-1`.
    pub fn ps(&self, hbar: f64) -> Vec<f64> {
        let dp = self.dp(hbar);
        let half = (self.n_points / 2) as f64;
        (0..self.n_points).map(|k| (k as f64 - half) * dp).collect()
    }

    /// Momentum values in raw FFT output order.
    pub fn ps_fft_order(&self, hbar: f64) -> Vec<f64> {
        let n = self.n_points;
        let dp = self.dp(hbar);
        (0..n)
            .map(|k| {
                let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                k * dp
            })
            .collect()
    }

    pub fn p_max(&self, hbar: f64) -> f64 {
        self.dp(hbar) * (self.n_points / 2) as f64
    }
}

/// Cached forward/inverse FFT pair of fixed length. The inverse is normalized.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inv.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }

    /// Applies a diagonal momentum-space factor (given in FFT order).
    pub fn apply_diagonal(&mut self, buf: &mut [Complex64], factor: &[Complex64]) {
        self.forward(buf);
        for (v, f) in buf.iter_mut().zip(factor) {
            *v *= f;
        }
        self.inverse(buf);
    }

    /// Applies a real diagonal momentum-space multiplier (given in FFT order).
    pub fn apply_real(&mut self, buf: &mut [Complex64], factor: &[f64]) {
        self.forward(buf);
        for (v, f) in buf.iter_mut().zip(factor) {
            *v *= f;
        }
        self.inverse(buf);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Representation {
    Position,
    Momentum,
}

/// First and second moments of a pure state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub norm: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: SpatialGrid,
    hbar: f64,
    values: Vec<Complex64>,
    representation: Representation,
}

impl WaveFunction {
    pub fn new(
        grid: SpatialGrid,
        hbar: f64,
        values: Vec<Complex64>,
        representation: Representation,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if !(hbar > 0.0) {
            return Err(Error::invalid("hbar", "must be positive"));
        }
        Ok(Self {
            grid,
            hbar,
            values,
            representation,
        })
    }

    pub fn from_fn(grid: SpatialGrid, hbar: f64, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.xs().into_iter().map(f).collect();
        Self {
            grid,
            hbar,
            values,
            representation: Representation::Position,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    /// Sample spacing in the current representation.
    pub fn spacing(&self) -> f64 {
        match self.representation {
            Representation::Position => self.grid.dx(),
            Representation::Momentum => self.grid.dp(self.hbar),
        }
    }

    /// Sample coordinates in the current representation.
    pub fn coordinates(&self) -> Vec<f64> {
        match self.representation {
            Representation::Position => self.grid.xs(),
            Representation::Momentum => self.grid.ps(self.hbar),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.spacing()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::NonFinite { step: 0 });
        }
        let s = 1.0 / n.sqrt();
        for v in &mut self.values {
            *v *= s;
        }
        Ok(())
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    fn expect(&self, r: Representation) -> Result<()> {
        if self.representation != r {
            return Err(Error::RepresentationMismatch {
                expected: r,
                found: self.representation,
            });
        }
        Ok(())
    }

    pub fn to_momentum(&self) -> Result<WaveFunction> {
        self.expect(Representation::Position)?;
        let mut out = self.values.clone();
        Spectral::new(out.len()).forward(&mut out);
        Ok(self.from_fft_order(out))
    }

    pub fn to_position(&self) -> Result<WaveFunction> {
        self.expect(Representation::Momentum)?;
        let g = &self.grid;
        let n = g.len();
        let ps = g.ps(self.hbar);
        let scale = (2.0 * PI * self.hbar).sqrt() / g.dx();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for (k, (v, p)) in self.values.iter().zip(&ps).enumerate() {
            let phase = Complex64::from_polar(scale, p * g.x_min() / self.hbar);
            buf[(k + n / 2) % n] = v * phase;
        }
        Spectral::new(n).inverse(&mut buf);
        Ok(WaveFunction {
            grid: self.grid,
            hbar: self.hbar,
            values: buf,
            representation: Representation::Position,
        })
    }

    /// Builds the momentum-space state from a raw forward FFT of the position samples.
    pub(crate) fn from_fft_order(&self, spectrum: Vec<Complex64>) -> WaveFunction {
        let g = &self.grid;
        let n = g.len();
        let ps = g.ps(self.hbar);
        let scale = g.dx() / (2.0 * PI * self.hbar).sqrt();
        let values = ps
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let phase = Complex64::from_polar(scale, -p * g.x_min() / self.hbar);
                spectrum[(k + n / 2) % n] * phase
            })
            .collect();
        WaveFunction {
            grid: self.grid,
            hbar: self.hbar,
            values,
            representation: Representation::Momentum,
        }
    }

    /// Moments computed on the grid; momentum operators act spectrally.
    pub fn moments(&self) -> Result<Moments> {
        let psi = match self.representation {
            Representation::Position => std::borrow::Cow::Borrowed(self),
            Representation::Momentum => std::borrow::Cow::Owned(self.to_position()?),
        };
        let mut spec = Spectral::new(self.grid.len());
        Ok(position_moments(&psi, &mut spec))
    }

    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.grid != other.grid || self.hbar != other.hbar {
            return Err(Error::GridMismatch);
        }
        self.expect(other.representation)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.spacing())
    }

    /// Probability mass on `x < 0` (position) or `p < 0` (momentum), and on the rest.
    pub fn split_mass(&self) -> (f64, f64) {
        let h = self.spacing();
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (c, v) in self.coordinates().iter().zip(&self.values) {
            if *c < 0.0 {
                lo += v.norm_sqr();
            } else {
                hi += v.norm_sqr();
            }
        }
        (lo * h, hi * h)
    }
}

/// Moments of a position-space state, reusing an FFT plan.
pub(crate) fn position_moments(psi: &WaveFunction, spec: &mut Spectral) -> Moments {
    let g = psi.grid();
    let dx = g.dx();
    let xs = g.xs();
    let pk = g.ps_fft_order(psi.hbar());
    let vals = psi.values();

    let mut phi = vals.to_vec();
    spec.forward(&mut phi);
    let mut norm_k = 0.0;
    let mut p1 = 0.0;
    let mut p2 = 0.0;
    for (v, p) in phi.iter().zip(&pk) {
        let w = v.norm_sqr();
        norm_k += w;
        p1 += w * p;
        p2 += w * p * p;
    }
    for (v, p) in phi.iter_mut().zip(&pk) {
        *v *= p;
    }
    spec.inverse(&mut phi);

    let mut norm = 0.0;
    let mut x1 = 0.0;
    let mut x2 = 0.0;
    let mut xp = 0.0;
    for ((v, x), pv) in vals.iter().zip(&xs).zip(&phi) {
        let w = v.norm_sqr();
        norm += w;
        x1 += w * x;
        x2 += w * x * x;
        xp += x * (v.conj() * pv).re;
    }
    let mean_x = x1 / norm;
    let mean_p = p1 / norm_k;
    Moments {
        norm: norm * dx,
        mean_x,
        mean_p,
        var_x: x2 / norm - mean_x * mean_x,
        var_p: p2 / norm_k - mean_p * mean_p,
        cov_xp: xp / norm - mean_x * mean_p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn packet(grid: SpatialGrid) -> WaveFunction {
        let mut psi = WaveFunction::from_fn(grid, 1.0, |x| {
            Complex64::from_polar((-(x - 1.0).powi(2) / 4.0).exp(), 1.5 * x)
        });
        psi.normalize().unwrap();
        psi
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpatialGrid::new(1.0, 0.0, 64).is_err());
        assert!(SpatialGrid::new(0.0, 1.0, 100).is_err());
        assert!(SpatialGrid::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn momentum_grid_is_ascending_and_centered() {
        let g = SpatialGrid::centered(10.0, 8).unwrap();
        let ps = g.ps(1.0);
        assert!(ps.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(ps[4], 0.0);
        assert!((ps[0] + g.p_max(1.0)).abs() < 1e-14);
    }

    #[test]
    fn round_trip_and_parseval() {
        let psi = packet(SpatialGrid::centered(40.0, 1024).unwrap());
        let k = psi.to_momentum().unwrap();
        assert!((k.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);
        let back = k.to_position().unwrap();
        let err = back
            .values()
            .iter()
            .zip(psi.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
        assert!(psi.to_position().is_err());
        assert!(k.to_momentum().is_err());
    }

    #[test]
    fn momentum_amplitude_matches_analytic_transform() {
        // (2 pi)^-1/4 e^{-x^2/4} has transform (2/pi)^{1/4} e^{-p^2}.
        let g = SpatialGrid::new(-30.0, 34.0, 512).unwrap();
        let psi = WaveFunction::from_fn(g, 1.0, |x| {
            Complex64::new((2.0 * PI).powf(-0.25) * (-x * x / 4.0).exp(), 0.0)
        });
        let k = psi.to_momentum().unwrap();
        for (p, v) in g.ps(1.0).iter().zip(k.values()) {
            let exact = (2.0 / PI).powf(0.25) * (-p * p).exp();
            assert!((v - Complex64::new(exact, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn spectral_moments_of_a_boosted_gaussian() {
        let psi = packet(SpatialGrid::centered(40.0, 1024).unwrap());
        let m = psi.moments().unwrap();
        assert!((m.norm - 1.0).abs() < 1e-12);
        assert!((m.mean_x - 1.0).abs() < 1e-10);
        assert!((m.mean_p - 1.5).abs() < 1e-10);
        assert!((m.var_x - 1.0).abs() < 1e-10);
        assert!((m.var_p - 0.25).abs() < 1e-10);
        assert!(m.cov_xp.abs() < 1e-10);
        let via_k = psi.to_momentum().unwrap().moments().unwrap();
        assert!((via_k.var_p - m.var_p).abs() < 1e-12);
    }
}
