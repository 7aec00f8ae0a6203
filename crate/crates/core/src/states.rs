use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{SpatialGrid, WaveFunction};
use crate::potential::PotentialSpec;

/// Scalar constants of a run. Upper-case symbols belong to the target particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub m: f64,
    pub m_target: f64,
    pub hbar: f64,
    pub p_bar: f64,
    pub p_bar_target: f64,
    pub sigma: f64,
    pub sigma_target: f64,
    pub x_bar: f64,
    pub x_bar_target: f64,
    /// Position-coupling diffusion constant `D`.
    pub d: f64,
    /// Momentum-coupling constant `D_p`.
    pub d_p: f64,
    pub potential: PotentialSpec,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        let sigma = 100.0;
        Self {
            m: 1.0,
            m_target: 10.0,
            hbar: 1.0,
            p_bar: 1.0,
            p_bar_target: 0.0,
            sigma,
            sigma_target: 1.0,
            x_bar: -(PI / 2.0).sqrt() * sigma,
            x_bar_target: 0.0,
            d: 0.0,
            d_p: 0.0,
            potential: PotentialSpec::Gaussian { v0: 0.01, a: 0.1 },
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be >= 0 and finite, got {v}")))
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        positive("m", self.m)?;
        positive("hbar", self.hbar)?;
        positive("sigma", self.sigma)?;
        positive("p_bar", self.p_bar)?;
        non_negative("D", self.d)?;
        non_negative("D_p", self.d_p)?;
        if !self.x_bar.is_finite() || !self.p_bar_target.is_finite() {
            return Err(Error::invalid("x_bar", "must be finite"));
        }
        self.potential.validate()
    }

    pub fn validate_two_body(&self) -> Result<()> {
        self.validate()?;
        positive("M", self.m_target)?;
        positive("Sigma", self.sigma_target)?;
        if self.m_target <= self.m {
            return Err(Error::invalid("M", "target must be heavier than the particle"));
        }
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        self.p_bar * self.p_bar / (2.0 * self.m)
    }

    /// Distance scale `(pi sigma^2 / 2)^{1/2}` between packet and barrier.
    pub fn approach_distance(&self) -> f64 {
        (PI / 2.0).sqrt() * self.sigma
    }

    /// Interaction time `2 m x / p_bar` for the approach distance.
    pub fn default_tau(&self) -> f64 {
        2.0 * self.m * self.approach_distance() / self.p_bar
    }

    /// Width of the steady localized packet, `sigma_q^2 = (hbar^3 / 8 m D)^{1/2}`.
    pub fn sigma_q_sqr(&self) -> Result<f64> {
        if !(self.d > 0.0) {
            return Err(Error::Undefined {
                quantity: "sigma_q",
                reason: "requires D > 0",
            });
        }
        Ok((self.hbar.powi(3) / (8.0 * self.m * self.d)).sqrt())
    }
}

fn check_coverage(grid: &SpatialGrid, center: f64, sigma: f64) -> Result<()> {
    // mass outside [x_min, x_max] for a Gaussian density of std sigma
    let s = std::f64::consts::SQRT_2 * sigma;
    let outside = 0.5 * libm::erfc((grid.x_max() - center) / s)
        + 0.5 * libm::erfc((center - grid.x_min()) / s);
    if outside > 1e-8 {
        return Err(Error::GridTooNarrow {
            outside_mass: outside,
        });
    }
    Ok(())
}

/// Boosted Gaussian `(2 pi sigma^2)^{-1/4} exp(-(x - x_bar)^2 / 4 sigma^2 + i p_bar x / hbar)`.
pub fn gaussian_packet(params: &PhysicalParams, grid: &SpatialGrid) -> Result<WaveFunction> {
    positive("sigma", params.sigma)?;
    positive("hbar", params.hbar)?;
    gaussian_at(grid, params.hbar, params.sigma, params.x_bar, params.p_bar)
}

pub(crate) fn gaussian_at(
    grid: &SpatialGrid,
    hbar: f64,
    sigma: f64,
    center: f64,
    p: f64,
) -> Result<WaveFunction> {
    check_coverage(grid, center, sigma)?;
    let amp = (2.0 * PI * sigma * sigma).powf(-0.25);
    let mut psi = WaveFunction::from_fn(*grid, hbar, |x| {
        let d = x - center;
        Complex64::from_polar(amp * (-d * d / (4.0 * sigma * sigma)).exp(), p * x / hbar)
    });
    psi.normalize()?;
    Ok(psi)
}

/// Stationary QSD packet `exp(-(1 - i)(x - q)^2 / 4 sigma_q^2 + i p x / hbar)`.
pub fn qsd_steady_packet(
    params: &PhysicalParams,
    grid: &SpatialGrid,
    center_x: f64,
    center_p: f64,
) -> Result<WaveFunction> {
    let sq2 = params.sigma_q_sqr()?;
    check_coverage(grid, center_x, sq2.sqrt())?;
    let hbar = params.hbar;
    let amp = (2.0 * PI * sq2).powf(-0.25);
    let mut psi = WaveFunction::from_fn(*grid, hbar, |x| {
        let d = x - center_x;
        let q = d * d / (4.0 * sq2);
        Complex64::from_polar(amp * (-q).exp(), q + center_p * x / hbar)
    });
    psi.normalize()?;
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let p = PhysicalParams {
            sigma: 1.0,
            x_bar: 0.0,
            ..Default::default()
        };
        let g = SpatialGrid::centered(20.0, 1024).unwrap();
        let m = gaussian_packet(&p, &g).unwrap().moments().unwrap();
        assert!((m.norm - 1.0).abs() < 1e-12);
        assert!((m.var_x - 1.0).abs() < 1e-10);
        assert!((m.var_p - 0.25).abs() < 1e-10);
        assert!((m.mean_p - 1.0).abs() < 1e-10);
    }

    #[test]
    fn broad_packet_momentum_width() {
        let p = PhysicalParams {
            sigma: 100.0,
            x_bar: 0.0,
            ..Default::default()
        };
        let g = SpatialGrid::centered(1200.0, 8192).unwrap();
        let m = gaussian_packet(&p, &g).unwrap().moments().unwrap();
        assert!((m.mean_p - 1.0).abs() < 1e-6);
        assert!((m.var_p.sqrt() - 0.005).abs() < 1e-6 * 0.005);
    }

    #[test]
    fn offset_packet_mean_position() {
        let p = PhysicalParams {
            sigma: 2.0,
            x_bar: -10.0,
            ..Default::default()
        };
        let g = SpatialGrid::centered(40.0, 1024).unwrap();
        let psi = gaussian_packet(&p, &g).unwrap();
        // direct sum, independent of the spectral moment routine
        let dx = g.dx();
        let mean: f64 = g
            .xs()
            .iter()
            .zip(psi.values())
            .map(|(x, v)| x * v.norm_sqr() * dx)
            .sum();
        assert!((mean + 10.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let p = PhysicalParams {
            sigma: 2.0,
            x_bar: 0.0,
            ..Default::default()
        };
        let g = SpatialGrid::centered(8.0, 256).unwrap();
        assert!(matches!(
            gaussian_packet(&p, &g),
            Err(Error::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn steady_packet_moments() {
        let g = SpatialGrid::centered(20.0, 1024).unwrap();
        for (d, sq2) in [(0.125, 1.0), (2.0, 0.25)] {
            let p = PhysicalParams {
                d,
                ..Default::default()
            };
            assert!((p.sigma_q_sqr().unwrap() - sq2).abs() < 1e-15);
            let m = qsd_steady_packet(&p, &g, 1.5, -0.5).unwrap().moments().unwrap();
            assert!((m.var_x - sq2).abs() < 1e-6);
            assert!((m.var_p - 0.5 / sq2).abs() < 1e-6);
            assert!((m.cov_xp - 0.5).abs() < 1e-6);
            assert!((m.mean_x - 1.5).abs() < 1e-6);
            assert!((m.mean_p + 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn steady_packet_needs_diffusion() {
        let g = SpatialGrid::centered(20.0, 256).unwrap();
        let p = PhysicalParams::default();
        assert!(qsd_steady_packet(&p, &g, 0.0, 0.0).is_err());
    }
}
