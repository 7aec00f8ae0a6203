use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Barrier potentials, evaluable in position and momentum representation.
///
/// The Gaussian barrier has unit area times `v0`, so that its momentum
/// transform is `v0 (2 pi hbar)^{-1/2} exp(-a^2 p^2 / 2 hbar^2)` exactly. The
/// smeared window is the same unit-area Gaussian convolved with the indicator
/// of `[-l, l]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    SmearedWindow { v0: f64, a: f64, l: f64 },
    Gaussian { v0: f64, a: f64 },
    Step { v0: f64 },
    ComplexStep { v0: f64 },
}

fn theta(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        let v0 = self.v0();
        if !(v0.is_finite() && v0 >= 0.0) {
            return Err(Error::invalid("V0", "must be finite and >= 0"));
        }
        match *self {
            PotentialSpec::SmearedWindow { a, l, .. } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::invalid("a", "must be positive"));
                }
                if !(l > 0.0 && l.is_finite()) {
                    return Err(Error::invalid("L", "must be positive"));
                }
            }
            PotentialSpec::Gaussian { a, .. } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::invalid("a", "must be positive"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn v0(&self) -> f64 {
        match *self {
            PotentialSpec::SmearedWindow { v0, .. }
            | PotentialSpec::Gaussian { v0, .. }
            | PotentialSpec::Step { v0 }
            | PotentialSpec::ComplexStep { v0 } => v0,
        }
    }

    pub fn with_v0(self, v0: f64) -> Self {
        match self {
            PotentialSpec::SmearedWindow { a, l, .. } => PotentialSpec::SmearedWindow { v0, a, l },
            PotentialSpec::Gaussian { a, .. } => PotentialSpec::Gaussian { v0, a },
            PotentialSpec::Step { .. } => PotentialSpec::Step { v0 },
            PotentialSpec::ComplexStep { .. } => PotentialSpec::ComplexStep { v0 },
        }
    }

    /// Smoothing length, if the barrier has one.
    pub fn width(&self) -> Option<f64> {
        match *self {
            PotentialSpec::SmearedWindow { a, .. } | PotentialSpec::Gaussian { a, .. } => Some(a),
            _ => None,
        }
    }

    pub fn is_real(&self) -> bool {
        !matches!(self, PotentialSpec::ComplexStep { .. })
    }

    pub fn has_analytic_transform(&self) -> bool {
        matches!(
            self,
            PotentialSpec::SmearedWindow { .. } | PotentialSpec::Gaussian { .. }
        )
    }

    pub fn position(&self, x: f64) -> Complex64 {
        match *self {
            PotentialSpec::SmearedWindow { v0, a, l } => {
                let s = SQRT_2 * a;
                Complex64::new(0.5 * v0 * (libm::erf((l - x) / s) + libm::erf((l + x) / s)), 0.0)
            }
            PotentialSpec::Gaussian { v0, a } => {
                let norm = 1.0 / ((2.0 * PI).sqrt() * a);
                Complex64::new(v0 * norm * (-x * x / (2.0 * a * a)).exp(), 0.0)
            }
            PotentialSpec::Step { v0 } => Complex64::new(v0 * theta(x), 0.0),
            PotentialSpec::ComplexStep { v0 } => Complex64::new(0.0, -v0 * theta(x)),
        }
    }

    /// Largest |V(x)|.
    pub fn peak(&self) -> f64 {
        match *self {
            PotentialSpec::SmearedWindow { v0, a, l } => v0 * libm::erf(l / (SQRT_2 * a)),
            PotentialSpec::Gaussian { v0, a } => v0 / ((2.0 * PI).sqrt() * a),
            PotentialSpec::Step { v0 } | PotentialSpec::ComplexStep { v0 } => v0,
        }
    }

    /// Momentum transform `(2 pi hbar)^{-1/2} int e^{-ipx/hbar} V(x) dx`.
    ///
    /// For the steps only the `p != 0` part `-i hbar V0 / (p sqrt(2 pi hbar))`
    /// is returned; the `delta(p)` term is dropped and `p = 0` gives the
    /// principal value 0.
    pub fn momentum(&self, p: f64, hbar: f64) -> Complex64 {
        let root = (2.0 * PI * hbar).sqrt();
        match *self {
            PotentialSpec::Gaussian { v0, a } => {
                Complex64::new(v0 / root * (-a * a * p * p / (2.0 * hbar * hbar)).exp(), 0.0)
            }
            PotentialSpec::SmearedWindow { v0, a, l } => {
                let g = v0 / root * (-a * a * p * p / (2.0 * hbar * hbar)).exp();
                let f = if p == 0.0 {
                    2.0 * l
                } else {
                    2.0 * hbar * (p * l / hbar).sin() / p
                };
                Complex64::new(g * f, 0.0)
            }
            PotentialSpec::Step { v0 } => {
                if p == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, -hbar * v0 / (p * root))
                }
            }
            PotentialSpec::ComplexStep { v0 } => {
                if p == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    // -i times the real step transform
                    Complex64::new(-hbar * v0 / (p * root), 0.0)
                }
            }
        }
    }

    /// `|V(p)|^2`.
    pub fn momentum_sqr(&self, p: f64, hbar: f64) -> f64 {
        self.momentum(p, hbar).norm_sqr()
    }

    /// Interval outside of which `|V| <= rel * peak`.
    pub fn support(&self, rel: f64) -> (f64, f64) {
        let rel = rel.clamp(1e-300, 1.0);
        match *self {
            PotentialSpec::Gaussian { a, .. } => {
                let r = a * (2.0 * (1.0 / rel).ln()).sqrt();
                (-r, r)
            }
            PotentialSpec::SmearedWindow { a, l, .. } => {
                // outer tail: V ~ V0/2 erfc((x-l)/(sqrt2 a)); bisection on the closed form
                let target = rel * self.peak();
                let (mut lo, mut hi) = (0.0, l + 50.0 * a);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.position(mid).re > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (-hi, hi)
            }
            PotentialSpec::Step { .. } | PotentialSpec::ComplexStep { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Region that must be empty before reflected and transmitted parts are
    /// counted: four smoothing lengths beyond the barrier body. Steps have no
    /// smoothing length and return `None`.
    pub fn measurement_zone(&self) -> Option<(f64, f64)> {
        match *self {
            PotentialSpec::Gaussian { a, .. } => Some((-4.0 * a, 4.0 * a)),
            PotentialSpec::SmearedWindow { a, l, .. } => Some((-l - 4.0 * a, l + 4.0 * a)),
            _ => None,
        }
    }
}
