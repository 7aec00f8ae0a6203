use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Representation, Spectral, WaveFunction};

/// Real phase-space field sampled at `(xs[i], ps[j])`, stored row-major in `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceField {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Vec<f64>,
}

impl PhaseSpaceField {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ps.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ps.len();
        &self.values[i * n..(i + 1) * n]
    }

    fn dx(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    fn dp(&self) -> f64 {
        self.ps[1] - self.ps[0]
    }

    /// `int W dp` at each sampled `x`.
    pub fn position_marginal(&self) -> Vec<f64> {
        let dp = self.dp();
        (0..self.xs.len())
            .map(|i| self.row(i).iter().sum::<f64>() * dp)
            .collect()
    }

    /// `int W dx` at each `p` (only meaningful for a full, unstrided field).
    pub fn momentum_marginal(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut out = vec![0.0; self.ps.len()];
        for i in 0..self.xs.len() {
            for (o, w) in out.iter_mut().zip(self.row(i)) {
                *o += w * dx;
            }
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx() * self.dp()
    }
}

/// Wigner function on the full position grid and the conjugate momentum grid.
pub fn wigner_transform(psi: &WaveFunction) -> Result<PhaseSpaceField> {
    wigner_transform_strided(psi, 1)
}

/// Wigner function evaluated at every `stride`-th grid point in `x`.
///
/// Half-integer offsets use the band-limited (spectral) interpolant of the
/// samples, which makes both marginals exact on the grid.
pub fn wigner_transform_strided(psi: &WaveFunction, stride: usize) -> Result<PhaseSpaceField> {
    if psi.representation() != Representation::Position {
        return Err(Error::RepresentationMismatch {
            expected: Representation::Position,
            found: psi.representation(),
        });
    }
    if stride == 0 {
        return Err(Error::invalid("stride", "must be >= 1"));
    }
    let g = *psi.grid();
    let n = g.len();
    let hbar = psi.hbar();
    let dx = g.dx();
    let vals = psi.values();
    let mut spec = Spectral::new(n);

    let shift: Vec<Complex64> = g
        .ps_fft_order(hbar)
        .iter()
        .map(|p| Complex64::from_polar(1.0, p * dx / (2.0 * hbar)))
        .collect();
    let mut half = vals.to_vec();
    spec.apply_diagonal(&mut half, &shift);

    let ni = n as isize;
    let at = |v: &[Complex64], i: isize| v[i.rem_euclid(ni) as usize];
    let rows: Vec<usize> = (0..n).step_by(stride).collect();
    let scale = dx / (2.0 * PI * hbar);
    let mut values = Vec::with_capacity(rows.len() * n);
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    for &j in &rows {
        let j = j as isize;
        for k in -(ni / 2)..(ni / 2) {
            let l = k.div_euclid(2);
            let term = if k % 2 == 0 {
                at(vals, j + l).conj() * at(vals, j - l)
            } else {
                at(&half, j + l).conj() * at(&half, j - l - 1)
            };
            c[k.rem_euclid(ni) as usize] = term;
        }
        // sum_k c_k e^{+2 pi i m k / N}, un-normalized
        spec.inverse(&mut c);
        for m in 0..n {
            let idx = (m + n / 2) % n;
            values.push(c[idx].re * n as f64 * scale);
        }
    }
    Ok(PhaseSpaceField {
        xs: rows.iter().map(|&i| g.x(i)).collect(),
        ps: g.ps(hbar),
        values,
    })
}
