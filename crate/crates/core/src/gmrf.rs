//! Gaussian Markov random field algebra for the random-walk year prior.
//!
//! Everything here is O(n): precisions are symmetric tridiagonal, so the
//! Cholesky factor is lower bidiagonal.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::GmrfError;

/// Symmetric tridiagonal matrix stored by its diagonal and first
/// off-diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TridiagPrecision {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

/// Structure matrix of the backwards random walk with the final effect
/// pinned: `diag = (1, 2, ..., 2)`, `offdiag = (-1, ..., -1)`.
///
/// `v' Q v = sum_l (v_l - v_{l+1})^2 + v_n^2`.
pub fn build_q(n: usize) -> Result<TridiagPrecision, GmrfError> {
    if n == 0 {
        return Err(GmrfError::Empty);
    }
    let mut diag = vec![2.0; n];
    diag[0] = 1.0;
    Ok(TridiagPrecision {
        diag,
        offdiag: vec![-1.0; n - 1],
    })
}

impl TridiagPrecision {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self, GmrfError> {
        if diag.is_empty() {
            return Err(GmrfError::Empty);
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(GmrfError::DimensionMismatch {
                expected: diag.len() - 1,
                got: offdiag.len(),
            });
        }
        Ok(TridiagPrecision { diag, offdiag })
    }

    pub fn identity(n: usize) -> Result<Self, GmrfError> {
        if n == 0 {
            return Err(GmrfError::Empty);
        }
        Ok(TridiagPrecision {
            diag: vec![1.0; n],
            offdiag: vec![0.0; n - 1],
        })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Self {
        TridiagPrecision {
            diag: self.diag.iter().map(|d| d * c).collect(),
            offdiag: self.offdiag.iter().map(|d| d * c).collect(),
        }
    }

    /// `self + diag(extra)`.
    pub fn add_diag(&mut self, extra: &[f64]) -> Result<(), GmrfError> {
        self.check(extra.len())?;
        for (d, e) in self.diag.iter_mut().zip(extra) {
            *d += e;
        }
        Ok(())
    }

    fn check(&self, got: usize) -> Result<(), GmrfError> {
        if got != self.dim() {
            Err(GmrfError::DimensionMismatch {
                expected: self.dim(),
                got,
            })
        } else {
            Ok(())
        }
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>, GmrfError> {
        self.check(v.len())?;
        let n = v.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.offdiag[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.offdiag[i] * v[i + 1];
            }
            out[i] = acc;
        }
        Ok(out)
    }

    /// `v' self v`.
    pub fn quad_form(&self, v: &[f64]) -> Result<f64, GmrfError> {
        self.check(v.len())?;
        let mut acc = 0.0;
        for (i, &vi) in v.iter().enumerate() {
            acc += self.diag[i] * vi * vi;
            if i + 1 < v.len() {
                acc += 2.0 * self.offdiag[i] * vi * v[i + 1];
            }
        }
        Ok(acc)
    }

    /// Cholesky factorization `self = L L'` with `L` lower bidiagonal.
    pub fn cholesky(&self) -> Result<BidiagCholesky, GmrfError> {
        let n = self.dim();
        let mut diag = vec![0.0; n];
        let mut sub = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut pivot = self.diag[i];
            if i > 0 {
                pivot -= sub[i - 1] * sub[i - 1];
            }
            if !(pivot > 0.0 && pivot.is_finite()) {
                return Err(GmrfError::NotPositiveDefinite { pivot: i, value: pivot });
            }
            let l = pivot.sqrt();
            diag[i] = l;
            if i + 1 < n {
                sub[i] = self.offdiag[i] / l;
            }
        }
        Ok(BidiagCholesky { diag, sub })
    }
}

/// Lower-bidiagonal Cholesky factor: `diag` on the diagonal, `sub` on the
/// first subdiagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct BidiagCholesky {
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
}

impl BidiagCholesky {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    fn check(&self, got: usize) -> Result<(), GmrfError> {
        if got != self.dim() {
            Err(GmrfError::DimensionMismatch {
                expected: self.dim(),
                got,
            })
        } else {
            Ok(())
        }
    }

    /// Reassemble `L L'`.
    pub fn reconstruct(&self) -> TridiagPrecision {
        let n = self.dim();
        let diag = (0..n)
            .map(|i| {
                let d = self.diag[i] * self.diag[i];
                if i > 0 {
                    d + self.sub[i - 1] * self.sub[i - 1]
                } else {
                    d
                }
            })
            .collect();
        let offdiag = (0..n.saturating_sub(1))
            .map(|i| self.sub[i] * self.diag[i])
            .collect();
        TridiagPrecision { diag, offdiag }
    }

    /// Solve `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Result<Vec<f64>, GmrfError> {
        self.check(b.len())?;
        let mut y = vec![0.0; b.len()];
        for i in 0..b.len() {
            let mut r = b[i];
            if i > 0 {
                r -= self.sub[i - 1] * y[i - 1];
            }
            y[i] = r / self.diag[i];
        }
        Ok(y)
    }

    /// Solve `L' x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Result<Vec<f64>, GmrfError> {
        self.check(y.len())?;
        let n = y.len();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut r = y[i];
            if i + 1 < n {
                r -= self.sub[i] * x[i + 1];
            }
            x[i] = r / self.diag[i];
        }
        Ok(x)
    }

    /// Solve `L L' x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, GmrfError> {
        let y = self.solve_lower(rhs)?;
        self.solve_upper(&y)
    }

    /// `ln |L L'|`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.diag.iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Log density of `N(mean, (L L')^-1)` at `x`.
    pub fn mvn_log_density(&self, mean: &[f64], x: &[f64]) -> Result<f64, GmrfError> {
        self.check(mean.len())?;
        self.check(x.len())?;
        let n = x.len();
        // ||L' (x - m)||^2
        let mut q = 0.0;
        for i in 0..n {
            let mut v = self.diag[i] * (x[i] - mean[i]);
            if i + 1 < n {
                v += self.sub[i] * (x[i + 1] - mean[i + 1]);
            }
            q += v * v;
        }
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        Ok(-0.5 * n as f64 * ln_2pi + 0.5 * self.log_det() - 0.5 * q)
    }

    /// Draw from `N(mean, (L L')^-1)` as `mean + L'^-1 z`.
    pub fn sample<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Result<Vec<f64>, GmrfError> {
        self.check(mean.len())?;
        let z: Vec<f64> = (0..mean.len()).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = self.solve_upper(&z)?;
        for (xi, m) in x.iter_mut().zip(mean) {
            *xi += m;
        }
        Ok(x)
    }
}

/// Draw from a Gaussian with tridiagonal precision.
pub fn sample_mvn_tridiag<R: Rng + ?Sized>(
    mean: &[f64],
    precision: &TridiagPrecision,
    rng: &mut R,
) -> Result<Vec<f64>, GmrfError> {
    precision.cholesky()?.sample(mean, rng)
}
