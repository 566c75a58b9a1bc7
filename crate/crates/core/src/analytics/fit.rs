//! Least-squares cubic fit on centered abscissae.
//!
//! The design matrix `[1, t, t², t³]` with `t = (x - center) / scale` is
//! factored with Householder reflections; coefficients are reported in the
//! centered but unscaled basis, i.e. `y ≈ c0 + c1 (x - center) + c2 (x - center)² + c3 (x - center)³`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::YearSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicFit {
    pub coefficients: [f64; 4],
    pub center: f64,
    pub rmse: f64,
}

impl CubicFit {
    pub fn eval(&self, x: f64) -> f64 {
        let t = x - self.center;
        let [c0, c1, c2, c3] = self.coefficients;
        ((c3 * t + c2) * t + c1) * t + c0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FitError {
    #[error("cubic fit needs at least 4 points, got {0}")]
    InsufficientPoints(usize),
    #[error("design matrix is rank deficient (fewer than 4 distinct abscissae)")]
    RankDeficient,
}

pub fn cubic_fit_series(series: &YearSeries) -> Result<CubicFit, FitError> {
    let pts: Vec<(f64, f64)> = series.points.iter().map(|&(y, v)| (y as f64, v)).collect();
    cubic_fit(&pts)
}

pub fn cubic_fit(points: &[(f64, f64)]) -> Result<CubicFit, FitError> {
    let n = points.len();
    if n < 4 {
        return Err(FitError::InsufficientPoints(n));
    }
    let center = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let scale = points.iter().map(|p| libm::fabs(p.0 - center)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(FitError::RankDeficient);
    }

    // Column-major n x 4 design and right-hand side.
    let mut a: Vec<[f64; 4]> = points
        .iter()
        .map(|&(x, _)| {
            let t = (x - center) / scale;
            [1.0, t, t * t, t * t * t]
        })
        .collect();
    let mut b: Vec<f64> = points.iter().map(|p| p.1).collect();

    let mut diag = [0.0f64; 4];
    for k in 0..4 {
        let norm = libm::sqrt(a[k..].iter().map(|r| r[k] * r[k]).sum::<f64>());
        if norm == 0.0 {
            return Err(FitError::RankDeficient);
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        // v = x - alpha e1, stored in place of column k.
        a[k][k] -= alpha;
        let vnorm2: f64 = a[k..].iter().map(|r| r[k] * r[k]).sum();
        if vnorm2 > 0.0 {
            for j in k + 1..4 {
                let dot: f64 = a[k..].iter().map(|r| r[k] * r[j]).sum();
                let f = 2.0 * dot / vnorm2;
                for r in a[k..].iter_mut() {
                    r[j] -= f * r[k];
                }
            }
            let dot: f64 = a[k..].iter().zip(&b[k..]).map(|(r, y)| r[k] * y).sum();
            let f = 2.0 * dot / vnorm2;
            for (r, y) in a[k..].iter().zip(b[k..].iter_mut()) {
                *y -= f * r[k];
            }
        }
        diag[k] = alpha;
    }
    let max_diag = diag.iter().map(|d| libm::fabs(*d)).fold(0.0, f64::max);
    if diag.iter().any(|d| libm::fabs(*d) <= max_diag * 1e-12) {
        return Err(FitError::RankDeficient);
    }

    // Back substitution on R (diagonal in `diag`, strict upper part in `a`).
    let mut scaled = [0.0f64; 4];
    for k in (0..4).rev() {
        let mut s = b[k];
        for j in k + 1..4 {
            s -= a[k][j] * scaled[j];
        }
        scaled[k] = s / diag[k];
    }
    let mut coefficients = [0.0f64; 4];
    let mut pow = 1.0;
    for k in 0..4 {
        coefficients[k] = scaled[k] / pow;
        pow *= scale;
    }
    let mut fit = CubicFit { coefficients, center, rmse: 0.0 };
    let sse: f64 = points.iter().map(|&(x, y)| (y - fit.eval(x)) * (y - fit.eval(x))).sum();
    fit.rmse = libm::sqrt(sse / n as f64);
    Ok(fit)
}
