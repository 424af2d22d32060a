//! Thin layer over nalgebra's LU with a 1-norm condition estimate.

use nalgebra::{DMatrix, DVector};

/// Above this condition estimate a solve is logged as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e12;

pub fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverts `m` by LU with partial pivoting. Returns the inverse and
/// `‖m‖₁‖m⁻¹‖₁`, or `None` when the factorization is exactly singular.
pub fn inverse_with_condition(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let inv = m.clone().lu().try_inverse()?;
    let cond = norm1(m) * norm1(&inv);
    if !cond.is_finite() {
        return None;
    }
    if cond > CONDITION_WARN {
        log::warn!("ill-conditioned inverse: condition estimate {cond:e}");
    }
    Some((inv, cond))
}

pub fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = m.clone().lu();
    let x = lu.solve(rhs)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Sum of squared entries.
pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum()
}
