//! Mean-square approximation error of the truncated spectral filter, split
//! into the truncation part (`ε₁`) and the rational-construction part (`ε₂`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{CosineBasis, Kernel, TrianglePanels};
use crate::error::{FilterError, Result};
use crate::impulse::ModalImpulseResponse;
use crate::operators::{compose_rational, exact_projection, Composition, SpectralOperator};
use crate::par::{self, ExecutionMode};
use crate::tf::RationalTransferFunction;

/// Number of points the convergence fit uses, taken from the largest orders.
pub const RATE_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub order: usize,
    pub epsilon: f64,
    pub epsilon1: f64,
    pub epsilon2: f64,
    pub kernel_norm_sq: f64,
}

pub fn error_decomposition(tf: &RationalTransferFunction, horizon: f64, order: usize) -> Result<ErrorReport> {
    error_decomposition_with(tf, horizon, order, Composition::default())
}

pub fn error_decomposition_with(
    tf: &RationalTransferFunction,
    horizon: f64,
    order: usize,
    composition: Composition,
) -> Result<ErrorReport> {
    let kernel = ModalImpulseResponse::from_fractions(&tf.partial_fractions()?);
    let kernel_norm_sq = kernel.kernel_norm_squared(horizon)?;
    let exact = exact_projection(tf, horizon, order)?;
    let rational = compose_rational(tf, horizon, order, composition)?;
    Ok(report_from(order, kernel_norm_sq, &exact, &rational))
}

pub(crate) fn report_from(
    order: usize,
    kernel_norm_sq: f64,
    exact: &SpectralOperator,
    rational: &SpectralOperator,
) -> ErrorReport {
    let epsilon1 = kernel_norm_sq - exact.norm_squared();
    let epsilon2 = exact.distance_squared(rational);
    ErrorReport { order, epsilon: epsilon1 + epsilon2, epsilon1, epsilon2, kernel_norm_sq }
}

/// One report per order; orders are evaluated in parallel.
pub fn error_table(tf: &RationalTransferFunction, horizon: f64, orders: &[usize]) -> Result<Vec<ErrorReport>> {
    error_table_with(tf, horizon, orders, Composition::default(), ExecutionMode::default())
}

pub fn error_table_with(
    tf: &RationalTransferFunction,
    horizon: f64,
    orders: &[usize],
    composition: Composition,
    mode: ExecutionMode,
) -> Result<Vec<ErrorReport>> {
    if orders.is_empty() {
        return Err(FilterError::InvalidParameter("order list is empty".into()));
    }
    if orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FilterError::InvalidParameter("orders must be strictly ascending".into()));
    }
    let kernel = ModalImpulseResponse::from_fractions(&tf.partial_fractions()?);
    let kernel_norm_sq = kernel.kernel_norm_squared(horizon)?;
    par::map_range(mode, orders.len(), |k| {
        let order = orders[k];
        let exact = exact_projection(tf, horizon, order)?;
        let rational = compose_rational(tf, horizon, order, composition)?;
        Ok(report_from(order, kernel_norm_sq, &exact, &rational))
    })
    .into_iter()
    .collect()
}

/// Exponent `p` of `ε ≈ C/Lᵖ`, fitted by least squares in log-log
/// coordinates over the largest [`RATE_FIT_POINTS`] orders.
pub fn convergence_rate(reports: &[ErrorReport]) -> Result<f64> {
    if reports.len() < 3 {
        return Err(FilterError::DegenerateFit(format!("need at least 3 reports, got {}", reports.len())));
    }
    let tail = &reports[reports.len().saturating_sub(RATE_FIT_POINTS)..];
    if let Some(r) = tail.iter().find(|r| !(r.epsilon > 0.0)) {
        return Err(FilterError::DegenerateFit(format!("epsilon {} at L = {} is not positive", r.epsilon, r.order)));
    }
    let xs: Vec<f64> = tail.iter().map(|r| (r.order as f64).ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|r| r.epsilon.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(FilterError::DegenerateFit("all orders are equal".into()));
    }
    Ok(-sxy / sxx)
}

/// `∬_{[0,T]²} (k(t, τ) − Σ Mᵢⱼ q(i, t) q(j, τ))² dτ dt` by panel
/// Gauss–Legendre, with `k(t, τ) = k(t − τ)` below the diagonal and zero
/// above it.
pub fn direct_error_quadrature<K: Kernel>(kernel: &K, approx: &DMatrix<f64>, horizon: f64, panels: usize) -> Result<f64> {
    let basis = CosineBasis::new(horizon)?;
    let order = approx.nrows();
    let tri = TrianglePanels::new(horizon, panels);
    let parts = par::map_range(ExecutionMode::default(), tri.panel_count(), |p| {
        let mut taus = Vec::new();
        let mut qt = vec![0.0; order];
        let mut qtau = vec![0.0; order];
        let mut sum = 0.0;
        for (t, wt) in tri.outer(p) {
            basis.fill_values(t, &mut qt);
            // row(t) = Mᵀ q(t), so the synthesized kernel is row · q(τ)
            let row: Vec<f64> = (0..order).map(|j| (0..order).map(|i| approx[(i, j)] * qt[i]).sum()).collect();
            let synth = |tau: f64, buf: &mut Vec<f64>| {
                basis.fill_values(tau, buf);
                row.iter().zip(buf.iter()).map(|(r, q)| r * q).sum::<f64>()
            };
            let mut inner = 0.0;
            tri.below(p, t, &mut taus);
            for &(tau, w) in &taus {
                let d = kernel.value(t - tau) - synth(tau, &mut qtau);
                inner += w * d * d;
            }
            tri.above(p, t, &mut taus);
            for &(tau, w) in &taus {
                let d = synth(tau, &mut qtau);
                inner += w * d * d;
            }
            sum += wt * inner;
        }
        sum
    });
    Ok(parts.iter().sum())
}
