//! Cosine orthonormal basis of `L₂([0, T])` and the quadrature projector
//! that every closed-form operator is checked against.
//!
//! `q(0, t) = √(1/T)`, `q(i, t) = √(2/T) cos(iπt/T)` for `i ≥ 1`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{FilterError, Result};
use crate::par::{self, ExecutionMode};
use crate::quadrature::GaussLegendre;

/// Per-element convergence threshold of [`project_kernel`].
pub const PROJECTION_TOL: f64 = 1e-10;
/// Panel doublings attempted before giving up.
const MAX_REFINEMENTS: usize = 4;

/// A causal convolution kernel `k(η)`, evaluated for `η > 0`.
pub trait Kernel: Sync {
    fn value(&self, eta: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> Kernel for F {
    fn value(&self, eta: f64) -> f64 {
        self(eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineBasis {
    horizon: f64,
}

impl CosineBasis {
    pub fn new(horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(FilterError::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        Ok(Self { horizon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(FilterError::TimeOutOfRange { t, horizon: self.horizon })
        }
    }

    pub fn eval(&self, i: usize, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.eval_unchecked(i, t))
    }

    pub fn eval_unchecked(&self, i: usize, t: f64) -> f64 {
        if i == 0 {
            (1.0 / self.horizon).sqrt()
        } else {
            (2.0 / self.horizon).sqrt() * (i as f64 * PI * t / self.horizon).cos()
        }
    }

    /// Writes `q(0, t), ..., q(out.len() − 1, t)` using the cosine recurrence.
    pub fn fill_values(&self, t: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        let x = PI * t / self.horizon;
        let c1 = x.cos();
        let two_c1 = 2.0 * c1;
        let n0 = (1.0 / self.horizon).sqrt();
        let n1 = (2.0 / self.horizon).sqrt();
        out[0] = n0;
        // Re-seed the recurrence periodically to bound drift.
        let (mut prev, mut cur) = (1.0, c1);
        for (i, slot) in out.iter_mut().enumerate().skip(1) {
            if i % 16 == 0 {
                prev = ((i - 1) as f64 * x).cos();
                cur = (i as f64 * x).cos();
            }
            *slot = n1 * cur;
            let next = two_c1 * cur - prev;
            prev = cur;
            cur = next;
        }
    }

    pub fn values(&self, t: f64, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.fill_values(t, &mut out);
        out
    }

    /// Partial sum `Σ_{i<L} cᵢ q(i, t)` on each grid point.
    pub fn synthesize(&self, coefficients: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
        let mut q = vec![0.0; coefficients.len()];
        grid.iter()
            .map(|&t| {
                self.check_time(t)?;
                self.fill_values(t, &mut q);
                Ok(q.iter().zip(coefficients).map(|(a, b)| a * b).sum())
            })
            .collect()
    }

    /// `cᵢ = ∫ f q(i, ·)` for `i < count`.
    pub fn project_function<F: Fn(f64) -> f64>(&self, f: F, count: usize) -> Vec<f64> {
        let rule = GaussLegendre::standard();
        let panels = 2 * count.max(8);
        let h = self.horizon / panels as f64;
        let mut out = vec![0.0; count];
        let mut q = vec![0.0; count];
        for p in 0..panels {
            let lo = p as f64 * h;
            for (t, w) in rule.mapped(lo, lo + h) {
                self.fill_values(t, &mut q);
                let fw = w * f(t);
                for (o, qi) in out.iter_mut().zip(&q) {
                    *o += fw * qi;
                }
            }
        }
        out
    }
}

/// Composite Gauss–Legendre nodes for the inner `τ` integral at a fixed `t`,
/// split at `τ = t` so neither side sees the kernel's jump.
pub(crate) struct TrianglePanels<'a> {
    rule: &'a GaussLegendre,
    horizon: f64,
    panels: usize,
}

impl<'a> TrianglePanels<'a> {
    pub(crate) fn new(horizon: f64, panels: usize) -> Self {
        Self { rule: GaussLegendre::standard(), horizon, panels }
    }

    pub(crate) fn width(&self) -> f64 {
        self.horizon / self.panels as f64
    }

    pub(crate) fn panel_count(&self) -> usize {
        self.panels
    }

    /// Outer nodes `(t, w)` belonging to panel `p`.
    pub(crate) fn outer(&self, p: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        let lo = p as f64 * self.width();
        self.rule.mapped(lo, lo + self.width())
    }

    /// `τ` nodes of `[0, t]`, with `t` inside panel `p`.
    pub(crate) fn below(&self, p: usize, t: f64, out: &mut Vec<(f64, f64)>) {
        out.clear();
        let h = self.width();
        for k in 0..p {
            let lo = k as f64 * h;
            out.extend(self.rule.mapped(lo, lo + h));
        }
        out.extend(self.rule.mapped(p as f64 * h, t));
    }

    /// `τ` nodes of `[t, T]`, with `t` inside panel `p`.
    pub(crate) fn above(&self, p: usize, t: f64, out: &mut Vec<(f64, f64)>) {
        out.clear();
        let h = self.width();
        out.extend(self.rule.mapped(t, (p + 1) as f64 * h));
        for k in p + 1..self.panels {
            let lo = k as f64 * h;
            out.extend(self.rule.mapped(lo, lo + h));
        }
    }
}

fn project_once<K: Kernel>(basis: &CosineBasis, kernel: &K, order: usize, panels: usize, mode: ExecutionMode) -> DMatrix<f64> {
    let tri = TrianglePanels::new(basis.horizon, panels);
    let partials = par::map_range(mode, tri.panel_count(), |p| {
        let mut w = DMatrix::<f64>::zeros(order, order);
        let mut taus = Vec::new();
        let mut qt = vec![0.0; order];
        let mut qtau = vec![0.0; order];
        let mut g = vec![0.0; order];
        for (t, wt) in tri.outer(p) {
            tri.below(p, t, &mut taus);
            g.iter_mut().for_each(|x| *x = 0.0);
            for &(tau, wtau) in &taus {
                let kv = wtau * kernel.value(t - tau);
                if kv == 0.0 {
                    continue;
                }
                basis.fill_values(tau, &mut qtau);
                for (gj, qj) in g.iter_mut().zip(&qtau) {
                    *gj += kv * qj;
                }
            }
            basis.fill_values(t, &mut qt);
            for j in 0..order {
                let gj = wt * g[j];
                for i in 0..order {
                    w[(i, j)] += qt[i] * gj;
                }
            }
        }
        w
    });
    partials
        .into_iter()
        .fold(DMatrix::zeros(order, order), |acc, m| acc + m)
}

/// `W_ij = ∬_{τ≤t} k(t − τ) q(i, t) q(j, τ) dτ dt` by panel Gauss–Legendre
/// over the causal triangle, doubling the panel count until successive
/// results agree to [`PROJECTION_TOL`] in every element.
pub fn project_kernel<K: Kernel>(basis: &CosineBasis, kernel: &K, order: usize) -> Result<DMatrix<f64>> {
    project_kernel_with(basis, kernel, order, ExecutionMode::default())
}

pub fn project_kernel_with<K: Kernel>(
    basis: &CosineBasis,
    kernel: &K,
    order: usize,
    mode: ExecutionMode,
) -> Result<DMatrix<f64>> {
    if order == 0 {
        return Err(FilterError::InvalidParameter("truncation order must be at least 1".into()));
    }
    let mut panels = order.max(8);
    let mut prev = project_once(basis, kernel, order, panels, mode);
    let mut delta = f64::INFINITY;
    for _ in 0..MAX_REFINEMENTS {
        panels *= 2;
        let next = project_once(basis, kernel, order, panels, mode);
        delta = (&next - &prev).amax();
        if delta < PROJECTION_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(FilterError::QuadratureNotConverged { delta, panels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_values() {
        let b = CosineBasis::new(5.0).unwrap();
        assert!((b.eval(0, 3.3).unwrap() - 0.4472135955).abs() < 1e-10);
        assert!((b.eval(1, 0.0).unwrap() - (0.4f64).sqrt()).abs() < 1e-15);
        assert!((b.eval(2, 5.0).unwrap() - (0.4f64).sqrt()).abs() < 1e-15);
        assert!(matches!(b.eval(1, 5.1), Err(FilterError::TimeOutOfRange { .. })));
        assert!(matches!(b.eval(1, -0.1), Err(FilterError::TimeOutOfRange { .. })));
        assert!(CosineBasis::new(0.0).is_err());
    }

    #[test]
    fn recurrence_matches_direct() {
        let b = CosineBasis::new(5.0).unwrap();
        for &t in &[0.0, 0.123, 2.5, 4.99, 5.0] {
            let v = b.values(t, 300);
            for (i, x) in v.iter().enumerate() {
                assert!((x - b.eval_unchecked(i, t)).abs() < 1e-12, "i={i} t={t}");
            }
        }
    }

    #[test]
    fn orthonormal() {
        let b = CosineBasis::new(5.0).unwrap();
        let rule = GaussLegendre::standard();
        for i in 0..=8 {
            for j in 0..=8 {
                let v = rule.integrate(0.0, 5.0, 8, |t| b.eval_unchecked(i, t) * b.eval_unchecked(j, t));
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-10, "({i},{j}) -> {v}");
            }
        }
    }

    #[test]
    fn synthesis() {
        let b = CosineBasis::new(5.0).unwrap();
        let mut c = vec![0.0; 4];
        c[0] = 1.0;
        assert_eq!(b.synthesize(&c, &[0.0]).unwrap(), vec![(0.2f64).sqrt()]);
        assert!(b.synthesize(&c, &[6.0]).is_err());

        // constant lies in the span
        let c = b.project_function(|_| 1.0, 8);
        let norm_sq: f64 = c.iter().map(|x| x * x).sum();
        assert!((5.0 - norm_sq).abs() < 1e-12);

        // f(t) = t: ‖t‖² = T³/3, remainder after 64 terms is O(1/L³)
        let c = b.project_function(|t| t, 64);
        let captured: f64 = c.iter().map(|x| x * x).sum();
        let remainder = 125.0 / 3.0 - captured;
        assert!((-1e-12..1e-4).contains(&remainder), "remainder {remainder}");
    }

    #[test]
    fn zero_and_step_kernels() {
        let b = CosineBasis::new(5.0).unwrap();
        let w = project_kernel(&b, &|_: f64| 0.0, 3).unwrap();
        assert_eq!(w, DMatrix::zeros(3, 3));
        let w = project_kernel(&b, &|_: f64| 1.0, 2).unwrap();
        assert!((w[(0, 0)] - 2.5).abs() < 1e-12);
    }
}
