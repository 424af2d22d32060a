//! Companion-form realizations `x̄′ = Ax̄ + Bg`, `x = Cx̄` of a transfer
//! function, and their Euler–Maruyama simulation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{FilterError, Result};
use crate::linalg;
use crate::poly;
use crate::simulation::{GaussianSource, Method, SampleTrajectory};
use crate::tf::RationalTransferFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceRealization {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

impl StateSpaceRealization {
    /// Companion `A` for `den`, `C = [1, 0, ..., 0]`, and the given `B`.
    fn with_input(den: &[f64], b: DVector<f64>) -> Self {
        Self { a: companion_matrix(den), c: unit_output(den.len() - 1), b }
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// Same system with a replaced input column.
    pub fn with_b(&self, b: DVector<f64>) -> Self {
        assert_eq!(b.len(), self.order());
        Self { a: self.a.clone(), b, c: self.c.clone() }
    }

    /// `C(sE − A)⁻¹B`
    pub fn transfer(&self, s: Complex64) -> Option<Complex64> {
        let n = self.order();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let rhs = DVector::from_iterator(n, self.b.iter().map(|&x| Complex64::new(x, 0.0)));
        let x = m.lu().solve(&rhs)?;
        Some(self.c.iter().zip(x.iter()).map(|(&c, &x)| x * c).sum())
    }

    /// `|C(sE − A)⁻¹B − H(s)|`
    pub fn transfer_residual(&self, tf: &RationalTransferFunction, s: Complex64) -> Result<f64> {
        let d = poly::eval_complex(tf.den(), s);
        let magnitude: f64 = tf
            .den()
            .iter()
            .enumerate()
            .map(|(k, a)| a.abs() * s.norm().powi(k as i32))
            .sum();
        if d.norm() <= 1e-12 * magnitude {
            return Err(FilterError::SamplePointOnPole(s.to_string()));
        }
        let h = self
            .transfer(s)
            .ok_or_else(|| FilterError::SamplePointOnPole(s.to_string()))?;
        Ok((h - tf.eval(s)).norm())
    }

    /// Euler–Maruyama from `x̄₀ = 0`:
    /// `x̄_{k+1} = x̄_k + hAx̄_k + B√h ξ_k`, returning `x = Cx̄` on `steps + 1` points.
    pub fn euler_maruyama(&self, horizon: f64, steps: usize, source: &mut GaussianSource) -> Result<SampleTrajectory> {
        self.euler_maruyama_strided(horizon, steps, 1, source)
    }

    /// As [`Self::euler_maruyama`], recording every `record_every`-th point.
    pub fn euler_maruyama_strided(
        &self,
        horizon: f64,
        steps: usize,
        record_every: usize,
        source: &mut GaussianSource,
    ) -> Result<SampleTrajectory> {
        if steps == 0 || record_every == 0 {
            return Err(FilterError::InvalidParameter("steps and stride must be positive".into()));
        }
        if !(horizon > 0.0) {
            return Err(FilterError::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let n = self.order();
        let h = horizon / steps as f64;
        let sqrt_h = h.sqrt();
        let ha = &self.a * h;
        let mut x = DVector::<f64>::zeros(n);
        let mut next = DVector::<f64>::zeros(n);
        let mut grid = Vec::with_capacity(steps / record_every + 1);
        let mut values = Vec::with_capacity(steps / record_every + 1);
        grid.push(0.0);
        values.push(0.0);
        for k in 1..=steps {
            let xi = source.next_normal() * sqrt_h;
            next.copy_from(&x);
            next.gemv(1.0, &ha, &x, 1.0);
            next.axpy(xi, &self.b, 1.0);
            std::mem::swap(&mut x, &mut next);
            if k % record_every == 0 {
                grid.push(k as f64 * horizon / steps as f64);
                values.push(self.c.dot(&x));
            }
        }
        Ok(SampleTrajectory::new(grid, values, Method::EulerMaruyama, source))
    }
}

/// Serializable `(A, B, C)` for reports.
#[derive(Debug, Clone, Serialize)]
pub struct RealizationReport {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl From<&StateSpaceRealization> for RealizationReport {
    fn from(r: &StateSpaceRealization) -> Self {
        Self {
            a: r.a.row_iter().map(|row| row.iter().copied().collect()).collect(),
            b: r.b.iter().copied().collect(),
            c: r.c.iter().copied().collect(),
        }
    }
}

/// Ones on the superdiagonal, `−a_j/a_n` across the last row.
pub fn companion_matrix(den: &[f64]) -> DMatrix<f64> {
    let n = den.len() - 1;
    let lead = den[n];
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = -den[j] / lead;
    }
    a
}

fn unit_output(n: usize) -> DVector<f64> {
    let mut c = DVector::zeros(n);
    c[0] = 1.0;
    c
}

/// Realization with `B` from the forward recursion (1-based in the formula):
/// `Bᵢ = 0` for `i < n−m`, `B_{n−m} = b_m/a_n`,
/// `Bᵢ = (b_{n−i} − Σ_{j=n−m}^{i−1} a_{n−i+j} Bⱼ)/a_n` afterwards.
pub fn companion_realization(tf: &RationalTransferFunction) -> StateSpaceRealization {
    let (num, den) = (tf.num(), tf.den());
    let n = tf.order();
    let m = tf.num_degree();
    let an = den[n];
    // b1[i] holds B_i for i in 1..=n
    let mut b1 = vec![0.0; n + 1];
    let first = n - m;
    b1[first] = num[m] / an;
    for i in first + 1..=n {
        let mut acc = num[n - i];
        for j in first..i {
            acc -= den[n - i + j] * b1[j];
        }
        b1[i] = acc / an;
    }
    StateSpaceRealization::with_input(den, DVector::from_vec(b1[1..].to_vec()))
}

/// Default interpolation nodes `0, 1, ..., n−1`, each pushed by `+0.5`
/// while it sits on (or numerically next to) a pole or repeats a node.
pub fn default_interpolation_points(tf: &RationalTransferFunction) -> Vec<f64> {
    let n = tf.order();
    let tol = 1e-8 * poly::scale(tf.den());
    let mut points: Vec<f64> = Vec::with_capacity(n);
    for k in 0..n {
        let mut s = k as f64;
        while poly::eval(tf.den(), s).abs() <= tol || points.contains(&s) {
            s += 0.5;
        }
        points.push(s);
    }
    points
}

/// Realization with `B` solving `VB = M`, `V_kj = Σ_{l=j}^{n} a_l s_k^{l−j}`,
/// `M_k = M(s_k)`.
pub fn interpolation_realization(tf: &RationalTransferFunction, points: &[f64]) -> Result<StateSpaceRealization> {
    let n = tf.order();
    if points.len() != n {
        return Err(FilterError::WrongPointCount { expected: n, got: points.len() });
    }
    for (k, &s) in points.iter().enumerate() {
        if points[..k].contains(&s) {
            return Err(FilterError::SingularVandermondeLike);
        }
    }
    let den = tf.den();
    let tol = 1e-8 * poly::scale(den);
    for &s in points {
        if poly::eval(den, s).abs() <= tol {
            return Err(FilterError::SamplePointOnPole(s.to_string()));
        }
    }
    // 0-based column j ↔ 1-based j+1: Σ_{l=j+1}^{n} a_l s^{l−j−1}
    let v = DMatrix::from_fn(n, n, |k, j| {
        (j + 1..=n).map(|l| den[l] * points[k].powi((l - j - 1) as i32)).sum()
    });
    let rhs = DVector::from_iterator(n, points.iter().map(|&s| poly::eval(tf.num(), s)));
    let b = linalg::solve(&v, &rhs).ok_or(FilterError::SingularVandermondeLike)?;
    Ok(StateSpaceRealization::with_input(den, b))
}
