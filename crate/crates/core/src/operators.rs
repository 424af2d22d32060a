//! Truncated two-dimensional non-stationary transfer functions in the
//! cosine basis: closed-form block matrices, rational expressions in the
//! truncated differentiation matrix `P̃`, and the whitening inverse.
//!
//! All block formulas fill `c_ij` for `i ≥ j` and obtain the upper triangle
//! from `c_ji = (−1)^{i+j} c_ij` (`c_i0 = (−1)^i c_0i` on the border).

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FilterError, Result};
use crate::impulse::{moment, ModalImpulseResponse};
use crate::linalg;
use crate::par::{self, ExecutionMode};
use crate::tf::{FractionTerm, RationalTransferFunction};

/// Largest condition estimate accepted for a matrix inversion.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    RationalInP,
    Quadrature,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed_form",
            Provenance::RationalInP => "rational_in_P",
            Provenance::Quadrature => "quadrature",
        }
    }
}

/// An `L × L` truncated operator on the basis of `L₂([0, T])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralOperator {
    matrix: DMatrix<f64>,
    horizon: f64,
    provenance: Provenance,
}

impl SpectralOperator {
    pub fn new(matrix: DMatrix<f64>, horizon: f64, provenance: Provenance) -> Self {
        assert!(matrix.is_square(), "spectral operators are square");
        Self { matrix, horizon, provenance }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Truncation order `L`.
    pub fn order(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `Σ W_ij²`
    pub fn norm_squared(&self) -> f64 {
        linalg::frobenius_sq(&self.matrix)
    }

    /// `‖self − other‖²`
    pub fn distance_squared(&self, other: &SpectralOperator) -> f64 {
        linalg::frobenius_sq(&(&self.matrix - &other.matrix))
    }
}

/// Time constant and damping of a typical block with the derived quantities
/// the closed forms are written in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockParameters {
    time_constant: f64,
    damping: f64,
}

impl BlockParameters {
    /// First-order lag; `μ = −1/θ`, `ν = 0`.
    pub fn aperiodic(time_constant: f64) -> Result<Self> {
        if !(time_constant > 0.0 && time_constant.is_finite()) {
            return Err(FilterError::InvalidParameter(format!(
                "time constant must be positive, got {time_constant}"
            )));
        }
        Ok(Self { time_constant, damping: 1.0 })
    }

    pub fn oscillatory(time_constant: f64, damping: f64) -> Result<Self> {
        Self::aperiodic(time_constant)?;
        if !(damping > -1.0 && damping < 1.0) {
            return Err(FilterError::InvalidParameter(format!("damping must lie in (-1, 1), got {damping}")));
        }
        Ok(Self { time_constant, damping })
    }

    pub fn time_constant(&self) -> f64 {
        self.time_constant
    }

    pub fn damping(&self) -> f64 {
        self.damping
    }

    pub fn mu(&self) -> f64 {
        -self.damping / self.time_constant
    }

    pub fn nu(&self) -> f64 {
        (1.0 - self.damping * self.damping).max(0.0).sqrt() / self.time_constant
    }

    pub fn lambda(&self) -> f64 {
        1.0 / self.time_constant
    }

    /// `η² = μ² − ν²`, signed.
    pub fn eta_sq(&self) -> f64 {
        let (mu, nu) = (self.mu(), self.nu());
        mu * mu - nu * nu
    }

    /// `φᵢ± = μ²T² ± i²π²`
    pub fn phi(&self, i: usize, horizon: f64, sign: f64) -> f64 {
        let mt = self.mu() * horizon;
        mt * mt + sign * sq(i as f64 * PI)
    }

    /// `ψᵢ± = λ²T² ± i²π²`
    pub fn psi(&self, i: usize, horizon: f64, sign: f64) -> f64 {
        let lt = self.lambda() * horizon;
        lt * lt + sign * sq(i as f64 * PI)
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

fn parity(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        Err(FilterError::InvalidParameter("truncation order must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(FilterError::InvalidParameter(format!("horizon must be positive, got {horizon}")))
    }
}

/// Builds `c` from `c_00`, the border `c_0i` and the lower triangle
/// `c_ij` (`1 ≤ j ≤ i`) with the parity symmetry.
fn parity_symmetric(
    order: usize,
    c00: f64,
    border: impl Fn(usize) -> f64,
    lower: impl Fn(usize, usize) -> f64,
) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(order, order);
    c[(0, 0)] = c00;
    for i in 1..order {
        let v = border(i);
        c[(0, i)] = v;
        c[(i, 0)] = parity(i) * v;
        for j in 1..=i {
            let v = lower(i, j);
            c[(i, j)] = v;
            if j != i {
                c[(j, i)] = parity(i + j) * v;
            }
        }
    }
    c
}

/// `P⁻¹`, the integral block.
pub fn integration_matrix(horizon: f64, order: usize) -> Result<SpectralOperator> {
    check_horizon(horizon)?;
    check_order(order)?;
    let mut c = DMatrix::zeros(order, order);
    c[(0, 0)] = 0.5;
    for i in 1..order {
        let v = SQRT_2 * (1.0 - parity(i)) / sq(i as f64 * PI);
        c[(0, i)] = v;
        c[(i, 0)] = -v;
        for j in 1..i {
            let v = 2.0 * (parity(i + j) - 1.0) / ((sq(i as f64) - sq(j as f64)) * PI * PI);
            c[(i, j)] = v;
            c[(j, i)] = -v;
        }
    }
    Ok(SpectralOperator::new(c * horizon, horizon, Provenance::ClosedForm))
}

/// `P`, the derivative block.
pub fn differentiation_matrix(horizon: f64, order: usize) -> Result<SpectralOperator> {
    check_horizon(horizon)?;
    check_order(order)?;
    let mut c = parity_symmetric(
        order,
        1.0,
        |i| parity(i) * SQRT_2,
        |i, j| {
            if i == j {
                2.0
            } else {
                let (i2, j2) = (sq(i as f64), sq(j as f64));
                2.0 * (i2 - parity(i + j) * j2) / (i2 - j2)
            }
        },
    );
    c /= horizon;
    Ok(SpectralOperator::new(c, horizon, Provenance::ClosedForm))
}

/// `A_θ`, the aperiodic block `1/(θs + 1)`.
pub fn aperiodic_matrix(params: &BlockParameters, horizon: f64, order: usize) -> Result<SpectralOperator> {
    check_horizon(horizon)?;
    check_order(order)?;
    let t = horizon;
    let mu = -1.0 / params.time_constant();
    let mt = mu * t;
    let e = mt.exp();
    let phi = |i: usize| mt * mt + sq(i as f64 * PI);
    let c00 = (mt.exp_m1() - mt) / (mu * mu * t);
    let c = parity_symmetric(
        order,
        c00,
        |i| SQRT_2 * t * (e - parity(i)) / phi(i),
        |i, j| {
            let gamma = if i == j {
                mt / 2.0
            } else {
                sq(j as f64) * (1.0 - parity(i + j)) / (sq(i as f64) - sq(j as f64))
            };
            2.0 * t / phi(j) * (mt * mt * (parity(i) * e - 1.0) / phi(i) - gamma)
        },
    );
    Ok(SpectralOperator::new(c * (-mu), horizon, Provenance::ClosedForm))
}

/// `A_θ²`, the second-order aperiodic block `1/(θs + 1)²`.
pub fn aperiodic2_matrix(params: &BlockParameters, horizon: f64, order: usize) -> Result<SpectralOperator> {
    check_horizon(horizon)?;
    check_order(order)?;
    let t = horizon;
    let mu = -1.0 / params.time_constant();
    let mt = mu * t;
    let e = mt.exp();
    let phi_p = |i: usize| mt * mt + sq(i as f64 * PI);
    let phi_m = |i: usize| mt * mt - sq(i as f64 * PI);
    let c00 = ((mt - 2.0) * e + mt + 2.0) / (mu * mu * mu * t);
    let c = parity_symmetric(
        order,
        c00,
        |i| SQRT_2 * t * t * (2.0 * mt * (parity(i) - e) + phi_p(i) * e) / sq(phi_p(i)),
        |i, j| {
            let zeta = if i == j {
                phi_m(j)
            } else {
                4.0 * mu * sq(j as f64) * t * (1.0 - parity(i + j)) / (sq(i as f64) - sq(j as f64))
            };
            let bracket = (1.0 - parity(i) * e) * (phi_m(i) / phi_p(i) + phi_m(j) / phi_p(j)) + parity(i) * mt * e;
            2.0 * mu * t * t * t / (phi_p(i) * phi_p(j)) * bracket + zeta * t * t / sq(phi_p(j))
        },
    );
    Ok(SpectralOperator::new(c * (mu * mu), horizon, Provenance::ClosedForm))
}

/// `K_{θ,ξ}`, the oscillatory block `1/(θ²s² + 2ξθs + 1)`.
pub fn oscillatory_matrix(params: &BlockParameters, horizon: f64, order: usize) -> Result<SpectralOperator> {
    check_horizon(horizon)?;
    check_order(order)?;
    let t = horizon;
    let (mu, nu, lam) = (params.mu(), params.nu(), params.lambda());
    let eta2 = params.eta_sq();
    let l2t2 = sq(lam * t);
    let l4 = sq(lam * lam);
    let em = (mu * t).exp();
    let (ec, es) = (em * (nu * t).cos(), em * (nu * t).sin());
    let psi_p = |i: usize| l2t2 + sq(i as f64 * PI);
    let psi_m = |i: usize| l2t2 - sq(i as f64 * PI);
    let denom = |i: usize| sq(psi_p(i)) - sq(2.0 * PI * nu * i as f64 * t);

    for i in 1..order {
        let d = denom(i);
        if d.abs() <= 1e-12 * sq(psi_p(i)) {
            return Err(FilterError::ResonantParameters { index: i });
        }
    }

    let c00 = (2.0 * mu * nu * (1.0 - ec) + eta2 * es + nu * lam * lam * t) / (l4 * t);
    let c = parity_symmetric(
        order,
        c00,
        |i| {
            let i2p2 = sq(i as f64 * PI);
            SQRT_2 * t * (2.0 * mu * nu * t * t * (parity(i) - ec) + (eta2 * t * t + i2p2) * es) / denom(i)
        },
        |i, j| {
            let kappa = if i == j {
                psi_m(j)
            } else {
                4.0 * mu * sq(j as f64) * t * (1.0 - parity(i + j)) / (sq(i as f64) - sq(j as f64))
            };
            let (fi, fj) = (i as f64, j as f64);
            let dd = denom(i) * denom(j);
            let first = 2.0 * mu * nu * (l4 * t.powi(4) - sq(fi * fj) * PI.powi(4)) * (1.0 - parity(i) * ec);
            let second = parity(i)
                * (eta2 * l4 * t.powi(4) + PI * PI * (l4 * (fi * fi + fj * fj) * t * t + sq(PI * fi * fj) * eta2))
                * es;
            2.0 * t.powi(3) * (first + second) / dd + nu * kappa * t * t / denom(j)
        },
    );
    let scale = 1.0 / (params.time_constant() * (1.0 - sq(params.damping())).sqrt());
    Ok(SpectralOperator::new(c * scale, horizon, Provenance::ClosedForm))
}

/// `kẼ`, the proportional block.
pub fn proportional(gain: f64, horizon: f64, order: usize) -> Result<SpectralOperator> {
    check_horizon(horizon)?;
    check_order(order)?;
    Ok(SpectralOperator::new(
        DMatrix::identity(order, order) * gain,
        horizon,
        Provenance::RationalInP,
    ))
}

/// Which algebraic route turns `H(s)` into a rational function of `P̃`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// `(Σ aₖP̃ᵏ)⁻¹ (Σ bₖP̃ᵏ)`
    Polynomial,
    /// `(b_m/a_n) ∏(P̃ − λẼ)⁻¹ ∏(P̃ − κẼ)`, conjugate pairs as real quadratics.
    Factored,
    /// Factored when every pole and zero is real, polynomial otherwise.
    #[default]
    Auto,
}

/// `Σ cₖ Pᵏ` by Horner's scheme on the truncated matrix.
fn matrix_polynomial(coeffs: &[f64], p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows();
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for &c in coeffs.iter().rev() {
        acc = &acc * p;
        for k in 0..n {
            acc[(k, k)] += c;
        }
    }
    acc
}

fn left_divide(den: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (inv, condition) = linalg::inverse_with_condition(den)
        .ok_or(FilterError::SingularDenominatorMatrix { condition: f64::INFINITY })?;
    if condition > MAX_CONDITION {
        return Err(FilterError::SingularDenominatorMatrix { condition });
    }
    Ok(inv * rhs)
}

/// `(Σ aₖP̃ᵏ)⁻¹ (Σ bₖP̃ᵏ)` for arbitrary coefficient lists; a constant
/// ratio gives the proportional block.
pub fn compose_polynomial(num: &[f64], den: &[f64], horizon: f64, order: usize) -> Result<SpectralOperator> {
    let p = differentiation_matrix(horizon, order)?.into_matrix();
    let n = matrix_polynomial(num, &p);
    let d = matrix_polynomial(den, &p);
    Ok(SpectralOperator::new(left_divide(&d, &n)?, horizon, Provenance::RationalInP))
}

/// `Ŵ`, the transfer function written as a rational function of `P̃`.
pub fn compose_rational(
    tf: &RationalTransferFunction,
    horizon: f64,
    order: usize,
    composition: Composition,
) -> Result<SpectralOperator> {
    let pz = tf.poles_zeros();
    let all_real = pz.poles.iter().all(|r| r.value.im == 0.0) && pz.zeros.iter().all(|z| z.im == 0.0);
    let factored = match composition {
        Composition::Polynomial => false,
        Composition::Factored => true,
        Composition::Auto => all_real,
    };
    if !factored {
        return compose_polynomial(tf.num(), tf.den(), horizon, order);
    }

    let p = differentiation_matrix(horizon, order)?.into_matrix();
    let eye = DMatrix::<f64>::identity(order, order);
    // (P − rE) or (P² − 2Re(r)P + |r|²E)
    let factor = |r: Complex64| -> Option<DMatrix<f64>> {
        if r.im == 0.0 {
            Some(&p - &eye * r.re)
        } else if r.im > 0.0 {
            Some(&p * &p - &p * (2.0 * r.re) + &eye * r.norm_sqr())
        } else {
            None
        }
    };
    let mut w = &eye * pz.gain;
    for &z in &pz.zeros {
        if let Some(f) = factor(z) {
            w = f * w;
        }
    }
    for pole in &pz.poles {
        if let Some(f) = factor(pole.value) {
            for _ in 0..pole.multiplicity {
                w = left_divide(&f, &w)?;
            }
        }
    }
    Ok(SpectralOperator::new(w, horizon, Provenance::RationalInP))
}

/// `∬_{τ≤t} (t−τ)^p e^{z(t−τ)} e^{at} e^{bτ} dτ dt` for `p ∈ {0, 1}`.
fn exponential_double_integral(p: u32, z: Complex64, a: Complex64, b: Complex64, horizon: f64) -> Complex64 {
    // With f(x) = ∫₀ᵀ e^{(a+x)t} dt the p = 0 integral is the divided
    // difference f[b, z] and p = 1 is its z-derivative f[b, z, z].
    let d = b - z;
    if d.norm() * horizon < 1e-4 {
        let f = |k: u32| moment(k, a + z, horizon);
        return match p {
            0 => f(1) + f(2) * d / 2.0 + f(3) * d * d / 6.0,
            _ => f(2) / 2.0 + f(3) * d / 6.0 + f(4) * d * d / 24.0,
        };
    }
    let j0 = (moment(0, a + b, horizon) - moment(0, a + z, horizon)) / d;
    match p {
        0 => j0,
        _ => (j0 - moment(1, a + z, horizon)) / d,
    }
}

/// Exact projection of any modal impulse response, term by term, through
/// complex exponentials: `cos ωt = (e^{iωt} + e^{−iωt})/2`.
pub fn modal_projection(k: &ModalImpulseResponse, horizon: f64, order: usize) -> Result<SpectralOperator> {
    check_horizon(horizon)?;
    check_order(order)?;
    let norm = |i: usize| if i == 0 { (1.0 / horizon).sqrt() } else { (2.0 / horizon).sqrt() };
    let omega = |i: usize| i as f64 * PI / horizon;
    let forms: Vec<_> = k.terms.iter().map(|t| t.complex_form()).collect();
    let rows = par::map_range(ExecutionMode::default(), order, |i| {
        (0..order)
            .map(|j| {
                let mut acc = 0.0;
                for &(c, p, z) in &forms {
                    let mut s = Complex64::new(0.0, 0.0);
                    for sa in [1.0, -1.0] {
                        for sb in [1.0, -1.0] {
                            let a = Complex64::new(0.0, sa * omega(i));
                            let b = Complex64::new(0.0, sb * omega(j));
                            s += exponential_double_integral(p, z, a, b, horizon);
                        }
                    }
                    acc += (c * s).re * 0.25;
                }
                acc * norm(i) * norm(j)
            })
            .collect::<Vec<_>>()
    });
    let w = DMatrix::from_fn(order, order, |i, j| rows[i][j]);
    Ok(SpectralOperator::new(w, horizon, Provenance::ClosedForm))
}

/// `W̃`, the exact truncated projection, summed from the block matrices of
/// the partial-fraction terms. Terms outside the blocks' stated domain
/// (unstable poles, the `s`-numerator of an oscillatory pair) go through
/// [`modal_projection`].
pub fn exact_projection(tf: &RationalTransferFunction, horizon: f64, order: usize) -> Result<SpectralOperator> {
    check_horizon(horizon)?;
    check_order(order)?;
    let pf = tf.partial_fractions()?;
    let mut w = DMatrix::<f64>::zeros(order, order);
    let mut residual_terms = Vec::new();
    for term in &pf.terms {
        match *term {
            FractionTerm::FirstOrder { time_constant, coefficient } if time_constant > 0.0 => {
                let b = BlockParameters::aperiodic(time_constant)?;
                w += aperiodic_matrix(&b, horizon, order)?.into_matrix() * coefficient;
            }
            FractionTerm::SecondOrderRepeated { time_constant, coefficient } if time_constant > 0.0 => {
                let b = BlockParameters::aperiodic(time_constant)?;
                w += aperiodic2_matrix(&b, horizon, order)?.into_matrix() * coefficient;
            }
            FractionTerm::Oscillatory { time_constant, damping, constant, linear } if damping > -1.0 => {
                let b = BlockParameters::oscillatory(time_constant, damping)?;
                if constant != 0.0 {
                    w += oscillatory_matrix(&b, horizon, order)?.into_matrix() * constant;
                }
                if linear != 0.0 {
                    residual_terms.push(FractionTerm::Oscillatory { time_constant, damping, constant: 0.0, linear });
                }
            }
            other => residual_terms.push(other),
        }
    }
    if !residual_terms.is_empty() {
        let rest = ModalImpulseResponse::from_fractions(&crate::tf::PartialFractions { terms: residual_terms });
        w += modal_projection(&rest, horizon, order)?.into_matrix();
    }
    Ok(SpectralOperator::new(w, horizon, Provenance::ClosedForm))
}

/// Inverse of a truncated operator: the whitening filter.
pub fn whitening_operator(w: &SpectralOperator) -> Result<SpectralOperator> {
    let (inv, condition) = linalg::inverse_with_condition(w.matrix())
        .ok_or(FilterError::SingularOperator { condition: f64::INFINITY })?;
    if condition > MAX_CONDITION {
        return Err(FilterError::SingularOperator { condition });
    }
    Ok(SpectralOperator::new(inv, w.horizon(), w.provenance()))
}
