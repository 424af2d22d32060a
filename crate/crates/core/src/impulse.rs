//! Closed-form impulse responses as sums of modal terms, their energy
//! integrals, and trajectory simulation by the left-endpoint Itô sum.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::Kernel;
use crate::error::{FilterError, Result};
use crate::simulation::{GaussianSource, Method, SampleTrajectory};
use crate::tf::{FractionTerm, PartialFractions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalKind {
    /// `c e^{μη}`
    Exp,
    /// `c η e^{μη}`
    TExp,
    /// `c e^{μη} cos νη`
    ExpCos,
    /// `c e^{μη} sin νη`
    ExpSin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalTerm {
    pub kind: ModalKind,
    /// `μ`, 1/s
    pub rate: f64,
    /// `ν`, rad/s; zero for the real kinds
    pub frequency: f64,
    pub coefficient: f64,
}

impl ModalTerm {
    pub fn value(&self, eta: f64) -> f64 {
        let e = self.coefficient * (self.rate * eta).exp();
        match self.kind {
            ModalKind::Exp => e,
            ModalKind::TExp => e * eta,
            ModalKind::ExpCos => e * (self.frequency * eta).cos(),
            ModalKind::ExpSin => e * (self.frequency * eta).sin(),
        }
    }

    /// The term as `Re(c η^p e^{zη})`.
    pub(crate) fn complex_form(&self) -> (Complex64, u32, Complex64) {
        let z = Complex64::new(self.rate, self.frequency);
        match self.kind {
            ModalKind::Exp => (Complex64::new(self.coefficient, 0.0), 0, Complex64::new(self.rate, 0.0)),
            ModalKind::TExp => (Complex64::new(self.coefficient, 0.0), 1, Complex64::new(self.rate, 0.0)),
            ModalKind::ExpCos => (Complex64::new(self.coefficient, 0.0), 0, z),
            ModalKind::ExpSin => (Complex64::new(0.0, -self.coefficient), 0, z),
        }
    }
}

/// `k(η) = Σ terms`, with `k(η) = 0` for `η ≤ 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModalImpulseResponse {
    pub terms: Vec<ModalTerm>,
}

impl Kernel for ModalImpulseResponse {
    fn value(&self, eta: f64) -> f64 {
        self.eval(eta)
    }
}

impl ModalImpulseResponse {
    pub fn from_fractions(pf: &PartialFractions) -> Self {
        let mut terms = Vec::new();
        for term in &pf.terms {
            match *term {
                FractionTerm::FirstOrder { time_constant, coefficient } => terms.push(ModalTerm {
                    kind: ModalKind::Exp,
                    rate: -1.0 / time_constant,
                    frequency: 0.0,
                    coefficient: coefficient / time_constant,
                }),
                FractionTerm::SecondOrderRepeated { time_constant, coefficient } => terms.push(ModalTerm {
                    kind: ModalKind::TExp,
                    rate: -1.0 / time_constant,
                    frequency: 0.0,
                    coefficient: coefficient / (time_constant * time_constant),
                }),
                FractionTerm::Oscillatory { time_constant, damping, constant, linear } => {
                    let mu = -damping / time_constant;
                    let nu = (1.0 - damping * damping).sqrt() / time_constant;
                    // unit block: e^{μη} sin(νη) / (θ√(1−ξ²)); the s-term is its derivative
                    let base = 1.0 / (time_constant * (1.0 - damping * damping).sqrt());
                    let sin_coef = base * (constant + linear * mu);
                    let cos_coef = base * linear * nu;
                    if sin_coef != 0.0 {
                        terms.push(ModalTerm { kind: ModalKind::ExpSin, rate: mu, frequency: nu, coefficient: sin_coef });
                    }
                    if cos_coef != 0.0 {
                        terms.push(ModalTerm { kind: ModalKind::ExpCos, rate: mu, frequency: nu, coefficient: cos_coef });
                    }
                }
            }
        }
        Self { terms }
    }

    /// Unit step `1(η)`, the integral block's kernel.
    pub fn unit_step() -> Self {
        Self {
            terms: vec![ModalTerm { kind: ModalKind::Exp, rate: 0.0, frequency: 0.0, coefficient: 1.0 }],
        }
    }

    pub fn eval(&self, eta: f64) -> f64 {
        if eta <= 0.0 {
            0.0
        } else {
            self.eval_analytic(eta)
        }
    }

    /// The modal sum without the causal cutoff (gives `k(0⁺)` at zero).
    pub fn eval_analytic(&self, eta: f64) -> f64 {
        self.terms.iter().map(|t| t.value(eta)).sum()
    }

    /// `k²` as `Σ ½ Re(c η^p e^{wη})`.
    fn square_terms(&self) -> Vec<(Complex64, u32, Complex64)> {
        let forms: Vec<_> = self.terms.iter().map(ModalTerm::complex_form).collect();
        let mut out = Vec::with_capacity(2 * forms.len() * forms.len());
        for &(ca, pa, za) in &forms {
            for &(cb, pb, zb) in &forms {
                out.push((0.5 * ca * cb, pa + pb, za + zb));
                out.push((0.5 * ca * cb.conj(), pa + pb, za + zb.conj()));
            }
        }
        out
    }

    /// `E x²(t) = ∫₀ᵗ k²(u) du`.
    pub fn variance_at(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(FilterError::InvalidParameter(format!("time must be nonnegative, got {t}")));
        }
        Ok(self
            .square_terms()
            .into_iter()
            .map(|(c, p, w)| (c * moment(p, w, t)).re)
            .sum())
    }

    /// `‖k(t − τ)‖²` over the causal triangle of `[0, T]²`, i.e.
    /// `∫₀ᵀ∫₀ᵗ k²(t − τ) dτ dt = ∫₀ᵀ (T − u) k²(u) du`.
    pub fn kernel_norm_squared(&self, horizon: f64) -> Result<f64> {
        if !(horizon > 0.0) {
            return Err(FilterError::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(self
            .square_terms()
            .into_iter()
            .map(|(c, p, w)| (c * (horizon * moment(p, w, horizon) - moment(p + 1, w, horizon))).re)
            .sum())
    }

    /// Left-endpoint Itô sum `x(t_j) = Σ_{i<j} k(t_j − t_i) √h ξ_i` on the
    /// uniform grid of `steps + 1` points.
    pub fn ito_sum_simulate(&self, horizon: f64, steps: usize, source: &mut GaussianSource) -> Result<SampleTrajectory> {
        self.ito_sum_strided(horizon, steps, 1, source)
    }

    /// As [`Self::ito_sum_simulate`], keeping every `record_every`-th grid
    /// point. The noise sequence is the same for any stride.
    pub fn ito_sum_strided(
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
        let h = horizon / steps as f64;
        let sqrt_h = h.sqrt();
        let mut xi = vec![0.0; steps];
        source.fill(&mut xi);
        // lag[m] = k(m h) √h
        let lag: Vec<f64> = (0..=steps).map(|m| self.eval(m as f64 * h) * sqrt_h).collect();
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for j in (0..=steps).step_by(record_every) {
            let x: f64 = (0..j).map(|i| lag[j - i] * xi[i]).sum();
            grid.push(j as f64 * horizon / steps as f64);
            values.push(x);
        }
        Ok(SampleTrajectory::new(grid, values, Method::ItoSum, source))
    }
}

/// `∫₀ᵗ u^n e^{wu} du` for complex `w`.
pub(crate) fn moment(n: u32, w: Complex64, t: f64) -> Complex64 {
    if t == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let wt = w * t;
    if wt.norm() < 2.0 {
        // Σ_k w^k t^{n+k+1} / (k! (n+k+1))
        let mut sum = Complex64::new(0.0, 0.0);
        let mut pow = Complex64::new(t.powi(n as i32 + 1), 0.0); // w^k t^{n+k+1} / k!
        for k in 0..200u32 {
            let term = pow / f64::from(n + k + 1);
            sum += term;
            if term.norm() <= 1e-18 * sum.norm() {
                break;
            }
            pow = pow * wt / f64::from(k + 1);
        }
        sum
    } else {
        let ewt = wt.exp();
        let mut acc = (ewt - 1.0) / w;
        for k in 1..=n {
            acc = (ewt * t.powi(k as i32) - acc * f64::from(k)) / w;
        }
        acc
    }
}
