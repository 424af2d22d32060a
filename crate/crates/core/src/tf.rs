//! Rational transfer functions `H(s) = M(s)/D(s)`, their poles and zeros,
//! real partial-fraction form and the induced power spectral density.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FilterError, Result};
use crate::poly;

/// Roots closer than this (relative to `1 + |λ|`) are one cluster.
const CLUSTER_TOL: f64 = 1e-8;
/// Clusters this close are merged when the merged point is a multiple root.
const MERGE_TOL: f64 = 1e-5;
/// Relative residual a merged candidate must reach to count as a multiple root.
const MULTIPLE_ROOT_RESIDUAL: f64 = 1e-10;

/// Strictly proper rational function with real coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransferFunction")]
pub struct RationalTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<RawTransferFunction> for RationalTransferFunction {
    type Error = FilterError;

    fn try_from(raw: RawTransferFunction) -> Result<Self> {
        Self::new(raw.num, raw.den)
    }
}

impl RationalTransferFunction {
    /// Validates and normalizes (trailing zero coefficients are stripped).
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(FilterError::EmptyCoefficients);
        }
        if num.iter().any(|c| !c.is_finite()) {
            return Err(FilterError::NonFiniteCoefficient("numerator"));
        }
        if den.iter().any(|c| !c.is_finite()) {
            return Err(FilterError::NonFiniteCoefficient("denominator"));
        }
        let num = poly::trim(&num);
        let den = poly::trim(&den);
        if num.is_empty() {
            return Err(FilterError::ZeroLeadingCoefficient("numerator"));
        }
        if den.is_empty() {
            return Err(FilterError::ZeroLeadingCoefficient("denominator"));
        }
        if den.len() <= num.len() {
            return Err(FilterError::NotProper {
                num: num.len() - 1,
                den: den.len() - 1,
            });
        }
        Ok(Self { num, den })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    /// `m`, the numerator degree.
    pub fn num_degree(&self) -> usize {
        self.num.len() - 1
    }

    /// `n`, the denominator degree (system order).
    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        poly::eval_complex(&self.num, s) / poly::eval_complex(&self.den, s)
    }

    pub fn eval_real(&self, s: f64) -> f64 {
        poly::eval(&self.num, s) / poly::eval(&self.den, s)
    }

    /// Power spectral density `|H(iω)|²`.
    pub fn psd(&self, omega: f64) -> Result<f64> {
        let s = Complex64::new(0.0, omega);
        let d = poly::eval_complex(&self.den, s);
        let tol = f64::EPSILON * poly::scale(&self.den) * (1.0 + omega.abs()).powi(self.order() as i32);
        if d.norm() <= tol {
            return Err(FilterError::PoleOnImaginaryAxis(omega));
        }
        Ok((poly::eval_complex(&self.num, s) / d).norm_sqr())
    }

    pub fn poles_zeros(&self) -> PoleZeroForm {
        let poles = polynomial_roots(&self.den);
        let zeros = polynomial_roots(&self.num)
            .into_iter()
            .flat_map(|r| std::iter::repeat_n(r.value, r.multiplicity))
            .collect();
        let stable = poles.iter().all(|p| p.value.re < 0.0);
        PoleZeroForm {
            gain: self.num[self.num.len() - 1] / self.den[self.den.len() - 1],
            zeros,
            poles,
            stable,
        }
    }

    pub fn partial_fractions(&self) -> Result<PartialFractions> {
        let pz = self.poles_zeros();
        let dden = poly::derivative(&self.den);
        let mut terms = Vec::new();
        for pole in &pz.poles {
            let lambda = pole.value;
            if lambda.norm() == 0.0 {
                return Err(FilterError::UnsupportedPoleStructure(
                    "pole at the origin has no finite time constant".into(),
                ));
            }
            if lambda.im == 0.0 {
                let lam = lambda.re;
                let theta = -1.0 / lam;
                match pole.multiplicity {
                    1 => {
                        let residue = poly::eval(&self.num, lam) / poly::eval(&dden, lam);
                        terms.push(FractionTerm::FirstOrder {
                            time_constant: theta,
                            coefficient: residue * theta,
                        });
                    }
                    2 => {
                        let q = deflate(&deflate(&self.den, lam), lam);
                        let (m, dm) = (poly::eval(&self.num, lam), poly::eval(&poly::derivative(&self.num), lam));
                        let (qv, dq) = (poly::eval(&q, lam), poly::eval(&poly::derivative(&q), lam));
                        let c2 = m / qv;
                        let c1 = (dm * qv - m * dq) / (qv * qv);
                        terms.push(FractionTerm::FirstOrder {
                            time_constant: theta,
                            coefficient: c1 * theta,
                        });
                        terms.push(FractionTerm::SecondOrderRepeated {
                            time_constant: theta,
                            coefficient: c2 * theta * theta,
                        });
                    }
                    k => {
                        return Err(FilterError::UnsupportedPoleStructure(format!(
                            "real pole {lam} has multiplicity {k} (at most 2 supported)"
                        )))
                    }
                }
            } else if lambda.im > 0.0 {
                if pole.multiplicity != 1 {
                    return Err(FilterError::UnsupportedPoleStructure(format!(
                        "complex pole {lambda} is repeated {} times",
                        pole.multiplicity
                    )));
                }
                let residue = poly::eval_complex(&self.num, lambda) / poly::eval_complex(&dden, lambda);
                let theta = 1.0 / lambda.norm();
                let damping = -lambda.re / lambda.norm();
                terms.push(FractionTerm::Oscillatory {
                    time_constant: theta,
                    damping,
                    constant: -2.0 * (residue * lambda.conj()).re * theta * theta,
                    linear: 2.0 * residue.re * theta * theta,
                });
            }
        }
        Ok(PartialFractions { terms })
    }
}

/// Factored form `gain · ∏(s − κ) / ∏(s − λ)^mult`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleZeroForm {
    /// `b_m / a_n`
    pub gain: f64,
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Root>,
    /// All poles strictly in the left half-plane.
    pub stable: bool,
}

impl PoleZeroForm {
    pub fn expand_denominator(&self, leading: f64) -> Vec<f64> {
        let roots: Vec<_> = self
            .poles
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.value, p.multiplicity))
            .collect();
        poly::from_roots(leading, &roots)
    }

    pub fn expand_numerator(&self, leading: f64) -> Vec<f64> {
        poly::from_roots(leading, &self.zeros)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// One real partial-fraction term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FractionTerm {
    /// `Δ / (θs + 1)`
    FirstOrder { time_constant: f64, coefficient: f64 },
    /// `Δ / (θs + 1)²`
    SecondOrderRepeated { time_constant: f64, coefficient: f64 },
    /// `(c₀ + c₁s) / (θ²s² + 2ξθs + 1)` for a simple complex-conjugate pole pair.
    Oscillatory {
        time_constant: f64,
        damping: f64,
        constant: f64,
        linear: f64,
    },
}

impl FractionTerm {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        match *self {
            FractionTerm::FirstOrder { time_constant, coefficient } => coefficient / (s * time_constant + 1.0),
            FractionTerm::SecondOrderRepeated { time_constant, coefficient } => {
                let d = s * time_constant + 1.0;
                coefficient / (d * d)
            }
            FractionTerm::Oscillatory { time_constant: th, damping: xi, constant, linear } => {
                (s * linear + constant) / (s * s * (th * th) + s * (2.0 * xi * th) + 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialFractions {
    pub terms: Vec<FractionTerm>,
}

impl PartialFractions {
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(s)).sum()
    }

    /// Coefficient of the first-order term with the given time constant (0 if absent).
    pub fn first_order_coefficient(&self, time_constant: f64) -> f64 {
        self.terms
            .iter()
            .filter_map(|t| match *t {
                FractionTerm::FirstOrder { time_constant: th, coefficient }
                    if (th - time_constant).abs() <= 1e-9 * time_constant.abs() =>
                {
                    Some(coefficient)
                }
                _ => None,
            })
            .sum()
    }

    pub fn repeated_coefficient(&self, time_constant: f64) -> f64 {
        self.terms
            .iter()
            .filter_map(|t| match *t {
                FractionTerm::SecondOrderRepeated { time_constant: th, coefficient }
                    if (th - time_constant).abs() <= 1e-9 * time_constant.abs() =>
                {
                    Some(coefficient)
                }
                _ => None,
            })
            .sum()
    }
}

/// Synthetic division by `(s − r)`; the remainder is dropped.
fn deflate(coeffs: &[f64], r: f64) -> Vec<f64> {
    let n = coeffs.len() - 1;
    let mut out = vec![0.0; n];
    let mut carry = 0.0;
    for k in (1..=n).rev() {
        carry = coeffs[k] + carry * r;
        out[k - 1] = carry;
    }
    out
}

fn companion_eigenvalues(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let lead = coeffs[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n - 1 {
        m[(i, i + 1)] = 1.0;
    }
    for j in 0..n {
        m[(n - 1, j)] = -coeffs[j] / lead;
    }
    m.complex_eigenvalues().iter().copied().collect()
}

/// Newton iterations on `p` from `z`, keeping the best iterate.
fn polish(p: &[f64], z: Complex64) -> Complex64 {
    let dp = poly::derivative(p);
    let mut best = z;
    let mut best_res = poly::eval_complex(p, z).norm();
    let mut cur = z;
    for _ in 0..8 {
        let d = poly::eval_complex(&dp, cur);
        if d.norm() == 0.0 {
            break;
        }
        cur -= poly::eval_complex(p, cur) / d;
        let res = poly::eval_complex(p, cur).norm();
        if res < best_res {
            best = cur;
            best_res = res;
        }
        if best_res == 0.0 {
            break;
        }
    }
    best
}

fn relative_residual(p: &[f64], z: Complex64) -> f64 {
    let magnitude: f64 = p
        .iter()
        .enumerate()
        .map(|(k, c)| c.abs() * z.norm().powi(k as i32))
        .sum();
    poly::eval_complex(p, z).norm() / magnitude.max(f64::MIN_POSITIVE)
}

/// Roots via eigenvalues of the monic companion matrix, clustered into
/// multiplicities and Newton-polished. Complex roots come in exact
/// conjugate pairs.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Root> {
    let coeffs = poly::trim(coeffs);
    if coeffs.len() < 2 {
        return Vec::new();
    }
    let raw = companion_eigenvalues(&coeffs);

    // (center, count)
    let mut clusters: Vec<(Complex64, usize)> = Vec::new();
    for r in raw {
        match clusters
            .iter_mut()
            .find(|(c, _)| (*c - r).norm() <= CLUSTER_TOL * (1.0 + c.norm()))
        {
            Some((c, k)) => {
                *c = (*c * *k as f64 + r) / (*k as f64 + 1.0);
                *k += 1;
            }
            None => clusters.push((r, 1)),
        }
    }

    // Merge near clusters that jointly form a multiple root.
    loop {
        let mut merged = false;
        'outer: for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (ca, ka) = clusters[a];
                let (cb, kb) = clusters[b];
                if (ca - cb).norm() > MERGE_TOL * (1.0 + ca.norm()) {
                    continue;
                }
                let k = ka + kb;
                let center = (ca * ka as f64 + cb * kb as f64) / k as f64;
                let mut deriv = coeffs.clone();
                for _ in 0..k - 1 {
                    deriv = poly::derivative(&deriv);
                }
                let candidate = polish(&deriv, center);
                if relative_residual(&coeffs, candidate) <= MULTIPLE_ROOT_RESIDUAL {
                    clusters[a] = (candidate, k);
                    clusters.remove(b);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let n = coeffs.len() - 1;
    let mut roots: Vec<Root> = Vec::new();
    for (c, k) in &clusters {
        let mut target = coeffs.clone();
        for _ in 0..k - 1 {
            target = poly::derivative(&target);
        }
        let mut z = *c;
        if z.im.abs() <= CLUSTER_TOL * (1.0 + z.norm()) {
            z.im = 0.0;
        }
        let mut polished = polish(&target, z);
        if z.im == 0.0 {
            polished.im = 0.0;
        }
        roots.push(Root { value: polished, multiplicity: *k });
    }

    // Enforce conjugate symmetry from the upper half-plane representatives.
    let upper: Vec<Root> = roots.iter().copied().filter(|r| r.value.im > 0.0).collect();
    let real: Vec<Root> = roots.iter().copied().filter(|r| r.value.im == 0.0).collect();
    let paired: usize = real.iter().map(|r| r.multiplicity).sum::<usize>()
        + 2 * upper.iter().map(|r| r.multiplicity).sum::<usize>();
    if paired == n {
        let mut out = real;
        for r in upper {
            out.push(r);
            out.push(Root { value: r.value.conj(), multiplicity: r.multiplicity });
        }
        roots = out;
    }
    roots.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(b.value.im.total_cmp(&a.value.im))
    });
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64]) -> RationalTransferFunction {
        RationalTransferFunction::new(num.to_vec(), den.to_vec()).unwrap()
    }

    #[test]
    fn validate_examples() {
        let h1 = tf(&[1.0], &[1.0, 3.0]);
        assert_eq!((h1.order(), h1.num_degree()), (1, 0));
        assert!(matches!(
            RationalTransferFunction::new(vec![1.0], vec![1.0]),
            Err(FilterError::NotProper { num: 0, den: 0 })
        ));
        let h3 = tf(&[1.0, 2.0], &[1.0, 11.0, 40.0, 48.0]);
        assert_eq!(h3.order(), 3);
        assert!(matches!(
            RationalTransferFunction::new(vec![0.0, 0.0], vec![1.0, 2.0]),
            Err(FilterError::ZeroLeadingCoefficient("numerator"))
        ));
        assert!(matches!(
            RationalTransferFunction::new(vec![], vec![1.0, 2.0]),
            Err(FilterError::EmptyCoefficients)
        ));
        // trailing zeros stripped before the properness check
        let t = tf(&[1.0, 0.0, 0.0], &[1.0, 1.0, 0.0]);
        assert_eq!(t.num(), &[1.0]);
        assert_eq!(t.den(), &[1.0, 1.0]);
    }

    #[test]
    fn json_round_trip_validates() {
        let t: RationalTransferFunction = serde_json::from_str(r#"{"num":[1],"den":[1,3]}"#).unwrap();
        assert_eq!(t.den(), &[1.0, 3.0]);
        assert!(serde_json::from_str::<RationalTransferFunction>(r#"{"num":[1,1],"den":[1,3]}"#).is_err());
    }

    #[test]
    fn double_pole_detected() {
        let pz = tf(&[1.0, 2.0], &[1.0, 8.0, 16.0]).poles_zeros();
        assert_eq!(pz.poles.len(), 1);
        assert_eq!(pz.poles[0].multiplicity, 2);
        assert!((pz.poles[0].value.re + 0.25).abs() < 1e-14);
        assert_eq!(pz.poles[0].value.im, 0.0);
        assert!(pz.stable);
        assert_eq!(pz.zeros.len(), 1);
        assert!((pz.zeros[0].re + 0.5).abs() < 1e-14);
    }

    #[test]
    fn simple_and_complex_poles() {
        let pz = tf(&[1.0], &[1.0, 1.0]).poles_zeros();
        assert_eq!(pz.poles, vec![Root { value: Complex64::new(-1.0, 0.0), multiplicity: 1 }]);

        let h4 = tf(&[1.0], &[1.0, 2.0, 4.0]);
        let pz = h4.poles_zeros();
        assert_eq!(pz.poles.len(), 2);
        let s3 = 3f64.sqrt() / 4.0;
        assert!((pz.poles[0].value - Complex64::new(-0.25, s3)).norm() < 1e-14);
        assert_eq!(pz.poles[1].value, pz.poles[0].value.conj());
        // |H4(iω)|² = 1/((1-4ω²)² + 4ω²)
        for w in [0.0f64, 0.3, 1.7] {
            let expect = 1.0 / ((1.0 - 4.0 * w * w).powi(2) + 4.0 * w * w);
            assert!((h4.psd(w).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn unstable_pole_is_flagged_not_rejected() {
        let pz = tf(&[1.0], &[-1.0, 1.0]).poles_zeros();
        assert!(!pz.stable);
    }

    #[test]
    fn dryden_partial_fractions() {
        // H3 = s(2s+1)/((3s+1)(4s+1)^2)
        let h3 = tf(&[0.0, 1.0, 2.0], &[1.0, 11.0, 40.0, 48.0]);
        let pf = h3.partial_fractions().unwrap();
        assert!((pf.first_order_coefficient(3.0) + 1.0).abs() < 1e-12);
        assert!((pf.first_order_coefficient(4.0) - 1.5).abs() < 1e-12);
        assert!((pf.repeated_coefficient(4.0) + 0.5).abs() < 1e-12);

        let h1 = tf(&[1.0], &[1.0, 3.0]);
        let pf = h1.partial_fractions().unwrap();
        assert_eq!(pf.terms.len(), 1);
        assert!((pf.first_order_coefficient(3.0) - 1.0).abs() < 1e-15);

        let h2 = tf(&[1.0, 2.0], &[1.0, 8.0, 16.0]);
        let pf = h2.partial_fractions().unwrap();
        assert!((pf.first_order_coefficient(4.0) - 0.5).abs() < 1e-12);
        assert!((pf.repeated_coefficient(4.0) - 0.5).abs() < 1e-12);
        assert_eq!(pf.first_order_coefficient(3.0), 0.0);
    }

    #[test]
    fn oscillatory_term_parameters() {
        let pf = tf(&[1.0], &[1.0, 2.0, 4.0]).partial_fractions().unwrap();
        match pf.terms.as_slice() {
            [FractionTerm::Oscillatory { time_constant, damping, constant, linear }] => {
                assert!((time_constant - 2.0).abs() < 1e-14);
                assert!((damping - 0.5).abs() < 1e-14);
                assert!((constant - 1.0).abs() < 1e-13);
                assert!(linear.abs() < 1e-13);
            }
            other => panic!("unexpected terms {other:?}"),
        }
    }

    #[test]
    fn unsupported_structures() {
        // triple real pole
        let t = tf(&[1.0], &poly::mul(&[1.0, 1.0], &poly::mul(&[1.0, 1.0], &[1.0, 1.0])));
        assert!(matches!(t.partial_fractions(), Err(FilterError::UnsupportedPoleStructure(_))));
        // repeated complex pair
        let q = [1.0, 1.0, 1.0];
        let t = tf(&[1.0], &poly::mul(&q, &q));
        assert!(matches!(t.partial_fractions(), Err(FilterError::UnsupportedPoleStructure(_))));
        // integrator
        let t = tf(&[1.0], &[0.0, 1.0]);
        assert!(matches!(t.partial_fractions(), Err(FilterError::UnsupportedPoleStructure(_))));
    }

    #[test]
    fn psd_values() {
        let h1 = tf(&[1.0], &[1.0, 3.0]);
        assert_eq!(h1.psd(0.0).unwrap(), 1.0);
        assert!((h1.psd(1.0).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(tf(&[1.0], &[1.0, 2.0, 4.0]).psd(0.0).unwrap(), 1.0);
        assert!(matches!(
            tf(&[1.0], &[1.0, 0.0, 1.0]).psd(1.0),
            Err(FilterError::PoleOnImaginaryAxis(_))
        ));
    }
}
