//! Dense real polynomials stored in ascending powers, `c[0] + c[1] s + ...`.

use num_complex::Complex64;

pub fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn eval_complex(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

pub fn derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Drops trailing (highest-power) exact zeros.
pub fn trim(coeffs: &[f64]) -> Vec<f64> {
    let len = coeffs
        .iter()
        .rposition(|&c| c != 0.0)
        .map_or(0, |p| p + 1);
    coeffs[..len].to_vec()
}

/// Expands `gain * prod (s - r)` into real coefficients. Complex roots are
/// expected in conjugate pairs; imaginary residue is discarded.
pub fn from_roots(gain: f64, roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(gain, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (k, &c) in acc.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r;
        }
        acc = next;
    }
    acc.into_iter().map(|c| c.re).collect()
}

/// Largest absolute coefficient, used as a scale for "is this zero" tests.
pub fn scale(coeffs: &[f64]) -> f64 {
    coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_expansion() {
        // (3s + 1)(4s + 1)^2 = 48 s^3 + 40 s^2 + 11 s + 1
        let p = mul(&[1.0, 3.0], &mul(&[1.0, 4.0], &[1.0, 4.0]));
        assert_eq!(p, vec![1.0, 11.0, 40.0, 48.0]);
        assert_eq!(eval(&p, 2.0), 1.0 + 22.0 + 160.0 + 384.0);
    }

    #[test]
    fn roots_round_trip() {
        let roots = [
            Complex64::new(-0.25, 3f64.sqrt() / 4.0),
            Complex64::new(-0.25, -(3f64.sqrt()) / 4.0),
        ];
        let p = from_roots(4.0, &roots);
        for (a, b) in p.iter().zip([1.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn trim_and_derivative() {
        assert_eq!(trim(&[1.0, 2.0, 0.0, 0.0]), vec![1.0, 2.0]);
        assert!(trim(&[0.0, 0.0]).is_empty());
        assert_eq!(derivative(&[5.0, 1.0, 3.0]), vec![1.0, 6.0]);
    }
}
