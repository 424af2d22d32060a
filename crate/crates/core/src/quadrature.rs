//! Gauss–Legendre rules on `[-1, 1]`.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule, nodes ascending.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for k in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared 32-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(32))
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    /// Composite rule over `panels` equal panels of `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, panels: usize, f: F) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + p as f64 * h;
                self.mapped(lo, lo + h).map(|(x, w)| w * f(x)).sum::<f64>()
            })
            .sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(5);
        // exact up to degree 9
        let v: f64 = rule.mapped(0.0, 2.0).map(|(x, w)| w * x.powi(9)).sum();
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
        let sum: f64 = rule.weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-14);
    }

    #[test]
    fn standard_rule_is_symmetric() {
        let rule = GaussLegendre::standard();
        assert_eq!(rule.nodes.len(), 32);
        for k in 0..32 {
            assert!((rule.nodes[k] + rule.nodes[31 - k]).abs() < 1e-15);
        }
        let v = rule.integrate(0.0, std::f64::consts::PI, 4, f64::sin);
        assert!((v - 2.0).abs() < 1e-14);
    }
}
