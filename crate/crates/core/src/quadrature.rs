//! Gauss-Legendre rules on [-1, 1].

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // Exact mirror symmetry keeps parity cancellations clean.
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared rule of order `n`; rules are built once per process.
    pub fn cached(n: usize) -> Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap();
        guard
            .entry(n)
            .or_insert_with(|| Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Weighted sum of already tabulated values.
    pub fn sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Returns (P_n(x), P_n'(x)).
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` on [-1, 1], doubling the order until two successive
/// estimates agree to `rel_tol` (relative to `scale` when the integral is small).
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, start: usize, rel_tol: f64, scale: f64) -> f64 {
    let mut n = start.max(8);
    let mut prev = GaussLegendre::cached(n).integrate(&f);
    for _ in 0..8 {
        n *= 2;
        let cur = GaussLegendre::cached(n).integrate(&f);
        if (cur - prev).abs() <= rel_tol * cur.abs().max(scale) {
            return cur;
        }
        prev = cur;
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        let q = GaussLegendre::new(6);
        // degree 11 is the exactness limit for six nodes
        let v = q.integrate(|x| x.powi(10) + 3.0 * x.powi(4) - 1.0);
        assert!((v - (2.0 / 11.0 + 6.0 / 5.0 - 2.0)).abs() < 1e-14);
        assert!((q.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn nodes_are_mirror_symmetric() {
        for n in [5, 16, 129] {
            let q = GaussLegendre::new(n);
            for i in 0..n {
                assert_eq!(q.nodes[i], -q.nodes[n - 1 - i]);
                assert_eq!(q.weights[i], q.weights[n - 1 - i]);
            }
        }
    }

    #[test]
    fn oscillatory_integral() {
        let mu = 40.3;
        let q = GaussLegendre::new(80);
        let v = q.integrate(|x| (mu * x).cos());
        assert!((v - 2.0 * mu.sin() / mu).abs() < 1e-13);
    }
}
