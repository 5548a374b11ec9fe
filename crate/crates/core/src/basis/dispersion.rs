//! Wall-normal dispersion relations and their roots.
//!
//! Every relation is multiplied through by cos(mu) or sin(mu) so that it is
//! smooth; on each tangent/cotangent branch the original relation is strictly
//! increasing, so each branch holds exactly one root.

use std::f64::consts::PI;

use super::Symmetry;
use crate::error::{Error, Result};

/// Which relation a family obeys: 1D modes have no lateral wavevector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    OneD(Symmetry),
    Lateral(Symmetry),
}

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Bisection stops once the bracket is narrower than this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions { tolerance: 1e-13, max_iterations: 200 }
    }
}

/// Smooth relation value, its derivative and a magnitude scale for
/// normalizing residuals.
fn relation(rel: Relation, nu: f64, ls: f64, mu: f64) -> (f64, f64, f64) {
    let (s, c) = mu.sin_cos();
    match rel {
        Relation::OneD(Symmetry::Antisymmetric) => {
            // l mu cos mu + sin mu
            let g = ls * mu * c + s;
            let dg = ls * c - ls * mu * s + c;
            (g, dg, 1.0 + ls * mu)
        }
        Relation::OneD(Symmetry::Symmetric) => {
            // cos mu - l mu sin mu
            let g = c - ls * mu * s;
            let dg = -s - ls * s - ls * mu * c;
            (g, dg, 1.0 + ls * mu)
        }
        Relation::Lateral(Symmetry::Antisymmetric) => {
            let k = nu * (ls * nu + nu.tanh()) + ls * mu * mu;
            let g = c * k + mu * s;
            let dg = -s * k + c * 2.0 * ls * mu + s + mu * c;
            (g, dg, k + mu)
        }
        Relation::Lateral(Symmetry::Symmetric) => {
            let k = nu * (ls * nu + 1.0 / nu.tanh()) + ls * mu * mu;
            let g = s * k - mu * c;
            let dg = c * k + s * 2.0 * ls * mu - c + mu * s;
            (g, dg, k + mu)
        }
    }
}

/// Residual of the relation at `mu`, normalized by its natural magnitude.
pub fn dispersion_residual(rel: Relation, nu: f64, slip_length: f64, mu: f64) -> f64 {
    let (g, _, scale) = relation(rel, nu, slip_length, mu);
    g.abs() / scale
}

/// Bracket for root number `n` (1-based).
fn branch(rel: Relation, n: usize) -> (f64, f64) {
    let n = n as f64;
    match rel {
        Relation::OneD(Symmetry::Antisymmetric) | Relation::Lateral(Symmetry::Antisymmetric) => {
            ((n - 0.5) * PI, (n + 0.5) * PI)
        }
        Relation::OneD(Symmetry::Symmetric) => ((n - 1.0) * PI, n * PI),
        Relation::Lateral(Symmetry::Symmetric) => (n * PI, (n + 1.0) * PI),
    }
}

/// First `n_roots` positive roots in increasing order.
pub fn dispersion_roots(
    rel: Relation,
    nu: f64,
    slip_length: f64,
    n_roots: usize,
    opts: RootOptions,
) -> Result<Vec<f64>> {
    if !(slip_length >= 0.0) || !slip_length.is_finite() {
        return Err(Error::InvalidParameter(format!("slip length {slip_length}")));
    }
    if matches!(rel, Relation::Lateral(_)) && !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("lateral wavenumber {nu}")));
    }
    (1..=n_roots)
        .map(|n| {
            let (lo, hi) = branch(rel, n);
            solve_branch(rel, nu, slip_length, n, lo, hi, opts)
        })
        .collect()
}

fn solve_branch(
    rel: Relation,
    nu: f64,
    ls: f64,
    index: usize,
    lo: f64,
    hi: f64,
    opts: RootOptions,
) -> Result<f64> {
    let f = |mu: f64| relation(rel, nu, ls, mu).0;
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 && a > 0.0 {
        return Ok(a);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketFailure { index, lo, hi });
    }
    let mut sa = fa.signum();
    let mut iterations = 0;
    while b - a > opts.tolerance.max(4.0 * f64::EPSILON * b) {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(Error::NonConvergence(format!(
                "dispersion root {index} after {iterations} bisections"
            )));
        }
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            a = mid;
            b = mid;
            break;
        }
        if fm.signum() == sa {
            a = mid;
            sa = fm.signum();
        } else {
            b = mid;
        }
    }
    // Newton polish, kept only while it stays inside the final bracket.
    let mut mu = 0.5 * (a + b);
    for _ in 0..4 {
        let (g, dg, _) = relation(rel, nu, ls, mu);
        if dg == 0.0 {
            break;
        }
        let next = mu - g / dg;
        if !(next >= lo && next <= hi) || (next - mu).abs() > 2.0 * opts.tolerance.max(1e-12) {
            break;
        }
        if next == mu {
            break;
        }
        mu = next;
    }
    let residual = dispersion_residual(rel, nu, ls, mu);
    if residual > 1e-12 {
        return Err(Error::NonConvergence(format!(
            "dispersion root {index}: residual {residual:e}"
        )));
    }
    Ok(mu)
}
