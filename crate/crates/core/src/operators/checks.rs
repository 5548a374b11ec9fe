//! Numerical consistency checks of the projected operators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linear::BaseFlow;
use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::lateral::period_integral;
use crate::profile::Parity;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub max_abs: f64,
    pub worst: Option<(usize, usize)>,
}

impl CheckReport {
    fn update(&mut self, v: f64, pair: (usize, usize)) {
        if v.abs() > self.max_abs {
            self.max_abs = v.abs();
            self.worst = Some(pair);
        }
    }
}

/// Chebyshev-Gauss-Lobatto points and differentiation matrix on [-1, 1].
fn chebyshev(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=n).map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
    let c = |j: usize| if j == 0 || j == n { 2.0 } else { 1.0 };
    let sgn = |j: usize| if j % 2 == 0 { 1.0 } else { -1.0 };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) * sgn(i + j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// Barycentric interpolation from Chebyshev-Lobatto points.
fn cheb_interp(x: &[f64], v: &[f64], t: f64) -> f64 {
    let n = x.len() - 1;
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..=n {
        let d = t - x[j];
        if d == 0.0 {
            return v[j];
        }
        let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == n {
            w *= 0.5;
        }
        num += w / d * v[j];
        den += w / d;
    }
    num / den
}

/// Solves `P'' - nu^2 P = s(z)` with `P'(-1) = P'(1) = 0`; returns `P` and
/// `P'` on `targets`.
pub fn solve_neumann(nu: f64, source: impl Fn(f64) -> f64, points: usize, targets: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(nu > 0.0) {
        return Err(Error::InvalidParameter("Neumann problem needs nu > 0".into()));
    }
    let n = points.max(16);
    let (x, d) = chebyshev(n);
    let mut a = &d * &d;
    for i in 0..=n {
        a[(i, i)] -= nu * nu;
    }
    let mut rhs = DVector::from_iterator(n + 1, x.iter().map(|&z| source(z)));
    for row in [0, n] {
        for j in 0..=n {
            a[(row, j)] = d[(row, j)];
        }
        rhs[row] = 0.0;
    }
    let p = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonConvergence("singular pressure system".into()))?;
    let dp = &d * &p;
    let pv: Vec<f64> = p.iter().copied().collect();
    let dv: Vec<f64> = dp.iter().copied().collect();
    Ok((
        targets.iter().map(|&t| cheb_interp(&x, &pv, t)).collect(),
        targets.iter().map(|&t| cheb_interp(&x, &dv, t)).collect(),
    ))
}

/// Largest `|<u_g, grad p_a>|` where `p_a` is the pressure that removes the
/// divergence of the linear advective forcing of mode `a`.
pub fn pressure_projection_check(basis: &BasisSet, base: &BaseFlow, sources: &[usize]) -> Result<CheckReport> {
    let shear = shear_fn(base, basis)?;
    let q = &basis.quadrature;
    let mut report = CheckReport::default();
    for &a in sources {
        let mode = &basis.modes[a];
        let Some(uz) = mode.velocity[2] else { continue };
        let points = (2.0 * mode.mu.max(mode.nu)) as usize + 48;
        let (p, dp) = solve_neumann(mode.nu, |z| -2.0 * shear(z) * uz.z.eval(z), points, &q.nodes)?;
        // p = coef P(z) X'(x) Y(y)
        let px = uz.x.derivative();
        let py = uz.y;
        let grad = [
            (px.derivative(), py, &p),
            (px, py.derivative(), &p),
            (px, py, &dp),
        ];
        for (g, tg) in basis.tables.iter().enumerate() {
            let mut s = 0.0;
            for (i, (gx, gy, prof)) in grad.iter().enumerate() {
                let Some(cg) = &tg.velocity[i] else { continue };
                let lat = period_integral(&[cg.x, *gx], basis.cell.half_length)
                    * period_integral(&[cg.y, *gy], basis.cell.half_width);
                if lat == 0.0 {
                    continue;
                }
                let z: f64 = (0..q.len()).map(|k| q.weights[k] * cg.value[k] * prof[k]).sum();
                s += cg.coef * uz.coef * lat * z;
            }
            report.update(s, (g, a));
        }
    }
    Ok(report)
}

fn shear_fn(base: &BaseFlow, basis: &BasisSet) -> Result<Box<dyn Fn(f64) -> f64>> {
    match base {
        BaseFlow::Exact(p) => {
            let p = *p;
            Ok(Box::new(move |z| p.shear(z)))
        }
        BaseFlow::Projected(c) => {
            let terms: Vec<(f64, crate::profile::ZProfile)> = c
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .filter_map(|(i, &v)| basis.modes[i].velocity[0].map(|comp| (v * comp.coef, comp.z.derivative())))
                .collect();
            Ok(Box::new(move |z| terms.iter().map(|(s, p)| s * p.eval(z)).sum()))
        }
    }
}

/// Largest deviation of `(1/Re)<u_g, lap u_a> - <u_g, grad p_a>` from
/// `-lambda_a delta_ga` over every pair sharing a lattice point.
pub fn viscous_check(basis: &BasisSet) -> CheckReport {
    let q = &basis.quadrature;
    let re = basis.cfg.reynolds;
    let cell = &basis.cell;
    let mut report = CheckReport::default();
    for (_, idx) in basis.lattice_groups() {
        for &g in &idx {
            for &a in &idx {
                let (tg, ta) = (&basis.tables[g], &basis.tables[a]);
                let ma = &basis.modes[a];
                let lateral_sq = ma.m * ma.m + ma.k * ma.k;
                let mut v = 0.0;
                for i in 0..3 {
                    let (Some(cg), Some(ca)) = (&tg.velocity[i], &ta.velocity[i]) else { continue };
                    if Parity::product(&[cg.parity, ca.parity]) == Some(Parity::Odd) {
                        continue;
                    }
                    let lat = period_integral(&[cg.x, ca.x], cell.half_length)
                        * period_integral(&[cg.y, ca.y], cell.half_width);
                    if lat == 0.0 {
                        continue;
                    }
                    let z: f64 = (0..q.len())
                        .map(|k| q.weights[k] * cg.value[k] * (ca.d2z[k] - lateral_sq * ca.value[k]))
                        .sum();
                    v += cg.coef * ca.coef * lat * z / re;
                }
                if let Some(p) = &ta.pressure {
                    let grad = [
                        (p.x.derivative(), p.y, &p.value),
                        (p.x, p.y.derivative(), &p.value),
                        (p.x, p.y, &p.dz),
                    ];
                    for (i, (gx, gy, prof)) in grad.iter().enumerate() {
                        let Some(cg) = &tg.velocity[i] else { continue };
                        let lat = period_integral(&[cg.x, *gx], cell.half_length)
                            * period_integral(&[cg.y, *gy], cell.half_width);
                        if lat == 0.0 {
                            continue;
                        }
                        let z: f64 = (0..q.len()).map(|k| q.weights[k] * cg.value[k] * prof[k]).sum();
                        v -= cg.coef * p.coef * lat * z;
                    }
                }
                if g == a {
                    v += ma.lambda;
                }
                report.update(v, (g, a));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Second-order finite differences on a uniform grid.
    fn fd_neumann(nu: f64, s: impl Fn(f64) -> f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let h = 2.0 / n as f64;
        let z: Vec<f64> = (0..=n).map(|i| -1.0 + i as f64 * h).collect();
        let mut a = DMatrix::zeros(n + 1, n + 1);
        let mut b = DVector::zeros(n + 1);
        for i in 0..=n {
            b[i] = s(z[i]);
            a[(i, i)] = -2.0 / (h * h) - nu * nu;
            // ghost points mirror the interior for zero slope
            let left = if i == 0 { 1 } else { i - 1 };
            let right = if i == n { n - 1 } else { i + 1 };
            a[(i, left)] += 1.0 / (h * h);
            a[(i, right)] += 1.0 / (h * h);
        }
        let p = a.lu().solve(&b).unwrap();
        (z, p.iter().copied().collect())
    }

    #[test]
    fn spectral_pressure_solve_matches_finite_differences() {
        let nu = 1.3;
        let s = |z: f64| 4.0 * z * (3.0 * z).cos();
        let (z, fd) = fd_neumann(nu, s, 1000);
        let (p, _) = solve_neumann(nu, s, 64, &z).unwrap();
        for (a, b) in p.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-5, "{a} {b}");
        }
    }
}
