//! Inner products, Gram checks and projections onto a basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::set::{NodeComponent, NodeTable};
use crate::basis::{BasisSet, Branch, Cell, Mode, ModeClass, PoiseuilleField, Symmetry};
use crate::error::{Error, Result};
use crate::lateral::period_integral;
use crate::profile::Parity;
use crate::quadrature::{integrate_adaptive, GaussLegendre};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub size: usize,
    pub max_off_diagonal: f64,
    pub max_diagonal_deviation: f64,
    pub worst_pair: Option<(usize, usize)>,
}

impl GramReport {
    pub fn max_deviation(&self) -> f64 {
        self.max_off_diagonal.max(self.max_diagonal_deviation)
    }
}

/// `int_cell a . b` between two modes, with its own adaptive z quadrature.
pub fn inner_product(a: &Mode, b: &Mode, cell: &Cell) -> f64 {
    let mut total = 0.0;
    for (ca, cb) in a.velocity.iter().zip(&b.velocity) {
        let (Some(ca), Some(cb)) = (ca, cb) else { continue };
        let lateral = ca.lateral_overlap(cb, cell);
        if lateral == 0.0 {
            continue;
        }
        if Parity::product(&[ca.z.parity(), cb.z.parity()]) == Some(Parity::Odd) {
            continue;
        }
        let start = crate::basis::mode::z_nodes_for(ca.z.bandwidth() + cb.z.bandwidth());
        let zi = integrate_adaptive(|z| ca.z.eval(z) * cb.z.eval(z), start, 1e-14, 1e-12);
        total += ca.coef * cb.coef * lateral * zi;
    }
    total
}

pub(crate) fn lateral_pair(a: &NodeComponent, b: &NodeComponent, cell: &Cell) -> f64 {
    a.coef
        * b.coef
        * period_integral(&[a.x, b.x], cell.half_length)
        * period_integral(&[a.y, b.y], cell.half_width)
}

/// Inner product of two tabulated modes on the basis rule.
pub(crate) fn table_inner(a: &NodeTable, b: &NodeTable, cell: &Cell, q: &GaussLegendre) -> f64 {
    let mut total = 0.0;
    for (ca, cb) in a.velocity.iter().zip(&b.velocity) {
        let (Some(ca), Some(cb)) = (ca, cb) else { continue };
        if Parity::product(&[ca.parity, cb.parity]) == Some(Parity::Odd) {
            continue;
        }
        let lateral = lateral_pair(ca, cb, cell);
        if lateral == 0.0 {
            continue;
        }
        let z: f64 = ca
            .value
            .iter()
            .zip(&cb.value)
            .zip(&q.weights)
            .map(|((x, y), w)| x * y * w)
            .sum();
        total += lateral * z;
    }
    total
}

/// Gram matrix of one lattice group (modes at distinct lattice points are
/// orthogonal exactly through the lateral integrals).
pub fn gram_block(basis: &BasisSet, indices: &[usize]) -> DMatrix<f64> {
    let n = indices.len();
    let mut g = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = table_inner(&basis.tables[indices[a]], &basis.tables[indices[b]], &basis.cell, &basis.quadrature);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    g
}

pub fn gram_report(basis: &BasisSet) -> GramReport {
    let mut r = GramReport { size: basis.len(), ..Default::default() };
    let mut worst = 0.0;
    for (_, idx) in basis.lattice_groups() {
        let g = gram_block(basis, &idx);
        for a in 0..idx.len() {
            for b in a..idx.len() {
                let v = g[(a, b)];
                let dev = if a == b { (v - 1.0).abs() } else { v.abs() };
                if a == b {
                    r.max_diagonal_deviation = r.max_diagonal_deviation.max(dev);
                } else {
                    r.max_off_diagonal = r.max_off_diagonal.max(dev);
                }
                if dev > worst {
                    worst = dev;
                    r.worst_pair = Some((idx[a], idx[b]));
                }
            }
        }
    }
    r
}

/// Cell-averaged streamwise flux of each mode, `(1/A) int u_x dV`.
pub fn flow_rate_weights(basis: &BasisSet) -> Vec<f64> {
    basis
        .modes
        .iter()
        .map(|m| {
            if m.class() != ModeClass::OneD || m.key.kappa != Branch::X || m.key.symmetry != Symmetry::Symmetric {
                return 0.0;
            }
            m.norm * 2.0 * m.mu.sin() / m.mu
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoiseuilleExpansion {
    /// Coefficients over the whole basis (zero off the symmetric streamwise 1D modes).
    pub coefficients: Vec<f64>,
    /// Relative L2 error of the truncated expansion.
    pub residual: f64,
    pub flow_rate: f64,
    pub exact_flow_rate: f64,
}

/// Expands the laminar profile over the symmetric streamwise 1D modes.
pub fn expand_poiseuille(basis: &BasisSet, field: &PoiseuilleField) -> Result<PoiseuilleExpansion> {
    if (field.slip_length - basis.cfg.slip_length).abs() > 0.0 {
        return Err(Error::InvalidParameter("base flow and basis disagree on slip length".into()));
    }
    let area = basis.cell.area();
    let mut c = vec![0.0; basis.len()];
    let mut captured = 0.0;
    for i in basis.streamwise_symmetric_1d() {
        let m = &basis.modes[i];
        c[i] = m.norm * area * field.cos_moment(m.mu);
        captured += c[i] * c[i];
    }
    let total = area * field.square_integral();
    let residual = ((total - captured).max(0.0) / total).sqrt();
    let q = flow_rate_weights(basis);
    let flow_rate = c.iter().zip(&q).map(|(a, b)| a * b).sum();
    Ok(PoiseuilleExpansion { coefficients: c, residual, flow_rate, exact_flow_rate: field.flow_rate() })
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    /// Relative L2 norm of the part of the field outside the span.
    pub residual: f64,
    pub used_mass_matrix: bool,
}

/// Projects a velocity field given as a function of position.
///
/// Lateral integrals use `lateral_points` uniform samples per direction,
/// which is exact for trigonometric content below that many lattice steps.
pub fn project_field<F>(field: F, basis: &BasisSet, lateral_points: (usize, usize)) -> Result<Projection>
where
    F: Fn(f64, f64, f64) -> [f64; 3],
{
    let (nx, ny) = lateral_points;
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter("lateral sample count must be positive".into()));
    }
    let cell = basis.cell;
    let q = &basis.quadrature;
    let dx = 2.0 * cell.half_length / nx as f64;
    let dy = 2.0 * cell.half_width / ny as f64;
    let mut b = vec![0.0; basis.len()];
    let mut norm_sq = 0.0;
    for ix in 0..nx {
        let x = -cell.half_length + ix as f64 * dx;
        for iy in 0..ny {
            let y = -cell.half_width + iy as f64 * dy;
            for (iz, (&z, &w)) in q.nodes.iter().zip(&q.weights).enumerate() {
                let f = field(x, y, z);
                let wt = w * dx * dy;
                norm_sq += wt * (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]);
                for (a, t) in basis.tables.iter().enumerate() {
                    let mut dot = 0.0;
                    for (i, c) in t.velocity.iter().enumerate() {
                        if let Some(c) = c {
                            dot += f[i] * c.coef * c.x.eval(x) * c.y.eval(y) * c.value[iz];
                        }
                    }
                    b[a] += wt * dot;
                }
            }
        }
    }
    let used_mass_matrix = basis.gram.max_deviation() > 1e-8;
    let coefficients = if used_mass_matrix {
        let mut c = vec![0.0; basis.len()];
        for (_, idx) in basis.lattice_groups() {
            let g = gram_block(basis, &idx);
            let rhs = DVector::from_iterator(idx.len(), idx.iter().map(|&i| b[i]));
            let sol = g
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::NonConvergence("singular Gram block".into()))?;
            for (k, &i) in idx.iter().enumerate() {
                c[i] = sol[k];
            }
        }
        c
    } else {
        b.clone()
    };
    let captured: f64 = coefficients.iter().zip(&b).map(|(c, b)| c * b).sum();
    let residual = if norm_sq > 0.0 { ((norm_sq - captured).max(0.0) / norm_sq).sqrt() } else { 0.0 };
    Ok(Projection { coefficients, residual, used_mass_matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, mode_eval, poiseuille, BasisSelection, FlowConfig};

    fn basis(ls: f64) -> BasisSet {
        let cfg = FlowConfig::new(2000.0, ls).unwrap();
        let cell = Cell::from_steps(1.02, 1.02).unwrap();
        build_basis(&cfg, &cell, &BasisSelection::rectangle(2, 1, 6, 4)).unwrap()
    }

    #[test]
    fn basis_is_orthonormal() {
        for ls in [0.0, 0.01] {
            let b = basis(ls);
            assert!(b.gram.max_deviation() < 1e-10, "{:?}", b.gram);
        }
    }

    #[test]
    fn table_and_adaptive_inner_products_agree() {
        let b = basis(0.02);
        for i in (0..b.len()).step_by(7) {
            for j in (0..b.len()).step_by(5) {
                let t = table_inner(&b.tables[i], &b.tables[j], &b.cell, &b.quadrature);
                let a = inner_product(&b.modes[i], &b.modes[j], &b.cell);
                assert!((t - a).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn projecting_a_mode_recovers_it() {
        let b = basis(0.0);
        let target = 17;
        let m = b.modes[target].clone();
        let p = project_field(|x, y, z| mode_eval(&m, x, y, z).unwrap(), &b, (8, 8)).unwrap();
        for (i, c) in p.coefficients.iter().enumerate() {
            let expect = if i == target { 1.0 } else { 0.0 };
            assert!((c - expect).abs() < 1e-10, "{i}: {c}");
        }
        assert!(p.residual < 1e-6);
    }

    #[test]
    fn poiseuille_expansion_agrees_with_projection() {
        let b = basis(0.01);
        let pf = poiseuille(&b.cfg);
        let e = expand_poiseuille(&b, &pf).unwrap();
        let p = project_field(|_, _, z| [pf.velocity(z), 0.0, 0.0], &b, (4, 4)).unwrap();
        for (a, c) in e.coefficients.iter().zip(&p.coefficients) {
            assert!((a - c).abs() < 1e-10);
        }
    }
}
