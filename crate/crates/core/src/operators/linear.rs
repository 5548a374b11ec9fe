use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, PoiseuilleField};
use crate::error::{Error, Result};
use crate::lateral::period_integral;
use crate::profile::Parity;
use crate::basis::NodeComponent;

/// Base flow seen by the perturbation.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseFlow {
    /// The analytic laminar profile.
    Exact(PoiseuilleField),
    /// The laminar profile truncated to the basis (coefficients over all modes).
    Projected(Vec<f64>),
}

impl BaseFlow {
    /// `(U, dU/dz)` on the basis quadrature nodes.
    pub fn tabulate(&self, basis: &BasisSet) -> Result<(Vec<f64>, Vec<f64>)> {
        let nodes = &basis.quadrature.nodes;
        match self {
            BaseFlow::Exact(p) => Ok((
                nodes.iter().map(|&z| p.velocity(z)).collect(),
                nodes.iter().map(|&z| p.shear(z)).collect(),
            )),
            BaseFlow::Projected(c) => {
                if c.len() != basis.len() {
                    return Err(Error::DimensionMismatch { expected: basis.len(), got: c.len() });
                }
                let mut u = vec![0.0; nodes.len()];
                let mut du = vec![0.0; nodes.len()];
                for (i, &ci) in c.iter().enumerate() {
                    if ci == 0.0 {
                        continue;
                    }
                    let Some(comp) = &basis.tables[i].velocity[0] else { continue };
                    if comp.x.index != 0 || comp.y.index != 0 {
                        return Err(Error::InvalidParameter("projected base flow must be laterally uniform".into()));
                    }
                    let s = ci * comp.coef * comp.x.coef * comp.y.coef;
                    for k in 0..nodes.len() {
                        u[k] += s * comp.value[k];
                        du[k] += s * comp.dz[k];
                    }
                }
                Ok((u, du))
            }
        }
    }
}

/// Dense operator restricted to one lateral lattice point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearBlock {
    pub lattice: (u32, u32),
    pub indices: Vec<usize>,
    /// Row-major advective part (Reynolds-independent).
    pub advective: Vec<f64>,
    /// `mu^2 + nu^2` of each member.
    pub wavenumber_sq: Vec<f64>,
}

impl LinearBlock {
    pub fn size(&self) -> usize {
        self.indices.len()
    }

    pub fn matrix(&self, reynolds: f64) -> DMatrix<f64> {
        let n = self.size();
        let mut a = DMatrix::from_row_slice(n, n, &self.advective);
        for i in 0..n {
            a[(i, i)] -= self.wavenumber_sq[i] / reynolds;
        }
        a
    }
}

/// Block-diagonal linearized operator `L = A - Lambda`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearOperator {
    pub dim: usize,
    pub reynolds: f64,
    pub blocks: Vec<LinearBlock>,
}

impl LinearOperator {
    /// `out = L c`.
    pub fn apply(&self, c: &[f64], out: &mut [f64]) {
        for b in &self.blocks {
            let n = b.size();
            for (r, &gi) in b.indices.iter().enumerate() {
                let row = &b.advective[r * n..(r + 1) * n];
                let mut s = -b.wavenumber_sq[r] / self.reynolds * c[gi];
                for (a, &gj) in row.iter().zip(&b.indices) {
                    s += a * c[gj];
                }
                out[gi] = s;
            }
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for b in &self.blocks {
            let mb = b.matrix(self.reynolds);
            for (r, &gi) in b.indices.iter().enumerate() {
                for (s, &gj) in b.indices.iter().enumerate() {
                    m[(gi, gj)] = mb[(r, s)];
                }
            }
        }
        m
    }

    pub fn with_reynolds(&self, reynolds: f64) -> Self {
        LinearOperator { reynolds, ..self.clone() }
    }
}

fn weighted3(a: &[f64], b: &[f64], c: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..w.len() {
        s += w[k] * a[k] * b[k] * c[k];
    }
    s
}

fn lateral2(a: &NodeComponent, b_x: crate::lateral::Trig, b_y: crate::lateral::Trig, basis: &BasisSet) -> f64 {
    period_integral(&[a.x, b_x], basis.cell.half_length) * period_integral(&[a.y, b_y], basis.cell.half_width)
}

/// `-<u_g, U d_x u_a> - <u_g, (u_a)_z U' e_x>`.
fn advective_entry(basis: &BasisSet, u: &[f64], du: &[f64], g: usize, a: usize) -> f64 {
    let w = &basis.quadrature.weights;
    let tg = &basis.tables[g];
    let ta = &basis.tables[a];
    let mut total = 0.0;
    for i in 0..3 {
        let (Some(cg), Some(ca)) = (&tg.velocity[i], &ta.velocity[i]) else { continue };
        if Parity::product(&[cg.parity, ca.parity]) == Some(Parity::Odd) {
            continue;
        }
        let dx = ca.x.derivative();
        let lat = lateral2(cg, dx, ca.y, basis);
        if lat == 0.0 {
            continue;
        }
        total -= cg.coef * ca.coef * lat * weighted3(u, &cg.value, &ca.value, w);
    }
    if let (Some(cg), Some(ca)) = (&tg.velocity[0], &ta.velocity[2]) {
        if Parity::product(&[cg.parity, ca.parity, Parity::Odd]) != Some(Parity::Odd) {
            let lat = lateral2(cg, ca.x, ca.y, basis);
            if lat != 0.0 {
                total -= cg.coef * ca.coef * lat * weighted3(du, &cg.value, &ca.value, w);
            }
        }
    }
    total
}

/// Projects the linearized Navier-Stokes operator about `base` onto the basis.
pub fn assemble_linear(basis: &BasisSet, base: &BaseFlow) -> Result<LinearOperator> {
    let (u, du) = base.tabulate(basis)?;
    let blocks = basis
        .lattice_groups()
        .into_iter()
        .map(|(lattice, indices)| {
            let n = indices.len();
            let mut advective = vec![0.0; n * n];
            if lattice != (0, 0) {
                for (r, &g) in indices.iter().enumerate() {
                    for (s, &a) in indices.iter().enumerate() {
                        advective[r * n + s] = advective_entry(basis, &u, &du, g, a);
                    }
                }
            }
            let wavenumber_sq = indices.iter().map(|&i| basis.modes[i].wavenumber_sq).collect();
            LinearBlock { lattice, indices, advective, wavenumber_sq }
        })
        .collect();
    Ok(LinearOperator { dim: basis.len(), reynolds: basis.cfg.reynolds, blocks })
}
