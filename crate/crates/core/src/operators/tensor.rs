use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, NodeComponent};
use crate::error::{Error, Result};
use crate::lateral::{period_integral, Trig};
use crate::profile::Parity;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TensorOptions {
    /// Keep only triads whose nonzero lattice indices are powers of two.
    pub power_of_two_lattice: bool,
}

/// Sparse quadratic coupling `N[a][b][g] = <u_g, (u_a . grad) u_b>`.
///
/// Each stored triad `(a, b, g, v)` has `b < g` and stands for both
/// `N[a][b][g] = v` and `N[a][g][b] = -v`; `N[a][b][b] = 0`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CouplingTensor {
    pub dim: usize,
    pub triads: Vec<(u32, u32, u32, f64)>,
}

impl CouplingTensor {
    pub fn empty(dim: usize) -> Self {
        CouplingTensor { dim, triads: Vec::new() }
    }

    /// Number of nonzero entries, counting both members of each skew pair.
    pub fn nnz(&self) -> usize {
        2 * self.triads.len()
    }

    /// `out[g] = sum N[a][b][g] c_a c_b`.
    pub fn contract(&self, c: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &(a, b, g, v) in &self.triads {
            let va = v * c[a as usize];
            out[g as usize] += va * c[b as usize];
            out[b as usize] -= va * c[g as usize];
        }
    }

    pub fn get(&self, a: usize, b: usize, g: usize) -> f64 {
        let (lo, hi, sign) = if b < g { (b, g, 1.0) } else { (g, b, -1.0) };
        self.triads
            .iter()
            .filter(|t| t.0 as usize == a && t.1 as usize == lo && t.2 as usize == hi)
            .map(|t| sign * t.3)
            .sum()
    }

    /// Coordinate list `(a, b, g, value)` with both members of each pair.
    pub fn coordinates(&self) -> Vec<(u32, u32, u32, f64)> {
        self.triads.iter().flat_map(|&(a, b, g, v)| [(a, b, g, v), (a, g, b, -v)]).collect()
    }
}

fn xy(f: [Trig; 3], g: [Trig; 3], basis: &BasisSet) -> f64 {
    let ix = period_integral(&f, basis.cell.half_length);
    if ix == 0.0 {
        return 0.0;
    }
    ix * period_integral(&g, basis.cell.half_width)
}

fn dot3(a: &[f64], b: &[f64], c: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..w.len() {
        s += w[k] * a[k] * b[k] * c[k];
    }
    s
}

/// One triad coefficient by quadrature.
pub fn coupling(basis: &BasisSet, a: usize, b: usize, g: usize) -> f64 {
    let w = &basis.quadrature.weights;
    let (ta, tb, tg) = (&basis.tables[a], &basis.tables[b], &basis.tables[g]);
    let mut total = 0.0;
    for i in 0..3 {
        let (Some(cg), Some(cb)) = (&tg.velocity[i], &tb.velocity[i]) else { continue };
        for j in 0..3 {
            let Some(ca) = &ta.velocity[j] else { continue };
            total += term(cg, ca, cb, j, basis, w);
        }
    }
    total
}

fn term(cg: &NodeComponent, ca: &NodeComponent, cb: &NodeComponent, j: usize, basis: &BasisSet, w: &[f64]) -> f64 {
    let (bx, by, bz_parity, bz) = match j {
        0 => (cb.x.derivative(), cb.y, cb.parity, &cb.value),
        1 => (cb.x, cb.y.derivative(), cb.parity, &cb.value),
        _ => (cb.x, cb.y, cb.parity.flip(), &cb.dz),
    };
    if Parity::product(&[cg.parity, ca.parity, bz_parity]) == Some(Parity::Odd) {
        return 0.0;
    }
    let lat = xy([cg.x, ca.x, bx], [cg.y, ca.y, by], basis);
    if lat == 0.0 {
        return 0.0;
    }
    cg.coef * ca.coef * cb.coef * lat * dot3(&cg.value, &ca.value, bz, w)
}

fn is_power_of_two_or_zero(i: u32) -> bool {
    i == 0 || i.is_power_of_two()
}

/// Assembles the tensor over the `active` modes.
///
/// Only `b < g` is integrated; `N[a][g][b] = -N[a][b][g]` follows from
/// incompressibility and impermeable walls, and `N[a][b][b] = 0`.
pub fn assemble_tensor(basis: &BasisSet, active: &[usize], opts: TensorOptions) -> Result<CouplingTensor> {
    let n = basis.len();
    if let Some(&bad) = active.iter().find(|&&i| i >= n) {
        return Err(Error::DimensionMismatch { expected: n, got: bad + 1 });
    }
    let mut groups: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for &i in active {
        let l = basis.modes[i].key.lattice();
        if opts.power_of_two_lattice && !(is_power_of_two_or_zero(l.0) && is_power_of_two_or_zero(l.1)) {
            continue;
        }
        groups.entry(l).or_default().push(i);
    }
    for v in groups.values_mut() {
        v.sort_unstable();
    }
    let members: Vec<usize> = {
        let mut m: Vec<usize> = groups.values().flatten().copied().collect();
        m.sort_unstable();
        m
    };

    let per_a: Vec<Vec<(u32, u32, u32, f64)>> = members
        .par_iter()
        .map(|&a| {
            let (ma, ka) = basis.modes[a].key.lattice();
            let mut out = Vec::new();
            for &b in &members {
                let (mb, kb) = basis.modes[b].key.lattice();
                let mut targets = Vec::with_capacity(4);
                for mg in [ma.abs_diff(mb), ma + mb] {
                    for kg in [ka.abs_diff(kb), ka + kb] {
                        if !targets.contains(&(mg, kg)) {
                            targets.push((mg, kg));
                        }
                    }
                }
                for t in targets {
                    let Some(list) = groups.get(&t) else { continue };
                    for &g in list.iter().filter(|&&g| g > b) {
                        let v = coupling(basis, a, b, g);
                        if v != 0.0 {
                            out.push((a as u32, b as u32, g as u32, v));
                        }
                    }
                }
            }
            out
        })
        .collect();

    Ok(CouplingTensor { dim: n, triads: per_a.into_iter().flatten().collect() })
}
