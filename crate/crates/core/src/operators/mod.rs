//! Galerkin-projected linear and quadratic operators.

pub mod checks;
mod linear;
mod tensor;

pub use checks::{pressure_projection_check, viscous_check, CheckReport};
pub use linear::{assemble_linear, BaseFlow, LinearBlock, LinearOperator};
pub use tensor::{assemble_tensor, coupling, CouplingTensor, TensorOptions};

use crate::error::{Error, Result};

/// Right-hand side `dc/dt = L c - N[c]`.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub linear: LinearOperator,
    pub tensor: CouplingTensor,
}

impl Dynamics {
    pub fn new(linear: LinearOperator, tensor: CouplingTensor) -> Result<Self> {
        if linear.dim != tensor.dim {
            return Err(Error::DimensionMismatch { expected: linear.dim, got: tensor.dim });
        }
        Ok(Dynamics { linear, tensor })
    }

    pub fn dim(&self) -> usize {
        self.linear.dim
    }

    /// `out = L c - N[c]`; `scratch` must have the same length.
    pub fn rhs(&self, c: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.linear.apply(c, out);
        self.tensor.contract(c, scratch);
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o -= s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, mode_gradient, mode_eval, poiseuille, BasisSelection, BasisSet, Cell, FlowConfig};
    use crate::projection::expand_poiseuille;
    use crate::quadrature::GaussLegendre;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn basis() -> &'static BasisSet {
        static B: OnceLock<BasisSet> = OnceLock::new();
        B.get_or_init(|| {
            let cfg = FlowConfig::new(4000.0, 0.01).unwrap();
            let cell = Cell::from_steps(1.0, 1.5).unwrap();
            build_basis(&cfg, &cell, &BasisSelection::rectangle(2, 1, 5, 3)).unwrap()
        })
    }

    fn tensor() -> &'static CouplingTensor {
        static T: OnceLock<CouplingTensor> = OnceLock::new();
        T.get_or_init(|| {
            let b = basis();
            let all: Vec<usize> = (0..b.len()).collect();
            assemble_tensor(b, &all, TensorOptions::default()).unwrap()
        })
    }

    /// Brute-force `<u_g, (u_a . grad) u_b>` on a tensor grid.
    fn oracle(b: &BasisSet, a: usize, bi: usize, g: usize) -> f64 {
        let (nx, ny) = (24, 24);
        let gl = GaussLegendre::new(48);
        let (lx, ly) = (b.cell.half_length, b.cell.half_width);
        let mut s = 0.0;
        for i in 0..nx {
            let x = -lx + 2.0 * lx * i as f64 / nx as f64;
            for j in 0..ny {
                let y = -ly + 2.0 * ly * j as f64 / ny as f64;
                s += gl.integrate(|z| {
                    let ua = mode_eval(&b.modes[a], x, y, z).unwrap();
                    let gb = mode_gradient(&b.modes[bi], x, y, z).unwrap();
                    let ug = mode_eval(&b.modes[g], x, y, z).unwrap();
                    (0..3).map(|r| ug[r] * (0..3).map(|c| ua[c] * gb[r][c]).sum::<f64>()).sum::<f64>()
                });
            }
        }
        s * (2.0 * lx / nx as f64) * (2.0 * ly / ny as f64)
    }

    #[test]
    fn tensor_matches_grid_oracle() {
        let b = basis();
        let t = tensor();
        let mut checked = 0;
        for &(a, bi, g, v) in t.coordinates().iter().step_by(97) {
            let o = oracle(b, a as usize, bi as usize, g as usize);
            assert!((o - v).abs() < 1e-10 * (1.0 + v.abs()), "({a},{bi},{g}) {v} vs {o}");
            checked += 1;
        }
        assert!(checked > 20);
        // a triad violating the lateral selection rule vanishes
        let far = b.modes.iter().position(|m| m.key.lattice() == (2, 1)).unwrap();
        let one = b.modes.iter().position(|m| m.key.lattice() == (0, 0)).unwrap();
        assert_eq!(t.get(far, one, one), 0.0);
    }

    #[test]
    fn tensor_is_skew_in_last_pair() {
        let b = basis();
        for a in (0..b.len()).step_by(5) {
            for bi in (0..b.len()).step_by(3) {
                for g in (0..b.len()).step_by(4) {
                    let s = coupling(b, a, bi, g) + coupling(b, a, g, bi);
                    assert!(s.abs() < 1e-12, "({a},{bi},{g}) {s:e}");
                }
            }
        }
    }

    #[test]
    fn operator_checks_pass() {
        let b = basis();
        assert!(viscous_check(b).max_abs < 1e-10);
        let base = BaseFlow::Exact(poiseuille(&b.cfg));
        let sources: Vec<usize> = (0..b.len()).step_by(3).collect();
        let r = pressure_projection_check(b, &base, &sources).unwrap();
        assert!(r.max_abs < 1e-8, "{r:?}");
    }

    #[test]
    fn linear_operator_structure() {
        let b = basis();
        let l = assemble_linear(b, &BaseFlow::Exact(poiseuille(&b.cfg))).unwrap();
        let dense = l.dense();
        let c: Vec<f64> = (0..b.len()).map(|i| (0.37 * i as f64).cos()).collect();
        let mut out = vec![0.0; b.len()];
        l.apply(&c, &mut out);
        let direct = &dense * nalgebra::DVector::from_vec(c.clone());
        for i in 0..b.len() {
            assert!((out[i] - direct[i]).abs() < 1e-12);
        }
        for blk in &l.blocks {
            if blk.lattice == (0, 0) {
                let m = blk.matrix(b.cfg.reynolds);
                for (r, &i) in blk.indices.iter().enumerate() {
                    for s in 0..blk.size() {
                        let want = if r == s { -b.modes[i].lambda } else { 0.0 };
                        assert_eq!(m[(r, s)], want);
                    }
                }
            }
        }
        let l2 = l.with_reynolds(8000.0);
        assert!((l2.dense()[(0, 0)] - (dense[(0, 0)] + b.modes[0].lambda) + b.modes[0].lambda_at(8000.0)).abs() < 1e-14);
    }

    #[test]
    fn projected_base_matches_exact_at_high_resolution() {
        let cfg = FlowConfig::new(3000.0, 0.0).unwrap();
        let cell = Cell::from_steps(1.0, 1.0).unwrap();
        let b = build_basis(&cfg, &cell, &BasisSelection::rectangle(1, 0, 60, 3)).unwrap();
        let e = expand_poiseuille(&b, &poiseuille(&cfg)).unwrap();
        let exact = assemble_linear(&b, &BaseFlow::Exact(poiseuille(&cfg))).unwrap().dense();
        let proj = assemble_linear(&b, &BaseFlow::Projected(e.coefficients)).unwrap().dense();
        assert!((exact - proj).abs().max() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn nonlinear_term_conserves_energy(seed in any::<u64>(), scale in 0.01f64..10.0) {
            let t = tensor();
            let n = t.dim;
            let mut x = seed | 1;
            let c: Vec<f64> = (0..n).map(|_| {
                x ^= x << 13; x ^= x >> 7; x ^= x << 17;
                scale * ((x >> 11) as f64 / (1u64 << 53) as f64 - 0.5)
            }).collect();
            let mut out = vec![0.0; n];
            t.contract(&c, &mut out);
            let e: f64 = c.iter().zip(&out).map(|(a, b)| a * b).sum();
            let mag: f64 = c.iter().zip(&out).map(|(a, b)| (a * b).abs()).sum();
            prop_assert!(e.abs() <= 1e-13 * mag.max(1.0));
        }
    }
}
