//! Flow observables: flow rate, energy budget, counter-flow profile, wall
//! forces and field export.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::basis::{BasisSet, PoiseuilleField};
use crate::error::{Error, Result};
use crate::projection::flow_rate_weights;

fn check_len(basis: &BasisSet, c: &[f64]) -> Result<()> {
    if c.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), got: c.len() });
    }
    Ok(())
}

/// `Q = Q^P + sum c_a q_a` for a perturbation `c` about the laminar flow.
pub fn net_flow_rate(basis: &BasisSet, base: &PoiseuilleField, c: &[f64]) -> Result<f64> {
    check_len(basis, c)?;
    let q = flow_rate_weights(basis);
    Ok(base.flow_rate() + c.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>())
}

pub fn kinetic_energy(w: &[f64]) -> f64 {
    0.5 * w.iter().map(|x| x * x).sum::<f64>()
}

/// Work done by the mean pressure gradient on the total coefficients `w`.
pub fn power_input(basis: &BasisSet, base: &PoiseuilleField, w: &[f64]) -> Result<f64> {
    check_len(basis, w)?;
    let q = flow_rate_weights(basis);
    let flux: f64 = w.iter().zip(&q).map(|(a, b)| a * b).sum();
    Ok(-base.pressure_gradient() * basis.cell.area() * flux)
}

/// `sum lambda_a w_a^2`.
pub fn dissipation(basis: &BasisSet, w: &[f64]) -> Result<f64> {
    check_len(basis, w)?;
    Ok(basis.modes.iter().zip(w).map(|(m, x)| m.lambda * x * x).sum())
}

/// Fraction of perturbation energy held by each family.
pub fn family_shares(basis: &BasisSet, c: &[f64]) -> Result<BTreeMap<String, f64>> {
    check_len(basis, c)?;
    let total: f64 = c.iter().map(|x| x * x).sum();
    let mut out = BTreeMap::new();
    for (m, x) in basis.modes.iter().zip(c) {
        *out.entry(m.key.family_label()).or_insert(0.0) += x * x;
    }
    if total > 0.0 {
        for v in out.values_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterFlowProfile {
    pub z: Vec<f64>,
    pub velocity: Vec<f64>,
    pub slope_bottom: f64,
    pub slope_top: f64,
    /// `(mu, amplitude)` of each `amplitude * cos(mu z)` term.
    pub components: Vec<(f64, f64)>,
}

/// Laterally uniform streamwise velocity carried by the symmetric 1D modes.
pub fn counter_flow_profile(basis: &BasisSet, c: &[f64], z: &[f64]) -> Result<CounterFlowProfile> {
    check_len(basis, c)?;
    if let Some(&bad) = z.iter().find(|z| z.abs() > 1.0 + 1e-12) {
        return Err(Error::OutOfDomain(bad));
    }
    let comps: Vec<(f64, f64)> = basis
        .streamwise_symmetric_1d()
        .into_iter()
        .map(|i| (basis.modes[i].mu, c[i] * basis.modes[i].norm))
        .collect();
    let v = |t: f64| comps.iter().map(|(mu, a)| a * (mu * t).cos()).sum::<f64>();
    let dv = |t: f64| comps.iter().map(|(mu, a)| -a * mu * (mu * t).sin()).sum::<f64>();
    Ok(CounterFlowProfile {
        z: z.to_vec(),
        velocity: z.iter().map(|&t| v(t)).collect(),
        slope_bottom: dv(-1.0),
        slope_top: dv(1.0),
        components: comps,
    })
}

/// Reference force `V (2/Re)` that balances the laminar wall shear.
pub fn reference_force(basis: &BasisSet) -> f64 {
    basis.cell.volume() * 2.0 / basis.cfg.reynolds
}

/// Net streamwise wall force of the perturbation, `(A/Re)(v'(1) - v'(-1))`.
pub fn boundary_force(basis: &BasisSet, c: &[f64]) -> Result<f64> {
    check_len(basis, c)?;
    let mut s = 0.0;
    for i in basis.streamwise_symmetric_1d() {
        let m = &basis.modes[i];
        s += c[i] * m.norm * (-2.0 * m.mu * m.mu.sin());
    }
    Ok(basis.cell.area() * s / basis.cfg.reynolds)
}

/// Rate of change of streamwise momentum for a coefficient rate `dc`.
pub fn inertial_force(basis: &BasisSet, dc: &[f64]) -> Result<f64> {
    check_len(basis, dc)?;
    let q = flow_rate_weights(basis);
    Ok(basis.cell.area() * dc.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerSample {
    pub t: f64,
    pub energy: f64,
    pub d_energy_dt: f64,
    pub power: f64,
    pub dissipation: f64,
    pub residual: f64,
}

/// Energy budget from a sampled series: `dE/dt` by centered differences in
/// the interior and one-sided differences at the ends.
pub fn energy_ledger(t: &[f64], energy: &[f64], power: &[f64], dissipation: &[f64]) -> Result<Vec<LedgerSample>> {
    let n = t.len();
    for len in [energy.len(), power.len(), dissipation.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    if n < 2 {
        return Err(Error::InvalidParameter("energy ledger needs at least two samples".into()));
    }
    Ok((0..n)
        .map(|i| {
            let (a, b) = if i == 0 { (0, 1) } else if i == n - 1 { (n - 2, n - 1) } else { (i - 1, i + 1) };
            let d = (energy[b] - energy[a]) / (t[b] - t[a]);
            LedgerSample {
                t: t[i],
                energy: energy[i],
                d_energy_dt: d,
                power: power[i],
                dissipation: dissipation[i],
                residual: d - (power[i] - dissipation[i]),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub velocity: [f64; 3],
    pub vorticity: [f64; 3],
}

/// Total velocity (laminar plus perturbation) and vorticity on a grid.
pub fn field_export(
    basis: &BasisSet,
    base: &PoiseuilleField,
    c: &[f64],
    xs: &[f64],
    ys: &[f64],
    zs: &[f64],
) -> Result<Vec<GridPoint>> {
    check_len(basis, c)?;
    let mut out = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for &z in zs {
        if z.abs() > 1.0 + 1e-12 {
            return Err(Error::OutOfDomain(z));
        }
        for &y in ys {
            for &x in xs {
                let (u, g) = point_state(basis, c, x, y, z);
                let u = [u[0] + base.velocity(z), u[1], u[2]];
                let shear = base.shear(z);
                let vorticity = [g[2][1] - g[1][2], g[0][2] + shear - g[2][0], g[1][0] - g[0][1]];
                out.push(GridPoint { x, y, z, velocity: u, vorticity });
            }
        }
    }
    Ok(out)
}

/// Perturbation velocity and gradient at a point.
pub fn point_state(basis: &BasisSet, c: &[f64], x: f64, y: f64, z: f64) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut u = [0.0; 3];
    let mut g = [[0.0; 3]; 3];
    for (m, &a) in basis.modes.iter().zip(c) {
        if a == 0.0 {
            continue;
        }
        for (i, comp) in m.velocity.iter().enumerate() {
            let Some(comp) = comp else { continue };
            let (xv, yv, zv) = (comp.x.eval(x), comp.y.eval(y), comp.z.eval(z));
            let s = a * comp.coef;
            u[i] += s * xv * yv * zv;
            g[i][0] += s * comp.x.derivative().eval(x) * yv * zv;
            g[i][1] += s * xv * comp.y.derivative().eval(y) * zv;
            g[i][2] += s * xv * yv * comp.z.derivative().eval(z);
        }
    }
    (u, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, mode_eval, poiseuille, BasisSelection, Cell, FlowConfig, ModeClass};
    use crate::quadrature::GaussLegendre;

    fn setup() -> (BasisSet, PoiseuilleField) {
        let cfg = FlowConfig::new(2000.0, 0.0).unwrap();
        let cell = Cell::from_steps(1.0, 1.0).unwrap();
        let basis = build_basis(&cfg, &cell, &BasisSelection::rectangle(1, 1, 6, 2)).unwrap();
        let base = poiseuille(&cfg);
        (basis, base)
    }

    #[test]
    fn laminar_flow_rate() {
        let (basis, base) = setup();
        let q = net_flow_rate(&basis, &base, &vec![0.0; basis.len()]).unwrap();
        assert!((q - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn only_streamwise_symmetric_modes_carry_flow() {
        let (basis, base) = setup();
        let sym = basis.streamwise_symmetric_1d();
        let mut c = vec![0.0; basis.len()];
        for (i, x) in c.iter_mut().enumerate() {
            if !sym.contains(&i) {
                *x = 0.3 + 0.01 * i as f64;
            }
        }
        assert_eq!(net_flow_rate(&basis, &base, &c).unwrap(), base.flow_rate());
    }

    #[test]
    fn flow_rate_matches_quadrature() {
        let (basis, base) = setup();
        let i = basis.streamwise_symmetric_1d()[0];
        let m = &basis.modes[i];
        assert!((m.mu - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
        let gl = GaussLegendre::new(40);
        let q = gl.integrate(|z| mode_eval(m, 0.3, -0.2, z).unwrap()[0]);
        let mut c = vec![0.0; basis.len()];
        c[i] = 0.25;
        let dq = net_flow_rate(&basis, &base, &c).unwrap() - base.flow_rate();
        assert!((dq - 0.25 * q).abs() < 1e-13);
    }

    #[test]
    fn counter_flow_fixture() {
        let (basis, _) = setup();
        let amps = [-0.158, 0.01, 0.0075, -0.0074];
        let mut c = vec![0.0; basis.len()];
        for (k, &i) in basis.streamwise_symmetric_1d().iter().take(4).enumerate() {
            c[i] = amps[k] / basis.modes[i].norm;
        }
        let z: Vec<f64> = (0..=40).map(|i| -1.0 + i as f64 / 20.0).collect();
        let p = counter_flow_profile(&basis, &c, &z).unwrap();
        let mus = [1.571, 4.712, 7.854, 10.996];
        for (j, &t) in z.iter().enumerate() {
            let exact: f64 = (0..4).map(|n| amps[n] * ((n as f64 + 0.5) * std::f64::consts::PI * t).cos()).sum();
            assert!((p.velocity[j] - exact).abs() < 1e-12);
            let rounded: f64 = (0..4).map(|n| amps[n] * (mus[n] * t).cos()).sum();
            assert!((p.velocity[j] - rounded).abs() < 1e-3);
        }
        let h = 1e-4;
        let v = |t: f64| counter_flow_profile(&basis, &c, &[t]).unwrap().velocity[0];
        let fd_top = (3.0 * v(1.0) - 4.0 * v(1.0 - h) + v(1.0 - 2.0 * h)) / (2.0 * h);
        let fd_top4 = (25.0 * v(1.0) - 48.0 * v(1.0 - h) + 36.0 * v(1.0 - 2.0 * h) - 16.0 * v(1.0 - 3.0 * h) + 3.0 * v(1.0 - 4.0 * h)) / (12.0 * h);
        assert!((fd_top - p.slope_top).abs() < 1e-6);
        assert!((fd_top4 - p.slope_top).abs() < 1e-8);
        let fd_bot4 = -(25.0 * v(-1.0) - 48.0 * v(-1.0 + h) + 36.0 * v(-1.0 + 2.0 * h) - 16.0 * v(-1.0 + 3.0 * h) + 3.0 * v(-1.0 + 4.0 * h)) / (12.0 * h);
        assert!((fd_bot4 - p.slope_bottom).abs() < 1e-8);
        assert!(counter_flow_profile(&basis, &c, &[1.5]).is_err());
    }

    #[test]
    fn zero_state_observables() {
        let (basis, base) = setup();
        let zero = vec![0.0; basis.len()];
        let p = counter_flow_profile(&basis, &zero, &[-1.0, 0.0, 0.5]).unwrap();
        assert!(p.velocity.iter().all(|v| *v == 0.0));
        assert_eq!(boundary_force(&basis, &zero).unwrap(), 0.0);
        assert_eq!(inertial_force(&basis, &zero).unwrap(), 0.0);
        let g = field_export(&basis, &base, &zero, &[0.0, 1.0], &[0.2], &[-0.5, 0.0, 1.0]).unwrap();
        for pt in g {
            assert_eq!(pt.velocity, [1.0 - pt.z * pt.z, 0.0, 0.0]);
            assert!((pt.vorticity[1] + 2.0 * pt.z).abs() < 1e-15);
        }
    }

    #[test]
    fn single_mode_export_matches_mode() {
        let (basis, base) = setup();
        let i = basis.modes.iter().position(|m| m.key.class() == ModeClass::ThreeD).unwrap();
        let mut c = vec![0.0; basis.len()];
        c[i] = 1.0;
        let g = field_export(&basis, &base, &c, &[0.1, 0.7], &[-0.4, 1.3], &[-0.9, 0.25]).unwrap();
        for pt in g {
            let u = mode_eval(&basis.modes[i], pt.x, pt.y, pt.z).unwrap();
            assert!((pt.velocity[0] - base.velocity(pt.z) - u[0]).abs() < 1e-14);
            assert!((pt.velocity[1] - u[1]).abs() < 1e-14);
            assert!((pt.velocity[2] - u[2]).abs() < 1e-14);
        }
    }

    #[test]
    fn exported_field_is_solenoidal() {
        let (basis, base) = setup();
        let c: Vec<f64> = (0..basis.len()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let h = 1e-3;
        let at = |x: f64, y: f64, z: f64| field_export(&basis, &base, &c, &[x], &[y], &[z]).unwrap()[0].velocity;
        let d = |f: &dyn Fn(f64) -> f64, s: f64| (8.0 * (f(s + h) - f(s - h)) - (f(s + 2.0 * h) - f(s - 2.0 * h))) / (12.0 * h);
        for &x in &[0.0, 0.9, 2.1] {
            for &y in &[-1.0, 0.4] {
                for &z in &[-0.95, -0.3, 0.0, 0.6, 0.95] {
                    let div = d(&|s| at(s, y, z)[0], x) + d(&|s| at(x, s, z)[1], y) + d(&|s| at(x, y, s)[2], z);
                    assert!(div.abs() < 1e-9, "div {div:e}");
                }
            }
        }
    }

    #[test]
    fn ledger_of_decaying_mode() {
        let lambda: f64 = 0.02;
        let t: Vec<f64> = (0..=2000).map(|i| i as f64 * 1e-2).collect();
        let e: Vec<f64> = t.iter().map(|t| 0.5 * (-2.0 * lambda * t).exp()).collect();
        let d: Vec<f64> = e.iter().map(|e| 2.0 * lambda * e).collect();
        let w = vec![0.0; t.len()];
        let l = energy_ledger(&t, &e, &w, &d).unwrap();
        for s in &l[1..l.len() - 1] {
            assert!(s.residual.abs() < 1e-6 * s.dissipation);
        }
        assert!(energy_ledger(&t[..1], &e[..1], &w[..1], &d[..1]).is_err());
        assert!(energy_ledger(&t, &e[..3], &w, &d).is_err());
    }

    #[test]
    fn shares_sum_to_one() {
        let (basis, _) = setup();
        let c: Vec<f64> = (0..basis.len()).map(|i| (i as f64).sin()).collect();
        let s = family_shares(&basis, &c).unwrap();
        assert!((s.values().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}
