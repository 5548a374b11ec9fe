use super::{dispersion_residual, Branch, Cell, FlowConfig, ModeClass, ModeKey, Symmetry};
use crate::error::{Error, Result};
use crate::lateral::{period_integral, Trig, Wave};
use crate::profile::ZProfile;
use crate::quadrature::integrate_adaptive;

/// One separable term `coef * X(x) * Y(y) * Z(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub coef: f64,
    pub x: Trig,
    pub y: Trig,
    pub z: ZProfile,
}

impl Component {
    pub fn eval(&self, x: f64, y: f64, z: f64) -> f64 {
        self.coef * self.x.eval(x) * self.y.eval(y) * self.z.eval(z)
    }

    pub fn d_dx(&self) -> Component {
        Component { x: self.x.derivative(), ..*self }
    }

    pub fn d_dy(&self) -> Component {
        Component { y: self.y.derivative(), ..*self }
    }

    pub fn d_dz(&self) -> Component {
        Component { z: self.z.derivative(), ..*self }
    }

    pub fn is_zero(&self) -> bool {
        self.coef == 0.0 || self.x.is_zero() || self.y.is_zero()
    }

    /// Exact lateral integral of the product with another component.
    pub fn lateral_overlap(&self, other: &Component, cell: &Cell) -> f64 {
        period_integral(&[self.x, other.x], cell.half_length)
            * period_integral(&[self.y, other.y], cell.half_width)
    }
}

/// A normalized divergence-free mode satisfying Navier slip and
/// impermeability on both walls.
#[derive(Debug, Clone)]
pub struct Mode {
    pub key: ModeKey,
    pub mu: f64,
    pub m: f64,
    pub k: f64,
    pub nu: f64,
    /// `mu^2 + nu^2`; the Stokes eigenvalue is this over Re.
    pub wavenumber_sq: f64,
    pub lambda: f64,
    /// Harmonic-part coefficient of the lateral families (0 for 1D).
    pub ratio: f64,
    pub norm: f64,
    pub velocity: [Option<Component>; 3],
    /// Stokes pressure, `None` for 1D modes.
    pub pressure: Option<Component>,
}

impl Mode {
    pub fn class(&self) -> ModeClass {
        self.key.class()
    }

    pub fn bandwidth(&self) -> f64 {
        self.mu.max(self.nu)
    }

    /// Analytic Stokes eigenvalue at another Reynolds number.
    pub fn lambda_at(&self, reynolds: f64) -> f64 {
        self.wavenumber_sq / reynolds
    }
}

/// Unnormalized wall-normal shapes (F for the lateral components, G for
/// u_z, Pi for the pressure) and the harmonic ratio.
fn shapes(symmetry: Symmetry, mu: f64, nu: f64, ls: f64) -> Result<(f64, ZProfile, ZProfile, ZProfile)> {
    let z = ZProfile::zero(mu, nu);
    let (sm, cm) = mu.sin_cos();
    match symmetry {
        Symmetry::Antisymmetric => {
            if cm.abs() < 1e-14 {
                return Err(Error::DegenerateDenominator { mu, value: cm.abs() });
            }
            let r = (ls * mu * cm + sm) / (ls * nu + nu.tanh());
            let f = ZProfile { a_sin: 1.0, b_sinh: -r, ..z };
            let g = ZProfile { a_cos: nu * r / cm, b_cosh: -nu * r, ..z };
            let p = ZProfile { b_sinh: -r, ..z };
            Ok((r, f, g, p))
        }
        Symmetry::Symmetric => {
            if sm.abs() < 1e-14 {
                return Err(Error::DegenerateDenominator { mu, value: sm.abs() });
            }
            let r = (ls * mu * sm - cm) / (ls * nu * nu.tanh() + 1.0);
            let f = ZProfile { a_cos: 1.0, b_cosh: r, ..z };
            let g = ZProfile { a_sin: -nu * r * nu.tanh() / sm, b_sinh: nu * r, ..z };
            let p = ZProfile { b_cosh: r, ..z };
            Ok((r, f, g, p))
        }
    }
}

/// Lateral potential factor along one axis: -cos for phase 0, sin for phase 1.
fn potential_factor(index: u32, step: f64, phase: u8) -> Trig {
    if index == 0 {
        Trig::one()
    } else if phase == 0 {
        Trig::new(Wave::Cos, index, step, -1.0)
    } else {
        Trig::new(Wave::Sin, index, step, 1.0)
    }
}

/// Builds the normalized mode for `key` at wall-normal wavenumber `mu`,
/// which must be a root of the family's dispersion relation.
pub fn build_mode(key: ModeKey, mu: f64, cfg: &FlowConfig, cell: &Cell) -> Result<Mode> {
    key.validate()?;
    cfg.validate()?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("wall-normal wavenumber {mu}")));
    }
    let m = key.m_index as f64 * cell.delta_m();
    let k = key.k_index as f64 * cell.delta_k();
    let nu = m.hypot(k);
    let ls = cfg.slip_length;
    let residual = dispersion_residual(key.relation(), nu, ls, mu);
    if residual > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "mu = {mu} is not a dispersion root for {key:?} (residual {residual:e})"
        )));
    }

    let mut raw: [Option<Component>; 3] = [None, None, None];
    let mut pressure = None;
    let mut ratio = 0.0;
    if key.d == 0 {
        let z = ZProfile::zero(mu, 0.0);
        let f = match key.symmetry {
            Symmetry::Antisymmetric => ZProfile { a_sin: 1.0, ..z },
            Symmetry::Symmetric => ZProfile { a_cos: 1.0, ..z },
        };
        let c = Component { coef: 1.0, x: Trig::one(), y: Trig::one(), z: f };
        match key.kappa {
            Branch::X => raw[0] = Some(c),
            Branch::Y => raw[1] = Some(c),
        }
    } else {
        let (r, f, g, p) = shapes(key.symmetry, mu, nu, ls)?;
        ratio = r;
        let ax = potential_factor(key.m_index, cell.delta_m(), key.o_x);
        let ay = potential_factor(key.k_index, cell.delta_k(), key.o_y);
        let phi = Component { coef: 1.0, x: ax, y: ay, z: f };
        let ux = phi.d_dx();
        let uy = phi.d_dy();
        raw[0] = (!ux.is_zero()).then_some(ux);
        raw[1] = (!uy.is_zero()).then_some(uy);
        raw[2] = Some(Component { z: g, ..phi });
        pressure = Some(Component { z: p, ..phi });
    }

    let mut norm_sq = 0.0;
    for c in raw.iter().flatten() {
        let lateral = c.lateral_overlap(c, cell);
        let zi = integrate_adaptive(|z| c.z.eval(z).powi(2), z_nodes_for(mu.max(nu)), 1e-14, 1e-300);
        norm_sq += c.coef * c.coef * lateral * zi;
    }
    if !(norm_sq > 0.0 && norm_sq.is_finite()) {
        return Err(Error::InvalidParameter(format!("mode {key:?} has zero norm")));
    }
    let norm = norm_sq.sqrt().recip();
    let lambda = (mu * mu + nu * nu) / cfg.reynolds;
    let velocity = raw.map(|c| c.map(|c| Component { coef: c.coef * norm, ..c }));
    let pressure = pressure.map(|c| Component { coef: c.coef * norm * lambda, ..c });
    Ok(Mode {
        key,
        mu,
        m,
        k,
        nu,
        wavenumber_sq: mu * mu + nu * nu,
        lambda,
        ratio,
        norm,
        velocity,
        pressure,
    })
}

/// Starting node count for products of two profiles with this bandwidth.
pub(crate) fn z_nodes_for(bandwidth: f64) -> usize {
    (2.0 * bandwidth / std::f64::consts::PI) as usize + 32
}

fn check_z(z: f64) -> Result<()> {
    if !(z.abs() <= 1.0 + 1e-12) {
        return Err(Error::OutOfDomain(z));
    }
    Ok(())
}

/// Velocity of a mode at a point.
pub fn mode_eval(mode: &Mode, x: f64, y: f64, z: f64) -> Result<[f64; 3]> {
    check_z(z)?;
    let mut u = [0.0; 3];
    for (i, c) in mode.velocity.iter().enumerate() {
        if let Some(c) = c {
            u[i] = c.eval(x, y, z);
        }
    }
    Ok(u)
}

/// Velocity gradient `g[i][j] = d u_i / d x_j`.
pub fn mode_gradient(mode: &Mode, x: f64, y: f64, z: f64) -> Result<[[f64; 3]; 3]> {
    check_z(z)?;
    let mut g = [[0.0; 3]; 3];
    for (i, c) in mode.velocity.iter().enumerate() {
        if let Some(c) = c {
            g[i][0] = c.d_dx().eval(x, y, z);
            g[i][1] = c.d_dy().eval(x, y, z);
            g[i][2] = c.d_dz().eval(x, y, z);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{dispersion_roots, Relation};

    fn cfg(ls: f64) -> FlowConfig {
        FlowConfig::new(1000.0, ls).unwrap()
    }

    fn lateral_mode(sym: Symmetry, mi: u32, ki: u32, ox: u8, oy: u8, n: u32, ls: f64, cell: &Cell) -> Mode {
        let nu = (mi as f64 * cell.delta_m()).hypot(ki as f64 * cell.delta_k());
        let mu = dispersion_roots(Relation::Lateral(sym), nu, ls, n as usize, Default::default()).unwrap()[n as usize - 1];
        build_mode(ModeKey::lateral(sym, mi, ki, ox, oy, n), mu, &cfg(ls), cell).unwrap()
    }

    #[test]
    fn walls_are_impermeable_and_slip() {
        let cell = Cell::from_steps(1.02, 0.7).unwrap();
        for &ls in &[0.0, 0.05] {
            for sym in [Symmetry::Antisymmetric, Symmetry::Symmetric] {
                let m = lateral_mode(sym, 1, 1, 0, 1, 3, ls, &cell);
                let (x, y) = (0.3, -0.8);
                for zw in [-1.0, 1.0] {
                    let u = mode_eval(&m, x, y, zw).unwrap();
                    let g = mode_gradient(&m, x, y, zw).unwrap();
                    assert!(u[2].abs() < 1e-13);
                    for i in 0..2 {
                        // Navier: u_t = -l * n_out . grad u_t
                        assert!((u[i] + ls * zw * g[i][2]).abs() < 1e-12, "{sym:?} {ls} {i}");
                    }
                }
            }
        }
    }

    #[test]
    fn wrong_mu_is_rejected() {
        let cell = Cell::from_steps(1.0, 1.0).unwrap();
        let key = ModeKey::lateral(Symmetry::Antisymmetric, 1, 0, 0, 0, 1);
        assert!(build_mode(key, 3.0, &cfg(0.0), &cell).is_err());
    }

    #[test]
    fn pressure_balances_stokes_operator() {
        // -lambda u = -grad p + (1/Re) lap u, checked pointwise
        let cell = Cell::from_steps(0.8, 1.1).unwrap();
        let c = cfg(0.02);
        for sym in [Symmetry::Antisymmetric, Symmetry::Symmetric] {
            let m = lateral_mode(sym, 2, 1, 1, 0, 2, 0.02, &cell);
            let p = m.pressure.unwrap();
            let grad_p = [p.d_dx(), p.d_dy(), p.d_dz()];
            let (x, y, z) = (0.4, 1.3, -0.35);
            for i in 0..3 {
                let Some(u) = m.velocity[i] else { continue };
                let lap = u.d_dx().d_dx().eval(x, y, z) + u.d_dy().d_dy().eval(x, y, z) + u.d_dz().d_dz().eval(x, y, z);
                let lhs = -m.lambda * u.eval(x, y, z);
                let rhs = -grad_p[i].eval(x, y, z) + lap / c.reynolds;
                assert!((lhs - rhs).abs() < 1e-12, "{sym:?} {i}: {lhs} {rhs}");
            }
        }
    }
}
