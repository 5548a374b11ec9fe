use serde::{Deserialize, Serialize};

use super::FlowConfig;

/// How the base flow is scaled when the slip length changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FlowRateConvention {
    /// Fixed pressure gradient: `U = 1 - z^2 + 2 l`, the flow rate grows with slip.
    #[default]
    VariableRate,
    /// Fixed flow rate 4/3: the slip profile is rescaled by `1 / (1 + 3 l)`.
    ConstantRate,
}

/// Laminar channel flow with Navier slip on both walls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoiseuilleField {
    pub reynolds: f64,
    pub slip_length: f64,
    pub amplitude: f64,
}

pub fn poiseuille(cfg: &FlowConfig) -> PoiseuilleField {
    PoiseuilleField::with_convention(cfg, FlowRateConvention::VariableRate)
}

impl PoiseuilleField {
    pub fn with_convention(cfg: &FlowConfig, convention: FlowRateConvention) -> Self {
        let amplitude = match convention {
            FlowRateConvention::VariableRate => 1.0,
            FlowRateConvention::ConstantRate => 1.0 / (1.0 + 3.0 * cfg.slip_length),
        };
        PoiseuilleField { reynolds: cfg.reynolds, slip_length: cfg.slip_length, amplitude }
    }

    pub fn velocity(&self, z: f64) -> f64 {
        self.amplitude * (1.0 - z * z + 2.0 * self.slip_length)
    }

    pub fn shear(&self, z: f64) -> f64 {
        -2.0 * self.amplitude * z
    }

    /// Flow rate per unit span, `int u dz`.
    pub fn flow_rate(&self) -> f64 {
        4.0 * self.amplitude * (1.0 / 3.0 + self.slip_length)
    }

    /// Driving pressure gradient `dP/dx`.
    pub fn pressure_gradient(&self) -> f64 {
        -2.0 * self.amplitude / self.reynolds
    }

    /// `int u^2 dz`.
    pub fn square_integral(&self) -> f64 {
        let c = 1.0 + 2.0 * self.slip_length;
        // int (c - z^2)^2 = 2 c^2 - 4c/3 + 2/5
        self.amplitude.powi(2) * (2.0 * c * c - 4.0 * c / 3.0 + 0.4)
    }

    /// `int u(z) cos(mu z) dz` in closed form.
    pub fn cos_moment(&self, mu: f64) -> f64 {
        let (s, c) = mu.sin_cos();
        let base = 1.0 + 2.0 * self.slip_length;
        let i0 = 2.0 * s / mu;
        // int z^2 cos(mu z) over [-1, 1]
        let i2 = 2.0 * (s / mu + 2.0 * c / (mu * mu) - 2.0 * s / mu.powi(3));
        self.amplitude * (base * i0 - i2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    #[test]
    fn closed_forms_match_quadrature() {
        let cfg = FlowConfig::new(500.0, 0.03).unwrap();
        let q = GaussLegendre::new(64);
        for conv in [FlowRateConvention::VariableRate, FlowRateConvention::ConstantRate] {
            let p = PoiseuilleField::with_convention(&cfg, conv);
            assert!((q.integrate(|z| p.velocity(z)) - p.flow_rate()).abs() < 1e-13);
            assert!((q.integrate(|z| p.velocity(z).powi(2)) - p.square_integral()).abs() < 1e-13);
            assert!((q.integrate(|z| p.velocity(z) * (3.7 * z).cos()) - p.cos_moment(3.7)).abs() < 1e-13);
        }
        let c = PoiseuilleField::with_convention(&cfg, FlowRateConvention::ConstantRate);
        assert!((c.flow_rate() - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn slip_boundary_condition() {
        let cfg = FlowConfig::new(500.0, 0.1).unwrap();
        let p = poiseuille(&cfg);
        assert!((p.velocity(1.0) + 0.1 * p.shear(1.0)).abs() < 1e-15);
        assert!((p.velocity(-1.0) - 0.1 * p.shear(-1.0)).abs() < 1e-15);
    }
}
