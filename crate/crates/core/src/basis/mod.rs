//! Mode families, dispersion roots and basis construction.

pub mod dispersion;
pub(crate) mod mode;
mod poiseuille;
pub mod set;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dispersion::{dispersion_residual, dispersion_roots, Relation, RootOptions};
pub use mode::{build_mode, mode_eval, mode_gradient, Component, Mode};
pub use poiseuille::{poiseuille, FlowRateConvention, PoiseuilleField};
pub use set::{build_basis, build_basis_with, BasisSelection, BasisSet, ModeRecord, NodeComponent, NodeTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub reynolds: f64,
    pub slip_length: f64,
}

impl FlowConfig {
    pub fn new(reynolds: f64, slip_length: f64) -> Result<Self> {
        let cfg = FlowConfig { reynolds, slip_length };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reynolds > 0.0 && self.reynolds.is_finite()) {
            return Err(Error::InvalidParameter(format!("Reynolds number {}", self.reynolds)));
        }
        if !(self.slip_length >= 0.0 && self.slip_length.is_finite()) {
            return Err(Error::InvalidParameter(format!("slip length {}", self.slip_length)));
        }
        Ok(())
    }
}

/// Periodic cell `[-L, L] x [-W, W] x [-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub half_length: f64,
    pub half_width: f64,
}

impl Cell {
    pub fn new(half_length: f64, half_width: f64) -> Result<Self> {
        for v in [half_length, half_width] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("cell half-extent {v}")));
            }
        }
        Ok(Cell { half_length, half_width })
    }

    /// Cell whose fundamental lateral wavenumbers are `dm` and `dk`.
    pub fn from_steps(dm: f64, dk: f64) -> Result<Self> {
        if !(dm > 0.0 && dk > 0.0) {
            return Err(Error::InvalidParameter(format!("lattice steps {dm}, {dk}")));
        }
        Cell::new(PI / dm, PI / dk)
    }

    pub fn delta_m(&self) -> f64 {
        PI / self.half_length
    }

    pub fn delta_k(&self) -> f64 {
        PI / self.half_width
    }

    /// Wall area of one cell face, `4 L W`.
    pub fn area(&self) -> f64 {
        4.0 * self.half_length * self.half_width
    }

    pub fn volume(&self) -> f64 {
        2.0 * self.area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symmetry {
    /// u_x odd in z (s = 0).
    Antisymmetric,
    /// u_x even in z (s = 1).
    Symmetric,
}

impl Symmetry {
    pub fn index(self) -> u8 {
        match self {
            Symmetry::Antisymmetric => 0,
            Symmetry::Symmetric => 1,
        }
    }
}

/// Lateral branch of 1D and 2D modes (kappa).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeClass {
    OneD,
    TwoD,
    ThreeD,
}

/// Identity of a mode. Lateral wavenumbers are stored as integer lattice
/// indices so that selection rules are exact; `mu_index` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeKey {
    pub m_index: u32,
    pub k_index: u32,
    /// 0 for 1D modes, 1 otherwise.
    pub d: u8,
    pub symmetry: Symmetry,
    pub kappa: Branch,
    /// x-phase of u_x: 0 for sin(mx), 1 for cos(mx).
    pub o_x: u8,
    /// y-phase of u_y: 0 for sin(ky), 1 for cos(ky).
    pub o_y: u8,
    pub mu_index: u32,
}

impl ModeKey {
    pub fn one_d(symmetry: Symmetry, kappa: Branch, mu_index: u32) -> Self {
        ModeKey { m_index: 0, k_index: 0, d: 0, symmetry, kappa, o_x: 0, o_y: 0, mu_index }
    }

    /// Key for a mode with a nonzero lateral wavevector; the branch follows
    /// from which index vanishes.
    pub fn lateral(symmetry: Symmetry, m_index: u32, k_index: u32, o_x: u8, o_y: u8, mu_index: u32) -> Self {
        let kappa = if m_index == 0 { Branch::Y } else { Branch::X };
        ModeKey { m_index, k_index, d: 1, symmetry, kappa, o_x, o_y, mu_index }
    }

    pub fn class(&self) -> ModeClass {
        if self.d == 0 {
            ModeClass::OneD
        } else if self.m_index == 0 || self.k_index == 0 {
            ModeClass::TwoD
        } else {
            ModeClass::ThreeD
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidParameter(format!("mode key {self:?}: {why}")));
        if self.o_x > 1 || self.o_y > 1 || self.d > 1 {
            return bad("hyper-indices must be 0 or 1");
        }
        if self.mu_index == 0 {
            return bad("mu_index is 1-based");
        }
        if self.d == 0 {
            if self.m_index != 0 || self.k_index != 0 || self.o_x != 0 || self.o_y != 0 {
                return bad("1D modes carry no lateral structure");
            }
            return Ok(());
        }
        if self.m_index == 0 && self.k_index == 0 {
            return bad("lateral modes need a nonzero wavevector");
        }
        if self.m_index == 0 && (self.o_x != 0 || self.kappa != Branch::Y) {
            return bad("m = 0 requires o_x = 0 and the y branch");
        }
        if self.k_index == 0 && (self.o_y != 0 || self.kappa != Branch::X) {
            return bad("k = 0 requires o_y = 0 and the x branch");
        }
        if self.m_index != 0 && self.k_index != 0 && self.kappa != Branch::X {
            return bad("3D modes use the canonical x branch");
        }
        Ok(())
    }

    pub fn relation(&self) -> Relation {
        if self.d == 0 {
            Relation::OneD(self.symmetry)
        } else {
            Relation::Lateral(self.symmetry)
        }
    }

    pub fn lattice(&self) -> (u32, u32) {
        (self.m_index, self.k_index)
    }

    /// Short family label used in reports.
    pub fn family_label(&self) -> String {
        let s = self.symmetry.index();
        match self.class() {
            ModeClass::OneD => format!("1d-s{s}-{}", if self.kappa == Branch::X { "x" } else { "y" }),
            ModeClass::TwoD => format!("2d-s{s}"),
            ModeClass::ThreeD => format!("3d-s{s}"),
        }
    }
}
