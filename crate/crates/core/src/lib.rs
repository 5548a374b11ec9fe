//! Galerkin toolkit for plane channel flow with Navier slip: analytic
//! hydrodynamic modes, projected linear and quadratic operators, linear
//! stability searches, ensemble time evolution and flow diagnostics.

pub mod basis;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod lateral;
pub mod operators;
pub mod profile;
pub mod projection;
pub mod quadrature;
pub mod stability;

pub use basis::{
    build_basis, build_mode, dispersion_roots, mode_eval, poiseuille, BasisSelection, BasisSet, Branch, Cell,
    FlowConfig, FlowRateConvention, Mode, ModeClass, ModeKey, PoiseuilleField, Symmetry,
};
pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
