//! Fixtures shared by the benchmarks.

use hydromodes::evolution::{sample_initial, BaseFlowKind, ExcitedSet, InitialSpec, System};
use hydromodes::operators::TensorOptions;
use hydromodes::{build_basis, BasisSelection, BasisSet, Cell, FlowConfig};

/// Basis on the default lattice with `m, k <= 1`.
pub fn basis(roots_1d: usize, roots_lateral: usize) -> BasisSet {
    let cfg = FlowConfig::new(1e4, 0.0).expect("valid flow");
    let cell = Cell::from_steps(1.02, 1.02).expect("valid cell");
    build_basis(&cfg, &cell, &BasisSelection::rectangle(1, 1, roots_1d, roots_lateral)).expect("basis builds")
}

pub fn system(roots_1d: usize, roots_lateral: usize) -> System {
    System::new(basis(roots_1d, roots_lateral), BaseFlowKind::Projected, TensorOptions::default()).expect("system assembles")
}

pub fn initial(sys: &System) -> Vec<f64> {
    let spec = InitialSpec { epsilon2: 0.04, seed: 1, excited: ExcitedSet::All };
    sample_initial(&spec, &sys.basis).expect("sampling succeeds").0
}
