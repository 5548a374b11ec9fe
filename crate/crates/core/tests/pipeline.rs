use hydromodes::diagnostics;
use hydromodes::evolution::{evolve, BaseFlowKind, EvolveConfig, System, TrajectoryState};
use hydromodes::operators::TensorOptions;
use hydromodes::*;

fn small() -> BasisSet {
    let cfg = FlowConfig::new(4000.0, 0.002).unwrap();
    let cell = Cell::from_steps(1.02, 1.02).unwrap();
    build_basis(&cfg, &cell, &BasisSelection::rectangle(1, 1, 6, 4)).unwrap()
}

#[test]
fn basis_json_round_trip_keeps_checksum() {
    let b = small();
    let back = BasisSet::from_json(&b.to_json().unwrap()).unwrap();
    assert_eq!(back.len(), b.len());
    assert_eq!(back.checksum(), b.checksum());
    for (x, y) in b.modes.iter().zip(&back.modes) {
        assert_eq!(x.key, y.key);
        assert_eq!(x.mu.to_bits(), y.mu.to_bits());
    }
}

#[test]
fn laminar_state_is_a_fixed_point_of_both_base_flows() {
    for kind in [BaseFlowKind::Projected, BaseFlowKind::Exact] {
        let sys = System::new(small(), kind, TensorOptions::default()).unwrap();
        let tr = evolve(&sys, TrajectoryState::new(vec![0.0; sys.dim()], 0.1, 0).unwrap(), &EvolveConfig { t_end: 5.0, cadence: 10 })
            .unwrap();
        let q = tr.samples.last().unwrap().flow_ratio;
        match kind {
            BaseFlowKind::Projected => assert_eq!(q, 1.0),
            BaseFlowKind::Exact => assert!((q - 1.0).abs() < 1e-2, "{q}"),
        }
    }
}

#[test]
fn slip_raises_laminar_flow_rate() {
    let b = small();
    let base = poiseuille(&b.cfg);
    let q = diagnostics::net_flow_rate(&b, &base, &vec![0.0; b.len()]).unwrap();
    assert!((q - (4.0 / 3.0 + 4.0 * b.cfg.slip_length)).abs() < 1e-12, "{q}");
}
