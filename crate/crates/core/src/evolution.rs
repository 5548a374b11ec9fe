//! Random initial states, RK4 integration of the Galerkin system, and
//! ensembles of trajectories.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{poiseuille, BasisSet, ModeClass, PoiseuilleField, Symmetry};
use crate::diagnostics;
use crate::error::{Error, Result};
use crate::operators::{assemble_linear, assemble_tensor, BaseFlow, CouplingTensor, Dynamics, LinearOperator, TensorOptions};
use crate::projection::{expand_poiseuille, flow_rate_weights, PoiseuilleExpansion};

/// Which laminar profile the perturbation is linearized about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFlowKind {
    /// The laminar profile truncated to the basis; the discrete energy
    /// budget then closes exactly.
    #[default]
    Projected,
    Exact,
}

/// A basis with its assembled operators and laminar-flow data.
#[derive(Debug, Clone)]
pub struct System {
    pub basis: BasisSet,
    pub dynamics: Dynamics,
    pub base: PoiseuilleField,
    pub base_kind: BaseFlowKind,
    pub expansion: PoiseuilleExpansion,
    /// `(2/Re) A q_a`: forcing of each mode by the mean pressure gradient.
    pub forcing: Vec<f64>,
}

impl System {
    pub fn new(basis: BasisSet, base_kind: BaseFlowKind, tensor: TensorOptions) -> Result<Self> {
        let (linear, tensor) = Self::assemble(&basis, base_kind, tensor)?;
        Self::with_operators(basis, base_kind, linear, tensor)
    }

    /// Assembles the linear operator and coupling tensor for `basis`.
    pub fn assemble(basis: &BasisSet, base_kind: BaseFlowKind, tensor: TensorOptions) -> Result<(LinearOperator, CouplingTensor)> {
        let flow = match base_kind {
            BaseFlowKind::Projected => BaseFlow::Projected(expand_poiseuille(basis, &poiseuille(&basis.cfg))?.coefficients),
            BaseFlowKind::Exact => BaseFlow::Exact(poiseuille(&basis.cfg)),
        };
        let linear = assemble_linear(basis, &flow)?;
        let all: Vec<usize> = (0..basis.len()).collect();
        Ok((linear, assemble_tensor(basis, &all, tensor)?))
    }

    /// Builds the system from previously assembled (for example cached) operators.
    pub fn with_operators(basis: BasisSet, base_kind: BaseFlowKind, linear: LinearOperator, tensor: CouplingTensor) -> Result<Self> {
        if linear.dim != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: linear.dim });
        }
        let base = poiseuille(&basis.cfg);
        let expansion = expand_poiseuille(&basis, &base)?;
        let scale = -base.pressure_gradient() * basis.cell.area();
        let forcing = flow_rate_weights(&basis).iter().map(|q| scale * q).collect();
        let mut linear = linear;
        linear.reynolds = basis.cfg.reynolds;
        Ok(System { dynamics: Dynamics::new(linear, tensor)?, basis, base, base_kind, expansion, forcing })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Total coefficients `w = c^P + c`.
    pub fn total(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.expansion.coefficients).map(|(a, b)| a + b).collect()
    }

    /// `(W_p, W_d)` of the total flow.
    pub fn budget(&self, c: &[f64]) -> (f64, f64) {
        let mut wp = 0.0;
        let mut wd = 0.0;
        for (i, m) in self.basis.modes.iter().enumerate() {
            let w = c[i] + self.expansion.coefficients[i];
            wp += w * self.forcing[i];
            wd += m.lambda * w * w;
        }
        (wp, wd)
    }

    /// Stable time step: `min(0.01, 0.1 / max |Re sigma|, 0.5 / lambda_max)`.
    pub fn default_dt(&self) -> f64 {
        let mut growth: f64 = 0.0;
        for b in &self.dynamics.linear.blocks {
            let ev = b.matrix(self.dynamics.linear.reynolds).complex_eigenvalues();
            for z in ev.iter() {
                growth = growth.max(z.re.abs());
            }
        }
        let lambda_max = self.basis.modes.iter().map(|m| m.lambda).fold(0.0, f64::max);
        let mut dt: f64 = 0.01;
        if growth > 0.0 {
            dt = dt.min(0.1 / growth);
        }
        if lambda_max > 0.0 {
            dt = dt.min(0.5 / lambda_max);
        }
        dt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExcitedSet {
    /// 2D antisymmetric modes on both branches at lattice indices 1, 2, 4, ...
    Default,
    Indices(Vec<usize>),
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    /// Variance of each excited coefficient.
    pub epsilon2: f64,
    pub seed: u64,
    pub excited: ExcitedSet,
}

pub fn excited_indices(basis: &BasisSet, set: &ExcitedSet) -> Result<Vec<usize>> {
    match set {
        ExcitedSet::All => Ok((0..basis.len()).collect()),
        ExcitedSet::Indices(v) => {
            if let Some(&bad) = v.iter().find(|&&i| i >= basis.len()) {
                return Err(Error::DimensionMismatch { expected: basis.len(), got: bad + 1 });
            }
            let mut v = v.clone();
            v.sort_unstable();
            v.dedup();
            Ok(v)
        }
        ExcitedSet::Default => Ok(basis
            .modes
            .iter()
            .enumerate()
            .filter(|(_, m)| {
                let (mi, ki) = m.key.lattice();
                m.key.class() == ModeClass::TwoD
                    && m.key.symmetry == Symmetry::Antisymmetric
                    && (mi + ki).is_power_of_two()
            })
            .map(|(i, _)| i)
            .collect()),
    }
}

/// Gaussian coefficients with variance `epsilon2` on the excited modes,
/// drawn in basis order from a ChaCha8 stream.
pub fn sample_initial(spec: &InitialSpec, basis: &BasisSet) -> Result<(Vec<f64>, u128)> {
    if !(spec.epsilon2 >= 0.0 && spec.epsilon2.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon^2 = {}", spec.epsilon2)));
    }
    let idx = excited_indices(basis, &spec.excited)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, spec.epsilon2.sqrt())
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut c = vec![0.0; basis.len()];
    for i in idx {
        c[i] = normal.sample(&mut rng);
    }
    Ok((c, rng.get_word_pos()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub step: u64,
    pub dt: f64,
    pub t: f64,
    pub c: Vec<f64>,
    /// Running `int (W_p - W_d) dt`, integrated with the state.
    pub work: f64,
    pub seed: u64,
}

impl TrajectoryState {
    pub fn new(c: Vec<f64>, dt: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step {dt}")));
        }
        Ok(TrajectoryState { step: 0, dt, t: 0.0, c, work: 0.0, seed })
    }
}

/// Scratch space for RK4 stages.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k: [Vec<f64>; 4],
    kw: [f64; 4],
    stage: Vec<f64>,
    scratch: Vec<f64>,
}

impl Rk4 {
    pub fn new(n: usize) -> Self {
        Rk4 { k: std::array::from_fn(|_| vec![0.0; n]), kw: [0.0; 4], stage: vec![0.0; n], scratch: vec![0.0; n] }
    }

    fn eval(sys: &System, c: &[f64], out: &mut [f64], scratch: &mut [f64]) -> f64 {
        sys.dynamics.rhs(c, out, scratch);
        let (wp, wd) = sys.budget(c);
        wp - wd
    }

    /// Advances the state by one classical RK4 step.
    pub fn step(&mut self, sys: &System, s: &mut TrajectoryState) -> Result<()> {
        self.advance(sys, s, None)
    }

    /// As `step`, reusing a right-hand side already evaluated at `s.c`.
    pub fn step_from(&mut self, sys: &System, s: &mut TrajectoryState, rhs: &[f64]) -> Result<()> {
        self.advance(sys, s, Some(rhs))
    }

    fn advance(&mut self, sys: &System, s: &mut TrajectoryState, rhs: Option<&[f64]>) -> Result<()> {
        let n = s.c.len();
        if n != sys.dim() {
            return Err(Error::DimensionMismatch { expected: sys.dim(), got: n });
        }
        let dt = s.dt;
        let coeffs = [0.5, 0.5, 1.0];
        self.kw[0] = match rhs {
            Some(r) => {
                self.k[0].copy_from_slice(r);
                let (wp, wd) = sys.budget(&s.c);
                wp - wd
            }
            None => Self::eval(sys, &s.c, &mut self.k[0], &mut self.scratch),
        };
        for j in 0..3 {
            for i in 0..n {
                self.stage[i] = s.c[i] + coeffs[j] * dt * self.k[j][i];
            }
            self.kw[j + 1] = Self::eval(sys, &self.stage, &mut self.k[j + 1], &mut self.scratch);
        }
        for i in 0..n {
            s.c[i] += dt / 6.0 * (self.k[0][i] + 2.0 * self.k[1][i] + 2.0 * self.k[2][i] + self.k[3][i]);
        }
        s.work += dt / 6.0 * (self.kw[0] + 2.0 * self.kw[1] + 2.0 * self.kw[2] + self.kw[3]);
        s.step += 1;
        s.t = s.step as f64 * dt;
        if !s.c.iter().all(|x| x.is_finite()) || !s.work.is_finite() {
            return Err(Error::NumericFailure { step: s.step, t: s.t });
        }
        Ok(())
    }
}

/// Observables recorded after every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSample {
    pub t: f64,
    pub flow_rate: f64,
    pub energy: f64,
    pub power: f64,
    pub dissipation: f64,
    /// `int (W_p - W_d) dt` since the start of the trajectory.
    pub work: f64,
    /// `w . dw/dt` from the right-hand side.
    pub d_energy_dt: f64,
    /// Streamwise momentum rate and wall force, in units of `V 2/Re`.
    pub inertial_force: f64,
    pub boundary_force: f64,
}

/// Observables recorded every `cadence` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub flow_rate: f64,
    pub flow_ratio: f64,
    pub energy: f64,
    pub perturbation_energy: f64,
    pub power: f64,
    pub dissipation: f64,
    pub norm: f64,
    /// Wall slopes of the counter-flow profile at `z = -1` and `z = 1`.
    pub slope_bottom: f64,
    pub slope_top: f64,
    pub shares: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub t_end: f64,
    pub cadence: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<StepSample>,
    pub samples: Vec<Sample>,
    pub state: TrajectoryState,
}

pub fn step_sample(sys: &System, s: &TrajectoryState, rhs: &mut [f64], scratch: &mut [f64]) -> Result<StepSample> {
    let w = sys.total(&s.c);
    sys.dynamics.rhs(&s.c, rhs, scratch);
    let (power, dissipation) = sys.budget(&s.c);
    let f0 = diagnostics::reference_force(&sys.basis);
    Ok(StepSample {
        t: s.t,
        flow_rate: diagnostics::net_flow_rate(&sys.basis, &sys.base, &s.c)?,
        energy: diagnostics::kinetic_energy(&w),
        power,
        dissipation,
        work: s.work,
        d_energy_dt: w.iter().zip(rhs.iter()).map(|(a, b)| a * b).sum(),
        inertial_force: diagnostics::inertial_force(&sys.basis, rhs)? / f0,
        boundary_force: diagnostics::boundary_force(&sys.basis, &s.c)? / f0,
    })
}

pub fn sample(sys: &System, s: &TrajectoryState) -> Result<Sample> {
    let w = sys.total(&s.c);
    let (power, dissipation) = sys.budget(&s.c);
    let q = diagnostics::net_flow_rate(&sys.basis, &sys.base, &s.c)?;
    let profile = diagnostics::counter_flow_profile(&sys.basis, &s.c, &[])?;
    Ok(Sample {
        t: s.t,
        flow_rate: q,
        flow_ratio: q / sys.base.flow_rate(),
        energy: diagnostics::kinetic_energy(&w),
        perturbation_energy: diagnostics::kinetic_energy(&s.c),
        power,
        dissipation,
        norm: s.c.iter().map(|x| x * x).sum::<f64>().sqrt(),
        slope_bottom: profile.slope_bottom,
        slope_top: profile.slope_top,
        shares: diagnostics::family_shares(&sys.basis, &s.c)?,
    })
}

/// Integrates from `state` to `t_end`, recording the starting state too.
pub fn evolve(sys: &System, state: TrajectoryState, cfg: &EvolveConfig) -> Result<Trajectory> {
    if cfg.cadence == 0 {
        return Err(Error::InvalidParameter("sampling cadence must be positive".into()));
    }
    let total_steps = (cfg.t_end / state.dt).round() as u64;
    let n = sys.dim();
    let mut rk = Rk4::new(n);
    let mut rhs = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut s = state;
    let mut steps = vec![step_sample(sys, &s, &mut rhs, &mut scratch)?];
    let mut samples = Vec::new();
    if s.step % cfg.cadence == 0 {
        samples.push(sample(sys, &s)?);
    }
    while s.step < total_steps {
        rk.step_from(sys, &mut s, &rhs)?;
        steps.push(step_sample(sys, &s, &mut rhs, &mut scratch)?);
        if s.step % cfg.cadence == 0 {
            samples.push(sample(sys, &s)?);
        }
    }
    Ok(Trajectory { steps, samples, state: s })
}

/// Largest relative change of `(Q, E)` at `t` when the step is halved.
pub fn step_halving(sys: &System, c0: &[f64], dt: f64, t: f64) -> Result<f64> {
    let run = |h: f64| -> Result<StepSample> {
        let cfg = EvolveConfig { t_end: t, cadence: u64::MAX };
        let tr = evolve(sys, TrajectoryState::new(c0.to_vec(), h, 0)?, &cfg)?;
        Ok(*tr.steps.last().expect("trajectory has samples"))
    };
    let (a, b) = (run(dt)?, run(0.5 * dt)?);
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE);
    Ok(rel(a.flow_rate, b.flow_rate).max(rel(a.energy, b.energy)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub config_hash: String,
    pub basis_checksum: String,
    /// ChaCha8 word position after initial sampling.
    pub rng_word_pos: u128,
    /// Total kinetic energy of the initial state.
    #[serde(default)]
    pub initial_energy: f64,
    pub state: TrajectoryState,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Rejects checkpoints written for a different configuration or basis.
    pub fn verify(&self, config_hash: &str, basis: &BasisSet) -> Result<()> {
        if self.config_hash != config_hash {
            return Err(Error::Checkpoint(format!("config hash {} != {}", self.config_hash, config_hash)));
        }
        if self.basis_checksum != basis.checksum() {
            return Err(Error::Checkpoint("basis checksum differs".into()));
        }
        if self.state.c.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: self.state.c.len() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub seed: u64,
    pub trajectory: Option<Trajectory>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub members: Vec<EnsembleMember>,
    /// Per-sample means over completed members: `(t, Q, E)`.
    pub mean: Vec<(f64, f64, f64)>,
    pub completed: usize,
}

impl EnsembleResult {
    pub fn is_partial(&self) -> bool {
        self.completed < self.members.len()
    }
}

/// Runs one trajectory per seed; failed members are reported and left out
/// of the averages.
pub fn ensemble_run(sys: &System, initial: &InitialSpec, seeds: &[u64], dt: f64, cfg: &EvolveConfig) -> Result<EnsembleResult> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("ensemble needs at least one seed".into()));
    }
    let members: Vec<EnsembleMember> = seeds
        .par_iter()
        .map(|&seed| {
            let run = || -> Result<Trajectory> {
                let spec = InitialSpec { seed, ..initial.clone() };
                let (c, _) = sample_initial(&spec, &sys.basis)?;
                evolve(sys, TrajectoryState::new(c, dt, seed)?, cfg)
            };
            match run() {
                Ok(t) => EnsembleMember { seed, trajectory: Some(t), error: None },
                Err(e) => {
                    log::warn!("trajectory with seed {seed} aborted: {e}");
                    EnsembleMember { seed, trajectory: None, error: Some(e.to_string()) }
                }
            }
        })
        .collect();
    let done: Vec<&Trajectory> = members.iter().filter_map(|m| m.trajectory.as_ref()).collect();
    let mut mean = Vec::new();
    if let Some(first) = done.first() {
        for (i, s) in first.samples.iter().enumerate() {
            let k = done.len() as f64;
            let q = done.iter().map(|t| t.samples[i].flow_rate).sum::<f64>() / k;
            let e = done.iter().map(|t| t.samples[i].energy).sum::<f64>() / k;
            mean.push((s.t, q, e));
        }
    }
    let completed = done.len();
    Ok(EnsembleResult { members, mean, completed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, BasisSelection, Cell, FlowConfig};

    fn small_system(re: f64) -> System {
        let cfg = FlowConfig::new(re, 0.0).unwrap();
        let cell = Cell::from_steps(1.02, 1.02).unwrap();
        let basis = build_basis(&cfg, &cell, &BasisSelection::rectangle(2, 1, 8, 3)).unwrap();
        System::new(basis, BaseFlowKind::Projected, TensorOptions::default()).unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let sys = small_system(3000.0);
        let spec = InitialSpec { epsilon2: 0.04, seed: 7, excited: ExcitedSet::Default };
        let (a, pa) = sample_initial(&spec, &sys.basis).unwrap();
        let (b, pb) = sample_initial(&spec, &sys.basis).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        assert!(a.iter().any(|x| *x != 0.0));
        let idx = excited_indices(&sys.basis, &ExcitedSet::Default).unwrap();
        for (i, x) in a.iter().enumerate() {
            if !idx.contains(&i) {
                assert_eq!(*x, 0.0);
            }
        }
    }

    #[test]
    fn laminar_state_is_steady() {
        let sys = small_system(3000.0);
        let mut rhs = vec![0.0; sys.dim()];
        let mut scratch = vec![0.0; sys.dim()];
        sys.dynamics.rhs(&vec![0.0; sys.dim()], &mut rhs, &mut scratch);
        assert!(rhs.iter().all(|x| *x == 0.0));
        // forcing balances dissipation of the truncated laminar profile
        for (i, m) in sys.basis.modes.iter().enumerate() {
            let lhs = m.lambda * sys.expansion.coefficients[i];
            assert!((lhs - sys.forcing[i]).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn time_is_step_times_dt() {
        let sys = small_system(3000.0);
        let spec = InitialSpec { epsilon2: 0.01, seed: 1, excited: ExcitedSet::Default };
        let (c, _) = sample_initial(&spec, &sys.basis).unwrap();
        let tr = evolve(&sys, TrajectoryState::new(c, 0.05, 1).unwrap(), &EvolveConfig { t_end: 1.0, cadence: 5 }).unwrap();
        assert_eq!(tr.state.step, 20);
        assert_eq!(tr.state.t, 20.0 * 0.05);
        assert_eq!(tr.samples.len(), 5);
    }

    fn linear_only(mut sys: System) -> System {
        let n = sys.dim();
        sys.dynamics.tensor = crate::operators::CouplingTensor::empty(n);
        sys
    }

    fn final_state(sys: &System, c0: &[f64], dt: f64, t: f64) -> Vec<f64> {
        let tr = evolve(sys, TrajectoryState::new(c0.to_vec(), dt, 0).unwrap(), &EvolveConfig { t_end: t, cadence: u64::MAX }).unwrap();
        tr.state.c
    }

    #[test]
    fn scalar_decay_is_fourth_order() {
        let sys = linear_only(small_system(3000.0));
        let i = sys.basis.streamwise_symmetric_1d()[2];
        let lambda = sys.basis.modes[i].lambda;
        let mut c0 = vec![0.0; sys.dim()];
        c0[i] = 1.0;
        let t = 8.0 / lambda;
        let err = |dt: f64| (final_state(&sys, &c0, dt, t)[i] - (-lambda * t).exp()).abs();
        let dt = 0.5 / lambda;
        let order = (err(dt) / err(0.5 * dt)).log2();
        assert!(order > 3.9, "order {order}");
    }

    #[test]
    fn zero_perturbation_stays_zero() {
        let sys = small_system(8000.0);
        let c = final_state(&sys, &vec![0.0; sys.dim()], 0.1, 5.0);
        assert!(c.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn resume_is_bitwise() {
        let sys = small_system(8000.0);
        let spec = InitialSpec { epsilon2: 0.04, seed: 3, excited: ExcitedSet::Default };
        let (c, pos) = sample_initial(&spec, &sys.basis).unwrap();
        let cfg = EvolveConfig { t_end: 4.0, cadence: 10 };
        let full = evolve(&sys, TrajectoryState::new(c.clone(), 0.05, 3).unwrap(), &cfg).unwrap();
        let half = evolve(&sys, TrajectoryState::new(c, 0.05, 3).unwrap(), &EvolveConfig { t_end: 2.0, ..cfg }).unwrap();
        let ck = Checkpoint {
            version: crate::VERSION.into(),
            config_hash: "abc".into(),
            basis_checksum: sys.basis.checksum(),
            rng_word_pos: pos,
            initial_energy: 0.0,
            state: half.state.clone(),
        };
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        back.verify("abc", &sys.basis).unwrap();
        assert!(back.verify("abd", &sys.basis).is_err());
        let rest = evolve(&sys, back.state, &cfg).unwrap();
        assert_eq!(rest.state, full.state);
        assert_eq!(&rest.steps[1..], &full.steps[half.steps.len()..]);
    }

    #[test]
    fn ensemble_averages() {
        let sys = small_system(8000.0);
        let spec = InitialSpec { epsilon2: 0.04, seed: 0, excited: ExcitedSet::Default };
        let cfg = EvolveConfig { t_end: 2.0, cadence: 10 };
        let one = ensemble_run(&sys, &spec, &[5], 0.05, &cfg).unwrap();
        let tr = one.members[0].trajectory.as_ref().unwrap();
        for (m, s) in one.mean.iter().zip(&tr.samples) {
            assert_eq!(*m, (s.t, s.flow_rate, s.energy));
        }
        let two = ensemble_run(&sys, &spec, &[5, 5], 0.05, &cfg).unwrap();
        assert!(!two.is_partial());
        for (a, b) in two.mean.iter().zip(&one.mean) {
            assert!((a.1 - b.1).abs() <= 1e-15 * b.1.abs() && (a.2 - b.2).abs() <= 1e-15 * b.2.abs());
        }
        assert!(ensemble_run(&sys, &spec, &[], 0.05, &cfg).is_err());
    }

    #[test]
    fn runaway_step_aborts() {
        let sys = small_system(8000.0);
        let spec = InitialSpec { epsilon2: 0.04, seed: 1, excited: ExcitedSet::All };
        let (c, _) = sample_initial(&spec, &sys.basis).unwrap();
        let r = evolve(&sys, TrajectoryState::new(c, 50.0, 1).unwrap(), &EvolveConfig { t_end: 1e5, cadence: 1 });
        assert!(matches!(r, Err(Error::NumericFailure { .. })));
    }

    #[test]
    fn sample_variance() {
        let sys = small_system(3000.0);
        let n = 20_000;
        let mut s2 = 0.0;
        for seed in 0..n {
            let spec = InitialSpec { epsilon2: 0.04, seed, excited: ExcitedSet::Indices(vec![4]) };
            let (c, _) = sample_initial(&spec, &sys.basis).unwrap();
            s2 += c[4] * c[4];
        }
        assert!((s2 / n as f64 / 0.04 - 1.0).abs() < 0.03);
    }
}
