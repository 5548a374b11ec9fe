use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::mode::z_nodes_for;
use super::{build_mode, dispersion_roots, Branch, Cell, Component, FlowConfig, Mode, ModeKey, Relation, Symmetry};
use crate::error::{Error, Result};
use crate::lateral::Trig;
use crate::profile::{Parity, ZProfile};
use crate::projection::{gram_report, GramReport};
use crate::quadrature::GaussLegendre;

/// Which modes to include.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSelection {
    /// Lateral lattice points `(m_index, k_index)`; `(0, 0)` selects the 1D families.
    pub lattice: Vec<(u32, u32)>,
    pub roots_1d: usize,
    pub roots_lateral: usize,
    pub symmetries: Vec<Symmetry>,
    pub branches_1d: Vec<Branch>,
    pub x_phases: Vec<u8>,
    pub y_phases: Vec<u8>,
}

impl BasisSelection {
    /// Every family, branch and phase on the given lattice points.
    pub fn full(lattice: Vec<(u32, u32)>, roots_1d: usize, roots_lateral: usize) -> Self {
        BasisSelection {
            lattice,
            roots_1d,
            roots_lateral,
            symmetries: vec![Symmetry::Antisymmetric, Symmetry::Symmetric],
            branches_1d: vec![Branch::X, Branch::Y],
            x_phases: vec![0, 1],
            y_phases: vec![0, 1],
        }
    }

    /// Rectangular lattice `0..=m_max` by `0..=k_max`.
    pub fn rectangle(m_max: u32, k_max: u32, roots_1d: usize, roots_lateral: usize) -> Self {
        let lattice = (0..=m_max).flat_map(|m| (0..=k_max).map(move |k| (m, k))).collect();
        Self::full(lattice, roots_1d, roots_lateral)
    }

    fn keys_for(&self, m_index: u32, k_index: u32) -> Vec<(Relation, Vec<ModeKey>)> {
        let mut out = Vec::new();
        for &s in &self.symmetries {
            if m_index == 0 && k_index == 0 {
                for &b in &self.branches_1d {
                    let keys = (1..=self.roots_1d as u32).map(|n| ModeKey::one_d(s, b, n)).collect();
                    out.push((Relation::OneD(s), keys));
                }
                continue;
            }
            let xs: Vec<u8> = if m_index == 0 { vec![0] } else { self.x_phases.clone() };
            let ys: Vec<u8> = if k_index == 0 { vec![0] } else { self.y_phases.clone() };
            let mut keys = Vec::new();
            for &ox in &xs {
                for &oy in &ys {
                    for n in 1..=self.roots_lateral as u32 {
                        keys.push(ModeKey::lateral(s, m_index, k_index, ox, oy, n));
                    }
                }
            }
            out.push((Relation::Lateral(s), keys));
        }
        out
    }
}

/// Mode component tabulated on the basis quadrature nodes.
#[derive(Debug, Clone)]
pub struct NodeComponent {
    pub coef: f64,
    pub x: Trig,
    pub y: Trig,
    pub parity: Parity,
    pub value: Vec<f64>,
    pub dz: Vec<f64>,
    pub d2z: Vec<f64>,
}

impl NodeComponent {
    fn new(c: &Component, nodes: &[f64]) -> Self {
        let d1 = c.z.derivative();
        let d2 = d1.derivative();
        NodeComponent {
            coef: c.coef,
            x: c.x,
            y: c.y,
            parity: c.z.parity(),
            value: nodes.iter().map(|&z| c.z.eval(z)).collect(),
            dz: nodes.iter().map(|&z| d1.eval(z)).collect(),
            d2z: nodes.iter().map(|&z| d2.eval(z)).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeTable {
    pub velocity: [Option<NodeComponent>; 3],
    pub pressure: Option<NodeComponent>,
}

/// Serializable identity of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub key: ModeKey,
    /// Decimal with 17 significant digits.
    pub mu: String,
    pub norm: String,
    pub lambda: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BasisFile {
    format: String,
    version: String,
    checksum: String,
    flow: FlowConfig,
    cell: Cell,
    selection: BasisSelection,
    quadrature_nodes: usize,
    gram: GramReport,
    modes: Vec<ModeRecord>,
}

/// An ordered, orthonormal collection of modes.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub cfg: FlowConfig,
    pub cell: Cell,
    pub selection: BasisSelection,
    pub modes: Vec<Mode>,
    pub quadrature: Arc<GaussLegendre>,
    pub tables: Vec<NodeTable>,
    pub gram: GramReport,
    index: HashMap<ModeKey, usize>,
}

pub(crate) fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse17(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::InvalidParameter(format!("bad decimal {s:?}: {e}")))
}

/// Solves the dispersion relations and builds every selected mode.
pub fn build_basis(cfg: &FlowConfig, cell: &Cell, selection: &BasisSelection) -> Result<BasisSet> {
    build_basis_with(cfg, cell, selection, true)
}

/// As [`build_basis`]; `gram = false` skips the orthonormality report,
/// which dominates the cost for large single-wavevector bases.
pub fn build_basis_with(cfg: &FlowConfig, cell: &Cell, selection: &BasisSelection, gram: bool) -> Result<BasisSet> {
    cfg.validate()?;
    let lattice: BTreeSet<(u32, u32)> = selection.lattice.iter().copied().collect();
    let mut pairs = Vec::new();
    for &(mi, ki) in &lattice {
        let nu = (mi as f64 * cell.delta_m()).hypot(ki as f64 * cell.delta_k());
        for (rel, keys) in selection.keys_for(mi, ki) {
            let n = keys.iter().map(|k| k.mu_index as usize).max().unwrap_or(0);
            if n == 0 {
                continue;
            }
            let roots = dispersion_roots(rel, nu, cfg.slip_length, n, Default::default())?;
            for key in keys {
                pairs.push((key, roots[key.mu_index as usize - 1]));
            }
        }
    }
    assemble(cfg, cell, selection.clone(), pairs, gram)
}

fn assemble(
    cfg: &FlowConfig,
    cell: &Cell,
    selection: BasisSelection,
    mut pairs: Vec<(ModeKey, f64)>,
    gram: bool,
) -> Result<BasisSet> {
    pairs.sort_by(|a, b| a.0.cmp(&b.0));
    pairs.dedup_by(|a, b| a.0 == b.0);
    let modes = pairs
        .iter()
        .map(|&(key, mu)| build_mode(key, mu, cfg, cell))
        .collect::<Result<Vec<_>>>()?;
    BasisSet::from_modes(*cfg, *cell, selection, modes, gram)
}

fn probe_integrals(top: &Mode, q: &GaussLegendre) -> Vec<f64> {
    let profiles: Vec<ZProfile> = top.velocity.iter().flatten().map(|c| c.z).collect();
    let mut out = Vec::new();
    for p in &profiles {
        out.push(q.integrate(|z| p.eval(z).powi(2)));
        for r in &profiles {
            out.push(q.integrate(|z| (p.eval(z) * r.eval(z)).powi(2)));
        }
    }
    out
}

/// Smallest node count whose probe integrals agree with the doubled rule.
fn choose_quadrature(modes: &[Mode]) -> Arc<GaussLegendre> {
    let top = modes
        .iter()
        .max_by(|a, b| a.bandwidth().total_cmp(&b.bandwidth()));
    let Some(top) = top else {
        return GaussLegendre::cached(32);
    };
    let mut n = z_nodes_for(top.bandwidth());
    let mut prev = probe_integrals(top, &GaussLegendre::cached(n));
    for _ in 0..6 {
        let next = probe_integrals(top, &GaussLegendre::cached(2 * n));
        let agree = prev
            .iter()
            .zip(&next)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1e-300));
        if agree {
            break;
        }
        n *= 2;
        prev = next;
    }
    GaussLegendre::cached(n)
}

impl BasisSet {
    pub fn from_modes(cfg: FlowConfig, cell: Cell, selection: BasisSelection, modes: Vec<Mode>, gram: bool) -> Result<Self> {
        let quadrature = choose_quadrature(&modes);
        let mut set = BasisSet {
            cfg,
            cell,
            selection,
            modes,
            quadrature: quadrature.clone(),
            tables: Vec::new(),
            gram: GramReport::default(),
            index: HashMap::new(),
        };
        set.retabulate(quadrature);
        if gram {
            set.gram = gram_report(&set);
        }
        Ok(set)
    }

    /// Re-tabulates every mode on a different rule.
    pub fn retabulate(&mut self, quadrature: Arc<GaussLegendre>) {
        let nodes = &quadrature.nodes;
        self.tables = self
            .modes
            .iter()
            .map(|m| NodeTable {
                velocity: m.velocity.map(|c| c.map(|c| NodeComponent::new(&c, nodes))),
                pressure: m.pressure.map(|c| NodeComponent::new(&c, nodes)),
            })
            .collect();
        self.index = self.modes.iter().enumerate().map(|(i, m)| (m.key, i)).collect();
        self.quadrature = quadrature;
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn index_of(&self, key: &ModeKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Indices grouped by lattice point, in basis order.
    pub fn lattice_groups(&self) -> Vec<((u32, u32), Vec<usize>)> {
        let mut groups: Vec<((u32, u32), Vec<usize>)> = Vec::new();
        for (i, m) in self.modes.iter().enumerate() {
            let l = m.key.lattice();
            match groups.iter_mut().find(|g| g.0 == l) {
                Some(g) => g.1.push(i),
                None => groups.push((l, vec![i])),
            }
        }
        groups
    }

    /// Indices of the 1D modes carrying streamwise flow with even profiles.
    pub fn streamwise_symmetric_1d(&self) -> Vec<usize> {
        self.modes
            .iter()
            .enumerate()
            .filter(|(_, m)| m.key.d == 0 && m.key.symmetry == Symmetry::Symmetric && m.key.kappa == Branch::X)
            .map(|(i, _)| i)
            .collect()
    }

    /// Stable 64-bit FNV-1a digest of the mode identities and wavenumbers.
    pub fn checksum(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for v in [self.cfg.reynolds, self.cfg.slip_length, self.cell.half_length, self.cell.half_width] {
            feed(&v.to_bits().to_le_bytes());
        }
        for m in &self.modes {
            let k = m.key;
            feed(&k.m_index.to_le_bytes());
            feed(&k.k_index.to_le_bytes());
            feed(&[k.d, k.symmetry.index(), k.kappa as u8, k.o_x, k.o_y]);
            feed(&k.mu_index.to_le_bytes());
            feed(&m.mu.to_bits().to_le_bytes());
        }
        format!("{h:016x}")
    }

    pub fn records(&self) -> Vec<ModeRecord> {
        self.modes
            .iter()
            .map(|m| ModeRecord {
                key: m.key,
                mu: fmt17(m.mu),
                norm: fmt17(m.norm),
                lambda: fmt17(m.lambda),
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = BasisFile {
            format: "hydromodes-basis".into(),
            version: crate::VERSION.into(),
            checksum: self.checksum(),
            flow: self.cfg,
            cell: self.cell,
            selection: self.selection.clone(),
            quadrature_nodes: self.quadrature.len(),
            gram: self.gram.clone(),
            modes: self.records(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Rebuilds a basis from its JSON form without re-solving any root.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: BasisFile = serde_json::from_str(text)?;
        let pairs = file
            .modes
            .iter()
            .map(|r| Ok((r.key, parse17(&r.mu)?)))
            .collect::<Result<Vec<_>>>()?;
        let set = assemble(&file.flow, &file.cell, file.selection, pairs, true)?;
        if set.checksum() != file.checksum {
            return Err(Error::Checkpoint(format!(
                "basis checksum {} does not match stored {}",
                set.checksum(),
                file.checksum
            )));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_counts() {
        let cfg = FlowConfig::new(1000.0, 0.0).unwrap();
        let cell = Cell::from_steps(1.0, 1.0).unwrap();
        let mut sel = BasisSelection::full(vec![(0, 0)], 4, 4);
        sel.branches_1d = vec![Branch::X];
        assert_eq!(build_basis(&cfg, &cell, &sel).unwrap().len(), 8);
        let sel = BasisSelection::full(vec![(1, 0)], 4, 10);
        assert_eq!(build_basis(&cfg, &cell, &sel).unwrap().len(), 40);
        let sel = BasisSelection::full(vec![(1, 1)], 4, 3);
        assert_eq!(build_basis(&cfg, &cell, &sel).unwrap().len(), 24);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let cfg = FlowConfig::new(1234.5, 0.01).unwrap();
        let cell = Cell::from_steps(1.02, 0.51).unwrap();
        let sel = BasisSelection::rectangle(1, 1, 3, 2);
        let b = build_basis(&cfg, &cell, &sel).unwrap();
        let back = BasisSet::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(b.len(), back.len());
        for (a, c) in b.modes.iter().zip(&back.modes) {
            assert_eq!(a.key, c.key);
            assert_eq!(a.mu.to_bits(), c.mu.to_bits());
        }
        assert_eq!(b.checksum(), back.checksum());
    }
}
