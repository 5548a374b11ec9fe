//! Run configuration: TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use hydromodes::basis::{BasisSelection, Cell, FlowConfig, FlowRateConvention};
use hydromodes::evolution::{BaseFlowKind, ExcitedSet};
use hydromodes::stability::{CriticalSearch, StabilityOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub flow: FlowSection,
    pub lattice: LatticeSection,
    pub basis: BasisSection,
    pub search: SearchSection,
    pub evolution: EvolutionSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            flow: FlowSection::default(),
            lattice: LatticeSection::default(),
            basis: BasisSection::default(),
            search: SearchSection::default(),
            evolution: EvolutionSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub reynolds: f64,
    pub slip_length: f64,
    pub convention: Convention,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection { reynolds: 1e4, slip_length: 0.0, convention: Convention::VariableRate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    VariableRate,
    ConstantRate,
}

impl From<Convention> for FlowRateConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::VariableRate => FlowRateConvention::VariableRate,
            Convention::ConstantRate => FlowRateConvention::ConstantRate,
        }
    }
}

/// Lateral lattice: steps `dm`, `dk` and the largest indices kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub dm: f64,
    pub dk: f64,
    pub m_max: u32,
    pub k_max: u32,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection { dm: 1.02, dk: 1.02, m_max: 1, k_max: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisSection {
    pub roots_1d: usize,
    pub roots_lateral: usize,
}

impl Default for BasisSection {
    fn default() -> Self {
        BasisSection { roots_1d: 16, roots_lateral: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub n_roots: usize,
    pub k: f64,
    pub m_window: [f64; 2],
    pub re_bracket: [f64; 2],
    pub dm_coarse: f64,
    pub m_tol: f64,
    pub re_tol: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        let d = CriticalSearch::default();
        SearchSection {
            n_roots: d.options.n_roots,
            k: d.k,
            m_window: [d.m_window.0, d.m_window.1],
            re_bracket: [d.re_bracket.0, d.re_bracket.1],
            dm_coarse: 0.01,
            m_tol: d.m_tol,
            re_tol: d.re_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Excited {
    Default,
    All,
    #[serde(untagged)]
    Indices(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    /// Time step; the stability bound of the basis when absent.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Steps between coarse samples.
    pub cadence: u64,
    /// Steps between checkpoints.
    pub checkpoint_every: u64,
    pub epsilon2: f64,
    pub excited: Excited,
    pub trajectories: usize,
    /// Explicit seeds; otherwise `seed, seed + 1, ...`.
    pub seeds: Vec<u64>,
    pub seed: u64,
    pub base_flow: BaseFlowKind,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        EvolutionSection {
            dt: None,
            t_end: 100.0,
            cadence: 100,
            checkpoint_every: 10_000,
            epsilon2: 0.04,
            excited: Excited::Default,
            trajectories: 4,
            seeds: Vec::new(),
            seed: 0,
            base_flow: BaseFlowKind::Projected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
    /// Operator cache directory; `<dir>/cache` when absent.
    pub cache: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("hydromodes-out"), format: Format::Csv, cache: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.flow_config()?;
        Cell::from_steps(self.lattice.dm, self.lattice.dk)?;
        let e = &self.evolution;
        if let Some(dt) = e.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                bail!("evolution.dt must be positive, got {dt}");
            }
        }
        if !(e.t_end >= 0.0) {
            bail!("evolution.t_end must be non-negative");
        }
        if e.cadence == 0 || e.checkpoint_every == 0 {
            bail!("evolution.cadence and evolution.checkpoint_every must be positive");
        }
        if e.trajectories == 0 {
            bail!("evolution.trajectories must be at least 1");
        }
        if !(e.epsilon2 >= 0.0) {
            bail!("evolution.epsilon2 must be non-negative");
        }
        let s = &self.search;
        if s.n_roots == 0 || !(s.m_window[0] < s.m_window[1]) || !(s.re_bracket[0] < s.re_bracket[1]) {
            bail!("search: need n_roots > 0 and increasing m_window and re_bracket");
        }
        Ok(())
    }

    pub fn flow_config(&self) -> anyhow::Result<FlowConfig> {
        Ok(FlowConfig::new(self.flow.reynolds, self.flow.slip_length)?)
    }

    pub fn cell(&self) -> anyhow::Result<Cell> {
        Ok(Cell::from_steps(self.lattice.dm, self.lattice.dk)?)
    }

    pub fn selection(&self) -> BasisSelection {
        BasisSelection::rectangle(self.lattice.m_max, self.lattice.k_max, self.basis.roots_1d, self.basis.roots_lateral)
    }

    pub fn critical_search(&self) -> CriticalSearch {
        let s = &self.search;
        CriticalSearch {
            slip_length: self.flow.slip_length,
            k: s.k,
            m_window: (s.m_window[0], s.m_window[1]),
            re_bracket: (s.re_bracket[0], s.re_bracket[1]),
            dm_coarse: s.dm_coarse,
            m_tol: s.m_tol,
            re_tol: s.re_tol,
            options: StabilityOptions { n_roots: s.n_roots, convention: self.flow.convention.into(), ..Default::default() },
        }
    }

    pub fn excited(&self) -> ExcitedSet {
        match &self.evolution.excited {
            Excited::Default => ExcitedSet::Default,
            Excited::All => ExcitedSet::All,
            Excited::Indices(v) => ExcitedSet::Indices(v.clone()),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        let e = &self.evolution;
        if e.seeds.is_empty() {
            (0..e.trajectories as u64).map(|i| e.seed.wrapping_add(i)).collect()
        } else {
            e.seeds.clone()
        }
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.output.cache.clone().unwrap_or_else(|| self.output.dir.join("cache"))
    }

    /// SHA-256 of the settings that determine a trajectory. Output paths and
    /// run-length controls are excluded so a checkpoint can be extended.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        c.evolution.t_end = 0.0;
        c.evolution.checkpoint_every = 1;
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.output.dir = PathBuf::from("elsewhere");
        assert_eq!(d.hash(), c.hash());
        d.evolution.t_end = 5e3;
        assert_eq!(d.hash(), c.hash());
        d.flow.reynolds = 5000.0;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn parses_excited_forms() {
        let c: RunConfig = toml::from_str("[evolution]\nexcited = [1, 4, 9]\n").unwrap();
        assert_eq!(c.evolution.excited, Excited::Indices(vec![1, 4, 9]));
        let c: RunConfig = toml::from_str("[evolution]\nexcited = \"all\"\n").unwrap();
        assert_eq!(c.evolution.excited, Excited::All);
        assert!(toml::from_str::<RunConfig>("[flow]\nreynold = 3\n").is_err());
    }

    #[test]
    fn seeds_follow_base() {
        let mut c = RunConfig::default();
        c.evolution.seed = 7;
        c.evolution.trajectories = 3;
        assert_eq!(c.seeds(), vec![7, 8, 9]);
        c.evolution.seeds = vec![1, 1];
        assert_eq!(c.seeds(), vec![1, 1]);
    }
}
