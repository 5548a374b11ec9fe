//! Linear stability of the laminar flow: block spectra, neutral Reynolds
//! numbers, critical-state searches and sweeps.

use nalgebra::{Complex, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{
    build_basis_with, build_mode, BasisSelection, BasisSet, Cell, FlowConfig, FlowRateConvention, ModeKey,
    PoiseuilleField, Symmetry,
};
use crate::error::{Error, Result};
use crate::operators::{assemble_linear, BaseFlow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityOptions {
    /// Wall-normal roots per family.
    pub n_roots: usize,
    pub convention: FlowRateConvention,
    pub symmetries: Vec<Symmetry>,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            n_roots: 64,
            convention: FlowRateConvention::VariableRate,
            symmetries: vec![Symmetry::Antisymmetric, Symmetry::Symmetric],
        }
    }
}

/// One decoupled sub-block: fixed symmetry, both x-phases.
#[derive(Debug, Clone)]
pub struct SubBlock {
    pub symmetry: Symmetry,
    pub indices: Vec<usize>,
    pub advective: DMatrix<f64>,
    pub wavenumber_sq: Vec<f64>,
}

impl SubBlock {
    pub fn matrix(&self, reynolds: f64) -> DMatrix<f64> {
        let mut a = self.advective.clone();
        for i in 0..a.nrows() {
            a[(i, i)] -= self.wavenumber_sq[i] / reynolds;
        }
        a
    }
}

/// The projected operator at a single lateral wavevector `(m, k)`.
///
/// For `k > 0` only the `o_y = 0` partners are kept; the `o_y = 1` set is a
/// spanwise translate with the same spectrum.
#[derive(Debug, Clone)]
pub struct WavevectorProblem {
    pub m: f64,
    pub k: f64,
    pub slip_length: f64,
    pub options: StabilityOptions,
    pub basis: BasisSet,
    pub blocks: Vec<SubBlock>,
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues of every sub-block, concatenated.
    pub eigenvalues: Vec<Complex64>,
    pub leading: Complex64,
    pub leading_block: usize,
}

impl WavevectorProblem {
    pub fn new(m: f64, k: f64, slip_length: f64, options: &StabilityOptions) -> Result<Self> {
        if !(m >= 0.0 && k >= 0.0 && m.is_finite() && k.is_finite()) || (m == 0.0 && k == 0.0) {
            return Err(Error::InvalidParameter(format!("wavevector ({m}, {k})")));
        }
        if options.n_roots == 0 {
            return Err(Error::InvalidParameter("n_roots must be positive".into()));
        }
        // Reynolds number is irrelevant for the advective part.
        let cfg = FlowConfig::new(1.0, slip_length)?;
        let cell = Cell::from_steps(if m > 0.0 { m } else { 1.0 }, if k > 0.0 { k } else { 1.0 })?;
        let lattice = (u32::from(m > 0.0), u32::from(k > 0.0));
        let mut sel = BasisSelection::full(vec![lattice], 0, options.n_roots);
        sel.symmetries = options.symmetries.clone();
        sel.y_phases = vec![0];
        let basis = build_basis_with(&cfg, &cell, &sel, false)?;
        let field = PoiseuilleField::with_convention(&cfg, options.convention);
        let op = assemble_linear(&basis, &BaseFlow::Exact(field))?;
        let block = op
            .blocks
            .into_iter()
            .find(|b| b.lattice == lattice)
            .ok_or_else(|| Error::InvalidParameter("empty stability block".into()))?;
        let n = block.size();
        let full = DMatrix::from_row_slice(n, n, &block.advective);
        let mut blocks = Vec::new();
        for &s in &options.symmetries {
            let local: Vec<usize> = (0..n).filter(|&i| basis.modes[block.indices[i]].key.symmetry == s).collect();
            if local.is_empty() {
                continue;
            }
            let advective = DMatrix::from_fn(local.len(), local.len(), |r, c| full[(local[r], local[c])]);
            blocks.push(SubBlock {
                symmetry: s,
                indices: local.iter().map(|&i| block.indices[i]).collect(),
                advective,
                wavenumber_sq: local.iter().map(|&i| block.wavenumber_sq[i]).collect(),
            });
        }
        Ok(WavevectorProblem { m, k, slip_length, options: options.clone(), basis, blocks })
    }

    pub fn spectrum(&self, reynolds: f64) -> Result<Spectrum> {
        if !(reynolds > 0.0 && reynolds.is_finite()) {
            return Err(Error::InvalidParameter(format!("Reynolds number {reynolds}")));
        }
        let mut eigenvalues = Vec::new();
        let mut leading = Complex64::new(f64::NEG_INFINITY, 0.0);
        let mut leading_block = 0;
        for (b, block) in self.blocks.iter().enumerate() {
            let ev = block.matrix(reynolds).complex_eigenvalues();
            for z in ev.iter() {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::Eigensolver("non-finite eigenvalue".into()));
                }
                // ties broken towards the negative imaginary part for determinism
                if z.re > leading.re || (z.re == leading.re && z.im < leading.im) {
                    leading = *z;
                    leading_block = b;
                }
                eigenvalues.push(*z);
            }
        }
        Ok(Spectrum { eigenvalues, leading, leading_block })
    }

    pub fn max_growth(&self, reynolds: f64) -> Result<Complex64> {
        Ok(self.spectrum(reynolds)?.leading)
    }

    /// Leading eigenpair; the eigenvector is over `blocks[b].indices`, unit
    /// norm, with its largest entry real and positive.
    pub fn leading_mode(&self, reynolds: f64) -> Result<(Complex64, usize, Vec<Complex64>)> {
        let spec = self.spectrum(reynolds)?;
        let block = &self.blocks[spec.leading_block];
        let v = inverse_iteration(&block.matrix(reynolds), spec.leading)?;
        Ok((spec.leading, spec.leading_block, v))
    }
}

fn inverse_iteration(a: &DMatrix<f64>, sigma: Complex64) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let shift = sigma + Complex64::new(1e-10 * (1.0 + sigma.norm()), 0.0);
    let mut m: DMatrix<Complex<f64>> = a.map(|x| Complex::new(x, 0.0));
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut v = DVector::from_element(n, Complex::new(1.0, 0.0));
    for _ in 0..4 {
        let w = lu
            .solve(&v)
            .ok_or_else(|| Error::Eigensolver("singular shifted matrix".into()))?;
        let norm = w.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Eigensolver("inverse iteration diverged".into()));
        }
        v = w / Complex::new(norm, 0.0);
    }
    let big = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let phase = v[big] / Complex::new(v[big].norm(), 0.0);
    Ok(v.iter().map(|x| x / phase).collect())
}

/// Growth rate (real part) and frequency of the least stable eigenvalue.
pub fn max_growth(reynolds: f64, m: f64, k: f64, slip_length: f64, options: &StabilityOptions) -> Result<Complex64> {
    WavevectorProblem::new(m, k, slip_length, options)?.max_growth(reynolds)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neutral {
    /// Growth changes sign at this Reynolds number.
    At(f64),
    /// Stable throughout the bracket.
    Stable,
    /// Already unstable at the lower end.
    Unstable,
}

/// Reynolds number at which the leading growth rate crosses zero, located by
/// an Illinois-modified false position inside `bracket`.
pub fn neutral_reynolds(problem: &WavevectorProblem, bracket: (f64, f64), tol: f64) -> Result<Neutral> {
    let (mut a, mut b) = bracket;
    if !(a > 0.0 && b > a) {
        return Err(Error::InvalidParameter(format!("Reynolds bracket {bracket:?}")));
    }
    let g = |re: f64| problem.max_growth(re).map(|z| z.re);
    let mut fa = g(a)?;
    let mut fb = g(b)?;
    if fa > 0.0 {
        return Ok(Neutral::Unstable);
    }
    if fb < 0.0 {
        return Ok(Neutral::Stable);
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = g(c)?;
        if fc == 0.0 {
            return Ok(Neutral::At(c));
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    Ok(Neutral::At((a * fb - b * fa) / (fb - fa)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSearch {
    pub slip_length: f64,
    pub k: f64,
    pub m_window: (f64, f64),
    pub re_bracket: (f64, f64),
    pub dm_coarse: f64,
    pub m_tol: f64,
    pub re_tol: f64,
    pub options: StabilityOptions,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        CriticalSearch {
            slip_length: 0.0,
            k: 0.0,
            m_window: (0.95, 1.10),
            re_bracket: (4000.0, 8000.0),
            dm_coarse: 0.001,
            m_tol: 1e-5,
            re_tol: 1e-4,
            options: StabilityOptions::default(),
        }
    }
}

/// Serializable record of one mode of the critical eigenvector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenComponent {
    pub key: ModeKey,
    pub mu: f64,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalState {
    pub slip_length: f64,
    pub convention: FlowRateConvention,
    pub n_roots: usize,
    pub reynolds: f64,
    pub m: f64,
    pub k: f64,
    pub growth: f64,
    pub frequency: f64,
    /// `2 pi / |Imag sigma|`.
    pub period: f64,
    pub eigenvector: Vec<EigenComponent>,
    /// Neutral Reynolds number at each coarse wavenumber, `None` when stable.
    pub coarse_scan: Vec<(f64, Option<f64>)>,
}

fn neutral_at(m: f64, search: &CriticalSearch) -> Result<Option<f64>> {
    let p = WavevectorProblem::new(m, search.k, search.slip_length, &search.options)?;
    match neutral_reynolds(&p, search.re_bracket, search.re_tol)? {
        Neutral::At(re) => Ok(Some(re)),
        Neutral::Stable => Ok(None),
        Neutral::Unstable => Err(Error::CriticalBracket {
            lo: search.re_bracket.0,
            hi: search.re_bracket.1,
            detail: format!("already unstable at m = {m}"),
        }),
    }
}

/// Minimizes the neutral Reynolds number over `m` in the window: coarse
/// scan, then golden-section refinement around the best coarse point.
pub fn critical_search(search: &CriticalSearch) -> Result<CriticalState> {
    let (lo, hi) = search.m_window;
    if !(lo > 0.0 && hi > lo && search.dm_coarse > 0.0) {
        return Err(Error::InvalidParameter(format!("m window {:?}", search.m_window)));
    }
    let steps = ((hi - lo) / search.dm_coarse).round().max(2.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect();
    let scan: Vec<(f64, Option<f64>)> = grid
        .par_iter()
        .map(|&m| neutral_at(m, search).map(|r| (m, r)))
        .collect::<Result<_>>()?;
    let best = scan
        .iter()
        .enumerate()
        .filter_map(|(i, (_, r))| r.map(|r| (i, r)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::CriticalBracket {
            lo: search.re_bracket.0,
            hi: search.re_bracket.1,
            detail: "stable at every coarse wavenumber".into(),
        })?
        .0;
    if best == 0 || best == grid.len() - 1 {
        return Err(Error::CriticalBracket {
            lo: search.re_bracket.0,
            hi: search.re_bracket.1,
            detail: format!("minimum at the edge of the m window (m = {})", grid[best]),
        });
    }

    let f = |m: f64| -> Result<f64> { neutral_at(m, search)?.ok_or_else(|| Error::NonConvergence(format!("stable at m = {m}"))) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > search.m_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let (m_c, re_c) = if fc < fd { (c, fc) } else { (d, fd) };
    let problem = WavevectorProblem::new(m_c, search.k, search.slip_length, &search.options)?;
    let (sigma, b_idx, v) = problem.leading_mode(re_c)?;
    let block = &problem.blocks[b_idx];
    let eigenvector = block
        .indices
        .iter()
        .zip(&v)
        .map(|(&i, z)| EigenComponent { key: problem.basis.modes[i].key, mu: problem.basis.modes[i].mu, re: z.re, im: z.im })
        .collect();
    Ok(CriticalState {
        slip_length: search.slip_length,
        convention: search.options.convention,
        n_roots: search.options.n_roots,
        reynolds: re_c,
        m: m_c,
        k: search.k,
        growth: sigma.re,
        frequency: sigma.im,
        period: 2.0 * std::f64::consts::PI / sigma.im.abs(),
        eigenvector,
        coarse_scan: scan,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeutralPoint {
    pub m: f64,
    pub k: f64,
    pub reynolds: Option<f64>,
}

/// Neutral Reynolds number at each `(m, k)`.
pub fn neutral_curve(
    wavevectors: &[(f64, f64)],
    slip_length: f64,
    re_bracket: (f64, f64),
    re_tol: f64,
    options: &StabilityOptions,
) -> Result<Vec<NeutralPoint>> {
    wavevectors
        .par_iter()
        .map(|&(m, k)| {
            let p = WavevectorProblem::new(m, k, slip_length, options)?;
            let reynolds = match neutral_reynolds(&p, re_bracket, re_tol)? {
                Neutral::At(r) => Some(r),
                Neutral::Stable => None,
                Neutral::Unstable => Some(re_bracket.0),
            };
            Ok(NeutralPoint { m, k, reynolds })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlipPoint {
    pub slip_length: f64,
    pub reynolds: f64,
    pub m: f64,
    pub frequency: f64,
}

/// Critical state for each slip length, under the convention in `base`.
pub fn slip_sweep(slip_lengths: &[f64], base: &CriticalSearch) -> Result<Vec<SlipPoint>> {
    slip_lengths
        .iter()
        .map(|&ls| {
            let s = CriticalSearch { slip_length: ls, ..base.clone() };
            let c = critical_search(&s)?;
            Ok(SlipPoint { slip_length: ls, reynolds: c.reynolds, m: c.m, frequency: c.frequency })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FramePoint {
    pub x: f64,
    pub z: f64,
    pub u_x: f64,
    pub u_z: f64,
    /// Spanwise vorticity `du_x/dz - du_z/dx`.
    pub vorticity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t: f64,
    pub points: Vec<FramePoint>,
}

/// Snapshots of `Re[exp(sigma t) v]` over one period on an `nx` by `nz` grid
/// spanning one streamwise wavelength at `y = 0`.
pub fn critical_state_frames(state: &CriticalState, grid: (usize, usize), n_frames: usize) -> Result<Vec<Frame>> {
    let (nx, nz) = grid;
    if nx < 2 || nz < 2 || n_frames == 0 {
        return Err(Error::InvalidParameter("frame grid too small".into()));
    }
    let cfg = FlowConfig::new(state.reynolds, state.slip_length)?;
    let cell = Cell::from_steps(state.m, if state.k > 0.0 { state.k } else { 1.0 })?;
    let modes = state
        .eigenvector
        .iter()
        .map(|e| build_mode(e.key, e.mu, &cfg, &cell).map(|m| (m, Complex64::new(e.re, e.im))))
        .collect::<Result<Vec<_>>>()?;
    let sigma = Complex64::new(state.growth, state.frequency);
    let wavelength = 2.0 * cell.half_length;
    let mut frames = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let t = state.period * f as f64 / n_frames as f64;
        let e = (sigma * t).exp();
        let mut points = Vec::with_capacity(nx * nz);
        for iz in 0..nz {
            let z = -1.0 + 2.0 * iz as f64 / (nz - 1) as f64;
            for ix in 0..nx {
                let x = -cell.half_length + wavelength * ix as f64 / nx as f64;
                let mut ux = Complex64::new(0.0, 0.0);
                let mut uz = ux;
                let mut w = ux;
                for (mode, v) in &modes {
                    let a = v * e;
                    if let Some(c) = &mode.velocity[0] {
                        ux += a * c.eval(x, 0.0, z);
                        w += a * c.d_dz().eval(x, 0.0, z);
                    }
                    if let Some(c) = &mode.velocity[2] {
                        uz += a * c.eval(x, 0.0, z);
                        w -= a * c.d_dx().eval(x, 0.0, z);
                    }
                }
                points.push(FramePoint { x, z, u_x: ux.re, u_z: uz.re, vorticity: w.re });
            }
        }
        frames.push(Frame { t, points });
    }
    Ok(frames)
}
