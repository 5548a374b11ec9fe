//! Subcommand implementations.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, ValueEnum};
use hydromodes::basis::{build_basis_with, dispersion_residual, Relation, RootOptions};
use hydromodes::diagnostics;
use hydromodes::evolution::{
    ensemble_run, evolve, sample_initial, Checkpoint, EvolveConfig, InitialSpec, Sample, StepSample, System,
    TrajectoryState,
};
use hydromodes::stability::{critical_search, critical_state_frames, neutral_curve, slip_sweep};
use hydromodes::{dispersion_roots, BasisSet, Symmetry};
use serde_json::{json, Value};

use crate::cache;
use crate::config::RunConfig;
use crate::output::{num, opt, Meta, Table, Writer};
use crate::{Cli, Command, PartialEnsemble, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    #[value(name = "1d-sym")]
    OneDSym,
    #[value(name = "1d-antisym")]
    OneDAntisym,
    #[value(name = "lateral-sym")]
    LateralSym,
    #[value(name = "lateral-antisym")]
    LateralAntisym,
}

impl Family {
    fn relation(self) -> Relation {
        match self {
            Family::OneDSym => Relation::OneD(Symmetry::Symmetric),
            Family::OneDAntisym => Relation::OneD(Symmetry::Antisymmetric),
            Family::LateralSym => Relation::Lateral(Symmetry::Symmetric),
            Family::LateralAntisym => Relation::Lateral(Symmetry::Antisymmetric),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Family::OneDSym => "1d-sym",
            Family::OneDAntisym => "1d-antisym",
            Family::LateralSym => "lateral-sym",
            Family::LateralAntisym => "lateral-antisym",
        }
    }
}

#[derive(Debug, Args)]
pub struct DispersionArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Streamwise wavenumber (lateral families only).
    #[arg(long, default_value_t = 0.0)]
    pub m: f64,
    /// Spanwise wavenumber (lateral families only).
    #[arg(long, default_value_t = 0.0)]
    pub k: f64,
    /// Number of roots.
    #[arg(long, default_value_t = 4)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct CriticalArgs {
    /// Wall-normal roots per family (overrides search.n_roots).
    #[arg(long)]
    pub n_roots: Option<usize>,
    /// Number of snapshot frames of the critical state over one period.
    #[arg(long, default_value_t = 0)]
    pub frames: usize,
    /// Frame grid as `nx,nz`.
    #[arg(long, default_value = "64,33")]
    pub frame_grid: String,
    /// File of slip lengths, one per line: run a slip sweep instead.
    #[arg(long)]
    pub ls_sweep: Option<PathBuf>,
    /// Compute the neutral curve over the default grid instead.
    #[arg(long)]
    pub neutral_curve: bool,
}

#[derive(Debug, Args)]
pub struct NeutralArgs {
    #[arg(long)]
    pub n_roots: Option<usize>,
    /// Comma-separated spanwise wavenumbers.
    #[arg(long, default_value = "0")]
    pub k_values: String,
    #[arg(long, default_value_t = 0.8)]
    pub m_min: f64,
    #[arg(long, default_value_t = 1.3)]
    pub m_max: f64,
    #[arg(long, default_value_t = 11)]
    pub m_steps: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub n_roots: Option<usize>,
    /// Comma-separated slip lengths.
    #[arg(long, conflicts_with = "file")]
    pub values: Option<String>,
    /// File of slip lengths, one per line.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Number of trajectories (overrides evolution.trajectories).
    #[arg(long, alias = "trajectories")]
    pub k_traj: Option<usize>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Points of the counter-flow profile.
    #[arg(long, default_value_t = 101)]
    pub nz: usize,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// State to export; the laminar flow when absent.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Export a single basis mode with this index instead.
    #[arg(long, conflicts_with = "checkpoint")]
    pub mode: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 16)]
    pub nx: usize,
    #[arg(long, default_value_t = 1)]
    pub ny: usize,
    #[arg(long, default_value_t = 33)]
    pub nz: usize,
}

fn apply_overrides(cli: &Cli, cfg: &mut RunConfig) {
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.evolution.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(r) = cli.re {
        cfg.flow.reynolds = r;
    }
    if let Some(l) = cli.ls {
        cfg.flow.slip_length = l;
    }
    let roots = match &cli.command {
        Command::Critical(a) => a.n_roots,
        Command::NeutralCurve(a) => a.n_roots,
        Command::SlipSweep(a) => a.n_roots,
        _ => None,
    };
    if let Some(n) = roots {
        cfg.search.n_roots = n;
    }
    let (t_end, dt) = match &cli.command {
        Command::Evolve(a) => (a.t_end, a.dt),
        Command::Ensemble(a) => (a.t_end, a.dt),
        _ => (None, None),
    };
    if let Some(t) = t_end {
        cfg.evolution.t_end = t;
    }
    if dt.is_some() {
        cfg.evolution.dt = dt;
    }
    if let Command::Ensemble(EnsembleArgs { k_traj: Some(k), .. }) = &cli.command {
        cfg.evolution.trajectories = *k;
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Dispersion(_) => "dispersion",
        Command::Basis => "basis",
        Command::Critical(_) => "critical",
        Command::NeutralCurve(_) => "neutral-curve",
        Command::SlipSweep(_) => "slip-sweep",
        Command::Evolve(_) => "evolve",
        Command::Ensemble(_) => "ensemble",
        Command::Diagnose(_) => "diagnose",
        Command::ExportField(_) => "export-field",
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    apply_overrides(&cli, &mut cfg);
    cfg.validate().map_err(|e| usage(format!("invalid configuration: {e:#}")))?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().context("configuring worker threads")?;
    }
    let name = command_name(&cli.command);
    let hash = cfg.hash();
    let w = Writer::new(&cfg.output.dir, cfg.output.format, Meta::new(name, hash.clone()))?;
    w.text("config.toml", &format!("# config_hash {hash}\n{}", cfg.to_toml()?))?;
    let started = Instant::now();
    match cli.command {
        Command::Dispersion(a) => dispersion(&cfg, &w, &a),
        Command::Basis => basis(&cfg, &w),
        Command::Critical(a) => critical(&cfg, &w, &a),
        Command::NeutralCurve(a) => neutral(&cfg, &w, &a),
        Command::SlipSweep(a) => {
            let values = match (&a.values, &a.file) {
                (Some(v), _) => parse_list(v)?,
                (None, Some(f)) => read_list(f)?,
                (None, None) => return Err(usage("slip-sweep needs --values or --file")),
            };
            sweep(&cfg, &w, &values)
        }
        Command::Evolve(a) => evolve_cmd(&cfg, &w, &a),
        Command::Ensemble(_) => ensemble(&cfg, &w),
        Command::Diagnose(a) => diagnose(&cfg, &w, &a),
        Command::ExportField(a) => export(&cfg, &w, &a),
    }?;
    log::info!("{name} finished in {:.2?}", started.elapsed());
    Ok(())
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| usage(format!("not a number: {t}"))))
        .collect()
}

fn read_list(path: &PathBuf) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    let lines: Vec<&str> = text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty()).collect();
    parse_list(&lines.join(","))
}

fn announce(path: PathBuf) {
    println!("wrote {}", path.display());
}

fn dispersion(cfg: &RunConfig, w: &Writer, a: &DispersionArgs) -> anyhow::Result<()> {
    let rel = a.family.relation();
    let nu = a.m.hypot(a.k);
    if matches!(rel, Relation::OneD(_)) && nu != 0.0 {
        return Err(usage("1D families have no lateral wavevector; drop --m/--k"));
    }
    if matches!(rel, Relation::Lateral(_)) && nu == 0.0 {
        return Err(usage("lateral families need a nonzero --m or --k"));
    }
    let ls = cfg.flow.slip_length;
    let roots = dispersion_roots(rel, nu, ls, a.n, RootOptions::default())?;
    let mut t = Table::new(&["family", "m", "k", "n", "mu", "lambda", "residual"]);
    for (i, mu) in roots.iter().enumerate() {
        t.push(vec![
            json!(a.family.name()),
            num(a.m),
            num(a.k),
            json!(i + 1),
            num(*mu),
            num((mu * mu + nu * nu) / cfg.flow.reynolds),
            num(dispersion_residual(rel, nu, ls, *mu)),
        ]);
        println!("{} {} {:.12}", a.family.name(), i + 1, mu);
    }
    announce(w.table("dispersion", &t)?);
    Ok(())
}

fn build(cfg: &RunConfig, gram: bool) -> anyhow::Result<BasisSet> {
    Ok(build_basis_with(&cfg.flow_config()?, &cfg.cell()?, &cfg.selection(), gram)?)
}

fn basis(cfg: &RunConfig, w: &Writer) -> anyhow::Result<()> {
    let b = build(cfg, true)?;
    let w = w.with_basis(b.checksum());
    announce(w.text("basis.json", &b.to_json()?)?);
    let mut t = Table::new(&["index", "family", "m_index", "k_index", "o_x", "o_y", "n", "mu", "lambda"]);
    for (i, m) in b.modes.iter().enumerate() {
        t.push(vec![
            json!(i),
            json!(m.key.family_label()),
            json!(m.key.m_index),
            json!(m.key.k_index),
            json!(m.key.o_x),
            json!(m.key.o_y),
            json!(m.key.mu_index),
            num(m.mu),
            num(m.lambda),
        ]);
    }
    announce(w.table("modes", &t)?);
    println!("{} modes, checksum {}, Gram deviation {:.2e}", b.len(), b.checksum(), b.gram.max_deviation());
    Ok(())
}

fn critical(cfg: &RunConfig, w: &Writer, a: &CriticalArgs) -> anyhow::Result<()> {
    if let Some(f) = &a.ls_sweep {
        return sweep(cfg, w, &read_list(f)?);
    }
    if a.neutral_curve {
        let n = NeutralArgs { n_roots: None, k_values: "0,0.25,0.5".into(), m_min: 0.8, m_max: 1.3, m_steps: 11 };
        return neutral(cfg, w, &n);
    }
    let started = Instant::now();
    let state = critical_search(&cfg.critical_search())?;
    let data = json!({
        "reynolds": state.reynolds,
        "m": state.m,
        "k": state.k,
        "growth": state.growth,
        "frequency": state.frequency,
        "period": state.period,
        "slip_length": state.slip_length,
        "n_roots": state.n_roots,
        "search": cfg.search,
        "runtime_seconds": started.elapsed().as_secs_f64(),
        "state": state,
    });
    announce(w.json("critical", &data)?);
    println!("Re_c {:.4} m_c {:.6} Im(sigma) {:.6}", state.reynolds, state.m, state.frequency);
    if a.frames > 0 {
        let grid: Vec<usize> = a
            .frame_grid
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| usage(format!("bad --frame-grid {}", a.frame_grid))))
            .collect::<anyhow::Result<_>>()?;
        if grid.len() != 2 {
            return Err(usage("--frame-grid takes nx,nz"));
        }
        let frames = critical_state_frames(&state, (grid[0], grid[1]), a.frames)?;
        let mut t = Table::new(&["frame", "t", "x", "z", "u_x", "u_z", "vorticity"]);
        for (i, f) in frames.iter().enumerate() {
            for p in &f.points {
                t.push(vec![json!(i), num(f.t), num(p.x), num(p.z), num(p.u_x), num(p.u_z), num(p.vorticity)]);
            }
        }
        announce(w.table("frames", &t)?);
    }
    Ok(())
}

fn neutral(cfg: &RunConfig, w: &Writer, a: &NeutralArgs) -> anyhow::Result<()> {
    if a.m_steps < 2 || !(a.m_min > 0.0 && a.m_max > a.m_min) {
        return Err(usage("need 0 < m_min < m_max and m_steps >= 2"));
    }
    let ks = parse_list(&a.k_values)?;
    let mut wv = Vec::new();
    for &k in &ks {
        for i in 0..a.m_steps {
            wv.push((a.m_min + (a.m_max - a.m_min) * i as f64 / (a.m_steps - 1) as f64, k));
        }
    }
    let s = cfg.critical_search();
    let pts = neutral_curve(&wv, s.slip_length, s.re_bracket, s.re_tol, &s.options)?;
    let mut t = Table::new(&["m", "k", "reynolds"]);
    for p in &pts {
        t.push(vec![num(p.m), num(p.k), opt(p.reynolds)]);
    }
    announce(w.table("neutral_curve", &t)?);
    Ok(())
}

fn sweep(cfg: &RunConfig, w: &Writer, values: &[f64]) -> anyhow::Result<()> {
    if values.is_empty() || values.iter().any(|v| !(*v >= 0.0)) {
        return Err(usage("slip lengths must be a non-empty list of non-negative numbers"));
    }
    let pts = slip_sweep(values, &cfg.critical_search())?;
    let mut t = Table::new(&["slip_length", "reynolds", "m", "frequency"]);
    for p in &pts {
        t.push(vec![num(p.slip_length), num(p.reynolds), num(p.m), num(p.frequency)]);
    }
    announce(w.table("slip_sweep", &t)?);
    Ok(())
}

fn system(cfg: &RunConfig) -> anyhow::Result<(System, f64)> {
    let b = build(cfg, false)?;
    let sys = cache::system(b, cfg.evolution.base_flow, &cfg.cache_dir())?;
    let dt = cfg.evolution.dt.unwrap_or_else(|| sys.default_dt());
    Ok((sys, dt))
}

fn series_tables(samples: &[Sample], steps: &[StepSample], energy0: f64) -> (Table, Table) {
    let families: Vec<String> = samples.first().map(|s| s.shares.keys().cloned().collect()).unwrap_or_default();
    let share_cols: Vec<String> = families.iter().map(|f| format!("share_{f}")).collect();
    let mut cols = vec!["t", "Q", "Q_ratio", "E", "E_perturbation", "W_p", "W_d", "ledger_gap", "norm"];
    cols.extend(share_cols.iter().map(String::as_str));
    let mut series = Table::new(&cols);
    let mut forces = Table::new(&["t", "F_inertial", "F_boundary", "slope_bottom", "slope_top"]);
    let mut fine = steps.iter().peekable();
    for s in samples {
        while fine.peek().is_some_and(|f| f.t < s.t) {
            fine.next();
        }
        let Some(f) = fine.peek() else { break };
        let mut row = vec![
            num(s.t),
            num(s.flow_rate),
            num(s.flow_ratio),
            num(s.energy),
            num(s.perturbation_energy),
            num(s.power),
            num(s.dissipation),
            num(s.energy - energy0 - f.work),
            num(s.norm),
        ];
        row.extend(families.iter().map(|k| num(*s.shares.get(k).unwrap_or(&0.0))));
        series.push(row);
        forces.push(vec![num(s.t), num(f.inertial_force), num(f.boundary_force), num(s.slope_bottom), num(s.slope_top)]);
    }
    (series, forces)
}

fn ledger_table(steps: &[StepSample]) -> anyhow::Result<Table> {
    let t: Vec<f64> = steps.iter().map(|s| s.t).collect();
    let e: Vec<f64> = steps.iter().map(|s| s.energy).collect();
    let p: Vec<f64> = steps.iter().map(|s| s.power).collect();
    let d: Vec<f64> = steps.iter().map(|s| s.dissipation).collect();
    let mut table = Table::new(&["t", "E", "W_p", "W_d", "dE_dt", "residual", "work"]);
    if steps.len() < 2 {
        return Ok(table);
    }
    for (l, s) in diagnostics::energy_ledger(&t, &e, &p, &d)?.iter().zip(steps) {
        table.push(vec![num(l.t), num(l.energy), num(l.power), num(l.dissipation), num(l.d_energy_dt), num(l.residual), num(s.work)]);
    }
    Ok(table)
}

fn checkpoint_of(cfg: &RunConfig, sys: &System, pos: u128, energy0: f64, state: &TrajectoryState) -> Checkpoint {
    Checkpoint {
        version: hydromodes::VERSION.into(),
        config_hash: cfg.hash(),
        basis_checksum: sys.basis.checksum(),
        rng_word_pos: pos,
        initial_energy: energy0,
        state: state.clone(),
    }
}

fn read_checkpoint(path: &PathBuf) -> anyhow::Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("reading {}: {e}", path.display())))?;
    Checkpoint::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn evolve_cmd(cfg: &RunConfig, w: &Writer, a: &EvolveArgs) -> anyhow::Result<()> {
    let (sys, dt) = system(cfg)?;
    let w = w.with_basis(sys.basis.checksum());
    let e = &cfg.evolution;
    let (mut state, pos, energy0) = match &a.resume {
        Some(path) => {
            let ck = read_checkpoint(path)?;
            ck.verify(&cfg.hash(), &sys.basis).map_err(|err| usage(format!("{}: {err}", path.display())))?;
            (ck.state, ck.rng_word_pos, ck.initial_energy)
        }
        None => {
            let spec = InitialSpec { epsilon2: e.epsilon2, seed: e.seed, excited: cfg.excited() };
            let (c, pos) = sample_initial(&spec, &sys.basis)?;
            let energy0 = diagnostics::kinetic_energy(&sys.total(&c));
            (TrajectoryState::new(c, dt, e.seed)?, pos, energy0)
        }
    };
    let total = (e.t_end / state.dt).round() as u64;
    let mut steps: Vec<StepSample> = Vec::new();
    let mut samples: Vec<Sample> = Vec::new();
    let ck_path = w.dir.join("checkpoint.json");
    let mut failure = None;
    loop {
        let target = (state.step + e.checkpoint_every).min(total).max(state.step);
        let run = EvolveConfig { t_end: target as f64 * state.dt, cadence: e.cadence };
        match evolve(&sys, state.clone(), &run) {
            Ok(tr) => {
                // chunks share their boundary state
                let skip = usize::from(!steps.is_empty());
                steps.extend_from_slice(&tr.steps[skip..]);
                let dup = samples.last().map(|s| s.t) == tr.samples.first().map(|s| s.t);
                samples.extend_from_slice(&tr.samples[usize::from(dup)..]);
                state = tr.state;
            }
            Err(err) => failure = Some(err),
        }
        std::fs::write(&ck_path, checkpoint_of(cfg, &sys, pos, energy0, &state).to_json()?)?;
        if failure.is_some() || state.step >= total {
            break;
        }
    }
    announce(ck_path);
    if let Some(err) = failure {
        if steps.is_empty() {
            return Err(err.into());
        }
        log::error!("integration stopped at t = {}: {err}", state.t);
        write_evolution(&w, &sys, &state, &steps, &samples, energy0)?;
        return Err(err.into());
    }
    write_evolution(&w, &sys, &state, &steps, &samples, energy0)
}

fn write_evolution(
    w: &Writer,
    sys: &System,
    state: &TrajectoryState,
    steps: &[StepSample],
    samples: &[Sample],
    energy0: f64,
) -> anyhow::Result<()> {
    let (series, forces) = series_tables(samples, steps, energy0);
    announce(w.table("series", &series)?);
    announce(w.table("forces", &forces)?);
    announce(w.table("ledger", &ledger_table(steps)?)?);
    let z: Vec<f64> = (0..=100).map(|i| -1.0 + i as f64 / 50.0).collect();
    let prof = diagnostics::counter_flow_profile(&sys.basis, &state.c, &z)?;
    let mut pt = Table::new(&["z", "v_x"]);
    for (z, v) in prof.z.iter().zip(&prof.velocity) {
        pt.push(vec![num(*z), num(*v)]);
    }
    announce(w.table("profile", &pt)?);
    announce(w.json("summary", &summary(steps, samples, energy0))?);
    Ok(())
}

fn summary(steps: &[StepSample], samples: &[Sample], energy0: f64) -> Value {
    let n = steps.len();
    let half = &steps[n / 2..];
    let avg = |f: &dyn Fn(&StepSample) -> f64| half.iter().map(f).sum::<f64>() / half.len() as f64;
    let mut abs_work = 0.0;
    let mut gap: f64 = 0.0;
    for win in steps.windows(2) {
        let (p, q) = (&win[0], &win[1]);
        abs_work += 0.5 * (q.t - p.t) * ((p.power - p.dissipation).abs() + (q.power - q.dissipation).abs());
        let de = q.energy - steps[0].energy;
        let den = de.abs().max(abs_work);
        if den > 0.0 {
            gap = gap.max((de - (q.work - steps[0].work)).abs() / den);
        }
    }
    let last = samples.last();
    json!({
        "t_start": steps[0].t,
        "t_end": steps[n - 1].t,
        "initial_energy": energy0,
        "final_flow_ratio": last.map(|s| s.flow_ratio),
        "max_ledger_relative_gap": gap,
        "max_force_mismatch": steps.iter().map(|s| (s.inertial_force - s.boundary_force).abs()).fold(0.0, f64::max),
        "window_mean_inertial_force": avg(&|s| s.inertial_force),
        "window_mean_boundary_force": avg(&|s| s.boundary_force),
    })
}

fn ensemble(cfg: &RunConfig, w: &Writer) -> anyhow::Result<()> {
    let (sys, dt) = system(cfg)?;
    let w = w.with_basis(sys.basis.checksum());
    let e = &cfg.evolution;
    let seeds = cfg.seeds();
    let spec = InitialSpec { epsilon2: e.epsilon2, seed: e.seed, excited: cfg.excited() };
    let run = EvolveConfig { t_end: e.t_end, cadence: e.cadence };
    let res = ensemble_run(&sys, &spec, &seeds, dt, &run)?;
    let q0 = sys.base.flow_rate();
    let mut t = Table::new(&["t", "Q", "Q_ratio", "E"]);
    for (time, q, en) in &res.mean {
        t.push(vec![num(*time), num(*q), num(q / q0), num(*en)]);
    }
    announce(w.table("ensemble", &t)?);
    for (i, m) in res.members.iter().enumerate() {
        if let Some(tr) = &m.trajectory {
            let e0 = tr.steps[0].energy;
            let (series, _) = series_tables(&tr.samples, &tr.steps, e0);
            announce(w.table(&format!("member-{i:02}-seed-{}", m.seed), &series)?);
        }
    }
    let status: Vec<Value> = res.members.iter().map(|m| json!({ "seed": m.seed, "error": m.error })).collect();
    announce(w.json("ensemble_summary", &json!({ "completed": res.completed, "members": status, "dt": dt }))?);
    if res.is_partial() {
        return Err(PartialEnsemble(res.completed, res.members.len()).into());
    }
    Ok(())
}

fn load_state(cfg: &RunConfig, path: &PathBuf) -> anyhow::Result<(BasisSet, Checkpoint)> {
    let ck = read_checkpoint(path)?;
    let b = build(cfg, false)?;
    if ck.basis_checksum != b.checksum() || ck.state.c.len() != b.len() {
        return Err(usage(format!("{} was written for a different basis", path.display())));
    }
    if ck.config_hash != cfg.hash() {
        log::warn!("checkpoint config hash {} differs from the current configuration", ck.config_hash);
    }
    Ok((b, ck))
}

fn diagnose(cfg: &RunConfig, w: &Writer, a: &DiagnoseArgs) -> anyhow::Result<()> {
    if a.nz < 2 {
        return Err(usage("--nz must be at least 2"));
    }
    let (b, ck) = load_state(cfg, &a.checkpoint)?;
    let w = w.with_basis(b.checksum());
    let base = hydromodes::poiseuille(&b.cfg);
    let c = &ck.state.c;
    let expansion = hydromodes::projection::expand_poiseuille(&b, &base)?;
    let total: Vec<f64> = c.iter().zip(&expansion.coefficients).map(|(x, y)| x + y).collect();
    let z: Vec<f64> = (0..a.nz).map(|i| -1.0 + 2.0 * i as f64 / (a.nz - 1) as f64).collect();
    let prof = diagnostics::counter_flow_profile(&b, c, &z)?;
    let q = diagnostics::net_flow_rate(&b, &base, c)?;
    let f0 = diagnostics::reference_force(&b);
    let data = json!({
        "t": ck.state.t,
        "flow_rate": q,
        "flow_ratio": q / base.flow_rate(),
        "energy": diagnostics::kinetic_energy(&total),
        "perturbation_energy": diagnostics::kinetic_energy(c),
        "power": diagnostics::power_input(&b, &base, &total)?,
        "dissipation": diagnostics::dissipation(&b, &total)?,
        "boundary_force": diagnostics::boundary_force(&b, c)? / f0,
        "slope_bottom": prof.slope_bottom,
        "slope_top": prof.slope_top,
        "counter_flow_terms": prof.components,
        "shares": diagnostics::family_shares(&b, c)?,
    });
    announce(w.json("diagnostics", &data)?);
    let mut t = Table::new(&["z", "v_x"]);
    for (z, v) in prof.z.iter().zip(&prof.velocity) {
        t.push(vec![num(*z), num(*v)]);
    }
    announce(w.table("profile", &t)?);
    Ok(())
}

fn export(cfg: &RunConfig, w: &Writer, a: &ExportArgs) -> anyhow::Result<()> {
    if a.nx == 0 || a.ny == 0 || a.nz < 2 {
        return Err(usage("grid needs nx, ny >= 1 and nz >= 2"));
    }
    let (b, c) = match (&a.checkpoint, a.mode) {
        (Some(p), _) => {
            let (b, ck) = load_state(cfg, p)?;
            (b, ck.state.c)
        }
        (None, mode) => {
            let b = build(cfg, false)?;
            let mut c = vec![0.0; b.len()];
            if let Some(i) = mode {
                if i >= b.len() {
                    return Err(usage(format!("mode {i} out of range (basis has {} modes)", b.len())));
                }
                c[i] = a.amplitude;
            }
            (b, c)
        }
    };
    let w = w.with_basis(b.checksum());
    let base = hydromodes::poiseuille(&b.cfg);
    let (lx, ly) = (b.cell.half_length, b.cell.half_width);
    let xs: Vec<f64> = (0..a.nx).map(|i| -lx + 2.0 * lx * i as f64 / a.nx as f64).collect();
    let ys: Vec<f64> = (0..a.ny).map(|i| -ly + 2.0 * ly * i as f64 / a.ny as f64).collect();
    let zs: Vec<f64> = (0..a.nz).map(|i| -1.0 + 2.0 * i as f64 / (a.nz - 1) as f64).collect();
    let grid = diagnostics::field_export(&b, &base, &c, &xs, &ys, &zs)?;
    let mut t = Table::new(&["x", "y", "z", "u_x", "u_y", "u_z", "omega_x", "omega_y", "omega_z"]);
    for p in &grid {
        t.push(vec![
            num(p.x),
            num(p.y),
            num(p.z),
            num(p.velocity[0]),
            num(p.velocity[1]),
            num(p.velocity[2]),
            num(p.vorticity[0]),
            num(p.vorticity[1]),
            num(p.vorticity[2]),
        ]);
    }
    announce(w.table("field", &t)?);
    Ok(())
}
