//! Simulation driver: CFL-adaptive time stepping, fractional-step source
//! terms and frame output.
//!
//! Each step fills ghost cells, advances the hyperbolic part with the
//! selected scheme and then the source term. Steps whose Courant number
//! exceeds `cfl_max` (or that produce an invalid state) are redone from a
//! snapshot with a smaller `dt`.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::classic::{self, ClassicConfig};
use crate::error::{Error, Result};
use crate::geometry::{apply_bcs, BoundarySpec, CellGeom, Dimension, Patch, State};
use crate::riemann::RiemannSolver;
use crate::sharpclaw::{self, SharpClawConfig};

/// Pointwise source `s(q, aux, x, t)` written into the last argument.
pub type SourceFn = Arc<dyn Fn(&[f64], &[f64], [f64; 2], f64, &mut [f64]) -> Result<(), String> + Send + Sync>;

/// Cell initializer for `q` or `aux`.
pub type InitFn = Arc<dyn Fn(&CellGeom, &mut [f64]) + Send + Sync>;

/// Everything that defines a problem independently of the numerical method.
///
/// Fluxes come from the Riemann solver's [`RiemannSolver::flux`].
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub dims: Vec<Dimension>,
    pub num_eqn: usize,
    pub num_aux: usize,
    pub capacity_index: Option<usize>,
    pub riemann: Arc<dyn RiemannSolver>,
    pub source: Option<SourceFn>,
    pub bc: BoundarySpec,
    pub initial: InitFn,
    pub aux_init: Option<InitFn>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dims", &self.dims)
            .field("num_eqn", &self.num_eqn)
            .field("num_aux", &self.num_aux)
            .field("source", &self.source.is_some())
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(
        name: impl Into<String>,
        dims: Vec<Dimension>,
        riemann: Arc<dyn RiemannSolver>,
        bc: BoundarySpec,
        initial: InitFn,
    ) -> Self {
        Self {
            name: name.into(),
            num_eqn: riemann.num_eqn(),
            num_aux: riemann.num_aux(),
            dims,
            capacity_index: None,
            riemann,
            source: None,
            bc,
            initial,
            aux_init: None,
        }
    }

    pub fn with_source(mut self, source: SourceFn) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_aux(mut self, num_aux: usize, init: InitFn) -> Self {
        self.num_aux = num_aux;
        self.aux_init = Some(init);
        self
    }

    pub fn with_capacity_index(mut self, index: usize) -> Self {
        self.capacity_index = Some(index);
        self
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        let rs = &self.riemann;
        if rs.num_eqn() != self.num_eqn {
            return Err(Error::Config(format!(
                "Riemann solver expects {} equations, problem has {}",
                rs.num_eqn(),
                self.num_eqn
            )));
        }
        if rs.num_aux() > self.num_aux {
            return Err(Error::Config(format!(
                "Riemann solver reads {} aux fields, problem has {}",
                rs.num_aux(),
                self.num_aux
            )));
        }
        if rs.rank() != self.rank() || self.bc.rank() != self.rank() {
            return Err(Error::Config(format!(
                "rank mismatch: domain {}, solver {}, boundary spec {}",
                self.rank(),
                rs.rank(),
                self.bc.rank()
            )));
        }
        if self.num_aux > 0 && self.aux_init.is_none() {
            return Err(Error::Config("aux fields declared without an initializer".into()));
        }
        Ok(())
    }

    /// State on the given dimensions (the full domain or a tile of it) with
    /// `q` and `aux` initialized on interior cells. Ghosts are left unset.
    pub fn init_state(&self, dims: Vec<Dimension>, num_ghost: usize) -> Result<State> {
        let patch = Patch::new(dims, num_ghost)?;
        let mut state = State::new(patch, self.num_eqn, self.num_aux).with_capacity_index(self.capacity_index)?;
        let (ox, oy) = {
            let [ox, oy] = state.patch().interior_offset();
            (ox, oy)
        };
        for (i, j) in state.interior_cells().collect::<Vec<_>>() {
            let geom = state.patch().cell_geom(i - ox, j - oy);
            (self.initial)(&geom, state.q_cell_mut(i, j));
            if let Some(init) = &self.aux_init {
                init(&geom, state.aux_cell_mut(i, j));
            }
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverKind {
    Classic(ClassicConfig),
    SharpClaw(SharpClawConfig),
}

impl SolverKind {
    pub fn num_ghost(&self) -> Result<usize> {
        match self {
            Self::Classic(_) => Ok(ClassicConfig::NUM_GHOST),
            Self::SharpClaw(c) => c.num_ghost(),
        }
    }

    pub fn cfl_limits(&self) -> (f64, f64) {
        match self {
            Self::Classic(c) => (c.cfl_desired, c.cfl_max),
            Self::SharpClaw(c) => (c.cfl_desired, c.cfl_max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Classic(c) => c.validate(),
            Self::SharpClaw(c) => c.validate(),
        }
    }
}

/// How the source term is interleaved with the hyperbolic step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourceSplit {
    /// Full source step after the hyperbolic step.
    #[default]
    Godunov,
    /// Half source steps before and after.
    Strang,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverKind,
    pub t_final: f64,
    pub num_frames: usize,
    /// Defaults to `1e-4 * t_final`.
    pub dt_initial: Option<f64>,
    pub dt_max: f64,
    pub max_steps: usize,
    pub outdir: Option<PathBuf>,
    pub source_split: SourceSplit,
    /// Keep every output frame in memory in the run summary.
    pub keep_frames: bool,
}

impl RunConfig {
    pub fn new(solver: SolverKind, t_final: f64, num_frames: usize) -> Self {
        Self {
            solver,
            t_final,
            num_frames,
            dt_initial: None,
            dt_max: f64::INFINITY,
            max_steps: 1_000_000,
            outdir: None,
            source_split: SourceSplit::default(),
            keep_frames: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final {} must be finite and non-negative", self.t_final)));
        }
        if self.num_frames == 0 {
            return Err(Error::Config("num_frames must be at least 1".into()));
        }
        let dt0 = self.initial_dt();
        if self.t_final > 0.0 && !(dt0 > 0.0 && dt0 <= self.dt_max) {
            return Err(Error::Config(format!("need 0 < dt_initial ({dt0}) <= dt_max ({})", self.dt_max)));
        }
        Ok(())
    }

    pub fn initial_dt(&self) -> f64 {
        self.dt_initial.unwrap_or(1e-4 * self.t_final)
    }

    /// Output time of frame `j`.
    pub fn output_time(&self, j: usize) -> f64 {
        if j == self.num_frames {
            self.t_final
        } else {
            j as f64 * self.t_final / self.num_frames as f64
        }
    }
}

/// Next time step and whether the step just taken is accepted.
pub fn select_dt(dt_prev: f64, cfl_observed: f64, cfl_desired: f64, cfl_max: f64, dt_max: f64) -> (f64, bool) {
    let accept = cfl_observed <= cfl_max;
    let dt = dt_max.min(dt_prev * cfl_desired / cfl_observed.max(1e-12));
    (dt, accept)
}

/// Ghost filling and global reductions for the time loop.
pub trait Comm {
    fn fill_ghosts(&mut self, state: &mut State) -> Result<()>;
    fn reduce_max(&mut self, value: f64) -> Result<f64>;
    /// Full-domain frame of the current solution on the output rank,
    /// `None` elsewhere.
    fn gather(&mut self, state: &State) -> Result<Option<Frame>>;
}

/// Single-patch runs: ghosts come straight from the boundary conditions.
pub struct SerialComm<'a> {
    pub bc: &'a BoundarySpec,
}

impl Comm for SerialComm<'_> {
    fn fill_ghosts(&mut self, state: &mut State) -> Result<()> {
        let g = state.num_ghost();
        apply_bcs(state, self.bc, g)?;
        Ok(())
    }

    fn reduce_max(&mut self, value: f64) -> Result<f64> {
        Ok(value)
    }

    fn gather(&mut self, state: &State) -> Result<Option<Frame>> {
        Ok(Some(Frame::from_state(state)))
    }
}

/// Advances every interior cell by the source ODE over `dt` with the
/// explicit midpoint rule.
pub fn source_step(state: &mut State, source: &SourceFn, dt: f64) -> Result<()> {
    let m = state.num_eqn();
    let t = state.t;
    let mut k1 = vec![0.0; m];
    let mut mid = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let [ox, oy] = state.patch().interior_offset();
    for (i, j) in state.interior_cells().collect::<Vec<_>>() {
        let x = state.patch().cell_geom(i - ox, j - oy).center;
        let aux = state.aux_cell(i, j).to_vec();
        let q = state.q_cell(i, j);
        source(q, &aux, x, t, &mut k1).map_err(Error::Source)?;
        for c in 0..m {
            mid[c] = q[c] + 0.5 * dt * k1[c];
        }
        source(&mid, &aux, x, t + 0.5 * dt, &mut k2).map_err(Error::Source)?;
        let q = state.q_cell_mut(i, j);
        for c in 0..m {
            if k2[c] != 0.0 {
                q[c] += dt * k2[c];
            }
        }
    }
    if !state.interior_is_finite() {
        return Err(Error::NonFinite(t));
    }
    Ok(())
}

/// Counters from a time loop.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoopStats {
    pub steps: usize,
    pub rejected: usize,
    pub final_t: f64,
    pub max_cfl: f64,
}

/// Errors a smaller time step may cure.
fn retryable(e: &Error) -> bool {
    matches!(e, Error::Riemann(_) | Error::NonFinite(_))
}

/// Counts ghost fills so a failed attempt can still match its peers.
struct CountingComm<'a> {
    inner: &'a mut dyn Comm,
    fills: usize,
}

impl Comm for CountingComm<'_> {
    fn fill_ghosts(&mut self, state: &mut State) -> Result<()> {
        self.fills += 1;
        self.inner.fill_ghosts(state)
    }

    fn reduce_max(&mut self, value: f64) -> Result<f64> {
        self.inner.reduce_max(value)
    }

    fn gather(&mut self, state: &State) -> Result<Option<Frame>> {
        self.inner.gather(state)
    }
}

/// Ghost fills in one step; identical on every tile.
fn fills_per_step(cfg: &RunConfig, rank: usize) -> usize {
    match &cfg.solver {
        SolverKind::Classic(_) if rank == 1 => 1,
        SolverKind::Classic(_) => 3,
        SolverKind::SharpClaw(c) => sharpclaw::ShuOsher::for_integrator(c.integrator).num_evaluations(),
    }
}

/// One attempt at a full step (hyperbolic plus source). Returns the
/// observed Courant number.
///
/// Ghost filling may involve other tiles, so after a retryable failure the
/// fills the attempt skipped are still performed.
fn attempt_step(
    problem: &Problem,
    cfg: &RunConfig,
    state: &mut State,
    comm: &mut dyn Comm,
    dt: f64,
) -> Result<f64> {
    let mut counting = CountingComm { inner: comm, fills: 0 };
    let out = attempt_inner(problem, cfg, state, &mut counting, dt);
    if let Err(e) = &out {
        if retryable(e) {
            for _ in counting.fills..fills_per_step(cfg, state.rank()) {
                counting.inner.fill_ghosts(state)?;
            }
        }
    }
    out
}

fn attempt_inner(
    problem: &Problem,
    cfg: &RunConfig,
    state: &mut State,
    comm: &mut dyn Comm,
    dt: f64,
) -> Result<f64> {
    let rs = problem.riemann.as_ref();
    let t0 = state.t;
    if let (Some(src), SourceSplit::Strang) = (&problem.source, cfg.source_split) {
        source_step(state, src, 0.5 * dt)?;
    }
    let cfl = match &cfg.solver {
        SolverKind::Classic(c) => {
            comm.fill_ghosts(state)?;
            if state.rank() == 1 {
                classic::step1d_classic(state, rs, dt, c)?
            } else {
                classic::step2d_classic(state, rs, dt, c, &mut |s| comm.fill_ghosts(s))?
            }
        }
        SolverKind::SharpClaw(c) => {
            let rate = sharpclaw::ssp_step(state, dt, c.integrator, &mut |s, du| {
                comm.fill_ghosts(s)?;
                sharpclaw::rhs_into(s, rs, c, du)
            })?;
            rate * dt
        }
    };
    state.t = t0;
    if let Some(src) = &problem.source {
        match cfg.source_split {
            SourceSplit::Godunov => source_step(state, src, dt)?,
            SourceSplit::Strang => {
                state.t = t0 + 0.5 * dt;
                source_step(state, src, 0.5 * dt)?;
            }
        }
    }
    state.t = t0 + dt;
    Ok(cfl)
}

/// Runs the time loop on `state`, handing the gathered frame to
/// `output(j, frame)` at each output time (including `t = 0`).
pub fn time_loop(
    problem: &Problem,
    cfg: &RunConfig,
    state: &mut State,
    comm: &mut dyn Comm,
    output: &mut dyn FnMut(usize, Frame) -> Result<()>,
) -> Result<LoopStats> {
    let (cfl_desired, cfl_max) = cfg.solver.cfl_limits();
    let mut stats = LoopStats::default();
    let mut dt = cfg.initial_dt().min(cfg.dt_max);
    let dt_floor = 1e-12 * cfg.t_final;
    state.t = 0.0;
    if let Some(frame) = comm.gather(state)? {
        output(0, frame)?;
    }
    let mut snapshot = Vec::with_capacity(state.q.len());
    for j in 1..=cfg.num_frames {
        let target = cfg.output_time(j);
        while state.t < target {
            let t0 = state.t;
            let last = t0 + dt >= target;
            let dt_step = if last { target - t0 } else { dt };
            snapshot.clear();
            snapshot.extend_from_slice(&state.q);
            let local = match attempt_step(problem, cfg, state, comm, dt_step) {
                Ok(c) => c,
                Err(e) if retryable(&e) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            let cfl = comm.reduce_max(local)?;
            let (dt_next, accept) = select_dt(dt_step, cfl, cfl_desired, cfl_max, cfg.dt_max);
            if accept {
                stats.steps += 1;
                stats.max_cfl = stats.max_cfl.max(cfl);
                state.t = if last { target } else { t0 + dt_step };
                if stats.steps > cfg.max_steps {
                    return Err(Error::MaxSteps(cfg.max_steps));
                }
                // a clipped final step says little about the stable dt
                if !(last && dt_step < dt) {
                    dt = dt_next;
                }
            } else {
                stats.rejected += 1;
                state.q.copy_from_slice(&snapshot);
                state.t = t0;
                dt = if cfl.is_finite() { dt_next } else { 0.5 * dt_step };
                if dt < dt_floor {
                    return Err(Error::StepCollapse { dt, t: t0 });
                }
            }
        }
        if let Some(frame) = comm.gather(state)? {
            output(j, frame)?;
        }
    }
    stats.final_t = state.t;
    Ok(stats)
}

/// Interior solution at one output time, in natural x-fastest order.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    /// `(cells, lower, upper)` per dimension.
    pub dims: Vec<(usize, f64, f64)>,
    pub num_eqn: usize,
    pub q: Vec<f64>,
}

impl Frame {
    pub fn from_state(state: &State) -> Self {
        let dims = state
            .patch()
            .dims()
            .iter()
            .map(|d| (d.num_cells(), d.lower(), d.upper()))
            .collect();
        Self {
            t: state.t,
            dims,
            num_eqn: state.num_eqn(),
            q: state.interior_q(),
        }
    }

    pub fn num_cells(&self) -> usize {
        self.dims.iter().map(|d| d.0).product()
    }

    /// Values of cell `(i, j)`.
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let c = j * self.dims[0].0 + i;
        &self.q[c * self.num_eqn..(c + 1) * self.num_eqn]
    }

    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t {:.16e}", self.t)?;
        writeln!(out, "rank {}", self.dims.len())?;
        write!(out, "cells")?;
        for d in &self.dims {
            write!(out, " {}", d.0)?;
        }
        write!(out, "\nbounds")?;
        for d in &self.dims {
            write!(out, " {:.16e} {:.16e}", d.1, d.2)?;
        }
        writeln!(out, "\nnum_eqn {}", self.num_eqn)?;
        for cell in self.q.chunks(self.num_eqn.max(1)) {
            let line: Vec<String> = cell.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let bad = |msg: &str| Error::Frame(msg.to_string());
        let mut lines = input.lines();
        let mut header = |key: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))??;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::Frame(format!("expected '{key}' line, got '{line}'")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Frame(format!("bad number '{s}'")));
        let count = |s: &str| s.parse::<usize>().map_err(|_| Error::Frame(format!("bad count '{s}'")));

        let t = num(header("t")?.first().ok_or_else(|| bad("missing t"))?)?;
        let rank = count(header("rank")?.first().ok_or_else(|| bad("missing rank"))?)?;
        let cells = header("cells")?;
        let bounds = header("bounds")?;
        let num_eqn = count(header("num_eqn")?.first().ok_or_else(|| bad("missing num_eqn"))?)?;
        if !(1..=2).contains(&rank) || cells.len() != rank || bounds.len() != 2 * rank {
            return Err(bad("header dimensions disagree with rank"));
        }
        let mut dims = Vec::with_capacity(rank);
        for d in 0..rank {
            dims.push((count(&cells[d])?, num(&bounds[2 * d])?, num(&bounds[2 * d + 1])?));
        }
        let mut q = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = q.len();
            for tok in line.split_whitespace() {
                q.push(num(tok)?);
            }
            if q.len() - before != num_eqn {
                return Err(Error::Frame(format!("cell line has {} values, expected {num_eqn}", q.len() - before)));
            }
        }
        let frame = Self { t, dims, num_eqn, q };
        if frame.q.len() != frame.num_cells() * num_eqn {
            return Err(bad("cell count disagrees with header"));
        }
        Ok(frame)
    }
}

pub fn frame_path(outdir: &Path, index: usize) -> PathBuf {
    outdir.join(format!("frame{index:04}.txt"))
}

pub const MANIFEST: &str = "frames.txt";

/// Writes `frameNNNN.txt` into `outdir`.
pub fn write_frame(frame: &Frame, index: usize, outdir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(outdir)?;
    let path = frame_path(outdir, index);
    let mut out = BufWriter::new(fs::File::create(&path)?);
    frame.write_to(&mut out)?;
    out.flush()?;
    Ok(path)
}

pub fn read_frame(path: &Path) -> Result<Frame> {
    Frame::read_from(BufReader::new(fs::File::open(path)?))
}

/// Rewrites the manifest: one `NNNN <t>` line per frame.
pub fn write_manifest(outdir: &Path, entries: &[(usize, f64)]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(outdir.join(MANIFEST))?);
    for (index, t) in entries {
        writeln!(out, "{index:04} {t:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_manifest(outdir: &Path) -> Result<Vec<(usize, f64)>> {
    let text = fs::read_to_string(outdir.join(MANIFEST))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut parts = l.split_whitespace();
            let idx = parts.next().and_then(|s| s.parse().ok());
            let t = parts.next().and_then(|s| s.parse().ok());
            idx.zip(t).ok_or_else(|| Error::Frame(format!("bad manifest line '{l}'")))
        })
        .collect()
}

/// Collects frames, writing them (and the manifest) when an output
/// directory is configured.
#[derive(Debug, Default)]
pub struct FrameSink {
    outdir: Option<PathBuf>,
    keep: bool,
    pub frames: Vec<Frame>,
    pub manifest: Vec<(usize, f64)>,
}

impl FrameSink {
    pub fn new(outdir: Option<PathBuf>, keep: bool) -> Self {
        Self {
            outdir,
            keep,
            ..Default::default()
        }
    }

    pub fn push(&mut self, index: usize, frame: Frame) -> Result<()> {
        self.manifest.push((index, frame.t));
        if let Some(dir) = &self.outdir {
            write_frame(&frame, index, dir)?;
            write_manifest(dir, &self.manifest)?;
        }
        if self.keep {
            self.frames.push(frame);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub stats: LoopStats,
    /// `(index, t)` of every frame written or kept.
    pub manifest: Vec<(usize, f64)>,
    /// Present when `keep_frames` was set.
    pub frames: Vec<Frame>,
    pub wall_time: Duration,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "steps {} (rejected {}), final t {}, wall time {:.3} s",
            self.stats.steps,
            self.stats.rejected,
            self.stats.final_t,
            self.wall_time.as_secs_f64()
        )
    }
}

/// Checks a problem against a configuration and builds its initial state
/// with ghosts filled.
pub fn prepare(problem: &Problem, cfg: &RunConfig) -> Result<State> {
    problem.validate()?;
    cfg.validate()?;
    let g = cfg.solver.num_ghost()?;
    let mut state = problem.init_state(problem.dims.clone(), g)?;
    apply_bcs(&mut state, &problem.bc, g)?;
    state.validate_capacity()?;
    Ok(state)
}

/// Runs a problem on a single patch.
pub fn run(problem: &Problem, cfg: &RunConfig) -> Result<RunSummary> {
    let start = Instant::now();
    let mut state = prepare(problem, cfg)?;
    let mut sink = FrameSink::new(cfg.outdir.clone(), cfg.keep_frames);
    let mut comm = SerialComm { bc: &problem.bc };
    let stats = time_loop(problem, cfg, &mut state, &mut comm, &mut |j, f| sink.push(j, f))?;
    Ok(RunSummary {
        stats,
        manifest: sink.manifest,
        frames: sink.frames,
        wall_time: start.elapsed(),
    })
}
