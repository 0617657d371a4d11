//! Command-line front end: `hyperclaw <app> [flags]`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, ValueEnum};

use super::{AppKind, AppSpec, Params};
use crate::classic::{ClassicConfig, LimiterKind};
use crate::controller::{run, SolverKind};
use crate::error::{Error, Result};
use crate::parallel::run_parallel;
use crate::sharpclaw::{Integrator, SharpClawConfig};
use crate::wenogen;

#[derive(Debug, Parser)]
#[command(name = "hyperclaw", version, about = "Run a hyperbolic PDE application problem")]
pub struct Cli {
    /// Application to run.
    #[arg(value_enum)]
    pub app: AppKind,
    #[command(flatten)]
    pub opts: RunOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverChoice {
    Classic,
    Sharpclaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LimiterChoice {
    Mc,
    Minmod,
    Superbee,
    Vanleer,
    None,
}

impl From<LimiterChoice> for LimiterKind {
    fn from(c: LimiterChoice) -> Self {
        match c {
            LimiterChoice::Mc => LimiterKind::MC,
            LimiterChoice::Minmod => LimiterKind::Minmod,
            LimiterChoice::Superbee => LimiterKind::Superbee,
            LimiterChoice::Vanleer => LimiterKind::VanLeer,
            LimiterChoice::None => LimiterKind::Unlimited,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntegratorChoice {
    Ssp104,
    Ssp33,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunOptions {
    #[arg(long, value_enum)]
    pub solver: Option<SolverChoice>,
    /// WENO order for the sharpclaw solver (odd, 5 to 17).
    #[arg(long, value_parser = parse_weno_order)]
    pub weno_order: Option<usize>,
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorChoice>,
    /// Wave limiter for the classic solver.
    #[arg(long, value_enum)]
    pub limiter: Option<LimiterChoice>,
    #[arg(long)]
    pub mx: Option<usize>,
    #[arg(long)]
    pub my: Option<usize>,
    #[arg(long)]
    pub tfinal: Option<f64>,
    /// Number of output frames after the initial one.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub cfl_desired: Option<f64>,
    #[arg(long)]
    pub cfl_max: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value = "_output")]
    pub outdir: PathBuf,
    /// `key = value` parameter file overriding the app defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Single parameter override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

fn parse_weno_order(s: &str) -> std::result::Result<usize, String> {
    let order: usize = s.parse().map_err(|_| format!("weno order must be odd in 5..17 (got {s:?})"))?;
    if order < 5 {
        return Err(wenogen::WenoError::Order(order).to_string());
    }
    wenogen::width_for_order(order).map_err(|e| e.to_string())?;
    Ok(order)
}

impl RunOptions {
    /// Applies the flags to an app's defaults.
    pub fn apply(&self, mut spec: AppSpec) -> Result<AppSpec> {
        if let Some(path) = &self.params {
            spec.params.merge(&Params::from_file(path)?);
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
            spec.params.set(k.trim(), v.trim());
        }
        if let Some(mx) = self.mx {
            spec.mx = mx;
        }
        if let Some(my) = self.my {
            if spec.kind.rank() == 1 && my != 1 {
                return Err(Error::Config(format!("{} is one-dimensional; --my does not apply", spec.kind)));
            }
            spec.my = my;
        }
        if let Some(t) = self.tfinal {
            spec.t_final = t;
        }
        if let Some(n) = self.frames {
            spec.frames = n;
        }
        let wants_sharp = self.weno_order.is_some() || self.integrator.is_some();
        let choice = self.solver.unwrap_or(match (&spec.solver, wants_sharp) {
            (_, true) | (SolverKind::SharpClaw(_), _) => SolverChoice::Sharpclaw,
            _ => SolverChoice::Classic,
        });
        spec.solver = match choice {
            SolverChoice::Classic => {
                if wants_sharp {
                    return Err(Error::Config("--weno-order and --integrator need --solver sharpclaw".into()));
                }
                let mut c = match &spec.solver {
                    SolverKind::Classic(c) => c.clone(),
                    SolverKind::SharpClaw(_) => ClassicConfig::default(),
                };
                if let Some(l) = self.limiter {
                    c = c.with_limiter(l.into());
                }
                let (d, m) = (self.cfl_desired.unwrap_or(c.cfl_desired), self.cfl_max.unwrap_or(c.cfl_max));
                SolverKind::Classic(c.with_cfl(d, m))
            }
            SolverChoice::Sharpclaw => {
                if self.limiter.is_some() {
                    return Err(Error::Config("--limiter applies to the classic solver only".into()));
                }
                let base = match &spec.solver {
                    SolverKind::SharpClaw(c) => c.clone(),
                    SolverKind::Classic(_) => SharpClawConfig::default(),
                };
                let integrator = match self.integrator {
                    Some(IntegratorChoice::Ssp33) => Integrator::SSP33,
                    Some(IntegratorChoice::Ssp104) => Integrator::SSP104,
                    None => base.integrator,
                };
                let order = self.weno_order.unwrap_or(base.weno_order);
                let mut c = if integrator == base.integrator {
                    SharpClawConfig { weno_order: order, ..base }
                } else {
                    SharpClawConfig::new(order, integrator)
                };
                if let Some(cap) = spec.cfl_cap.filter(|&cap| cap < c.cfl_max) {
                    let desired = c.cfl_desired.min(0.9 * cap);
                    c = c.with_cfl(desired, cap);
                }
                let (d, m) = (self.cfl_desired.unwrap_or(c.cfl_desired), self.cfl_max.unwrap_or(c.cfl_max));
                SolverKind::SharpClaw(c.with_cfl(d, m))
            }
        };
        spec.solver.validate()?;
        Ok(spec)
    }
}

/// Parses `argv` (program name first), runs the app and prints a one-line
/// summary. Returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(line) => {
            println!("{line}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs a parsed command line; returns the summary line.
pub fn execute(cli: &Cli) -> Result<String> {
    let spec = cli.opts.apply(AppSpec::new(cli.app))?;
    let problem = spec.problem()?;
    let mut cfg = spec.run_config();
    cfg.outdir = Some(cli.opts.outdir.clone());
    std::fs::create_dir_all(&cli.opts.outdir)?;
    let summary = if cli.opts.workers > 1 {
        run_parallel(&problem, &cfg, cli.opts.workers)?
    } else {
        if cli.opts.workers == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        run(&problem, &cfg)?
    };
    Ok(format!(
        "{}: {}, {} frames in {}",
        spec.kind,
        summary,
        summary.manifest.len(),
        cli.opts.outdir.display()
    ))
}
