//! Ready-made application problems and the helpers they share.
//!
//! Each `setup_*` function is pure: the same grid and parameters always
//! give the same [`Problem`]. Parameters come from flat `key = value` text
//! ([`Params`]); every key has a default except the quadrant states of the
//! Euler problem, which ship in a sample file.

pub mod cli;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::classic::ClassicConfig;
use crate::controller::{Problem, RunConfig, SolverKind};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryCondition, BoundarySpec, CellGeom, Dimension};
use crate::riemann::{Acoustics, Advection, Euler, PSystem, ShallowWater};
use crate::sharpclaw::{Integrator, SharpClawConfig};

/// Sample parameters for `euler2d-quadrant`.
pub const QUADRANT_PARAMS: &str = include_str!("../../params/euler2d_quadrant.txt");
/// Sample parameters for `shockbubble`.
pub const SHOCKBUBBLE_PARAMS: &str = include_str!("../../params/shockbubble.txt");

/// Default relative tolerance of [`bubble_fraction`].
pub const FRACTION_TOL: f64 = 1e-4;

/// Flat `key = value` parameters; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("parameter line {}: expected `key = value`", n + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("parameter line {}: empty key", n + 1)));
            }
            map.insert(key.to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.0.insert(key.to_string(), value.to_string());
    }

    /// Later entries win.
    pub fn merge(&mut self, other: &Params) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("parameter {key}: cannot parse {v:?}"))),
        }
    }

    /// Comma-separated numbers; `None` when the key is absent.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("parameter {key}: cannot parse {s:?} as a number")))
            })
            .collect::<Result<Vec<f64>>>()
            .map(Some)
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Area fraction of the rectangle `[lower, upper]` inside a circle.
///
/// Rectangles wholly inside or outside are exact; straddling ones are
/// quadrisected until their diagonal drops below `tol * radius`, where the
/// midpoint rule decides.
pub fn bubble_fraction(lower: [f64; 2], upper: [f64; 2], center: [f64; 2], radius: f64, tol: f64) -> f64 {
    let area = (upper[0] - lower[0]) * (upper[1] - lower[1]);
    if !(area > 0.0) || !(radius > 0.0) {
        return 0.0;
    }
    let min_diag = tol.max(1e-12) * radius;
    (covered(lower, upper, center, radius * radius, min_diag) / area).clamp(0.0, 1.0)
}

fn covered(lo: [f64; 2], hi: [f64; 2], c: [f64; 2], r2: f64, min_diag: f64) -> f64 {
    let far = |a: f64, b: f64, m: f64| (a - m).abs().max((b - m).abs());
    let near = |a: f64, b: f64, m: f64| if m < a { a - m } else if m > b { m - b } else { 0.0 };
    let (fx, fy) = (far(lo[0], hi[0], c[0]), far(lo[1], hi[1], c[1]));
    let area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    if fx * fx + fy * fy <= r2 {
        return area;
    }
    let (nx, ny) = (near(lo[0], hi[0], c[0]), near(lo[1], hi[1], c[1]));
    if nx * nx + ny * ny >= r2 {
        return 0.0;
    }
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    if (hi[0] - lo[0]).hypot(hi[1] - lo[1]) < min_diag {
        let d2 = (mid[0] - c[0]).powi(2) + (mid[1] - c[1]).powi(2);
        return if d2 < r2 { area } else { 0.0 };
    }
    covered(lo, mid, c, r2, min_diag)
        + covered([mid[0], lo[1]], [hi[0], mid[1]], c, r2, min_diag)
        + covered([lo[0], mid[1]], [mid[0], hi[1]], c, r2, min_diag)
        + covered(mid, hi, c, r2, min_diag)
}

/// Two-material checkerboard of unit squares: `(rho, K) = (1, 1)` where
/// `(x - floor(x) - 1/2)(y - floor(y) - 1/2) < 0`, otherwise `(5, 5)`.
pub fn checkerboard(x: f64, y: f64) -> (f64, f64) {
    let s = (x - x.floor() - 0.5) * (y - y.floor() - 0.5);
    if s < 0.0 {
        (1.0, 1.0)
    } else {
        (5.0, 5.0)
    }
}

fn dims2(x: (f64, f64), y: (f64, f64), mx: usize, my: usize) -> Result<Vec<Dimension>> {
    Ok(vec![Dimension::new("x", x.0, x.1, mx)?, Dimension::new("y", y.0, y.1, my)?])
}

/// `wall` or `periodic`.
fn wall_or_periodic(params: &Params, rank: usize) -> Result<BoundarySpec> {
    let kind: String = params.get("bc", "wall".to_string())?;
    let sides = (0..rank).map(|d| {
        let bc = match kind.as_str() {
            "wall" => BoundaryCondition::Wall { reflect: vec![1 + d] },
            "periodic" => BoundaryCondition::Periodic,
            other => return Err(Error::Config(format!("bc must be wall or periodic, got {other:?}"))),
        };
        Ok([bc.clone(), bc])
    });
    Ok(BoundarySpec::new(sides.collect::<Result<_>>()?)?)
}

/// Sine wave `sin(2 pi x)` on `[0, 1]`, periodic, speed `u` (default 1).
/// Cells hold exact averages.
pub fn setup_advection1d(mx: usize, params: &Params) -> Result<Problem> {
    let u: f64 = params.get("u", 1.0)?;
    let dims = vec![Dimension::new("x", 0.0, 1.0, mx)?];
    Ok(Problem::new(
        "advection1d",
        dims,
        Arc::new(Advection::new_1d(u)),
        BoundarySpec::uniform(1, BoundaryCondition::Periodic)?,
        Arc::new(|c: &CellGeom, q: &mut [f64]| {
            let (a, b) = (c.lower[0], c.upper[0]);
            q[0] = ((2.0 * PI * a).cos() - (2.0 * PI * b).cos()) / (2.0 * PI * (b - a));
        }),
    ))
}

/// Gaussian pressure pulse on `[-1, 1]` in a uniform medium.
pub fn setup_acoustics1d(mx: usize, params: &Params) -> Result<Problem> {
    let rho: f64 = params.get("rho", 1.0)?;
    let bulk: f64 = params.get("bulk", 4.0)?;
    let width: f64 = params.get("width", 0.1)?;
    let dims = vec![Dimension::new("x", -1.0, 1.0, mx)?];
    Ok(Problem::new(
        "acoustics1d",
        dims,
        Arc::new(Acoustics::new(1)?),
        wall_or_periodic(params, 1)?,
        Arc::new(move |c: &CellGeom, q: &mut [f64]| {
            q[0] = (-(c.center[0] / width).powi(2)).exp();
            q[1] = 0.0;
        }),
    )
    .with_aux(2, Arc::new(move |_: &CellGeom, a: &mut [f64]| {
        a[0] = rho;
        a[1] = bulk;
    })))
}

/// Radially symmetric Gaussian pressure pulse on `[-1, 1]^2`.
pub fn setup_acoustics2d(mx: usize, my: usize, params: &Params) -> Result<Problem> {
    let rho: f64 = params.get("rho", 1.0)?;
    let bulk: f64 = params.get("bulk", 4.0)?;
    let width: f64 = params.get("width", 0.1)?;
    let (x0, y0): (f64, f64) = (params.get("x0", 0.0)?, params.get("y0", 0.0)?);
    Ok(Problem::new(
        "acoustics2d",
        dims2((-1.0, 1.0), (-1.0, 1.0), mx, my)?,
        Arc::new(Acoustics::new(2)?),
        wall_or_periodic(params, 2)?,
        Arc::new(move |c: &CellGeom, q: &mut [f64]| {
            let r2 = (c.center[0] - x0).powi(2) + (c.center[1] - y0).powi(2);
            q[0] = (-r2 / (width * width)).exp();
            q[1] = 0.0;
            q[2] = 0.0;
        }),
    )
    .with_aux(2, Arc::new(move |_: &CellGeom, a: &mut [f64]| {
        a[0] = rho;
        a[1] = bulk;
    })))
}

/// Radial dam break on `[-2.5, 2.5]^2`: `h = 2` inside radius 0.5, 1
/// outside, at rest, outflow on all sides. Cells cut by the dam hold the
/// area-weighted depth.
pub fn setup_shallow2d(mx: usize, my: usize, params: &Params) -> Result<Problem> {
    let gravity: f64 = params.get("gravity", 1.0)?;
    let radius: f64 = params.get("radius", 0.5)?;
    let (h_in, h_out): (f64, f64) = (params.get("h_in", 2.0)?, params.get("h_out", 1.0)?);
    Ok(Problem::new(
        "shallow2d",
        dims2((-2.5, 2.5), (-2.5, 2.5), mx, my)?,
        Arc::new(ShallowWater::new(gravity, 2)?),
        BoundarySpec::uniform(2, BoundaryCondition::Extrapolation)?,
        Arc::new(move |c: &CellGeom, q: &mut [f64]| {
            let f = bubble_fraction(c.lower, c.upper, [0.0, 0.0], radius, FRACTION_TOL);
            q[0] = h_out + f * (h_in - h_out);
            q[1] = 0.0;
            q[2] = 0.0;
        }),
    ))
}

/// Four constant states on `[0, 1]^2` split at `(x0, y0)`, outflow
/// everywhere. Needs `state_ne`, `state_nw`, `state_sw` and `state_se`,
/// each `rho, u, v, p`.
pub fn setup_euler2d_quadrant(mx: usize, my: usize, params: &Params) -> Result<Problem> {
    let gamma: f64 = params.get("gamma", 1.4)?;
    let (x0, y0): (f64, f64) = (params.get("x0", 0.5)?, params.get("y0", 0.5)?);
    let euler = Euler::new(gamma)?;
    let mut states = Vec::with_capacity(4);
    for key in ["state_ne", "state_nw", "state_sw", "state_se"] {
        let s = params
            .list(key)?
            .ok_or_else(|| Error::Config(format!("euler2d-quadrant needs four states; {key} is missing")))?;
        if s.len() != 4 || !(s[0] > 0.0 && s[3] > 0.0) {
            return Err(Error::Config(format!("{key} must be rho, u, v, p with rho, p > 0")));
        }
        states.push(euler.conserved(s[0], s[1], s[2], s[3]));
    }
    Ok(Problem::new(
        "euler2d-quadrant",
        dims2((0.0, 1.0), (0.0, 1.0), mx, my)?,
        Arc::new(euler),
        BoundarySpec::uniform(2, BoundaryCondition::Extrapolation)?,
        Arc::new(move |c: &CellGeom, q: &mut [f64]| {
            let (east, north) = (c.center[0] >= x0, c.center[1] >= y0);
            let k = match (east, north) {
                (true, true) => 0,
                (false, true) => 1,
                (false, false) => 2,
                (true, false) => 3,
            };
            q.copy_from_slice(&states[k]);
        }),
    ))
}

/// Shock-bubble interaction in axisymmetric coordinates on `[0, 2] x
/// [0, 0.5]` (x along the axis, y the radius).
///
/// Ahead of the shock the gas is at rest with `rho = p = 1`, except in the
/// bubble where `rho = rho_bubble`; behind it the state is
/// `(rho_post, u_post, 0, p_post)`, which is also held fixed at the inflow
/// boundary. The tracer is the bubble coverage fraction. The axis is a
/// reflecting wall; top and right are outflow. The cylindrical terms
/// `-(rho v, rho u v, rho v^2, v (E + p)) / r` enter as a source.
pub fn setup_shockbubble(mx: usize, my: usize, params: &Params) -> Result<Problem> {
    let defaults = Params::parse(SHOCKBUBBLE_PARAMS)?;
    let get = |key: &str| -> Result<f64> { params.get(key, defaults.get(key, f64::NAN)?) };
    let gamma = get("gamma")?;
    let euler = Euler::new(gamma)?.with_tracer(true);
    let shock_x = get("shock_x")?;
    let center = [get("bubble_x")?, get("bubble_y")?];
    let radius = get("bubble_r")?;
    let rho_bubble = get("rho_bubble")?;
    let (rho_post, u_post, p_post) = (get("rho_post")?, get("u_post")?, get("p_post")?);
    if !(radius > 0.0 && rho_bubble > 0.0 && rho_post > 0.0 && p_post > 0.0) {
        return Err(Error::Config("shockbubble radius, densities and pressure must be positive".into()));
    }
    let post = {
        let c = euler.conserved(rho_post, u_post, 0.0, p_post);
        [c[0], c[1], c[2], c[3], 0.0]
    };
    let inflow = BoundaryCondition::Custom(Arc::new(move |_, out: &mut [f64]| {
        out.copy_from_slice(&post);
        Ok(())
    }));
    let bc = BoundarySpec::new(vec![
        [inflow, BoundaryCondition::Extrapolation],
        [BoundaryCondition::Wall { reflect: vec![2] }, BoundaryCondition::Extrapolation],
    ])?;
    let initial = move |c: &CellGeom, q: &mut [f64]| {
        if c.center[0] < shock_x {
            q.copy_from_slice(&post);
            return;
        }
        let f = bubble_fraction(c.lower, c.upper, center, radius, FRACTION_TOL);
        let rho = f * rho_bubble + (1.0 - f);
        let e = euler.conserved(rho, 0.0, 0.0, 1.0);
        q[..4].copy_from_slice(&e);
        q[4] = f;
    };
    let gm1 = gamma - 1.0;
    let source = move |q: &[f64], _: &[f64], x: [f64; 2], _: f64, out: &mut [f64]| {
        let r = x[1];
        if !(r > 0.0) {
            return Err(format!("radial source needs r > 0, got {r}"));
        }
        let (rho, mu, mv, e) = (q[0], q[1], q[2], q[3]);
        let v = mv / rho;
        let p = gm1 * (e - 0.5 * (mu * mu + mv * mv) / rho);
        out[0] = -mv / r;
        out[1] = -mu * v / r;
        out[2] = -mv * v / r;
        out[3] = -v * (e + p) / r;
        out[4] = 0.0;
        Ok(())
    };
    Ok(Problem::new(
        "shockbubble",
        dims2((0.0, 2.0), (0.0, 0.5), mx, my)?,
        Arc::new(euler),
        bc,
        Arc::new(initial),
    )
    .with_source(Arc::new(source)))
}

/// Nonlinear elasticity in a checkerboard medium on the quadrant
/// `[0, L]^2` (default `L = 10`).
///
/// The initial stress is a Gaussian of amplitude `amplitude` and variance
/// `variance` in each direction, centered at the origin, turned into strain
/// through `eps = ln(1 + stress) / K`; velocities start at zero. Left and
/// bottom are reflecting, top and right outflow.
pub fn setup_psystem(mx: usize, my: usize, params: &Params) -> Result<Problem> {
    let length: f64 = params.get("length", 10.0)?;
    let amplitude: f64 = params.get("amplitude", 5.0)?;
    let variance: f64 = params.get("variance", 5.0)?;
    if !(length > 0.0 && variance > 0.0 && amplitude > -1.0) {
        return Err(Error::Config("psystem needs length > 0, variance > 0, amplitude > -1".into()));
    }
    let bc = BoundarySpec::new(vec![
        [BoundaryCondition::Wall { reflect: vec![1] }, BoundaryCondition::Extrapolation],
        [BoundaryCondition::Wall { reflect: vec![2] }, BoundaryCondition::Extrapolation],
    ])?;
    Ok(Problem::new(
        "psystem",
        dims2((0.0, length), (0.0, length), mx, my)?,
        Arc::new(PSystem::new(2)?),
        bc,
        Arc::new(move |c: &CellGeom, q: &mut [f64]| {
            let [x, y] = c.center;
            let stress = amplitude * (-(x * x + y * y) / (2.0 * variance)).exp();
            q[0] = stress.ln_1p() / checkerboard(x, y).1;
            q[1] = 0.0;
            q[2] = 0.0;
        }),
    )
    .with_aux(2, Arc::new(|c: &CellGeom, a: &mut [f64]| {
        let (rho, bulk) = checkerboard(c.center[0], c.center[1]);
        a[0] = rho;
        a[1] = bulk;
    })))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AppKind {
    Advection1d,
    Acoustics1d,
    Acoustics2d,
    Shallow2d,
    #[value(name = "euler2d-quadrant")]
    Euler2dQuadrant,
    Shockbubble,
    Psystem,
}

impl AppKind {
    pub const ALL: [AppKind; 7] = [
        Self::Advection1d,
        Self::Acoustics1d,
        Self::Acoustics2d,
        Self::Shallow2d,
        Self::Euler2dQuadrant,
        Self::Shockbubble,
        Self::Psystem,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Advection1d => "advection1d",
            Self::Acoustics1d => "acoustics1d",
            Self::Acoustics2d => "acoustics2d",
            Self::Shallow2d => "shallow2d",
            Self::Euler2dQuadrant => "euler2d-quadrant",
            Self::Shockbubble => "shockbubble",
            Self::Psystem => "psystem",
        }
    }

    pub fn rank(self) -> usize {
        match self {
            Self::Advection1d | Self::Acoustics1d => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for AppKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A runnable application: grid, run length and solver, plus parameter
/// overrides. The defaults all finish in well under a few minutes on one
/// core.
#[derive(Debug, Clone, PartialEq)]
pub struct AppSpec {
    pub kind: AppKind,
    pub mx: usize,
    /// 1 for 1D apps.
    pub my: usize,
    pub t_final: f64,
    pub frames: usize,
    pub solver: SolverKind,
    /// Courant ceiling kept when the solver is switched on the command line.
    pub cfl_cap: Option<f64>,
    pub params: Params,
}

impl AppSpec {
    pub fn new(kind: AppKind) -> Self {
        let classic = SolverKind::Classic(ClassicConfig::default());
        let (mx, my, t_final, solver) = match kind {
            AppKind::Advection1d => (100, 1, 1.0, classic),
            AppKind::Acoustics1d => (200, 1, 1.0, classic),
            AppKind::Acoustics2d => (100, 100, 0.5, classic),
            AppKind::Shallow2d => (100, 100, 1.0, classic),
            AppKind::Euler2dQuadrant => (100, 100, 0.3, classic),
            AppKind::Shockbubble => (160, 40, 0.6, SolverKind::Classic(ClassicConfig::default().with_cfl(0.7, 0.8))),
            AppKind::Psystem => (
                100,
                100,
                10.0,
                SolverKind::SharpClaw(SharpClawConfig::new(5, Integrator::SSP104)),
            ),
        };
        let params = match kind {
            AppKind::Euler2dQuadrant => Params::parse(QUADRANT_PARAMS).expect("sample parameters parse"),
            _ => Params::default(),
        };
        Self {
            kind,
            mx,
            my,
            t_final,
            frames: 10,
            solver,
            cfl_cap: (kind == AppKind::Shockbubble).then_some(0.8),
            params,
        }
    }

    pub fn problem(&self) -> Result<Problem> {
        let (mx, my, p) = (self.mx, self.my, &self.params);
        match self.kind {
            AppKind::Advection1d => setup_advection1d(mx, p),
            AppKind::Acoustics1d => setup_acoustics1d(mx, p),
            AppKind::Acoustics2d => setup_acoustics2d(mx, my, p),
            AppKind::Shallow2d => setup_shallow2d(mx, my, p),
            AppKind::Euler2dQuadrant => setup_euler2d_quadrant(mx, my, p),
            AppKind::Shockbubble => setup_shockbubble(mx, my, p),
            AppKind::Psystem => setup_psystem(mx, my, p),
        }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig::new(self.solver.clone(), self.t_final, self.frames)
    }
}
