use thiserror::Error;

use crate::geometry::GeometryError;
use crate::riemann::RiemannError;
use crate::wenogen::WenoError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Riemann(#[from] RiemannError),
    #[error(transparent)]
    Weno(#[from] WenoError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite value in solution at t = {0}")]
    NonFinite(f64),
    #[error("source term failed: {0}")]
    Source(String),
    #[error("exceeded {0} time steps")]
    MaxSteps(usize),
    #[error("time step fell to {dt:e} at t = {t} without an acceptable step")]
    StepCollapse { dt: f64, t: f64 },
    #[error("frame file: {0}")]
    Frame(String),
    #[error("parallel run: {0}")]
    Parallel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
