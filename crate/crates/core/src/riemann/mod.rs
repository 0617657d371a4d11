//! Interface Riemann solvers.
//!
//! Each solver splits the jump between a left and right state into waves
//! travelling at finite speeds and returns the left- and right-going
//! fluctuations `A-dQ` and `A+dQ`. Solvers are vectorized over a whole sweep
//! of interfaces and are pure functions of their inputs.

mod acoustics;
mod advection;
mod efix;
mod euler;
mod psystem;
mod shallow;

pub use acoustics::Acoustics;
pub use advection::Advection;
pub use euler::Euler;
pub use psystem::{PSystem, stress, stress_derivative};
pub use shallow::ShallowWater;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiemannError {
    #[error("non-positive {quantity} ({value}) at interface {interface}")]
    NonPositive {
        quantity: &'static str,
        value: f64,
        interface: usize,
    },
    #[error("Roe average gives imaginary sound speed (a^2 = {a2}) at interface {interface}")]
    ImaginarySoundSpeed { a2: f64, interface: usize },
    #[error("invalid solver parameter: {0}")]
    Parameter(String),
    #[error("direction {dir} unsupported by a rank-{rank} solver")]
    Direction { dir: usize, rank: usize },
}

/// Waves, speeds and fluctuations for a sweep of interfaces.
///
/// Storage is interface-major: `waves[(n * num_waves + p) * num_eqn + m]`,
/// `speeds[n * num_waves + p]` and `amdq[n * num_eqn + m]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RiemannOutput {
    num_eqn: usize,
    num_waves: usize,
    len: usize,
    /// Waves decompose the flux jump rather than the state jump.
    pub fwave: bool,
    pub waves: Vec<f64>,
    pub speeds: Vec<f64>,
    pub amdq: Vec<f64>,
    pub apdq: Vec<f64>,
}

impl RiemannOutput {
    pub fn new(num_eqn: usize, num_waves: usize) -> Self {
        Self {
            num_eqn,
            num_waves,
            ..Default::default()
        }
    }

    /// Resizes for `len` interfaces and zeroes every entry.
    pub fn reset(&mut self, len: usize) {
        self.len = len;
        let (m, mw) = (self.num_eqn, self.num_waves);
        for (v, n) in [
            (&mut self.waves, len * mw * m),
            (&mut self.speeds, len * mw),
            (&mut self.amdq, len * m),
            (&mut self.apdq, len * m),
        ] {
            v.clear();
            v.resize(n, 0.0);
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_eqn(&self) -> usize {
        self.num_eqn
    }

    pub fn num_waves(&self) -> usize {
        self.num_waves
    }

    #[inline]
    pub fn wave(&self, n: usize, p: usize) -> &[f64] {
        let s = (n * self.num_waves + p) * self.num_eqn;
        &self.waves[s..s + self.num_eqn]
    }

    #[inline]
    pub fn speed(&self, n: usize, p: usize) -> f64 {
        self.speeds[n * self.num_waves + p]
    }

    #[inline]
    pub fn amdq_at(&self, n: usize) -> &[f64] {
        &self.amdq[n * self.num_eqn..(n + 1) * self.num_eqn]
    }

    #[inline]
    pub fn apdq_at(&self, n: usize) -> &[f64] {
        &self.apdq[n * self.num_eqn..(n + 1) * self.num_eqn]
    }

    /// Largest |s| over every wave of every interface.
    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().fold(0.0, |acc: f64, s| acc.max(s.abs()))
    }

    /// Mutable views of one interface's slots.
    #[inline]
    fn slot(&mut self, n: usize) -> Slot<'_> {
        let (m, mw) = (self.num_eqn, self.num_waves);
        Slot {
            waves: &mut self.waves[n * mw * m..(n + 1) * mw * m],
            speeds: &mut self.speeds[n * mw..(n + 1) * mw],
            amdq: &mut self.amdq[n * m..(n + 1) * m],
            apdq: &mut self.apdq[n * m..(n + 1) * m],
        }
    }
}

/// Output slots for a single interface; all zero on entry.
pub struct Slot<'a> {
    pub waves: &'a mut [f64],
    pub speeds: &'a mut [f64],
    pub amdq: &'a mut [f64],
    pub apdq: &'a mut [f64],
}

impl Slot<'_> {
    /// Fluctuations as the plain upwind split of `s_p W_p`.
    pub(crate) fn split_fluctuations(&mut self, num_eqn: usize) {
        for (p, &s) in self.speeds.iter().enumerate() {
            let w = &self.waves[p * num_eqn..(p + 1) * num_eqn];
            let (neg, pos) = (s.min(0.0), s.max(0.0));
            for m in 0..num_eqn {
                self.amdq[m] += neg * w[m];
                self.apdq[m] += pos * w[m];
            }
        }
    }
}

/// A Riemann solver for one hyperbolic system.
///
/// `dir` selects the normal direction (0 = x, 1 = y). In 2D, solvers only
/// propagate waves normal to the interface.
pub trait RiemannSolver: Send + Sync {
    fn num_eqn(&self) -> usize;
    fn num_waves(&self) -> usize;
    fn num_aux(&self) -> usize {
        0
    }
    fn rank(&self) -> usize;

    /// True when the waves split the flux difference (f-wave form).
    fn fwave(&self) -> bool {
        false
    }

    /// Solves one interface problem; the slot is zeroed on entry.
    fn solve_interface(
        &self,
        dir: usize,
        interface: usize,
        ql: &[f64],
        qr: &[f64],
        aux_l: &[f64],
        aux_r: &[f64],
        out: &mut Slot<'_>,
    ) -> Result<(), RiemannError>;

    /// Physical flux in direction `dir` evaluated with cell coefficients `aux`.
    fn flux(&self, dir: usize, q: &[f64], aux: &[f64], out: &mut [f64]);

    /// Fluctuation produced inside one cell between its left-edge and
    /// right-edge reconstructed values. Defaults to the flux difference.
    fn internal_fluctuation(
        &self,
        dir: usize,
        q_left_edge: &[f64],
        q_right_edge: &[f64],
        aux: &[f64],
        out: &mut [f64],
    ) {
        let m = self.num_eqn();
        let mut fl = [0.0; 8];
        let mut fr = [0.0; 8];
        self.flux(dir, q_left_edge, aux, &mut fl[..m]);
        self.flux(dir, q_right_edge, aux, &mut fr[..m]);
        for k in 0..m {
            out[k] = fr[k] - fl[k];
        }
    }

    /// Solves every interface `n` between `left[n]` and `right[n]`.
    ///
    /// `left`/`right` hold `len * num_eqn` values, `aux_l`/`aux_r` hold
    /// `len * num_aux` values.
    fn solve(
        &self,
        dir: usize,
        left: &[f64],
        right: &[f64],
        aux_l: &[f64],
        aux_r: &[f64],
        out: &mut RiemannOutput,
    ) -> Result<(), RiemannError> {
        let m = self.num_eqn();
        let ma = self.num_aux();
        if dir >= self.rank() {
            return Err(RiemannError::Direction {
                dir,
                rank: self.rank(),
            });
        }
        let len = left.len() / m;
        debug_assert_eq!(right.len(), len * m);
        if out.num_eqn != m || out.num_waves != self.num_waves() {
            *out = RiemannOutput::new(m, self.num_waves());
        }
        out.fwave = self.fwave();
        out.reset(len);
        for n in 0..len {
            let (al, ar) = if ma == 0 {
                (&[][..], &[][..])
            } else {
                (&aux_l[n * ma..(n + 1) * ma], &aux_r[n * ma..(n + 1) * ma])
            };
            let mut slot = out.slot(n);
            self.solve_interface(
                dir,
                n,
                &left[n * m..(n + 1) * m],
                &right[n * m..(n + 1) * m],
                al,
                ar,
                &mut slot,
            )?;
        }
        Ok(())
    }
}

/// Normal and transverse momentum indices for direction `dir` of a system
/// whose velocity-like components start at index 1.
#[inline]
pub(crate) fn normal_transverse(dir: usize) -> (usize, usize) {
    if dir == 0 {
        (1, 2)
    } else {
        (2, 1)
    }
}
