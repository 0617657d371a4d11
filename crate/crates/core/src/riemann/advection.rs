use super::{RiemannError, RiemannSolver, Slot};

/// Scalar advection `q_t + u q_x + v q_y = 0` with constant velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advection {
    velocity: [f64; 2],
    rank: usize,
}

impl Advection {
    pub fn new_1d(u: f64) -> Self {
        Self {
            velocity: [u, 0.0],
            rank: 1,
        }
    }

    pub fn new_2d(u: f64, v: f64) -> Self {
        Self {
            velocity: [u, v],
            rank: 2,
        }
    }

    pub fn velocity(&self) -> [f64; 2] {
        self.velocity
    }
}

impl RiemannSolver for Advection {
    fn num_eqn(&self) -> usize {
        1
    }

    fn num_waves(&self) -> usize {
        1
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn solve_interface(
        &self,
        dir: usize,
        _interface: usize,
        ql: &[f64],
        qr: &[f64],
        _aux_l: &[f64],
        _aux_r: &[f64],
        out: &mut Slot<'_>,
    ) -> Result<(), RiemannError> {
        let u = self.velocity[dir];
        let w = qr[0] - ql[0];
        out.waves[0] = w;
        out.speeds[0] = u;
        out.amdq[0] = u.min(0.0) * w;
        out.apdq[0] = u.max(0.0) * w;
        Ok(())
    }

    fn flux(&self, dir: usize, q: &[f64], _aux: &[f64], out: &mut [f64]) {
        out[0] = self.velocity[dir] * q[0];
    }
}
