use super::{RiemannError, RiemannSolver, Slot};

/// Nonlinear stress `sigma(eps) = exp(K eps) + 1`.
#[inline]
pub fn stress(strain: f64, bulk: f64) -> f64 {
    (bulk * strain).exp() + 1.0
}

#[inline]
pub fn stress_derivative(strain: f64, bulk: f64) -> f64 {
    bulk * (bulk * strain).exp()
}

/// f-wave solver for the p-system with spatially varying density and bulk
/// modulus.
///
/// `q = (eps, rho u)` in 1D or `(eps, rho u, rho v)` in 2D with
/// `aux = (rho, K)`. The flux in the normal direction is
/// `(-u_n, -sigma(eps))` (zero for the transverse momentum). The flux jump,
/// evaluated with each side's own coefficients, is split onto the left
/// family `(1, Z_l)` at speed `-c_l` and the right family `(1, -Z_r)` at
/// speed `c_r`, with `Z = sqrt(rho sigma'(eps))` and `c = sqrt(sigma'/rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PSystem {
    rank: usize,
}

impl PSystem {
    pub fn new(rank: usize) -> Result<Self, RiemannError> {
        if !(1..=2).contains(&rank) {
            return Err(RiemannError::Parameter(format!("p-system rank {rank}")));
        }
        Ok(Self { rank })
    }

    fn normal(&self, dir: usize) -> usize {
        1 + dir
    }
}

fn material(aux: &[f64], interface: usize) -> Result<(f64, f64), RiemannError> {
    for (quantity, value) in [("density", aux[0]), ("bulk modulus", aux[1])] {
        if !(value > 0.0) {
            return Err(RiemannError::NonPositive {
                quantity,
                value,
                interface,
            });
        }
    }
    Ok((aux[0], aux[1]))
}

impl RiemannSolver for PSystem {
    fn num_eqn(&self) -> usize {
        self.rank + 1
    }

    fn num_waves(&self) -> usize {
        2
    }

    fn num_aux(&self) -> usize {
        2
    }

    fn rank(&self) -> usize {
        self.rank
    }

    fn fwave(&self) -> bool {
        true
    }

    fn solve_interface(
        &self,
        dir: usize,
        interface: usize,
        ql: &[f64],
        qr: &[f64],
        aux_l: &[f64],
        aux_r: &[f64],
        out: &mut Slot<'_>,
    ) -> Result<(), RiemannError> {
        let m = self.num_eqn();
        let n = self.normal(dir);
        let (rho_l, k_l) = material(aux_l, interface)?;
        let (rho_r, k_r) = material(aux_r, interface)?;

        let df0 = -(qr[n] / rho_r) + ql[n] / rho_l;
        let dfn = -stress(qr[0], k_r) + stress(ql[0], k_l);

        let slope_l = stress_derivative(ql[0], k_l);
        let slope_r = stress_derivative(qr[0], k_r);
        let (z_l, c_l) = ((rho_l * slope_l).sqrt(), (slope_l / rho_l).sqrt());
        let (z_r, c_r) = ((rho_r * slope_r).sqrt(), (slope_r / rho_r).sqrt());

        let b1 = (z_r * df0 + dfn) / (z_l + z_r);
        let b2 = (z_l * df0 - dfn) / (z_l + z_r);

        out.waves[0] = b1;
        out.waves[n] = b1 * z_l;
        out.speeds[0] = -c_l;
        out.waves[m] = b2;
        out.waves[m + n] = -b2 * z_r;
        out.speeds[1] = c_r;
        out.amdq.copy_from_slice(&out.waves[..m]);
        out.apdq.copy_from_slice(&out.waves[m..2 * m]);
        Ok(())
    }

    fn flux(&self, dir: usize, q: &[f64], aux: &[f64], out: &mut [f64]) {
        let n = self.normal(dir);
        out.iter_mut().for_each(|v| *v = 0.0);
        out[0] = -q[n] / aux[0];
        out[n] = -stress(q[0], aux[1]);
    }
}
