use super::{normal_transverse, RiemannError, RiemannSolver, Slot};

/// Linear acoustics with piecewise-constant density and bulk modulus.
///
/// `q = (p, u)` in 1D or `(p, u, v)` in 2D; `aux = (rho, K)` per cell.
/// In 2D the transverse velocity jump rides on a zero-speed wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acoustics {
    rank: usize,
}

impl Acoustics {
    pub fn new(rank: usize) -> Result<Self, RiemannError> {
        if !(1..=2).contains(&rank) {
            return Err(RiemannError::Parameter(format!("acoustics rank {rank}")));
        }
        Ok(Self { rank })
    }
}

fn material(aux: &[f64], interface: usize) -> Result<(f64, f64), RiemannError> {
    let (rho, bulk) = (aux[0], aux[1]);
    if !(rho > 0.0) {
        return Err(RiemannError::NonPositive {
            quantity: "density",
            value: rho,
            interface,
        });
    }
    if !(bulk > 0.0) {
        return Err(RiemannError::NonPositive {
            quantity: "bulk modulus",
            value: bulk,
            interface,
        });
    }
    Ok((rho, bulk))
}

impl RiemannSolver for Acoustics {
    fn num_eqn(&self) -> usize {
        self.rank + 1
    }

    fn num_waves(&self) -> usize {
        self.rank + 1
    }

    fn num_aux(&self) -> usize {
        2
    }

    fn rank(&self) -> usize {
        self.rank
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
        let (n, t) = normal_transverse(dir);
        let (rho_l, k_l) = material(aux_l, interface)?;
        let (rho_r, k_r) = material(aux_r, interface)?;
        let (z_l, c_l) = ((rho_l * k_l).sqrt(), (k_l / rho_l).sqrt());
        let (z_r, c_r) = ((rho_r * k_r).sqrt(), (k_r / rho_r).sqrt());

        let dp = qr[0] - ql[0];
        let du = qr[n] - ql[n];
        let a1 = (-dp + z_r * du) / (z_l + z_r);
        let a2 = (dp + z_l * du) / (z_l + z_r);

        out.waves[0] = -a1 * z_l;
        out.waves[n] = a1;
        out.speeds[0] = -c_l;
        out.waves[m] = a2 * z_r;
        out.waves[m + n] = a2;
        out.speeds[1] = c_r;
        if self.rank == 2 {
            out.waves[2 * m + t] = qr[t] - ql[t];
            out.speeds[2] = 0.0;
        }
        for k in 0..m {
            out.amdq[k] = -c_l * out.waves[k];
            out.apdq[k] = c_r * out.waves[m + k];
        }
        Ok(())
    }

    fn flux(&self, dir: usize, q: &[f64], aux: &[f64], out: &mut [f64]) {
        let (n, t) = normal_transverse(dir);
        out[0] = aux[1] * q[n];
        out[n] = q[0] / aux[0];
        if self.rank == 2 {
            out[t] = 0.0;
        }
    }
}
