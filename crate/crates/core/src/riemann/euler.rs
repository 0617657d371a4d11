use super::efix::harten_hyman;
use super::{normal_transverse, RiemannError, RiemannSolver, Slot};

/// Roe solver for the 2D compressible Euler equations of an ideal gas.
///
/// `q = (rho, rho u, rho v, E)`, optionally followed by a passive tracer that
/// is advected (non-conservatively) at the contact speed. Three wave
/// families: `u - c`, the contact/shear wave at `u`, and `u + c`; with a
/// tracer its jump travels on a separate fourth wave, also at `u`, placed
/// before the `u + c` wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Euler {
    gamma: f64,
    tracer: bool,
    entropy_fix: bool,
}

impl Euler {
    pub fn new(gamma: f64) -> Result<Self, RiemannError> {
        if !(gamma > 1.0) {
            return Err(RiemannError::Parameter(format!("gamma {gamma} must exceed 1")));
        }
        Ok(Self {
            gamma,
            tracer: false,
            entropy_fix: true,
        })
    }

    pub fn with_tracer(mut self, on: bool) -> Self {
        self.tracer = on;
        self
    }

    pub fn with_entropy_fix(mut self, on: bool) -> Self {
        self.entropy_fix = on;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn has_tracer(&self) -> bool {
        self.tracer
    }

    pub fn pressure(&self, q: &[f64]) -> f64 {
        let rho = q[0];
        (self.gamma - 1.0) * (q[3] - 0.5 * (q[1] * q[1] + q[2] * q[2]) / rho)
    }

    /// Conserved state from density, velocities and pressure.
    pub fn conserved(&self, rho: f64, u: f64, v: f64, p: f64) -> [f64; 4] {
        [
            rho,
            rho * u,
            rho * v,
            p / (self.gamma - 1.0) + 0.5 * rho * (u * u + v * v),
        ]
    }

    fn checked(&self, q: &[f64], interface: usize) -> Result<(f64, f64), RiemannError> {
        let rho = q[0];
        if !(rho > 0.0) {
            return Err(RiemannError::NonPositive {
                quantity: "density",
                value: rho,
                interface,
            });
        }
        let p = self.pressure(q);
        if !(p > 0.0) {
            return Err(RiemannError::NonPositive {
                quantity: "pressure",
                value: p,
                interface,
            });
        }
        Ok((rho, p))
    }
}

impl RiemannSolver for Euler {
    fn num_eqn(&self) -> usize {
        if self.tracer {
            5
        } else {
            4
        }
    }

    fn num_waves(&self) -> usize {
        if self.tracer {
            4
        } else {
            3
        }
    }

    fn rank(&self) -> usize {
        2
    }

    fn solve_interface(
        &self,
        dir: usize,
        interface: usize,
        ql: &[f64],
        qr: &[f64],
        _aux_l: &[f64],
        _aux_r: &[f64],
        out: &mut Slot<'_>,
    ) -> Result<(), RiemannError> {
        let m = self.num_eqn();
        let gm1 = self.gamma - 1.0;
        let (n, t) = normal_transverse(dir);
        let (rho_l, p_l) = self.checked(ql, interface)?;
        let (rho_r, p_r) = self.checked(qr, interface)?;

        let (sl, sr) = (rho_l.sqrt(), rho_r.sqrt());
        let avg = |a: f64, b: f64| (sl * a + sr * b) / (sl + sr);
        let u = avg(ql[n] / rho_l, qr[n] / rho_r);
        let v = avg(ql[t] / rho_l, qr[t] / rho_r);
        let enthalpy = avg((ql[3] + p_l) / rho_l, (qr[3] + p_r) / rho_r);
        let q2 = u * u + v * v;
        let a2 = gm1 * (enthalpy - 0.5 * q2);
        if !(a2 > 0.0) {
            return Err(RiemannError::ImaginarySoundSpeed { a2, interface });
        }
        let a = a2.sqrt();

        let mut d = [0.0; 5];
        for k in 0..m {
            d[k] = qr[k] - ql[k];
        }
        let shear = d[t] - v * d[0];
        let entropy = gm1 / a2 * ((enthalpy - q2) * d[0] + u * d[n] + v * d[t] - d[3]);
        let a3 = (d[n] + (a - u) * d[0] - a * entropy) / (2.0 * a);
        let a1 = d[0] - entropy - a3;

        let w = &mut out.waves;
        w.fill(0.0);
        w[0] = a1;
        w[n] = a1 * (u - a);
        w[t] = a1 * v;
        w[3] = a1 * (enthalpy - u * a);

        w[m] = entropy;
        w[m + n] = entropy * u;
        w[m + t] = entropy * v + shear;
        w[m + 3] = entropy * 0.5 * q2 + shear * v;

        // the tracer gets its own wave so that it is limited on its own
        let last = if self.tracer {
            w[2 * m + 4] = d[4];
            out.speeds[2] = u;
            3
        } else {
            2
        };
        let o = last * m;
        w[o] = a3;
        w[o + n] = a3 * (u + a);
        w[o + t] = a3 * v;
        w[o + 3] = a3 * (enthalpy + u * a);

        out.speeds[0] = u - a;
        out.speeds[1] = u;
        out.speeds[last] = u + a;

        if self.entropy_fix {
            let gamma = self.gamma;
            let speed = move |q: &[f64], sign: f64| {
                let rho = q[0];
                if !(rho > 0.0) {
                    return None;
                }
                let p = gm1 * (q[3] - 0.5 * (q[1] * q[1] + q[2] * q[2]) / rho);
                (p > 0.0).then(|| q[n] / rho + sign * (gamma * p / rho).sqrt())
            };
            harten_hyman(out, m, ql, qr, |q| speed(q, -1.0), |q| speed(q, 1.0));
        } else {
            out.split_fluctuations(m);
        }
        Ok(())
    }

    fn flux(&self, dir: usize, q: &[f64], _aux: &[f64], out: &mut [f64]) {
        let (n, t) = normal_transverse(dir);
        let rho = q[0];
        let un = q[n] / rho;
        let p = self.pressure(q);
        out[0] = q[n];
        out[n] = q[n] * un + p;
        out[t] = q[t] * un;
        out[3] = (q[3] + p) * un;
        if self.tracer {
            out[4] = un * q[4];
        }
    }

    /// Conservative components use the flux difference; the tracer jump is
    /// advected with the mean edge velocity.
    fn internal_fluctuation(
        &self,
        dir: usize,
        q_left_edge: &[f64],
        q_right_edge: &[f64],
        aux: &[f64],
        out: &mut [f64],
    ) {
        let mut fl = [0.0; 5];
        let mut fr = [0.0; 5];
        self.flux(dir, q_left_edge, aux, &mut fl);
        self.flux(dir, q_right_edge, aux, &mut fr);
        for k in 0..4 {
            out[k] = fr[k] - fl[k];
        }
        if self.tracer {
            let (n, _) = normal_transverse(dir);
            let u_mean = 0.5 * (q_left_edge[n] / q_left_edge[0] + q_right_edge[n] / q_right_edge[0]);
            out[4] = u_mean * (q_right_edge[4] - q_left_edge[4]);
        }
    }
}
