use super::efix::harten_hyman;
use super::{normal_transverse, RiemannError, RiemannSolver, Slot};

/// Roe solver for the shallow water equations.
///
/// `q = (h, hu)` in 1D, `(h, hu, hv)` in 2D. The 2D solver carries the
/// transverse momentum jump on a shear wave moving with the Roe velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShallowWater {
    gravity: f64,
    rank: usize,
    entropy_fix: bool,
}

impl ShallowWater {
    pub fn new(gravity: f64, rank: usize) -> Result<Self, RiemannError> {
        if !(gravity > 0.0) {
            return Err(RiemannError::Parameter(format!("gravity {gravity}")));
        }
        if !(1..=2).contains(&rank) {
            return Err(RiemannError::Parameter(format!("shallow water rank {rank}")));
        }
        Ok(Self {
            gravity,
            rank,
            entropy_fix: true,
        })
    }

    pub fn with_entropy_fix(mut self, on: bool) -> Self {
        self.entropy_fix = on;
        self
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    fn normal_index(&self, dir: usize) -> (usize, Option<usize>) {
        if self.rank == 1 {
            (1, None)
        } else {
            let (n, t) = normal_transverse(dir);
            (n, Some(t))
        }
    }
}

impl RiemannSolver for ShallowWater {
    fn num_eqn(&self) -> usize {
        self.rank + 1
    }

    fn num_waves(&self) -> usize {
        self.rank + 1
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
        _aux_l: &[f64],
        _aux_r: &[f64],
        out: &mut Slot<'_>,
    ) -> Result<(), RiemannError> {
        let m = self.num_eqn();
        let mw = self.num_waves();
        let g = self.gravity;
        let (n, t) = self.normal_index(dir);
        let (hl, hr) = (ql[0], qr[0]);
        for h in [hl, hr] {
            if !(h > 0.0) {
                return Err(RiemannError::NonPositive {
                    quantity: "depth",
                    value: h,
                    interface,
                });
            }
        }
        let (sl, sr) = (hl.sqrt(), hr.sqrt());
        let u_hat = (ql[n] / sl + qr[n] / sr) / (sl + sr);
        let h_bar = 0.5 * (hl + hr);
        let c_hat = (g * h_bar).sqrt();

        let d0 = hr - hl;
        let dn = qr[n] - ql[n];
        let a1 = ((u_hat + c_hat) * d0 - dn) / (2.0 * c_hat);
        let a3 = (-(u_hat - c_hat) * d0 + dn) / (2.0 * c_hat);

        let last = (mw - 1) * m;
        out.waves[0] = a1;
        out.waves[n] = a1 * (u_hat - c_hat);
        out.speeds[0] = u_hat - c_hat;
        out.waves[last] = a3;
        out.waves[last + n] = a3 * (u_hat + c_hat);
        out.speeds[mw - 1] = u_hat + c_hat;
        if let Some(t) = t {
            let v_hat = (ql[t] / sl + qr[t] / sr) / (sl + sr);
            out.waves[t] = a1 * v_hat;
            out.waves[last + t] = a3 * v_hat;
            out.waves[m + t] = (qr[t] - ql[t]) - v_hat * d0;
            out.speeds[1] = u_hat;
        }

        if self.entropy_fix {
            let speed = |q: &[f64], sign: f64| {
                (q[0] > 0.0).then(|| q[n] / q[0] + sign * (g * q[0]).sqrt())
            };
            harten_hyman(out, m, ql, qr, |q| speed(q, -1.0), |q| speed(q, 1.0));
        } else {
            out.split_fluctuations(m);
        }
        Ok(())
    }

    fn flux(&self, dir: usize, q: &[f64], _aux: &[f64], out: &mut [f64]) {
        let (n, t) = self.normal_index(dir);
        let h = q[0];
        let u = q[n] / h;
        out[0] = q[n];
        out[n] = q[n] * u + 0.5 * self.gravity * h * h;
        if let Some(t) = t {
            out[t] = q[t] * u;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riemann::testutil::{conservation_error, solve_one};

    #[test]
    fn equal_states_are_silent() {
        let rs = ShallowWater::new(9.81, 2).unwrap();
        let q = [1.3, 0.4, -0.2];
        let out = solve_one(&rs, 0, &q, &q, &[], &[]);
        assert!(out.waves.iter().chain(&out.amdq).chain(&out.apdq).all(|&v| v == 0.0));
    }

    #[test]
    fn roe_averages_for_still_water() {
        let rs = ShallowWater::new(1.0, 1).unwrap();
        let out = solve_one(&rs, 0, &[2.0, 0.0], &[1.0, 0.0], &[], &[]);
        // u_hat = 0, c_hat = sqrt(g (2 + 1) / 2)
        let c = 1.5_f64.sqrt();
        assert!((c - 1.224744871).abs() < 1e-9);
        assert!((out.speeds[0] + c).abs() < 1e-15);
        assert!((out.speeds[1] - c).abs() < 1e-15);
    }

    #[test]
    fn fluctuations_sum_to_flux_jump() {
        let rs = ShallowWater::new(9.81, 2).unwrap();
        for dir in 0..2 {
            let err = conservation_error(&rs, dir, &[1.0, 0.3, -0.5], &[0.4, 1.1, 0.2], &[], &[]);
            assert!(err < 1e-13, "dir {dir}: {err}");
        }
    }

    #[test]
    fn entropy_fix_splits_transonic_rarefaction() {
        // u - c goes from -0.2 on the left to about +0.79 on the right
        let ql = [1.0, 0.8];
        let qr = [0.5, 0.75];
        let fixed = solve_one(&ShallowWater::new(1.0, 1).unwrap(), 0, &ql, &qr, &[], &[]);
        let plain = solve_one(
            &ShallowWater::new(1.0, 1).unwrap().with_entropy_fix(false),
            0,
            &ql,
            &qr,
            &[],
            &[],
        );
        assert_ne!(fixed.amdq, plain.amdq);
        for k in 0..2 {
            let a = fixed.amdq[k] + fixed.apdq[k];
            let b = plain.amdq[k] + plain.apdq[k];
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn dry_state_rejected() {
        let rs = ShallowWater::new(1.0, 1).unwrap();
        let mut out = crate::riemann::RiemannOutput::new(2, 2);
        assert!(rs.solve(0, &[0.0, 0.0], &[1.0, 0.0], &[], &[], &mut out).is_err());
    }
}
