//! The classic second-order wave-propagation scheme.
//!
//! Each sweep solves Riemann problems at every interface of a grid line,
//! applies the Godunov update through the fluctuations and, for second
//! order, adds correction fluxes built from limited waves. 2D problems use
//! Strang-ordered dimensional splitting (x/2, y, x/2).

use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::State;
use crate::riemann::{RiemannOutput, RiemannSolver};

/// Wave limiter applied to each wave family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LimiterKind {
    /// No limiting: the unlimited Lax–Wendroff correction.
    Unlimited,
    Minmod,
    Superbee,
    #[default]
    MC,
    VanLeer,
}

impl FromStr for LimiterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "none" => Self::Unlimited,
            "minmod" => Self::Minmod,
            "superbee" => Self::Superbee,
            "mc" => Self::MC,
            "vanleer" => Self::VanLeer,
            other => return Err(Error::Config(format!("unknown limiter '{other}'"))),
        })
    }
}

/// `phi(theta)` for the given limiter.
pub fn limiter_value(theta: f64, kind: LimiterKind) -> f64 {
    match kind {
        LimiterKind::Unlimited => 1.0,
        LimiterKind::Minmod => theta.min(1.0).max(0.0),
        LimiterKind::Superbee => 0.0_f64.max((2.0 * theta).min(1.0)).max(theta.min(2.0)),
        LimiterKind::MC => ((1.0 + theta) / 2.0).min(2.0).min(2.0 * theta).max(0.0),
        LimiterKind::VanLeer => (theta + theta.abs()) / (1.0 + theta.abs()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicConfig {
    /// One limiter per wave family; a single entry applies to every family.
    pub limiters: Vec<LimiterKind>,
    /// 1 = Godunov only, 2 = with limited correction fluxes.
    pub order: u8,
    pub cfl_desired: f64,
    pub cfl_max: f64,
}

impl Default for ClassicConfig {
    fn default() -> Self {
        Self {
            limiters: vec![LimiterKind::MC],
            order: 2,
            cfl_desired: 0.9,
            cfl_max: 1.0,
        }
    }
}

impl ClassicConfig {
    pub fn with_limiter(mut self, kind: LimiterKind) -> Self {
        self.limiters = vec![kind];
        self
    }

    pub fn with_order(mut self, order: u8) -> Self {
        self.order = order;
        self
    }

    pub fn with_cfl(mut self, desired: f64, max: f64) -> Self {
        self.cfl_desired = desired;
        self.cfl_max = max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.order == 1 || self.order == 2) {
            return Err(Error::Config(format!("classic order must be 1 or 2, got {}", self.order)));
        }
        if !(self.cfl_desired > 0.0 && self.cfl_desired <= self.cfl_max && self.cfl_max <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 < cfl_desired ({}) <= cfl_max ({}) <= 1",
                self.cfl_desired, self.cfl_max
            )));
        }
        if self.limiters.is_empty() {
            return Err(Error::Config("at least one limiter required".into()));
        }
        Ok(())
    }

    fn limiter(&self, family: usize) -> LimiterKind {
        if self.limiters.len() == 1 {
            self.limiters[0]
        } else {
            self.limiters[family.min(self.limiters.len() - 1)]
        }
    }

    /// Ghost layers the classic stencil needs.
    pub const NUM_GHOST: usize = 2;
}

/// Reusable buffers for one grid line.
#[derive(Debug, Default)]
pub struct SweepScratch {
    rp: RiemannOutput,
    line_q: Vec<f64>,
    line_aux: Vec<f64>,
    dtdx: Vec<f64>,
    correction: Vec<f64>,
    update: Vec<f64>,
}

/// Advances one ghost-inclusive grid line in place and returns the Courant
/// number observed at interfaces touching interior cells.
///
/// `q` holds `len * num_eqn` values, `aux` `len * num_aux`, `kappa` `len`
/// capacities. Only the `len - 2 g` interior cells are modified.
#[allow(clippy::too_many_arguments)]
pub fn sweep_line(
    rs: &dyn RiemannSolver,
    dir: usize,
    q: &mut [f64],
    aux: &[f64],
    kappa: &[f64],
    num_ghost: usize,
    dt: f64,
    dx: f64,
    cfg: &ClassicConfig,
    scratch: &mut SweepScratch,
) -> Result<f64> {
    let m = rs.num_eqn();
    let ma = rs.num_aux();
    let mw = rs.num_waves();
    let len = kappa.len();
    let g = num_ghost;
    if len < 2 * g + 1 || g < ClassicConfig::NUM_GHOST {
        return Err(Error::Config(format!(
            "classic sweep needs at least {} ghost cells, got {g}",
            ClassicConfig::NUM_GHOST
        )));
    }
    let n = len - 2 * g;

    // interface I (between cells I-1 and I) is stored at index I-1
    let (aux_l, aux_r) = if ma == 0 {
        (&[][..], &[][..])
    } else {
        (&aux[..(len - 1) * ma], &aux[ma..len * ma])
    };
    rs.solve(dir, &q[..(len - 1) * m], &q[m..len * m], aux_l, aux_r, &mut scratch.rp)?;
    let rp = &scratch.rp;

    scratch.dtdx.clear();
    scratch.dtdx.extend(kappa.iter().map(|k| dt / (k * dx)));
    let dtdx = &scratch.dtdx;

    let mut cfl: f64 = 0.0;
    for iface in g..=g + n {
        for p in 0..mw {
            let s = rp.speed(iface - 1, p);
            let c = if s > 0.0 {
                s * dtdx[iface]
            } else {
                -s * dtdx[iface - 1]
            };
            cfl = cfl.max(c);
        }
    }

    let update = &mut scratch.update;
    update.clear();
    update.resize(n * m, 0.0);
    for i in 0..n {
        let cell = g + i;
        let apdq = rp.apdq_at(cell - 1);
        let amdq = rp.amdq_at(cell);
        for k in 0..m {
            update[i * m + k] = -dtdx[cell] * (apdq[k] + amdq[k]);
        }
    }

    if cfg.order == 2 {
        // correction fluxes at interfaces g..=g+n, stored from 0
        let corr = &mut scratch.correction;
        corr.clear();
        corr.resize((n + 1) * m, 0.0);
        for (slot, iface) in (g..=g + n).enumerate() {
            let idx = iface - 1;
            let dtdx_ave = 0.5 * (dtdx[iface - 1] + dtdx[iface]);
            for p in 0..mw {
                let s = rp.speed(idx, p);
                if s == 0.0 {
                    continue;
                }
                let w = rp.wave(idx, p);
                let norm2: f64 = w.iter().map(|v| v * v).sum();
                if norm2 == 0.0 {
                    continue;
                }
                let upwind = if s > 0.0 { rp.wave(idx - 1, p) } else { rp.wave(idx + 1, p) };
                let theta = upwind.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / norm2;
                let phi = limiter_value(theta, cfg.limiter(p));
                let factor = if rp.fwave {
                    0.5 * s.signum() * (1.0 - s.abs() * dtdx_ave) * phi
                } else {
                    0.5 * s.abs() * (1.0 - s.abs() * dtdx_ave) * phi
                };
                for k in 0..m {
                    corr[slot * m + k] += factor * w[k];
                }
            }
        }
        for i in 0..n {
            let cell = g + i;
            for k in 0..m {
                update[i * m + k] -= dtdx[cell] * (corr[(i + 1) * m + k] - corr[i * m + k]);
            }
        }
    }

    for i in 0..n {
        let base = (g + i) * m;
        for k in 0..m {
            q[base + k] += update[i * m + k];
        }
    }
    Ok(cfl)
}

/// One classic step on a 1D patch whose ghost cells are already filled.
pub fn step1d_classic(
    state: &mut State,
    rs: &dyn RiemannSolver,
    dt: f64,
    cfg: &ClassicConfig,
) -> Result<f64> {
    if state.rank() != 1 {
        return Err(Error::Config("step1d_classic needs a 1D patch".into()));
    }
    let mut scratch = SweepScratch::default();
    let cfl = sweep_x(state, rs, dt, cfg, &mut scratch)?;
    if !state.interior_is_finite() {
        return Err(Error::NonFinite(state.t));
    }
    Ok(cfl)
}

/// One Strang-split classic step on a 2D patch.
///
/// `fill_ghosts` is called between sweeps; ghosts must already be valid on
/// entry.
pub fn step2d_classic(
    state: &mut State,
    rs: &dyn RiemannSolver,
    dt: f64,
    cfg: &ClassicConfig,
    fill_ghosts: &mut dyn FnMut(&mut State) -> Result<()>,
) -> Result<f64> {
    if state.rank() != 2 {
        return Err(Error::Config("step2d_classic needs a 2D patch".into()));
    }
    let mut scratch = SweepScratch::default();
    let mut cfl = sweep_x(state, rs, 0.5 * dt, cfg, &mut scratch)?;
    fill_ghosts(state)?;
    cfl = cfl.max(sweep_y(state, rs, dt, cfg, &mut scratch)?);
    fill_ghosts(state)?;
    cfl = cfl.max(sweep_x(state, rs, 0.5 * dt, cfg, &mut scratch)?);
    if !state.interior_is_finite() {
        return Err(Error::NonFinite(state.t));
    }
    Ok(cfl)
}

fn sweep_x(
    state: &mut State,
    rs: &dyn RiemannSolver,
    dt: f64,
    cfg: &ClassicConfig,
    scratch: &mut SweepScratch,
) -> Result<f64> {
    let [nx, _] = state.patch().ghosted_shape();
    let [_, my] = state.patch().interior_shape();
    let [_, oy] = state.patch().interior_offset();
    let g = state.num_ghost();
    let dx = state.patch().dim(0).delta();
    let (m, ma) = (state.num_eqn(), state.num_aux());
    let mut kappa = vec![1.0; nx];
    let mut cfl: f64 = 0.0;
    for j in oy..oy + my {
        for (i, k) in kappa.iter_mut().enumerate() {
            *k = state.capacity(i, j);
        }
        let row = j * nx;
        let aux = std::mem::take(&mut state.aux);
        let result = sweep_line(
            rs,
            0,
            &mut state.q[row * m..(row + nx) * m],
            &aux[row * ma..(row + nx) * ma],
            &kappa,
            g,
            dt,
            dx,
            cfg,
            scratch,
        );
        state.aux = aux;
        cfl = cfl.max(result?);
    }
    Ok(cfl)
}

fn sweep_y(
    state: &mut State,
    rs: &dyn RiemannSolver,
    dt: f64,
    cfg: &ClassicConfig,
    scratch: &mut SweepScratch,
) -> Result<f64> {
    let [_, ny] = state.patch().ghosted_shape();
    let [mx, _] = state.patch().interior_shape();
    let [ox, _] = state.patch().interior_offset();
    let g = state.num_ghost();
    let dy = state.patch().dim(1).delta();
    let (m, ma) = (state.num_eqn(), state.num_aux());
    let mut kappa = vec![1.0; ny];
    let mut line_q = std::mem::take(&mut scratch.line_q);
    let mut line_aux = std::mem::take(&mut scratch.line_aux);
    let mut cfl: f64 = 0.0;
    for i in ox..ox + mx {
        line_q.clear();
        line_aux.clear();
        for (j, k) in kappa.iter_mut().enumerate() {
            *k = state.capacity(i, j);
            line_q.extend_from_slice(state.q_cell(i, j));
            line_aux.extend_from_slice(state.aux_cell(i, j));
        }
        let c = sweep_line(rs, 1, &mut line_q, &line_aux, &kappa, g, dt, dy, cfg, scratch)?;
        cfl = cfl.max(c);
        for j in g..ny - g {
            state.q_cell_mut(i, j).copy_from_slice(&line_q[j * m..(j + 1) * m]);
        }
    }
    let _ = ma;
    scratch.line_q = line_q;
    scratch.line_aux = line_aux;
    Ok(cfl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_bcs, weighted_total, BoundaryCondition, BoundarySpec, Dimension, Patch};
    use crate::riemann::{Advection, ShallowWater};
    use proptest::prelude::*;

    const TVD: [LimiterKind; 4] = [
        LimiterKind::Minmod,
        LimiterKind::Superbee,
        LimiterKind::MC,
        LimiterKind::VanLeer,
    ];

    #[test]
    fn limiter_examples() {
        for kind in TVD {
            assert_eq!(limiter_value(1.0, kind), 1.0, "{kind:?}");
        }
        assert_eq!(limiter_value(-0.5, LimiterKind::Minmod), 0.0);
        assert_eq!(limiter_value(0.5, LimiterKind::Superbee), 1.0);
        assert_eq!(limiter_value(7.0, LimiterKind::Unlimited), 1.0);
        assert_eq!(limiter_value(3.0, LimiterKind::MC), 2.0);
        assert_eq!(limiter_value(0.2, LimiterKind::MC), 0.4);
    }

    proptest! {
        #[test]
        fn limiters_stay_in_tvd_region(theta in -10.0f64..10.0) {
            for kind in TVD {
                let phi = limiter_value(theta, kind);
                if theta <= 0.0 {
                    prop_assert_eq!(phi, 0.0);
                } else {
                    prop_assert!(phi >= 0.0);
                    prop_assert!(phi <= (2.0 * theta).min(2.0) + 1e-15);
                }
            }
        }
    }

    fn periodic_1d(values: &[f64]) -> (State, BoundarySpec) {
        let patch = Patch::new(vec![Dimension::new("x", 0.0, 1.0, values.len()).unwrap()], 2).unwrap();
        let mut s = State::new(patch, 1, 0);
        s.set_interior_q(values);
        let spec = BoundarySpec::uniform(1, BoundaryCondition::Periodic).unwrap();
        apply_bcs(&mut s, &spec, 2).unwrap();
        (s, spec)
    }

    #[test]
    fn constant_state_unchanged() {
        let rs = ShallowWater::new(1.0, 1).unwrap();
        let patch = Patch::new(vec![Dimension::new("x", 0.0, 1.0, 8).unwrap()], 2).unwrap();
        let mut s = State::new(patch, 2, 0);
        s.set_interior_q(&[2.0, 0.5].repeat(8));
        let spec = BoundarySpec::uniform(1, BoundaryCondition::Extrapolation).unwrap();
        apply_bcs(&mut s, &spec, 2).unwrap();
        let before = s.interior_q();
        let dt = 0.01;
        let cfl = step1d_classic(&mut s, &rs, dt, &ClassicConfig::default()).unwrap();
        assert_eq!(s.interior_q(), before);
        let speed = 0.25 + 2.0_f64.sqrt();
        assert!((cfl - speed * dt / 0.125).abs() < 1e-14);
    }

    #[test]
    fn unit_courant_upwind_shifts_exactly() {
        let vals: Vec<f64> = (0..10).map(|i| (i * i) as f64).collect();
        let (mut s, _) = periodic_1d(&vals);
        let cfg = ClassicConfig::default().with_order(1);
        let cfl = step1d_classic(&mut s, &Advection::new_1d(1.0), 0.1, &cfg).unwrap();
        assert!((cfl - 1.0).abs() < 1e-15);
        let out = s.interior_q();
        for i in 0..10 {
            assert_eq!(out[i], vals[(i + 9) % 10]);
        }
    }

    #[test]
    fn unlimited_second_order_is_lax_wendroff() {
        let n = 32;
        let vals: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64).sin())
            .collect();
        let (mut s, _) = periodic_1d(&vals);
        let dx = 1.0 / n as f64;
        let dt = 0.6 * dx;
        let nu = dt / dx;
        let cfg = ClassicConfig::default().with_limiter(LimiterKind::Unlimited);
        step1d_classic(&mut s, &Advection::new_1d(1.0), dt, &cfg).unwrap();
        let out = s.interior_q();
        for i in 0..n {
            let (qm, q0, qp) = (vals[(i + n - 1) % n], vals[i], vals[(i + 1) % n]);
            let lw = q0 - 0.5 * nu * (qp - qm) + 0.5 * nu * nu * (qp - 2.0 * q0 + qm);
            assert!((out[i] - lw).abs() < 1e-15, "cell {i}");
        }
    }

    fn total_variation(v: &[f64]) -> f64 {
        (0..v.len()).map(|i| (v[(i + 1) % v.len()] - v[i]).abs()).sum()
    }

    proptest! {
        #[test]
        fn tvd_and_conservative_for_scalar_advection(
            vals in proptest::collection::vec(-1.0f64..1.0, 12..40),
            nu in 0.05f64..1.0,
            u_sign in proptest::bool::ANY,
            kind in 0usize..4,
        ) {
            let (mut s, _) = periodic_1d(&vals);
            let u = if u_sign { 1.0 } else { -1.0 };
            let dx = 1.0 / vals.len() as f64;
            let cfg = ClassicConfig::default().with_limiter(TVD[kind]);
            let before_tv = total_variation(&vals);
            let before_total = weighted_total(&s)[0];
            let cfl = step1d_classic(&mut s, &Advection::new_1d(u), nu * dx, &cfg).unwrap();
            let after = s.interior_q();
            prop_assert!(total_variation(&after) <= before_tv + 1e-12);
            let after_total = weighted_total(&s)[0];
            prop_assert!((after_total - before_total).abs() <= 1e-13 * (1.0 + before_total.abs()));
            prop_assert!((cfl - nu).abs() < 1e-12);
        }

        #[test]
        fn first_order_creates_no_new_extrema(
            vals in proptest::collection::vec(-1.0f64..1.0, 8..30),
            nu in 0.05f64..1.0,
        ) {
            let (mut s, _) = periodic_1d(&vals);
            let cfg = ClassicConfig::default().with_order(1);
            let dx = 1.0 / vals.len() as f64;
            step1d_classic(&mut s, &Advection::new_1d(1.0), nu * dx, &cfg).unwrap();
            let (lo, hi) = vals.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            for v in s.interior_q() {
                prop_assert!(v >= lo - 1e-13 && v <= hi + 1e-13);
            }
        }
    }

    #[test]
    fn capacity_weighted_total_conserved() {
        let n = 40;
        let patch = Patch::new(vec![Dimension::new("x", 0.0, 1.0, n).unwrap()], 2).unwrap();
        let mut s = State::new(patch, 2, 1).with_capacity_index(Some(0)).unwrap();
        let mut vals = Vec::new();
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            vals.extend([1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).sin(), 0.2]);
        }
        s.set_interior_q(&vals);
        for (i, j) in s.interior_cells().collect::<Vec<_>>() {
            let x = s.patch().center_of(i, j)[0];
            s.aux_cell_mut(i, j)[0] = 1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).sin();
        }
        let spec = BoundarySpec::uniform(1, BoundaryCondition::Periodic).unwrap();
        let rs = ShallowWater::new(1.0, 1).unwrap();
        let before = weighted_total(&s);
        for _ in 0..20 {
            apply_bcs(&mut s, &spec, 2).unwrap();
            let cfl = step1d_classic(&mut s, &rs, 0.004, &ClassicConfig::default()).unwrap();
            assert!(cfl < 1.0);
        }
        let after = weighted_total(&s);
        for k in 0..2 {
            assert!((after[k] - before[k]).abs() <= 1e-12 * before[k].abs(), "{k}");
        }
    }

    #[test]
    fn x_aligned_2d_matches_two_half_1d_steps() {
        let (mx, my) = (24, 6);
        let rs2 = ShallowWater::new(1.0, 2).unwrap();
        let rs1 = ShallowWater::new(1.0, 1).unwrap();
        let h = |x: f64| 1.0 + 0.4 * (-(x - 0.5).powi(2) * 40.0).exp();
        let hu = |x: f64| 0.1 * (2.0 * std::f64::consts::PI * x).cos();

        let patch2 = Patch::new(
            vec![
                Dimension::new("x", 0.0, 1.0, mx).unwrap(),
                Dimension::new("y", 0.0, 0.25, my).unwrap(),
            ],
            2,
        )
        .unwrap();
        let mut s2 = State::new(patch2, 3, 0);
        let mut v2 = Vec::new();
        for _j in 0..my {
            for i in 0..mx {
                let x = (i as f64 + 0.5) / mx as f64;
                v2.extend([h(x), hu(x), 0.0]);
            }
        }
        s2.set_interior_q(&v2);
        let spec2 = BoundarySpec::uniform(2, BoundaryCondition::Periodic).unwrap();
        apply_bcs(&mut s2, &spec2, 2).unwrap();

        let patch1 = Patch::new(vec![Dimension::new("x", 0.0, 1.0, mx).unwrap()], 2).unwrap();
        let mut s1 = State::new(patch1, 2, 0);
        let v1: Vec<f64> = (0..mx)
            .flat_map(|i| {
                let x = (i as f64 + 0.5) / mx as f64;
                [h(x), hu(x)]
            })
            .collect();
        s1.set_interior_q(&v1);
        let spec1 = BoundarySpec::uniform(1, BoundaryCondition::Periodic).unwrap();

        let dt = 0.01;
        let cfg = ClassicConfig::default();
        step2d_classic(&mut s2, &rs2, dt, &cfg, &mut |s| Ok(apply_bcs(s, &spec2, 2)?)).unwrap();
        for _ in 0..2 {
            apply_bcs(&mut s1, &spec1, 2).unwrap();
            step1d_classic(&mut s1, &rs1, 0.5 * dt, &cfg).unwrap();
        }
        let out1 = s1.interior_q();
        let out2 = s2.interior_q();
        for j in 0..my {
            for i in 0..mx {
                let c = (j * mx + i) * 3;
                assert!((out2[c] - out1[2 * i]).abs() < 1e-14);
                assert!((out2[c + 1] - out1[2 * i + 1]).abs() < 1e-14);
                assert_eq!(out2[c + 2], 0.0);
            }
        }
    }

    #[test]
    fn constant_2d_state_unchanged() {
        let patch = Patch::new(
            vec![
                Dimension::new("x", 0.0, 1.0, 6).unwrap(),
                Dimension::new("y", 0.0, 1.0, 5).unwrap(),
            ],
            2,
        )
        .unwrap();
        let mut s = State::new(patch, 3, 0);
        s.set_interior_q(&[1.5, 0.2, -0.1].repeat(30));
        let spec = BoundarySpec::uniform(2, BoundaryCondition::Extrapolation).unwrap();
        apply_bcs(&mut s, &spec, 2).unwrap();
        let before = s.interior_q();
        let rs = ShallowWater::new(1.0, 2).unwrap();
        step2d_classic(&mut s, &rs, 0.01, &ClassicConfig::default(), &mut |s| Ok(apply_bcs(s, &spec, 2)?)).unwrap();
        assert_eq!(before, s.interior_q());
    }

    #[test]
    fn config_validation() {
        assert!(ClassicConfig::default().validate().is_ok());
        assert!(ClassicConfig::default().with_order(3).validate().is_err());
        assert!(ClassicConfig::default().with_cfl(0.9, 1.2).validate().is_err());
        assert!(ClassicConfig::default().with_cfl(0.95, 0.9).validate().is_err());
        assert_eq!("vanleer".parse::<LimiterKind>().unwrap(), LimiterKind::VanLeer);
        assert!("fancy".parse::<LimiterKind>().is_err());
    }
}
