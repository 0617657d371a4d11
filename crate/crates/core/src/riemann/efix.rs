//! Harten–Hyman entropy fix for Roe-type solvers.

use super::Slot;

/// Computes fluctuations from the waves in `out`, splitting the first or last
/// family when it is a transonic rarefaction.
///
/// `first` / `last` return the characteristic speed of the first / last
/// family at a state, or `None` when the state is unphysical. The right-going
/// fluctuation is `sum_p s_p W_p - A-dQ`, so the split never changes the
/// total.
pub(crate) fn harten_hyman(
    out: &mut Slot<'_>,
    num_eqn: usize,
    ql: &[f64],
    qr: &[f64],
    first: impl Fn(&[f64]) -> Option<f64>,
    last: impl Fn(&[f64]) -> Option<f64>,
) {
    let mw = out.speeds.len();
    let m = num_eqn;
    let mut scratch = [0.0; 8];
    let state = &mut scratch[..m];

    // left-going fraction of each wave
    let mut fraction = [0.0; 8];
    for p in 0..mw {
        fraction[p] = out.speeds[p].min(0.0);
    }

    for k in 0..m {
        state[k] = ql[k] + out.waves[k];
    }
    if let (Some(s_left), Some(s_right)) = (first(ql), first(state)) {
        if s_left < 0.0 && s_right > 0.0 {
            fraction[0] = s_left * (s_right - out.speeds[0]) / (s_right - s_left);
        }
    }

    let lw = (mw - 1) * m;
    for k in 0..m {
        state[k] = qr[k] - out.waves[lw + k];
    }
    if let (Some(s_left), Some(s_right)) = (last(state), last(qr)) {
        if s_left < 0.0 && s_right > 0.0 {
            fraction[mw - 1] = s_left * (s_right - out.speeds[mw - 1]) / (s_right - s_left);
        }
    }

    for k in 0..m {
        let mut left = 0.0;
        let mut total = 0.0;
        for p in 0..mw {
            let w = out.waves[p * m + k];
            left += fraction[p] * w;
            total += out.speeds[p] * w;
        }
        out.amdq[k] = left;
        out.apdq[k] = total - left;
    }
}
