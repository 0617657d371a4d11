//! Exact-rational WENO tables.
//!
//! For a sub-stencil width `k` (formal order `2k - 1`) this module derives,
//! by solving polynomial-reproduction systems over the rationals:
//!
//! * reconstruction coefficients `c[r][j]` so that `sum_j c[r][j] Q[i-r+j]`
//!   is the cell-edge value of the degree `k - 1` polynomial matching the
//!   cell averages of stencil `r`;
//! * optimal linear weights `d[r]` combining the `k` sub-stencils into the
//!   full `2k - 1` point reconstruction;
//! * Jiang–Shu smoothness indicators as quadratic forms `beta_r = Q^T B_r Q`.
//!
//! Tables are built on first use and memoized. Kernels use an `f64` copy.

use std::io::Write;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Largest supported sub-stencil width (order 17).
pub const MAX_K: usize = 9;

/// Default `epsilon` in the nonlinear weights.
pub const DEFAULT_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WenoError {
    #[error("sub-stencil width {0} outside 1..=9")]
    Width(usize),
    #[error("weno order must be odd in 5..17 (got {0})")]
    Order(usize),
}

/// Edge of the target cell where the reconstruction is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Point {
    LeftEdge,
    RightEdge,
}

impl Point {
    /// Position in cell-width units relative to the cell center.
    fn offset(self) -> BigRational {
        let half = ratio(1, 2);
        match self {
            Point::LeftEdge => -half,
            Point::RightEdge => half,
        }
    }
}

/// Sub-stencil width `k` for a WENO order `2k - 1` in 5..=17.
pub fn width_for_order(order: usize) -> Result<usize, WenoError> {
    if order % 2 == 1 && (5..=17).contains(&order) {
        Ok(order.div_ceil(2))
    } else {
        Err(WenoError::Order(order))
    }
}

/// Positive/negative split of a weight vector containing negative entries.
///
/// `d = sigma_plus * positive - sigma_minus * negative`, with both weight
/// vectors positive and summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSplit {
    pub positive: Vec<BigRational>,
    pub negative: Vec<BigRational>,
    pub sigma_plus: BigRational,
    pub sigma_minus: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WenoTables {
    pub k: usize,
    pub point: Point,
    /// `recon_coeffs[r][j]` multiplies `Q[i - r + j]`.
    pub recon_coeffs: Vec<Vec<BigRational>>,
    /// Indexed by the stencil shift `r`.
    pub optimal_weights: Vec<BigRational>,
    /// `smoothness_forms[r][a][b]` multiplies `Q[i-r+a] Q[i-r+b]`.
    pub smoothness_forms: Vec<Vec<Vec<BigRational>>>,
    pub split: Option<WeightSplit>,
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn check_width(k: usize) -> Result<(), WenoError> {
    if (1..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(WenoError::Width(k))
    }
}

/// Average of `x^m` over the unit cell whose center is `c`.
fn monomial_average(c: &BigRational, m: usize) -> BigRational {
    let half = ratio(1, 2);
    let hi = c + &half;
    let lo = c - &half;
    let e = m as i32 + 1;
    (pow(&hi, e) - pow(&lo, e)) / int(e as i64)
}

fn pow(x: &BigRational, e: i32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Solves `a x = b` by Gauss–Jordan elimination; `a` must be nonsingular.
fn solve(mut a: Vec<Vec<BigRational>>, mut b: Vec<Vec<BigRational>>) -> Vec<Vec<BigRational>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero()).expect("singular reproduction system");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = a[col][col].recip();
        for v in a[col].iter_mut() {
            *v *= &inv;
        }
        for v in b[col].iter_mut() {
            *v *= &inv;
        }
        for row in 0..n {
            if row == col || a[row][col].is_zero() {
                continue;
            }
            let f = a[row][col].clone();
            for c in 0..n {
                let t = &f * &a[col][c];
                a[row][c] -= t;
            }
            for c in 0..b[row].len() {
                let t = &f * &b[col][c];
                b[row][c] -= t;
            }
        }
    }
    b
}

/// Averages matrix `M[j][m]` of `x^m` over `width` cells starting at
/// relative cell `first`.
fn averages_matrix(first: i64, width: usize) -> Vec<Vec<BigRational>> {
    (0..width)
        .map(|j| {
            let c = int(first + j as i64);
            (0..width).map(|m| monomial_average(&c, m)).collect()
        })
        .collect()
}

/// Coefficients giving the value at `x` of the polynomial matching the
/// averages of `width` cells starting at relative cell `first`.
fn point_coeffs(first: i64, width: usize, x: &BigRational) -> Vec<BigRational> {
    // sum_j c_j avg_j(x^m) = x^m for every m: solve M^T c = e
    let m = averages_matrix(first, width);
    let mt: Vec<Vec<BigRational>> = (0..width)
        .map(|r| (0..width).map(|c| m[c][r].clone()).collect())
        .collect();
    let rhs: Vec<Vec<BigRational>> = (0..width).map(|p| vec![pow(x, p as i32)]).collect();
    solve(mt, rhs).into_iter().map(|mut row| row.remove(0)).collect()
}

pub fn recon_coeffs(k: usize, r: usize, point: Point) -> Result<Vec<BigRational>, WenoError> {
    check_width(k)?;
    if r >= k {
        return Err(WenoError::Width(k));
    }
    Ok(point_coeffs(-(r as i64), k, &point.offset()))
}

/// Coefficients of the full `2k - 1` point reconstruction, leftmost first.
pub fn full_stencil_coeffs(k: usize, point: Point) -> Result<Vec<BigRational>, WenoError> {
    check_width(k)?;
    Ok(point_coeffs(-(k as i64 - 1), 2 * k - 1, &point.offset()))
}

/// Optimal weights indexed by stencil shift `r`.
pub fn optimal_weights(k: usize, point: Point) -> Result<Vec<BigRational>, WenoError> {
    check_width(k)?;
    let full = full_stencil_coeffs(k, point)?;
    let subs: Vec<Vec<BigRational>> = (0..k)
        .map(|r| recon_coeffs(k, r, point))
        .collect::<Result<_, _>>()?;
    // full index t (cell i-(k-1)+t) is first touched by stencil r = k-1-t,
    // whose leading coefficient is nonzero, so peel weights off in order
    let mut d = vec![BigRational::zero(); k];
    for t in 0..k {
        let r = k - 1 - t;
        let mut rest = full[t].clone();
        for (rr, dr) in d.iter().enumerate().skip(r + 1) {
            rest -= dr * &subs[rr][t - (k - 1 - rr)];
        }
        d[r] = rest / &subs[r][0];
    }
    debug_assert!(combine(&d, &subs) == full);
    Ok(d)
}

/// `sum_r d_r c_r` aligned onto the full stencil.
pub fn combine(d: &[BigRational], subs: &[Vec<BigRational>]) -> Vec<BigRational> {
    let k = d.len();
    let mut out = vec![BigRational::zero(); 2 * k - 1];
    for (r, (dr, c)) in d.iter().zip(subs).enumerate() {
        for (j, cj) in c.iter().enumerate() {
            out[k - 1 - r + j] += dr * cj;
        }
    }
    out
}

/// Jiang–Shu smoothness forms, one `k x k` symmetric matrix per stencil.
pub fn smoothness_coeffs(k: usize) -> Result<Vec<Vec<Vec<BigRational>>>, WenoError> {
    check_width(k)?;
    // gram[m][n] = sum_l int_{-1/2}^{1/2} D^l x^m D^l x^n dx
    let falling = |m: usize, l: usize| -> i64 { (m - l + 1..=m).map(|v| v as i64).product() };
    let mut gram = vec![vec![BigRational::zero(); k]; k];
    for (m, row) in gram.iter_mut().enumerate() {
        for (n, g) in row.iter_mut().enumerate() {
            for l in 1..k.min(m.min(n) + 1) {
                let p = (m - l) + (n - l);
                if p % 2 == 1 {
                    continue;
                }
                // int x^p over [-1/2, 1/2] = 2 (1/2)^(p+1) / (p+1)
                let integral = int(2) * pow(&ratio(1, 2), p as i32 + 1) / int(p as i64 + 1);
                *g += int(falling(m, l) * falling(n, l)) * integral;
            }
        }
    }
    let mut forms = Vec::with_capacity(k);
    for r in 0..k {
        // polynomial coefficients a = M^{-1} Q
        let ident: Vec<Vec<BigRational>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }).collect())
            .collect();
        let minv = solve(averages_matrix(-(r as i64), k), ident);
        let mut b = vec![vec![BigRational::zero(); k]; k];
        for a in 0..k {
            for c in 0..k {
                let mut acc = BigRational::zero();
                for m in 0..k {
                    if minv[m][a].is_zero() {
                        continue;
                    }
                    for n in 0..k {
                        acc += &minv[m][a] * &gram[m][n] * &minv[n][c];
                    }
                }
                b[a][c] = acc;
            }
        }
        forms.push(b);
    }
    Ok(forms)
}

/// Shi's positive/negative split; `None` when every weight is non-negative.
pub fn split_weights(d: &[BigRational]) -> Option<WeightSplit> {
    if !d.iter().any(|v| v.is_negative()) {
        return None;
    }
    let half = ratio(1, 2);
    let plus: Vec<BigRational> = d.iter().map(|v| (v + int(3) * v.abs()) * &half).collect();
    let minus: Vec<BigRational> = plus.iter().zip(d).map(|(p, v)| p - v).collect();
    let sigma_plus: BigRational = plus.iter().cloned().sum();
    let sigma_minus: BigRational = minus.iter().cloned().sum();
    Some(WeightSplit {
        positive: plus.iter().map(|v| v / &sigma_plus).collect(),
        negative: minus.iter().map(|v| v / &sigma_minus).collect(),
        sigma_plus,
        sigma_minus,
    })
}

impl WenoTables {
    pub fn generate(k: usize, point: Point) -> Result<Self, WenoError> {
        check_width(k)?;
        let recon = (0..k).map(|r| recon_coeffs(k, r, point)).collect::<Result<_, _>>()?;
        let weights = optimal_weights(k, point)?;
        Ok(Self {
            k,
            point,
            recon_coeffs: recon,
            split: split_weights(&weights),
            optimal_weights: weights,
            smoothness_forms: smoothness_coeffs(k)?,
        })
    }

    /// Writes one `k r j numerator/denominator` line per reconstruction
    /// coefficient, followed by commented weight lines.
    pub fn dump(&self, out: &mut impl Write) -> std::io::Result<()> {
        let side = match self.point {
            Point::LeftEdge => "left",
            Point::RightEdge => "right",
        };
        writeln!(out, "# k = {} {side} edge reconstruction coefficients", self.k)?;
        for (r, row) in self.recon_coeffs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                writeln!(out, "{} {r} {j} {}/{}", self.k, c.numer(), c.denom())?;
            }
        }
        for (r, d) in self.optimal_weights.iter().enumerate() {
            writeln!(out, "# weight {} {r} {}/{}", self.k, d.numer(), d.denom())?;
        }
        Ok(())
    }
}

/// Memoized rational tables.
pub fn tables(k: usize, point: Point) -> Result<&'static WenoTables, WenoError> {
    static CACHE: [[OnceLock<WenoTables>; 2]; MAX_K] = [const { [const { OnceLock::new() }, const { OnceLock::new() }] }; MAX_K];
    check_width(k)?;
    let slot = &CACHE[k - 1][point as usize];
    Ok(slot.get_or_init(|| WenoTables::generate(k, point).expect("width checked")))
}

/// Floating-point copy of [`WenoTables`] for kernel use.
#[derive(Debug, Clone, PartialEq)]
pub struct WenoKernel {
    pub k: usize,
    pub point: Point,
    pub coeffs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub forms: Vec<Vec<Vec<f64>>>,
    /// `(positive, negative, sigma_plus, sigma_minus)` when split.
    pub split: Option<(Vec<f64>, Vec<f64>, f64, f64)>,
}

fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().expect("finite rational")
}

impl From<&WenoTables> for WenoKernel {
    fn from(t: &WenoTables) -> Self {
        let vec = |v: &[BigRational]| v.iter().map(to_f64).collect::<Vec<_>>();
        Self {
            k: t.k,
            point: t.point,
            coeffs: t.recon_coeffs.iter().map(|r| vec(r)).collect(),
            weights: vec(&t.optimal_weights),
            forms: t
                .smoothness_forms
                .iter()
                .map(|b| b.iter().map(|row| vec(row)).collect())
                .collect(),
            split: t.split.as_ref().map(|s| {
                (vec(&s.positive), vec(&s.negative), to_f64(&s.sigma_plus), to_f64(&s.sigma_minus))
            }),
        }
    }
}

/// Memoized floating-point kernel.
pub fn kernel(k: usize, point: Point) -> Result<&'static WenoKernel, WenoError> {
    static CACHE: [[OnceLock<WenoKernel>; 2]; MAX_K] = [const { [const { OnceLock::new() }, const { OnceLock::new() }] }; MAX_K];
    let t = tables(k, point)?;
    Ok(CACHE[k - 1][point as usize].get_or_init(|| WenoKernel::from(t)))
}

/// Nonlinear WENO reconstruction from a window of `2k - 1` cell averages
/// centered on the target cell.
pub fn reconstruct(window: &[f64], kern: &WenoKernel, epsilon: f64) -> f64 {
    let k = kern.k;
    debug_assert_eq!(window.len(), 2 * k - 1);
    // sub-reconstructions are formed relative to the center value so that
    // constant data is reproduced exactly
    let center = window[k - 1];
    let mut p = [0.0; MAX_K];
    let mut beta = [0.0; MAX_K];
    for r in 0..k {
        let q = &window[k - 1 - r..2 * k - 1 - r];
        p[r] = kern.coeffs[r].iter().zip(q).map(|(c, v)| c * (v - center)).sum();
        let form = &kern.forms[r];
        let mut b = 0.0;
        for a in 0..k {
            let row: f64 = form[a].iter().zip(q).map(|(f, v)| f * v).sum();
            b += q[a] * row;
        }
        beta[r] = b;
    }
    let nonlinear = |d: &[f64]| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for r in 0..k {
            let e = epsilon + beta[r];
            let alpha = d[r] / (e * e);
            num += alpha * p[r];
            den += alpha;
        }
        num / den
    };
    match &kern.split {
        None => center + nonlinear(&kern.weights),
        Some((pos, neg, sp, sm)) => center + (sp * nonlinear(pos) - sm * nonlinear(neg)),
    }
}
