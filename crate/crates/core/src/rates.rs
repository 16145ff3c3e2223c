//! Contraction and expansion rates along the critical manifold.
//!
//! For `y_m < y* < y_M` (folds at `-2/3` and `2/3`)
//!
//! ```text
//! R_np(y*) = int_{y_m}^{y*} lam_upper(y) / g(x_upper(y)) dy
//! R_nm(y*) = int_{y*}^{y_M} lam_lower(y) / g(x_lower(y)) dy
//! R_p(y*)  = int_{y_m}^{y*} lam_middle(y) / g(x_middle(y)) dy
//! ```
//!
//! with `g(x) = a - x`. Stable canard cycles need `R_np > R_p` for every `y*`.

use std::io::{self, Write};

use quadrature::double_exponential;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical_manifold::{branch_x, BranchId, Y_FOLD};
use crate::error::{domain, Error, Result};
use crate::fmt_num;
use crate::spectral::leading_root;

/// Offset from a fold at which the quadrature stops; the last sliver is
/// closed with a linear extrapolation of the integrand.
pub const FOLD_OFFSET: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile {
    #[serde(rename = "J")]
    pub j: f64,
    pub tau: f64,
    pub a: f64,
    pub y_grid: Vec<f64>,
    pub r_np: Vec<f64>,
    pub r_nm: Vec<f64>,
    pub r_p: Vec<f64>,
}

/// Rates at one `y*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub r_np: f64,
    pub r_nm: f64,
    pub r_p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct H4Report {
    pub holds: bool,
    /// Span of grid points where `R_np <= R_p`.
    pub violation: Option<(f64, f64)>,
    /// `min over the grid of R_np - R_p`.
    pub min_margin: f64,
}

fn check_regime(op: &'static str, j: f64, tau: f64) -> Result<()> {
    if !(j >= 0.0) || !(tau >= 0.0) {
        return Err(domain(op, format!("need J >= 0, tau >= 0 (J = {j}, tau = {tau})")));
    }
    if j * tau >= 1.0 {
        return Err(domain(op, format!("need J*tau < 1, got {}", j * tau)));
    }
    Ok(())
}

/// Rate of the fast dynamics at the branch point: the positive root on the
/// middle branch, the real part of the rightmost root on the outer branches.
pub fn lambda_on_branch(j: f64, tau: f64, branch: BranchId, y: f64) -> Result<f64> {
    check_regime("lambda_on_branch", j, tau)?;
    let x = branch_x(branch, y)?;
    let root = leading_root(j, tau, x)?;
    if root.conjugate_pair && root.value.re >= 0.0 {
        return Err(Error::ComplexRegime { j_tau: j * tau });
    }
    Ok(root.value.re)
}

/// Height where the Lambert argument on an outer branch crosses `-1/e`
/// (real pair merging into a complex pair); the integrand has a square-root
/// kink there. Returns the upper-branch value; the lower branch is its mirror.
fn upper_kink(j: f64, tau: f64) -> Option<f64> {
    if tau == 0.0 || j == 0.0 {
        return None;
    }
    // tau A = 1 + ln(tau J), A = 1 - x^2 + J
    let x2 = 1.0 + j - (1.0 + (tau * j).ln()) / tau;
    if x2 <= 1.0 {
        return None;
    }
    let x = x2.sqrt();
    let y = x * x * x / 3.0 - x;
    (y > -Y_FOLD && y < Y_FOLD).then_some(y)
}

struct Integrand {
    j: f64,
    tau: f64,
    a: f64,
    branch: BranchId,
}

impl Integrand {
    fn eval(&self, y: f64) -> Result<f64> {
        let x = branch_x(self.branch, y)?;
        let g = self.a - x;
        let lam = lambda_on_branch(self.j, self.tau, self.branch, y)?;
        Ok(lam / g)
    }

    /// Zero of `g` strictly inside `(lo, hi)`, if any.
    fn singular_point(&self, lo: f64, hi: f64) -> Option<f64> {
        let a = self.a;
        let y = a * a * a / 3.0 - a;
        let x_ok = match self.branch {
            BranchId::Upper => a >= 1.0,
            BranchId::Middle => a.abs() <= 1.0,
            BranchId::Lower => a <= -1.0,
        };
        (x_ok && y > lo && y < hi).then_some(y)
    }

    /// `int_lo^hi`, treating endpoints that sit on a fold with the offset and
    /// a linear extrapolation of the integrand.
    fn integrate(&self, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        if let Some(y) = self.singular_point(lo, hi) {
            return Err(Error::SingularIntegrand { lo, hi, y });
        }
        let at_fold = |y: f64| (y.abs() - Y_FOLD).abs() < 1e-12;
        let mut total = 0.0;
        let (mut a, mut b) = (lo, hi);
        if at_fold(lo) {
            a = lo + FOLD_OFFSET;
            let f1 = self.eval(a)?;
            let f2 = self.eval(a + FOLD_OFFSET)?;
            let f0 = 2.0 * f1 - f2;
            total += 0.5 * FOLD_OFFSET * (f0 + f1);
        }
        if at_fold(hi) {
            b = hi - FOLD_OFFSET;
            let f1 = self.eval(b)?;
            let f2 = self.eval(b - FOLD_OFFSET)?;
            let f0 = 2.0 * f1 - f2;
            total += 0.5 * FOLD_OFFSET * (f0 + f1);
        }
        let mut cuts = vec![a];
        if self.branch != BranchId::Middle {
            if let Some(k) = upper_kink(self.j, self.tau) {
                let k = if self.branch == BranchId::Lower { -k } else { k };
                if k > a && k < b {
                    cuts.push(k);
                }
            }
        }
        cuts.push(b);
        for w in cuts.windows(2) {
            total += self.quad(w[0], w[1])?;
        }
        Ok(total)
    }

    fn quad(&self, lo: f64, hi: f64) -> Result<f64> {
        let err = std::cell::RefCell::new(None);
        let out = double_exponential::integrate(
            |y| match self.eval(y.clamp(lo, hi)) {
                Ok(v) => v,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            QUAD_TOL,
        );
        match err.into_inner() {
            Some(e) => Err(e),
            None => Ok(out.integral),
        }
    }
}

fn integrand(j: f64, tau: f64, a: f64, branch: BranchId) -> Integrand {
    Integrand { j, tau, a, branch }
}

fn check_y_star(y_star: f64) -> Result<()> {
    if !(y_star > -Y_FOLD && y_star < Y_FOLD) {
        return Err(domain("rate_integrals", format!("y* = {y_star} not in (-2/3, 2/3)")));
    }
    Ok(())
}

/// `(R_np, R_nm, R_p)` at a single `y*`.
pub fn rate_integrals(j: f64, tau: f64, a: f64, y_star: f64) -> Result<Rates> {
    check_regime("rate_integrals", j, tau)?;
    check_y_star(y_star)?;
    Ok(Rates {
        r_np: integrand(j, tau, a, BranchId::Upper).integrate(-Y_FOLD, y_star)?,
        r_nm: integrand(j, tau, a, BranchId::Lower).integrate(y_star, Y_FOLD)?,
        r_p: integrand(j, tau, a, BranchId::Middle).integrate(-Y_FOLD, y_star)?,
    })
}

/// Interior grid of `n` points, `-2/3 + k (4/3)/(n+1)` for `k = 1..=n`.
pub fn y_star_grid(n: usize) -> Vec<f64> {
    let w = 2.0 * Y_FOLD / (n + 1) as f64;
    (1..=n).map(|k| -Y_FOLD + k as f64 * w).collect()
}

/// Cumulative integrals over consecutive grid segments.
fn cumulative(f: &Integrand, grid: &[f64], from_top: bool) -> Result<Vec<f64>> {
    let mut knots = Vec::with_capacity(grid.len() + 2);
    knots.push(-Y_FOLD);
    knots.extend_from_slice(grid);
    knots.push(Y_FOLD);
    let pieces: Vec<f64> = knots
        .par_windows(2)
        .map(|w| f.integrate(w[0], w[1]))
        .collect::<Result<_>>()?;
    let n = grid.len();
    let mut out = vec![0.0; n];
    if from_top {
        // R(grid[k]) = sum of pieces k+1 ..= n
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc += pieces[k + 1];
            out[k] = acc;
        }
    } else {
        let mut acc = 0.0;
        for k in 0..n {
            acc += pieces[k];
            out[k] = acc;
        }
    }
    Ok(out)
}

/// Rates on an interior grid of `n` values of `y*`.
pub fn rate_profile(j: f64, tau: f64, a: f64, n: usize) -> Result<RateProfile> {
    check_regime("rate_profile", j, tau)?;
    if n == 0 {
        return Err(domain("rate_profile", "grid must have at least one point"));
    }
    let grid = y_star_grid(n);
    let r_np = cumulative(&integrand(j, tau, a, BranchId::Upper), &grid, false)?;
    let r_nm = cumulative(&integrand(j, tau, a, BranchId::Lower), &grid, true)?;
    let r_p = cumulative(&integrand(j, tau, a, BranchId::Middle), &grid, false)?;
    Ok(RateProfile {
        j,
        tau,
        a,
        y_grid: grid,
        r_np,
        r_nm,
        r_p,
    })
}

impl RateProfile {
    pub fn h4(&self) -> H4Report {
        let mut min_margin = f64::INFINITY;
        let mut span: Option<(f64, f64)> = None;
        for ((y, np), p) in self.y_grid.iter().zip(&self.r_np).zip(&self.r_p) {
            let m = np - p;
            min_margin = min_margin.min(m);
            if m <= 0.0 {
                span = Some(span.map_or((*y, *y), |(lo, _)| (lo, *y)));
            }
        }
        H4Report {
            holds: span.is_none(),
            violation: span,
            min_margin,
        }
    }

    /// `R_nm(y*) + R_np(y_M) - R_p(y*)` on the grid: the with-head margin,
    /// reported as literally defined.
    pub fn with_head_margin(&self) -> Result<Vec<f64>> {
        let full = integrand(self.j, self.tau, self.a, BranchId::Upper).integrate(-Y_FOLD, Y_FOLD)?;
        Ok(self
            .r_nm
            .iter()
            .zip(&self.r_p)
            .map(|(nm, p)| nm + full - p)
            .collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(String, String)]) -> io::Result<()> {
        writeln!(w, "# J={}", fmt_num(self.j))?;
        writeln!(w, "# tau={}", fmt_num(self.tau))?;
        writeln!(w, "# a={}", fmt_num(self.a))?;
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "y_star,R_np,R_nm,R_p")?;
        for i in 0..self.y_grid.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_num(self.y_grid[i]),
                fmt_num(self.r_np[i]),
                fmt_num(self.r_nm[i]),
                fmt_num(self.r_p[i])
            )?;
        }
        Ok(())
    }
}

/// Whether `R_np > R_p` at every point of an `n`-point interior grid.
pub fn h4_check(j: f64, tau: f64, a: f64, grid_n: usize) -> Result<H4Report> {
    Ok(rate_profile(j, tau, a, grid_n)?.h4())
}

/// Default grid used by [`tau_star`].
pub const TAU_STAR_GRID: usize = 200;

/// Bisect the delay at which the rate condition first fails, to a bracket
/// of width `1e-3`; returns the midpoint.
pub fn tau_star(j: f64, a: f64, bracket: (f64, f64)) -> Result<f64> {
    tau_star_with(j, a, bracket, TAU_STAR_GRID, 1e-3)
}

pub fn tau_star_with(j: f64, a: f64, bracket: (f64, f64), grid_n: usize, width: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::InvalidBracket(format!("need lo < hi, got ({lo}, {hi})")));
    }
    let holds = |tau: f64| h4_check(j, tau, a, grid_n).map(|r| r.holds);
    let (h_lo, h_hi) = (holds(lo)?, holds(hi)?);
    if h_lo == h_hi || !h_lo {
        return Err(Error::InvalidBracket(format!(
            "condition must hold at tau = {lo} and fail at tau = {hi} (got {h_lo}, {h_hi})"
        )));
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_delay_free() {
        for b in BranchId::ALL {
            let y = 0.3;
            let x = branch_x(b, y).unwrap();
            assert!((lambda_on_branch(2.0, 0.0, b, y).unwrap() - (1.0 - x * x)).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_signs() {
        let mid = lambda_on_branch(2.0, 0.3, BranchId::Middle, 0.0).unwrap();
        assert!((mid - 1.85).abs() < 0.01);
        assert!(lambda_on_branch(2.0, 0.3, BranchId::Upper, 0.0).unwrap() < 0.0);
        assert!(lambda_on_branch(2.0, 0.6, BranchId::Upper, 0.0).is_err());
    }

    #[test]
    fn kink_location() {
        let y = upper_kink(2.0, 0.3).unwrap();
        let x = branch_x(BranchId::Upper, y).unwrap();
        let arg = -0.3 * 2.0 * (-0.3 * (3.0 - x * x)).exp();
        assert!((arg + (-1f64).exp()).abs() < 1e-12);
        assert!(upper_kink(2.0, 0.0).is_none());
    }

    #[test]
    fn singular_integrand_detected() {
        // a = 1.5 puts the equilibrium inside the upper branch
        let err = rate_integrals(2.0, 0.3, 1.5, 0.5).unwrap_err();
        assert!(matches!(err, Error::SingularIntegrand { .. }));
    }

    #[test]
    fn preconditions() {
        assert!(rate_integrals(2.0, 0.5, 1.0, 0.0).is_err());
        assert!(rate_integrals(2.0, 0.3, 1.0, 0.7).is_err());
        assert!(tau_star(2.0, 1.0, (0.3, 0.3)).is_err());
        assert!(matches!(
            tau_star(2.0, 1.0, (0.1, 0.2)),
            Err(Error::InvalidBracket(_))
        ));
    }

    #[test]
    fn grid_is_interior() {
        let g = y_star_grid(50);
        assert_eq!(g.len(), 50);
        assert!(g[0] > -Y_FOLD && g[49] < Y_FOLD);
    }
}
