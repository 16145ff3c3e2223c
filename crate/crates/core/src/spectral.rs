//! Characteristic roots of the fast subsystem linearised at a fixed point.
//!
//! At a fixed point `x*` the dispersion relation is
//! `Delta(lam) = lam - (1 - x*^2 + J) + J exp(-lam tau)`. Real roots come in
//! closed form through the real Lambert branches; complex roots are found by
//! Newton on `Delta` from log-asymptotic seeds.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::critical_manifold::{branch_x, BranchId};
use crate::error::{domain, Error, Result};
use crate::lambert_w::{w0, wm1, BRANCH_POINT};

/// Branch index recorded for roots found by Newton from an asymptotic seed.
pub const NEWTON_BRANCH: i32 = -999;

const ROOT_TOL: f64 = 1e-10;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_CAP: usize = 100;

/// One characteristic root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharRoot {
    pub value: Complex64,
    /// Lambert branch `k` for closed-form real roots, [`NEWTON_BRANCH`] otherwise.
    pub branch_index: i32,
    pub residual: f64,
    /// Set when the root stands for a complex-conjugate pair (positive
    /// imaginary member reported).
    pub conjugate_pair: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub zeta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Attracting,
    Saddle1d,
    OscillatoryUnstable,
}

/// `Delta(lam) = lam - (1 - x*^2 + J) + J e^{-lam tau}`.
pub fn delta(j: f64, tau: f64, x_star: f64, lam: Complex64) -> Complex64 {
    let a = 1.0 - x_star * x_star + j;
    lam - a + j * (-lam * tau).exp()
}

fn delta_prime(j: f64, tau: f64, lam: Complex64) -> Complex64 {
    1.0 - j * tau * (-lam * tau).exp()
}

fn check_params(op: &'static str, j: f64, tau: f64) -> Result<()> {
    if !(j >= 0.0) || !(tau >= 0.0) || !j.is_finite() || !tau.is_finite() {
        return Err(domain(op, format!("need J >= 0 and tau >= 0, got J = {j}, tau = {tau}")));
    }
    Ok(())
}

fn newton(j: f64, tau: f64, x_star: f64, seed: Complex64) -> Result<Complex64> {
    let mut lam = seed;
    let mut res = delta(j, tau, x_star, lam).norm();
    for _ in 0..NEWTON_CAP {
        if res <= NEWTON_TOL {
            return Ok(lam);
        }
        let d = delta(j, tau, x_star, lam);
        let dp = delta_prime(j, tau, lam);
        if dp.norm() == 0.0 {
            break;
        }
        let mut step = d / dp;
        // halve until the residual stops growing
        let mut next = lam - step;
        let mut next_res = delta(j, tau, x_star, next).norm();
        let mut tries = 0;
        while !(next_res < res) && tries < 30 {
            step *= 0.5;
            next = lam - step;
            next_res = delta(j, tau, x_star, next).norm();
            tries += 1;
        }
        if !(next_res < res) {
            break;
        }
        lam = next;
        res = next_res;
    }
    if res <= ROOT_TOL {
        Ok(lam)
    } else {
        Err(Error::NonConvergence {
            op: "characteristic root Newton",
            iterations: NEWTON_CAP,
            residual: res,
        })
    }
}

fn make_root(j: f64, tau: f64, x_star: f64, value: Complex64, branch_index: i32) -> CharRoot {
    let conjugate_pair = value.im.abs() > 1e-9;
    let value = if conjugate_pair {
        Complex64::new(value.re, value.im.abs())
    } else {
        Complex64::new(value.re, 0.0)
    };
    CharRoot {
        value,
        branch_index,
        residual: delta(j, tau, x_star, value).norm(),
        conjugate_pair,
    }
}

/// Closed-form real root `A + W_k(-tau J e^{-tau A}) / tau`, polished by Newton
/// when the Lambert evaluation alone leaves a residual above tolerance.
fn real_lambert_root(j: f64, tau: f64, x_star: f64, lower: bool) -> Result<Option<CharRoot>> {
    let a = 1.0 - x_star * x_star + j;
    let arg = -tau * j * (-tau * a).exp();
    if arg < BRANCH_POINT - 1e-14 || (lower && arg >= 0.0) {
        return Ok(None);
    }
    let (w, k) = if lower { (wm1(arg)?, -1) } else { (w0(arg)?, 0) };
    let mut lam = a + w / tau;
    if delta(j, tau, x_star, Complex64::new(lam, 0.0)).norm() > NEWTON_TOL {
        let polished = newton(j, tau, x_star, Complex64::new(lam, 0.0))?;
        if polished.im.abs() < 1e-12 {
            lam = polished.re;
        }
    }
    Ok(Some(make_root(j, tau, x_star, Complex64::new(lam, 0.0), k)))
}

/// Seeds for the complex roots with `Im > 0`: principal-branch series near
/// the branch point and `L1 - ln L1` asymptotics, `L1 = ln|z| + i(pi + 2 pi k)`.
fn complex_seeds(j: f64, tau: f64, x_star: f64, count: usize) -> Vec<Complex64> {
    let a = 1.0 - x_star * x_star + j;
    let z = -tau * j * (-tau * a).exp();
    let mut seeds = Vec::with_capacity(2 * count + 1);
    let d = z - BRANCH_POINT;
    if d < 0.0 {
        let p = Complex64::new(0.0, (2.0 * std::f64::consts::E * -d).sqrt());
        let w = -1.0 + p - p * p / 3.0 + p * p * p * (11.0 / 72.0);
        seeds.push(a + w / tau);
    }
    for k in 0..count {
        let l1 = Complex64::new(z.abs().ln(), std::f64::consts::PI * (2 * k + 1) as f64);
        let w = l1 - l1.ln();
        seeds.push(a + w / tau);
    }
    seeds
}

/// Rightmost characteristic root (largest real part).
pub fn leading_root(j: f64, tau: f64, x_star: f64) -> Result<CharRoot> {
    check_params("leading_root", j, tau)?;
    if tau == 0.0 || j == 0.0 {
        let v = if tau == 0.0 { 1.0 - x_star * x_star } else { 1.0 - x_star * x_star + j };
        return Ok(make_root(j, tau, x_star, Complex64::new(v, 0.0), 0));
    }
    if let Some(r) = real_lambert_root(j, tau, x_star, false)? {
        return Ok(r);
    }
    // complex-pair regime: the principal branch is the rightmost pair
    let mut best: Option<CharRoot> = None;
    let mut last_err = None;
    for seed in complex_seeds(j, tau, x_star, 1) {
        match newton(j, tau, x_star, seed) {
            Ok(v) => {
                let r = make_root(j, tau, x_star, v, NEWTON_BRANCH);
                if best.is_none_or(|b| r.value.re > b.value.re) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one seed"))
}

/// The `n` rightmost distinct roots, sorted by descending real part.
/// Conjugate pairs count once.
pub fn rightmost_roots(j: f64, tau: f64, x_star: f64, n: usize) -> Result<Vec<CharRoot>> {
    check_params("rightmost_roots", j, tau)?;
    if n == 0 {
        return Err(domain("rightmost_roots", "n must be at least 1"));
    }
    if tau == 0.0 || j == 0.0 {
        // retarded term absent: a single root
        return Ok(vec![leading_root(j, tau, x_star)?]);
    }
    let mut found: Vec<CharRoot> = Vec::new();
    let push = |found: &mut Vec<CharRoot>, r: CharRoot| {
        let dup = found.iter().any(|f| (f.value - r.value).norm() <= 1e-8 * (1.0 + r.value.norm()));
        if !dup && r.residual <= ROOT_TOL {
            found.push(r);
        }
    };
    for lower in [false, true] {
        if let Some(r) = real_lambert_root(j, tau, x_star, lower)? {
            push(&mut found, r);
        }
    }
    for seed in complex_seeds(j, tau, x_star, n + 4) {
        if let Ok(v) = newton(j, tau, x_star, seed) {
            push(&mut found, make_root(j, tau, x_star, v, NEWTON_BRANCH));
        }
    }
    found.sort_by(|a, b| {
        b.value
            .re
            .total_cmp(&a.value.re)
            .then(b.value.im.total_cmp(&a.value.im))
    });
    // the closed-form leading root comes first even if a Newton duplicate won a tie
    let lead = leading_root(j, tau, x_star)?;
    if let Some(first) = found.first() {
        if (first.value - lead.value).norm() <= 1e-8 * (1.0 + lead.value.norm()) {
            found[0] = lead;
        }
    }
    found.truncate(n);
    Ok(found)
}

/// Smallest `zeta > 0` with `zeta = J sin(zeta tau)`; none when `J tau <= 1`.
pub fn hopf_frequency(j: f64, tau: f64) -> Option<HopfPoint> {
    if !(j > 0.0) || !(tau > 0.0) || j * tau <= 1.0 {
        return None;
    }
    let f = |z: f64| z - j * (z * tau).sin();
    let mut lo = 0.0;
    let mut hi = std::f64::consts::PI / tau;
    // f < 0 just right of 0 and f(pi/tau) > 0
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let zeta = 0.5 * (lo + hi);
    Some(HopfPoint { zeta })
}

/// `(|Delta(0)|, Delta'(0))` at the fold `x* = 1`; both vanish at the
/// Bogdanov-Takens point `J tau = 1`.
pub fn bt_residuals(j: f64, tau: f64) -> (f64, f64) {
    let d0 = delta(j, tau, 1.0, Complex64::new(0.0, 0.0)).norm();
    (d0, 1.0 - j * tau)
}

/// Linear stability of the fast fixed point on `branch` at height `y`.
pub fn branch_stability(j: f64, tau: f64, branch: BranchId, y: f64) -> Result<Stability> {
    let x_star = branch_x(branch, y)?;
    let roots = rightmost_roots(j, tau, x_star, 3)?;
    let lead = roots[0];
    if lead.value.re < 0.0 {
        return Ok(Stability::Attracting);
    }
    if lead.conjugate_pair {
        return Ok(Stability::OscillatoryUnstable);
    }
    match roots.get(1) {
        Some(second) if second.value.re >= 0.0 => {
            if second.conjugate_pair {
                Ok(Stability::OscillatoryUnstable)
            } else {
                Err(domain(
                    "branch_stability",
                    format!("two unstable real roots at {} y = {y}", branch.name()),
                ))
            }
        }
        _ => Ok(Stability::Saddle1d),
    }
}
