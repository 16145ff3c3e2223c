//! Real branches of the Lambert W function.
//!
//! `w0` is the principal branch on `[-1/e, inf)` and `wm1` the lower branch on
//! `[-1/e, 0)`. Both use Halley's iteration from a branch-point series or a
//! log-asymptotic starting guess.

use crate::error::{domain, Result};

/// Which real branch of W to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum WBranch {
    /// k = 0, values in `[-1, inf)`.
    Principal,
    /// k = -1, values in `(-inf, -1]`.
    Lower,
}

impl WBranch {
    pub fn index(self) -> i32 {
        match self {
            WBranch::Principal => 0,
            WBranch::Lower => -1,
        }
    }
}

// 1/e split into a double and its rounding error, so that x + 1/e keeps
// its significant digits right next to the branch point.
const INV_E_HI: f64 = 0.367_879_441_171_442_33;
const INV_E_LO: f64 = 1.242_875_367_278_836_3e-17;

/// The branch point `-1/e`.
pub const BRANCH_POINT: f64 = -INV_E_HI;

const CLAMP_SLACK: f64 = 1e-14;
// Anything within one ulp of -1/e is the branch point itself.
const BRANCH_ULP: f64 = 6e-17;
const SERIES_RADIUS: f64 = 1e-8;
const MAX_ITER: usize = 50;

/// Evaluate the requested branch.
pub fn lambert_w(branch: WBranch, x: f64) -> Result<f64> {
    match branch {
        WBranch::Principal => w0(x),
        WBranch::Lower => wm1(x),
    }
}

/// Principal branch `W_0(x)` for `x >= -1/e`.
pub fn w0(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(domain("w0", "argument is NaN"));
    }
    let d = offset_from_branch(x);
    if d < -CLAMP_SLACK {
        return Err(domain("w0", format!("x = {x:e} is below -1/e")));
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if d <= BRANCH_ULP {
        return Ok(-1.0);
    }
    if d <= SERIES_RADIUS {
        return Ok(branch_series(d, 1.0));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let guess = if d < 0.25 {
        branch_series(d, 1.0)
    } else if x < 3.0 {
        x.ln_1p() * (1.0 - x.ln_1p() / (2.0 + x.ln_1p()))
    } else {
        log_asymptotic(x.ln())
    };
    Ok(halley(x, guess))
}

/// Lower branch `W_{-1}(x)` for `-1/e <= x < 0`.
pub fn wm1(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(domain("wm1", "argument is NaN"));
    }
    let d = offset_from_branch(x);
    if d < -CLAMP_SLACK || x >= 0.0 {
        return Err(domain("wm1", format!("x = {x:e} outside [-1/e, 0)")));
    }
    if d <= BRANCH_ULP {
        return Ok(-1.0);
    }
    if d <= SERIES_RADIUS {
        return Ok(branch_series(d, -1.0));
    }
    let guess = if d < 0.25 {
        branch_series(d, -1.0)
    } else {
        log_asymptotic((-x).ln())
    };
    Ok(halley(x, guess))
}

/// `x + 1/e`, computed without losing the low-order digits.
fn offset_from_branch(x: f64) -> f64 {
    (x + INV_E_HI) + INV_E_LO
}

/// Series about the branch point in `p = sqrt(2 (e x + 1))`; `sign` picks
/// the branch (+1 principal, -1 lower).
fn branch_series(d: f64, sign: f64) -> f64 {
    let p = sign * (2.0 * std::f64::consts::E * d).sqrt();
    -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))))
}

/// `L1 - L2 + L2/L1` with `L1 = ln|x|`, `L2 = ln|L1|`.
fn log_asymptotic(l1: f64) -> f64 {
    let l2 = l1.abs().ln();
    l1 - l2 + l2 / l1
}

fn halley(x: f64, mut w: f64) -> f64 {
    let mut best = (f64::INFINITY, w);
    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let r = f.abs();
        if r < best.0 {
            best = (r, w);
        }
        if f == 0.0 {
            return w;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        if !step.is_finite() {
            break;
        }
        w -= step;
        if step.abs() <= 1e-15 * w.abs().max(1.0) {
            let r = (w * w.exp() - x).abs();
            return if r <= best.0 { w } else { best.1 };
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    /// Plain bisection on w e^w = x, independent of Halley.
    fn bisect(x: f64, mut lo: f64, mut hi: f64) -> f64 {
        let f = |w: f64| w * w.exp() - x;
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn trivial_values() {
        assert_eq!(w0(0.0).unwrap(), 0.0);
        assert!((w0(E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(w0(-1.0 / E).unwrap(), -1.0);
        assert_eq!(wm1(-1.0 / E).unwrap(), -1.0);
        assert_eq!(w0(BRANCH_POINT).unwrap(), -1.0);
    }

    #[test]
    fn omega_constant() {
        let oracle = bisect(1.0, 0.0, 1.0);
        assert!((oracle - 0.567_143).abs() < 1e-6);
        assert!((w0(1.0).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn lower_branch_values() {
        let oracle = bisect(-0.1, -20.0, -1.0);
        assert!((oracle + 3.577).abs() < 1e-3);
        assert!((wm1(-0.1).unwrap() - oracle).abs() < 1e-13);

        let w = wm1(-1e-4).unwrap();
        assert!(w < -11.0);
        assert!((w * w.exp() + 1e-4).abs() < 1e-12);
        let oracle = bisect(-1e-4, -30.0, -1.0);
        assert!((w - oracle).abs() < 1e-12);
    }

    #[test]
    fn clamps_just_below_branch_point() {
        let x = BRANCH_POINT - 5e-15;
        assert_eq!(w0(x).unwrap(), -1.0);
        assert_eq!(wm1(x).unwrap(), -1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(w0(-0.4).is_err());
        assert!(wm1(-0.4).is_err());
        assert!(wm1(0.0).is_err());
        assert!(wm1(0.5).is_err());
        assert!(w0(f64::NAN).is_err());
    }

    #[test]
    fn residuals_near_branch_point() {
        for k in 1..200 {
            let d = 10f64.powf(-(k as f64) / 12.0);
            let x = BRANCH_POINT + d;
            let a = w0(x).unwrap();
            assert!((a * a.exp() - x).abs() <= 1e-12, "w0 at d={d:e}");
            assert!(a >= -1.0);
            if x < 0.0 {
                let b = wm1(x).unwrap();
                assert!((b * b.exp() - x).abs() <= 1e-12, "wm1 at d={d:e}");
                assert!(b <= -1.0);
            }
        }
    }

    #[test]
    fn large_arguments() {
        for &x in &[10.0, 1e3, 1e10, 1e100, 1e300] {
            let w = w0(x).unwrap();
            assert!((w * w.exp() - x).abs() <= 1e-12 * x, "x={x:e}");
        }
    }
}
