//! The cubic critical manifold `x - x^3/3 + y = 0`.
//!
//! Three branches: lower (`x <= -1`, `y <= 2/3`), middle (`|x| <= 1`,
//! `|y| <= 2/3`) and upper (`x >= 1`, `y >= -2/3`), joined at the folds
//! `(1, -2/3)` and `(-1, 2/3)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// `|y|` at the two folds.
pub const Y_FOLD: f64 = 2.0 / 3.0;

const FOLD_SLACK: f64 = 1e-12;
const DOUBLE_ROOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchId {
    Lower,
    Middle,
    Upper,
}

impl BranchId {
    pub const ALL: [BranchId; 3] = [BranchId::Lower, BranchId::Middle, BranchId::Upper];

    /// Closed y-interval on which the branch exists.
    pub fn y_domain(self) -> (f64, f64) {
        match self {
            BranchId::Lower => (f64::NEG_INFINITY, Y_FOLD),
            BranchId::Middle => (-Y_FOLD, Y_FOLD),
            BranchId::Upper => (-Y_FOLD, f64::INFINITY),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BranchId::Lower => "lower",
            BranchId::Middle => "middle",
            BranchId::Upper => "upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKind {
    /// `(x_m, y_m) = (1, -2/3)`, where the canard point sits when `a = 1`.
    CanardSide,
    /// `(x_M, y_M) = (-1, 2/3)`.
    PlainSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPoint {
    pub x: f64,
    pub y: f64,
    pub kind: FoldKind,
}

/// Real root of the cubic together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicRoot {
    pub root: f64,
    pub multiplicity: u8,
}

/// Residual of the manifold equation.
#[inline]
pub fn manifold_residual(x: f64, y: f64) -> f64 {
    x - x * x * x / 3.0 + y
}

/// Real roots of `x - x^3/3 + y = 0` in ascending order.
pub fn cardano_roots(y: f64) -> Vec<CubicRoot> {
    let ay = y.abs();
    if (ay - Y_FOLD).abs() <= DOUBLE_ROOT_TOL {
        let s = y.signum();
        let mut roots = vec![
            CubicRoot {
                root: -s,
                multiplicity: 2,
            },
            CubicRoot {
                root: 2.0 * s,
                multiplicity: 1,
            },
        ];
        roots.sort_by(|a, b| a.root.total_cmp(&b.root));
        return roots;
    }
    if ay < Y_FOLD {
        let mut xs = trig_roots(y);
        xs.sort_by(f64::total_cmp);
        return xs
            .into_iter()
            .map(|r| CubicRoot {
                root: polish(r, y),
                multiplicity: 1,
            })
            .collect();
    }
    // x^3 - 3x - 3y = 0, one real root
    let disc = (9.0 * y * y - 4.0).sqrt();
    let r = ((3.0 * y + disc) / 2.0).cbrt() + ((3.0 * y - disc) / 2.0).cbrt();
    vec![CubicRoot {
        root: polish(r, y),
        multiplicity: 1,
    }]
}

/// `2 cos(arccos(3y/2)/3 + 2k pi/3)` for k = 0, 1, 2.
fn trig_roots(y: f64) -> [f64; 3] {
    let c = (1.5 * y).clamp(-1.0, 1.0);
    let theta = c.acos() / 3.0;
    [0.0, 1.0, 2.0].map(|k| 2.0 * (theta + 2.0 * k * PI / 3.0).cos())
}

/// One guarded Newton step; skipped near the folds where `1 - x^2` vanishes.
fn polish(x: f64, y: f64) -> f64 {
    let d = 1.0 - x * x;
    if d.abs() < 1e-3 {
        return x;
    }
    let next = x - manifold_residual(x, y) / d;
    if manifold_residual(next, y).abs() <= manifold_residual(x, y).abs() {
        next
    } else {
        x
    }
}

/// x-coordinate of the given branch at height `y`.
pub fn branch_x(branch: BranchId, y: f64) -> Result<f64> {
    let (lo, hi) = branch.y_domain();
    if y.is_nan() || y < lo - FOLD_SLACK || y > hi + FOLD_SLACK {
        return Err(domain(
            "branch_x",
            format!("y = {y} outside the {} branch domain", branch.name()),
        ));
    }
    let y = y.clamp(lo, hi);
    let roots = cardano_roots(y);
    let xs: Vec<f64> = roots
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.root, r.multiplicity as usize))
        .collect();
    let x = match (branch, xs.len()) {
        (BranchId::Lower, _) => xs[0],
        (BranchId::Upper, n) => xs[n - 1],
        (BranchId::Middle, 3) => xs[1],
        // single root with |y| > 2/3 cannot reach here after clamping
        (BranchId::Middle, _) => unreachable!("middle branch outside fold interval"),
    };
    Ok(x)
}

/// The two folds: canard side `(1, -2/3)` then plain side `(-1, 2/3)`.
pub fn fold_points() -> (FoldPoint, FoldPoint) {
    (
        FoldPoint {
            x: 1.0,
            y: -Y_FOLD,
            kind: FoldKind::CanardSide,
        },
        FoldPoint {
            x: -1.0,
            y: Y_FOLD,
            kind: FoldKind::PlainSide,
        },
    )
}

/// Slow-variable velocity `a - x` evaluated on a branch (before the `eps` factor).
pub fn slow_flow(a: f64, branch: BranchId, y: f64) -> Result<f64> {
    Ok(a - branch_x(branch, y)?)
}
