//! Saddle-to-sink connections of the fast subsystem and the trapping region
//! used to show they converge.
//!
//! With `y` frozen and `beta = x_+(y)`, the shift `z = x - beta` turns the
//! instantaneous part of the fast vector field into
//! `psi(z) = -((beta^2 - 1) z + beta z^2 + z^3 / 3)`.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical_manifold::{branch_x, BranchId, Y_FOLD};
use crate::dde::{commensurate_step, simulate_fast, HistorySpec, Trajectory};
use crate::error::{domain, Result};
use crate::fmt_num;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_T_MAX: f64 = 200.0;
pub const DEFAULT_KICK: f64 = 0.01;
const FAST_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapRegion {
    pub beta: f64,
    pub z_max: f64,
    pub psi_max: f64,
    pub rho: f64,
}

impl TrapRegion {
    /// Membership test on the shifted coordinate.
    pub fn contains(&self, z: f64) -> bool {
        z > self.z_max && z < -self.z_max && psi(self.beta, z).abs() < self.psi_max * self.rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Upper,
    Lower,
    None,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Upper => "upper",
            Target::Lower => "lower",
            Target::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionReport {
    pub target: Target,
    /// First time the orbit is within `tol` of the target.
    pub hit_time: Option<f64>,
    /// Distance at `t_max` to the target, or to the nearer outer branch when there is none.
    pub final_distance: f64,
}

pub fn psi(beta: f64, z: f64) -> f64 {
    -((beta * beta - 1.0) * z + beta * z * z + z * z * z / 3.0)
}

/// `V(z) = -int_0^z psi`.
pub fn potential(beta: f64, z: f64) -> f64 {
    (beta * beta - 1.0) * z * z / 2.0 + beta * z * z * z / 3.0 + z.powi(4) / 12.0
}

pub fn trap_region(j: f64, tau: f64, y: f64) -> Result<TrapRegion> {
    let jt = j * tau;
    if !(jt < 0.5) || tau < 0.0 {
        return Err(domain(
            "trap_region",
            format!("rho = J*tau/(1 - J*tau) < 1 needs J*tau < 1/2, got {jt}"),
        ));
    }
    if !(y.abs() < Y_FOLD) {
        return Err(domain("trap_region", format!("need |y| < 2/3, got {y}")));
    }
    let beta = branch_x(BranchId::Upper, y)?;
    Ok(TrapRegion {
        beta,
        z_max: 1.0 - beta,
        psi_max: (beta - 1.0).powi(2) * (beta + 2.0) / 3.0,
        rho: jt / (1.0 - jt),
    })
}

fn fast_step(tau: f64) -> f64 {
    commensurate_step(tau, FAST_STEP)
}

/// Orbit of the fast subsystem leaving the saddle `x_0(y)` with the jump `x_0 +/- kick` at `t = 0`.
pub fn connection_orbit(j: f64, tau: f64, y: f64, side: Side, kick: f64, t_max: f64) -> Result<Trajectory> {
    if !(y.abs() < Y_FOLD) {
        return Err(domain("verify_connection", format!("need |y| < 2/3, got {y}")));
    }
    let x0 = branch_x(BranchId::Middle, y)?;
    let init = HistorySpec {
        x_past: x0,
        x_at_zero: x0 + side.sign() * kick,
        y_at_zero: y,
    };
    simulate_fast(j, tau, y, &init, t_max, fast_step(tau))
}

pub fn verify_connection(j: f64, tau: f64, y: f64, side: Side, t_max: f64, tol: f64) -> Result<ConnectionReport> {
    verify_connection_with(j, tau, y, side, DEFAULT_KICK, t_max, tol)
}

pub fn verify_connection_with(
    j: f64,
    tau: f64,
    y: f64,
    side: Side,
    kick: f64,
    t_max: f64,
    tol: f64,
) -> Result<ConnectionReport> {
    let traj = connection_orbit(j, tau, y, side, kick, t_max)?;
    let upper = branch_x(BranchId::Upper, y)?;
    let lower = branch_x(BranchId::Lower, y)?;
    let x_end = traj.last()[0];
    let (du, dl) = ((x_end - upper).abs(), (x_end - lower).abs());
    let (target, goal, dist) = if du <= tol {
        (Target::Upper, upper, du)
    } else if dl <= tol {
        (Target::Lower, lower, dl)
    } else {
        (Target::None, f64::NAN, du.min(dl))
    };
    let hit_time = if target == Target::None {
        None
    } else {
        traj.times
            .iter()
            .zip(&traj.states)
            .find(|(_, s)| (s[0] - goal).abs() <= tol)
            .map(|(&t, _)| t)
    };
    Ok(ConnectionReport {
        target,
        hit_time,
        final_distance: dist,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConnectionRow {
    #[serde(rename = "J")]
    pub j: f64,
    pub tau: f64,
    pub y: f64,
    pub side: Side,
    pub report: ConnectionReport,
}

/// Every `(tau, y, side)` combination, evaluated in parallel. Rows come back
/// in input order.
pub fn connection_grid(j: f64, taus: &[f64], ys: &[f64], t_max: f64, tol: f64) -> Result<Vec<ConnectionRow>> {
    let mut jobs = Vec::new();
    for &tau in taus {
        for &y in ys {
            for side in [Side::Plus, Side::Minus] {
                jobs.push((tau, y, side));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(tau, y, side)| {
            verify_connection(j, tau, y, side, t_max, tol).map(|report| ConnectionRow {
                j,
                tau,
                y,
                side,
                report,
            })
        })
        .collect()
}

pub fn write_grid_csv<W: Write>(rows: &[ConnectionRow], mut w: W, meta: &[(String, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "J,tau,y,side,target,hit_time")?;
    for r in rows {
        let hit = r.report.hit_time.map(fmt_num).unwrap_or_else(|| "nan".into());
        writeln!(
            w,
            "{},{},{},{},{},{}",
            fmt_num(r.j),
            fmt_num(r.tau),
            fmt_num(r.y),
            r.side.name(),
            r.report.target.name(),
            hit
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub v: f64,
    pub in_trap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub samples: Vec<LyapunovSample>,
    pub first_entry: Option<f64>,
    /// Every sample after the first entry is inside the region.
    pub absorbing: bool,
    pub final_z: f64,
}

/// Potential and trap membership along a fast-subsystem orbit (untranslated `x`).
pub fn lyapunov_monitor(traj: &Trajectory, trap: &TrapRegion) -> Result<LyapunovReport> {
    if !(trap.rho < 1.0) || trap.rho < 0.0 {
        return Err(domain(
            "lyapunov_monitor",
            format!("rho = {} outside [0, 1); the trapping argument needs J*tau < 1/2", trap.rho),
        ));
    }
    let beta = trap.beta;
    let samples: Vec<LyapunovSample> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, s)| {
            let z = s[0] - beta;
            LyapunovSample {
                t,
                v: potential(beta, z),
                in_trap: trap.contains(z),
            }
        })
        .collect();
    let first = samples.iter().position(|s| s.in_trap);
    let absorbing = first.is_some_and(|i| samples[i..].iter().all(|s| s.in_trap));
    Ok(LyapunovReport {
        first_entry: first.map(|i| samples[i].t),
        absorbing,
        final_z: traj.last()[0] - beta,
        samples,
    })
}
