//! Numerical toolkit for the delayed van der Pol slow-fast system.
//!
//! The crate is organised bottom-up:
//!
//! - [`lambert_w`]: real Lambert W branches.
//! - [`critical_manifold`]: roots, branches and folds of `x - x^3/3 + y = 0`.
//! - [`spectral`]: characteristic roots of the fast subsystem, Hopf and
//!   Bogdanov-Takens conditions.
//! - [`dde`]: method-of-steps RK4 integrator with dense output.
//! - [`connections`]: saddle-to-sink connections and the trapping region.
//! - [`rates`]: way-in/way-out rate integrals and the stability threshold.
//! - [`small_delay`]: first-order small-delay ODE reduction.
//! - [`canard`]: steady-cycle measurement and canard-explosion bisection.
//! - [`analysis`]: Poincaré sections, return maps, period detection and
//!   regime classification.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod canard;
pub mod connections;
pub mod critical_manifold;
pub mod dde;
pub mod error;
pub mod lambert_w;
pub mod rates;
pub mod small_delay;
pub mod spectral;

pub use analysis::{Regime, SectionDef};
pub use canard::{CycleStats, ExplosionBracket, Model, Param};
pub use connections::{ConnectionReport, TrapRegion};
pub use critical_manifold::{BranchId, FoldPoint};
pub use dde::{HistorySpec, Trajectory, VdpParams};
pub use error::{Error, Result};
pub use rates::RateProfile;
pub use small_delay::NormalFormCoeffs;
pub use spectral::CharRoot;

/// Format a float with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}
