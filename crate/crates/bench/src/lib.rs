//! Benchmark fixtures shared by the criterion targets.

use canard_core::dde::{default_step, simulate, HistorySpec};
use canard_core::{Trajectory, VdpParams};

/// Long relaxation run at `(J, tau, a, eps) = (2, 0.3, 0.9, 0.05)` used by the
/// analysis benchmarks.
pub fn relaxation_run(t_end: f64) -> Trajectory {
    let p = VdpParams::new(2.0, 0.3, 0.9, 0.05);
    simulate(&p, &HistorySpec::constant(0.5, -0.5), t_end, default_step(p.tau, p.eps)).expect("reference run")
}
