//! Fixed-step RK4 integration of the delayed van der Pol system
//!
//! ```text
//! x' = x - x^3/3 + y + J (x(t) - x(t - tau))
//! y' = eps (a - x)
//! ```
//!
//! by the method of steps. The step divides the delay exactly, so the
//! retarded value at the first and last RK stage lands on a stored node;
//! the mid-step stage reads the past through cubic Hermite interpolation on
//! stored values and derivatives.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_num;

const BLOW_UP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdpParams {
    #[serde(rename = "J")]
    pub j: f64,
    pub tau: f64,
    pub a: f64,
    pub eps: f64,
}

impl VdpParams {
    pub fn new(j: f64, tau: f64, a: f64, eps: f64) -> Self {
        Self { j, tau, a, eps }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.j, self.tau, self.a, self.eps].iter().all(|v| v.is_finite());
        if !finite || self.tau < 0.0 || self.eps < 0.0 {
            return Err(crate::error::domain(
                "VdpParams",
                format!("need finite values with tau >= 0 and eps >= 0, got {self:?}"),
            ));
        }
        Ok(())
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    pub fn with_a(self, a: f64) -> Self {
        Self { a, ..self }
    }

    pub fn with_eps(self, eps: f64) -> Self {
        Self { eps, ..self }
    }
}

/// Constant history on `[-tau, 0)` plus the state at `t = 0` (a jump is allowed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistorySpec {
    pub x_past: f64,
    pub x_at_zero: f64,
    pub y_at_zero: f64,
}

impl HistorySpec {
    /// Continuous constant history through `(x, y)`.
    pub fn constant(x: f64, y: f64) -> Self {
        Self {
            x_past: x,
            x_at_zero: x,
            y_at_zero: y,
        }
    }
}

/// Uniform-grid solution with derivative samples for Hermite dense output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<[f64; 2]>,
    pub derivs: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s[0])
    }

    pub fn last(&self) -> [f64; 2] {
        *self.states.last().expect("trajectory has at least two points")
    }

    /// Cubic Hermite interpolation of `(x, y)` at time `t`; clamps to the
    /// stored time span.
    pub fn interpolate(&self, t: f64) -> [f64; 2] {
        let n = self.len();
        let t0 = self.times[0];
        let s = ((t - t0) / self.step).clamp(0.0, (n - 1) as f64);
        // grid times carry rounding, so snap to a node within a few ulps
        let node = s.round();
        if (s - node).abs() <= 8.0 * f64::EPSILON * node.max(1.0) {
            return self.states[node as usize];
        }
        let k = (s.floor() as usize).min(n - 2);
        let theta = s - k as f64;
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = hermite(
                self.states[k][c],
                self.states[k + 1][c],
                self.derivs[k][c],
                self.derivs[k + 1][c],
                self.step,
                theta,
            );
        }
        out
    }

    /// Write `t,x,y` rows (17 significant digits) after `#`-prefixed metadata.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(String, String)]) -> io::Result<()> {
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "t,x,y")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{},{},{}", fmt_num(*t), fmt_num(s[0]), fmt_num(s[1]))?;
        }
        Ok(())
    }
}

/// Cubic Hermite on one interval of width `h`, at fraction `theta`.
#[inline]
pub(crate) fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, h: f64, theta: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1
}

/// Equilibrium `(a, a^3/3 - a)` of the full system.
pub fn equilibrium(p: &VdpParams) -> (f64, f64) {
    (p.a, p.a * p.a * p.a / 3.0 - p.a)
}

/// Default step `min(tau/8, eps/50, 1e-3)` (zero entries ignored), shrunk so
/// that it divides `tau` exactly.
pub fn default_step(tau: f64, eps: f64) -> f64 {
    let mut h: f64 = 1e-3;
    if tau > 0.0 {
        h = h.min(tau / 8.0);
    }
    if eps > 0.0 {
        h = h.min(eps / 50.0);
    }
    commensurate_step(tau, h)
}

/// Largest step `<= h_max` with `tau / h` an integer (returns `h_max` for `tau = 0`).
pub fn commensurate_step(tau: f64, h_max: f64) -> f64 {
    if tau > 0.0 {
        tau / (tau / h_max).ceil()
    } else {
        h_max
    }
}

/// Validates the step and returns the number of steps per delay (0 for `tau = 0`).
fn delay_steps(tau: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidStep(format!("h = {h} must be positive")));
    }
    if tau == 0.0 {
        return Ok(0);
    }
    if h > tau / 4.0 * (1.0 + 1e-12) {
        return Err(Error::InvalidStep(format!("h = {h} exceeds tau/4 = {}", tau / 4.0)));
    }
    let ratio = tau / h;
    let n = ratio.round();
    if (ratio - n).abs() > 1e-9 {
        return Err(Error::InvalidStep(format!(
            "tau/h = {ratio} is not an integer; the delay must be commensurate with the grid"
        )));
    }
    Ok(n as usize)
}

fn step_count(t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidStep(format!("h = {h} must be positive")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidStep(format!("t_end = {t_end} must be positive")));
    }
    Ok(((t_end / h) - 1e-9).ceil().max(1.0) as usize)
}

/// Method-of-steps RK4 integrator, advanced one step at a time.
///
/// Only the last `tau/h + 2` nodes are kept, so memory does not grow with
/// the integration time. Cloning snapshots the full state.
#[derive(Debug, Clone)]
pub struct Integrator {
    j: f64,
    a: f64,
    eps: f64,
    h: f64,
    n_delay: usize,
    x_past: f64,
    /// ring buffers of `x` and `x'` at nodes, indexed by node number mod len
    ring_x: Vec<f64>,
    ring_dx: Vec<f64>,
    i: usize,
    x: f64,
    y: f64,
    dx: f64,
    dy: f64,
}

impl Integrator {
    pub fn new(p: &VdpParams, init: &HistorySpec, h: f64) -> Result<Self> {
        p.validate()?;
        let n_delay = delay_steps(p.tau, h)?;
        let cap = if n_delay == 0 { 1 } else { n_delay + 2 };
        let mut s = Integrator {
            // with tau = 0 the retarded term equals the current value
            j: if n_delay == 0 { 0.0 } else { p.j },
            a: p.a,
            eps: p.eps,
            h,
            n_delay,
            x_past: init.x_past,
            ring_x: vec![0.0; cap],
            ring_dx: vec![0.0; cap],
            i: 0,
            x: init.x_at_zero,
            y: init.y_at_zero,
            dx: 0.0,
            dy: 0.0,
        };
        let xd = if n_delay == 0 { s.x } else { s.x_past };
        let (dx, dy) = s.rhs(s.x, s.y, xd);
        s.dx = dx;
        s.dy = dy;
        s.store();
        Ok(s)
    }

    #[inline]
    fn rhs(&self, x: f64, y: f64, xd: f64) -> (f64, f64) {
        (
            x - x * x * x / 3.0 + y + self.j * (x - xd),
            self.eps * (self.a - x),
        )
    }

    #[inline]
    fn store(&mut self) {
        let k = self.i % self.ring_x.len();
        self.ring_x[k] = self.x;
        self.ring_dx[k] = self.dx;
    }

    #[inline]
    fn node(&self, k: usize) -> (f64, f64) {
        let m = k % self.ring_x.len();
        (self.ring_x[m], self.ring_dx[m])
    }

    /// `x` at node `i - n_delay`, history value before `t = 0`.
    #[inline]
    fn delayed_node(&self, i: usize) -> f64 {
        if i < self.n_delay {
            self.x_past
        } else {
            self.node(i - self.n_delay).0
        }
    }

    /// `x` half a step after node `i - n_delay`.
    #[inline]
    fn delayed_mid(&self, i: usize) -> f64 {
        if i < self.n_delay {
            return self.x_past;
        }
        let k = i - self.n_delay;
        let (x0, d0) = self.node(k);
        let (x1, d1) = self.node(k + 1);
        hermite(x0, x1, d0, d1, self.h, 0.5)
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn time(&self) -> f64 {
        self.i as f64 * self.h
    }

    pub fn state(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn deriv(&self) -> [f64; 2] {
        [self.dx, self.dy]
    }

    pub fn step(&mut self) -> Result<()> {
        let i = self.i;
        let h = self.h;
        let (x, y) = (self.x, self.y);
        let (k1x, k1y) = (self.dx, self.dy);
        let tau0 = self.n_delay == 0;
        let dm = if tau0 { 0.0 } else { self.delayed_mid(i) };
        let d1 = if tau0 { 0.0 } else { self.delayed_node(i + 1) };

        let (x2, y2) = (x + 0.5 * h * k1x, y + 0.5 * h * k1y);
        let (k2x, k2y) = self.rhs(x2, y2, if tau0 { x2 } else { dm });
        let (x3, y3) = (x + 0.5 * h * k2x, y + 0.5 * h * k2y);
        let (k3x, k3y) = self.rhs(x3, y3, if tau0 { x3 } else { dm });
        let (x4, y4) = (x + h * k3x, y + h * k3y);
        let (k4x, k4y) = self.rhs(x4, y4, if tau0 { x4 } else { d1 });

        let xn = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        let yn = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        if !(xn.abs() <= BLOW_UP) || !yn.is_finite() {
            return Err(Error::BlowUp { t: (i + 1) as f64 * h });
        }
        self.i = i + 1;
        self.x = xn;
        self.y = yn;
        let xd = if tau0 { xn } else { d1 };
        let (dx, dy) = self.rhs(xn, yn, xd);
        self.dx = dx;
        self.dy = dy;
        self.store();
        Ok(())
    }

    /// Step until the grid time reaches `t_end` (to within `1e-9 h`), calling
    /// `observe` after each step.
    pub fn advance_to<F>(&mut self, t_end: f64, mut observe: F) -> Result<()>
    where
        F: FnMut(f64, [f64; 2], [f64; 2]),
    {
        let target = ((t_end / self.h) - 1e-9).ceil().max(0.0) as usize;
        while self.i < target {
            self.step()?;
            observe(self.time(), self.state(), self.deriv());
        }
        Ok(())
    }
}

/// Integrate to (at least) `t_end` with step `h`, calling `observe(t, [x, y],
/// [x', y'])` at every grid point including `t = 0`.
pub fn simulate_with<F>(p: &VdpParams, init: &HistorySpec, t_end: f64, h: f64, mut observe: F) -> Result<()>
where
    F: FnMut(f64, [f64; 2], [f64; 2]),
{
    let n = step_count(t_end, h)?;
    let mut s = Integrator::new(p, init, h)?;
    observe(0.0, s.state(), s.deriv());
    for _ in 0..n {
        s.step()?;
        observe(s.time(), s.state(), s.deriv());
    }
    Ok(())
}

/// Full delayed system.
pub fn simulate(p: &VdpParams, init: &HistorySpec, t_end: f64, h: f64) -> Result<Trajectory> {
    simulate_window(p, init, 0.0, t_end, h)
}

/// Full delayed system, keeping only grid points with `t >= t_start`.
pub fn simulate_window(p: &VdpParams, init: &HistorySpec, t_start: f64, t_end: f64, h: f64) -> Result<Trajectory> {
    let n = step_count(t_end, h)?;
    if !(t_start >= 0.0) || t_start >= t_end {
        return Err(Error::InvalidStep(format!(
            "need 0 <= t_start < t_end, got t_start = {t_start}, t_end = {t_end}"
        )));
    }
    let first = ((t_start / h) - 1e-9).ceil().max(0.0) as usize;
    let keep = n + 1 - first.min(n);
    let mut traj = Trajectory {
        step: h,
        times: Vec::with_capacity(keep),
        states: Vec::with_capacity(keep),
        derivs: Vec::with_capacity(keep),
    };
    let mut k = 0usize;
    simulate_with(p, init, t_end, h, |t, s, d| {
        if k >= first {
            traj.times.push(t);
            traj.states.push(s);
            traj.derivs.push(d);
        }
        k += 1;
    })?;
    Ok(traj)
}

/// Fast subsystem with `y` frozen. `init.y_at_zero` is ignored.
pub fn simulate_fast(j: f64, tau: f64, y: f64, init: &HistorySpec, t_end: f64, h: f64) -> Result<Trajectory> {
    let p = VdpParams::new(j, tau, 0.0, 0.0);
    let init = HistorySpec {
        y_at_zero: y,
        ..*init
    };
    simulate(&p, &init, t_end, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical_manifold::{branch_x, cardano_roots, BranchId};

    #[test]
    fn equilibrium_examples() {
        let p = VdpParams::new(2.0, 0.3, 1.0, 0.1);
        assert_eq!(equilibrium(&p), (1.0, 1.0 / 3.0 - 1.0));
        assert_eq!(equilibrium(&p.with_a(0.0)), (0.0, 0.0));
        let (x, y) = equilibrium(&p.with_a(0.5));
        assert!((x - x * x * x / 3.0 + y).abs() < 1e-16);
    }

    #[test]
    fn equilibrium_is_constant() {
        let p = VdpParams::new(2.0, 0.3, 0.5, 0.1);
        let (x, y) = equilibrium(&p);
        let tr = simulate(&p, &HistorySpec::constant(x, y), 20.0, 0.3 / 30.0).unwrap();
        for s in &tr.states {
            assert!((s[0] - x).abs() < 1e-10 && (s[1] - y).abs() < 1e-10);
        }
    }

    #[test]
    fn settles_on_upper_branch_without_slow_drift() {
        let y0 = 0.2;
        let p = VdpParams::new(2.0, 0.3, 1.0, 0.0);
        let tr = simulate(&p, &HistorySpec::constant(1.5, y0), 100.0, 0.3 / 30.0).unwrap();
        let target = branch_x(BranchId::Upper, y0).unwrap();
        assert!((tr.last()[0] - target).abs() < 1e-8);
        assert_eq!(tr.last()[1], y0);
    }

    #[test]
    fn fast_from_saddle_goes_up() {
        let x0 = branch_x(BranchId::Middle, 0.0).unwrap();
        let init = HistorySpec { x_past: x0, x_at_zero: x0 + 0.01, y_at_zero: 0.0 };
        let tr = simulate_fast(2.0, 0.3, 0.0, &init, 60.0, 0.01).unwrap();
        assert!((tr.last()[0] - 3f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn single_root_regime_converges_from_any_seed() {
        let y = 0.7;
        let root = cardano_roots(y)[0].root;
        for seed in [-3.0, -1.5, 0.0, 1.5, 3.0] {
            let tr = simulate_fast(2.0, 0.3, y, &HistorySpec::constant(seed, y), 100.0, 0.01).unwrap();
            assert!((tr.last()[0] - root).abs() < 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn grid_and_dense_output() {
        let p = VdpParams::new(2.0, 0.2, 0.8, 0.1);
        let tr = simulate(&p, &HistorySpec::constant(1.0, -0.5), 5.0, 0.01).unwrap();
        assert_eq!(tr.len(), 501);
        for w in tr.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        for (i, t) in tr.times.iter().enumerate() {
            assert_eq!(tr.interpolate(*t), tr.states[i]);
        }
    }

    #[test]
    fn step_validation() {
        let p = VdpParams::new(2.0, 0.3, 1.0, 0.1);
        let init = HistorySpec::constant(1.0, 0.0);
        assert!(matches!(simulate(&p, &init, 1.0, 0.1), Err(Error::InvalidStep(_))));
        assert!(matches!(simulate(&p, &init, 1.0, 0.007), Err(Error::InvalidStep(_))));
        assert!(matches!(simulate(&p, &init, -1.0, 0.01), Err(Error::InvalidStep(_))));
        assert!(matches!(simulate(&p, &init, 1.0, 0.0), Err(Error::InvalidStep(_))));
        assert!(simulate(&p.with_tau(-0.1), &init, 1.0, 0.01).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        // a huge slow variable drives x off to infinity
        let p = VdpParams::new(0.0, 0.0, 0.0, 0.0);
        let err = simulate(&p, &HistorySpec::constant(-50.0, -1e9), 10.0, 1e-3).unwrap_err();
        assert!(matches!(err, Error::BlowUp { .. }));
    }

    #[test]
    fn default_step_divides_delay() {
        let h = default_step(0.0895156, 0.05);
        assert!(h <= 1e-3);
        let r = 0.0895156 / h;
        assert!((r - r.round()).abs() < 1e-9);
        assert_eq!(default_step(0.0, 0.05), 1e-3);
        assert_eq!(default_step(0.0, 0.01), 2e-4);
    }

    #[test]
    fn window_is_tail_of_full_run() {
        let p = VdpParams::new(2.0, 0.3, 0.99, 0.05);
        let init = HistorySpec::constant(0.5, -0.6);
        let full = simulate(&p, &init, 20.0, 0.01).unwrap();
        let win = simulate_window(&p, &init, 12.0, 20.0, 0.01).unwrap();
        let off = full.len() - win.len();
        assert!((win.times[0] - 12.0).abs() < 1e-9);
        assert_eq!(&full.states[off..], &win.states[..]);
        assert!((win.interpolate(15.005)[0] - full.interpolate(15.005)[0]).abs() < 1e-12);
    }

    #[test]
    fn cloned_integrator_replays_identically() {
        let p = VdpParams::new(2.0, 0.3, 0.99, 0.05);
        let mut a = Integrator::new(&p, &HistorySpec::constant(0.5, -0.6), 0.01).unwrap();
        a.advance_to(5.0, |_, _, _| {}).unwrap();
        let mut b = a.clone();
        a.advance_to(9.0, |_, _, _| {}).unwrap();
        b.advance_to(9.0, |_, _, _| {}).unwrap();
        assert_eq!(a.state(), b.state());
        assert!((a.time() - 9.0).abs() < 1e-12);
    }
}
