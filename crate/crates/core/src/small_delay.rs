//! First-order small-delay reduction.
//!
//! Expanding `x(t - tau) ~ x - tau x'` turns the delayed system into the
//! ODE `(1 - J tau) x' = x - x^3/3 + y`, `y' = eps (a - x)`. In the rescaled
//! time `theta = t / (1 - J tau)` this is plain van der Pol with the slow
//! rate `eps_tilde = eps (1 - J tau)`.

use serde::{Deserialize, Serialize};

use crate::dde::{simulate, HistorySpec, Trajectory, VdpParams};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFormCoeffs {
    pub eps_tilde: f64,
    pub a_tilde_c: f64,
    pub a_c: f64,
    pub a1: f64,
}

fn check_jt(op: &'static str, j: f64, tau: f64) -> Result<f64> {
    let s = 1.0 - j * tau;
    if !(s > 0.0) || tau < 0.0 {
        return Err(domain(op, format!("need 0 <= tau and J*tau < 1, got J*tau = {}", j * tau)));
    }
    Ok(s)
}

pub fn coeffs(j: f64, tau: f64, eps: f64) -> Result<NormalFormCoeffs> {
    let s = check_jt("coeffs", j, tau)?;
    if !(eps >= 0.0) {
        return Err(domain("coeffs", format!("need eps >= 0, got {eps}")));
    }
    let eps_tilde = eps * s;
    let a_tilde_c = eps_tilde / 8.0;
    Ok(NormalFormCoeffs {
        eps_tilde,
        a_tilde_c,
        a_c: 1.0 - a_tilde_c,
        a1: j * tau * tau / (2.0 * s),
    })
}

/// Delay at which the leading-order canard curve `1 - a = eps (1 - J tau) / 8` is crossed.
pub fn tau_c_leading(j: f64, eps: f64, a: f64) -> Result<f64> {
    let at = 1.0 - a;
    if !(at > 0.0 && at <= eps / 8.0) || !(j > 0.0) {
        return Err(Error::NoCrossing(format!(
            "need J > 0 and 0 < 1 - a <= eps/8, got 1 - a = {at}, eps/8 = {}",
            eps / 8.0
        )));
    }
    Ok((1.0 - 8.0 * at / eps) / j)
}

/// Reduced ODE in the rescaled time `theta`.
pub fn ode_simulate(p: &VdpParams, init: (f64, f64), t_end: f64, h: f64) -> Result<Trajectory> {
    p.validate()?;
    let s = check_jt("ode_simulate", p.j, p.tau)?;
    let q = VdpParams::new(0.0, 0.0, p.a, p.eps * s);
    simulate(&q, &HistorySpec::constant(init.0, init.1), t_end, h)
}

/// Reduced ODE in physical time, `(1 - J tau) x' = x - x^3/3 + y`. Plain RK4
/// on `t = k h`.
pub fn ode_simulate_physical(p: &VdpParams, init: (f64, f64), t_end: f64, h: f64) -> Result<Vec<[f64; 2]>> {
    p.validate()?;
    let s = check_jt("ode_simulate_physical", p.j, p.tau)?;
    if !(h > 0.0) || !(t_end > 0.0) {
        return Err(Error::InvalidStep(format!("need h > 0 and t_end > 0, got h = {h}, t_end = {t_end}")));
    }
    let f = |x: f64, y: f64| [(x - x * x * x / 3.0 + y) / s, p.eps * (p.a - x)];
    let n = ((t_end / h) - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    let (mut x, mut y) = init;
    out.push([x, y]);
    for k in 0..n {
        let k1 = f(x, y);
        let k2 = f(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1]);
        let k3 = f(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1]);
        let k4 = f(x + h * k3[0], y + h * k3[1]);
        x += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        y += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
        if !(x.abs() <= 1e6) || !y.is_finite() {
            return Err(Error::BlowUp { t: (k + 1) as f64 * h });
        }
        out.push([x, y]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericityItem {
    pub condition: String,
    pub value: f64,
    pub expected: f64,
    pub passes: bool,
}

const FD_TOL: f64 = 1e-6;

/// Finite-difference check of the fold and canard-point nondegeneracy
/// conditions for `f = x - x^3/3 + y`, `g = a - x` with `a = 1 - a_tilde`,
/// evaluated at `a_tilde = 0`.
pub fn genericity_report(j: f64, tau: f64) -> Result<Vec<GenericityItem>> {
    check_jt("genericity_report", j, tau)?;
    let f = |x: f64, y: f64| x - x * x * x / 3.0 + y;
    let g = |x: f64, at: f64| 1.0 - at - x;
    let d = 1e-4;
    let mut items = Vec::new();
    let mut push = |name: String, value: f64, expected: f64, nonzero: bool| {
        let close = (value - expected).abs() <= FD_TOL;
        items.push(GenericityItem {
            condition: name,
            value,
            expected,
            passes: close && (!nonzero || value != 0.0),
        });
    };
    for (label, xs) in [("canard x=1", 1.0f64), ("plain x=-1", -1.0)] {
        let ys = xs * xs * xs / 3.0 - xs;
        let fx = (f(xs + d, ys) - f(xs - d, ys)) / (2.0 * d);
        let fxx = (f(xs + d, ys) - 2.0 * f(xs, ys) + f(xs - d, ys)) / (d * d);
        let fy = (f(xs, ys + d) - f(xs, ys - d)) / (2.0 * d);
        push(format!("fold df/dx=0 at {label}"), fx, 0.0, false);
        push(format!("nonzero d2f/dx2 at {label}"), fxx, -2.0 * xs, true);
        push(format!("nonzero df/dy at {label}"), fy, 1.0, true);
        let gx = (g(xs + d, 0.0) - g(xs - d, 0.0)) / (2.0 * d);
        push(format!("nonzero dg/dx at {label}"), gx, -1.0, true);
    }
    push("nonzero g at plain x=-1".into(), g(-1.0, 0.0), 2.0, true);
    let gl = (g(1.0, d) - g(1.0, -d)) / (2.0 * d);
    push("nonzero dg/da_tilde at canard x=1".into(), gl, -1.0, true);
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dde::equilibrium;

    #[test]
    fn coeff_examples() {
        let c = coeffs(2.0, 0.0, 0.05).unwrap();
        assert_eq!(c.eps_tilde, 0.05);
        assert!((c.a_c - 0.99375).abs() < 1e-15);
        assert_eq!(c.a1, 0.0);
        assert!((coeffs(2.0, 0.25, 0.05).unwrap().a1 - 0.125).abs() < 1e-15);
        let near = coeffs(2.0, 0.5 - 1e-9, 0.05).unwrap();
        assert!(near.a_tilde_c < 1e-9 && near.a1 > 1e7);
        assert!(coeffs(2.0, 0.5, 0.05).is_err());
        assert!(coeffs(2.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn a1_grows_with_tau() {
        let mut prev = -1.0;
        for k in 0..500 {
            let a1 = coeffs(2.0, k as f64 * 0.001, 0.05).unwrap().a1;
            assert!(a1 >= 0.0 && a1 > prev);
            prev = a1;
        }
    }

    #[test]
    fn tau_c_examples() {
        assert!((tau_c_leading(2.0, 0.05, 0.995).unwrap() - 0.1).abs() < 1e-12);
        assert!(tau_c_leading(2.0, 0.05, 1.0 - 0.05 / 8.0).unwrap().abs() < 1e-12);
        assert!(matches!(tau_c_leading(2.0, 0.05, 1.0), Err(Error::NoCrossing(_))));
        assert!(tau_c_leading(2.0, 0.05, 0.99).is_err());
    }

    #[test]
    fn zero_delay_matches_dde() {
        let p = VdpParams::new(2.0, 0.0, 0.99, 0.05);
        let a = ode_simulate(&p, (0.5, -0.2), 30.0, 1e-3).unwrap();
        let b = simulate(&p, &HistorySpec::constant(0.5, -0.2), 30.0, 1e-3).unwrap();
        assert_eq!(a.len(), b.len());
        for (u, v) in a.states.iter().zip(&b.states) {
            assert!((u[0] - v[0]).abs() <= 1e-12 && (u[1] - v[1]).abs() <= 1e-12);
        }
    }

    #[test]
    fn equilibrium_stays_put() {
        let p = VdpParams::new(2.0, 0.2, 0.99, 0.05);
        let (x, y) = equilibrium(&p);
        let t = ode_simulate(&p, (x, y), 20.0, 1e-2).unwrap();
        assert!(t.states.iter().all(|s| (s[0] - x).abs() < 1e-14 && (s[1] - y).abs() < 1e-14));
    }

    #[test]
    fn physical_time_rescales() {
        let p = VdpParams::new(2.0, 0.2, 0.99, 0.05);
        let s = 1.0 - 0.4;
        let h = 1e-3;
        let theta = ode_simulate(&p, (0.3, -0.5), 40.0, h).unwrap();
        let phys = ode_simulate_physical(&p, (0.3, -0.5), 40.0 * s, h * s).unwrap();
        assert_eq!(theta.len(), phys.len());
        for (u, v) in theta.states.iter().zip(&phys) {
            assert!((u[0] - v[0]).abs() <= 1e-10 && (u[1] - v[1]).abs() <= 1e-10);
        }
    }

    #[test]
    fn genericity_all_pass() {
        let rep = genericity_report(2.0, 0.2).unwrap();
        assert_eq!(rep.len(), 10);
        assert!(rep.iter().all(|i| i.passes), "{rep:?}");
        let fxx = rep.iter().find(|i| i.condition == "nonzero d2f/dx2 at canard x=1").unwrap();
        assert!((fxx.value + 2.0).abs() < 1e-6);
        assert!(genericity_report(2.0, 0.6).is_err());
    }
}
