//! Steady-cycle measurement and bisection of the canard explosion.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    detect_period, CrossingDetector, Direction, Extremum, ExtremaDetector, Regime, SectionDef, SectionVar,
};
use crate::dde::{default_step, equilibrium, HistorySpec, Integrator, Trajectory, VdpParams};
use crate::error::{Error, Result};
use crate::fmt_num;

pub const SMALL_AMP: f64 = 1.0;
pub const LARGE_AMP: f64 = 3.0;
pub const TRANSIENT_SLOW_TIMES: f64 = 50.0;
pub const WINDOW_SLOW_TIMES: f64 = 20.0;
/// Offset of the initial `x` from the equilibrium.
pub const INIT_KICK: f64 = 0.01;
const MAX_BISECTIONS: usize = 200;
const PERIOD_RTOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    pub amplitude: f64,
    pub period: Option<f64>,
    pub maxima_values: Vec<f64>,
    pub maxima_count_per_period: Option<usize>,
}

/// Which equations a probe integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// The delayed system.
    Dde,
    /// The first-order small-delay ODE in rescaled time.
    SmallDelayOde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    Tau,
    A,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Tau => "tau",
            Param::A => "a",
        }
    }

    pub fn set(self, p: VdpParams, v: f64) -> VdpParams {
        match self {
            Param::Tau => p.with_tau(v),
            Param::A => p.with_a(v),
        }
    }
}

/// Run lengths. `None` fields fall back to the defaults for the probe's slow rate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleOptions {
    pub transient: Option<f64>,
    pub window: Option<f64>,
    pub h: Option<f64>,
}

/// Parameters actually integrated: the ODE runs as plain van der Pol with `eps (1 - J tau)`.
fn effective(model: Model, p: &VdpParams) -> Result<VdpParams> {
    match model {
        Model::Dde => Ok(*p),
        Model::SmallDelayOde => {
            let s = 1.0 - p.j * p.tau;
            if !(s > 0.0) {
                return Err(crate::error::domain(
                    "ode_simulate",
                    format!("need J*tau < 1, got {}", p.j * p.tau),
                ));
            }
            Ok(VdpParams::new(0.0, 0.0, p.a, p.eps * s))
        }
    }
}

fn stats_from(amplitude: f64, ext: &[Extremum], crossings: &[f64]) -> CycleStats {
    let maxima: Vec<&Extremum> = ext.iter().filter(|e| e.is_max).collect();
    let mut stats = CycleStats {
        amplitude,
        period: None,
        maxima_values: maxima.iter().map(|e| e.x).collect(),
        maxima_count_per_period: None,
    };
    let intervals: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    if intervals.len() < 3 {
        return stats;
    }
    let mean = intervals.iter().sum::<f64>() / intervals.len() as f64;
    let max_p = (intervals.len() / 3).min(8);
    if let Ok(Some(p)) = detect_period(&intervals, PERIOD_RTOL * mean, max_p) {
        let n = crossings.len();
        let (t0, t1) = (crossings[n - 1 - p], crossings[n - 1]);
        stats.period = Some(t1 - t0);
        stats.maxima_count_per_period = Some(maxima.iter().filter(|e| e.t > t0 && e.t <= t1).count());
    }
    stats
}

/// Cycle statistics of a stored trajectory after `discard`.
pub fn cycle_stats(traj: &Trajectory, discard: f64) -> Result<CycleStats> {
    let idx: Vec<usize> = (0..traj.len()).filter(|&k| traj.times[k] >= discard).collect();
    if idx.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "fewer than two samples after t = {discard}"
        )));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ext = ExtremaDetector::new();
    for &k in &idx {
        let x = traj.states[k][0];
        lo = lo.min(x);
        hi = hi.max(x);
        ext.push(traj.times[k], traj.states[k], traj.derivs[k]);
    }
    let mut cd = CrossingDetector::new(SectionDef::new(SectionVar::X, 0.5 * (lo + hi), Direction::Up));
    for &k in &idx {
        cd.push(traj.times[k], traj.states[k], traj.derivs[k]);
    }
    let ct: Vec<f64> = cd.crossings.iter().map(|c| c.t).collect();
    Ok(stats_from(hi - lo, &ext.extrema, &ct))
}

/// Start every probe from the equilibrium shifted by [`INIT_KICK`] in `x`.
pub fn default_init(p: &VdpParams) -> HistorySpec {
    let (x, y) = equilibrium(p);
    HistorySpec::constant(x + INIT_KICK, y)
}

/// Integrate through `transient`, then measure over `window`. The window is
/// replayed from a snapshot to collect midrange crossings, so nothing of
/// the orbit is stored.
pub fn steady_cycle(p: &VdpParams, transient: f64, window: f64, h: f64) -> Result<CycleStats> {
    steady_cycle_from(p, &default_init(p), transient, window, h)
}

pub fn steady_cycle_from(p: &VdpParams, init: &HistorySpec, transient: f64, window: f64, h: f64) -> Result<CycleStats> {
    if !(transient >= 0.0) || !(window > 0.0) {
        return Err(Error::InvalidStep(format!(
            "need transient >= 0 and window > 0, got {transient}, {window}"
        )));
    }
    let mut it = Integrator::new(p, init, h)?;
    it.advance_to(transient, |_, _, _| {})?;
    let snap = it.clone();
    let t_end = transient + window;

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ext = ExtremaDetector::new();
    let mut take = |t: f64, s: [f64; 2], d: [f64; 2]| {
        lo = lo.min(s[0]);
        hi = hi.max(s[0]);
        ext.push(t, s, d);
    };
    take(it.time(), it.state(), it.deriv());
    it.advance_to(t_end, &mut take)?;

    let mut it = snap;
    let mut cd = CrossingDetector::new(SectionDef::new(SectionVar::X, 0.5 * (lo + hi), Direction::Up));
    cd.push(it.time(), it.state(), it.deriv());
    it.advance_to(t_end, |t, s, d| cd.push(t, s, d))?;
    let ct: Vec<f64> = cd.crossings.iter().map(|c| c.t).collect();
    Ok(stats_from(hi - lo, &ext.extrema, &ct))
}

/// Steady cycle of either model with default run lengths filled in.
pub fn measure(model: Model, p: &VdpParams, opts: &CycleOptions) -> Result<CycleStats> {
    let q = effective(model, p)?;
    q.validate()?;
    if !(q.eps > 0.0) && (opts.transient.is_none() || opts.window.is_none()) {
        return Err(crate::error::domain("steady_cycle", "default run lengths need eps > 0"));
    }
    let transient = opts.transient.unwrap_or(TRANSIENT_SLOW_TIMES / q.eps);
    let window = opts.window.unwrap_or(WINDOW_SLOW_TIMES / q.eps);
    let h = opts.h.map_or_else(|| default_step(q.tau, q.eps), |h| crate::dde::commensurate_step(q.tau, h));
    steady_cycle(&q, transient, window, h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplosionBracket {
    pub param_name: Param,
    pub lo: f64,
    pub hi: f64,
    pub amp_lo: f64,
    pub amp_hi: f64,
    pub iterations: usize,
}

impl ExplosionBracket {
    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Whether the large cycle sits at the upper end.
    pub fn large_at_hi(&self) -> bool {
        self.amp_hi > self.amp_lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectOptions {
    pub small_amp: f64,
    pub large_amp: f64,
    pub width_goal: f64,
    pub cycle: CycleOptions,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self {
            small_amp: SMALL_AMP,
            large_amp: LARGE_AMP,
            width_goal: 1e-9,
            cycle: CycleOptions::default(),
        }
    }
}

/// Bisect `param` on `[lo, hi]` across the jump from amplitude `<= small_amp`
/// to `>= large_amp`. Either end may hold the small cycle. Probes below
/// `large_amp` move the small end, so intermediate amplitudes push the
/// search toward the large side.
pub fn bisect_explosion(
    model: Model,
    base: &VdpParams,
    param: Param,
    lo: f64,
    hi: f64,
    opts: &BisectOptions,
) -> Result<ExplosionBracket> {
    if !(lo < hi) || !(opts.small_amp < opts.large_amp) || !(opts.width_goal > 0.0) {
        return Err(Error::InvalidBracket(format!(
            "need lo < hi, small_amp < large_amp and width_goal > 0 (lo = {lo}, hi = {hi})"
        )));
    }
    let amp = |v: f64| measure(model, &param.set(*base, v), &opts.cycle).map(|s| s.amplitude);
    let (mut a_lo, mut a_hi) = (amp(lo)?, amp(hi)?);
    let large_at_hi = if a_lo <= opts.small_amp && a_hi >= opts.large_amp {
        true
    } else if a_hi <= opts.small_amp && a_lo >= opts.large_amp {
        false
    } else {
        return Err(Error::InvalidBracket(format!(
            "amplitudes {a_lo} at {lo} and {a_hi} at {hi} do not straddle [{}, {}]",
            opts.small_amp, opts.large_amp
        )));
    };
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    while hi - lo > opts.width_goal {
        if iterations == MAX_BISECTIONS {
            return Err(Error::BracketNotConverged { lo, hi, iterations });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let a = amp(mid)?;
        let large = a >= opts.large_amp;
        if large == large_at_hi {
            hi = mid;
            a_hi = a;
        } else {
            lo = mid;
            a_lo = a;
        }
        iterations += 1;
    }
    Ok(ExplosionBracket {
        param_name: param,
        lo,
        hi,
        amp_lo: a_lo,
        amp_hi: a_hi,
        iterations,
    })
}

/// Amplitude-only label used for sweep rows.
pub fn amplitude_label(amp: f64) -> Regime {
    if amp < 1e-3 {
        Regime::Equilibrium
    } else if amp < SMALL_AMP {
        Regime::SmallCycle
    } else if amp <= LARGE_AMP {
        Regime::Canard
    } else {
        Regime::Relaxation
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub stats: Result<CycleStats>,
}

/// One independent steady-cycle run per value, evaluated in parallel on the
/// current rayon pool. Output order follows `values`.
pub fn sweep(model: Model, base: &VdpParams, param: Param, values: &[f64], opts: &CycleOptions) -> Vec<SweepPoint> {
    values
        .par_iter()
        .map(|&v| SweepPoint {
            value: v,
            stats: measure(model, &param.set(*base, v), opts),
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], mut w: W, meta: &[(String, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "param_value,amplitude,period,label")?;
    for p in points {
        match &p.stats {
            Ok(s) => writeln!(
                w,
                "{},{},{},{}",
                fmt_num(p.value),
                fmt_num(s.amplitude),
                s.period.map(fmt_num).unwrap_or_else(|| "nan".into()),
                amplitude_label(s.amplitude).name()
            )?,
            Err(e) => writeln!(w, "{},nan,nan,error: {}", fmt_num(p.value), e.to_string().replace(',', ";"))?,
        }
    }
    Ok(())
}
