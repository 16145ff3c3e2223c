//! Poincaré sections, return maps, period detection and regime labels.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::canard::{cycle_stats, CycleStats};
use crate::dde::{HistorySpec, Integrator, Trajectory, VdpParams};
use crate::error::{Error, Result};
use crate::fmt_num;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SectionVar {
    X,
    Y,
}

impl SectionVar {
    fn index(self) -> usize {
        match self {
            SectionVar::X => 0,
            SectionVar::Y => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionDef {
    pub variable: SectionVar,
    pub level: f64,
    pub direction: Direction,
}

impl SectionDef {
    pub fn new(variable: SectionVar, level: f64, direction: Direction) -> Self {
        Self {
            variable,
            level,
            direction,
        }
    }

    /// The state component that is not fixed by the section.
    pub fn coordinate(&self, c: &Crossing) -> f64 {
        match self.variable {
            SectionVar::X => c.y,
            SectionVar::Y => c.x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub t: f64,
    pub x: f64,
    pub is_max: bool,
}

/// Grid sample `(t, state, derivative)`.
type Sample = (f64, [f64; 2], [f64; 2]);

fn hermite(p0: f64, p1: f64, m0: f64, m1: f64, h: f64, th: f64) -> f64 {
    crate::dde::hermite(p0, p1, m0, m1, h, th)
}

/// Derivative in `theta` of the Hermite cubic on one interval.
fn hermite_dtheta(p0: f64, p1: f64, m0: f64, m1: f64, h: f64, th: f64) -> f64 {
    let t2 = th * th;
    (6.0 * t2 - 6.0 * th) * (p0 - p1) + (3.0 * t2 - 4.0 * th + 1.0) * h * m0 + (3.0 * t2 - 2.0 * th) * h * m1
}

/// Root of `f` on `[0, 1]` given a sign change, by bisection to machine precision.
fn bisect_unit(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let flo = f(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Streaming section detector fed with consecutive grid samples.
#[derive(Debug, Clone)]
pub struct CrossingDetector {
    def: SectionDef,
    prev: Option<Sample>,
    pub crossings: Vec<Crossing>,
}

impl CrossingDetector {
    pub fn new(def: SectionDef) -> Self {
        Self {
            def,
            prev: None,
            crossings: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, s: [f64; 2], d: [f64; 2]) {
        if let Some((t0, s0, d0)) = self.prev {
            let c = self.def.variable.index();
            let (a, b) = (s0[c] - self.def.level, s[c] - self.def.level);
            let up = a < 0.0 && b >= 0.0;
            let down = a > 0.0 && b <= 0.0;
            let hit = match self.def.direction {
                Direction::Up => up,
                Direction::Down => down,
                Direction::Both => up || down,
            };
            if hit {
                let h = t - t0;
                let th = if b == 0.0 {
                    1.0
                } else {
                    bisect_unit(|th| hermite(s0[c], s[c], d0[c], d[c], h, th) - self.def.level)
                };
                let x = hermite(s0[0], s[0], d0[0], d[0], h, th);
                let y = hermite(s0[1], s[1], d0[1], d[1], h, th);
                self.crossings.push(Crossing { t: t0 + th * h, x, y });
            }
        }
        self.prev = Some((t, s, d));
    }
}

/// Streaming detector of local extrema of `x`, located where `x'` changes sign.
#[derive(Debug, Clone, Default)]
pub struct ExtremaDetector {
    prev: Option<Sample>,
    pub extrema: Vec<Extremum>,
}

impl ExtremaDetector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, s: [f64; 2], d: [f64; 2]) {
        if let Some((t0, s0, d0)) = self.prev {
            let is_max = d0[0] > 0.0 && d[0] <= 0.0;
            let is_min = d0[0] < 0.0 && d[0] >= 0.0;
            if is_max || is_min {
                let h = t - t0;
                let th = if d[0] == 0.0 {
                    1.0
                } else {
                    bisect_unit(|th| hermite_dtheta(s0[0], s[0], d0[0], d[0], h, th))
                };
                let x = hermite(s0[0], s[0], d0[0], d[0], h, th);
                self.extrema.push(Extremum {
                    t: t0 + th * h,
                    x,
                    is_max,
                });
            }
        }
        self.prev = Some((t, s, d));
    }
}

fn feed(traj: &Trajectory, discard: f64, mut f: impl FnMut(f64, [f64; 2], [f64; 2])) {
    for ((&t, &s), &d) in traj.times.iter().zip(&traj.states).zip(&traj.derivs) {
        if t >= discard {
            f(t, s, d);
        }
    }
}

/// Section crossings at times `>= discard`, refined on the Hermite dense output.
pub fn poincare_crossings(traj: &Trajectory, s: &SectionDef, discard: f64) -> Vec<Crossing> {
    let mut det = CrossingDetector::new(*s);
    feed(traj, discard, |t, st, d| det.push(t, st, d));
    det.crossings
}

pub fn extrema(traj: &Trajectory, discard: f64) -> Vec<Extremum> {
    let mut det = ExtremaDetector::new();
    feed(traj, discard, |t, st, d| det.push(t, st, d));
    det.extrema
}

/// Section crossings of a run over `(transient, transient + window]`,
/// collected on the fly.
pub fn section_run(
    p: &VdpParams,
    init: &HistorySpec,
    s: &SectionDef,
    transient: f64,
    window: f64,
    h: f64,
) -> Result<Vec<Crossing>> {
    let mut it = Integrator::new(p, init, h)?;
    it.advance_to(transient, |_, _, _| {})?;
    let mut det = CrossingDetector::new(*s);
    det.push(it.time(), it.state(), it.deriv());
    it.advance_to(transient + window, |t, st, d| det.push(t, st, d))?;
    Ok(det.crossings)
}

/// Consecutive pairs `(s_n, s_{n+1})`.
pub fn return_map(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.len() < 2 {
        return Err(Error::TooFewCrossings {
            needed: 2,
            have: values.len(),
        });
    }
    Ok(values.windows(2).map(|w| (w[0], w[1])).collect())
}

pub fn write_return_map_csv<W: Write>(pairs: &[(f64, f64)], mut w: W, meta: &[(String, String)]) -> io::Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    writeln!(w, "s_n,s_np1")?;
    for (a, b) in pairs {
        writeln!(w, "{},{}", fmt_num(*a), fmt_num(*b))?;
    }
    Ok(())
}

/// Smallest `p <= max_period` with `|s[n + p] - s[n]| <= tol` over the tail
/// (the last half of the sequence, and at least `3 max_period` values).
pub fn detect_period(values: &[f64], tol: f64, max_period: usize) -> Result<Option<usize>> {
    let needed = 3 * max_period.max(1);
    if values.len() < needed {
        return Err(Error::TooFewCrossings {
            needed,
            have: values.len(),
        });
    }
    let tail_len = needed.max(values.len() / 2);
    let tail = &values[values.len() - tail_len..];
    Ok((1..=max_period).find(|&p| tail.windows(p + 1).all(|w| (w[p] - w[0]).abs() <= tol)))
}

/// Number of groups after sorting, splitting wherever neighbours differ by more than `tol`.
pub fn count_clusters(values: &[f64], tol: f64) -> usize {
    if values.is_empty() {
        return 0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    1 + v.windows(2).filter(|w| w[1] - w[0] > tol).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Equilibrium,
    SmallCycle,
    Canard,
    Relaxation,
    Mmo,
    Burst,
    Chaotic,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Equilibrium => "equilibrium",
            Regime::SmallCycle => "small_cycle",
            Regime::Canard => "canard",
            Regime::Relaxation => "relaxation",
            Regime::Mmo => "mmo",
            Regime::Burst => "burst",
            Regime::Chaotic => "chaotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    pub equilibrium_amp: f64,
    pub small_amp: f64,
    pub large_amp: f64,
    /// A maximum counts as a spike above `x_min + spike_fraction * amplitude`.
    pub spike_fraction: f64,
    pub burst_min_spikes: usize,
    /// Quiescent gap, in units of the median inter-spike interval.
    pub quiescence_factor: f64,
    pub period_tol: f64,
    pub max_period: usize,
    pub chaos_min_crossings: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            equilibrium_amp: 1e-3,
            small_amp: 1.0,
            large_amp: 3.0,
            spike_fraction: 0.8,
            burst_min_spikes: 3,
            quiescence_factor: 3.0,
            period_tol: 1e-4,
            max_period: 16,
            chaos_min_crossings: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: Regime,
    pub stats: CycleStats,
    pub spikes: usize,
    pub subthreshold: usize,
    /// Spiking epochs separated by quiescence (complete ones only).
    pub epochs: usize,
    pub assumptions: Vec<String>,
}

impl Classification {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "label": self.label.name(),
            "amplitude": self.stats.amplitude,
            "period": self.stats.period,
            "maxima_count": self.stats.maxima_values.len(),
            "maxima_count_per_period": self.stats.maxima_count_per_period,
            "spikes": self.spikes,
            "subthreshold": self.subthreshold,
            "epochs": self.epochs,
            "assumptions": self.assumptions,
        })
    }
}

struct SpikeSummary {
    spike_times: Vec<f64>,
    subthreshold: usize,
}

/// Maxima above the midrange split into full spikes (preceded by a minimum
/// below the midrange and reaching the spike level) and subthreshold loops.
/// Ringing maxima near the top without a deep preceding minimum are ignored.
fn spikes(ext: &[Extremum], x_min: f64, amp: f64, opts: &ClassifyOptions) -> SpikeSummary {
    let mid = x_min + 0.5 * amp;
    let level = x_min + opts.spike_fraction * amp;
    let mut lowest = f64::INFINITY;
    let mut out = SpikeSummary {
        spike_times: Vec::new(),
        subthreshold: 0,
    };
    for e in ext {
        if !e.is_max {
            lowest = lowest.min(e.x);
            continue;
        }
        if e.x > mid {
            if e.x >= level {
                if lowest <= mid {
                    out.spike_times.push(e.t);
                }
            } else {
                out.subthreshold += 1;
            }
        }
        lowest = f64::INFINITY;
    }
    out
}

/// Spike epochs separated by gaps of at least `factor` median intervals.
/// Returns the sizes of the epochs strictly inside the record.
fn complete_epochs(times: &[f64], factor: f64) -> Vec<usize> {
    if times.len() < 3 {
        return Vec::new();
    }
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sorted = gaps.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let mut sizes = Vec::new();
    let mut current = 1usize;
    let mut seen_gap = false;
    for g in gaps.drain(..) {
        if g >= factor * median {
            if seen_gap {
                sizes.push(current);
            }
            seen_gap = true;
            current = 1;
        } else {
            current += 1;
        }
    }
    sizes
}

/// Label the part of `traj` after `discard`.
pub fn classify(traj: &Trajectory, discard: f64) -> Result<Classification> {
    classify_with(traj, discard, &ClassifyOptions::default())
}

pub fn classify_with(traj: &Trajectory, discard: f64, opts: &ClassifyOptions) -> Result<Classification> {
    let ext = extrema(traj, discard);
    let stats = cycle_stats(traj, discard)?;
    let amp = stats.amplitude;
    let x_min = traj
        .times
        .iter()
        .zip(traj.xs())
        .filter(|(t, _)| **t >= discard)
        .map(|(_, x)| x)
        .fold(f64::INFINITY, f64::min);
    let mut out = Classification {
        label: Regime::Equilibrium,
        stats,
        spikes: 0,
        subthreshold: 0,
        epochs: 0,
        assumptions: vec![
            format!(
                "thresholds: equilibrium < {}, small < {}, large > {}",
                opts.equilibrium_amp, opts.small_amp, opts.large_amp
            ),
            format!(
                "spike level x_min + {} * amplitude; burst: >= {} spikes per epoch, quiescence >= {} x median ISI",
                opts.spike_fraction, opts.burst_min_spikes, opts.quiescence_factor
            ),
        ],
    };
    if amp < opts.equilibrium_amp {
        return Ok(out);
    }
    let maxima: Vec<f64> = ext.iter().filter(|e| e.is_max).map(|e| e.x).collect();
    if amp <= opts.large_amp {
        let periodic = maxima.len() >= 3 * opts.max_period
            && detect_period(&maxima, opts.period_tol, opts.max_period)?.is_some();
        out.label = if periodic {
            if amp < opts.small_amp {
                Regime::SmallCycle
            } else {
                Regime::Canard
            }
        } else if maxima.len() >= opts.chaos_min_crossings {
            Regime::Chaotic
        } else {
            return Err(Error::InsufficientData(format!(
                "{} maxima in the window; need {} to decide periodicity",
                maxima.len(),
                opts.chaos_min_crossings.min(3 * opts.max_period)
            )));
        };
        return Ok(out);
    }
    let sp = spikes(&ext, x_min, amp, opts);
    out.spikes = sp.spike_times.len();
    out.subthreshold = sp.subthreshold;
    let epochs = complete_epochs(&sp.spike_times, opts.quiescence_factor);
    out.epochs = epochs.len();
    out.label = if !epochs.is_empty() && epochs.iter().all(|&n| n >= opts.burst_min_spikes) {
        Regime::Burst
    } else if sp.subthreshold > 0 && !sp.spike_times.is_empty() {
        Regime::Mmo
    } else if !sp.spike_times.is_empty() {
        Regime::Relaxation
    } else {
        return Err(Error::InsufficientData("large amplitude but no complete spike in the window".into()));
    };
    Ok(out)
}
