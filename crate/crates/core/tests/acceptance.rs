//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{rngs::StdRng, Rng, SeedableRng};
use rayon::prelude::*;

use canard_core::analysis::{
    classify, count_clusters, detect_period, section_run, Direction, Regime, SectionDef, SectionVar,
};
use canard_core::canard::{bisect_explosion, default_init, BisectOptions, ExplosionBracket, Model, Param};
use canard_core::connections::{
    connection_orbit, connection_grid, lyapunov_monitor, trap_region, Side, Target, DEFAULT_KICK,
};
use canard_core::critical_manifold::{branch_x, cardano_roots, manifold_residual, BranchId, Y_FOLD};
use canard_core::dde::{default_step, simulate, simulate_window, HistorySpec, VdpParams};
use canard_core::lambert_w::{w0, wm1};
use canard_core::rates::{h4_check, tau_star};
use canard_core::small_delay::ode_simulate;
use canard_core::spectral::{bt_residuals, hopf_frequency, leading_root};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() <= limit_s
}

fn lambert_inverse() -> Outcome {
    let t0 = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let w: f64 = rng.gen_range(-1.0..20.0);
        worst = worst.max((w0(w * w.exp()).unwrap() - w).abs());
    }
    for _ in 0..1000 {
        let w: f64 = rng.gen_range(-20.0..-1.0);
        worst = worst.max((wm1(w * w.exp()).unwrap() - w).abs());
    }
    let el = t0.elapsed();
    outcome(
        worst <= 1e-10 && within(el, 1.0),
        format!("2000 samples, max |W(w e^w) - w| = {worst:.2e}, {:.3}s", el.as_secs_f64()),
    )
}

fn cardano() -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..10_000 {
        let y = -2.0 + 4.0 * k as f64 / 9_999.0;
        for r in cardano_roots(y) {
            worst = worst.max(manifold_residual(r.root, y).abs());
        }
    }
    let hi = cardano_roots(Y_FOLD);
    let lo = cardano_roots(-Y_FOLD);
    let double_ok = hi.iter().any(|r| r.multiplicity == 2 && r.root == -1.0)
        && lo.iter().any(|r| r.multiplicity == 2 && r.root == 1.0)
        && hi.len() == 2
        && lo.len() == 2;
    let el = t0.elapsed();
    outcome(
        worst <= 1e-12 && double_ok && within(el, 1.0),
        format!("max residual {worst:.2e}, double roots at |y| = 2/3: {double_ok}"),
    )
}

fn fold_roots() -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for k in 0..=49 {
        let tau = 0.49 * k as f64 / 49.0;
        for xs in [1.0, -1.0] {
            worst = worst.max(leading_root(2.0, tau, xs).unwrap().value.norm());
        }
    }
    let below = bt_residuals(2.0, 0.49).1 > 0.0;
    let at = bt_residuals(2.0, 0.5).1 == 0.0;
    let above = bt_residuals(2.0, 0.51).1 < 0.0;
    let unstable = leading_root(2.0, 0.6, 1.0).unwrap().value.re;
    let el = t0.elapsed();
    outcome(
        worst <= 1e-10 && below && at && above && unstable > 0.0 && within(el, 1.0),
        format!(
            "max |lambda| at folds {worst:.2e}; BT sign change at tau = 0.5: {}; Re lambda at J tau = 1.2: {unstable:.4}",
            below && at && above
        ),
    )
}

/// Bisection for `zeta = J sin(zeta tau)` on `[1, 2.5]`.
fn hopf_oracle(j: f64, tau: f64) -> f64 {
    let f = |z: f64| z - j * (z * tau).sin();
    let (mut lo, mut hi) = (1.0, 2.5);
    assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..100 {
        let m = 0.5 * (lo + hi);
        if f(m) < 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

fn hopf() -> Outcome {
    let t0 = Instant::now();
    let mut none = 0;
    for i in 0..10 {
        let j = 0.5 + 0.5 * i as f64;
        for k in 1..=10 {
            let tau = (k as f64 / 10.0) / j;
            if hopf_frequency(j, tau).is_none() {
                none += 1;
            }
        }
    }
    let zeta = hopf_frequency(2.0, 0.6).map(|h| h.zeta).unwrap_or(f64::NAN);
    let residual = (zeta - 2.0 * (0.6 * zeta).sin()).abs();
    let diff = (zeta - hopf_oracle(2.0, 0.6)).abs();
    let el = t0.elapsed();
    outcome(
        none == 100 && residual <= 1e-10 && diff <= 1e-8 && within(el, 1.0),
        format!("{none}/100 pairs without Hopf; zeta(2, 0.6) = {zeta:.10}, residual {residual:.1e}, oracle gap {diff:.1e}"),
    )
}

fn threshold_delay() -> Outcome {
    let t0 = Instant::now();
    let ts = tau_star(2.0, 1.0, (0.3, 0.4));
    let el = t0.elapsed();
    let h03 = h4_check(2.0, 0.3, 1.0, 50).map(|r| r.holds);
    let h037 = h4_check(2.0, 0.37, 1.0, 50).map(|r| r.holds);
    match (ts, h03, h037) {
        (Ok(ts), Ok(a), Ok(b)) => outcome(
            (0.34..=0.37).contains(&ts) && a && !b && within(el, 60.0),
            format!("tau* = {ts:.5} in {:.1}s; holds at 0.3: {a}; holds at 0.37: {b}", el.as_secs_f64()),
        ),
        (ts, a, b) => outcome(false, format!("error: {ts:?} {a:?} {b:?}")),
    }
}

fn bracket_line(b: &ExplosionBracket) -> String {
    let (small, large) = if b.large_at_hi() { (b.amp_lo, b.amp_hi) } else { (b.amp_hi, b.amp_lo) };
    format!(
        "bracket [{:.12}, {:.12}] width {:.1e}, amplitude {small:.3} -> {large:.3}, {} iterations",
        b.lo,
        b.hi,
        b.width(),
        b.iterations
    )
}

/// Width, amplitude thresholds and center range of an explosion bracket.
fn bracket_ok(b: &ExplosionBracket, center: (f64, f64)) -> bool {
    let (small, large) = if b.large_at_hi() { (b.amp_lo, b.amp_hi) } else { (b.amp_hi, b.amp_lo) };
    b.width() <= 1e-6 && small < 1.0 && large > 3.0 && (center.0..=center.1).contains(&b.center())
}

fn explosion(model: Model, lo: f64, hi: f64, center: (f64, f64), limit_s: f64) -> Outcome {
    let t0 = Instant::now();
    let base = VdpParams::new(2.0, 0.0, 0.995, 0.05);
    let r = bisect_explosion(model, &base, Param::Tau, lo, hi, &BisectOptions::default());
    let el = t0.elapsed();
    match r {
        Ok(b) => outcome(
            bracket_ok(&b, center) && within(el, limit_s),
            format!(
                "{}; center {:.9} (want [{}, {}]); {:.1}s",
                bracket_line(&b),
                b.center(),
                center.0,
                center.1,
                el.as_secs_f64()
            ),
        ),
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn classical_canard() -> Outcome {
    let run = |eps: f64| {
        let base = VdpParams::new(2.0, 0.0, 0.99, eps);
        bisect_explosion(Model::Dde, &base, Param::A, 0.98, 1.0, &BisectOptions::default())
    };
    match (run(0.05), run(0.02)) {
        (Ok(b5), Ok(b2)) => {
            let e5 = (b5.center() - (1.0 - 0.05 / 8.0)).abs();
            let e2 = (b2.center() - (1.0 - 0.02 / 8.0)).abs();
            outcome(
                e5 <= 0.004 && e2 < e5,
                format!(
                    "eps=0.05: a_c = {:.9} (error {e5:.2e}); eps=0.02: a_c = {:.9} (error {e2:.2e})",
                    b5.center(),
                    b2.center()
                ),
            )
        }
        (a, b) => outcome(false, format!("error: {a:?} {b:?}")),
    }
}

fn connections() -> Outcome {
    let t0 = Instant::now();
    let ys: Vec<f64> = (0..=6).map(|k| k as f64 / 10.0).collect();
    let rows = connection_grid(2.0, &[0.1, 0.2, 0.3, 0.4], &ys, 200.0, 1e-6);
    let el = t0.elapsed();
    let rows = match rows {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| {
            let want = match r.side {
                Side::Plus => Target::Upper,
                Side::Minus => Target::Lower,
            };
            r.report.target != want || r.report.final_distance > 1e-6
        })
        .map(|r| format!("(tau {}, y {}, {})", r.tau, r.y, r.side.name()))
        .collect();
    let latest = rows.iter().filter_map(|r| r.report.hit_time).fold(0.0, f64::max);
    outcome(
        bad.is_empty() && within(el, 120.0),
        format!(
            "{}/{} runs reach the expected branch; latest hit at t = {latest:.1}; {:.1}s {}",
            rows.len() - bad.len(),
            rows.len(),
            el.as_secs_f64(),
            bad.join(" ")
        ),
    )
}

fn trapping() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    let mut worst_z = 0.0f64;
    // J tau in {0.1, ..., 0.48}; at tau = 0 the region is empty (rho = 0)
    for tau in [0.05, 0.1, 0.15, 0.2, 0.24] {
        for k in -6..=6 {
            let y = k as f64 / 10.0;
            cases += 1;
            let trap = trap_region(2.0, tau, y).unwrap();
            let traj = connection_orbit(2.0, tau, y, Side::Plus, DEFAULT_KICK, 200.0).unwrap();
            let rep = lyapunov_monitor(&traj, &trap).unwrap();
            worst_z = worst_z.max(rep.final_z.abs());
            if rep.first_entry.is_none() || !rep.absorbing || rep.final_z.abs() > 1e-6 {
                bad.push(format!("(tau {tau}, y {y})"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{}/{cases} orbits enter and stay in the trap; max |z(t_end)| = {worst_z:.1e} {}",
            cases - bad.len(),
            bad.join(" ")
        ),
    )
}

/// Largest `|x - x_+(y)|` while `y` runs through `[-0.4, 0.4]` after starting on the upper branch at `y = 0.6`.
fn slow_distance(eps: f64) -> f64 {
    let p = VdpParams::new(2.0, 0.3, 1.1, eps);
    let x0 = branch_x(BranchId::Upper, 0.6).unwrap();
    let traj = simulate(&p, &HistorySpec::constant(x0, 0.6), 4.0 / eps, default_step(0.3, eps)).unwrap();
    traj.states
        .iter()
        .filter(|s| s[1].abs() <= 0.4)
        .map(|s| (s[0] - branch_x(BranchId::Upper, s[1]).unwrap()).abs())
        .fold(0.0, f64::max)
}

fn slow_manifold() -> Outcome {
    let (d1, d2) = (slow_distance(0.02), slow_distance(0.01));
    let ratio = d1 / d2;
    outcome(
        (1.5..=2.5).contains(&ratio),
        format!("max distance {d1:.3e} (eps 0.02) vs {d2:.3e} (eps 0.01), ratio {ratio:.3}"),
    )
}

struct SectionSummary {
    tau: f64,
    period: Option<usize>,
    crossings: usize,
    clusters: usize,
}

fn period_doubling() -> Outcome {
    let t0 = Instant::now();
    let section = SectionDef::new(SectionVar::Y, -0.66, Direction::Up);
    let taus: Vec<f64> = (0..=40).map(|k| 0.395 + 0.0005 * k as f64).collect();
    let runs: Vec<Result<SectionSummary, String>> = taus
        .par_iter()
        .map(|&tau| {
            let p = VdpParams::new(2.0, tau, 1.01, 0.05);
            let cr = section_run(&p, &default_init(&p), &section, 3000.0, 2000.0, default_step(tau, 0.05))
                .map_err(|e| e.to_string())?;
            let xs: Vec<f64> = cr.iter().map(|c| section.coordinate(c)).collect();
            let period = detect_period(&xs, 1e-4, 8).map_err(|e| e.to_string())?;
            Ok(SectionSummary {
                tau,
                period,
                crossings: xs.len(),
                clusters: count_clusters(&xs, 1e-4),
            })
        })
        .collect();
    let el = t0.elapsed();
    let runs: Vec<SectionSummary> = match runs.into_iter().collect() {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let hit = |target: f64, want: Option<usize>| {
        runs.iter()
            .filter(|r| (r.tau - target).abs() <= 0.005 + 1e-12 && r.period == want)
            .filter(|r| want.is_some() || (r.crossings >= 50 && r.clusters >= 50))
            .map(|r| r.tau)
            .collect::<Vec<f64>>()
    };
    let p1 = hit(0.400, Some(1));
    let p2 = hit(0.401, Some(2));
    let p4 = hit(0.408, Some(4));
    let chaos = hit(0.41, None);
    let span = |v: &[f64]| match (v.first(), v.last()) {
        (Some(a), Some(b)) => format!("[{a:.4}, {b:.4}]"),
        _ => "none".into(),
    };
    let scan: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.4}:{}", r.tau, r.period.map_or("-".to_string(), |p| p.to_string())))
        .collect();
    outcome(
        !p1.is_empty() && !p2.is_empty() && !p4.is_empty() && !chaos.is_empty() && within(el, 600.0),
        format!(
            "p=1 at {} p=2 at {} p=4 at {} aperiodic at {}; {:.1}s; scan {}",
            span(&p1),
            span(&p2),
            span(&p4),
            span(&chaos),
            el.as_secs_f64(),
            scan.join(" ")
        ),
    )
}

fn label_at(tau: f64, eps: f64) -> Result<Regime, String> {
    let p = VdpParams::new(2.0, tau, 1.0, eps);
    let transient = 50.0 / eps;
    let traj = simulate_window(&p, &default_init(&p), transient, transient + 20.0 / eps, default_step(tau, eps))
        .map_err(|e| e.to_string())?;
    classify(&traj, transient).map(|c| c.label).map_err(|e| e.to_string())
}

fn regimes() -> Outcome {
    let t0 = Instant::now();
    let want = [(0.4, Regime::SmallCycle), (0.45, Regime::Mmo), (1.0, Regime::Burst)];
    let got: Vec<_> = want.par_iter().map(|&(tau, _)| label_at(tau, 0.05)).collect();
    let el = t0.elapsed();
    let pass = got.iter().zip(&want).all(|(g, w)| g.as_ref() == Ok(&w.1)) && within(el, 300.0);
    let line: Vec<String> = got
        .iter()
        .zip(&want)
        .map(|(g, w)| match g {
            Ok(l) => format!("tau {} -> {} (want {})", w.0, l.name(), w.1.name()),
            Err(e) => format!("tau {} -> error {e}", w.0),
        })
        .collect();
    let info: Vec<String> = want
        .par_iter()
        .map(|&(tau, _)| format!("{}: {}", tau, label_at(tau, 0.01).map_or_else(|e| e, |l| l.name().to_string())))
        .collect();
    outcome(
        pass,
        format!(
            "eps=0.05: {}; {:.1}s [eps=0.01 for reference: {}]",
            line.join(", "),
            el.as_secs_f64(),
            info.join(", ")
        ),
    )
}

fn richardson_ratio(run: impl Fn(f64) -> [f64; 2], h: f64) -> f64 {
    let (a, b, c) = (run(h), run(h / 2.0), run(h / 4.0));
    (a[0] - b[0]).hypot(a[1] - b[1]) / (b[0] - c[0]).hypot(b[1] - c[1])
}

fn integrator_order() -> Outcome {
    let p = VdpParams::new(2.0, 0.3, 0.9, 0.1);
    let dde = richardson_ratio(
        |h| simulate(&p, &HistorySpec::constant(0.5, -0.5), 3.0, h).unwrap().last(),
        0.3 / 8.0,
    );
    let q = VdpParams::new(2.0, 0.2, 0.9, 0.1);
    let ode = richardson_ratio(|h| ode_simulate(&q, (0.5, -0.5), 3.0, h).unwrap().last(), 0.04);
    outcome(
        (12.0..=20.0).contains(&dde) && (12.0..=20.0).contains(&ode),
        format!("Richardson ratio DDE {dde:.3}, ODE {ode:.3}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("Lambert W inverse", lambert_inverse),
        ("Cardano roots", cardano),
        ("fold roots and Bogdanov-Takens", fold_roots),
        ("Hopf condition", hopf),
        ("rate threshold tau*", threshold_delay),
        ("delay-induced canard (DDE)", || explosion(Model::Dde, 0.01, 0.12, (0.07, 0.11), 600.0)),
        ("delay-induced canard (small-delay ODE)", || {
            explosion(Model::SmallDelayOde, 0.10, 0.12, (0.105, 0.120), 300.0)
        }),
        ("classical canard at tau = 0", classical_canard),
        ("saddle-to-sink connections", connections),
        ("trapping region", trapping),
        ("slow-manifold O(eps) distance", slow_manifold),
        ("period doubling", period_doubling),
        ("regime classification", regimes),
        ("integrator order", integrator_order),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {n:>2} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
