use canard_core::analysis::{classify, poincare_crossings, return_map, write_return_map_csv};
use canard_core::canard::{
    amplitude_label, bisect_explosion, default_init, sweep, write_sweep_csv, BisectOptions, CycleOptions,
};
use canard_core::connections::{connection_grid, write_grid_csv};
use canard_core::dde::{commensurate_step, default_step, equilibrium, simulate, simulate_fast, simulate_window};
use canard_core::rates::{rate_profile, tau_star_with};
use canard_core::small_delay::{coeffs, genericity_report, ode_simulate, ode_simulate_physical, tau_c_leading};
use canard_core::spectral::{bt_residuals, hopf_frequency, rightmost_roots};
use canard_core::{fmt_num, Error, HistorySpec, Model, Param, SectionDef, Trajectory, VdpParams};
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::output::{write_json, write_meta, write_rows, Meta, Sink};
use crate::CliError;

pub fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate_cmd(a),
        Command::FastSim(a) => fast_sim(a),
        Command::Roots(a) => roots(a),
        Command::Rates(a) => rates(a),
        Command::TauStar(a) => tau_star_cmd(a),
        Command::Connection(a) => connection(a),
        Command::BisectCanard(a) => bisect(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::OdeApprox(a) => ode_approx(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Coeffs(a) => coeffs_cmd(a),
    }
}

fn model_meta(m: &mut Meta, p: &VdpParams) {
    m.num("J", p.j).num("tau", p.tau).num("a", p.a).num("eps", p.eps);
}

fn format_name(f: Format) -> &'static str {
    match f {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn write_trajectory(sink: &Sink, meta: &Meta, format: Format, times: &[f64], states: &[[f64; 2]]) -> Result<(), CliError> {
    sink.write(|w| match format {
        Format::Csv => write_rows(
            w,
            meta,
            "t,x,y",
            times.iter().zip(states).map(|(t, s)| vec![*t, s[0], s[1]]),
        ),
        Format::Json => {
            let mut f = Map::new();
            f.insert("t".into(), json!(times));
            f.insert("x".into(), json!(states.iter().map(|s| s[0]).collect::<Vec<_>>()));
            f.insert("y".into(), json!(states.iter().map(|s| s[1]).collect::<Vec<_>>()));
            write_json(w, meta, f)
        }
    })
}

fn traj_summary(cmd: &str, traj_len: usize, t_end: f64, last: [f64; 2]) -> String {
    format!(
        "{cmd}: {traj_len} samples to t = {}, final (x, y) = ({}, {})",
        fmt_num(t_end),
        fmt_num(last[0]),
        fmt_num(last[1])
    )
}

fn simulate_cmd(a: &SimulateArgs) -> Result<(), CliError> {
    let p = a.model.params();
    p.validate()?;
    let h = a.h.unwrap_or_else(|| default_step(p.tau, p.eps));
    let d = default_init(&p);
    let x0 = a.x0.unwrap_or(d.x_at_zero);
    let init = HistorySpec {
        x_past: a.x_past.unwrap_or(x0),
        x_at_zero: x0,
        y_at_zero: a.y0.unwrap_or(d.y_at_zero),
    };
    let traj = simulate(&p, &init, a.t_end, h)?;
    let mut meta = Meta::new("simulate");
    model_meta(&mut meta, &p);
    meta.num("t-end", a.t_end)
        .num("h", h)
        .num("x0", init.x_at_zero)
        .num("y0", init.y_at_zero)
        .num("x-past", init.x_past)
        .str("format", format_name(a.format));
    let sink = Sink::new(&a.out.out);
    write_trajectory(&sink, &meta, a.format, &traj.times, &traj.states)?;
    sink.summary(&traj_summary("simulate", traj.len(), traj.t_end(), traj.last()));
    Ok(())
}

fn fast_sim(a: &FastSimArgs) -> Result<(), CliError> {
    let h = a.h.unwrap_or_else(|| default_step(a.tau, 0.0));
    let init = HistorySpec {
        x_past: a.x_past.unwrap_or(a.x0),
        x_at_zero: a.x0,
        y_at_zero: a.y,
    };
    let traj = simulate_fast(a.j, a.tau, a.y, &init, a.t_end, h)?;
    let mut meta = Meta::new("fast-sim");
    meta.num("J", a.j)
        .num("tau", a.tau)
        .num("y", a.y)
        .num("x0", a.x0)
        .num("x-past", init.x_past)
        .num("t-end", a.t_end)
        .num("h", h)
        .str("format", format_name(a.format));
    let sink = Sink::new(&a.out.out);
    write_trajectory(&sink, &meta, a.format, &traj.times, &traj.states)?;
    sink.summary(&traj_summary("fast-sim", traj.len(), traj.t_end(), traj.last()));
    Ok(())
}

fn roots(a: &RootsArgs) -> Result<(), CliError> {
    let rs = rightmost_roots(a.j, a.tau, a.x_star, a.count)?;
    let mut meta = Meta::new("roots");
    meta.num("J", a.j)
        .num("tau", a.tau)
        .num("x-star", a.x_star)
        .int("count", a.count)
        .str("format", format_name(a.format));
    let sink = Sink::new(&a.out.out);
    sink.write(|w| match a.format {
        Format::Csv => {
            write_meta(w, &meta.lines())?;
            writeln!(w, "re,im,branch_index,residual,conjugate_pair")?;
            for r in &rs {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_num(r.value.re),
                    fmt_num(r.value.im),
                    r.branch_index,
                    fmt_num(r.residual),
                    r.conjugate_pair
                )?;
            }
            Ok(())
        }
        Format::Json => {
            let (d0, dp0) = bt_residuals(a.j, a.tau);
            let mut f = Map::new();
            f.insert("roots".into(), serde_json::to_value(&rs)?);
            f.insert("hopf_zeta".into(), json!(hopf_frequency(a.j, a.tau).map(|h| h.zeta)));
            f.insert("bt_delta0_at_fold".into(), json!(d0));
            f.insert("bt_delta_prime0".into(), json!(dp0));
            write_json(w, &meta, f)
        }
    })?;
    let lead = rs[0].value;
    sink.summary(&format!(
        "roots: {} roots, rightmost {} {} {}i",
        rs.len(),
        fmt_num(lead.re),
        if lead.im < 0.0 { "-" } else { "+" },
        fmt_num(lead.im.abs())
    ));
    Ok(())
}

fn rates(a: &RatesArgs) -> Result<(), CliError> {
    let prof = rate_profile(a.j, a.tau, a.a, a.grid)?;
    let h4 = prof.h4();
    let mut meta = Meta::new("rates");
    meta.num("J", a.j)
        .num("tau", a.tau)
        .num("a", a.a)
        .int("grid", a.grid)
        .str("format", format_name(a.format));
    let sink = Sink::new(&a.out.out);
    sink.write(|w| match a.format {
        Format::Csv => {
            // the profile writes J, tau and a itself
            let rest: Vec<(String, String)> = meta
                .lines()
                .into_iter()
                .filter(|(k, _)| !matches!(k.as_str(), "J" | "tau" | "a"))
                .collect();
            prof.write_csv(w, &rest)
        }
        Format::Json => {
            let mut f = Map::new();
            f.insert("y_star".into(), json!(prof.y_grid));
            f.insert("R_np".into(), json!(prof.r_np));
            f.insert("R_nm".into(), json!(prof.r_nm));
            f.insert("R_p".into(), json!(prof.r_p));
            f.insert("h4".into(), serde_json::to_value(h4)?);
            write_json(w, &meta, f)
        }
    })?;
    let verdict = match h4.violation {
        None => "holds".to_string(),
        Some((lo, hi)) => format!("fails on y* in [{}, {}]", fmt_num(lo), fmt_num(hi)),
    };
    sink.summary(&format!(
        "rates: {} grid points, R_np > R_p {verdict}, min margin {}",
        prof.y_grid.len(),
        fmt_num(h4.min_margin)
    ));
    Ok(())
}

fn tau_star_cmd(a: &TauStarArgs) -> Result<(), CliError> {
    let ts = tau_star_with(a.j, a.a, (a.lo, a.hi), a.grid, a.width)?;
    let mut meta = Meta::new("tau-star");
    meta.num("J", a.j)
        .num("a", a.a)
        .num("lo", a.lo)
        .num("hi", a.hi)
        .int("grid", a.grid)
        .num("width", a.width);
    let sink = Sink::new(&a.out.out);
    sink.write(|w| {
        let mut f = Map::new();
        f.insert("tau_star".into(), json!(ts));
        write_json(w, &meta, f)
    })?;
    sink.summary(&format!("tau-star: {}", fmt_num(ts)));
    Ok(())
}

fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("--{flag}: cannot parse {t:?}: {e}")))
        })
        .collect()
}

fn single_thread_pool() -> Result<rayon::ThreadPool, CliError> {
    pool(1)
}

fn pool(n: usize) -> Result<rayon::ThreadPool, CliError> {
    if n == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {n} worker threads: {e}")))
}

fn connection(a: &ConnectionArgs) -> Result<(), CliError> {
    let taus = parse_list("taus", &a.taus)?;
    let ys = parse_list("ys", &a.ys)?;
    let rows = single_thread_pool()?.install(|| connection_grid(a.j, &taus, &ys, a.t_max, a.tol))?;
    let mut meta = Meta::new("connection");
    meta.num("J", a.j)
        .str("taus", &a.taus)
        .str("ys", &a.ys)
        .num("t-max", a.t_max)
        .num("tol", a.tol)
        .str("format", format_name(a.format));
    let sink = Sink::new(&a.out.out);
    sink.write(|w| match a.format {
        Format::Csv => write_grid_csv(&rows, w, &meta.lines()),
        Format::Json => {
            let mut f = Map::new();
            f.insert("rows".into(), serde_json::to_value(&rows)?);
            write_json(w, &meta, f)
        }
    })?;
    let hit = rows.iter().filter(|r| r.report.hit_time.is_some()).count();
    sink.summary(&format!("connection: {hit}/{} orbits reached an outer branch", rows.len()));
    Ok(())
}

fn cycle_options(c: &CycleArgs) -> CycleOptions {
    CycleOptions {
        transient: c.transient,
        window: c.window,
        h: c.h,
    }
}

fn cycle_meta(m: &mut Meta, c: &CycleArgs) {
    if let Some(v) = c.transient {
        m.num("transient", v);
    }
    if let Some(v) = c.window {
        m.num("window", v);
    }
    if let Some(v) = c.h {
        m.num("h", v);
    }
}

fn model_name(m: ModelArg) -> &'static str {
    match m {
        ModelArg::Dde => "dde",
        ModelArg::Ode => "ode",
    }
}

fn bisect(a: &BisectArgs) -> Result<(), CliError> {
    let p = a.model_params.params();
    p.validate()?;
    let opts = BisectOptions {
        small_amp: a.small_amp,
        large_amp: a.large_amp,
        width_goal: a.width,
        cycle: cycle_options(&a.cycle),
    };
    let param: Param = a.param.into();
    let b = bisect_explosion(a.model.into(), &p, param, a.lo, a.hi, &opts)?;
    let mut meta = Meta::new("bisect-canard");
    model_meta(&mut meta, &p);
    meta.str("model", model_name(a.model))
        .str("param", param.name())
        .num("lo", a.lo)
        .num("hi", a.hi)
        .num("width", a.width)
        .num("small-amp", a.small_amp)
        .num("large-amp", a.large_amp);
    cycle_meta(&mut meta, &a.cycle);
    let sink = Sink::new(&a.out.out);
    sink.write(|w| {
        let mut f = match serde_json::to_value(b)? {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        f.insert("center".into(), json!(b.center()));
        f.insert("bracket_width".into(), json!(b.width()));
        write_json(w, &meta, f)
    })?;
    sink.summary(&format!(
        "bisect-canard: {} in [{}, {}] (center {}), amplitude {} -> {}, {} bisections",
        param.name(),
        fmt_num(b.lo),
        fmt_num(b.hi),
        fmt_num(b.center()),
        fmt_num(b.amp_lo),
        fmt_num(b.amp_hi),
        b.iterations
    ));
    Ok(())
}

fn grid(from: f64, to: f64, n: usize) -> Result<Vec<f64>, CliError> {
    match n {
        0 => Err(CliError::Usage("--n must be at least 1".into())),
        1 => Ok(vec![from]),
        _ => Ok((0..n).map(|k| from + (to - from) * k as f64 / (n - 1) as f64).collect()),
    }
}

fn sweep_cmd(a: &SweepArgs) -> Result<(), CliError> {
    let p = a.model_params.params();
    p.validate()?;
    let values = grid(a.from, a.to, a.n)?;
    let param: Param = a.param.into();
    let model: Model = a.model.into();
    let opts = cycle_options(&a.cycle);
    let points = pool(a.jobs)?.install(|| sweep(model, &p, param, &values, &opts));
    let mut meta = Meta::new("sweep");
    model_meta(&mut meta, &p);
    meta.str("model", model_name(a.model))
        .str("param", param.name())
        .num("from", a.from)
        .num("to", a.to)
        .int("n", a.n);
    cycle_meta(&mut meta, &a.cycle);
    meta.str("format", format_name(a.format));
    let sink = Sink::new(&a.out.out);
    sink.write(|w| match a.format {
        Format::Csv => write_sweep_csv(&points, w, &meta.lines()),
        Format::Json => {
            let rows: Vec<Value> = points
                .iter()
                .map(|pt| match &pt.stats {
                    Ok(s) => json!({
                        "param_value": pt.value,
                        "amplitude": s.amplitude,
                        "period": s.period,
                        "label": amplitude_label(s.amplitude).name(),
                    }),
                    Err(e) => json!({ "param_value": pt.value, "error": e.to_string() }),
                })
                .collect();
            let mut f = Map::new();
            f.insert("points".into(), Value::Array(rows));
            write_json(w, &meta, f)
        }
    })?;
    let failed: Vec<(f64, &Error)> = points
        .iter()
        .filter_map(|pt| pt.stats.as_ref().err().map(|e| (pt.value, e)))
        .collect();
    for (v, e) in &failed {
        eprintln!("canard: sweep point {}={}: {e}", param.name(), fmt_num(*v));
    }
    sink.summary(&format!(
        "sweep: {} points in {}, {} failed",
        points.len(),
        param.name(),
        failed.len()
    ));
    match failed.first() {
        Some((_, e)) => Err(CliError::Numerical((*e).clone())),
        None => Ok(()),
    }
}

fn ode_approx(a: &OdeArgs) -> Result<(), CliError> {
    let p = a.model.params();
    p.validate()?;
    let c = coeffs(p.j, p.tau, p.eps)?;
    let (xe, ye) = equilibrium(&p);
    let init = (a.x0.unwrap_or(xe + canard_core::canard::INIT_KICK), a.y0.unwrap_or(ye));
    let mut h_auto = 1e-3f64;
    if c.eps_tilde > 0.0 {
        h_auto = h_auto.min(c.eps_tilde / 50.0);
    }
    let h = a.h.unwrap_or(h_auto);
    let (times, states) = match a.time {
        TimeArg::Rescaled => {
            let Trajectory { times, states, .. } = ode_simulate(&p, init, a.t_end, h)?;
            (times, states)
        }
        TimeArg::Physical => {
            let states = ode_simulate_physical(&p, init, a.t_end, h)?;
            let times = (0..states.len()).map(|k| k as f64 * h).collect();
            (times, states)
        }
    };
    let mut meta = Meta::new("ode-approx");
    model_meta(&mut meta, &p);
    meta.num("t-end", a.t_end)
        .num("h", h)
        .num("x0", init.0)
        .num("y0", init.1)
        .str(
            "time",
            match a.time {
                TimeArg::Physical => "physical",
                TimeArg::Rescaled => "rescaled",
            },
        )
        .str("format", format_name(a.format));
    let sink = Sink::new(&a.out.out);
    write_trajectory(&sink, &meta, a.format, &times, &states)?;
    let last = *states.last().unwrap_or(&[f64::NAN; 2]);
    sink.summary(&format!(
        "{}, eps_tilde = {}, a_c = {}",
        traj_summary("ode-approx", states.len(), *times.last().unwrap_or(&0.0), last),
        fmt_num(c.eps_tilde),
        fmt_num(c.a_c)
    ));
    Ok(())
}

fn classify_cmd(a: &ClassifyArgs) -> Result<(), CliError> {
    let p = a.model.params();
    p.validate()?;
    let needs_eps = a.cycle.transient.is_none() || a.cycle.window.is_none();
    if needs_eps && p.eps <= 0.0 {
        return Err(Error::Domain {
            op: "classify",
            detail: "default run lengths need eps > 0".into(),
        }
        .into());
    }
    let transient = a.cycle.transient.unwrap_or(50.0 / p.eps);
    let window = a.cycle.window.unwrap_or(20.0 / p.eps);
    let h = a.cycle.h.map_or_else(|| default_step(p.tau, p.eps), |h| commensurate_step(p.tau, h));
    let traj = simulate_window(&p, &default_init(&p), transient, transient + window, h)?;
    let c = classify(&traj, transient)?;
    let (xe, ye) = equilibrium(&p);
    let level = a.section_level.unwrap_or(match a.section_var {
        SectionVarArg::X => xe,
        SectionVarArg::Y => ye,
    });
    let section = SectionDef::new(a.section_var.into(), level, a.direction.into());
    let values: Vec<f64> = poincare_crossings(&traj, &section, transient)
        .iter()
        .map(|x| section.coordinate(x))
        .collect();

    let mut meta = Meta::new("classify");
    model_meta(&mut meta, &p);
    meta.num("transient", transient)
        .num("window", window)
        .num("h", h)
        .str(
            "section-var",
            match a.section_var {
                SectionVarArg::X => "x",
                SectionVarArg::Y => "y",
            },
        )
        .num("section-level", level)
        .str(
            "direction",
            match a.direction {
                DirectionArg::Up => "up",
                DirectionArg::Down => "down",
                DirectionArg::Both => "both",
            },
        );
    let sink = Sink::new(&a.out.out);
    sink.write(|w| {
        let mut f = match c.to_json() {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        f.insert("section_crossings".into(), json!(values.len()));
        write_json(w, &meta, f)
    })?;
    sink.summary(&format!(
        "classify: {} (amplitude {}, {} maxima, {} section crossings)",
        c.label.name(),
        fmt_num(c.stats.amplitude),
        c.stats.maxima_values.len(),
        values.len()
    ));
    if let Some(rm) = &a.return_map {
        let pairs = return_map(&values)?;
        Sink::new(&Some(rm.clone())).write(|w| write_return_map_csv(&pairs, w, &meta.lines()))?;
    }
    Ok(())
}

fn coeffs_cmd(a: &CoeffsArgs) -> Result<(), CliError> {
    let c = coeffs(a.j, a.tau, a.eps)?;
    let gen = genericity_report(a.j, a.tau)?;
    let mut meta = Meta::new("coeffs");
    meta.num("J", a.j).num("tau", a.tau).num("eps", a.eps);
    let tc = a.a.map(|av| {
        meta.num("a", av);
        tau_c_leading(a.j, a.eps, av)
    });
    let sink = Sink::new(&a.out.out);
    sink.write(|w| {
        let mut f = match serde_json::to_value(c)? {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        f.insert("genericity".into(), serde_json::to_value(&gen)?);
        match &tc {
            Some(Ok(t)) => {
                f.insert("tau_c_leading".into(), json!(t));
            }
            Some(Err(e)) => {
                f.insert("tau_c_leading".into(), Value::Null);
                f.insert("tau_c_leading_error".into(), json!(e.to_string()));
            }
            None => {}
        }
        write_json(w, &meta, f)
    })?;
    let passing = gen.iter().filter(|g| g.passes).count();
    let mut line = format!(
        "coeffs: eps_tilde = {}, a_c = {}, a1 = {}, genericity {passing}/{} pass",
        fmt_num(c.eps_tilde),
        fmt_num(c.a_c),
        fmt_num(c.a1),
        gen.len()
    );
    if let Some(Ok(t)) = &tc {
        line.push_str(&format!(", tau_c = {}", fmt_num(*t)));
    }
    sink.summary(&line);
    Ok(())
}
