use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use sdwave_core::bounds::{envelope_pair, lower_solution, upper_solution, ClosedFormProfile};
use sdwave_core::dispersion::{choose_beta, critical_speed, lambda_roots, CharacteristicContext, SPEED_TOL};
use sdwave_core::model::{BirthFunction, DelayFunction, ModelSpec};
use sdwave_core::numeric::linspace;
use sdwave_core::pdesim::{
    front_position, front_speed, run, simulate_comparison, spreading_probe, Dynamics, Field, FrontTrack, RunRecord,
    SimConfig,
};
use sdwave_core::profile::{
    critical_config, gamma_membership, lipschitz_bound, residual, solve_critical_with, solve_monotone,
    solve_nonmonotone, ProfileGrid, SolverConfig, SolverMode, WaveSolution, CRITICAL_OFFSET,
};

use crate::config::{solver_mode, ModeChoice, Loaded, ProfileSection};
use crate::report::{num, write_csv, CliError, Report, EXIT_OK, EXIT_VERIFY};

/// Global options shared by every command.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub loaded: Loaded,
    pub out: Option<PathBuf>,
}

impl Ctx {
    fn report(&self, command: &str) -> Report {
        let mut r = Report::new(command, self.loaded.digest.clone());
        if let Some(seed) = self.loaded.config.seed {
            r.set("seed", seed);
        }
        r
    }

    /// `--out`, else `output_dir/name`, else `name`.
    fn out_path(&self, name: &str) -> PathBuf {
        if let Some(p) = &self.out {
            return p.clone();
        }
        match &self.loaded.config.output_dir {
            Some(d) => self.loaded.resolve(d).join(name),
            None => PathBuf::from(name),
        }
    }

    fn out_dir(&self, explicit: Option<&Path>, name: &str) -> PathBuf {
        explicit.map(Path::to_path_buf).unwrap_or_else(|| self.out_path(name))
    }
}

fn c_star_of(model: &ModelSpec) -> Result<f64, CliError> {
    Ok(critical_speed(&CharacteristicContext::from_model(model), SPEED_TOL)?.c_star)
}

/// Requested speeds: command line, then `[dispersion] speeds`, then `1.2 c*`.
fn speeds(ctx: &Ctx, flags: &[f64], c_star: f64) -> Vec<f64> {
    if !flags.is_empty() {
        return flags.to_vec();
    }
    ctx.loaded
        .config
        .dispersion
        .as_ref()
        .and_then(|d| d.speeds.clone())
        .unwrap_or_else(|| vec![1.2 * c_star])
}

pub fn speed(ctx: &Ctx, flags: &[f64]) -> Result<Report, CliError> {
    let model = ctx.loaded.model()?;
    let cctx = CharacteristicContext::from_model(&model).with_convention(ctx.loaded.exponent());
    let tol = ctx.loaded.config.dispersion.as_ref().and_then(|d| d.tol).unwrap_or(SPEED_TOL);
    let s = critical_speed(&cctx, tol)?;
    let mut r = ctx.report("speed");
    r.setf("c_star", s.c_star);
    r.setf("lambda_star", s.lambda_star);
    let mut roots = Vec::new();
    let mut betas = Vec::new();
    let mut rows = Vec::new();
    for c in speeds(ctx, flags, s.c_star) {
        let pair = lambda_roots(c, &cctx)?;
        let rates = choose_beta(c, &model, model.k_eq())?;
        roots.push(json!({"c": num(c), "lambda1": num(pair.lambda1), "lambda2": num(pair.lambda2)}));
        betas.push(json!({"c": num(c), "beta": num(rates.beta)}));
        rows.push(vec![c, pair.lambda1, pair.lambda2]);
    }
    r.set("roots", roots);
    r.set("beta", betas);
    if ctx.out.is_some() {
        let path = ctx.out_path("roots.csv");
        write_csv(&path, "c,lambda1,lambda2", rows)?;
        r.set("csv", path.display().to_string());
    }
    Ok(r)
}

fn configured_solver(model: &ModelSpec, c: f64, mode: SolverMode, sec: &ProfileSection) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::for_model(model, c, mode)?;
    if let Some(h) = sec.h {
        cfg = cfg.with_h(h);
    }
    apply_overrides(&mut cfg, sec);
    Ok(cfg)
}

fn apply_overrides(cfg: &mut SolverConfig, sec: &ProfileSection) {
    if let Some(t) = sec.tol {
        cfg.tol = t;
    }
    if let Some(n) = sec.max_iters {
        cfg.max_iters = n;
    }
    if let Some(w) = sec.damping {
        cfg.damping = w;
    }
    if let Some(x) = sec.xi_min {
        cfg.xi_min = x;
    }
    if let Some(x) = sec.xi_max {
        cfg.xi_max = x;
    }
}

fn mode_name(mode: SolverMode) -> &'static str {
    match mode {
        SolverMode::Monotone => "monotone",
        SolverMode::Nonmonotone => "nonmonotone",
    }
}

fn solve(model: &ModelSpec, c: Option<f64>, critical: bool, sec: &ProfileSection) -> Result<(WaveSolution, SolverMode), CliError> {
    let mode = solver_mode(sec.mode.unwrap_or_default(), model);
    let sol = if critical {
        let s = critical_speed(&CharacteristicContext::from_model(model), SPEED_TOL)?;
        let mut cfg = SolverConfig::for_model(model, s.c_star * (1.0 + CRITICAL_OFFSET), mode)?;
        if let Some(h) = sec.h {
            cfg = cfg.with_h(h);
        }
        critical_config(&mut cfg, s.lambda_star);
        apply_overrides(&mut cfg, sec);
        solve_critical_with(model, &cfg)?
    } else {
        let c = c.ok_or_else(|| CliError::config("profile needs --c, --critical, or [profile] c / critical"))?;
        let cfg = configured_solver(model, c, mode, sec)?;
        match mode {
            SolverMode::Monotone => solve_monotone(model, &cfg)?,
            SolverMode::Nonmonotone => solve_nonmonotone(model, &cfg)?,
        }
    };
    Ok((sol, mode))
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn profile(ctx: &Ctx, c_flag: Option<f64>, critical_flag: bool) -> Result<Report, CliError> {
    let model = ctx.loaded.model()?;
    let sec = ctx.loaded.profile();
    let critical = critical_flag || (c_flag.is_none() && sec.critical.unwrap_or(false));
    let (sol, mode) = solve(&model, c_flag.or(sec.c), critical, &sec)?;
    let path = ctx.out_path("profile.csv");
    let p = &sol.profile;
    write_csv(&path, "xi,phi", (0..p.len()).map(|i| vec![p.xi(i), p.values[i]]))?;
    let mut r = ctx.report("profile");
    r.setf("c", sol.c);
    r.setf("beta", sol.beta);
    r.setf("lambda1", sol.lambda1);
    r.setf("lambda2", sol.lambda2);
    r.setf("residual_sup", sol.residual_sup);
    r.set("iterations", sol.iterations);
    r.set("sandwich_ok", sol.sandwich_ok);
    r.set("lipschitz_ok", sol.lipschitz_ok);
    r.set("monotone_ok", sol.monotone_ok);
    r.set("near_critical", sol.near_critical);
    r.set("mode", mode_name(mode));
    r.setf("h", p.h);
    r.set("csv", path.display().to_string());
    // the sidecar is flat so that `verify` can read the speed back
    let mut side = r.results.clone();
    side.remove("csv");
    let text = serde_json::to_string_pretty(&round(Value::Object(side))).unwrap() + "\n";
    let side_path = sidecar_path(&path);
    fs::write(&side_path, text).map_err(|e| CliError::io(&side_path, e))?;
    Ok(r)
}

fn round(v: Value) -> Value {
    // reuse the report's float policy on a bare object
    let mut tmp = Report::new("", None);
    if let Value::Object(o) = v {
        tmp.results = o;
    }
    tmp.to_value()["results"].clone()
}

pub const VERIFY_RESIDUAL_TOL: f64 = 1e-3;
pub const LIMIT_TOL: f64 = 1e-4;
pub const ENVELOPE_TOL: f64 = 1e-3;

pub fn verify(ctx: &Ctx, csv: &Path, c_flag: Option<f64>) -> Result<Report, CliError> {
    let model = ctx.loaded.model()?;
    let sec = ctx.loaded.profile();
    let (xs, vs) = crate::config::read_two_columns(csv, ("xi", "phi"))?;
    let phi = ProfileGrid::from_samples(&xs, vs)?;
    let side: Option<Value> = fs::read_to_string(sidecar_path(csv)).ok().and_then(|t| serde_json::from_str(&t).ok());
    let field = |k: &str| side.as_ref().and_then(|s| s.get(k)).and_then(Value::as_f64);
    let c = c_flag
        .or_else(|| field("c"))
        .ok_or_else(|| CliError::config("verify needs --c or a sidecar JSON with `c`"))?;
    let mode = match side.as_ref().and_then(|s| s.get("mode")).and_then(Value::as_str) {
        Some("monotone") => SolverMode::Monotone,
        Some("nonmonotone") => SolverMode::Nonmonotone,
        _ => solver_mode(sec.mode.unwrap_or(ModeChoice::Auto), &model),
    };
    let k = model.k_eq();
    let env = envelope_pair(&model)?;
    let level = match mode {
        SolverMode::Monotone => k,
        SolverMode::Nonmonotone => env.kcal,
    };
    let beta = match field("beta") {
        Some(b) => b,
        None => choose_beta(c, &model, level)?.beta,
    };

    let mut r = ctx.report("verify");
    r.setf("c", c);
    r.setf("beta", beta);
    r.set("mode", mode_name(mode));
    let (sup, res) = residual(&phi, c, &model);
    let worst = res.iter().enumerate().fold((0usize, 0.0f64), |a, (i, x)| if x.abs() > a.1 { (i, x.abs()) } else { a });
    r.setf("residual_sup", sup);
    r.setf("residual_argmax_xi", phi.xi(worst.0 + 2));
    let residual_tol = sec.residual_tol.unwrap_or(VERIFY_RESIDUAL_TOL);
    r.check("residual", sup <= residual_tol);
    let (left, right) = (phi.values[0], phi.values[phi.len() - 1]);
    r.setf("left_value", left);
    r.setf("right_value", right);
    r.check("left_limit", left.abs() <= LIMIT_TOL);
    match mode {
        SolverMode::Monotone => {
            r.check("right_limit", (right - k).abs() <= LIMIT_TOL);
            let m = gamma_membership(&phi, c, beta, &model)?;
            r.setf("sandwich_margin", m.sandwich_margin);
            r.setf("lipschitz_margin", m.lipschitz_margin);
            r.check("sandwich", m.sandwich);
            r.check("monotone", m.monotone);
            r.check("lipschitz", m.lipschitz);
        }
        SolverMode::Nonmonotone => {
            let half = 0.5 * phi.xi_max();
            let inside = (0..phi.len())
                .filter(|&i| phi.xi(i) >= half)
                .all(|i| phi.values[i] >= env.k - ENVELOPE_TOL && phi.values[i] <= env.kcal + ENVELOPE_TOL);
            r.check("envelope_window", inside);
            let steepest = phi.values.windows(2).map(|w| (w[1] - w[0]).abs() / phi.h).fold(0.0, f64::max);
            let bound = lipschitz_bound(&model, beta, level);
            r.setf("lipschitz_margin", c * steepest - bound);
            r.check("lipschitz", c * steepest < bound);
        }
    }
    Ok(r)
}

pub fn envelope(ctx: &Ctx, flags: &[f64]) -> Result<Report, CliError> {
    let model = ctx.loaded.model()?;
    let env = envelope_pair(&model)?;
    let c_star = c_star_of(&model)?;
    let mut r = ctx.report("envelope");
    r.setf("kcal", env.kcal);
    r.setf("k", env.k);
    r.setf("K", model.k_eq());
    let cs = speeds(ctx, flags, c_star);
    let mut table = Vec::new();
    for &c in &cs {
        let lo = lower_solution(c, &model)?;
        table.push(json!({"c": num(c), "eta": num(lo.eta), "q": num(lo.q)}));
    }
    r.set("lower", table);
    if ctx.out.is_some() || ctx.loaded.config.output_dir.is_some() {
        let dir = ctx.out_path("envelope");
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let us = linspace(0.0, 1.5 * env.kcal.max(model.k_eq()), 601);
        write_csv(
            &dir.join("envelope_b.csv"),
            "u,b,b_upper,b_lower",
            us.iter().map(|&u| vec![u, model.birth.value(u), env.upper_env.value(u), env.lower_env.value(u)]),
        )?;
        let c = cs[0];
        let up = upper_solution(c, &model, model.k_eq())?;
        let lo = lower_solution(c, &model)?;
        let xis = linspace(-40.0 / up.lambda1, up.kink() + 10.0, 1001);
        write_csv(
            &dir.join("envelope_phi.csv"),
            "xi,phi_upper,phi_lower",
            xis.iter().map(|&x| vec![x, up.value(x), lo.value(x)]),
        )?;
        r.set("out_dir", dir.display().to_string());
    }
    Ok(r)
}

fn snapshot_name(t: f64) -> String {
    format!("snapshot_t{t:.4}.csv")
}

fn write_run(dir: &Path, rec: &RunRecord) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let xs = rec.xs();
    for s in &rec.snapshots {
        write_csv(&dir.join(snapshot_name(s.t)), "x,u", xs.iter().zip(&s.u).map(|(&x, &u)| vec![x, u]))?;
    }
    Ok(())
}

fn run_results(r: &mut Report, rec: &RunRecord, cfg: &SimConfig, dynamics: &Dynamics) {
    r.setf("x_min", rec.x_min);
    r.setf("x_max", rec.x_max);
    r.set("nx", rec.nx);
    r.setf("dt", rec.dt);
    r.setf("t_end", rec.t_end);
    r.set("steps", rec.steps);
    r.setf("level", rec.level);
    r.setf("front_level", dynamics.front_level());
    r.setf("min_value", rec.min_value);
    r.setf("max_value", rec.max_value);
    r.set("band_violations", rec.band_violations);
    r.set("clamp_warnings", rec.clamp_warnings);
    r.set("near_boundary", rec.near_boundary);
    r.set("snapshots", rec.snapshots.len());
    r.set("history_stride", cfg.history_stride);
    match front_speed(&rec.track, 0.5) {
        Ok(fit) => {
            r.setf("front_speed", fit.speed);
            r.setf("front_speed_stderr", fit.stderr);
        }
        Err(_) => r.set("front_speed", Value::Null),
    }
}

pub fn simulate(ctx: &Ctx, out_dir: Option<&Path>) -> Result<Report, CliError> {
    let model = ctx.loaded.model()?;
    let dynamics = Dynamics::Model(model.clone());
    let cfg = ctx.loaded.sim_config(&dynamics, model.k_eq())?;
    let rec = run(&cfg, &dynamics)?;
    let mut r = ctx.report("simulate");
    r.set("kind", "model");
    run_results(&mut r, &rec, &cfg, &dynamics);
    r.setf("c_star", c_star_of(&model)?);
    let dir = ctx.out_dir(out_dir, "run");
    write_run(&dir, &rec)?;
    r.set("out_dir", dir.display().to_string());
    r.write(&dir.join("run.json"))?;
    Ok(r)
}

/// Snapshots of a stored run, sorted by time.
fn read_run(dir: &Path) -> Result<Vec<(f64, Field)>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut snaps = Vec::new();
    for e in entries {
        let path = e.map_err(|e| CliError::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
        let Some(t) = name.strip_prefix("snapshot_t").and_then(|s| s.strip_suffix(".csv")) else {
            continue;
        };
        let t: f64 = t.parse().map_err(|_| CliError::config(format!("bad snapshot name {name}")))?;
        let (xs, us) = crate::config::read_two_columns(&path, ("x", "u"))?;
        if xs.len() < 2 {
            return Err(CliError::config(format!("{name}: too few rows")));
        }
        let field = Field { x_min: xs[0], x_max: xs[xs.len() - 1], nx: xs.len(), u: us, t };
        snaps.push((t, field));
    }
    snaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    if snaps.is_empty() {
        return Err(CliError::config(format!("{}: no snapshot_t*.csv files", dir.display())));
    }
    Ok(snaps)
}

pub fn frontspeed(ctx: &Ctx, dir: &Path, level: Option<f64>, window: f64) -> Result<Report, CliError> {
    let level = match level {
        Some(l) => l,
        None => {
            let meta = fs::read_to_string(dir.join("run.json")).map_err(|e| CliError::io(&dir.join("run.json"), e))?;
            let v: Value = serde_json::from_str(&meta).map_err(|e| CliError::config(format!("run.json: {e}")))?;
            v["results"]["front_level"]
                .as_f64()
                .ok_or_else(|| CliError::config("run.json lacks results.front_level; pass --level"))?
        }
    };
    let snaps = read_run(dir)?;
    let samples = snaps.iter().filter_map(|(t, f)| front_position(f, level).map(|x| (*t, x))).collect();
    let fit = front_speed(&FrontTrack { level, samples }, window)?;
    let mut r = ctx.report("frontspeed");
    r.setf("speed", fit.speed);
    r.setf("stderr", fit.stderr);
    r.set("samples", fit.samples);
    r.setf("level", level);
    Ok(r)
}

pub const PROBE_FRACTION: f64 = 0.9;
pub const PLATEAU_TOL: f64 = 0.02;

pub fn compare(ctx: &Ctx, out_dir: Option<&Path>) -> Result<Report, CliError> {
    let params = ctx.loaded.comparison()?;
    let fraction = ctx.loaded.config.comparison.as_ref().and_then(|c| c.probe_fraction).unwrap_or(PROBE_FRACTION);
    let dynamics = Dynamics::Comparison(params);
    let plateau = params.plateau();
    let cfg = ctx.loaded.sim_config(&dynamics, plateau)?;
    let rec = simulate_comparison(params, &cfg)?;
    let c_comp = params.spreading_speed()?;
    let mut r = ctx.report("compare");
    r.set("kind", "comparison");
    run_results(&mut r, &rec, &cfg, &dynamics);
    r.setf("plateau", plateau);
    r.setf("c_comp", c_comp);
    r.setf("probe_speed", fraction * c_comp);
    let (lo, hi) = spreading_probe(&rec, fraction * c_comp)?;
    r.setf("cone_inf", lo);
    r.setf("cone_sup", hi);
    r.check("band", rec.min_value >= -1e-6 && rec.max_value <= plateau + 1e-6);
    r.check("plateau_on_cone", (lo - plateau).abs() <= PLATEAU_TOL * plateau && (hi - plateau).abs() <= PLATEAU_TOL * plateau);
    if out_dir.is_some() || ctx.out.is_some() || ctx.loaded.config.output_dir.is_some() {
        let dir = ctx.out_dir(out_dir, "compare");
        write_run(&dir, &rec)?;
        r.set("out_dir", dir.display().to_string());
        r.write(&dir.join("run.json"))?;
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    p: f64,
    m: f64,
    big_m: f64,
}

struct SweepRow {
    c_star: Option<f64>,
    speed: Option<f64>,
    residual: Option<f64>,
    error: Option<String>,
}

fn sweep_row(ctx: &Ctx, pt: SweepPoint, d: f64, factor: f64) -> SweepRow {
    let mut row = SweepRow { c_star: None, speed: None, residual: None, error: None };
    let mut errors = Vec::new();
    let delay = if pt.big_m == pt.m {
        DelayFunction::Constant { m: pt.m }
    } else {
        DelayFunction::SaturatingRational { m: pt.m, big_m: pt.big_m }
    };
    let model = match BirthFunction::ricker(pt.p).and_then(|b| ModelSpec::new(d, b, delay.new_checked()?)) {
        Ok(m) => m,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    match c_star_of(&model) {
        Ok(c) => row.c_star = Some(c),
        Err(e) => errors.push(e.message),
    }
    if let Some(c) = row.c_star {
        match solve(&model, Some(factor * c), false, &ctx.loaded.profile()) {
            Ok((sol, _)) => row.residual = Some(sol.residual_sup),
            Err(e) => errors.push(format!("profile: {}", e.message)),
        }
    }
    let dynamics = Dynamics::Model(model.clone());
    let measured = ctx
        .loaded
        .sim_config(&dynamics, model.k_eq())
        .and_then(|cfg| run(&cfg, &dynamics).map_err(CliError::from))
        .and_then(|rec| front_speed(&rec.track, 0.5).map_err(CliError::from));
    match measured {
        Ok(fit) => row.speed = Some(fit.speed),
        Err(e) => errors.push(format!("simulate: {}", e.message)),
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

pub fn sweep(ctx: &Ctx) -> Result<Report, CliError> {
    let sec = ctx.loaded.config.sweep.clone().ok_or_else(|| CliError::config("missing [sweep] section"))?;
    let ms = sec.big_m.clone();
    let mut points = Vec::new();
    for &p in &sec.p {
        for &m in &sec.m {
            match &ms {
                None => points.push(SweepPoint { p, m, big_m: m }),
                Some(list) => points.extend(list.iter().map(|&big_m| SweepPoint { p, m, big_m })),
            }
        }
    }
    if points.is_empty() {
        return Err(CliError::config("sweep grid is empty"));
    }
    let d = sec.d.unwrap_or(1.0);
    let factor = sec.speed_factor.unwrap_or(1.2);
    // collect keeps the grid order whatever the scheduling
    let rows: Vec<SweepRow> = points.par_iter().map(|&pt| sweep_row(ctx, pt, d, factor)).collect();

    let mut text = String::from("p,m,M,c_star,measured_speed,residual_sup\n");
    let cell = |x: Option<f64>| x.map(crate::report::fmt15).unwrap_or_default();
    let mut table = Vec::new();
    for (pt, row) in points.iter().zip(&rows) {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell(Some(pt.p)),
            cell(Some(pt.m)),
            cell(Some(pt.big_m)),
            cell(row.c_star),
            cell(row.speed),
            cell(row.residual)
        ));
        table.push(json!({
            "p": num(pt.p), "m": num(pt.m), "M": num(pt.big_m),
            "c_star": row.c_star.map_or(Value::Null, num),
            "measured_speed": row.speed.map_or(Value::Null, num),
            "residual_sup": row.residual.map_or(Value::Null, num),
            "error": row.error.clone().map_or(Value::Null, Value::String),
        }));
    }
    let path = ctx.out_path("sweep.csv");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    let mut r = ctx.report("sweep");
    r.set("rows", table);
    r.set("csv", path.display().to_string());
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    r.set("failed_rows", failed);
    r.write(&path.with_extension("json"))?;
    if failed == rows.len() {
        return Err(CliError { code: crate::report::EXIT_NONCONVERGENCE, message: "every sweep row failed".into() });
    }
    Ok(r)
}

/// Exit code for a finished report: `verify` fails on any failed check.
pub fn exit_code(command: &str, report: &Report) -> i32 {
    if command == "verify" && !report.all_checks_pass() {
        EXIT_VERIFY
    } else {
        EXIT_OK
    }
}
