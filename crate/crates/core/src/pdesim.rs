//! Method-of-lines simulation of the delayed reaction-diffusion equation and
//! of the fixed-delay comparison system
//! `u_t = u_xx - D1 u + D2 u(x, t - m) - D3 u^2`.
//!
//! Diffusion is backward Euler (one tridiagonal solve per step); the
//! reaction, including the delayed term, is explicit. Delayed values are
//! linear-in-time interpolations of stored snapshots at fixed `x`; before
//! `t = 0` they come from the history function.

use std::collections::VecDeque;

use log::warn;

use crate::dispersion::{critical_speed, CharacteristicContext, SPEED_TOL};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::numeric::linspace;
use crate::profile::ProfileGrid;

/// Plateau-seeking comparison system with constant delay `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonParams {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub m: f64,
}

impl ComparisonParams {
    pub fn new(d1: f64, d2: f64, d3: f64, m: f64) -> Result<Self> {
        if !(d1 > 0.0 && d2 > d1 && d3 > 0.0 && m >= 0.0) {
            return Err(Error::Precondition(format!(
                "need D1 > 0, D2 > D1, D3 > 0, m >= 0 (got {d1}, {d2}, {d3}, {m})"
            )));
        }
        Ok(Self { d1, d2, d3, m })
    }

    /// `(D2 - D1) / D3`
    pub fn plateau(&self) -> f64 {
        (self.d2 - self.d1) / self.d3
    }

    /// Linear spreading speed: critical speed of
    /// `lambda^2 - c lambda - D1 + D2 exp(-lambda c m)`.
    pub fn spreading_speed(&self) -> Result<f64> {
        let ctx = CharacteristicContext::new(self.d1, self.d2, self.m)?;
        Ok(critical_speed(&ctx, SPEED_TOL)?.c_star)
    }
}

/// Right-hand side of a simulated equation.
#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    Model(ModelSpec),
    Comparison(ComparisonParams),
}

impl Dynamics {
    #[inline]
    fn delay(&self, u: f64) -> f64 {
        match self {
            Dynamics::Model(m) => m.delay.eval(u.max(0.0)),
            Dynamics::Comparison(p) => p.m,
        }
    }

    fn max_delay(&self) -> f64 {
        match self {
            Dynamics::Model(m) => m.delay.max_delay(),
            Dynamics::Comparison(p) => p.m,
        }
    }

    #[inline]
    fn reaction(&self, u: f64, delayed: f64) -> f64 {
        match self {
            Dynamics::Model(m) => -m.d * u + m.birth.value(delayed),
            Dynamics::Comparison(p) => -p.d1 * u + p.d2 * delayed - p.d3 * u * u,
        }
    }

    /// Largest linear rate, used for the explicit step budget.
    fn rate_scale(&self) -> f64 {
        match self {
            Dynamics::Model(m) => m.d.max(m.bprime0()),
            Dynamics::Comparison(p) => p.d1.max(p.d2),
        }
    }

    /// Upper end of the invariant band for data below `initial_max`.
    fn level(&self, initial_max: f64) -> f64 {
        match self {
            Dynamics::Model(m) => m.k_eq().max(m.kcal() / m.d).max(initial_max),
            Dynamics::Comparison(p) => p.plateau().max(initial_max),
        }
    }

    /// Front-tracking level: `K/2` or half the plateau.
    pub fn front_level(&self) -> f64 {
        match self {
            Dynamics::Model(m) => 0.5 * m.k_eq(),
            Dynamics::Comparison(p) => 0.5 * p.plateau(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Neumann,
    Dirichlet { left: f64, right: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `high` left of `location`, `low` right of it, the mean at it; fronts
    /// advance rightward.
    Step { location: f64, low: f64, high: f64 },
    /// `phi(x - offset)` from a stored profile (`0` on the left); waves
    /// travel leftward.
    Profile { grid: ProfileGrid, offset: f64 },
    /// Piecewise-linear table, constant beyond its ends.
    Table { xs: Vec<f64>, us: Vec<f64> },
    /// `height * max(0, 1 - ((x - center) / half_width)^2)`
    Bump { center: f64, half_width: f64, height: f64 },
    Constant(f64),
}

impl InitialDatum {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialDatum::Step { location, low, high } => {
                if x < *location {
                    *high
                } else if x > *location {
                    *low
                } else {
                    0.5 * (low + high)
                }
            }
            InitialDatum::Profile { grid, offset } => grid.eval(x - offset),
            InitialDatum::Table { xs, us } => {
                let k = xs.partition_point(|&v| v <= x);
                if k == 0 {
                    us[0]
                } else if k == xs.len() {
                    us[us.len() - 1]
                } else {
                    let t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                    us[k - 1] + t * (us[k] - us[k - 1])
                }
            }
            InitialDatum::Bump { center, half_width, height } => {
                let s = (x - center) / half_width;
                height * (1.0 - s * s).max(0.0)
            }
            InitialDatum::Constant(v) => *v,
        }
    }

    /// Natural direction of motion: +1 rightward, -1 leftward.
    fn direction(&self) -> f64 {
        match self {
            InitialDatum::Profile { .. } => -1.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistoryMode {
    /// `psi(x, s) = u0(x)`
    FrozenInitial,
    /// `psi(x, s) = u0(x - v s)` with `v = speed` in the datum's direction
    TranslateWithSpeed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dt: f64,
    pub t_end: f64,
    pub boundary: Boundary,
    pub initial: InitialDatum,
    pub history: HistoryMode,
    pub snapshot_times: Vec<f64>,
    /// store a history snapshot every `history_stride` steps
    pub history_stride: usize,
    /// front samples are recorded every `track_interval` time units
    pub track_interval: f64,
}

impl SimConfig {
    /// Step datum on `[x_min, x_max]` with the default time step for
    /// `dynamics` (shortened to divide `t_end`) and snapshots every unit of
    /// time.
    pub fn step_run(dynamics: &Dynamics, x_min: f64, x_max: f64, nx: usize, t_end: f64, location: f64, high: f64) -> Self {
        let h = (x_max - x_min) / (nx - 1) as f64;
        let mut dt = default_dt(dynamics, h);
        if t_end > 0.0 {
            // whole number of steps to t_end
            dt = t_end / (t_end / dt).ceil();
        }
        Self {
            x_min,
            x_max,
            nx,
            dt,
            t_end,
            boundary: Boundary::Neumann,
            initial: InitialDatum::Step { location, low: 0.0, high },
            history: HistoryMode::FrozenInitial,
            snapshot_times: (0..=t_end.floor() as usize).map(|t| t as f64).collect(),
            history_stride: 1,
            track_interval: 0.5,
        }
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    fn validate(&self, dynamics: &Dynamics) -> Result<()> {
        if self.nx < 5 || !(self.x_max > self.x_min) {
            return Err(Error::Precondition("need nx >= 5 and x_max > x_min".into()));
        }
        if !(self.dt > 0.0 && self.t_end >= 0.0) || self.history_stride == 0 || !(self.track_interval > 0.0) {
            return Err(Error::Precondition("need dt > 0, t_end >= 0, history_stride >= 1, track_interval > 0".into()));
        }
        let budget = stability_budget(dynamics);
        if self.dt > budget * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!("dt = {} exceeds the reaction budget {budget}", self.dt)));
        }
        let m = match dynamics {
            Dynamics::Model(model) => model.delay.m(),
            Dynamics::Comparison(p) => p.m,
        };
        if m > 0.0 && self.dt > m {
            return Err(Error::Precondition(format!("dt = {} exceeds the minimal delay {m}", self.dt)));
        }
        Ok(())
    }
}

/// `0.25 / max(d, b'(0))` (or `max(D1, D2)`)
pub fn stability_budget(dynamics: &Dynamics) -> f64 {
    0.25 / dynamics.rate_scale()
}

/// `min(budget, m/2 when m > 0, h^2)`
pub fn default_dt(dynamics: &Dynamics, h: f64) -> f64 {
    let m = match dynamics {
        Dynamics::Model(model) => model.delay.m(),
        Dynamics::Comparison(p) => p.m,
    };
    let mut dt = stability_budget(dynamics).min(h * h);
    if m > 0.0 {
        dt = dt.min(0.5 * m);
    }
    dt
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub u: Vec<f64>,
    pub t: f64,
}

impl Field {
    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h()
    }
}

/// Stored snapshots `(t, u)` plus the history function for `t < 0`.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    snaps: VecDeque<(f64, Vec<f64>)>,
    initial: InitialDatum,
    mode: HistoryMode,
    xs: Vec<f64>,
    depth: f64,
    /// delayed times clamped into the stored window
    pub clamp_warnings: usize,
}

impl HistoryBuffer {
    fn new(field: &Field, initial: InitialDatum, mode: HistoryMode, depth: f64) -> Self {
        let xs = (0..field.nx).map(|i| field.x(i)).collect();
        let mut snaps = VecDeque::new();
        snaps.push_back((field.t, field.u.clone()));
        Self { snaps, initial, mode, xs, depth, clamp_warnings: 0 }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.snaps.iter().map(|s| s.0)
    }

    /// `psi(x_i, s)` for `s <= 0`.
    pub fn psi(&self, i: usize, s: f64) -> f64 {
        let x = self.xs[i];
        match self.mode {
            HistoryMode::FrozenInitial => self.initial.eval(x),
            HistoryMode::TranslateWithSpeed(c) => self.initial.eval(x - self.initial.direction() * c * s),
        }
    }

    fn push(&mut self, t: f64, u: &[f64], dt: f64, stride_dt: f64) {
        self.snaps.push_back((t, u.to_vec()));
        // keep one snapshot at or before t - M - dt
        let horizon = t - self.depth - 2.0 * dt.max(stride_dt);
        while self.snaps.len() > 2 && self.snaps[1].0 <= horizon {
            self.snaps.pop_front();
        }
    }

    /// Value at grid point `i` and time `td`; `current` is the newest state
    /// at time `t` (possibly newer than the last stored snapshot).
    fn lookup(&mut self, i: usize, td: f64, t: f64, current: &[f64]) -> f64 {
        if td >= t {
            return current[i];
        }
        if td < 0.0 {
            return self.psi(i, td);
        }
        let (t_last, u_last) = self.snaps.back().unwrap();
        if td >= *t_last {
            if t == *t_last {
                return u_last[i];
            }
            let w = (td - t_last) / (t - t_last);
            return u_last[i] + w * (current[i] - u_last[i]);
        }
        let k = self.snaps.partition_point(|s| s.0 <= td);
        if k == 0 {
            self.clamp_warnings += 1;
            return self.snaps[0].1[i];
        }
        let (ta, ua) = &self.snaps[k - 1];
        let (tb, ub) = &self.snaps[k];
        let w = (td - ta) / (tb - ta);
        ua[i] + w * (ub[i] - ua[i])
    }
}

/// Factorized `I - r D2` with the boundary rows of `boundary`.
#[derive(Debug, Clone)]
struct Tridiagonal {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    denom: Vec<f64>,
    boundary: Boundary,
}

impl Tridiagonal {
    fn new(n: usize, r: f64, boundary: Boundary) -> Self {
        let mut lower = vec![-r; n];
        let mut diag = vec![1.0 + 2.0 * r; n];
        let mut upper = vec![-r; n];
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        match boundary {
            Boundary::Neumann => {
                // mirrored ghost points
                upper[0] = -2.0 * r;
                lower[n - 1] = -2.0 * r;
            }
            Boundary::Dirichlet { .. } => {
                diag[0] = 1.0;
                upper[0] = 0.0;
                diag[n - 1] = 1.0;
                lower[n - 1] = 0.0;
            }
        }
        // Thomas forward sweep coefficients
        let mut upper_mod = vec![0.0; n];
        let mut denom = vec![0.0; n];
        denom[0] = diag[0];
        upper_mod[0] = upper[0] / denom[0];
        for i in 1..n {
            denom[i] = diag[i] - lower[i] * upper_mod[i - 1];
            upper_mod[i] = upper[i] / denom[i];
        }
        Self { lower, upper_mod, denom, boundary }
    }

    fn solve(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        if let Boundary::Dirichlet { left, right } = self.boundary {
            rhs[0] = left;
            rhs[n - 1] = right;
        }
        rhs[0] /= self.denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / self.denom[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_mod[i] * rhs[i + 1];
        }
    }
}

/// Mutable state of a run.
#[derive(Debug, Clone)]
pub struct SimState {
    pub field: Field,
    pub history: HistoryBuffer,
    steps: usize,
    solver: Tridiagonal,
    delayed: Vec<f64>,
}

impl SimState {
    pub fn new(config: &SimConfig, dynamics: &Dynamics) -> Result<Self> {
        config.validate(dynamics)?;
        let xs = config.xs();
        let u: Vec<f64> = xs.iter().map(|&x| config.initial.eval(x)).collect();
        let field = Field { x_min: config.x_min, x_max: config.x_max, nx: config.nx, u, t: 0.0 };
        let history = HistoryBuffer::new(&field, config.initial.clone(), config.history, dynamics.max_delay());
        let r = config.dt / (config.h() * config.h());
        Ok(Self {
            field,
            history,
            steps: 0,
            solver: Tridiagonal::new(config.nx, r, config.boundary),
            delayed: vec![0.0; config.nx],
        })
    }
}

/// One IMEX step of size `config.dt`.
pub fn step(state: &mut SimState, dynamics: &Dynamics, config: &SimConfig) {
    let dt = config.dt;
    let t = state.field.t;
    let depth = dynamics.max_delay();
    let u = &state.field.u;
    for i in 0..u.len() {
        let td = (t - dynamics.delay(u[i])).max(t - depth - dt);
        state.delayed[i] = state.history.lookup(i, td, t, u);
    }
    let mut rhs: Vec<f64> = u
        .iter()
        .zip(&state.delayed)
        .map(|(&ui, &di)| ui + dt * dynamics.reaction(ui, di))
        .collect();
    state.solver.solve(&mut rhs);
    state.field.u = rhs;
    state.steps += 1;
    state.field.t = state.steps as f64 * dt;
    if state.steps % config.history_stride == 0 {
        let stride_dt = dt * config.history_stride as f64;
        state.history.push(state.field.t, &state.field.u, dt, stride_dt);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontTrack {
    pub level: f64,
    pub samples: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedFit {
    pub speed: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub snapshots: Vec<Snapshot>,
    pub track: FrontTrack,
    /// band used by the per-step invariant check
    pub level: f64,
    pub min_value: f64,
    pub max_value: f64,
    /// steps at which some value left `[-1e-8, level + 1e-8]`
    pub band_violations: usize,
    pub clamp_warnings: usize,
    /// the front came within 10% of a boundary in the late half of the run
    pub near_boundary: bool,
}

impl RunRecord {
    pub fn xs(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn field_at(&self, k: usize) -> Field {
        let s = &self.snapshots[k];
        Field { x_min: self.x_min, x_max: self.x_max, nx: self.nx, u: s.u.clone(), t: s.t }
    }
}

pub const BAND_SLACK: f64 = 1e-8;

/// Steps to `t_end`, recording snapshots and the front track.
pub fn run(config: &SimConfig, dynamics: &Dynamics) -> Result<RunRecord> {
    let mut state = SimState::new(config, dynamics)?;
    let initial_max = state.field.u.iter().cloned().fold(0.0f64, f64::max);
    let level = dynamics.level(initial_max);
    let front_level = dynamics.front_level();
    let n_steps = (config.t_end / config.dt).round() as usize;

    let mut wanted: Vec<f64> = config.snapshot_times.iter().cloned().filter(|&t| t <= config.t_end + 1e-9).collect();
    wanted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    wanted.dedup();
    let mut next_snap = 0;
    let mut snapshots = Vec::new();
    let mut track = FrontTrack { level: front_level, samples: Vec::new() };
    let mut next_track = 0.0;
    let (mut min_value, mut max_value) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut band_violations = 0;
    let mut near_boundary = false;
    let margin = 0.1 * (config.x_max - config.x_min);

    let record = |state: &SimState, snapshots: &mut Vec<Snapshot>, next_snap: &mut usize, next_track: &mut f64, track: &mut FrontTrack| {
        let t = state.field.t;
        while *next_snap < wanted.len() && wanted[*next_snap] <= t + 0.5 * config.dt {
            snapshots.push(Snapshot { t, u: state.field.u.clone() });
            *next_snap += 1;
        }
        if t + 0.5 * config.dt >= *next_track {
            if let Some(x) = front_position(&state.field, front_level) {
                track.samples.push((t, x));
            }
            *next_track += config.track_interval;
        }
    };
    record(&state, &mut snapshots, &mut next_snap, &mut next_track, &mut track);

    for n in 1..=n_steps {
        step(&mut state, dynamics, config);
        let (lo, hi) = state.field.u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !(hi.is_finite() && lo.is_finite()) || hi.abs().max(lo.abs()) > 10.0 * level {
            return Err(Error::SchemeFailure(format!(
                "instability at t = {}: values in [{lo}, {hi}] exceed 10 x level {level}",
                state.field.t
            )));
        }
        min_value = min_value.min(lo);
        max_value = max_value.max(hi);
        if lo < -BAND_SLACK || hi > level + BAND_SLACK {
            band_violations += 1;
        }
        record(&state, &mut snapshots, &mut next_snap, &mut next_track, &mut track);
        if 2 * n >= n_steps {
            if let Some(x) = front_position(&state.field, front_level) {
                if x - config.x_min < margin || config.x_max - x < margin {
                    near_boundary = true;
                }
            }
        }
    }
    if near_boundary {
        warn!("front came within 10% of the domain boundary during the fit window");
    }
    if state.history.clamp_warnings > 0 {
        warn!("{} delayed lookups were clamped into the stored window", state.history.clamp_warnings);
    }
    Ok(RunRecord {
        x_min: config.x_min,
        x_max: config.x_max,
        nx: config.nx,
        dt: config.dt,
        t_end: config.t_end,
        steps: n_steps,
        snapshots,
        track,
        level,
        min_value,
        max_value,
        band_violations,
        clamp_warnings: state.history.clamp_warnings,
        near_boundary,
    })
}

/// Rightmost crossing of `level`, linearly interpolated.
pub fn front_position(field: &Field, level: f64) -> Option<f64> {
    let u = &field.u;
    let h = field.h();
    for i in (0..u.len().saturating_sub(1)).rev() {
        let (a, b) = (u[i] - level, u[i + 1] - level);
        if b == 0.0 {
            return Some(field.x(i + 1));
        }
        if a == 0.0 || a.signum() != b.signum() {
            return Some(field.x(i) + h * a / (a - b));
        }
    }
    None
}

/// Least-squares slope of the last `window_fraction` of the samples.
pub fn front_speed(track: &FrontTrack, window_fraction: f64) -> Result<SpeedFit> {
    let n = track.samples.len();
    let take = ((n as f64) * window_fraction).round() as usize;
    if take < 10 || !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::Precondition(format!("speed fit needs >= 10 samples in the window, have {take}")));
    }
    let pts = &track.samples[n - take..];
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let xm = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let stt = pts.iter().map(|p| (p.0 - tm).powi(2)).sum::<f64>();
    let stx = pts.iter().map(|p| (p.0 - tm) * (p.1 - xm)).sum::<f64>();
    let slope = stx / stt;
    let sse = pts.iter().map(|p| (p.1 - xm - slope * (p.0 - tm)).powi(2)).sum::<f64>();
    let stderr = (sse / (k - 2.0) / stt).sqrt();
    Ok(SpeedFit { speed: slope, stderr, samples: pts.len() })
}

/// `(min, max)` of `u` over `|x| < c_probe t` across the last quarter of
/// the snapshots.
pub fn spreading_probe(record: &RunRecord, c_probe: f64) -> Result<(f64, f64)> {
    if !(c_probe > 0.0) {
        return Err(Error::Precondition("probe speed must be positive".into()));
    }
    let xs = record.xs();
    let n = record.snapshots.len();
    let start = n - n / 4;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &record.snapshots[start.min(n.saturating_sub(1))..] {
        for (x, &v) in xs.iter().zip(&s.u) {
            if x.abs() < c_probe * s.t {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if lo > hi {
        return Err(Error::Precondition("the probe cone is empty at every late snapshot".into()));
    }
    Ok((lo, hi))
}

pub const BAND_TOLERANCE: f64 = 1e-6;

/// Runs the comparison system from `config.initial`, which must lie in
/// `[0, plateau]`; the band is enforced as a hard check.
pub fn simulate_comparison(params: ComparisonParams, config: &SimConfig) -> Result<RunRecord> {
    let plateau = params.plateau();
    for x in config.xs() {
        let v = config.initial.eval(x);
        if !(0.0..=plateau).contains(&v) {
            return Err(Error::Precondition(format!("initial datum {v} at x = {x} outside [0, {plateau}]")));
        }
    }
    let record = run(config, &Dynamics::Comparison(params))?;
    if record.min_value < -BAND_TOLERANCE || record.max_value > plateau + BAND_TOLERANCE {
        return Err(Error::SchemeFailure(format!(
            "comparison run left [0, {plateau}]: values in [{}, {}]",
            record.min_value, record.max_value
        )));
    }
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonexistenceReport {
    pub c_test: f64,
    pub c_star: f64,
    pub measured: SpeedFit,
    /// `measured.speed - c_test`
    pub excess: f64,
    pub window: (f64, f64),
}

/// Measures the spreading speed of a step datum to show that fronts do not
/// travel at `c_test < c*`.
pub fn nonexistence_probe(model: &ModelSpec, c_test: f64, config: &SimConfig) -> Result<NonexistenceReport> {
    let c_star = critical_speed(&CharacteristicContext::from_model(model), SPEED_TOL)?.c_star;
    if !(c_test < c_star) {
        return Err(Error::Precondition(format!("c_test = {c_test} must be below c* = {c_star}")));
    }
    let record = run(config, &Dynamics::Model(model.clone()))?;
    let measured = front_speed(&record.track, 0.5)?;
    let late = &record.track.samples[record.track.samples.len() / 2..];
    Ok(NonexistenceReport {
        c_test,
        c_star,
        measured,
        excess: measured.speed - c_test,
        window: (late[0].0, late[late.len() - 1].0),
    })
}
