//! Traveling wave profiles as fixed points of the integral operator
//! `F = (phi'' - c phi' - beta phi)^{-1}(-H)` on a uniform grid.
//!
//! The grid frame is anchored: every iterate is translated so that its
//! leading edge crosses `phase_level` at `xi = 0`. The sandwich bounds move
//! with the accumulated translation `shift`, i.e. bounds are evaluated at
//! `xi - shift`.

use log::{debug, warn};

use crate::bounds::{
    envelope_pair, lower_solution, upper_solution, ClosedFormProfile, LowerSolution, UpperSolution,
};
use crate::dispersion::{
    choose_beta, critical_speed, lambda_roots, CharacteristicContext, KernelRates, SPEED_TOL,
};
use crate::error::{Error, Result};
use crate::model::{validate_hypotheses, Monotonicity, ModelSpec};
use crate::numeric::lerp_uniform;

/// Samples on `xi_min + i h` with constant extensions outside.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileGrid {
    pub xi_min: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub left_limit: f64,
    pub right_limit: f64,
}

impl ProfileGrid {
    pub fn from_fn<F: Fn(f64) -> f64>(xi_min: f64, xi_max: f64, h: f64, left: f64, right: f64, f: F) -> Self {
        let n = ((xi_max - xi_min) / h).round() as usize + 1;
        let values = (0..n).map(|i| f(xi_min + i as f64 * h)).collect();
        Self { xi_min, h, values, left_limit: left, right_limit: right }
    }

    /// Grid from `(xi, phi)` samples; spacing must be uniform to 1e-9
    /// relative. Extensions are the end values.
    pub fn from_samples(xs: &[f64], values: Vec<f64>) -> Result<Self> {
        if xs.len() < 5 || xs.len() != values.len() {
            return Err(Error::Precondition("profile needs >= 5 matching (xi, phi) samples".into()));
        }
        let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        if !(h > 0.0) || xs.iter().enumerate().any(|(i, &x)| (x - xs[0] - i as f64 * h).abs() > 1e-9 * (1.0 + x.abs())) {
            return Err(Error::Precondition("profile samples must be uniformly spaced and increasing".into()));
        }
        let (left, right) = (values[0], values[values.len() - 1]);
        Ok(Self { xi_min: xs[0], h, values, left_limit: left, right_limit: right })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.xi_min + i as f64 * self.h
    }

    pub fn xi_max(&self) -> f64 {
        self.xi(self.len() - 1)
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.xi(i)).collect()
    }

    /// Linear interpolation with the constant extensions.
    #[inline]
    pub fn eval(&self, xi: f64) -> f64 {
        lerp_uniform(&self.values, self.xi_min, self.h, self.left_limit, self.right_limit, xi)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self { values, ..self.clone() }
    }

    /// `psi(xi) = phi(xi + a)` on the same grid.
    pub fn translated(&self, a: f64) -> Self {
        let values = (0..self.len()).map(|i| self.eval(self.xi(i) + a)).collect();
        self.with_values(values)
    }

    /// First `xi` where the samples reach `level`, by linear interpolation.
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        let v = &self.values;
        if v[0] >= level {
            return (v[0] == level).then_some(self.xi_min);
        }
        let i = v.iter().position(|&x| x >= level)?;
        let t = (level - v[i - 1]) / (v[i] - v[i - 1]);
        Some(self.xi(i - 1) + t * self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMode {
    Monotone,
    Nonmonotone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub c: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// `phi <- (1 - damping) phi + damping F(phi)`
    pub damping: f64,
    /// value pinned at `xi = 0` on the leading edge
    pub phase_level: f64,
    pub mode: SolverMode,
    pub h: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    /// initial iterate translated right by this many cells
    pub shift_cells: i64,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const NONMONOTONE_DAMPING: f64 = 0.5;
/// Relative speed offset of the near-critical surrogate.
pub const CRITICAL_OFFSET: f64 = 1e-6;

/// Decay rate of `phi - level` at `+infinity` from the delay-free
/// linearization `mu^2 + c mu = d - b'(level)`.
fn right_rate(model: &ModelSpec, c: f64, level: f64) -> Option<f64> {
    let s = model.d - model.birth.derivative(level);
    (s > 0.0).then(|| 0.5 * (-c + (c * c + 4.0 * s).sqrt()))
}

impl SolverConfig {
    /// Defaults for speed `c`: grid, `beta`, tolerance and phase level.
    pub fn for_model(model: &ModelSpec, c: f64, mode: SolverMode) -> Result<Self> {
        let ctx = CharacteristicContext::from_model(model);
        let roots = lambda_roots(c, &ctx)?;
        let (level, phase_level, damping) = match mode {
            SolverMode::Monotone => (model.k_eq(), 0.5 * model.k_eq(), 1.0),
            SolverMode::Nonmonotone => {
                let env = envelope_pair(model)?;
                (env.kcal, 0.25 * env.k, NONMONOTONE_DAMPING)
            }
        };
        let rates = choose_beta(c, model, level)?;
        let (l1, l2) = (roots.lambda1, roots.lambda2);
        let left = (40.0 / l1).max(40.0 / (l2 - l1)).max(20.0);
        let right = right_rate(model, c, model.k_eq()).map_or(20.0, |mu| (40.0 / mu).max(20.0));
        let h = 0.01 * (1.0 / l2).min(1.0);
        Ok(Self {
            c,
            beta: rates.beta,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            damping,
            phase_level,
            mode,
            h,
            // whole cells on both sides so xi = 0 is a node
            xi_min: -(left / h).ceil() * h,
            xi_max: (right / h).ceil() * h,
            shift_cells: 0,
        })
    }

    /// Same settings on a grid of spacing `h`, realigned to whole cells.
    pub fn with_h(mut self, h: f64) -> Self {
        self.xi_min = (self.xi_min / h).floor() * h;
        self.xi_max = (self.xi_max / h).ceil() * h;
        self.h = h;
        self
    }

    pub fn rates(&self) -> KernelRates {
        KernelRates::new(self.c, self.beta)
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.damping > 0.0 && self.damping <= 1.0) || !(self.h > 0.0) {
            return Err(Error::Precondition(format!(
                "need tol > 0, 0 < damping <= 1, h > 0 (tol={}, damping={}, h={})",
                self.tol, self.damping, self.h
            )));
        }
        if !(self.xi_min < 0.0 && self.xi_max > 0.0) {
            return Err(Error::Precondition("grid must contain xi = 0".into()));
        }
        if ((self.xi_min / self.h).round() * self.h - self.xi_min).abs() > 1e-9 * self.h {
            return Err(Error::Precondition("xi_min must be a whole number of cells".into()));
        }
        Ok(())
    }

    fn grid_from<F: Fn(f64) -> f64>(&self, left: f64, right: f64, f: F) -> ProfileGrid {
        ProfileGrid::from_fn(self.xi_min, self.xi_max, self.h, left, right, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveSolution {
    pub profile: ProfileGrid,
    pub c: f64,
    pub beta: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub residual_sup: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub sandwich_ok: bool,
    pub lipschitz_ok: bool,
    pub monotone_ok: bool,
    /// largest amount any iterate was moved by clamping
    pub max_clamp: f64,
    /// sandwich bounds are evaluated at `xi - shift`
    pub shift: f64,
    /// solved at `c*(1 + CRITICAL_OFFSET)` in place of `c*`
    pub near_critical: bool,
}

/// `beta phi - d phi + b(phi(xi - c tau(phi(xi))))` at every grid point.
pub fn apply_h(phi: &ProfileGrid, model: &ModelSpec, c: f64, beta: f64) -> Vec<f64> {
    let d = model.d;
    phi.values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let delayed = phi.eval(phi.xi(i) - c * model.delay.eval(v));
            (beta - d) * v + model.birth.value(delayed)
        })
        .collect()
}

/// `(exp(g h) - 1) / g` and `int_0^h t exp(g t) dt`.
fn cell_weights(g: f64, h: f64) -> (f64, f64) {
    let e = (g * h).exp_m1();
    let w0 = e / g;
    let w1 = (h * (e + 1.0) - w0) / g;
    (w0, w1)
}

/// Both one-sided exponential convolutions of the piecewise-linear
/// interpolant of `hv`, with constant tails `left`, `right`.
pub fn convolve(hv: &[f64], h: f64, rates: &KernelRates, left: f64, right: f64) -> Vec<f64> {
    let n = hv.len();
    let (g1, g2) = (rates.gamma1, rates.gamma2);
    let mut out = vec![0.0; n];

    let decay1 = (g1 * h).exp();
    let (a0, a1) = cell_weights(g1, h);
    let mut acc = left / (-g1);
    out[0] = acc;
    for i in 1..n {
        acc = decay1 * acc + hv[i] * a0 + (hv[i - 1] - hv[i]) * a1 / h;
        out[i] = acc;
    }

    let decay2 = (-g2 * h).exp();
    let (b0, b1) = cell_weights(-g2, h);
    let mut acc = right / g2;
    out[n - 1] += acc;
    for i in (0..n - 1).rev() {
        acc = decay2 * acc + hv[i] * b0 + (hv[i + 1] - hv[i]) * b1 / h;
        out[i] += acc;
    }

    let scale = 1.0 / (g2 - g1);
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Limits of `H` for the constant extensions of `phi`.
fn h_limits(phi: &ProfileGrid, model: &ModelSpec, beta: f64) -> (f64, f64) {
    let f = |u: f64| (beta - model.d) * u + model.birth.value(u);
    (f(phi.left_limit), f(phi.right_limit))
}

pub fn apply_f(phi: &ProfileGrid, model: &ModelSpec, c: f64, beta: f64) -> Vec<f64> {
    let hv = apply_h(phi, model, c, beta);
    let (hl, hr) = h_limits(phi, model, beta);
    convolve(&hv, phi.h, &KernelRates::new(c, beta), hl, hr)
}

/// Central-difference residual of the profile equation at interior points
/// (two-cell margin). Returns the sup and the per-point values.
pub fn residual(phi: &ProfileGrid, c: f64, model: &ModelSpec) -> (f64, Vec<f64>) {
    let v = &phi.values;
    let h = phi.h;
    let n = v.len();
    if n < 5 {
        return (0.0, Vec::new());
    }
    let r: Vec<f64> = (2..n - 2)
        .map(|i| {
            let d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
            let d1 = (v[i + 1] - v[i - 1]) / (2.0 * h);
            let delayed = phi.eval(phi.xi(i) - c * model.delay.eval(v[i]));
            d2 - c * d1 - model.d * v[i] + model.birth.value(delayed)
        })
        .collect();
    let sup = r.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    (sup, r)
}

/// Lower bound of a sandwich.
#[derive(Debug, Clone, PartialEq)]
pub enum LowerBound {
    Closed(LowerSolution),
    Grid(ProfileGrid),
}

impl LowerBound {
    pub fn value(&self, xi: f64) -> f64 {
        match self {
            LowerBound::Closed(l) => l.value(xi),
            LowerBound::Grid(g) => g.eval(xi),
        }
    }
}

/// `[lower, upper]` evaluated at `xi - shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sandwich {
    pub upper: UpperSolution,
    pub lower: LowerBound,
}

impl Sandwich {
    pub fn bounds(&self, xi: f64, shift: f64) -> (f64, f64) {
        (self.lower.value(xi - shift), self.upper.value(xi - shift))
    }

    /// Largest shift with `phi <= upper(. - shift)` wherever `phi > 0`.
    pub fn tightest_shift(&self, phi: &ProfileGrid) -> f64 {
        let l1 = self.upper.lambda1;
        (0..phi.len())
            .filter(|&i| phi.values[i] > 0.0)
            .map(|i| phi.xi(i) - phi.values[i].ln() / l1)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembershipReport {
    pub sandwich: bool,
    pub monotone: bool,
    pub lipschitz: bool,
    /// `max(phi - upper, lower - phi)`; nonpositive when (i) holds
    pub sandwich_margin: f64,
    /// most negative forward difference
    pub monotone_margin: f64,
    /// `max c |dphi/dxi| - bound`; negative when (iii) holds
    pub lipschitz_margin: f64,
    pub lipschitz_bound: f64,
    pub shift: f64,
}

impl MembershipReport {
    pub fn member(&self) -> bool {
        self.sandwich && self.monotone && self.lipschitz
    }
}

/// Absolute slack for the sandwich and monotonicity checks relative to the
/// profile level.
pub const MEMBERSHIP_SLACK: f64 = 1e-6;

/// `beta K / (1 + b'(0) K T)`
pub fn lipschitz_bound(model: &ModelSpec, beta: f64, level: f64) -> f64 {
    beta * level / (1.0 + model.bprime0() * level * model.delay.sup_derivative(level))
}

/// Checks the sandwich (against `sandwich` at `shift`, or at the tightest
/// admissible shift when `None`), monotonicity and the Lipschitz bound on
/// adjacent grid points.
pub fn gamma_membership_in(
    phi: &ProfileGrid,
    c: f64,
    beta: f64,
    model: &ModelSpec,
    sandwich: &Sandwich,
    shift: Option<f64>,
) -> MembershipReport {
    let level = sandwich.upper.level;
    let slack = MEMBERSHIP_SLACK * level;
    let shift = shift.unwrap_or_else(|| sandwich.tightest_shift(phi));
    let mut sandwich_margin = f64::NEG_INFINITY;
    for (i, &v) in phi.values.iter().enumerate() {
        let (lo, hi) = sandwich.bounds(phi.xi(i), shift);
        sandwich_margin = sandwich_margin.max(v - hi).max(lo - v);
    }
    let mut monotone_margin = f64::INFINITY;
    let mut steepest = 0.0f64;
    for w in phi.values.windows(2) {
        monotone_margin = monotone_margin.min(w[1] - w[0]);
        steepest = steepest.max((w[1] - w[0]).abs() / phi.h);
    }
    let bound = lipschitz_bound(model, beta, level);
    let lipschitz_margin = c * steepest - bound;
    MembershipReport {
        sandwich: sandwich_margin <= slack,
        monotone: monotone_margin >= -slack,
        lipschitz: lipschitz_margin < 0.0,
        sandwich_margin,
        monotone_margin,
        lipschitz_margin,
        lipschitz_bound: bound,
        shift,
    }
}

/// Membership in the monotone-case set built from the closed-form
/// upper/lower solutions at level `K`.
pub fn gamma_membership(phi: &ProfileGrid, c: f64, beta: f64, model: &ModelSpec) -> Result<MembershipReport> {
    let sandwich = monotone_sandwich(model, c)?;
    Ok(gamma_membership_in(phi, c, beta, model, &sandwich, None))
}

pub fn monotone_sandwich(model: &ModelSpec, c: f64) -> Result<Sandwich> {
    Ok(Sandwich {
        upper: upper_solution(c, model, model.k_eq())?,
        lower: LowerBound::Closed(lower_solution(c, model)?),
    })
}

fn check_speed(model: &ModelSpec, c: f64) -> Result<f64> {
    let c_star = critical_speed(&CharacteristicContext::from_model(model), SPEED_TOL)?.c_star;
    if !(c > c_star) {
        return Err(Error::Precondition(format!(
            "no traveling wave exists for c = {c} <= c* = {c_star}; use the nonexistence probe instead"
        )));
    }
    Ok(c_star)
}

fn require_hypotheses(model: &ModelSpec, mode: Monotonicity) -> Result<()> {
    let report = validate_hypotheses(model, mode);
    if let Some(f) = report.failures().next() {
        let w = f.witness.clone().unwrap_or(crate::model::Witness { u: f64::NAN, violated: String::new() });
        return Err(Error::HypothesisViolation { id: f.id.to_string(), u: w.u, detail: w.violated });
    }
    Ok(())
}

struct IterationOutcome {
    profile: ProfileGrid,
    iterations: usize,
    trace: Vec<f64>,
    max_clamp: f64,
    shift: f64,
    monotone_ok: bool,
}

/// Translates `phi` so its leading edge crosses `level` at `xi = 0`;
/// returns the translation applied to the frame.
fn anchor(phi: &mut ProfileGrid, level: f64) -> Result<f64> {
    let x0 = phi
        .first_crossing(level)
        .ok_or_else(|| Error::Internal(format!("iterate never reaches the phase level {level}")))?;
    if x0 != 0.0 {
        *phi = phi.translated(x0);
    }
    Ok(x0)
}

fn iterate(model: &ModelSpec, config: &SolverConfig, sandwich: &Sandwich) -> Result<IterationOutcome> {
    let level = sandwich.upper.level;
    let rates = config.rates();
    let (left, right) = (0.0, model.k_eq());
    let mut shift = config.shift_cells as f64 * config.h;
    let mut phi = config.grid_from(left, right, |xi| sandwich.upper.value(xi - shift));
    shift -= anchor(&mut phi, config.phase_level)?;

    let (hl, hr) = h_limits(&phi, model, config.beta);
    let mut trace = Vec::new();
    let mut max_clamp = 0.0f64;
    let mut monotone_ok = true;
    let omega = config.damping;
    for iter in 1..=config.max_iters {
        let hv = apply_h(&phi, model, config.c, config.beta);
        let fv = convolve(&hv, config.h, &rates, hl, hr);
        let mut next = phi.with_values(Vec::with_capacity(phi.len()));
        let mut clamp = 0.0f64;
        for (i, (&old, &f)) in phi.values.iter().zip(&fv).enumerate() {
            let v = (1.0 - omega) * old + omega * f;
            let (lo, hi) = sandwich.bounds(phi.xi(i), shift);
            let hi = hi.min(level);
            let w = v.clamp(lo.min(hi), hi);
            clamp = clamp.max((w - v).abs());
            next.values.push(w);
        }
        shift -= anchor(&mut next, config.phase_level)?;
        max_clamp = max_clamp.max(clamp);
        if config.mode == SolverMode::Monotone && next.values.windows(2).any(|w| w[1] < w[0] - config.tol) {
            monotone_ok = false;
        }
        let diff = next.values.iter().zip(&phi.values).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        trace.push(diff);
        phi = next;
        if diff <= config.tol {
            if max_clamp > 10.0 * config.tol {
                debug!("clamping moved iterates by up to {max_clamp:e}");
            }
            return Ok(IterationOutcome { profile: phi, iterations: iter, trace, max_clamp, shift, monotone_ok });
        }
        if !diff.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: trace.len(),
        last_diff: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

fn boundary_ok(p: &ProfileGrid, level: f64) -> bool {
    let n = p.len();
    (p.values[0] - p.left_limit).abs() <= 1e-3 * level
        && (p.values[n - 1] - p.right_limit).abs() <= 1e-3 * level
}

fn finish(
    model: &ModelSpec,
    config: &SolverConfig,
    sandwich: &Sandwich,
    out: IterationOutcome,
    near_critical: bool,
) -> Result<WaveSolution> {
    let roots = lambda_roots(config.c, &CharacteristicContext::from_model(model))?;
    let (residual_sup, _) = residual(&out.profile, config.c, model);
    let member = gamma_membership_in(&out.profile, config.c, config.beta, model, sandwich, Some(out.shift));
    Ok(WaveSolution {
        c: config.c,
        beta: config.beta,
        lambda1: roots.lambda1,
        lambda2: roots.lambda2,
        residual_sup,
        iterations: out.iterations,
        trace: out.trace,
        sandwich_ok: member.sandwich,
        lipschitz_ok: member.lipschitz,
        monotone_ok: out.monotone_ok && member.monotone,
        max_clamp: out.max_clamp,
        shift: out.shift,
        near_critical,
        profile: out.profile,
    })
}

/// Runs the iteration, doubling the domain (at most twice) while the
/// boundary values miss the limits.
fn solve_with(
    model: &ModelSpec,
    config: &SolverConfig,
    sandwich: &Sandwich,
    near_critical: bool,
) -> Result<WaveSolution> {
    config.validate()?;
    let mut cfg = config.clone();
    let level = sandwich.upper.level;
    for attempt in 0..3 {
        let out = iterate(model, &cfg, sandwich)?;
        if boundary_ok(&out.profile, level) || attempt == 2 {
            return finish(model, &cfg, sandwich, out, near_critical);
        }
        warn!("profile misses its limits on [{}, {}]; doubling the domain", cfg.xi_min, cfg.xi_max);
        cfg.xi_min *= 2.0;
        cfg.xi_max *= 2.0;
    }
    unreachable!()
}

/// Monotone wavefront at speed `config.c > c*` connecting 0 and `K`.
pub fn solve_monotone(model: &ModelSpec, config: &SolverConfig) -> Result<WaveSolution> {
    check_speed(model, config.c)?;
    require_hypotheses(model, Monotonicity::Monotone)?;
    let sandwich = monotone_sandwich(model, config.c)?;
    solve_with(model, config, &sandwich, false)
}

/// Cells scanned for the leading-edge fit: values in this band relative to
/// the profile level.
const EDGE_BAND: (f64, f64) = (1e-10, 1e-4);

/// Cells `s` such that `phi(xi + s h) ~ exp(lambda1 xi)` on the leading edge.
pub fn leading_edge_shift(phi: &ProfileGrid, lambda1: f64, level: f64) -> Option<i64> {
    let mut logs: Vec<f64> = (0..phi.len())
        .filter(|&i| {
            let v = phi.values[i];
            v >= EDGE_BAND.0 * level && v <= EDGE_BAND.1 * level
        })
        .map(|i| phi.values[i].ln() - lambda1 * phi.xi(i))
        .collect();
    if logs.is_empty() {
        return None;
    }
    logs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let log_a = logs[logs.len() / 2];
    // phi(xi - ln A / lambda1) ~ exp(lambda1 xi)
    Some((-log_a / lambda1 / phi.h).round() as i64)
}

/// Leading-edge coefficient of the translated lower wavefront. A
/// coefficient of exactly 1 would squeeze the tail between two bounds with
/// the same asymptotics, which the discrete decay rate cannot satisfy.
pub const LOWER_TAIL_COEFF: f64 = 0.5;

/// Wave with possibly nonmonotone profile, sandwiched between the
/// normalized wavefront of the lower-envelope equation and
/// `min{exp(lambda1 xi), kcal}`.
pub fn solve_nonmonotone(model: &ModelSpec, config: &SolverConfig) -> Result<WaveSolution> {
    check_speed(model, config.c)?;
    require_hypotheses(model, Monotonicity::Nonmonotone)?;
    let env = envelope_pair(model)?;
    let lower_model = model.with_birth(env.lower_env.clone())?;
    let mut lower_cfg = SolverConfig::for_model(&lower_model, config.c, SolverMode::Monotone)?.with_h(config.h);
    lower_cfg.tol = config.tol;
    lower_cfg.max_iters = config.max_iters;
    if config.xi_min < lower_cfg.xi_min {
        lower_cfg.xi_min = config.xi_min;
    }
    lower_cfg.xi_max = lower_cfg.xi_max.max(config.xi_max);
    let lower_wave = solve_monotone(&lower_model, &lower_cfg)?;

    let upper = upper_solution(config.c, model, env.kcal)?;
    let shift_cells = leading_edge_shift(&lower_wave.profile, upper.lambda1, env.k)
        .ok_or_else(|| Error::Internal("lower wavefront has no resolvable leading edge".into()))?;
    // lower(xi) = wave(xi - ln A / lambda1 - tail_gap), kept under the upper solution
    let tail_gap = (1.0 / LOWER_TAIL_COEFF).ln() / upper.lambda1;
    let a = shift_cells as f64 * lower_wave.profile.h - tail_gap;
    let mut lower = lower_wave.profile.translated(a);
    for (i, v) in lower.values.iter_mut().enumerate() {
        *v = v.min(upper.value(lower_wave.profile.xi(i)));
    }
    let sandwich = Sandwich { upper, lower: LowerBound::Grid(lower) };
    let mut sol = solve_with(model, config, &sandwich, false)?;
    // monotonicity is not expected here
    sol.monotone_ok = sol.profile.values.windows(2).all(|w| w[1] >= w[0] - config.tol);
    Ok(sol)
}

/// Near-critical surrogate: solves at `c*(1 + CRITICAL_OFFSET)` with a
/// tenfold tighter tolerance and a doubled left half-width.
pub fn solve_critical(model: &ModelSpec, h: Option<f64>, mode: SolverMode) -> Result<WaveSolution> {
    let speed = critical_speed(&CharacteristicContext::from_model(model), SPEED_TOL)?;
    let c = speed.c_star * (1.0 + CRITICAL_OFFSET);
    let mut cfg = SolverConfig::for_model(model, c, mode)?;
    if let Some(h) = h {
        cfg = cfg.with_h(h);
    }
    critical_config(&mut cfg, speed.lambda_star);
    solve_critical_with(model, &cfg)
}

/// Adjusts defaults for a speed just above `c*`: the `1/(lambda2 - lambda1)`
/// width term diverges there, so the left half-width is twice the
/// `lambda*` based width instead.
pub fn critical_config(cfg: &mut SolverConfig, lambda_star: f64) {
    cfg.xi_min = -(2.0 * (40.0 / lambda_star).max(20.0) / cfg.h).ceil() * cfg.h;
    cfg.tol *= 0.1;
}

pub fn solve_critical_with(model: &ModelSpec, cfg: &SolverConfig) -> Result<WaveSolution> {
    let speed = critical_speed(&CharacteristicContext::from_model(model), SPEED_TOL)?;
    if cfg.c < speed.c_star * (1.0 + CRITICAL_OFFSET) * (1.0 - 1e-15) {
        return Err(Error::Precondition(format!(
            "near-critical speed {} is below c*(1 + {CRITICAL_OFFSET:e}) = {}",
            cfg.c,
            speed.c_star * (1.0 + CRITICAL_OFFSET)
        )));
    }
    let mut sol = match cfg.mode {
        SolverMode::Monotone => solve_monotone(model, cfg)?,
        SolverMode::Nonmonotone => solve_nonmonotone(model, cfg)?,
    };
    sol.near_critical = true;
    Ok(sol)
}
