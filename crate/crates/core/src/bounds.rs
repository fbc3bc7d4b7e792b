//! Closed-form upper and lower solutions of the profile equation, pointwise
//! checks of their differential inequalities, and the monotone envelopes of
//! a nonmonotone birth function.

use crate::dispersion::{lambda_char, lambda_roots, CharacteristicContext};
use crate::error::{Error, Result};
use crate::model::{quadratic_gap_l, BirthFunction, EnvelopeSide, ModelSpec, CHECK_GRID};
use crate::numeric::{bisect, linspace};

/// A piecewise smooth profile with known derivatives away from its kinks.
pub trait ClosedFormProfile {
    fn value(&self, xi: f64) -> f64;
    fn first(&self, xi: f64) -> f64;
    fn second(&self, xi: f64) -> f64;
    fn kinks(&self) -> Vec<f64>;
}

/// `min{exp(lambda1 xi), level}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpperSolution {
    pub c: f64,
    pub lambda1: f64,
    pub level: f64,
}

impl UpperSolution {
    pub fn kink(&self) -> f64 {
        self.level.ln() / self.lambda1
    }

    /// Same profile translated right by `shift`.
    pub fn value_shifted(&self, xi: f64, shift: f64) -> f64 {
        self.value(xi - shift)
    }
}

impl ClosedFormProfile for UpperSolution {
    fn value(&self, xi: f64) -> f64 {
        (self.lambda1 * xi).exp().min(self.level)
    }
    fn first(&self, xi: f64) -> f64 {
        if xi < self.kink() {
            self.lambda1 * (self.lambda1 * xi).exp()
        } else {
            0.0
        }
    }
    fn second(&self, xi: f64) -> f64 {
        if xi < self.kink() {
            self.lambda1 * self.lambda1 * (self.lambda1 * xi).exp()
        } else {
            0.0
        }
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.kink()]
    }
}

/// `max{exp(lambda1 xi) - q exp(eta lambda1 xi), 0}`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerSolution {
    pub c: f64,
    pub lambda1: f64,
    pub eta: f64,
    pub q: f64,
}

impl LowerSolution {
    /// Right end of the positivity window.
    pub fn kink(&self) -> f64 {
        -self.q.ln() / ((self.eta - 1.0) * self.lambda1)
    }

    fn raw(&self, xi: f64) -> (f64, f64) {
        ((self.lambda1 * xi).exp(), self.q * (self.eta * self.lambda1 * xi).exp())
    }
}

impl ClosedFormProfile for LowerSolution {
    fn value(&self, xi: f64) -> f64 {
        if xi >= self.kink() {
            return 0.0;
        }
        let (a, b) = self.raw(xi);
        (a - b).max(0.0)
    }
    fn first(&self, xi: f64) -> f64 {
        if xi >= self.kink() {
            return 0.0;
        }
        let (a, b) = self.raw(xi);
        self.lambda1 * (a - self.eta * b)
    }
    fn second(&self, xi: f64) -> f64 {
        if xi >= self.kink() {
            return 0.0;
        }
        let (a, b) = self.raw(xi);
        self.lambda1 * self.lambda1 * (a - self.eta * self.eta * b)
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.kink()]
    }
}

pub fn upper_solution(c: f64, model: &ModelSpec, level: f64) -> Result<UpperSolution> {
    let ctx = CharacteristicContext::from_model(model);
    let roots = lambda_roots(c, &ctx)?;
    Ok(UpperSolution { c, lambda1: roots.lambda1, level })
}

/// Smallest admissible width of the `eta` interval `(1, min{2, lambda2/lambda1})`.
pub const MIN_ETA_WINDOW: f64 = 1e-6;

pub fn lower_solution(c: f64, model: &ModelSpec) -> Result<LowerSolution> {
    let ctx = CharacteristicContext::from_model(model);
    let roots = lambda_roots(c, &ctx)?;
    let (l1, l2) = (roots.lambda1, roots.lambda2);
    let eta_max = (l2 / l1).min(2.0);
    if eta_max < 1.0 + MIN_ETA_WINDOW {
        return Err(Error::Precondition(format!(
            "eta window (1, {eta_max}) too narrow at c = {c}; speed too close to c*"
        )));
    }
    let eta = 0.5 * (1.0 + eta_max);
    let slope = lambda_char(eta * l1, c, &ctx);
    if !(slope < 0.0) {
        return Err(Error::Internal(format!("Lambda(eta lambda1, c) = {slope} is not negative")));
    }
    let gap = quadratic_gap_l(model, model.k_eq())?;
    // lambda1(c) stands in for the uniform bound L2
    let q = (3.0 * l1 * model.bprime0() + gap) / (-slope) + 1.0 + model.k_eq();
    Ok(LowerSolution { c, lambda1: l1, eta, q })
}

/// Residual `phi'' - c phi' - d phi + b(phi(xi - c tau(phi(xi))))` of a
/// closed-form profile at `xi`.
pub fn closed_form_residual<P: ClosedFormProfile>(phi: &P, c: f64, model: &ModelSpec, xi: f64) -> f64 {
    let v = phi.value(xi);
    let delayed = phi.value(xi - c * model.delay.eval(v));
    phi.second(xi) - c * phi.first(xi) - model.d * v + model.birth.value(delayed)
}

fn away_from_kinks<'a, P: ClosedFormProfile>(phi: &P, grid: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
    let h = if grid.len() > 1 { (grid[1] - grid[0]).abs() } else { 0.0 };
    let kinks = phi.kinks();
    grid.iter().copied().filter(move |&xi| kinks.iter().all(|&k| (xi - k).abs() > 2.0 * h))
}

/// Largest residual over the grid (an upper solution needs `<= 0`).
pub fn verify_upper<P: ClosedFormProfile>(phi: &P, c: f64, model: &ModelSpec, grid: &[f64]) -> f64 {
    away_from_kinks(phi, grid)
        .map(|xi| closed_form_residual(phi, c, model, xi))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest residual over the grid (a lower solution needs `>= 0`).
pub fn verify_lower<P: ClosedFormProfile>(phi: &P, c: f64, model: &ModelSpec, grid: &[f64]) -> f64 {
    away_from_kinks(phi, grid)
        .map(|xi| closed_form_residual(phi, c, model, xi))
        .fold(f64::INFINITY, f64::min)
}

/// `n` points spanning the leading edge and the kink of a closed-form
/// profile: `[kink - 40/lambda1, kink + 10]`.
pub fn verification_grid(kink: f64, lambda1: f64, n: usize) -> Vec<f64> {
    linspace(kink - 40.0 / lambda1, kink + 10.0, n)
}

/// Monotone envelopes of `b` and their equilibria `k <= K <= kcal`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopePair {
    pub upper_env: BirthFunction,
    pub lower_env: BirthFunction,
    /// `lower_env(k) = d k`
    pub k: f64,
    /// `upper_env(kcal) = d kcal`
    pub kcal: f64,
}

fn first_crossing<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64) -> Option<f64> {
    let grid = linspace(lo, hi, CHECK_GRID + 1);
    let mut prev = grid[0];
    for &u in &grid[1..] {
        let gu = g(u);
        if gu <= 0.0 {
            return bisect(&g, prev, u, 0.0, 200);
        }
        prev = u;
    }
    // an equilibrium sitting exactly on the right end may round either way
    (g(hi).abs() <= 1e-12 * (1.0 + hi)).then_some(hi)
}

pub fn envelope_pair(model: &ModelSpec) -> Result<EnvelopePair> {
    let d = model.d;
    let k_eq = model.k_eq();
    let span = 4.0 * k_eq.max(model.kcal() / d) + 1.0;
    let wide_upper = BirthFunction::envelope(&model.birth, EnvelopeSide::Upper, span);
    let kcal = if wide_upper.value(k_eq) - d * k_eq <= 1e-12 * (1.0 + k_eq) {
        k_eq
    } else {
        first_crossing(|u| wide_upper.value(u) - d * u, k_eq, span)
            .ok_or_else(|| Error::ModelInvalid("upper envelope has no equilibrium".into()))?
    };
    let upper_env = BirthFunction::envelope(&model.birth, EnvelopeSide::Upper, kcal);
    let lower_env = BirthFunction::envelope(&model.birth, EnvelopeSide::Lower, kcal);
    let k = first_crossing(|u| lower_env.value(u) - d * u, kcal * 1e-6, kcal)
        .ok_or_else(|| Error::ModelInvalid("lower envelope has no equilibrium in (0, kcal]".into()))?;
    Ok(EnvelopePair { upper_env, lower_env, k, kcal })
}
