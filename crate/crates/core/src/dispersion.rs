//! Characteristic function of the linearization at zero, the critical speed
//! `c*`, the decay roots `lambda1(c) < lambda2(c)` and the kernel rates of the
//! integral operator.
//!
//! The characteristic function is
//!
//! ```text
//! Lambda(lambda, c) = lambda^2 - c lambda - d + b'(0) exp(-lambda c m)
//! ```
//!
//! which is convex in `lambda`. `c*` is the smallest speed at which its
//! minimum over `lambda >= 0` reaches zero.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::numeric::{bisect, golden_min, newton_polish};

/// Exponent used for the delayed term of the characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExponentConvention {
    /// `exp(-lambda c m)`: the delay acts on the moving coordinate.
    #[default]
    LambdaCM,
    /// `exp(-lambda m)`, kept for comparison runs only.
    LambdaM,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicContext {
    pub d: f64,
    pub bprime0: f64,
    pub m: f64,
    pub convention: ExponentConvention,
}

impl CharacteristicContext {
    pub fn new(d: f64, bprime0: f64, m: f64) -> Result<Self> {
        if !(d > 0.0 && bprime0 > d && m >= 0.0) {
            return Err(Error::InvalidContext(format!("need 0 < d < b'(0) and m >= 0 (d={d}, b'(0)={bprime0}, m={m})")));
        }
        Ok(Self { d, bprime0, m, convention: ExponentConvention::LambdaCM })
    }

    pub fn from_model(model: &ModelSpec) -> Self {
        Self {
            d: model.d,
            bprime0: model.bprime0(),
            m: model.delay.m(),
            convention: ExponentConvention::LambdaCM,
        }
    }

    pub fn with_convention(mut self, convention: ExponentConvention) -> Self {
        self.convention = convention;
        self
    }

    #[inline]
    fn delay_rate(&self, c: f64) -> f64 {
        match self.convention {
            ExponentConvention::LambdaCM => c * self.m,
            ExponentConvention::LambdaM => self.m,
        }
    }

    /// Upper end of the `lambda` search interval; `Lambda > 0` there.
    fn lambda_hi(&self, c: f64) -> f64 {
        c + 2.0 * (self.d + self.bprime0).sqrt()
    }
}

#[inline]
pub fn lambda_char(lambda: f64, c: f64, ctx: &CharacteristicContext) -> f64 {
    lambda * lambda - c * lambda - ctx.d + ctx.bprime0 * (-lambda * ctx.delay_rate(c)).exp()
}

/// `d Lambda / d lambda`
#[inline]
pub fn lambda_char_slope(lambda: f64, c: f64, ctx: &CharacteristicContext) -> f64 {
    let r = ctx.delay_rate(c);
    2.0 * lambda - c - ctx.bprime0 * r * (-lambda * r).exp()
}

#[inline]
fn lambda_char_curvature(lambda: f64, c: f64, ctx: &CharacteristicContext) -> f64 {
    let r = ctx.delay_rate(c);
    2.0 + ctx.bprime0 * r * r * (-lambda * r).exp()
}

/// Minimizer of `Lambda(., c)` over `[0, lambda_hi]` and the minimum value.
pub fn min_over_lambda(c: f64, ctx: &CharacteristicContext) -> (f64, f64) {
    let hi = ctx.lambda_hi(c);
    let x = golden_min(|l| lambda_char(l, c, ctx), 0.0, hi, 1e-9 * (1.0 + hi));
    // the minimizer is the root of the (increasing) slope
    let x = newton_polish(
        |l| lambda_char_slope(l, c, ctx),
        |l| lambda_char_curvature(l, c, ctx),
        x,
        0.0,
        hi,
        1e-15,
    );
    (x, lambda_char(x, c, ctx))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedResult {
    pub c_star: f64,
    /// double root of `Lambda(., c*)`
    pub lambda_star: f64,
    pub bracket: (f64, f64),
    pub tolerance: f64,
}

/// Default bisection tolerance on `c`.
pub const SPEED_TOL: f64 = 1e-10;

pub fn critical_speed(ctx: &CharacteristicContext, tol: f64) -> Result<SpeedResult> {
    if !(ctx.bprime0 > ctx.d) {
        return Err(Error::InvalidContext(format!("b'(0) = {} <= d = {}", ctx.bprime0, ctx.d)));
    }
    let touches = |c: f64| min_over_lambda(c, ctx).1 <= 0.0;
    let mut lo = 1e-6;
    if touches(lo) {
        return Err(Error::InvalidContext(format!("min Lambda <= 0 already at c = {lo}")));
    }
    let mut hi = 2.0 * (ctx.bprime0 - ctx.d).sqrt() + 1.0;
    let mut doublings = 0;
    while !touches(hi) {
        doublings += 1;
        if doublings > 10 {
            return Err(Error::InvalidContext(format!("no critical speed below c = {hi}")));
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if touches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c_star = 0.5 * (lo + hi);
    let (lambda_star, _) = min_over_lambda(c_star, ctx);
    Ok(SpeedResult { c_star, lambda_star, bracket: (lo, hi), tolerance: hi - lo })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootPair {
    pub lambda1: f64,
    pub lambda2: f64,
    pub c: f64,
}

/// The two positive roots of `Lambda(., c)` for `c > c*`.
pub fn lambda_roots(c: f64, ctx: &CharacteristicContext) -> Result<RootPair> {
    let (lmin, vmin) = min_over_lambda(c, ctx);
    if !(vmin < 0.0) {
        let c_star = critical_speed(ctx, SPEED_TOL).map(|s| s.c_star).unwrap_or(f64::NAN);
        return Err(Error::NoRoots { c, c_star });
    }
    let hi = ctx.lambda_hi(c);
    let f = |l: f64| lambda_char(l, c, ctx);
    let df = |l: f64| lambda_char_slope(l, c, ctx);
    let r1 = bisect(f, 0.0, lmin, 0.0, 200).ok_or_else(|| Error::Internal("lambda1 bracket".into()))?;
    let r2 = bisect(f, lmin, hi, 0.0, 200).ok_or_else(|| Error::Internal("lambda2 bracket".into()))?;
    let lambda1 = newton_polish(f, df, r1, 0.0, lmin, 1e-12);
    let lambda2 = newton_polish(f, df, r2, lmin, hi, 1e-12);
    Ok(RootPair { lambda1, lambda2, c })
}

/// `lim_{c -> inf} c lambda1(c)`: the positive root `x` of
/// `b'(0) exp(-m x) = x + d`.
pub fn large_speed_limit(ctx: &CharacteristicContext) -> f64 {
    let g = |x: f64| ctx.bprime0 * (-ctx.m * x).exp() - x - ctx.d;
    bisect(g, 0.0, ctx.bprime0, 0.0, 300).unwrap_or(ctx.bprime0 - ctx.d)
}

/// Per-run substitutes for the existential bounds `c lambda1(c) < L1` and
/// `lambda1(c) < L2` over a speed range `(c*, c_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBounds {
    pub l1: f64,
    pub l2: f64,
    pub c_star: f64,
    pub c_max: f64,
}

pub const DECAY_BOUND_POINTS: usize = 200;
pub const DECAY_BOUND_INFLATION: f64 = 1.05;

pub fn decay_bounds(ctx: &CharacteristicContext, speed: &SpeedResult, c_max: f64) -> Result<DecayBounds> {
    let c_star = speed.c_star;
    if !(c_max > c_star) {
        return Err(Error::Precondition(format!("c_max = {c_max} must exceed c* = {c_star}")));
    }
    // lambda1 -> lambda* as c -> c*+
    let mut l1 = c_star * speed.lambda_star;
    let mut l2 = speed.lambda_star;
    for i in 1..=DECAY_BOUND_POINTS {
        let c = c_star + (c_max - c_star) * i as f64 / DECAY_BOUND_POINTS as f64;
        let roots = lambda_roots(c, ctx)?;
        l1 = l1.max(c * roots.lambda1);
        l2 = l2.max(roots.lambda1);
    }
    Ok(DecayBounds { l1: DECAY_BOUND_INFLATION * l1, l2: DECAY_BOUND_INFLATION * l2, c_star, c_max })
}

/// Rates of the Green kernel of `phi'' - c phi' - beta phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRates {
    pub gamma1: f64,
    pub gamma2: f64,
    pub beta: f64,
    pub c: f64,
}

impl KernelRates {
    pub fn new(c: f64, beta: f64) -> Self {
        let s = (c * c + 4.0 * beta).sqrt();
        let gamma2 = 0.5 * (c + s);
        // -beta / gamma2 avoids cancellation in (c - s) / 2
        let gamma1 = -beta / gamma2;
        Self { gamma1, gamma2, beta, c }
    }
}

/// Lipschitz-type scale `A = 1 + b'(0) * level * T` for a level `K` or `kcal`.
pub fn lipschitz_factor(model: &ModelSpec, range_end: f64) -> f64 {
    1.0 + model.bprime0() * range_end * model.delay.sup_derivative(range_end)
}

/// Chooses `beta` satisfying every operator constraint at speed `c`, with a
/// 1% margin, and returns the kernel rates.
///
/// `range_end` is `K` (monotone case) or `kcal` (nonmonotone case).
pub fn choose_beta(c: f64, model: &ModelSpec, range_end: f64) -> Result<KernelRates> {
    let ctx = CharacteristicContext::from_model(model);
    let speed = critical_speed(&ctx, SPEED_TOL)?;
    let bounds = decay_bounds(&ctx, &speed, (10.0 * speed.c_star).max(c))?;
    choose_beta_with(c, model, range_end, &bounds)
}

pub fn choose_beta_with(c: f64, model: &ModelSpec, range_end: f64, bounds: &DecayBounds) -> Result<KernelRates> {
    if !(c > 0.0) {
        return Err(Error::Precondition(format!("speed must be positive, got {c}")));
    }
    let d = model.d;
    let a = lipschitz_factor(model, range_end);
    let candidates = [
        d * a + a * a * c * c / 4.0,
        (a * a * c * c + 4.0 * d) / 4.0,
        3.0 * bounds.l1 * a,
        d + 1.0,
    ];
    let beta = 1.01 * candidates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(KernelRates::new(c, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BirthFunction, DelayFunction};
    use proptest::prelude::*;
    use std::f64::consts::E;

    fn ctx(d: f64, b0: f64, m: f64) -> CharacteristicContext {
        CharacteristicContext::new(d, b0, m).unwrap()
    }

    /// Brute-force scan of `Lambda(., c)` on a fine grid.
    fn scan_min(c: f64, cx: &CharacteristicContext, n: usize) -> (f64, f64) {
        let hi = c + 2.0 * (cx.d + cx.bprime0).sqrt();
        let mut best = (0.0, f64::INFINITY);
        for i in 0..=n {
            let l = hi * i as f64 / n as f64;
            let v = lambda_char(l, c, cx);
            if v < best.1 {
                best = (l, v);
            }
        }
        best
    }

    #[test]
    fn lambda_char_examples() {
        let c = ctx(1.0, 2.0, 0.0);
        assert_eq!(lambda_char(0.0, 3.0, &c), 1.0);
        assert!(lambda_char(1.0, 2.0, &c).abs() < 1e-15);
        let c1 = ctx(1.0, 2.0, 1.0);
        let expected = -2.0 + 2.0 * (-2.0f64).exp();
        assert!((lambda_char(1.0, 2.0, &c1) - expected).abs() < 1e-15);
        assert!((expected + 1.72933).abs() < 1e-5);
    }

    #[test]
    fn min_over_lambda_examples() {
        let c = ctx(1.0, 2.0, 0.0);
        let (l, v) = min_over_lambda(2.0, &c);
        assert!((l - 1.0).abs() < 1e-12 && v.abs() < 1e-14);
        let (l, v) = min_over_lambda(1.0, &c);
        assert!((l - 0.5).abs() < 1e-12 && (v - 0.75).abs() < 1e-14);

        // 1e6-point scan oracle at m = 1, c = 2
        let c1 = ctx(1.0, 2.0, 1.0);
        let (ls, vs) = scan_min(2.0, &c1, 1_000_000);
        let (l, v) = min_over_lambda(2.0, &c1);
        assert!((l - ls).abs() < 1e-5);
        assert!(v <= vs && vs - v < 1e-10);
        // frozen from the scan oracle
        assert!((l - 1.186_428).abs() < 1e-5, "{l}");
        assert!((v - (-1.778_816)).abs() < 1e-5, "{v}");
    }

    #[test]
    fn critical_speed_examples() {
        let s = critical_speed(&ctx(1.0, 2.0, 0.0), SPEED_TOL).unwrap();
        assert!((s.c_star - 2.0).abs() < 1e-8);
        assert!((s.lambda_star - 1.0).abs() < 1e-4);
        let s = critical_speed(&ctx(1.0, E, 0.0), SPEED_TOL).unwrap();
        assert!((s.c_star - 2.0 * (E - 1.0).sqrt()).abs() < 1e-8);
        assert!((s.c_star - 2.621665).abs() < 1e-6);
        let cx = ctx(1.0, 2.0, 1.0);
        let s = critical_speed(&cx, SPEED_TOL).unwrap();
        assert!(s.c_star < 2.0);
        // bisection oracle on the brute-force scan predicate
        let oracle = bisect(|c| scan_min(c, &cx, 20_000).1, 0.1, 2.0, 1e-9, 200).unwrap();
        assert!((s.c_star - oracle).abs() < 1e-4);
        assert!(min_over_lambda(s.c_star * (1.0 - 1e-8), &cx).1 > 0.0);
        assert!(min_over_lambda(s.c_star * (1.0 + 1e-8), &cx).1 < 0.0);
    }

    #[test]
    fn roots_examples() {
        let c = ctx(1.0, 2.0, 0.0);
        let r = lambda_roots(2.5, &c).unwrap();
        assert!((r.lambda1 - 0.5).abs() < 1e-12 && (r.lambda2 - 2.0).abs() < 1e-12);
        assert!(matches!(lambda_roots(1.9, &c), Err(Error::NoRoots { .. })));
        let c2 = ctx(1.0, 2.0, 0.3);
        let r = lambda_roots(2.0, &c2).unwrap();
        assert!(lambda_char(0.5 * (r.lambda1 + r.lambda2), 2.0, &c2) < 0.0);
        assert!(lambda_char(r.lambda1, 2.0, &c2).abs() <= 1e-10);
        assert!(lambda_char(r.lambda2, 2.0, &c2).abs() <= 1e-10);
    }

    #[test]
    fn large_speed_limit_of_c_lambda1() {
        let c0 = ctx(1.0, 2.0, 0.0);
        assert!((large_speed_limit(&c0) - 1.0).abs() < 1e-12);
        let c1 = ctx(1.0, 2.0, 0.4);
        let x = large_speed_limit(&c1);
        let r = lambda_roots(2000.0, &c1).unwrap();
        assert!((2000.0 * r.lambda1 - x).abs() < 1e-3);
        let s = critical_speed(&c1, SPEED_TOL).unwrap();
        let b = decay_bounds(&c1, &s, 10.0 * s.c_star).unwrap();
        assert!(x < b.l1);
    }

    #[test]
    fn sign_pattern_and_monotone_threshold() {
        let cx = ctx(1.0, 2.0, 0.2);
        let s = critical_speed(&cx, SPEED_TOL).unwrap();
        let c = 1.1 * s.c_star;
        let r = lambda_roots(c, &cx).unwrap();
        assert!(lambda_char(r.lambda1 / 2.0, c, &cx) > 1e-8);
        assert!(lambda_char(0.5 * (r.lambda1 + r.lambda2), c, &cx) < -1e-8);
        assert!(lambda_char(1.5 * r.lambda2, c, &cx) > 1e-8);

        let vals: Vec<f64> = (0..100)
            .map(|i| s.c_star * (0.5 + 1.5 * i as f64 / 99.0))
            .map(|c| min_over_lambda(c, &cx).1)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));

        let roots: Vec<RootPair> = (1..=50)
            .map(|i| lambda_roots(s.c_star * (1.0 + i as f64 / 50.0), &cx).unwrap())
            .collect();
        assert!(roots.windows(2).all(|w| w[1].lambda1 < w[0].lambda1 && w[1].lambda2 > w[0].lambda2));
    }

    #[test]
    fn decay_bounds_cover_range() {
        let cx = ctx(1.0, 2.0, 0.2);
        let s = critical_speed(&cx, SPEED_TOL).unwrap();
        let b = decay_bounds(&cx, &s, 10.0 * s.c_star).unwrap();
        for i in 1..=333 {
            let c = s.c_star * (1.0 + 9.0 * i as f64 / 333.0);
            let r = lambda_roots(c, &cx).unwrap();
            assert!(c * r.lambda1 < b.l1);
            assert!(r.lambda1 < b.l2);
        }
    }

    #[test]
    fn choose_beta_examples() {
        let model = ModelSpec::new(1.0, BirthFunction::ricker(2.0).unwrap(), DelayFunction::Constant { m: 0.0 }).unwrap();
        let k = model.k_eq();
        let kr = choose_beta(2.0, &model, k).unwrap();
        assert!(kr.beta >= 2.02);
        let cx = CharacteristicContext::from_model(&model);
        let s = critical_speed(&cx, SPEED_TOL).unwrap();
        let b = decay_bounds(&cx, &s, 10.0 * s.c_star).unwrap();
        let expected = 1.01 * [2.0, 2.0, 3.0 * b.l1, 2.0].iter().cloned().fold(0.0, f64::max);
        assert!((kr.beta - expected).abs() < 1e-12);
        assert!(kr.beta > model.d);
    }

    proptest! {
        #[test]
        fn kpp_reduction(d in 0.1f64..3.0, excess in 0.05f64..4.0) {
            let b0 = d + excess;
            let s = critical_speed(&ctx(d, b0, 0.0), SPEED_TOL).unwrap();
            prop_assert!((s.c_star - 2.0 * (b0 - d).sqrt()).abs() <= 1e-8);
        }

        #[test]
        fn kernel_rates_vieta(c in 0.01f64..20.0, beta in 0.01f64..100.0) {
            let k = KernelRates::new(c, beta);
            prop_assert!(k.gamma1 < 0.0 && k.gamma2 > 0.0);
            prop_assert!((k.gamma1 * k.gamma2 + beta).abs() <= 1e-12 * beta.max(1.0));
            prop_assert!((k.gamma1 + k.gamma2 - c).abs() <= 1e-12 * c.max(1.0));
            prop_assert!((k.gamma2 - k.gamma1 - (c * c + 4.0 * beta).sqrt()).abs() <= 1e-12 * (c + beta).max(1.0));
        }
    }
}
