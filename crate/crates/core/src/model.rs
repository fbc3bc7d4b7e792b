//! Model ingredients: death rate `d`, birth function `b` and state-dependent
//! delay `tau`, together with the derived constants used by every solver.
//!
//! The positive equilibrium `K` is defined by `b(K) = d K`.

use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::{bisect, golden_max, linspace, MonotoneCubic};

/// Grid density for interval-wide hypothesis checks and suprema.
pub const CHECK_GRID: usize = 10_000;

/// Relative inflation applied to grid suprema of derived constants.
pub const SAFETY: f64 = 0.01;

/// Which side of `b` an envelope bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeSide {
    /// Running maximum `max_{[0,u]} b`.
    Upper,
    /// Suffix minimum `min_{[u, cutoff]} b`.
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BirthKind {
    /// `b(u) = p u e^{-u}`
    Ricker { p: f64 },
    /// Sampled `(u, b(u))` pairs with monotone-cubic evaluation.
    Tabulated(MonotoneCubic),
    /// Monotone envelope of another birth function on `[0, cutoff]`.
    Envelope {
        base: Box<BirthFunction>,
        side: EnvelopeSide,
        cutoff: f64,
        nodes: Vec<f64>,
        /// running max (upper) or suffix min (lower) of `base` at `nodes`
        extrema: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthFunction {
    kind: BirthKind,
}

impl BirthFunction {
    pub fn ricker(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::ModelInvalid(format!("ricker p must be positive, got {p}")));
        }
        Ok(Self { kind: BirthKind::Ricker { p } })
    }

    /// Tabulated birth function. The first sample must be `(0, 0)` and all
    /// values nonnegative.
    pub fn tabulated(u: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if u.first() != Some(&0.0) || b.first() != Some(&0.0) {
            return Err(Error::ModelInvalid("table must start at (0, 0)".into()));
        }
        if b.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::ModelInvalid("table values must be nonnegative".into()));
        }
        let interp = MonotoneCubic::new(u, b).ok_or_else(|| {
            Error::ModelInvalid("table needs >= 2 strictly increasing u samples".into())
        })?;
        Ok(Self { kind: BirthKind::Tabulated(interp) })
    }

    /// Monotone envelope of `base` sampled on `[0, cutoff]`. Interior local
    /// maxima of `base` are refined by golden-section search and inserted
    /// into the node set so the upper envelope reaches the true peak.
    pub fn envelope(base: &BirthFunction, side: EnvelopeSide, cutoff: f64) -> Self {
        let mut nodes = linspace(0.0, cutoff, CHECK_GRID + 1);
        let vals: Vec<f64> = nodes.iter().map(|&u| base.value(u)).collect();
        let step = cutoff / CHECK_GRID as f64;
        let mut extra = Vec::new();
        for i in 1..nodes.len() - 1 {
            if vals[i] >= vals[i - 1] && vals[i] > vals[i + 1] {
                extra.push(golden_max(|u| base.value(u), nodes[i] - step, nodes[i] + step, 1e-13));
            }
        }
        nodes.extend(extra);
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup();
        let mut extrema: Vec<f64> = nodes.iter().map(|&u| base.value(u)).collect();
        match side {
            EnvelopeSide::Upper => {
                for i in 1..extrema.len() {
                    extrema[i] = extrema[i].max(extrema[i - 1]);
                }
            }
            EnvelopeSide::Lower => {
                for i in (0..extrema.len() - 1).rev() {
                    extrema[i] = extrema[i].min(extrema[i + 1]);
                }
            }
        }
        Self {
            kind: BirthKind::Envelope { base: Box::new(base.clone()), side, cutoff, nodes, extrema },
        }
    }

    pub fn kind(&self) -> &BirthKind {
        &self.kind
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self.kind, BirthKind::Ricker { .. })
    }

    /// Checked evaluation: negative populations are outside the domain.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if u < 0.0 || u.is_nan() {
            return Err(Error::Domain(format!("birth function evaluated at u = {u} < 0")));
        }
        Ok(self.value(u))
    }

    /// Unchecked evaluation; arguments below zero are treated as zero.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.kind {
            BirthKind::Ricker { p } => p * u * (-u).exp(),
            BirthKind::Tabulated(t) => t.eval(u),
            BirthKind::Envelope { base, side, cutoff, nodes, extrema } => {
                let bu = base.value(u.min(*cutoff));
                match side {
                    EnvelopeSide::Upper => {
                        let k = nodes.partition_point(|&v| v <= u);
                        if k == 0 {
                            bu
                        } else {
                            bu.max(extrema[k - 1])
                        }
                    }
                    EnvelopeSide::Lower => {
                        if u >= *cutoff {
                            return *extrema.last().unwrap();
                        }
                        let k = nodes.partition_point(|&v| v < u);
                        bu.min(extrema[k])
                    }
                }
            }
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match &self.kind {
            BirthKind::Ricker { p } => p * (1.0 - u) * (-u).exp(),
            BirthKind::Tabulated(t) => t.derivative(u),
            BirthKind::Envelope { base, cutoff, .. } => {
                if u >= *cutoff {
                    return 0.0;
                }
                // the envelope follows `base` where they agree, else it is flat
                if (self.value(u) - base.value(u)).abs() <= 1e-14 * (1.0 + base.value(u)) {
                    base.derivative(u)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn derivative_at_zero(&self) -> f64 {
        match &self.kind {
            BirthKind::Envelope { base, .. } => base.derivative_at_zero(),
            _ => self.derivative(0.0),
        }
    }

    /// `lim_{u->0} (b'(0) u - b(u)) / u^2` when known analytically.
    pub fn gap_limit_at_zero(&self) -> Option<f64> {
        match &self.kind {
            BirthKind::Ricker { p } => Some(*p),
            BirthKind::Envelope { base, .. } => base.gap_limit_at_zero(),
            BirthKind::Tabulated(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayFunction {
    Constant { m: f64 },
    /// `tau(u) = m + (M - m) u / (1 + u)`
    SaturatingRational { m: f64, big_m: f64 },
    /// `tau(u) = m + (M - m)(1 - e^{-u})`
    SaturatingExponential { m: f64, big_m: f64 },
}

impl DelayFunction {
    /// Rejects non-finite parameters and `m < 0`; other hypothesis
    /// violations are left to [`validate_hypotheses`].
    pub fn new_checked(self) -> Result<Self> {
        let (m, big_m) = (self.m(), self.max_delay());
        if !(m.is_finite() && big_m.is_finite()) || m < 0.0 {
            return Err(Error::ModelInvalid(format!("delay parameters m={m}, M={big_m} invalid")));
        }
        Ok(self)
    }

    /// `tau(0)`
    pub fn m(&self) -> f64 {
        match *self {
            DelayFunction::Constant { m }
            | DelayFunction::SaturatingRational { m, .. }
            | DelayFunction::SaturatingExponential { m, .. } => m,
        }
    }

    /// `lim_{u -> inf} tau(u)`
    pub fn max_delay(&self) -> f64 {
        match *self {
            DelayFunction::Constant { m } => m,
            DelayFunction::SaturatingRational { big_m, .. }
            | DelayFunction::SaturatingExponential { big_m, .. } => big_m,
        }
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match *self {
            DelayFunction::Constant { m } => m,
            DelayFunction::SaturatingRational { m, big_m } => m + (big_m - m) * u / (1.0 + u),
            DelayFunction::SaturatingExponential { m, big_m } => m + (big_m - m) * (-(-u).exp_m1()),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let u = u.max(0.0);
        match *self {
            DelayFunction::Constant { .. } => 0.0,
            DelayFunction::SaturatingRational { m, big_m } => (big_m - m) / ((1.0 + u) * (1.0 + u)),
            DelayFunction::SaturatingExponential { m, big_m } => (big_m - m) * (-u).exp(),
        }
    }

    /// `sup_{[0, range_end]} tau'`. Both saturating kinds peak at `u = 0`.
    pub fn sup_derivative(&self, range_end: f64) -> f64 {
        let _ = range_end;
        match *self {
            DelayFunction::Constant { .. } => 0.0,
            DelayFunction::SaturatingRational { m, big_m }
            | DelayFunction::SaturatingExponential { m, big_m } => (big_m - m).max(0.0),
        }
    }
}

/// Constants derived once from a validated model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub bprime0: f64,
    /// positive equilibrium, `b(K) = d K`
    pub k_eq: f64,
    /// `max_{[0,K]} b`
    pub kcal: f64,
    /// `sup_{[0,K]} tau'`
    pub t_sup: f64,
    /// `sup_{[0,kcal]} tau'`
    pub tcal_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub d: f64,
    pub birth: BirthFunction,
    pub delay: DelayFunction,
    derived: DerivedConstants,
}

impl ModelSpec {
    pub fn new(d: f64, birth: BirthFunction, delay: DelayFunction) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::ModelInvalid(format!("death rate must be positive, got {d}")));
        }
        let delay = delay.new_checked()?;
        let bprime0 = birth.derivative_at_zero();
        if !(bprime0 > d) {
            return Err(Error::ModelInvalid(format!(
                "b'(0) = {bprime0} must exceed d = {d} for a positive equilibrium"
            )));
        }
        let k_eq = find_equilibrium(&birth, d)?;
        let kcal = max_on(&birth, k_eq);
        let derived = DerivedConstants {
            bprime0,
            k_eq,
            kcal,
            t_sup: delay.sup_derivative(k_eq),
            tcal_sup: delay.sup_derivative(kcal),
        };
        Ok(Self { d, birth, delay, derived })
    }

    /// Same delay and death rate with a different birth function.
    pub fn with_birth(&self, birth: BirthFunction) -> Result<Self> {
        Self::new(self.d, birth, self.delay)
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn bprime0(&self) -> f64 {
        self.derived.bprime0
    }

    pub fn k_eq(&self) -> f64 {
        self.derived.k_eq
    }

    pub fn kcal(&self) -> f64 {
        self.derived.kcal
    }
}

/// Checked birth evaluation.
pub fn birth_eval(b: &BirthFunction, u: f64) -> Result<f64> {
    b.eval(u)
}

fn find_equilibrium(birth: &BirthFunction, d: f64) -> Result<f64> {
    let g = |u: f64| birth.value(u) - d * u;
    if let BirthKind::Ricker { p } = birth.kind() {
        // closed form K = ln(p/d), then polish on the defining equation
        let k = (p / d).ln();
        let polished = bisect(|u| birth.value(u) / u - d, 0.5 * k, 2.0 * k, 0.0, 200).unwrap_or(k);
        return Ok(polished);
    }
    let (lo, hi) = (1e-9, 50.0);
    let grid = linspace(lo, hi, 100_001);
    let mut prev = grid[0];
    if g(prev) <= 0.0 {
        return Err(Error::ModelInvalid("b(u) <= d u immediately above zero".into()));
    }
    for &u in &grid[1..] {
        if g(u) <= 0.0 {
            // b(u)/u - d is better conditioned near the root than b(u) - d u
            let root = bisect(|v| birth.value(v) / v - d, prev, u, 0.0, 200)
                .ok_or_else(|| Error::ModelInvalid("equilibrium bracket lost".into()))?;
            return Ok(root);
        }
        prev = u;
    }
    Err(Error::ModelInvalid(format!("no sign change of b(u) - d u on [{lo}, {hi}]")))
}

fn max_on(birth: &BirthFunction, end: f64) -> f64 {
    if let BirthKind::Ricker { p } = birth.kind() {
        return if end <= 1.0 { birth.value(end) } else { p / std::f64::consts::E };
    }
    let grid = linspace(0.0, end, CHECK_GRID + 1);
    let (imax, vmax) = grid
        .iter()
        .map(|&u| birth.value(u))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if imax == grid.len() - 1 || imax == 0 {
        return vmax;
    }
    let u = golden_max(|u| birth.value(u), grid[imax - 1], grid[imax + 1], 1e-13);
    vmax.max(birth.value(u))
}

/// Equilibrium `K` of `b(K) = d K`.
pub fn equilibrium_k(model: &ModelSpec) -> f64 {
    model.k_eq()
}

/// `L = (1 + SAFETY) sup_{(0, range_end]} (b'(0) u - b(u)) / u^2`.
pub fn quadratic_gap_l(model: &ModelSpec, range_end: f64) -> Result<f64> {
    if !(range_end > 0.0) {
        return Err(Error::Domain(format!("range end must be positive, got {range_end}")));
    }
    let b0 = model.bprime0();
    let mut sup = model.birth.gap_limit_at_zero().unwrap_or(0.0);
    for i in 1..=CHECK_GRID {
        let u = range_end * i as f64 / CHECK_GRID as f64;
        let gap = b0 * u - model.birth.value(u);
        if gap < -1e-12 * (1.0 + b0 * u) {
            return Err(Error::HypothesisViolation {
                id: "B4".into(),
                u,
                detail: format!("b'(0)u - b(u) = {gap:e} < 0"),
            });
        }
        sup = sup.max(gap / (u * u));
    }
    if model.birth.gap_limit_at_zero().is_none() {
        let u = range_end * 1e-6;
        sup = sup.max((b0 * u - model.birth.value(u)) / (u * u));
    }
    // a birth function linear on the whole range still needs a positive L
    Ok((1.0 + SAFETY) * sup.max(f64::EPSILON))
}

/// `max_{[0,K]} b`
pub fn kcal(model: &ModelSpec) -> f64 {
    model.kcal()
}

pub fn sup_tau_derivative(model: &ModelSpec, range_end: f64) -> f64 {
    model.delay.sup_derivative(range_end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Monotone,
    Nonmonotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HypothesisId {
    B,
    A1,
    A2,
    A3,
    B1,
    B2,
    B3,
    B4,
    C1,
    C2,
    C3,
}

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub u: f64,
    pub violated: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub id: HypothesisId,
    pub holds: bool,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn get(&self, id: HypothesisId) -> Option<&HypothesisCheck> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn holds(&self, id: HypothesisId) -> bool {
        self.get(id).map_or(false, |e| e.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.entries.iter().filter(|e| !e.holds)
    }
}

fn verdict<I>(id: HypothesisId, points: I) -> HypothesisCheck
where
    I: IntoIterator<Item = (f64, Option<String>)>,
{
    for (u, failure) in points {
        if let Some(violated) = failure {
            return HypothesisCheck { id, holds: false, witness: Some(Witness { u, violated }) };
        }
    }
    HypothesisCheck { id, holds: true, witness: None }
}

fn open_grid(end: f64) -> impl Iterator<Item = f64> {
    (1..=CHECK_GRID).map(move |i| end * i as f64 / CHECK_GRID as f64)
}

/// Checks (A1)-(A3), (B) and either (B1)-(B4) or (C1)-(C3) on dense grids.
pub fn validate_hypotheses(model: &ModelSpec, mode: Monotonicity) -> HypothesisReport {
    let b = &model.birth;
    let tau = &model.delay;
    let d = model.d;
    let k = model.k_eq();
    let kc = model.kcal();
    let b0 = model.bprime0();
    let mut entries = Vec::new();

    // equality at K is excluded from both strict inequalities
    let near_k = |u: f64| (u - k).abs() <= 1e-9 * k;
    entries.push(verdict(
        HypothesisId::B,
        open_grid(10.0 * k).map(|u| {
            let (bu, du) = (b.value(u), d * u);
            let fail = if near_k(u) {
                None
            } else if u < k && !(bu > du) {
                Some(format!("b(u) = {bu} <= d u = {du} below K"))
            } else if u > k && !(bu > 0.0 && bu < du) {
                Some(format!("b(u) = {bu} not in (0, d u = {du}) above K"))
            } else {
                None
            };
            (u, fail)
        }),
    ));

    // built-in delays are smooth; nothing to sample
    entries.push(HypothesisCheck { id: HypothesisId::A1, holds: true, witness: None });
    let span = 10.0 * k.max(kc);
    let t0 = tau.derivative(0.0);
    let a2 = if !(0.0..1.0).contains(&t0) {
        HypothesisCheck {
            id: HypothesisId::A2,
            holds: false,
            witness: Some(Witness { u: 0.0, violated: format!("tau'(0) = {t0} not in [0, 1)") }),
        }
    } else {
        verdict(
            HypothesisId::A2,
            (0..=CHECK_GRID).map(|i| span * i as f64 / CHECK_GRID as f64).map(|u| {
                let t = tau.derivative(u);
                (u, (!(0.0..1.0).contains(&t)).then(|| format!("tau'(u) = {t} not in [0, 1)")))
            }),
        )
    };
    entries.push(a2);
    let (m, big_m) = (tau.m(), tau.max_delay());
    entries.push(if !(0.0 <= m && m <= big_m && big_m.is_finite()) {
        HypothesisCheck {
            id: HypothesisId::A3,
            holds: false,
            witness: Some(Witness { u: 0.0, violated: format!("need 0 <= m = {m} <= M = {big_m}") }),
        }
    } else {
        verdict(
            HypothesisId::A3,
            (0..=CHECK_GRID).map(|i| span * i as f64 / CHECK_GRID as f64).map(|u| {
                let t = tau.eval(u);
                let tol = 1e-12 * (1.0 + big_m);
                (u, (t < m - tol || t > big_m + tol).then(|| format!("tau(u) = {t} outside [m, M]")))
            }),
        )
    });

    match mode {
        Monotonicity::Monotone => {
            entries.push(HypothesisCheck { id: HypothesisId::B1, holds: true, witness: None });
            entries.push(verdict(
                HypothesisId::B2,
                std::iter::once((0.0, (!(b0 > d)).then(|| format!("b'(0) = {b0} <= d = {d}"))))
                    .chain(open_grid(k).map(|u| {
                        let bu = b.value(u);
                        (u, (!(bu < b0 * u)).then(|| format!("b(u) = {bu} >= b'(0) u")))
                    })),
            ));
            entries.push(verdict(
                HypothesisId::B3,
                (0..=CHECK_GRID).map(|i| k * i as f64 / CHECK_GRID as f64).map(|u| {
                    let db = b.derivative(u);
                    let tol = 1e-12 * b0;
                    (u, (db < -tol || db > b0 + tol).then(|| format!("b'(u) = {db} not in [0, b'(0)]")))
                }),
            ));
            entries.push(gap_check(HypothesisId::B4, model, k));
        }
        Monotonicity::Nonmonotone => {
            entries.push(HypothesisCheck { id: HypothesisId::C1, holds: true, witness: None });
            entries.push(verdict(
                HypothesisId::C2,
                std::iter::once((0.0, (!(b0 > d)).then(|| format!("b'(0) = {b0} <= d = {d}"))))
                    .chain(open_grid(10.0 * kc).map(|u| {
                        let bu = b.value(u);
                        (u, (!(bu < b0 * u)).then(|| format!("b(u) = {bu} >= b'(0) u")))
                    })),
            ));
            let gap = gap_check(HypothesisId::C3, model, k);
            entries.push(if gap.holds {
                verdict(
                    HypothesisId::C3,
                    (0..=CHECK_GRID).map(|i| k * i as f64 / CHECK_GRID as f64).map(|u| {
                        let db = b.derivative(u);
                        (u, (db.abs() > b0 * (1.0 + 1e-12)).then(|| format!("|b'(u)| = {} > b'(0)", db.abs())))
                    }),
                )
            } else {
                gap
            });
        }
    }
    HypothesisReport { entries }
}

fn gap_check(id: HypothesisId, model: &ModelSpec, end: f64) -> HypothesisCheck {
    match quadratic_gap_l(model, end) {
        Ok(_) => HypothesisCheck { id, holds: true, witness: None },
        Err(Error::HypothesisViolation { u, detail, .. }) => {
            HypothesisCheck { id, holds: false, witness: Some(Witness { u, violated: detail }) }
        }
        Err(e) => HypothesisCheck {
            id,
            holds: false,
            witness: Some(Witness { u: end, violated: e.to_string() }),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::golden_max;
    use std::f64::consts::{E, LN_2};

    fn ricker(p: f64, d: f64, delay: DelayFunction) -> ModelSpec {
        ModelSpec::new(d, BirthFunction::ricker(p).unwrap(), delay).unwrap()
    }

    const CONST0: DelayFunction = DelayFunction::Constant { m: 0.0 };

    #[test]
    fn birth_eval_examples() {
        let b = BirthFunction::ricker(2.0).unwrap();
        assert_eq!(birth_eval(&b, 0.0).unwrap(), 0.0);
        assert!((birth_eval(&b, 1.0).unwrap() - 2.0 / E).abs() < 1e-15);
        assert!(matches!(birth_eval(&b, -0.1), Err(Error::Domain(_))));

        // golden-section oracle for the maximizer of 3 u e^{-u} on [0, 5]
        let b3 = BirthFunction::ricker(3.0).unwrap();
        let x = golden_max(|u| 3.0 * u * (-u).exp(), 0.0, 5.0, 1e-12);
        assert!((x - 1.0).abs() < 1e-6);
        assert!((b3.value(x) - 3.0 / E).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_examples() {
        // independent bisection on p e^{-u} - d over [1e-9, 50]
        let oracle = bisect(|u| 2.0 * (-u).exp() - 1.0, 1e-9, 50.0, 1e-15, 300).unwrap();
        let m = ricker(2.0, 1.0, CONST0);
        assert!((m.k_eq() - oracle).abs() < 1e-12);
        assert!((m.k_eq() - LN_2).abs() < 1e-12);
        assert!((ricker(E, 1.0, CONST0).k_eq() - 1.0).abs() < 1e-12);
        let err = ModelSpec::new(2.0, BirthFunction::ricker(2.0).unwrap(), CONST0);
        assert!(matches!(err, Err(Error::ModelInvalid(_))));
        for p in [1.5, 2.0, 3.0, 5.0] {
            let m = ricker(p, 1.0, CONST0);
            assert!((m.birth.value(m.k_eq()) - m.k_eq()).abs() <= 1e-10);
        }
    }

    #[test]
    fn tabulated_equilibrium_matches_closed_form() {
        let us = linspace(0.0, 6.0, 601);
        let bs: Vec<f64> = us.iter().map(|u| 2.0 * u * (-u).exp()).collect();
        let m = ModelSpec::new(1.0, BirthFunction::tabulated(us, bs).unwrap(), CONST0).unwrap();
        assert!((m.k_eq() - LN_2).abs() < 1e-6);
        assert!((m.birth.value(m.k_eq()) - m.k_eq()).abs() <= 1e-10);
    }

    #[test]
    fn quadratic_gap_examples() {
        // sup of (p u - p u e^{-u}) / u^2 is the u -> 0 limit p
        let m = ricker(2.0, 1.0, CONST0);
        let grid_sup = open_grid(LN_2)
            .map(|u| (2.0 * u - 2.0 * u * (-u).exp()) / (u * u))
            .fold(0.0f64, f64::max);
        assert!(grid_sup < 2.0 && grid_sup > 1.99);
        let l = quadratic_gap_l(&m, LN_2).unwrap();
        assert!((l - 2.0 * 1.01).abs() < 1e-12);
        let m3 = ricker(3.0, 1.0, CONST0);
        let l3 = quadratic_gap_l(&m3, 3.0 / E).unwrap();
        assert!((l3 - 3.03).abs() < 1e-12);
        for u in open_grid(LN_2) {
            let gap = 2.0 * u - m.birth.value(u);
            assert!(gap >= 0.0 && gap <= l * u * u);
        }
    }

    #[test]
    fn quadratic_gap_tabulated_concave_table() {
        // b(u) = 2u / (1 + u): linear at the origin, gap 2u^2 / (1 + u) >= 0
        let us = linspace(0.0, 6.0, 601);
        let bs: Vec<f64> = us.iter().map(|u| 2.0 * u / (1.0 + u)).collect();
        let m = ModelSpec::new(0.5, BirthFunction::tabulated(us, bs).unwrap(), CONST0).unwrap();
        assert!((m.bprime0() - 2.0).abs() < 1e-3);
        let l = quadratic_gap_l(&m, m.k_eq()).unwrap();
        assert!(l > 0.0 && l.is_finite());
        for u in open_grid(m.k_eq()) {
            let gap = m.bprime0() * u - m.birth.value(u);
            assert!(gap >= -1e-12 && gap <= l * u * u + 1e-12);
        }
    }

    #[test]
    fn kcal_examples() {
        assert!((ricker(2.0, 1.0, CONST0).kcal() - LN_2).abs() < 1e-12);
        assert!((ricker(3.0, 1.0, CONST0).kcal() - 3.0 / E).abs() < 1e-12);
        assert!((3.0 / E - 1.103638).abs() < 1e-6);
        // generic path on a monotone table gives b(K) = dK
        let us = linspace(0.0, 4.0, 81);
        let bs: Vec<f64> = us.iter().map(|u| 1.5 * u / (1.0 + u)).collect();
        let m = ModelSpec::new(1.0, BirthFunction::tabulated(us, bs).unwrap(), CONST0).unwrap();
        assert!((m.kcal() - m.k_eq()).abs() < 1e-9);
    }

    #[test]
    fn tau_derivative_examples() {
        let m = ricker(2.0, 1.0, DelayFunction::Constant { m: 0.4 });
        assert_eq!(sup_tau_derivative(&m, 1.0), 0.0);
        let m = ricker(2.0, 1.0, DelayFunction::SaturatingRational { m: 0.2, big_m: 0.7 });
        assert!((sup_tau_derivative(&m, m.k_eq()) - 0.5).abs() < 1e-15);
        let m = ricker(2.0, 1.0, DelayFunction::SaturatingExponential { m: 0.0, big_m: 0.9 });
        assert!((sup_tau_derivative(&m, m.k_eq()) - 0.9).abs() < 1e-15);
        // grid oracle agrees with the analytic supremum
        let grid_sup = linspace(0.0, m.k_eq(), 1001).into_iter().map(|u| m.delay.derivative(u)).fold(0.0, f64::max);
        assert!((grid_sup - 0.9).abs() < 1e-15);
    }

    #[test]
    fn hypotheses_ricker_monotone_window() {
        let m = ricker(2.0, 1.0, DelayFunction::SaturatingRational { m: 0.2, big_m: 0.7 });
        let r = validate_hypotheses(&m, Monotonicity::Monotone);
        assert!(r.all_hold(), "{:?}", r.failures().collect::<Vec<_>>());

        let m3 = ricker(3.0, 1.0, CONST0);
        let r = validate_hypotheses(&m3, Monotonicity::Monotone);
        let b3 = r.get(HypothesisId::B3).unwrap();
        assert!(!b3.holds);
        let w = b3.witness.as_ref().unwrap();
        assert!(w.u > 1.0 && m3.birth.derivative(w.u) < 0.0);
        assert!(validate_hypotheses(&m3, Monotonicity::Nonmonotone).all_hold());
    }

    #[test]
    fn hypotheses_delay_violation() {
        let m = ricker(2.0, 1.0, DelayFunction::SaturatingRational { m: 0.2, big_m: 1.4 });
        let r = validate_hypotheses(&m, Monotonicity::Monotone);
        let a2 = r.get(HypothesisId::A2).unwrap();
        assert!(!a2.holds);
        assert_eq!(a2.witness.as_ref().unwrap().u, 0.0);
        assert!(r.failures().all(|f| f.witness.is_some()));
    }

    #[test]
    fn single_sign_change_and_delay_bounds() {
        for (p, delay) in [
            (2.0, DelayFunction::SaturatingRational { m: 0.2, big_m: 0.7 }),
            (3.0, DelayFunction::SaturatingExponential { m: 0.1, big_m: 0.6 }),
        ] {
            let m = ricker(p, 1.0, delay);
            let span = 10.0 * m.k_eq().max(m.kcal());
            let g: Vec<f64> = open_grid(span).map(|u| m.birth.value(u) - m.d * u).collect();
            let changes = g.windows(2).filter(|w| w[0] > 0.0 && w[1] <= 0.0 || w[0] <= 0.0 && w[1] > 0.0).count();
            assert_eq!(changes, 1);
            for u in linspace(0.0, span, CHECK_GRID) {
                let t = m.delay.eval(u);
                assert!(t >= m.delay.m() - 1e-15 && t <= m.delay.max_delay() + 1e-15);
                let dt = m.delay.derivative(u);
                assert!((0.0..1.0).contains(&dt));
            }
            // b <= kcal on [0, K], attained
            let vals: Vec<f64> = linspace(0.0, m.k_eq(), CHECK_GRID).into_iter().map(|u| m.birth.value(u)).collect();
            let mx = vals.iter().cloned().fold(0.0, f64::max);
            assert!(mx <= m.kcal() + 1e-15 && m.kcal() - mx < 1e-7);
        }
    }

    #[test]
    fn envelopes_sandwich_birth() {
        let b = BirthFunction::ricker(3.0).unwrap();
        let cut = 3.0 / E;
        let up = BirthFunction::envelope(&b, EnvelopeSide::Upper, cut);
        let lo = BirthFunction::envelope(&b, EnvelopeSide::Lower, cut);
        let mut prev = (0.0, 0.0);
        for u in linspace(0.0, cut, 5001) {
            let (bu, bl, bb) = (up.value(u), lo.value(u), b.value(u));
            assert!(bl <= bb + 1e-15 && bb <= bu + 1e-15);
            assert!(bu >= prev.0 - 1e-15 && bl >= prev.1 - 1e-15);
            prev = (bu, bl);
        }
        assert!((up.value(2.0) - 3.0 / E).abs() < 1e-14);
        assert!((lo.value(1.05) - b.value(cut)).abs() < 1e-14);
        assert_eq!(up.derivative_at_zero(), 3.0);
    }
}
