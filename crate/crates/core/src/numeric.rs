//! Scalar root finding, minimization and interpolation helpers shared by the
//! solver modules.

/// Bisection on a bracket `[a, b]` with `f(a)` and `f(b)` of opposite sign.
///
/// Returns `None` if the bracket does not enclose a sign change.
pub fn bisect<F>(f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() || !fa.is_finite() || !fb.is_finite() {
        return None;
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (a + b);
        if (b - a).abs() <= xtol || mid == a || mid == b {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}

/// Newton iteration safeguarded to stay inside `[lo, hi]`.
///
/// Stops once `|f| <= ftol`; falls back to the starting point if an update
/// leaves the bracket or the derivative vanishes.
pub fn newton_polish<F, D>(f: F, df: D, x0: f64, lo: f64, hi: f64, ftol: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut x = x0;
    let mut fx = f(x);
    for _ in 0..50 {
        if fx.abs() <= ftol {
            break;
        }
        let d = df(x);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = x - fx / d;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let fnext = f(next);
        if fnext.abs() >= fx.abs() {
            // no progress at machine precision
            if fnext.abs() == fx.abs() {
                x = next;
            }
            break;
        }
        x = next;
        fx = fnext;
    }
    x
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimizer of a unimodal `f` on `[a, b]`.
pub fn golden_min<F>(f: F, mut a: f64, mut b: f64, xtol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a).abs() > xtol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        if x1 >= x2 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Golden-section search for a maximizer.
pub fn golden_max<F>(f: F, a: f64, b: f64, xtol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    golden_min(|x| -f(x), a, b, xtol)
}

/// `n` equally spaced points spanning `[a, b]` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n).map(|i| a + step * i as f64).collect()
        }
    }
}

/// Piecewise-cubic Hermite interpolant with Fritsch-Carlson slopes.
///
/// Preserves monotonicity of the data, so it never introduces overshoot
/// between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant; `xs` must be strictly increasing with at
    /// least two entries.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let secants: Vec<f64> = (0..n - 1)
            .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
            .collect();
        let mut slopes = vec![0.0; n];
        // three-point one-sided endpoint slopes
        let end_slope = |h0: f64, h1: f64, d0: f64, d1: f64| ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if n == 2 {
            slopes[0] = secants[0];
            slopes[1] = secants[0];
        } else {
            slopes[0] = end_slope(xs[1] - xs[0], xs[2] - xs[1], secants[0], secants[1]);
            slopes[n - 1] = end_slope(xs[n - 1] - xs[n - 2], xs[n - 2] - xs[n - 3], secants[n - 2], secants[n - 3]);
        }
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            slopes[i] = if a * b <= 0.0 {
                0.0
            } else {
                // weighted harmonic mean
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                (w1 + w2) / (w1 / a + w2 / b)
            };
        }
        // endpoint slopes must not overshoot
        for (i, s) in [(0usize, 0usize), (n - 1, n - 2)] {
            if slopes[i] * secants[s] < 0.0 {
                slopes[i] = 0.0;
            } else if slopes[i].abs() > 3.0 * secants[s].abs() {
                slopes[i] = 3.0 * secants[s];
            }
        }
        Some(Self { xs, ys, slopes })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= self.xs.len() => self.xs.len() - 2,
            k => k - 1,
        }
    }

    /// Value at `x`; constant extrapolation outside the table.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.x_min() {
            return self.ys[0];
        }
        if x >= self.x_max() {
            return *self.ys.last().unwrap();
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }

    /// First derivative; zero outside the table.
    pub fn derivative(&self, x: f64) -> f64 {
        if x < self.x_min() || x > self.x_max() {
            return 0.0;
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let d00 = (6.0 * t2 - 6.0 * t) / h;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = (-6.0 * t2 + 6.0 * t) / h;
        let d11 = 3.0 * t2 - 2.0 * t;
        d00 * self.ys[i] + d10 * self.slopes[i] + d01 * self.ys[i + 1] + d11 * self.slopes[i + 1]
    }
}

/// Linear interpolation of uniformly spaced samples starting at `x0` with
/// spacing `h`, extended by the given constants outside the sampled range.
#[inline]
pub fn lerp_uniform(values: &[f64], x0: f64, h: f64, left: f64, right: f64, x: f64) -> f64 {
    let n = values.len();
    let s = (x - x0) / h;
    if s < 0.0 {
        return left;
    }
    let i = s.floor() as usize;
    if i >= n - 1 {
        return if i == n - 1 && s == (n - 1) as f64 { values[n - 1] } else { right };
    }
    let t = s - i as f64;
    values[i] + t * (values[i + 1] - values[i])
}
