//! Small quadrature and lookup helpers shared across modules.

/// Uniform node axis on `[lo, hi]` with `n` nodes.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 2 && hi > lo, "axis needs at least two nodes and hi > lo");
        Axis { lo, hi, n }
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + self.step() * i as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Cell index and local coordinate in `[0, 1]`, clamped to the axis.
    #[inline]
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let s = ((x - self.lo) / self.step()).clamp(0.0, (self.n - 1) as f64);
        let i = (s.floor() as usize).min(self.n - 2);
        (i, s - i as f64)
    }

    /// Index of the nearest node.
    pub fn nearest(&self, x: f64) -> usize {
        (((x - self.lo) / self.step()).round().max(0.0) as usize).min(self.n - 1)
    }
}

/// Cell index and local coordinate for a sorted, possibly non-uniform node list.
#[inline]
pub fn locate_sorted(xs: &[f64], x: f64) -> (usize, f64) {
    let n = xs.len();
    if x <= xs[0] {
        return (0, 0.0);
    }
    if x >= xs[n - 1] {
        return (n - 2, 1.0);
    }
    let i = xs.partition_point(|&v| v <= x) - 1;
    let i = i.min(n - 2);
    (i, (x - xs[i]) / (xs[i + 1] - xs[i]))
}

/// Composite trapezoid weights for sorted nodes.
pub fn trapezoid_weights(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = xs[i + 1] - xs[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// `∫ p(s) ρ(s) ds` over `[lo, hi] ∩ [xs₀, xs_last]`, where `p` is the piecewise-linear
/// interpolant of `vals` on the nodes `xs`. Simpson on every sub-interval is exact when `ρ`
/// is linear there.
pub fn linear_times(xs: &[f64], vals: &[f64], rho: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = xs.len();
    let lo = lo.max(xs[0]);
    let hi = hi.min(xs[n - 1]);
    if hi <= lo {
        return 0.0;
    }
    let start = locate_sorted(xs, lo).0;
    let mut total = 0.0;
    for k in start..n - 1 {
        let (x0, x1) = (xs[k], xs[k + 1]);
        if x0 >= hi {
            break;
        }
        let a = x0.max(lo);
        let b = x1.min(hi);
        if b <= a {
            continue;
        }
        let p = |s: f64| vals[k] + (vals[k + 1] - vals[k]) * (s - x0) / (x1 - x0);
        let m = 0.5 * (a + b);
        total += (b - a) / 6.0 * (p(a) * rho(a) + 4.0 * p(m) * rho(m) + p(b) * rho(b));
    }
    total
}

/// Hat function of half-width `h` centred at `c`, peak 1.
#[inline]
pub fn hat(x: f64, c: f64, h: f64) -> f64 {
    (1.0 - (x - c).abs() / h).max(0.0)
}

/// Radical-inverse (van der Corput) sequence in base `b`, the coordinates of a Halton set.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let inv = 1.0 / b as f64;
    while i > 0 {
        f *= inv;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}
