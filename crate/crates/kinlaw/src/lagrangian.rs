//! Characteristic curves with frozen kinetic value, curve bundles seeded from the band
//! kinetic densities, the non-crossing check and the interaction functional `Q(t)`.
//!
//! Curve positions are stored unwrapped; the solution is sampled periodically.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goursat::EntropyFamily;
use crate::quad;
use crate::viscous::GridSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    /// Hypograph cut with `w_max − r ≤ ξ ≤ w_max`.
    Max,
    /// Epigraph cut with `w_min ≤ ξ ≤ w_min + r`.
    Min,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub xi: f64,
    pub band: Band,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    /// Per-step flag: the kinetic speed was clamped into the strip.
    pub clamp: Vec<bool>,
}

impl Curve {
    /// Position at time `t` by linear interpolation between samples.
    pub fn x_at(&self, t: f64) -> f64 {
        let n = self.t.len();
        if n == 1 {
            return self.x[0];
        }
        let asc = self.t[n - 1] >= self.t[0];
        let k = if asc { self.t.partition_point(|&s| s <= t) } else { self.t.partition_point(|&s| s >= t) };
        let k = k.clamp(1, n - 1);
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        let a = if t1 != t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
        self.x[k - 1] + a * (self.x[k] - self.x[k - 1])
    }
}

/// Band constants: essential range of `w`, band width and the two `ξ` levels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub w_min: f64,
    pub w_max: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
}

impl BandSpec {
    /// Range from the 0.1% and 99.9% quantiles of `w` over the window; `b` defaults to
    /// `w_max − r/2`.
    pub fn from_solution(sol: &GridSolution, r: f64, b: Option<f64>) -> Result<Self> {
        let mut ws: Vec<f64> = sol.u.iter().flatten().map(|s| sol.chart.to_riemann_unchecked(*s).0).collect();
        ws.sort_by(f64::total_cmp);
        let q = |p: f64| ws[((ws.len() - 1) as f64 * p).round() as usize];
        let (w_min, w_max) = (q(0.001), q(0.999));
        let spec = BandSpec { w_min, w_max, r, a: w_max - r, b: b.unwrap_or(w_max - 0.5 * r) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.w_min + self.r < self.w_max - self.r) {
            return Err(Error::Config(format!(
                "band width r = {} violates w_min + r < w_max - r on [{}, {}]",
                self.r, self.w_min, self.w_max
            )));
        }
        if !(self.a < self.b && self.b <= self.w_max) {
            return Err(Error::Config(format!("need a < b <= w_max, got a = {}, b = {}", self.a, self.b)));
        }
        Ok(())
    }

    /// `ξ`-range of a band.
    pub fn range(&self, band: Band) -> (f64, f64) {
        match band {
            Band::Max => (self.w_max - self.r, self.w_max),
            Band::Min => (self.w_min, self.w_min + self.r),
        }
    }
}

fn speed(sol: &GridSolution, family: &EntropyFamily, xi: f64, band: Band, t: f64, x: f64) -> (f64, bool) {
    let (w, z) = sol.chart.to_riemann_unchecked(sol.sample(t, x));
    family
        .kinetic_speed_side(xi, w, z, false, band == Band::Min)
        .expect("non-strict kinetic speed queries do not fail")
}

/// Traces `ẋ = λ₁[ξ](u(t, x))` with Heun steps from `(t0, x0)` to `t_end`, taking `substeps`
/// steps per snapshot interval. `t_end < t0` traces backward. Leaving the time window returns
/// the partial curve inside the error.
pub fn trace(
    sol: &GridSolution,
    family: &EntropyFamily,
    x0: f64,
    t0: f64,
    xi: f64,
    band: Band,
    t_end: f64,
    substeps: usize,
) -> Result<Curve> {
    let (lo, hi) = (sol.times[0], *sol.times.last().unwrap());
    if t0 < lo || t0 > hi {
        return Err(Error::Config(format!("start time {t0} outside the window [{lo}, {hi}]")));
    }
    let target = t_end.clamp(lo, hi);
    let forward = target >= t0;
    let mut marks: Vec<f64> = sol
        .times
        .iter()
        .copied()
        .filter(|&s| if forward { s > t0 && s < target } else { s < t0 && s > target })
        .collect();
    if !forward {
        marks.reverse();
    }
    marks.push(target);
    let mut c = Curve { xi, band, t: vec![t0], x: vec![x0], clamp: vec![false] };
    let (mut t, mut x) = (t0, x0);
    for &m in &marks {
        if m == t {
            continue;
        }
        let h = (m - t) / substeps.max(1) as f64;
        for k in 0..substeps.max(1) {
            let (v1, c1) = speed(sol, family, xi, band, t, x);
            let tn = if k + 1 == substeps.max(1) { m } else { t + h };
            let (v2, c2) = speed(sol, family, xi, band, tn, x + h * v1);
            x += 0.5 * h * (v1 + v2);
            t = tn;
            c.t.push(t);
            c.x.push(x);
            c.clamp.push(c1 || c2);
        }
    }
    if t_end != target {
        return Err(Error::WindowExit { t: target, partial: Box::new(c) });
    }
    Ok(c)
}

/// Weighted curves with their seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveBundle {
    pub band: Band,
    pub spec: BandSpec,
    pub curves: Vec<Curve>,
    pub weights: Vec<f64>,
    /// Fraction of curve samples outside the band law `w − r ≤ ξ ≤ w` (or its mirror).
    pub band_violation: f64,
}

/// Uncut band density `Θ[ξ](u)` restricted to the band and to the side of the cut.
fn band_limits(spec: &BandSpec, band: Band, w: f64) -> (f64, f64) {
    let (lo, hi) = spec.range(band);
    match band {
        Band::Max => (lo, hi.min(w)),
        Band::Min => (lo.max(w), hi),
    }
}

/// `∫ χ^band(t, x, ξ) dξ` at the state `(w, z)`.
fn band_mass(family: &EntropyFamily, spec: &BandSpec, band: Band, w: f64, z: f64) -> f64 {
    let (a, b) = band_limits(spec, band, w);
    if b <= a {
        return 0.0;
    }
    quad::linear_times(&family.xi, &family.theta_profile(w, z), &|_| 1.0, a, b)
}

/// Deterministic Halton seeding of `χ^band(t0, ·, ·)` by inverse CDFs, then tracing to `t_end`.
pub fn seed_bundle(
    sol: &GridSolution,
    family: &EntropyFamily,
    spec: BandSpec,
    band: Band,
    n_curves: usize,
    t_end: f64,
    substeps: usize,
) -> Result<CurveBundle> {
    spec.validate()?;
    if n_curves < 64 {
        return Err(Error::Config("n_curves must be at least 64".into()));
    }
    let chart = &sol.chart;
    let nx = sol.nx;
    let wz: Vec<(f64, f64)> = sol.u[0].iter().map(|s| chart.to_riemann_unchecked(*s)).collect();
    let dens: Vec<f64> = wz.iter().map(|&(w, z)| band_mass(family, &spec, band, w, z)).collect();
    // Periodic piecewise-linear density: cumulative trapezoid over nx cells.
    let mut cdf = vec![0.0; nx + 1];
    for i in 0..nx {
        cdf[i + 1] = cdf[i] + 0.5 * sol.dx * (dens[i] + dens[(i + 1) % nx]);
    }
    let total = cdf[nx];
    if !(total > 1e-14) {
        return Err(Error::EmptyBand);
    }
    let seeds: Vec<(f64, f64)> = (0..n_curves)
        .map(|k| {
            let h1 = quad::radical_inverse(k as u64 + 1, 2) * total;
            let h2 = quad::radical_inverse(k as u64 + 1, 3);
            let i = (cdf.partition_point(|&c| c <= h1) - 1).min(nx - 1);
            // Invert the quadratic CDF of a linear density on the cell.
            let (d0, d1) = (dens[i], dens[(i + 1) % nx]);
            let m = h1 - cdf[i];
            let s = if (d1 - d0).abs() < 1e-14 * (d0 + d1).max(1e-300) {
                m / (d0 * sol.dx).max(1e-300)
            } else {
                let slope = (d1 - d0) / sol.dx;
                let disc = (d0 * d0 + 2.0 * slope * m).max(0.0);
                ((disc.sqrt() - d0) / slope) / sol.dx
            };
            let x = (i as f64 + s.clamp(0.0, 1.0)) * sol.dx;
            let u = sol.sample(sol.times[0], x);
            let (w, z) = chart.to_riemann_unchecked(u);
            (x, sample_xi(family, &spec, band, w, z, h2))
        })
        .collect();
    let weight = total / n_curves as f64;
    bundle_from_seeds(sol, family, spec, band, &seeds, weight, t_end, substeps)
}

/// Conditional `ξ` at a state by inverting the band density in `ξ`.
fn sample_xi(family: &EntropyFamily, spec: &BandSpec, band: Band, w: f64, z: f64, u01: f64) -> f64 {
    let (a, b) = band_limits(spec, band, w);
    if b <= a {
        return 0.5 * (a + b);
    }
    let n = 64;
    let prof = family.theta_profile(w, z);
    let th = |xi: f64| {
        let (l, s) = quad::locate_sorted(&family.xi, xi);
        (1.0 - s) * prof[l] + s * prof[l + 1]
    };
    let h = (b - a) / n as f64;
    let mut cum = vec![0.0; n + 1];
    for k in 0..n {
        cum[k + 1] = cum[k] + 0.5 * h * (th(a + k as f64 * h) + th(a + (k + 1) as f64 * h));
    }
    let target = u01 * cum[n];
    let k = (cum.partition_point(|&c| c <= target).max(1) - 1).min(n - 1);
    let frac = if cum[k + 1] > cum[k] { (target - cum[k]) / (cum[k + 1] - cum[k]) } else { 0.5 };
    a + (k as f64 + frac) * h
}

/// Traces explicitly seeded curves `(x, ξ)` with a common weight.
pub fn bundle_from_seeds(
    sol: &GridSolution,
    family: &EntropyFamily,
    spec: BandSpec,
    band: Band,
    seeds: &[(f64, f64)],
    weight: f64,
    t_end: f64,
    substeps: usize,
) -> Result<CurveBundle> {
    let t0 = sol.times[0];
    let curves = seeds
        .par_iter()
        .map(|&(x, xi)| trace(sol, family, x, t0, xi, band, t_end, substeps))
        .collect::<Result<Vec<_>>>()?;
    let mut bad = 0usize;
    let mut count = 0usize;
    for c in &curves {
        for (t, x) in c.t.iter().zip(&c.x) {
            let w = sol.chart.to_riemann_unchecked(sol.sample(*t, *x)).0;
            let ok = match band {
                Band::Max => w - spec.r <= c.xi && c.xi <= w,
                Band::Min => w <= c.xi && c.xi <= w + spec.r,
            };
            count += 1;
            if !ok {
                bad += 1;
            }
        }
    }
    Ok(CurveBundle {
        band,
        spec,
        weights: vec![weight; curves.len()],
        curves,
        band_violation: bad as f64 / count.max(1) as f64,
    })
}

/// Box comparison of the bundle's empirical measure with `∫∫ χ^band(t)` at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub t: f64,
    pub empirical: Vec<f64>,
    pub field: Vec<f64>,
    /// `Σ|empirical − field| / Σ field`.
    pub relative_error: f64,
}

pub fn reconstruction_error(
    sol: &GridSolution,
    family: &EntropyFamily,
    bundle: &CurveBundle,
    t: f64,
    x_boxes: usize,
    xi_boxes: usize,
) -> Reconstruction {
    let spec = bundle.spec;
    let (lo, hi) = spec.range(bundle.band);
    let (bx, bk) = (sol.length / x_boxes as f64, (hi - lo) / xi_boxes as f64);
    let mut emp = vec![0.0; x_boxes * xi_boxes];
    for (c, w) in bundle.curves.iter().zip(&bundle.weights) {
        let x = c.x_at(t).rem_euclid(sol.length);
        let i = ((x / bx) as usize).min(x_boxes - 1);
        let k = (((c.xi - lo) / bk).max(0.0) as usize).min(xi_boxes - 1);
        emp[i * xi_boxes + k] += w;
    }
    // Field: trapezoid in x on a fine periodic grid, exact cut in ξ.
    let sub = 8;
    let nfine = x_boxes * sub * ((sol.nx / (x_boxes * sub)).max(1));
    let h = sol.length / nfine as f64;
    let mut field = vec![0.0; x_boxes * xi_boxes];
    for p in 0..nfine {
        let x = (p as f64 + 0.5) * h;
        let i = ((x / bx) as usize).min(x_boxes - 1);
        let (w, z) = sol.chart.to_riemann_unchecked(sol.sample(t, x));
        let prof = family.theta_profile(w, z);
        for k in 0..xi_boxes {
            let (a0, b0) = (lo + k as f64 * bk, lo + (k + 1) as f64 * bk);
            let (a, b) = match bundle.band {
                Band::Max => (a0, b0.min(w)),
                Band::Min => (a0.max(w), b0),
            };
            if b > a {
                field[i * xi_boxes + k] += h * quad::linear_times(&family.xi, &prof, &|_| 1.0, a, b);
            }
        }
    }
    let diff: f64 = emp.iter().zip(&field).map(|(e, f)| (e - f).abs()).sum();
    let tot: f64 = field.iter().sum();
    Reconstruction { t, empirical: emp, field, relative_error: if tot > 0.0 { diff / tot } else { 0.0 } }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub pairs: usize,
    pub violations: usize,
    pub fraction: f64,
}

/// Counts pairs `(γ, σ)` for which `γ − σ − kL` changes sign over the shared samples for some
/// periodic image shift `k ∈ {−1, 0, 1}`.
pub fn crossing_check(max: &CurveBundle, min: &CurveBundle, length: f64) -> CrossingReport {
    let violations: usize = max
        .curves
        .par_iter()
        .map(|g| {
            min.curves
                .iter()
                .filter(|s| {
                    let n = g.x.len().min(s.x.len());
                    (-1..=1).any(|k| {
                        let shift = k as f64 * length;
                        let (mut pos, mut neg) = (false, false);
                        for m in 0..n {
                            let d = g.x[m] - s.x[m] - shift;
                            pos |= d > 0.0;
                            neg |= d < 0.0;
                            if pos && neg {
                                return true;
                            }
                        }
                        false
                    })
                })
                .count()
        })
        .sum();
    let pairs = max.curves.len() * min.curves.len();
    CrossingReport { pairs, violations, fraction: violations as f64 / pairs.max(1) as f64 }
}

/// `Q(t)` with the boundary fluxes through `γ̄` (outflow) and `σ̄` (inflow).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QLedger {
    pub t: Vec<f64>,
    pub q: Vec<f64>,
    pub f_out: Vec<f64>,
    pub f_in: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r_bar: f64,
    /// `c²(b − a)²/2`.
    pub predicted_rate: f64,
}

impl QLedger {
    /// Largest increase of `Q` over a single slab.
    pub fn max_slab_increase(&self) -> f64 {
        self.q.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Time average of `F_out` by the trapezoid rule.
    pub fn mean_f_out(&self) -> f64 {
        mean(&self.t, &self.f_out)
    }

    pub fn mean_f_in(&self) -> f64 {
        mean(&self.t, &self.f_in)
    }
}

fn mean(t: &[f64], v: &[f64]) -> f64 {
    let w = quad::trapezoid_weights(t);
    let span = t.last().unwrap_or(&0.0) - t.first().unwrap_or(&0.0);
    if span <= 0.0 {
        return v.first().copied().unwrap_or(0.0);
    }
    w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / span
}

/// `∫_lo^hi (Θ·s − Ξ) dξ` over the band part `[a, min(b, w)]` at state `(w, z)`.
fn band_flux(family: &EntropyFamily, a: f64, b: f64, w: f64, z: f64, s: f64) -> f64 {
    let hi = b.min(w);
    if hi <= a {
        return 0.0;
    }
    let one = |_: f64| 1.0;
    s * quad::linear_times(&family.xi, &family.theta_profile(w, z), &one, a, hi)
        - quad::linear_times(&family.xi, &family.flux_profile(w, z), &one, a, hi)
}

/// `F_out = ∫ χ^max(γ̄)(λ₁[b] − λ₁[ξ]) dξ` is the mass left behind by `γ̄`; `F_in` is the mass
/// swept in by `σ̄`, so `dQ/dt = F_in − F_out`.
///
/// Evaluates `Q`, `F_out` and `F_in` at the solution's snapshot times. The curves must be
/// sampled at those times (as produced by [`trace`]).
pub fn q_functional(
    sol: &GridSolution,
    family: &EntropyFamily,
    gamma: &Curve,
    sigma: &Curve,
    spec: BandSpec,
) -> Result<QLedger> {
    let (a, b) = (spec.a, spec.b);
    let c = family.strip.c;
    let mut led = QLedger {
        t: Vec::new(),
        q: Vec::new(),
        f_out: Vec::new(),
        f_in: Vec::new(),
        a,
        b,
        c,
        r_bar: family.strip.r_bar,
        predicted_rate: 0.5 * c * c * (b - a).powi(2),
    };
    let chart = &sol.chart;
    let t_last = gamma.t.last().copied().unwrap_or(0.0).min(sigma.t.last().copied().unwrap_or(0.0));
    for &t in sol.times.iter().filter(|&&t| t <= t_last + 1e-12) {
        let (xg, xs) = (gamma.x_at(t), sigma.x_at(t));
        if xg > xs {
            return Err(Error::Geometry { t_cross: t, partial: Box::new(led) });
        }
        let rho = |x: f64| {
            let (w, z) = chart.to_riemann_unchecked(sol.sample(t, x));
            if b.min(w) <= a {
                return 0.0;
            }
            quad::linear_times(&family.xi, &family.theta_profile(w, z), &|_| 1.0, a, b.min(w))
        };
        // Trapezoid over the grid nodes strictly between the curves plus both end points.
        let mut pts = vec![xg];
        let first = (xg / sol.dx).floor() as i64 + 1;
        let mut k = first;
        while (k as f64) * sol.dx < xs {
            pts.push(k as f64 * sol.dx);
            k += 1;
        }
        pts.push(xs);
        let vals: Vec<f64> = pts.iter().map(|&x| rho(x)).collect();
        let q: f64 = pts.windows(2).zip(vals.windows(2)).map(|(p, v)| 0.5 * (p[1] - p[0]) * (v[0] + v[1])).sum();

        let (wg, zg) = chart.to_riemann_unchecked(sol.sample(t, xg));
        let lb = family.kinetic_speed(b, wg, zg, false)?.0;
        let f_out = band_flux(family, a, b, wg, zg, lb);
        let (ws, zs) = chart.to_riemann_unchecked(sol.sample(t, xs));
        let ls = family.kinetic_speed_side(sigma.xi, ws, zs, false, sigma.band == Band::Min)?.0;
        let f_in = band_flux(family, a, b, ws, zs, ls);
        led.t.push(t);
        led.q.push(q);
        led.f_out.push(f_out);
        led.f_in.push(f_in);
    }
    Ok(led)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goursat::{build_family, compute_gh, uniform_cuts, WGrid};
    use crate::system::SystemChart;
    use crate::viscous::{decoupled_exact, SineMode};

    fn fam() -> EntropyFamily {
        let chart = SystemChart::Decoupled;
        let gh = compute_gh(&chart, WGrid::for_chart(&chart, 129, 129).unwrap()).unwrap();
        build_family(&chart, gh.clone(), &uniform_cuts(&gh.grid.w, 65), &uniform_cuts(&gh.grid.z, 65)).unwrap()
    }

    fn smooth(nx: usize) -> GridSolution {
        let w = SineMode { mean: 0.1, amp: 0.3, k: 1, phase: 0.0 };
        let z = SineMode { mean: 0.0, amp: 0.2, k: 1, phase: 0.5 * std::f64::consts::PI };
        let dx = 2.0 / nx as f64;
        let nt = (0.5 / (0.5 * dx)).round() as usize + 1;
        let times = (0..nt).map(|n| n as f64 * 0.5 * dx).collect();
        GridSolution::from_fn(&SystemChart::Decoupled, nx, 2.0, times, &|t, x| decoupled_exact(&w, &z, 2.0, t, x)).unwrap()
    }

    fn constant(u: [f64; 2]) -> GridSolution {
        GridSolution::from_fn(&SystemChart::Decoupled, 64, 2.0, (0..11).map(|n| n as f64 * 0.05).collect(), &|_, _| u).unwrap()
    }

    #[test]
    fn decoupled_slope_is_xi() {
        let f = fam();
        let sol = smooth(128);
        let c = trace(&sol, &f, 0.5, 0.0, 0.3, Band::Max, 0.5, 2).unwrap();
        // The strip clamps ξ into [w − r̄, w]; with r̄ = 2 that only binds where w < ξ.
        let (t1, x1) = (*c.t.last().unwrap(), *c.x.last().unwrap());
        assert!(c.clamp.iter().all(|&f| !f));
        assert!((x1 - 0.5 - 0.3 * t1).abs() < 1e-12);
        let back = trace(&sol, &f, x1, 0.5, 0.3, Band::Max, 0.0, 2).unwrap();
        assert!((back.x.last().unwrap() - 0.5).abs() < 1e-12);
        match trace(&sol, &f, 0.5, 0.0, 0.3, Band::Max, 0.7, 2) {
            Err(Error::WindowExit { partial, .. }) => assert_eq!(*partial.t.last().unwrap(), 0.5),
            other => panic!("expected a window exit, got {other:?}"),
        }
    }

    #[test]
    fn rk2_self_convergence_on_p_system() {
        let chart = SystemChart::p_system();
        let gh = compute_gh(&chart, WGrid::for_chart(&chart, 129, 129).unwrap()).unwrap();
        let f = build_family(&chart, gh.clone(), &uniform_cuts(&gh.grid.w, 65), &uniform_cuts(&gh.grid.z, 65)).unwrap();
        let sol = GridSolution::from_fn(&chart, 128, 1.0, (0..11).map(|n| n as f64 * 0.1).collect(), &|t, x| {
            let w = -0.6 + 0.1 * (2.0 * std::f64::consts::PI * (x - 0.3 * t)).sin();
            chart.from_riemann(w, 0.6).unwrap()
        })
        .unwrap();
        let end = |s| *trace(&sol, &f, 0.2, 0.0, -0.62, Band::Max, 1.0, s).unwrap().x.last().unwrap();
        let (a, b, c) = (end(4), end(8), end(16));
        let ratio = (a - b).abs() / (b - c).abs();
        assert!(ratio > 3.0, "{ratio}");
    }

    #[test]
    fn constant_state_bundle() {
        let f = fam();
        let sol = constant([0.3, 0.0]);
        let spec = BandSpec { w_min: -0.2, w_max: 0.4, r: 0.15, a: 0.25, b: 0.325 };
        let bundle = seed_bundle(&sol, &f, spec, Band::Max, 256, 0.5, 2).unwrap();
        let slopes: Vec<f64> = bundle.curves.iter().map(|c| c.xi).collect();
        for c in &bundle.curves {
            assert!((c.x.last().unwrap() - c.x[0] - 0.5 * c.xi).abs() < 1e-12);
        }
        assert!(slopes.iter().all(|&s| (0.25..=0.3).contains(&s)));
        // Seeds are uniform in x.
        let mut xs: Vec<f64> = bundle.curves.iter().map(|c| c.x[0]).collect();
        xs.sort_by(f64::total_cmp);
        let gaps = xs.windows(2).map(|p| p[1] - p[0]).fold(0.0, f64::max);
        assert!(gaps < 4.0 * 2.0 / 256.0);
        let row = |x0: f64| (0..8).map(|k| (x0 + 0.05 * k as f64, 0.28)).collect::<Vec<_>>();
        let left = bundle_from_seeds(&sol, &f, spec, Band::Max, &row(0.1), 1.0, 0.5, 2).unwrap();
        let right = bundle_from_seeds(&sol, &f, spec, Band::Max, &row(1.1), 1.0, 0.5, 2).unwrap();
        assert_eq!(crossing_check(&left, &right, 2.0).violations, 0);
        assert!(matches!(seed_bundle(&sol, &f, spec, Band::Min, 256, 0.5, 2), Err(Error::EmptyBand)));
    }

    #[test]
    fn seeding_reconstructs_initial_density() {
        let f = fam();
        let sol = smooth(128);
        let spec = BandSpec::from_solution(&sol, 0.15, None).unwrap();
        let n = 1024;
        let bundle = seed_bundle(&sol, &f, spec, Band::Max, n, 0.5, 2).unwrap();
        let rec = reconstruction_error(&sol, &f, &bundle, 0.0, 8, 4);
        assert!(rec.relative_error <= 2.0 / (n as f64).sqrt(), "{}", rec.relative_error);
    }

    #[test]
    fn swapped_bundles_are_detected() {
        let f = fam();
        let sol = smooth(128);
        let spec = BandSpec::from_solution(&sol, 0.15, None).unwrap();
        let slow: Vec<(f64, f64)> = (0..16).map(|k| (0.9 + 0.1 * k as f64 / 16.0, -0.1)).collect();
        let fast: Vec<(f64, f64)> = (0..16).map(|k| (0.8 + 0.1 * k as f64 / 16.0, 0.35)).collect();
        let g = bundle_from_seeds(&sol, &f, spec, Band::Max, &slow, 1.0, 0.5, 2).unwrap();
        let s = bundle_from_seeds(&sol, &f, spec, Band::Min, &fast, 1.0, 0.5, 2).unwrap();
        assert!(crossing_check(&g, &s, 2.0).fraction > 0.5);
    }

    #[test]
    fn q_on_constant_states() {
        let f = fam();
        let spec = BandSpec { w_min: -0.2, w_max: 0.4, r: 0.15, a: 0.25, b: 0.325 };
        let sol = constant([0.35, 0.0]);
        let g = trace(&sol, &f, 0.2, 0.0, spec.b, Band::Max, 0.5, 2).unwrap();
        let s = trace(&sol, &f, 1.2, 0.0, spec.b, Band::Max, 0.5, 2).unwrap();
        let led = q_functional(&sol, &f, &g, &s, spec).unwrap();
        // Both curves move at λ₁[b] = b, so the window keeps its length and mass.
        let expect = 1.0 * (spec.b - spec.a);
        assert!(led.q.iter().all(|q| (q - expect).abs() < 1e-12), "{:?}", led.q);
        let low = constant([0.0, 0.0]);
        // Equal speeds on both sides: what leaves through γ̄ enters through σ̄.
        let closed = (spec.b - spec.a).powi(2) / 2.0;
        assert!(led.f_out.iter().zip(&led.f_in).all(|(o, i)| (o - closed).abs() < 1e-12 && (i - closed).abs() < 1e-12));
        let led0 = q_functional(&low, &f, &g, &s, spec).unwrap();
        assert!(led0.q.iter().chain(&led0.f_out).chain(&led0.f_in).all(|&v| v == 0.0));
    }

    #[test]
    fn crossing_curves_raise_geometry_error() {
        let f = fam();
        let spec = BandSpec { w_min: -0.2, w_max: 0.4, r: 0.15, a: 0.25, b: 0.325 };
        let sol = constant([0.35, 0.0]);
        let g = trace(&sol, &f, 0.5, 0.0, 0.34, Band::Max, 0.5, 2).unwrap();
        let s = trace(&sol, &f, 0.52, 0.0, 0.26, Band::Max, 0.5, 2).unwrap();
        match q_functional(&sol, &f, &g, &s, spec) {
            Err(Error::Geometry { t_cross, partial }) => {
                assert!(t_cross > 0.0 && !partial.t.is_empty());
            }
            other => panic!("expected a geometry error, got {other:?}"),
        }
    }
}
