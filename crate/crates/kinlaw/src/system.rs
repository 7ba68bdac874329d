//! 2×2 strictly hyperbolic systems, their eigenstructure and Riemann-invariant charts.
//!
//! Sign conventions: `w` is the invariant whose gradient is parallel to the first left
//! eigenvector and `λ₁ < λ₂`. For the p-system the invariants are oriented so that
//! `∂_w λ₁ > 0` and `∂_z λ₂ > 0` on `W`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type State = [f64; 2];

/// Closed rectangle `[w_lo, w_hi] × [z_lo, z_hi]` in Riemann coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub w_lo: f64,
    pub w_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl Rect {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.w_lo + self.w_hi), 0.5 * (self.z_lo + self.z_hi))
    }

    pub fn contains(&self, w: f64, z: f64) -> bool {
        w >= self.w_lo && w <= self.w_hi && z >= self.z_lo && z <= self.z_hi
    }

    fn contains_open(&self, w: f64, z: f64) -> bool {
        w > self.w_lo && w < self.w_hi && z > self.z_lo && z < self.z_hi
    }
}

fn default_p_w() -> [f64; 2] {
    [-0.8, -0.4]
}

fn default_p_z() -> [f64; 2] {
    [0.4, 0.8]
}

/// Built-in charts, selected by `id` in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum SystemChart {
    /// `f = (u₁²/2, u₂²/2 + 4u₂)` on `(-1, 1)²`.
    Decoupled,
    /// `f(a, v) = (-v, -σ(a))`, `σ(a) = a + a³`; `U` is the preimage of the rectangle `W`.
    PSystem {
        #[serde(default = "default_p_w")]
        w: [f64; 2],
        #[serde(default = "default_p_z")]
        z: [f64; 2],
    },
    /// `f = (a u₁, b u₂)` with `a < b`, on `(-1, 1)²`.
    Linear { a: f64, b: f64 },
    /// `f = (u₁/2, u₂²/2 + 4u₂)`: first field linearly degenerate.
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenStructure {
    pub lambda1: f64,
    pub lambda2: f64,
    pub r1: State,
    pub r2: State,
    pub l1: State,
    pub l2: State,
}

/// Partial derivatives of the wave speeds with respect to the Riemann coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedDerivs {
    pub l1w: f64,
    pub l1z: f64,
    pub l2w: f64,
    pub l2z: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnlCertificate {
    pub c_bar: f64,
    pub gap: f64,
    pub samples: usize,
}

const GAP_TOL: f64 = 1e-8;
const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_TOL: f64 = 1e-12;

fn sigma(a: f64) -> f64 {
    a + a * a * a
}

fn sigma_prime(a: f64) -> f64 {
    1.0 + 3.0 * a * a
}

/// `K(a) = ∫₀ᵃ √σ'(s) ds` in closed form.
fn k_int(a: f64) -> f64 {
    let s3 = 3f64.sqrt();
    0.5 * a * sigma_prime(a).sqrt() + (s3 * a).asinh() / (2.0 * s3)
}

/// Inverse of `K` by safeguarded Newton; `K` is strictly increasing with `K' ≥ 1`.
fn k_inv(target: f64) -> f64 {
    let mut a = target;
    for _ in 0..60 {
        let step = (k_int(a) - target) / sigma_prime(a).sqrt();
        a -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    a
}

impl SystemChart {
    pub fn id(&self) -> &'static str {
        match self {
            SystemChart::Decoupled => "decoupled",
            SystemChart::PSystem { .. } => "p-system",
            SystemChart::Linear { .. } => "linear",
            SystemChart::Degenerate => "degenerate",
        }
    }

    pub fn p_system() -> Self {
        SystemChart::PSystem { w: default_p_w(), z: default_p_z() }
    }

    /// Checks that the parameters describe a valid chart.
    pub fn validate(&self) -> Result<()> {
        match self {
            SystemChart::Linear { a, b } if !(a < b) => {
                Err(Error::Config(format!("linear chart needs a < b, got a = {a}, b = {b}")))
            }
            SystemChart::PSystem { w, z } => {
                if !(w[0] < w[1] && z[0] < z[1]) {
                    return Err(Error::Config("p-system rectangle bounds must be increasing".into()));
                }
                // a depends on z - w, v on w + z; both are extremal at the corners.
                let a_lo = k_inv(0.5 * (z[0] - w[1]));
                let a_hi = k_inv(0.5 * (z[1] - w[0]));
                let v_max = 0.5 * (w[0] + z[0]).abs().max((w[1] + z[1]).abs());
                if a_lo <= 0.2 || a_hi >= 1.0 || v_max >= 0.5 {
                    return Err(Error::Config(format!(
                        "p-system rectangle leaves a in (0.2, 1), v in (-0.5, 0.5): a in [{a_lo:.4}, {a_hi:.4}], |v| <= {v_max:.4}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn rect(&self) -> Rect {
        match self {
            SystemChart::PSystem { w, z } => Rect { w_lo: w[0], w_hi: w[1], z_lo: z[0], z_hi: z[1] },
            _ => Rect { w_lo: -1.0, w_hi: 1.0, z_lo: -1.0, z_hi: 1.0 },
        }
    }

    /// Membership in the open state domain `U`.
    pub fn in_domain(&self, u: State) -> bool {
        if !(u[0].is_finite() && u[1].is_finite()) {
            return false;
        }
        match self {
            SystemChart::PSystem { .. } => {
                let (w, z) = self.riemann_raw(u);
                u[0] > 0.0 && self.rect().contains_open(w, z)
            }
            _ => u[0].abs() < 1.0 && u[1].abs() < 1.0,
        }
    }

    /// `f(u)` without the domain check; used inside solver loops.
    #[inline]
    pub fn flux_raw(&self, u: State) -> State {
        match self {
            SystemChart::Decoupled => [0.5 * u[0] * u[0], 0.5 * u[1] * u[1] + 4.0 * u[1]],
            SystemChart::PSystem { .. } => [-u[1], -sigma(u[0])],
            SystemChart::Linear { a, b } => [a * u[0], b * u[1]],
            SystemChart::Degenerate => [0.5 * u[0], 0.5 * u[1] * u[1] + 4.0 * u[1]],
        }
    }

    pub fn eval_flux(&self, u: State) -> Result<State> {
        if !self.in_domain(u) {
            return Err(Error::Domain(u[0], u[1]));
        }
        Ok(self.flux_raw(u))
    }

    pub fn jacobian(&self, u: State) -> [[f64; 2]; 2] {
        match self {
            SystemChart::Decoupled => [[u[0], 0.0], [0.0, u[1] + 4.0]],
            SystemChart::PSystem { .. } => [[0.0, -1.0], [-sigma_prime(u[0]), 0.0]],
            SystemChart::Linear { a, b } => [[*a, 0.0], [0.0, *b]],
            SystemChart::Degenerate => [[0.5, 0.0], [0.0, u[1] + 4.0]],
        }
    }

    pub fn eigen_structure(&self, u: State) -> Result<EigenStructure> {
        if !self.in_domain(u) {
            return Err(Error::Domain(u[0], u[1]));
        }
        let [[p, q], [r, s]] = self.jacobian(u);
        let mean = 0.5 * (p + s);
        let disc = (0.25 * (p - s) * (p - s) + q * r).max(0.0).sqrt();
        let (lambda1, lambda2) = (mean - disc, mean + disc);
        if lambda2 - lambda1 < GAP_TOL {
            return Err(Error::Hyperbolicity { gap: lambda2 - lambda1, u0: u[0], u1: u[1] });
        }
        let r1 = right_vector(p, q, r, s, lambda1);
        let r2 = right_vector(p, q, r, s, lambda2);
        // Rows of R⁻¹ are the dual left eigenvectors.
        let det = r1[0] * r2[1] - r2[0] * r1[1];
        let l1 = [r2[1] / det, -r2[0] / det];
        let l2 = [-r1[1] / det, r1[0] / det];
        Ok(EigenStructure { lambda1, lambda2, r1, r2, l1, l2 })
    }

    fn riemann_raw(&self, u: State) -> (f64, f64) {
        match self {
            SystemChart::PSystem { .. } => {
                let k = k_int(u[0]);
                (-u[1] - k, k - u[1])
            }
            _ => (u[0], u[1]),
        }
    }

    pub fn to_riemann(&self, u: State) -> Result<(f64, f64)> {
        if !self.in_domain(u) {
            return Err(Error::Domain(u[0], u[1]));
        }
        Ok(self.riemann_raw(u))
    }

    /// Riemann coordinates without the domain check.
    #[inline]
    pub fn to_riemann_unchecked(&self, u: State) -> (f64, f64) {
        self.riemann_raw(u)
    }

    pub fn from_riemann(&self, w: f64, z: f64) -> Result<State> {
        if !self.rect().contains(w, z) {
            return Err(Error::Domain(w, z));
        }
        match self {
            SystemChart::PSystem { .. } => self.newton_inverse(w, z),
            _ => Ok([w, z]),
        }
    }

    fn center_state(&self) -> State {
        // Nominal seed in the middle of the admissible strip; refined once per call site.
        [0.6, 0.0]
    }

    fn newton_inverse(&self, w: f64, z: f64) -> Result<State> {
        let residual = |u: State| {
            let (pw, pz) = self.riemann_raw(u);
            [pw - w, pz - z]
        };
        let norm = |f: [f64; 2]| f[0].abs().max(f[1].abs());
        let mut u = self.center_state();
        let mut f = residual(u);
        for _ in 0..NEWTON_MAX_ITERS {
            if norm(f) <= NEWTON_TOL {
                return Ok(u);
            }
            // J = [[-k, -1], [k, -1]], det = 2k.
            let k = sigma_prime(u[0]).sqrt();
            let det = 2.0 * k;
            let da = -(-f[0] + f[1]) / det;
            let dv = -(-k * f[0] - k * f[1]) / det;
            let mut step = 1.0;
            loop {
                let trial = [u[0] + step * da, u[1] + step * dv];
                let ft = residual(trial);
                if norm(ft) < norm(f) || step < 1e-6 {
                    u = trial;
                    f = ft;
                    break;
                }
                step *= 0.5;
            }
        }
        if norm(f) <= NEWTON_TOL {
            Ok(u)
        } else {
            Err(Error::Convergence { w, z, iters: NEWTON_MAX_ITERS })
        }
    }

    /// Gradients of `w` and `z` with respect to the state.
    pub fn riemann_gradients(&self, u: State) -> (State, State) {
        match self {
            SystemChart::PSystem { .. } => {
                let k = sigma_prime(u[0]).sqrt();
                ([-k, -1.0], [k, -1.0])
            }
            _ => ([1.0, 0.0], [0.0, 1.0]),
        }
    }

    /// Wave speeds as functions of the Riemann coordinates.
    #[inline]
    pub fn speeds(&self, w: f64, z: f64) -> (f64, f64) {
        match self {
            SystemChart::Decoupled => (w, z + 4.0),
            SystemChart::PSystem { .. } => {
                let k = sigma_prime(k_inv(0.5 * (z - w))).sqrt();
                (-k, k)
            }
            SystemChart::Linear { a, b } => (*a, *b),
            SystemChart::Degenerate => (0.5, z + 4.0),
        }
    }

    #[inline]
    pub fn speed_derivs(&self, w: f64, z: f64) -> SpeedDerivs {
        match self {
            SystemChart::Decoupled => SpeedDerivs { l1w: 1.0, l1z: 0.0, l2w: 0.0, l2z: 1.0 },
            SystemChart::PSystem { .. } => {
                // a = K⁻¹((z - w)/2), so ∂a/∂z = -∂a/∂w = 1/(2k) and k' = 3a/k.
                let a = k_inv(0.5 * (z - w));
                let d = 3.0 * a / (2.0 * sigma_prime(a));
                SpeedDerivs { l1w: d, l1z: -d, l2w: -d, l2z: d }
            }
            SystemChart::Linear { .. } => SpeedDerivs { l1w: 0.0, l1z: 0.0, l2w: 0.0, l2z: 0.0 },
            SystemChart::Degenerate => SpeedDerivs { l1w: 0.0, l1z: 0.0, l2w: 0.0, l2z: 1.0 },
        }
    }

    /// Supremum of `|λ₁|, |λ₂|` over `W`, sampled on a 33×33 grid.
    pub fn max_speed(&self) -> f64 {
        let r = self.rect();
        let n = 33;
        let mut m: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let w = r.w_lo + (r.w_hi - r.w_lo) * i as f64 / (n - 1) as f64;
                let z = r.z_lo + (r.z_hi - r.z_lo) * j as f64 / (n - 1) as f64;
                let (l1, l2) = self.speeds(w, z);
                m = m.max(l1.abs()).max(l2.abs());
            }
        }
        m
    }

    /// Hyperbolicity gap and GNL lower bound on an `n × n` node grid of `W`.
    pub fn check_hyperbolic_gnl(&self, n_samples: usize) -> Result<GnlCertificate> {
        if n_samples < 16 {
            return Err(Error::Config(format!("need at least 16 samples per axis, got {n_samples}")));
        }
        let r = self.rect();
        let hw = 1e-5 * (r.w_hi - r.w_lo);
        let hz = 1e-5 * (r.z_hi - r.z_lo);
        let mut gap = f64::INFINITY;
        let mut dmin = f64::INFINITY;
        let n = n_samples;
        for i in 0..n {
            for j in 0..n {
                let w = r.w_lo + (r.w_hi - r.w_lo) * i as f64 / (n - 1) as f64;
                let z = r.z_lo + (r.z_hi - r.z_lo) * j as f64 / (n - 1) as f64;
                let (l1, l2) = self.speeds(w, z);
                gap = gap.min(l2 - l1);
                let d1 = (self.speeds(w + hw, z).0 - self.speeds(w - hw, z).0) / (2.0 * hw);
                let d2 = (self.speeds(w, z + hz).1 - self.speeds(w, z - hz).1) / (2.0 * hz);
                dmin = dmin.min(d1).min(d2);
            }
        }
        if gap <= 0.0 {
            let (w, z) = r.center();
            return Err(Error::Hyperbolicity { gap, u0: w, u1: z });
        }
        // Round-off in the difference quotient of an exactly constant speed is not curvature.
        if dmin <= 1e-8 {
            return Err(Error::NotGnl { min: dmin });
        }
        Ok(GnlCertificate { c_bar: 0.9 * dmin, gap, samples: n })
    }
}

fn right_vector(p: f64, q: f64, r: f64, s: f64, lambda: f64) -> State {
    // Two candidate null vectors of (A - λI); take the better conditioned one.
    let c1 = [q, lambda - p];
    let c2 = [lambda - s, r];
    let n1 = c1[0].hypot(c1[1]);
    let n2 = c2[0].hypot(c2[1]);
    let (v, n) = if n1 >= n2 { (c1, n1) } else { (c2, n2) };
    let mut v = if n > 0.0 {
        [v[0] / n, v[1] / n]
    } else if (lambda - p).abs() <= (lambda - s).abs() {
        [1.0, 0.0]
    } else {
        [0.0, 1.0]
    };
    let lead = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
    if lead < 0.0 {
        v = [-v[0], -v[1]];
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dot(a: State, b: State) -> f64 {
        a[0] * b[0] + a[1] * b[1]
    }

    #[test]
    fn flux_examples() {
        let d = SystemChart::Decoupled;
        assert_eq!(d.eval_flux([0.0, 0.0]).unwrap(), [0.0, 0.0]);
        let f = d.eval_flux([0.8, -0.4]).unwrap();
        assert!((f[0] - 0.32).abs() < 1e-15 && (f[1] + 1.52).abs() < 1e-15);
        let p = SystemChart::p_system();
        let f = p.eval_flux([0.5, 0.1]).unwrap();
        assert!((f[0] + 0.1).abs() < 1e-15 && (f[1] + 0.625).abs() < 1e-15);
        assert!(matches!(d.eval_flux([1.5, 0.0]), Err(Error::Domain(..))));
    }

    #[test]
    fn eigen_examples() {
        let e = SystemChart::Decoupled.eigen_structure([0.8, -0.4]).unwrap();
        assert!((e.lambda1 - 0.8).abs() < 1e-15 && (e.lambda2 - 3.6).abs() < 1e-15);
        assert_eq!(e.r1, [1.0, 0.0]);
        assert_eq!(e.r2, [0.0, 1.0]);
        let e = SystemChart::p_system().eigen_structure([0.5, 0.1]).unwrap();
        assert!((e.lambda1 + 1.75f64.sqrt()).abs() < 1e-14);
        assert!((e.lambda2 - 1.75f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn p_system_invariant_orientation() {
        // ∇w ∥ ℓ₁ and ∇z ∥ ℓ₂ (zero 2D cross product), checked by finite differences.
        let p = SystemChart::p_system();
        let u = [0.5, 0.1];
        let e = p.eigen_structure(u).unwrap();
        let h = 1e-6;
        let (wa, za) = p.to_riemann([u[0] + h, u[1]]).unwrap();
        let (wb, zb) = p.to_riemann([u[0] - h, u[1]]).unwrap();
        let (wc, zc) = p.to_riemann([u[0], u[1] + h]).unwrap();
        let (wd, zd) = p.to_riemann([u[0], u[1] - h]).unwrap();
        let gw = [(wa - wb) / (2.0 * h), (wc - wd) / (2.0 * h)];
        let gz = [(za - zb) / (2.0 * h), (zc - zd) / (2.0 * h)];
        assert!((gw[0] * e.l1[1] - gw[1] * e.l1[0]).abs() < 1e-8);
        assert!((gz[0] * e.l2[1] - gz[1] * e.l2[0]).abs() < 1e-8);
    }

    #[test]
    fn round_trip_on_64_grid() {
        for chart in [SystemChart::Decoupled, SystemChart::p_system()] {
            let r = chart.rect();
            let mut worst: f64 = 0.0;
            for i in 0..64 {
                for j in 0..64 {
                    let w = r.w_lo + (r.w_hi - r.w_lo) * (i as f64 + 0.5) / 64.0;
                    let z = r.z_lo + (r.z_hi - r.z_lo) * (j as f64 + 0.5) / 64.0;
                    let u = chart.from_riemann(w, z).unwrap();
                    let (w2, z2) = chart.to_riemann(u).unwrap();
                    worst = worst.max((w - w2).abs()).max((z - z2).abs());
                }
            }
            assert!(worst <= 1e-10, "{}: {worst}", chart.id());
        }
        let p = SystemChart::p_system();
        let (w, z) = p.to_riemann([0.5, 0.1]).unwrap();
        let u = p.from_riemann(w, z).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-10 && (u[1] - 0.1).abs() < 1e-10);
    }

    #[test]
    fn corner_maps_to_lower_corner() {
        let p = SystemChart::p_system();
        let r = p.rect();
        let u = p.from_riemann(r.w_lo, r.z_lo).unwrap();
        let (w, z) = p.riemann_raw(u);
        assert!((w - r.w_lo).abs() < 1e-12 && (z - r.z_lo).abs() < 1e-12);
        assert_eq!(SystemChart::Decoupled.to_riemann([0.3, -0.2]).unwrap(), (0.3, -0.2));
    }

    #[test]
    fn gnl_certificates() {
        let c = SystemChart::Decoupled.check_hyperbolic_gnl(17).unwrap();
        assert!((c.c_bar - 0.9).abs() < 1e-8);
        assert!((c.gap - 2.0).abs() < 1e-12);
        let c = SystemChart::p_system().check_hyperbolic_gnl(32).unwrap();
        assert!(c.c_bar > 0.0 && c.gap > 0.0);
        assert!(matches!(
            SystemChart::Linear { a: -1.0, b: 1.0 }.check_hyperbolic_gnl(16),
            Err(Error::NotGnl { .. })
        ));
        assert!(matches!(SystemChart::Degenerate.check_hyperbolic_gnl(16), Err(Error::NotGnl { .. })));
        assert!(SystemChart::Decoupled.check_hyperbolic_gnl(8).is_err());
    }

    #[test]
    fn analytic_speed_derivatives_match_differences() {
        let p = SystemChart::p_system();
        let (w, z) = (-0.6, 0.55);
        let d = p.speed_derivs(w, z);
        for h in [1e-2, 5e-3] {
            let fd = |dw: f64, dz: f64, k: usize| {
                let a = p.speeds(w + dw, z + dz);
                let b = p.speeds(w - dw, z - dz);
                if k == 0 { (a.0 - b.0) / (2.0 * (dw + dz)) } else { (a.1 - b.1) / (2.0 * (dw + dz)) }
            };
            // Centered differences: O(h²) agreement.
            assert!((fd(h, 0.0, 0) - d.l1w).abs() < 10.0 * h * h);
            assert!((fd(0.0, h, 0) - d.l1z).abs() < 10.0 * h * h);
            assert!((fd(h, 0.0, 1) - d.l2w).abs() < 10.0 * h * h);
            assert!((fd(0.0, h, 1) - d.l2z).abs() < 10.0 * h * h);
        }
        assert!(d.l1w > 0.0 && d.l2z > 0.0);
    }

    #[test]
    fn p_system_rect_validation() {
        assert!(SystemChart::p_system().validate().is_ok());
        let bad = SystemChart::PSystem { w: [-1.5, -0.4], z: [0.4, 0.8] };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn eigen_normalization(a in 0.3f64..0.7, v in -0.15f64..0.15) {
            let p = SystemChart::p_system();
            prop_assume!(p.in_domain([a, v]));
            let e = p.eigen_structure([a, v]).unwrap();
            prop_assert!((dot(e.l1, e.r1) - 1.0).abs() < 1e-12);
            prop_assert!((dot(e.l2, e.r2) - 1.0).abs() < 1e-12);
            prop_assert!(dot(e.l1, e.r2).abs() < 1e-12);
            prop_assert!(dot(e.l2, e.r1).abs() < 1e-12);
            let j = p.jacobian([a, v]);
            for (lam, r) in [(e.lambda1, e.r1), (e.lambda2, e.r2)] {
                let res0 = j[0][0] * r[0] + j[0][1] * r[1] - lam * r[0];
                let res1 = j[1][0] * r[0] + j[1][1] * r[1] - lam * r[1];
                prop_assert!(res0.abs() < 1e-12 && res1.abs() < 1e-12);
            }
            prop_assert!(e.lambda1 < e.lambda2);
        }

        #[test]
        fn decoupled_eigen_normalization(u0 in -0.99f64..0.99, u1 in -0.99f64..0.99) {
            let e = SystemChart::Decoupled.eigen_structure([u0, u1]).unwrap();
            prop_assert!((dot(e.l1, e.r1) - 1.0).abs() < 1e-12);
            prop_assert!(dot(e.l1, e.r2).abs() < 1e-12);
        }

        #[test]
        fn p_round_trip(s in 0.0f64..1.0, t in 0.0f64..1.0) {
            let p = SystemChart::p_system();
            let r = p.rect();
            let w = r.w_lo + s * (r.w_hi - r.w_lo);
            let z = r.z_lo + t * (r.z_hi - r.z_lo);
            let u = p.from_riemann(w, z).unwrap();
            let (w2, z2) = p.to_riemann_unchecked(u);
            prop_assert!((w - w2).abs() <= 1e-10 && (z - z2).abs() <= 1e-10);
        }
    }
}
