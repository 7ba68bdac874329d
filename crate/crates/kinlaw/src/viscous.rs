//! Periodic solver for `u_t + f(u)_x = ε u_xx` with an energy ledger.
//!
//! Central flux differences and centered diffusion, advanced with Heun's two-stage method.
//! The time step is fixed per snapshot slab so snapshots land exactly on their times.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{State, SystemChart};

/// Periodic sine `mean + amp·sin(2πk x/L + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineMode {
    pub mean: f64,
    pub amp: f64,
    #[serde(default = "one")]
    pub k: u32,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> u32 {
    1
}

impl SineMode {
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        self.mean + self.amp * (2.0 * PI * self.k as f64 * x / length + self.phase).sin()
    }

    pub fn deriv(&self, x: f64, length: f64) -> f64 {
        let c = 2.0 * PI * self.k as f64 / length;
        self.amp * c * (c * x + self.phase).cos()
    }
}

/// Initial data library. Sine data is given per Riemann component and mapped through the chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    Constant { u: State },
    Sine { w: SineMode, z: SineMode },
    /// `left` on `[x0, x1)`, `right` elsewhere.
    TwoJump { left: State, right: State, x0: f64, x1: f64 },
    /// Smooth periodic transition from `left` to `right` around `L/4` and back around `3L/4`,
    /// each of the given width.
    Ramp { left: State, right: State, width: f64 },
}

impl InitialData {
    pub fn eval(&self, chart: &SystemChart, x: f64, length: f64) -> Result<State> {
        match self {
            InitialData::Constant { u } => Ok(*u),
            InitialData::Sine { w, z } => chart.from_riemann(w.eval(x, length), z.eval(x, length)),
            InitialData::TwoJump { left, right, x0, x1 } => {
                let x = x.rem_euclid(length);
                Ok(if x >= *x0 && x < *x1 { *left } else { *right })
            }
            InitialData::Ramp { left, right, width } => {
                let x = x.rem_euclid(length);
                let s = 0.5 * ((x - 0.25 * length) / width).tanh() - 0.5 * ((x - 0.75 * length) / width).tanh();
                Ok([left[0] + s * (right[0] - left[0]), left[1] + s * (right[1] - left[1])])
            }
        }
    }
}

/// Uniformly convex entropy used by the energy ledger.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyId {
    /// `½(w−w₀)² + ½(z−z₀)²` about the rectangle centre. An entropy for the decoupled and
    /// linear charts only.
    RiemannQuadratic,
    /// Relative mechanical energy of the p-system about the centre state.
    PMechanical,
}

impl EnergyId {
    pub fn default_for(chart: &SystemChart) -> Self {
        match chart {
            SystemChart::PSystem { .. } => EnergyId::PMechanical,
            _ => EnergyId::RiemannQuadratic,
        }
    }

    pub fn eval(&self, chart: &SystemChart, u: State) -> f64 {
        let (w0, z0) = chart.rect().center();
        match self {
            EnergyId::RiemannQuadratic => {
                let (w, z) = chart.to_riemann_unchecked(u);
                0.5 * (w - w0).powi(2) + 0.5 * (z - z0).powi(2)
            }
            EnergyId::PMechanical => {
                let u0 = chart.from_riemann(w0, z0).expect("rectangle centre maps into U");
                let pot = |a: f64| 0.5 * a * a + 0.25 * a.powi(4);
                let s0 = u0[0] + u0[0].powi(3);
                0.5 * (u[1] - u0[1]).powi(2) + pot(u[0]) - pot(u0[0]) - s0 * (u[0] - u0[0])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub chart: SystemChart,
    pub initial: InitialData,
    pub epsilon: f64,
    pub t_final: f64,
    pub nx: usize,
    #[serde(default = "unit_length")]
    pub length: f64,
    /// Snapshots stored on `[0, t_final]`, both ends included.
    pub n_snapshots: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub energy: Option<EnergyId>,
}

fn unit_length() -> f64 {
    1.0
}

fn default_cfl() -> f64 {
    0.4
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.chart.validate()?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.nx < 8 {
            return bad("nx must be at least 8");
        }
        if !(self.epsilon >= 0.0) || !(self.t_final > 0.0) || !(self.length > 0.0) {
            return bad("epsilon must be non-negative, t_final and length positive");
        }
        if self.n_snapshots < 2 {
            return bad("n_snapshots must be at least 2");
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.4) {
            return bad("cfl must lie in (0, 0.4]");
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }
}

/// A trajectory of snapshots on the periodic grid `x_i = i·dx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub chart: SystemChart,
    pub nx: usize,
    pub length: f64,
    pub dx: f64,
    pub epsilon: f64,
    /// Time step used inside each slab (zero for sampled exact solutions).
    pub dt: f64,
    pub cfl_advective: f64,
    pub cfl_diffusive: f64,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub u: Vec<Vec<State>>,
}

impl GridSolution {
    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Samples a field given in closed form at the listed times.
    pub fn from_fn(
        chart: &SystemChart,
        nx: usize,
        length: f64,
        times: Vec<f64>,
        f: &(dyn Fn(f64, f64) -> State + Sync),
    ) -> Result<Self> {
        let dx = length / nx as f64;
        let u = times
            .iter()
            .map(|&t| {
                (0..nx)
                    .map(|i| {
                        let s = f(t, i as f64 * dx);
                        if chart.in_domain(s) { Ok(s) } else { Err(Error::Domain(s[0], s[1])) }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridSolution {
            chart: chart.clone(),
            nx,
            length,
            dx,
            epsilon: 0.0,
            dt: 0.0,
            cfl_advective: 0.0,
            cfl_diffusive: 0.0,
            times,
            u,
        })
    }

    /// Bilinear space-time interpolation of the state, periodic in `x`, clamped in `t`.
    pub fn sample(&self, t: f64, x: f64) -> State {
        let nt = self.nt();
        let (n, a) = if nt == 1 || t <= self.times[0] {
            (0, 0.0)
        } else if t >= self.times[nt - 1] {
            (nt - 2, 1.0)
        } else {
            let n = self.times.partition_point(|&s| s <= t) - 1;
            (n, (t - self.times[n]) / (self.times[n + 1] - self.times[n]))
        };
        let s = (x / self.dx).rem_euclid(self.nx as f64);
        let i = (s.floor() as usize).min(self.nx - 1);
        let b = s - i as f64;
        let ip = (i + 1) % self.nx;
        let at = |k: usize| {
            let row = &self.u[k.min(nt - 1)];
            [
                (1.0 - b) * row[i][0] + b * row[ip][0],
                (1.0 - b) * row[i][1] + b * row[ip][1],
            ]
        };
        let (p, q) = (at(n), at(n + 1));
        [(1.0 - a) * p[0] + a * q[0], (1.0 - a) * p[1] + a * q[1]]
    }
}

/// Per-slab energy bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub energy: EnergyId,
    /// `∫∫ ε|u_x|²` over the whole run.
    pub dissipation_integral: f64,
    /// The same integral per snapshot slab.
    pub slab_dissipation: Vec<f64>,
    pub initial_entropy: f64,
    /// Measured ratio `dissipation_integral / initial_entropy`.
    pub ratio: f64,
    pub cone: Option<ConeLedger>,
}

/// Dissipation in `[0,T] × {|x − c| ≤ M}` against `∫_{|x−c| ≤ M+LT} E(u₀)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeLedger {
    pub center: f64,
    pub half_width: f64,
    pub speed: f64,
    pub dissipation: f64,
    pub initial_entropy: f64,
}

fn rhs(chart: &SystemChart, u: &[State], eps: f64, dx: f64, out: &mut [State], flux: &mut [State]) {
    let n = u.len();
    for (f, s) in flux.iter_mut().zip(u) {
        *f = chart.flux_raw(*s);
    }
    let (ca, cd) = (0.5 / dx, eps / (dx * dx));
    for i in 0..n {
        let (im, ip) = (if i == 0 { n - 1 } else { i - 1 }, if i + 1 == n { 0 } else { i + 1 });
        for c in 0..2 {
            out[i][c] = -ca * (flux[ip][c] - flux[im][c]) + cd * (u[ip][c] - 2.0 * u[i][c] + u[im][c]);
        }
    }
}

fn check_domain(chart: &SystemChart, u: &[State]) -> Result<()> {
    match u.iter().find(|s| !chart.in_domain(**s)) {
        Some(s) => Err(Error::Domain(s[0], s[1])),
        None => Ok(()),
    }
}

/// One Heun step. Fails on a step beyond the stability limits or a state leaving `U`.
pub fn step(chart: &SystemChart, field: &[State], epsilon: f64, dx: f64, dt: f64) -> Result<Vec<State>> {
    let advective = chart.max_speed() * dt / dx;
    let diffusive = epsilon * dt / (dx * dx);
    if advective > 0.4 + 1e-12 || diffusive > 0.4 + 1e-12 {
        return Err(Error::Stability { advective, diffusive });
    }
    let mut out = field.to_vec();
    let mut work = Work::new(field.len());
    work.heun(chart, &mut out, epsilon, dx, dt);
    check_domain(chart, &out)?;
    Ok(out)
}

struct Work {
    k1: Vec<State>,
    k2: Vec<State>,
    mid: Vec<State>,
    flux: Vec<State>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work { k1: vec![[0.0; 2]; n], k2: vec![[0.0; 2]; n], mid: vec![[0.0; 2]; n], flux: vec![[0.0; 2]; n] }
    }

    fn heun(&mut self, chart: &SystemChart, u: &mut [State], eps: f64, dx: f64, dt: f64) {
        rhs(chart, u, eps, dx, &mut self.k1, &mut self.flux);
        for i in 0..u.len() {
            for c in 0..2 {
                self.mid[i][c] = u[i][c] + dt * self.k1[i][c];
            }
        }
        rhs(chart, &self.mid, eps, dx, &mut self.k2, &mut self.flux);
        for i in 0..u.len() {
            for c in 0..2 {
                u[i][c] += 0.5 * dt * (self.k1[i][c] + self.k2[i][c]);
            }
        }
    }
}

/// `∫ ε|u_x|² dx` with forward differences.
fn gradient_energy(u: &[State], eps: f64, dx: f64) -> f64 {
    let n = u.len();
    let mut s = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        s += (u[j][0] - u[i][0]).powi(2) + (u[j][1] - u[i][1]).powi(2);
    }
    eps * s / dx
}

pub fn initial_field(config: &SimConfig) -> Result<Vec<State>> {
    let dx = config.dx();
    (0..config.nx).map(|i| config.initial.eval(&config.chart, i as f64 * dx, config.length)).collect()
}

/// Runs the configured trajectory. The ledger's dissipation accumulates every step.
pub fn simulate(config: &SimConfig) -> Result<(GridSolution, EnergyLedger)> {
    config.validate()?;
    let chart = &config.chart;
    let dx = config.dx();
    let mut u = initial_field(config)?;
    check_domain(chart, &u)?;
    let speed = chart.max_speed();
    let mut dt_max = config.cfl * dx / speed;
    if config.epsilon > 0.0 {
        dt_max = dt_max.min(config.cfl * dx * dx / config.epsilon);
    }
    let n_slab = config.n_snapshots - 1;
    let slab = config.t_final / n_slab as f64;
    let steps = (slab / dt_max).ceil().max(1.0) as usize;
    let dt = slab / steps as f64;

    let energy = config.energy.unwrap_or_else(|| EnergyId::default_for(chart));
    let initial_entropy = u.iter().map(|s| energy.eval(chart, *s)).sum::<f64>() * dx;
    let mut times = vec![0.0];
    let mut snaps = vec![u.clone()];
    let mut slab_dissipation = Vec::with_capacity(n_slab);
    let mut work = Work::new(config.nx);
    for k in 1..=n_slab {
        let mut d = 0.0;
        for _ in 0..steps {
            d += dt * gradient_energy(&u, config.epsilon, dx);
            work.heun(chart, &mut u, config.epsilon, dx, dt);
            check_domain(chart, &u)?;
        }
        slab_dissipation.push(d);
        times.push(if k == n_slab { config.t_final } else { k as f64 * slab });
        snaps.push(u.clone());
    }
    let dissipation_integral: f64 = slab_dissipation.iter().sum();
    let ratio = if initial_entropy > 0.0 { dissipation_integral / initial_entropy } else { 0.0 };
    let sol = GridSolution {
        chart: chart.clone(),
        nx: config.nx,
        length: config.length,
        dx,
        epsilon: config.epsilon,
        dt,
        cfl_advective: speed * dt / dx,
        cfl_diffusive: config.epsilon * dt / (dx * dx),
        times,
        u: snaps,
    };
    let ledger = EnergyLedger { energy, dissipation_integral, slab_dissipation, initial_entropy, ratio, cone: None };
    Ok((sol, ledger))
}

/// Ledger recomputed from snapshots (trapezoid in time), with the cone-restricted version
/// centred at `L/2` with half-width `L/4` and speed `max|λ₂|`.
pub fn energy_budget(sol: &GridSolution, energy: EnergyId) -> EnergyLedger {
    let chart = &sol.chart;
    let (dx, eps) = (sol.dx, sol.epsilon);
    let rates: Vec<f64> = sol.u.iter().map(|u| gradient_energy(u, eps, dx)).collect();
    let slab_dissipation: Vec<f64> =
        (1..sol.nt()).map(|k| 0.5 * (sol.times[k] - sol.times[k - 1]) * (rates[k] + rates[k - 1])).collect();
    let dissipation_integral = slab_dissipation.iter().sum();
    let initial_entropy = sol.u[0].iter().map(|s| energy.eval(chart, *s)).sum::<f64>() * dx;

    let r = chart.rect();
    let mut speed: f64 = 0.0;
    for a in 0..=16 {
        for b in 0..=16 {
            let w = r.w_lo + (r.w_hi - r.w_lo) * a as f64 / 16.0;
            let z = r.z_lo + (r.z_hi - r.z_lo) * b as f64 / 16.0;
            speed = speed.max(chart.speeds(w, z).1.abs());
        }
    }
    let (center, m) = (0.5 * sol.length, 0.25 * sol.length);
    let t_final = *sol.times.last().unwrap_or(&0.0);
    let in_window = |i: usize, half: f64| {
        let d = (sol.x(i) + 0.5 * dx - center).abs();
        d <= half
    };
    let cone_rates: Vec<f64> = sol
        .u
        .iter()
        .map(|u| {
            let n = u.len();
            (0..n)
                .filter(|&i| in_window(i, m))
                .map(|i| {
                    let j = (i + 1) % n;
                    (u[j][0] - u[i][0]).powi(2) + (u[j][1] - u[i][1]).powi(2)
                })
                .sum::<f64>()
                * eps
                / dx
        })
        .collect();
    let cone_dissipation =
        (1..sol.nt()).map(|k| 0.5 * (sol.times[k] - sol.times[k - 1]) * (cone_rates[k] + cone_rates[k - 1])).sum();
    let cone_entropy = (0..sol.nx)
        .filter(|&i| (sol.x(i) - center).abs() <= m + speed * t_final)
        .map(|i| energy.eval(chart, sol.u[0][i]))
        .sum::<f64>()
        * dx;
    EnergyLedger {
        energy,
        dissipation_integral,
        slab_dissipation,
        initial_entropy,
        ratio: if initial_entropy > 0.0 { dissipation_integral / initial_entropy } else { 0.0 },
        cone: Some(ConeLedger {
            center,
            half_width: m,
            speed,
            dissipation: cone_dissipation,
            initial_entropy: cone_entropy,
        }),
    }
}

/// L¹ distances at the final time between consecutive members of an ε-sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VanishingReport {
    pub epsilons: Vec<f64>,
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub monotone: bool,
}

pub fn vanishing_sequence(config: &SimConfig, eps_list: &[f64]) -> Result<VanishingReport> {
    if eps_list.len() < 3 || eps_list.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::Config("eps_list must be strictly decreasing with at least 3 entries".into()));
    }
    let finals = eps_list
        .par_iter()
        .map(|&e| {
            let cfg = SimConfig { epsilon: e, n_snapshots: 2, ..config.clone() };
            simulate(&cfg).map(|(s, _)| s.u.last().cloned().unwrap_or_default())
        })
        .collect::<Result<Vec<_>>>()?;
    let dx = config.dx();
    let distances: Vec<f64> = finals
        .windows(2)
        .map(|p| p[0].iter().zip(&p[1]).map(|(a, b)| (a[0] - b[0]).abs() + (a[1] - b[1]).abs()).sum::<f64>() * dx)
        .collect();
    let ratios = distances.windows(2).map(|p| if p[1] > 0.0 { p[0] / p[1] } else { f64::INFINITY }).collect();
    let monotone = distances.windows(2).all(|p| p[1] <= p[0]);
    Ok(VanishingReport { epsilons: eps_list.to_vec(), distances, ratios, monotone })
}

/// Solves `u = φ(x − (u + c)t)` for the classical solution of `u_t + ((u+c)²/2)_x = 0`
/// with periodic sine data, valid before the gradient blow-up time.
pub fn transport_exact(mode: &SineMode, c: f64, length: f64, t: f64, x: f64) -> f64 {
    let mut u = mode.eval(x - (mode.mean + c) * t, length);
    for _ in 0..100 {
        let y = x - (u + c) * t;
        let r = u - mode.eval(y, length);
        let dr = 1.0 + t * mode.deriv(y, length);
        let du = r / dr;
        u -= du;
        if du.abs() < 1e-15 {
            break;
        }
    }
    u
}

/// Classical solution of the decoupled chart from sine data in each component.
pub fn decoupled_exact(w: &SineMode, z: &SineMode, length: f64, t: f64, x: f64) -> State {
    [transport_exact(w, 0.0, length, t, x), transport_exact(z, 4.0, length, t, x)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sine_cfg(eps: f64) -> SimConfig {
        SimConfig {
            chart: SystemChart::Decoupled,
            initial: InitialData::Sine {
                w: SineMode { mean: 0.0, amp: 0.1, k: 1, phase: 0.0 },
                z: SineMode { mean: 0.0, amp: 0.0, k: 1, phase: 0.0 },
            },
            epsilon: eps,
            t_final: 0.1,
            nx: 64,
            length: 1.0,
            n_snapshots: 2,
            cfl: 0.4,
            energy: None,
        }
    }

    #[test]
    fn constant_is_fixed_point() {
        let chart = SystemChart::p_system();
        let u0 = chart.from_riemann(-0.6, 0.6).unwrap();
        let f = vec![u0; 32];
        let g = step(&chart, &f, 0.01, 1.0 / 32.0, 0.001).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn matches_scalar_burgers_reference() {
        // Independent scalar solve of u_t + (u²/2)_x = ε u_xx with the same discretization.
        let (nx, eps) = (64usize, 0.05);
        let dx = 1.0 / nx as f64;
        let dt = 0.4 * dx * dx / eps * 0.5;
        let mut v: Vec<f64> = (0..nx).map(|i| 0.1 * (2.0 * PI * i as f64 * dx).sin()).collect();
        let l = |v: &[f64]| -> Vec<f64> {
            (0..nx)
                .map(|i| {
                    let (a, b) = (v[(i + nx - 1) % nx], v[(i + 1) % nx]);
                    -(b * b - a * a) / (4.0 * dx) + eps * (b - 2.0 * v[i] + a) / (dx * dx)
                })
                .collect()
        };
        let chart = SystemChart::Decoupled;
        let mut u: Vec<State> = v.iter().map(|&s| [s, 0.0]).collect();
        for _ in 0..100 {
            let k1 = l(&v);
            let m: Vec<f64> = v.iter().zip(&k1).map(|(a, b)| a + dt * b).collect();
            let k2 = l(&m);
            for i in 0..nx {
                v[i] += 0.5 * dt * (k1[i] + k2[i]);
            }
            u = step(&chart, &u, eps, dx, dt).unwrap();
        }
        let err = u.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a[0] - b).abs()));
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn linear_advection_shift_is_second_order() {
        let chart = SystemChart::Linear { a: -0.5, b: 0.5 };
        let err = |nx: usize| {
            let cfg = SimConfig {
                chart: chart.clone(),
                initial: InitialData::Sine {
                    w: SineMode { mean: 0.0, amp: 0.3, k: 1, phase: 0.0 },
                    z: SineMode { mean: 0.0, amp: 0.3, k: 1, phase: 1.0 },
                },
                epsilon: 0.0,
                t_final: 0.5,
                nx,
                length: 1.0,
                n_snapshots: 2,
                cfl: 0.4,
                energy: None,
            };
            let (sol, _) = simulate(&cfg).unwrap();
            let u = sol.u.last().unwrap();
            let mut e: f64 = 0.0;
            for (i, s) in u.iter().enumerate() {
                let x = sol.x(i);
                e = e.max((s[0] - 0.3 * (2.0 * PI * (x + 0.25)).sin()).abs());
                e = e.max((s[1] - 0.3 * (2.0 * PI * (x - 0.25) + 1.0).sin()).abs());
            }
            e
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 1e-2 && (e1 / e2) > 3.5, "{e1} {e2}");
    }

    #[test]
    fn stability_and_domain_errors() {
        let chart = SystemChart::Decoupled;
        let f = vec![[0.0, 0.0]; 16];
        assert!(matches!(step(&chart, &f, 0.0, 0.1, 0.1), Err(Error::Stability { .. })));
        // A sharp jump with ε = 0 overshoots past the boundary of U.
        let mut h = vec![[0.99, 0.0]; 16];
        h[3] = [0.0, 0.0];
        assert!(matches!(step(&chart, &h, 0.0, 0.1, 0.008), Err(Error::Domain(..))));
        let bad = SimConfig { initial: InitialData::Constant { u: [1.5, 0.0] }, ..sine_cfg(0.01) };
        assert!(matches!(simulate(&bad), Err(Error::Domain(..))));
    }

    #[test]
    fn zero_amplitude_has_no_dissipation() {
        let cfg = SimConfig { initial: InitialData::Constant { u: [0.2, -0.1] }, ..sine_cfg(0.02) };
        let (sol, led) = simulate(&cfg).unwrap();
        assert_eq!(led.dissipation_integral, 0.0);
        assert_eq!(energy_budget(&sol, EnergyId::RiemannQuadratic).dissipation_integral, 0.0);
        let rep = vanishing_sequence(&cfg, &[0.02, 0.01, 0.005]).unwrap();
        assert!(rep.distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn snapshots_land_on_times() {
        let cfg = SimConfig { n_snapshots: 11, ..sine_cfg(0.01) };
        let (sol, led) = simulate(&cfg).unwrap();
        assert_eq!(sol.nt(), 11);
        assert_eq!(sol.times[10], 0.1);
        assert!((sol.times[3] - 0.03).abs() < 1e-15);
        assert_eq!(led.slab_dissipation.len(), 10);
        assert!(sol.cfl_advective <= 0.4 && sol.cfl_diffusive <= 0.4);
    }

    #[test]
    fn smooth_dissipation_vanishes_with_epsilon() {
        let d = |e| simulate(&SimConfig { t_final: 0.3, ..sine_cfg(e) }).unwrap().1.dissipation_integral;
        let (a, b, c) = (d(0.02), d(0.01), d(0.005));
        assert!(a > b && b > c && (b / c) > 1.7, "{a} {b} {c}");
    }

    #[test]
    fn shock_sequence_converges_and_budget_is_stable() {
        let cfg = SimConfig {
            chart: SystemChart::Decoupled,
            initial: InitialData::TwoJump { left: [0.8, 0.0], right: [-0.4, 0.0], x0: 0.0, x1: 1.0 },
            epsilon: 0.02,
            t_final: 0.6,
            nx: 256,
            length: 2.0,
            n_snapshots: 2,
            cfl: 0.4,
            energy: None,
        };
        let rep = vanishing_sequence(&cfg, &[0.04, 0.02, 0.01]).unwrap();
        assert!(rep.monotone, "{rep:?}");
        for e in [0.04, 0.02, 0.01] {
            let (sol, led) = simulate(&SimConfig { epsilon: e, n_snapshots: 61, ..cfg.clone() }).unwrap();
            assert!(led.ratio > 0.0 && led.ratio <= 10.0);
            let b = energy_budget(&sol, EnergyId::RiemannQuadratic);
            // Skip the first slabs, where the snapshot trapezoid cannot resolve the initial jump.
            let tail = |v: &[f64]| v[5..].iter().sum::<f64>();
            assert!((tail(&b.slab_dissipation) / tail(&led.slab_dissipation) - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn decoupled_exact_solves_characteristics() {
        let w = SineMode { mean: 0.1, amp: 0.3, k: 1, phase: 0.0 };
        let z = SineMode { mean: 0.0, amp: 0.2, k: 1, phase: 0.5 * PI };
        let (t, x) = (0.5, 0.37);
        let u = decoupled_exact(&w, &z, 2.0, t, x);
        assert!((u[0] - w.eval(x - u[0] * t, 2.0)).abs() < 1e-13);
        assert!((u[1] - z.eval(x - (u[1] + 4.0) * t, 2.0)).abs() < 1e-13);
    }

    #[test]
    fn p_energy_is_convex_and_zero_at_centre() {
        let chart = SystemChart::p_system();
        let e = EnergyId::PMechanical;
        let c = chart.from_riemann(-0.6, 0.6).unwrap();
        assert!(e.eval(&chart, c).abs() < 1e-14);
        let u = chart.from_riemann(-0.7, 0.5).unwrap();
        assert!(e.eval(&chart, u) > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn conservation_and_invariant_region(aw in 0.0f64..0.4, az in 0.0f64..0.4, mw in -0.3f64..0.3, ph in 0.0f64..6.0) {
            let cfg = SimConfig {
                initial: InitialData::Sine {
                    w: SineMode { mean: mw, amp: aw, k: 1, phase: ph },
                    z: SineMode { mean: 0.0, amp: az, k: 2, phase: 0.0 },
                },
                epsilon: 0.05,
                t_final: 0.2,
                nx: 128,
                n_snapshots: 5,
                ..sine_cfg(0.05)
            };
            let (sol, _) = simulate(&cfg).unwrap();
            let sums = |u: &Vec<State>| (u.iter().map(|s| s[0]).sum::<f64>(), u.iter().map(|s| s[1]).sum::<f64>());
            let (s0, scale) = (sums(&sol.u[0]), sol.u[0].iter().map(|s| s[0].abs() + s[1].abs()).sum::<f64>().max(1.0));
            let range = |u: &Vec<State>, c: usize| u.iter().fold((f64::MAX, f64::MIN), |(a, b), s| (a.min(s[c]), b.max(s[c])));
            let (r0, r1) = (range(&sol.u[0], 0), range(&sol.u[0], 1));
            for u in &sol.u {
                let s = sums(u);
                prop_assert!((s.0 - s0.0).abs() <= 1e-10 * scale && (s.1 - s0.1).abs() <= 1e-10 * scale);
                let (q0, q1) = (range(u, 0), range(u, 1));
                prop_assert!(q0.0 >= r0.0 - 1e-6 && q0.1 <= r0.1 + 1e-6);
                prop_assert!(q1.0 >= r1.0 - 1e-6 && q1.1 <= r1.1 + 1e-6);
            }
        }
    }
}
