//! Candidate jump set from rescaled dissipation, and mean-oscillation profiles off it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetic::MeasureEstimate;
use crate::viscous::GridSolution;

/// Sums masses over blocks of `bt` snapshots by `bx` cells. Trailing partial time blocks
/// are kept; `nx` must be divisible by `bx`. The kinetic variable is summed out.
pub fn coarsen(m: &MeasureEstimate, bt: usize, bx: usize) -> Result<MeasureEstimate> {
    if bt == 0 || bx == 0 || !m.nx.is_multiple_of(bx) {
        return Err(Error::Config(format!("cannot coarsen {} cells by blocks of {bx}", m.nx)));
    }
    let p = m.project_tx();
    let nxc = m.nx / bx;
    let ntc = m.nt().div_ceil(bt);
    let mut mass = vec![0.0; ntc * nxc];
    let mut times = vec![0.0; ntc];
    for (nc, t) in times.iter_mut().enumerate() {
        let rows = nc * bt..((nc + 1) * bt).min(m.nt());
        *t = rows.clone().map(|n| m.times[n]).sum::<f64>() / rows.len() as f64;
        for n in rows {
            for i in 0..m.nx {
                mass[nc * nxc + i / bx] += p[n * m.nx + i];
            }
        }
    }
    Ok(MeasureEstimate {
        kind: m.kind,
        times,
        nx: nxc,
        dx: m.dx * bx as f64,
        x0: m.x0 + 0.5 * (bx - 1) as f64 * m.dx,
        length: m.length,
        kgrid: Vec::new(),
        widths: m.widths,
        mass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSetMask {
    pub times: Vec<f64>,
    pub nx: usize,
    pub dx: f64,
    pub x0: f64,
    pub radii: Vec<f64>,
    pub theta: f64,
    /// Kind of the measure the mask was computed from.
    pub source: String,
    /// `max_r ν(B_r)/r` per cell, `n·nx + i`.
    pub ratio: Vec<f64>,
    pub mask: Vec<bool>,
}

impl JumpSetMask {
    pub fn flagged(&self, n: usize, i: usize) -> bool {
        self.mask[n * self.nx + i]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    /// Space-time area of the flagged cells.
    pub fn area(&self) -> f64 {
        let tau = cell_edges(&self.times);
        (0..self.times.len())
            .map(|n| {
                let c = (0..self.nx).filter(|&i| self.flagged(n, i)).count();
                c as f64 * self.dx * (tau[n + 1] - tau[n])
            })
            .sum()
    }

    /// Flagged cells of one time row.
    pub fn row(&self, n: usize) -> Vec<usize> {
        (0..self.nx).filter(|&i| self.flagged(n, i)).collect()
    }
}

/// Time-cell boundaries: midpoints between centres, with half-steps at both ends.
fn cell_edges(times: &[f64]) -> Vec<f64> {
    let nt = times.len();
    if nt == 1 {
        return vec![times[0], times[0]];
    }
    let mut e = Vec::with_capacity(nt + 1);
    e.push(times[0] - 0.5 * (times[1] - times[0]));
    for n in 1..nt {
        e.push(0.5 * (times[n - 1] + times[n]));
    }
    e.push(times[nt - 1] + 0.5 * (times[nt - 1] - times[nt - 2]));
    e
}

/// Checks that radii are ascending or descending by exact factors of two, at least three
/// levels, none below `2·dx`.
pub fn check_radii(radii: &[f64], dx: f64) -> Result<()> {
    if radii.len() < 3 {
        return Err(Error::Config(format!("need at least 3 radii, got {}", radii.len())));
    }
    for w in radii.windows(2) {
        let q = w[0].max(w[1]) / w[0].min(w[1]);
        if (q - 2.0).abs() > 1e-9 {
            return Err(Error::Config(format!("radii {} and {} are not dyadic", w[0], w[1])));
        }
    }
    if let Some(r) = radii.iter().find(|&&r| r < 2.0 * dx * (1.0 - 1e-12)) {
        return Err(Error::Config(format!("radius {r} is below 2dx = {}", 2.0 * dx)));
    }
    Ok(())
}

const SUB: usize = 8;

/// `max_r ν(B_r)/r` at every cell centre. Cell masses are spread uniformly over the cell
/// and `B_r` is the Euclidean disk in `(t, x)`, periodic in `x`.
pub fn rescaled_dissipation(nu: &MeasureEstimate, radii: &[f64]) -> Vec<f64> {
    let p = nu.project_tx();
    let nt = nu.nt();
    let nx = nu.nx;
    let edges = cell_edges(&nu.times);
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let reach_x = (rmax / nu.dx).ceil() as isize + 1;
    (0..nt * nx)
        .into_par_iter()
        .map(|c| {
            let (n, i) = (c / nx, c % nx);
            let (tc, xc) = (nu.times[n], nu.x0 + i as f64 * nu.dx);
            let mut inside = vec![0.0; radii.len()];
            for m in 0..nt {
                let (ta, tb) = (edges[m], edges[m + 1]);
                if ta - tc > rmax || tc - tb > rmax || tb <= ta {
                    continue;
                }
                for di in -reach_x..=reach_x {
                    let j = (i as isize + di).rem_euclid(nx as isize) as usize;
                    let mass = p[m * nx + j];
                    if mass == 0.0 {
                        continue;
                    }
                    let xa = xc + di as f64 * nu.dx - 0.5 * nu.dx;
                    let mut hits = vec![0usize; radii.len()];
                    for a in 0..SUB {
                        let dt = ta + (a as f64 + 0.5) / SUB as f64 * (tb - ta) - tc;
                        for b in 0..SUB {
                            let dxp = xa + (b as f64 + 0.5) / SUB as f64 * nu.dx - xc;
                            let d2 = dt * dt + dxp * dxp;
                            for (h, r) in hits.iter_mut().zip(radii) {
                                if d2 <= r * r {
                                    *h += 1;
                                }
                            }
                        }
                    }
                    for (s, h) in inside.iter_mut().zip(&hits) {
                        *s += mass * *h as f64 / (SUB * SUB) as f64;
                    }
                }
            }
            inside.iter().zip(radii).map(|(s, r)| s / r).fold(0.0, f64::max)
        })
        .collect()
}

/// Default threshold: ten times the median cell mass over the cell width.
pub fn default_theta(nu: &MeasureEstimate) -> f64 {
    let mut p = nu.project_tx();
    p.sort_by(f64::total_cmp);
    10.0 * p[p.len() / 2] / nu.dx
}

/// Flags cells with `max_r ν(B_r)/r ≥ θ`. `dx_floor` is the resolution the radii are
/// checked against (the simulation `dx` when `nu` was coarsened).
pub fn jump_set(nu: &MeasureEstimate, radii: &[f64], theta: Option<f64>, dx_floor: f64) -> Result<JumpSetMask> {
    check_radii(radii, dx_floor)?;
    let ratio = rescaled_dissipation(nu, radii);
    Ok(mask_from_ratio(nu, radii, ratio, theta.unwrap_or_else(|| default_theta(nu))))
}

/// Re-thresholds precomputed ratios.
pub fn mask_from_ratio(nu: &MeasureEstimate, radii: &[f64], ratio: Vec<f64>, theta: f64) -> JumpSetMask {
    // An all-zero measure flags nothing, even at θ = 0.
    let mask = ratio.iter().map(|&q| q > 0.0 && q >= theta).collect();
    JumpSetMask {
        times: nu.times.clone(),
        nx: nu.nx,
        dx: nu.dx,
        x0: nu.x0,
        radii: radii.to_vec(),
        theta,
        source: serde_json::to_value(nu.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
        ratio,
        mask,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmoProfile {
    pub t: f64,
    pub x: f64,
    /// Descending radii.
    pub radii: Vec<f64>,
    /// `(1/r²) ∫_{B_r} |u − avg_r u|` per radius.
    pub oscillation: Vec<f64>,
    /// `osc(r_{K-1}) / osc(r_K)` at the two smallest radii.
    pub last_ratio: f64,
    pub decays: bool,
    /// Rescaled profiles `u_r(y) = u(t, x + r·y)` for `y ∈ [-1, 1]`, one per radius.
    #[serde(skip)]
    pub zoom: Vec<Vec<[f64; 2]>>,
}

/// Oscillations below this count as zero, and a zero oscillation counts as decaying.
pub const OSC_FLOOR: f64 = 1e-10;
pub const DECAY_FACTOR: f64 = 1.5;
const ZOOM_POINTS: usize = 33;

pub fn vmo_profile(sol: &GridSolution, t: f64, x: f64, radii: &[f64]) -> Result<VmoProfile> {
    check_radii(radii, sol.dx)?;
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    let rmax = radii[0];
    let (t0, t1) = (sol.times[0], sol.times[sol.nt() - 1]);
    if t - rmax < t0 - 1e-12 || t + rmax > t1 + 1e-12 || 2.0 * rmax > sol.length {
        return Err(Error::Boundary { t, x, r: rmax });
    }
    let tau = trapezoid(&sol.times);
    let oscillation = radii
        .iter()
        .map(|&r| {
            let mut pts: Vec<([f64; 2], f64)> = Vec::new();
            for (n, &tn) in sol.times.iter().enumerate() {
                let dt = tn - t;
                if dt.abs() > r {
                    continue;
                }
                let half = (r * r - dt * dt).sqrt();
                let lo = ((x - half) / sol.dx).ceil() as isize;
                let hi = ((x + half) / sol.dx).floor() as isize;
                for k in lo..=hi {
                    let i = k.rem_euclid(sol.nx as isize) as usize;
                    pts.push((sol.u[n][i], tau[n] * sol.dx));
                }
            }
            let mass: f64 = pts.iter().map(|p| p.1).sum();
            if mass == 0.0 {
                return 0.0;
            }
            // Offsets from one sample keep a constant field exactly at zero.
            let u0 = pts[0].0;
            let avg = [
                u0[0] + pts.iter().map(|(u, m)| (u[0] - u0[0]) * m).sum::<f64>() / mass,
                u0[1] + pts.iter().map(|(u, m)| (u[1] - u0[1]) * m).sum::<f64>() / mass,
            ];
            let dev: f64 = pts.iter().map(|(u, m)| m * (u[0] - avg[0]).hypot(u[1] - avg[1])).sum();
            // Normalise the discrete disk to the exact one.
            dev / mass * std::f64::consts::PI
        })
        .collect::<Vec<f64>>();
    let k = oscillation.len();
    let (a, b) = (oscillation[k - 2], oscillation[k - 1]);
    let decays = a < OSC_FLOOR || b * DECAY_FACTOR <= a;
    let last_ratio = if b > 0.0 { a / b } else { f64::INFINITY };
    let zoom = radii
        .iter()
        .map(|&r| {
            (0..ZOOM_POINTS)
                .map(|j| {
                    let y = -1.0 + 2.0 * j as f64 / (ZOOM_POINTS - 1) as f64;
                    sol.sample(t, x + r * y)
                })
                .collect()
        })
        .collect();
    Ok(VmoProfile { t, x, radii, oscillation, last_ratio, decays, zoom })
}

fn trapezoid(times: &[f64]) -> Vec<f64> {
    let nt = times.len();
    (0..nt)
        .map(|n| {
            let a = if n == 0 { times[0] } else { 0.5 * (times[n - 1] + times[n]) };
            let b = if n + 1 == nt { times[nt - 1] } else { 0.5 * (times[n] + times[n + 1]) };
            b - a
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmoSample {
    pub t: f64,
    pub x: f64,
    pub masked: bool,
    pub decays: bool,
    pub last_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VmoConsistency {
    pub samples: Vec<VmoSample>,
    pub masked: usize,
    pub masked_failing: usize,
    pub unmasked: usize,
    pub unmasked_passing: usize,
}

impl VmoConsistency {
    pub fn unmasked_pass_fraction(&self) -> f64 {
        if self.unmasked == 0 { 1.0 } else { self.unmasked_passing as f64 / self.unmasked as f64 }
    }

    pub fn all_masked_fail(&self) -> bool {
        self.masked_failing == self.masked
    }
}

/// Profiles at every mask cell centre with `t_lo ≤ t ≤ t_hi`.
pub fn vmo_consistency(
    sol: &GridSolution,
    mask: &JumpSetMask,
    radii: &[f64],
    t_lo: f64,
    t_hi: f64,
) -> Result<VmoConsistency> {
    let cells: Vec<(usize, usize)> = (0..mask.times.len())
        .filter(|&n| mask.times[n] >= t_lo && mask.times[n] <= t_hi)
        .flat_map(|n| (0..mask.nx).map(move |i| (n, i)))
        .collect();
    let samples = cells
        .par_iter()
        .map(|&(n, i)| {
            let (t, x) = (mask.times[n], mask.x(i));
            let p = vmo_profile(sol, t, x, radii)?;
            Ok(VmoSample { t, x, masked: mask.flagged(n, i), decays: p.decays, last_ratio: p.last_ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    let masked = samples.iter().filter(|s| s.masked).count();
    let masked_failing = samples.iter().filter(|s| s.masked && !s.decays).count();
    let unmasked = samples.len() - masked;
    let unmasked_passing = samples.iter().filter(|s| !s.masked && s.decays).count();
    Ok(VmoConsistency { samples, masked, masked_failing, unmasked, unmasked_passing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::{MeasureKind, TestWidths};
    use crate::system::SystemChart;
    use crate::viscous::{decoupled_exact, SineMode};

    fn measure(nt: usize, nx: usize, dt: f64, dx: f64, f: impl Fn(f64, f64) -> f64) -> MeasureEstimate {
        let times: Vec<f64> = (0..nt).map(|n| n as f64 * dt).collect();
        let mut mass = Vec::new();
        for &t in &times {
            for i in 0..nx {
                mass.push(f(t, i as f64 * dx));
            }
        }
        MeasureEstimate {
            kind: MeasureKind::NuSup,
            times,
            nx,
            dx,
            x0: 0.0,
            length: nx as f64 * dx,
            kgrid: Vec::new(),
            widths: TestWidths::default(),
            mass,
        }
    }

    fn line(nt: usize, nx: usize, dt: f64, dx: f64) -> MeasureEstimate {
        // Unit dissipation per unit length along x = 0.5 + 0.2 t.
        measure(nt, nx, dt, dx, |t, x| {
            let xs = 0.5 + 0.2 * t;
            if (x - xs).abs() < 0.5 * dx { dt } else { 1e-9 * dt * dx }
        })
    }

    #[test]
    fn coarsen_preserves_total() {
        let m = measure(10, 32, 0.1, 1.0 / 32.0, |t, x| t + x * x);
        let c = coarsen(&m, 3, 4).unwrap();
        assert_eq!((c.nt(), c.nx), (4, 8));
        assert!((c.total() - m.total()).abs() < 1e-12);
        assert!((c.x0 - 1.5 / 32.0).abs() < 1e-15);
        assert!(coarsen(&m, 3, 5).is_err());
    }

    #[test]
    fn radii_are_validated() {
        assert!(check_radii(&[0.1, 0.2, 0.4], 0.05).is_ok());
        assert!(check_radii(&[0.4, 0.2, 0.1], 0.05).is_ok());
        assert!(check_radii(&[0.1, 0.2], 0.01).is_err());
        assert!(check_radii(&[0.1, 0.3, 0.6], 0.01).is_err());
        assert!(check_radii(&[0.05, 0.1, 0.2], 0.05).is_err());
    }

    #[test]
    fn zero_measure_gives_empty_mask() {
        let m = measure(20, 64, 0.05, 1.0 / 64.0, |_, _| 0.0);
        let j = jump_set(&m, &[1.0 / 32.0, 1.0 / 16.0, 1.0 / 8.0], None, 1.0 / 64.0).unwrap();
        assert_eq!(j.count(), 0);
    }

    #[test]
    fn line_is_flagged_as_thin_tube() {
        // Radii below the cell size, as for a coarsened dissipation measure.
        let dx = 1.0 / 64.0;
        let m = line(40, 64, 0.025, dx);
        let radii = [dx / 8.0, dx / 4.0, dx / 2.0];
        let top = rescaled_dissipation(&m, &radii).into_iter().fold(0.0, f64::max);
        let j = jump_set(&m, &radii, Some(0.25 * top), dx / 16.0).unwrap();
        for n in 0..m.nt() {
            let row = j.row(n);
            assert!(!row.is_empty() && row.len() <= 3, "row {n}: {row:?}");
            let xs = 0.5 + 0.2 * m.times[n];
            assert!(row.iter().all(|&i| (j.x(i) - xs).abs() <= 1.5 * dx));
        }
    }

    #[test]
    fn mask_shrinks_as_theta_grows() {
        let dx = 1.0 / 64.0;
        let m = measure(30, 64, 0.02, dx, |t, x| ((7.0 * x + 3.0 * t).sin() + 1.2) * dx * 0.02);
        let radii = [2.0 * dx, 4.0 * dx, 8.0 * dx];
        let ratio = rescaled_dissipation(&m, &radii);
        let mut prev = usize::MAX;
        for theta in [0.0, 0.01, 0.02, 0.04, 0.08, f64::INFINITY] {
            let j = mask_from_ratio(&m, &radii, ratio.clone(), theta);
            assert!(j.count() <= prev);
            prev = j.count();
        }
        assert_eq!(prev, 0);
    }

    fn exact(nx: usize, f: impl Fn(f64, f64) -> [f64; 2] + Sync) -> GridSolution {
        let times = (0..=200).map(|n| n as f64 * 0.005).collect();
        GridSolution::from_fn(&SystemChart::Decoupled, nx, 2.0, times, &f).unwrap()
    }

    #[test]
    fn constant_has_zero_oscillation() {
        let sol = exact(256, |_, _| [0.3, -0.1]);
        let p = vmo_profile(&sol, 0.5, 1.0, &[0.2, 0.1, 0.05]).unwrap();
        assert!(p.oscillation.iter().all(|&o| o.abs() < 1e-14), "{:?}", p.oscillation);
        assert!(p.decays);
        assert_eq!(p.zoom.len(), 3);
    }

    #[test]
    fn smooth_point_decays_linearly() {
        let w = SineMode { mean: 0.1, amp: 0.3, k: 1, phase: 0.0 };
        let z = SineMode { mean: 0.0, amp: 0.2, k: 1, phase: 0.3 };
        let sol = exact(1024, move |t, x| decoupled_exact(&w, &z, 2.0, t, x));
        let p = vmo_profile(&sol, 0.5, 0.7, &[0.2, 0.1, 0.05]).unwrap();
        assert!(p.decays);
        assert!((p.last_ratio - 2.0).abs() < 0.2, "{}", p.last_ratio);
    }

    #[test]
    fn jump_point_plateaus_at_half_disk_value() {
        // Equal half-disks: avg is the midpoint, so osc = π·|u_l − u_r|/2.
        let (ul, ur) = (0.8, -0.4);
        let sol = exact(2048, move |t, x| [if x < 1.0 + 0.2 * t { ul } else { ur }, 0.0]);
        let p = vmo_profile(&sol, 0.5, 1.1, &[0.2, 0.1, 0.05]).unwrap();
        assert!(!p.decays);
        let oracle = std::f64::consts::PI * (ul - ur) / 2.0;
        for o in &p.oscillation {
            assert!((o - oracle).abs() < 0.03 * oracle, "{o} vs {oracle}");
        }
    }

    #[test]
    fn boundary_is_rejected() {
        let sol = exact(128, |_, _| [0.0, 0.0]);
        assert!(matches!(vmo_profile(&sol, 0.1, 1.0, &[0.2, 0.1, 0.05]), Err(Error::Boundary { .. })));
    }
}
