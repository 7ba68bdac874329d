//! Goursat entropies: the coefficient tables `g, h`, the solutions `Θ[ξ, b₀]` with their
//! fluxes, the cut families `χ[ξ], ψ[ξ]` and `υ[ζ], φ[ζ]`, the kinetic speed and the strip
//! constants `(r̄, c)`.
//!
//! All tables live on a node grid of the Riemann rectangle `W`. The cut parameters are
//! snapped to grid nodes, so indicator cuts fall exactly on grid lines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Axis};
use crate::system::SystemChart;

/// Node grid on the Riemann rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WGrid {
    pub w: Axis,
    pub z: Axis,
}

impl WGrid {
    /// `nw × nz` nodes spanning the chart rectangle.
    pub fn for_chart(chart: &SystemChart, nw: usize, nz: usize) -> Result<Self> {
        if nw < 3 || nz < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes per axis, got {nw}×{nz}")));
        }
        let r = chart.rect();
        Ok(WGrid { w: Axis::new(r.w_lo, r.w_hi, nw), z: Axis::new(r.z_lo, r.z_hi, nz) })
    }
}

/// Scalar table on a `WGrid`, stored w-major: `data[i * nz + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub nw: usize,
    pub nz: usize,
    pub data: Vec<f64>,
}

impl Table {
    pub fn zeros(nw: usize, nz: usize) -> Self {
        Table { nw, nz, data: vec![0.0; nw * nz] }
    }

    pub fn filled(nw: usize, nz: usize, v: f64) -> Self {
        Table { nw, nz, data: vec![v; nw * nz] }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.nz + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.nz + j] = v;
    }

    /// Bilinear interpolation at `(w, z)`, clamped to the grid.
    #[inline]
    pub fn interp(&self, grid: &WGrid, w: f64, z: f64) -> f64 {
        let (i, s) = grid.w.locate(w);
        let (j, t) = grid.z.locate(z);
        let a = self.at(i, j);
        let b = self.at(i + 1, j);
        let c = self.at(i, j + 1);
        let d = self.at(i + 1, j + 1);
        (1.0 - s) * ((1.0 - t) * a + t * c) + s * ((1.0 - t) * b + t * d)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Table) -> f64 {
        self.data.iter().zip(&other.data).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// The tables `g = exp ∫_{z̲}^{z} A dy` and `h = exp ∫_{w̲}^{w} B dx`, with
/// `A = -∂_zλ₁/(λ₁-λ₂)` and `B = ∂_wλ₂/(λ₁-λ₂)`.
#[derive(Clone, Debug)]
pub struct GhTables {
    pub grid: WGrid,
    pub g: Table,
    pub h: Table,
}

#[inline]
fn coeff_a(chart: &SystemChart, w: f64, z: f64) -> f64 {
    let (l1, l2) = chart.speeds(w, z);
    -chart.speed_derivs(w, z).l1z / (l1 - l2)
}

#[inline]
fn coeff_b(chart: &SystemChart, w: f64, z: f64) -> f64 {
    let (l1, l2) = chart.speeds(w, z);
    chart.speed_derivs(w, z).l2w / (l1 - l2)
}

pub fn compute_gh(chart: &SystemChart, grid: WGrid) -> Result<GhTables> {
    let (nw, nz) = (grid.w.n, grid.z.n);
    let mut a = Table::zeros(nw, nz);
    let mut b = Table::zeros(nw, nz);
    for i in 0..nw {
        let w = grid.w.node(i);
        for j in 0..nz {
            let z = grid.z.node(j);
            let (va, vb) = (coeff_a(chart, w, z), coeff_b(chart, w, z));
            if !va.is_finite() || !vb.is_finite() {
                return Err(Error::Quadrature { w, z });
            }
            a.set(i, j, va);
            b.set(i, j, vb);
        }
    }
    let (dw, dz) = (grid.w.step(), grid.z.step());
    let mut g = Table::filled(nw, nz, 1.0);
    let mut h = Table::filled(nw, nz, 1.0);
    for i in 0..nw {
        let mut s = 0.0;
        for j in 1..nz {
            s += 0.5 * dz * (a.at(i, j - 1) + a.at(i, j));
            g.set(i, j, s.exp());
        }
    }
    for j in 0..nz {
        let mut s = 0.0;
        for i in 1..nw {
            s += 0.5 * dw * (b.at(i - 1, j) + b.at(i, j));
            h.set(i, j, s.exp());
        }
    }
    Ok(GhTables { grid, g, h })
}

/// Goursat coefficients at edge midpoints, shared by every solve on one grid.
/// `a_edge[i][j]` sits at `(w_{i+½}, z_j)`, `b_edge[i][j]` at `(w_i, z_{j+½})`.
#[derive(Clone, Debug)]
struct EdgeCoeffs {
    a_edge: Table,
    b_edge: Table,
}

impl EdgeCoeffs {
    fn new(chart: &SystemChart, grid: &WGrid) -> Self {
        let (nw, nz) = (grid.w.n, grid.z.n);
        let (dw, dz) = (grid.w.step(), grid.z.step());
        let mut a_edge = Table::zeros(nw - 1, nz);
        for i in 0..nw - 1 {
            let wm = grid.w.node(i) + 0.5 * dw;
            for j in 0..nz {
                a_edge.set(i, j, coeff_a(chart, wm, grid.z.node(j)));
            }
        }
        let mut b_edge = Table::zeros(nw, nz - 1);
        for i in 0..nw {
            for j in 0..nz - 1 {
                b_edge.set(i, j, coeff_b(chart, grid.w.node(i), grid.z.node(j) + 0.5 * dz));
            }
        }
        EdgeCoeffs { a_edge, b_edge }
    }
}

/// Marches `Θ_wz = AΘ_w + BΘ_z` outward from the data row `j0` and data column `i0` into the
/// quadrant selected by the step signs `di, dj`.
fn march(theta: &mut Table, co: &EdgeCoeffs, grid: &WGrid, i0: usize, j0: usize, di: isize, dj: isize) {
    let (nw, nz) = (theta.nw as isize, theta.nz as isize);
    let hz = 0.5 * grid.z.step() * dj as f64;
    let hw = 0.5 * grid.w.step() * di as f64;
    let mut i = i0 as isize;
    while (0..nw).contains(&(i + di)) {
        let ip = (i + di) as usize;
        let iu = i as usize;
        let imid = iu.min(ip);
        let mut j = j0 as isize;
        while (0..nz).contains(&(j + dj)) {
            let jp = (j + dj) as usize;
            let ju = j as usize;
            let jmid = ju.min(jp);
            let ta = theta.at(iu, ju);
            let tb = theta.at(ip, ju);
            let tc = theta.at(iu, jp);
            let a0 = co.a_edge.at(imid, ju);
            let a1 = co.a_edge.at(imid, jp);
            let b0 = co.b_edge.at(iu, jmid);
            let b1 = co.b_edge.at(ip, jmid);
            let base = tb + tc - ta;
            let mut td = base + hz * (a0 + a1) * (tb - ta) + hw * (b0 + b1) * (tc - ta);
            for _ in 0..2 {
                td = base
                    + hz * (a0 * (tb - ta) + a1 * (td - tc))
                    + hw * (b0 * (tc - ta) + b1 * (td - tb));
            }
            theta.set(ip, jp, td);
            j += dj;
        }
        i += di;
    }
}

/// One Goursat solution with its flux, on the full rectangle (uncut).
#[derive(Clone, Debug)]
pub struct GoursatSolution {
    pub xi: f64,
    pub xi_idx: usize,
    pub theta: Table,
    pub xi_flux: Table,
}

fn snap(axis: &Axis, x: f64, what: &str) -> Result<usize> {
    let h = axis.step();
    if !(x >= axis.lo - h && x <= axis.hi + h) {
        return Err(Error::Grid(format!("{what} = {x} is more than one cell outside [{}, {}]", axis.lo, axis.hi)));
    }
    Ok(axis.nearest(x))
}

/// Solves for `Θ[ξ, b₀]` with data `Θ(w, z̲) = b₀(w)` and `Θ(ξ, z) = b₀(ξ)g(ξ, z)`.
pub fn solve_goursat(chart: &SystemChart, gh: &GhTables, xi: f64, b0: &dyn Fn(f64) -> f64) -> Result<GoursatSolution> {
    let co = EdgeCoeffs::new(chart, &gh.grid);
    solve_with(chart, gh, &co, xi, b0)
}

fn solve_with(
    chart: &SystemChart,
    gh: &GhTables,
    co: &EdgeCoeffs,
    xi: f64,
    b0: &dyn Fn(f64) -> f64,
) -> Result<GoursatSolution> {
    let grid = &gh.grid;
    let ix = snap(&grid.w, xi, "xi")?;
    let xi = grid.w.node(ix);
    let (nw, nz) = (grid.w.n, grid.z.n);
    let mut theta = Table::zeros(nw, nz);
    for i in 0..nw {
        theta.set(i, 0, b0(grid.w.node(i)));
    }
    let bx = b0(xi);
    for j in 0..nz {
        theta.set(ix, j, bx * gh.g.at(ix, j));
    }
    march(&mut theta, co, grid, ix, 0, 1, 1);
    march(&mut theta, co, grid, ix, 0, -1, 1);
    let xi_flux = entropy_flux(chart, grid, &theta, ix)?;
    Ok(GoursatSolution { xi, xi_idx: ix, theta, xi_flux })
}

/// `Ξ(w, z) = λ₁Θ − ∫_ξ^w ∂_wλ₁ Θ dv` by composite trapezoid, anchored at the cut column.
pub fn entropy_flux(chart: &SystemChart, grid: &WGrid, theta: &Table, xi_idx: usize) -> Result<Table> {
    let (nw, nz) = (grid.w.n, grid.z.n);
    let dw = grid.w.step();
    let mut flux = Table::zeros(nw, nz);
    let mut dl = vec![0.0; nw];
    let mut l1 = vec![0.0; nw];
    for j in 0..nz {
        let z = grid.z.node(j);
        for i in 0..nw {
            let w = grid.w.node(i);
            l1[i] = chart.speeds(w, z).0;
            dl[i] = chart.speed_derivs(w, z).l1w * theta.at(i, j);
        }
        flux.set(xi_idx, j, l1[xi_idx] * theta.at(xi_idx, j));
        let mut s = 0.0;
        for i in xi_idx + 1..nw {
            s += 0.5 * dw * (dl[i - 1] + dl[i]);
            flux.set(i, j, l1[i] * theta.at(i, j) - s);
        }
        s = 0.0;
        for i in (0..xi_idx).rev() {
            s -= 0.5 * dw * (dl[i] + dl[i + 1]);
            flux.set(i, j, l1[i] * theta.at(i, j) - s);
        }
        for i in 0..nw {
            if !flux.at(i, j).is_finite() {
                return Err(Error::Quadrature { w: grid.w.node(i), z });
            }
        }
    }
    Ok(flux)
}

/// Symmetric solve: `Θ̂(w̲, z) = 1`, `Θ̂(w, ζ) = h(w, ζ)`, flux `φ = λ₂Θ̂ − ∫_ζ^z ∂_zλ₂ Θ̂ dy`.
fn solve_zeta(chart: &SystemChart, gh: &GhTables, co: &EdgeCoeffs, jz: usize) -> Result<(Table, Table)> {
    let grid = &gh.grid;
    let (nw, nz) = (grid.w.n, grid.z.n);
    let mut theta = Table::zeros(nw, nz);
    for j in 0..nz {
        theta.set(0, j, 1.0);
    }
    for i in 0..nw {
        theta.set(i, jz, gh.h.at(i, jz));
    }
    march(&mut theta, co, grid, 0, jz, 1, 1);
    march(&mut theta, co, grid, 0, jz, 1, -1);
    let dz = grid.z.step();
    let mut flux = Table::zeros(nw, nz);
    let mut dl = vec![0.0; nz];
    let mut l2 = vec![0.0; nz];
    for i in 0..nw {
        let w = grid.w.node(i);
        for j in 0..nz {
            let z = grid.z.node(j);
            l2[j] = chart.speeds(w, z).1;
            dl[j] = chart.speed_derivs(w, z).l2z * theta.at(i, j);
        }
        flux.set(i, jz, l2[jz] * theta.at(i, jz));
        let mut s = 0.0;
        for j in jz + 1..nz {
            s += 0.5 * dz * (dl[j - 1] + dl[j]);
            flux.set(i, j, l2[j] * theta.at(i, j) - s);
        }
        s = 0.0;
        for j in (0..jz).rev() {
            s -= 0.5 * dz * (dl[j] + dl[j + 1]);
            flux.set(i, j, l2[j] * theta.at(i, j) - s);
        }
        for j in 0..nz {
            if !flux.at(i, j).is_finite() || !theta.at(i, j).is_finite() {
                return Err(Error::Quadrature { w, z: grid.z.node(j) });
            }
        }
    }
    Ok((theta, flux))
}

/// Strip width and lower bound from the localized monotonicity estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripConstants {
    pub r_bar: f64,
    pub c: f64,
    /// Number of ξ-steps spanned by `r̄`.
    pub m: usize,
    pub chi_min: f64,
    pub dlam_min: f64,
}

/// The `b₀ ≡ 1` entropy families on snapped cut grids. Tables are uncut; cuts are applied
/// on access.
#[derive(Clone, Debug)]
pub struct EntropyFamily {
    pub chart: SystemChart,
    pub gh: GhTables,
    pub xi: Vec<f64>,
    pub xi_idx: Vec<usize>,
    pub theta: Vec<Table>,
    pub flux: Vec<Table>,
    pub zeta: Vec<f64>,
    pub zeta_idx: Vec<usize>,
    pub theta_z: Vec<Table>,
    pub flux_z: Vec<Table>,
    pub strip: StripConstants,
}

/// `n` cut values spread evenly over `axis`, before snapping.
pub fn uniform_cuts(axis: &Axis, n: usize) -> Vec<f64> {
    (0..n).map(|l| axis.lo + (axis.hi - axis.lo) * l as f64 / (n - 1).max(1) as f64).collect()
}

fn snap_grid(axis: &Axis, cuts: &[f64], what: &str) -> Result<Vec<usize>> {
    if cuts.len() < 2 {
        return Err(Error::Grid(format!("{what} grid needs at least two cuts")));
    }
    let idx = cuts.iter().map(|&c| snap(axis, c, what)).collect::<Result<Vec<_>>>()?;
    if idx.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Grid(format!(
            "{what} grid collapses after snapping to {} nodes; refine the W-grid",
            axis.n
        )));
    }
    Ok(idx)
}

pub fn build_family(chart: &SystemChart, gh: GhTables, xi_grid: &[f64], zeta_grid: &[f64]) -> Result<EntropyFamily> {
    let family = build_family_unchecked(chart, gh, xi_grid, zeta_grid)?;
    let strip = strip_constants(&family)?;
    Ok(EntropyFamily { strip, ..family })
}

/// Builds all tables but leaves the strip constants zeroed, for charts where they do not exist.
pub fn build_family_unchecked(
    chart: &SystemChart,
    gh: GhTables,
    xi_grid: &[f64],
    zeta_grid: &[f64],
) -> Result<EntropyFamily> {
    let grid = gh.grid;
    let xi_idx = snap_grid(&grid.w, xi_grid, "xi")?;
    let zeta_idx = snap_grid(&grid.z, zeta_grid, "zeta")?;
    let co = EdgeCoeffs::new(chart, &grid);
    let one = |_: f64| 1.0;
    let sols = xi_idx
        .par_iter()
        .map(|&ix| solve_with(chart, &gh, &co, grid.w.node(ix), &one))
        .collect::<Result<Vec<_>>>()?;
    let zsols = zeta_idx
        .par_iter()
        .map(|&jz| solve_zeta(chart, &gh, &co, jz))
        .collect::<Result<Vec<_>>>()?;
    let (theta, flux) = sols.into_iter().map(|s| (s.theta, s.xi_flux)).unzip();
    let (theta_z, flux_z) = zsols.into_iter().unzip();
    Ok(EntropyFamily {
        chart: chart.clone(),
        xi: xi_idx.iter().map(|&i| grid.w.node(i)).collect(),
        zeta: zeta_idx.iter().map(|&j| grid.z.node(j)).collect(),
        xi_idx,
        zeta_idx,
        theta,
        flux,
        theta_z,
        flux_z,
        gh,
        strip: StripConstants { r_bar: 0.0, c: 0.0, m: 0, chi_min: 0.0, dlam_min: 0.0 },
    })
}

impl EntropyFamily {
    pub fn grid(&self) -> &WGrid {
        &self.gh.grid
    }

    /// `χ[ξ_l]` at node `(i, j)`.
    #[inline]
    pub fn chi(&self, l: usize, i: usize, j: usize) -> f64 {
        if i >= self.xi_idx[l] { self.theta[l].at(i, j) } else { 0.0 }
    }

    #[inline]
    pub fn psi(&self, l: usize, i: usize, j: usize) -> f64 {
        if i >= self.xi_idx[l] { self.flux[l].at(i, j) } else { 0.0 }
    }

    /// Epigraph cut `χ̃[ξ_l] = Θ·1{w < ξ}`.
    #[inline]
    pub fn chi_tilde(&self, l: usize, i: usize, j: usize) -> f64 {
        if i < self.xi_idx[l] { self.theta[l].at(i, j) } else { 0.0 }
    }

    #[inline]
    pub fn psi_tilde(&self, l: usize, i: usize, j: usize) -> f64 {
        if i < self.xi_idx[l] { self.flux[l].at(i, j) } else { 0.0 }
    }

    /// `υ[ζ_m] = Θ̂·1{z ≥ ζ}`.
    #[inline]
    pub fn upsilon(&self, m: usize, i: usize, j: usize) -> f64 {
        if j >= self.zeta_idx[m] { self.theta_z[m].at(i, j) } else { 0.0 }
    }

    #[inline]
    pub fn varphi(&self, m: usize, i: usize, j: usize) -> f64 {
        if j >= self.zeta_idx[m] { self.flux_z[m].at(i, j) } else { 0.0 }
    }

    /// Uncut `Θ[ξ_l]` at every cut value, interpolated to `(w, z)`.
    pub fn theta_profile(&self, w: f64, z: f64) -> Vec<f64> {
        self.theta.iter().map(|t| t.interp(self.grid(), w, z)).collect()
    }

    pub fn flux_profile(&self, w: f64, z: f64) -> Vec<f64> {
        self.flux.iter().map(|t| t.interp(self.grid(), w, z)).collect()
    }

    /// `χ[ξ](w, z)` with `Θ` linear in `ξ` between cut nodes.
    pub fn chi_at(&self, xi: f64, w: f64, z: f64) -> f64 {
        if w < xi {
            return 0.0;
        }
        let (l, s) = quad::locate_sorted(&self.xi, xi);
        let g = self.grid();
        (1.0 - s) * self.theta[l].interp(g, w, z) + s * self.theta[l + 1].interp(g, w, z)
    }

    /// `g(w, z)` by bilinear interpolation.
    pub fn g_at(&self, w: f64, z: f64) -> f64 {
        self.gh.g.interp(self.grid(), w, z)
    }

    /// `sup |Θ[ξ]|` over the cut region `{w ≥ ξ}` of every member.
    pub fn sup_theta(&self) -> f64 {
        let g = self.grid();
        let mut m: f64 = 0.0;
        for (l, t) in self.theta.iter().enumerate() {
            for i in self.xi_idx[l]..g.w.n {
                for j in 0..g.z.n {
                    m = m.max(t.at(i, j).abs());
                }
            }
        }
        m
    }

    #[inline]
    fn lam_node(&self, l: usize, i: usize, j: usize) -> f64 {
        self.flux[l].at(i, j) / self.theta[l].at(i, j)
    }

    /// Centered ξ-difference of `λ₁[ξ]` at cut node `l`, one-sided at the ends.
    fn dlam_node(&self, l: usize, i: usize, j: usize) -> f64 {
        let last = self.xi.len() - 1;
        let (a, b) = (l.saturating_sub(1), (l + 1).min(last));
        (self.lam_node(b, i, j) - self.lam_node(a, i, j)) / (self.xi[b] - self.xi[a])
    }

    /// `λ₁[ξ](w, z) = ψ/χ`, trilinear in `(ξ, w, z)`. Off-strip queries clamp `ξ` into
    /// `[w − r̄, w]` and return `true` as the second value, or fail when `strict`.
    pub fn kinetic_speed(&self, xi: f64, w: f64, z: f64, strict: bool) -> Result<(f64, bool)> {
        self.kinetic_speed_side(xi, w, z, strict, false)
    }

    /// As [`Self::kinetic_speed`]; with `epi` the strip is the epigraph side `w ≤ ξ ≤ w + r̄`
    /// used by curves carrying the tilde cut.
    pub fn kinetic_speed_side(&self, xi: f64, w: f64, z: f64, strict: bool, epi: bool) -> Result<(f64, bool)> {
        let r = self.strip.r_bar;
        let tol = 1e-12;
        let (lo, hi) = if epi { (w, w + r) } else { (w - r, w) };
        let off = xi > hi + tol || xi < lo - tol;
        if off && strict {
            return Err(Error::Strip { xi, w, r_bar: r });
        }
        let x = if off { xi.clamp(lo, hi) } else { xi };
        let g = self.grid();
        let (l, s) = quad::locate_sorted(&self.xi, x);
        let (i, a) = g.w.locate(w);
        let (j, b) = g.z.locate(z);
        let plane = |l: usize| {
            let v = |ii, jj| self.lam_node(l, ii, jj);
            (1.0 - a) * ((1.0 - b) * v(i, j) + b * v(i, j + 1)) + a * ((1.0 - b) * v(i + 1, j) + b * v(i + 1, j + 1))
        };
        Ok(((1.0 - s) * plane(l) + s * plane(l + 1), off))
    }
}

/// Largest strip width (in ξ-steps) on which `χ[ξ]` and `∂_ξλ₁[ξ]` both stay above half their
/// one-step minima; `c` is 0.9 times the smaller minimum on that strip.
pub fn strip_constants(family: &EntropyFamily) -> Result<StripConstants> {
    let g = family.grid();
    let (nw, nz) = (g.w.n, g.z.n);
    let nl = family.xi.len();
    let dw = g.w.step();
    let dxi = (family.xi[nl - 1] - family.xi[0]) / (nl - 1) as f64;
    let width = |m: usize| ((m as f64 * dxi / dw).round() as usize).max(1);
    let m_max = ((g.w.hi - g.w.lo) / dxi).ceil() as usize;

    // Running minima per strip width; each width adds the columns beyond the previous one.
    let mut chi_min = f64::INFINITY;
    let mut d_min = f64::INFINITY;
    let mut upper: Vec<usize> = family.xi_idx.clone();
    let mut first = None;
    let mut best = None;
    for m in 1..=m_max {
        for l in 0..nl {
            let lo = if m == 1 { family.xi_idx[l] } else { upper[l] + 1 };
            let hi = (family.xi_idx[l] + width(m)).min(nw - 1);
            for i in lo..=hi {
                for j in 0..nz {
                    chi_min = chi_min.min(family.theta[l].at(i, j));
                    d_min = d_min.min(family.dlam_node(l, i, j));
                }
            }
            upper[l] = upper[l].max(hi);
        }
        match first {
            None => {
                if !(chi_min > 0.0) || !(d_min > 1e-12) {
                    return Err(Error::DegenerateStrip(format!(
                        "one-step minima chi = {chi_min:.3e}, dlambda/dxi = {d_min:.3e}"
                    )));
                }
                first = Some((chi_min, d_min));
            }
            Some((c1, d1)) => {
                if chi_min < 0.5 * c1 || d_min < 0.5 * d1 {
                    break;
                }
            }
        }
        best = Some((m, chi_min, d_min));
        if upper.iter().all(|&u| u == nw - 1) {
            break;
        }
    }
    let (m, cm, dm) = best.expect("at least one strip width is examined");
    if m < 2 {
        return Err(Error::DegenerateStrip(format!("only one xi-step qualifies (dxi = {dxi:.3e})")));
    }
    let r_bar = (width(m) as f64 * dw).min(g.w.hi - g.w.lo);
    Ok(StripConstants { r_bar, c: 0.9 * cm.min(dm), m, chi_min: cm, dlam_min: dm })
}

/// Reconstructed entropy pair from edge derivative samples `ρ₁` (on the ξ-grid) and `ρ₂`
/// (on the ζ-grid), by the trapezoid rule over the cut families. Returns `(η, q)` tables.
pub fn reconstruct_entropy(family: &EntropyFamily, rho1: &[f64], rho2: &[f64]) -> Result<(Table, Table)> {
    if rho1.len() != family.xi.len() || rho2.len() != family.zeta.len() {
        return Err(Error::GridMismatch(format!(
            "got {}/{} edge samples for a family with {}/{} cuts",
            rho1.len(),
            rho2.len(),
            family.xi.len(),
            family.zeta.len()
        )));
    }
    let g = family.grid();
    let (nw, nz) = (g.w.n, g.z.n);
    let wx = quad::trapezoid_weights(&family.xi);
    let wz = quad::trapezoid_weights(&family.zeta);
    let mut eta = Table::zeros(nw, nz);
    let mut q = Table::zeros(nw, nz);
    for i in 0..nw {
        for j in 0..nz {
            let (mut e, mut f) = (0.0, 0.0);
            for l in 0..family.xi.len() {
                let c = wx[l] * rho1[l];
                e += c * family.chi(l, i, j);
                f += c * family.psi(l, i, j);
            }
            for m in 0..family.zeta.len() {
                let c = wz[m] * rho2[m];
                e += c * family.upsilon(m, i, j);
                f += c * family.varphi(m, i, j);
            }
            eta.set(i, j, e);
            q.set(i, j, f);
        }
    }
    Ok((eta, q))
}

/// Reconstruction with the cut applied exactly: `Θ` is taken linear in `ξ` between cut nodes
/// and each piece is integrated against `ρ` by Simpson's rule.
pub fn reconstruct_entropy_exact(
    family: &EntropyFamily,
    rho1: &(dyn Fn(f64) -> f64 + Sync),
    rho2: &(dyn Fn(f64) -> f64 + Sync),
) -> (Table, Table) {
    let g = *family.grid();
    let (nw, nz) = (g.w.n, g.z.n);
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..nw)
        .into_par_iter()
        .map(|i| {
            let w = g.w.node(i);
            let mut er = vec![0.0; nz];
            let mut qr = vec![0.0; nz];
            let mut tv = vec![0.0; family.xi.len()];
            let mut fv = vec![0.0; family.xi.len()];
            let mut tz = vec![0.0; family.zeta.len()];
            let mut fz = vec![0.0; family.zeta.len()];
            for j in 0..nz {
                let z = g.z.node(j);
                for l in 0..tv.len() {
                    tv[l] = family.theta[l].at(i, j);
                    fv[l] = family.flux[l].at(i, j);
                }
                for m in 0..tz.len() {
                    tz[m] = family.theta_z[m].at(i, j);
                    fz[m] = family.flux_z[m].at(i, j);
                }
                let lo_x = family.xi[0];
                let lo_z = family.zeta[0];
                er[j] = quad::linear_times(&family.xi, &tv, rho1, lo_x, w)
                    + quad::linear_times(&family.zeta, &tz, rho2, lo_z, z);
                qr[j] = quad::linear_times(&family.xi, &fv, rho1, lo_x, w)
                    + quad::linear_times(&family.zeta, &fz, rho2, lo_z, z);
            }
            (er, qr)
        })
        .collect();
    let mut eta = Table::zeros(nw, nz);
    let mut q = Table::zeros(nw, nz);
    for (i, (er, qr)) in rows.into_iter().enumerate() {
        eta.data[i * nz..(i + 1) * nz].copy_from_slice(&er);
        q.data[i * nz..(i + 1) * nz].copy_from_slice(&qr);
    }
    (eta, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p_gh(n: usize) -> (SystemChart, GhTables) {
        let chart = SystemChart::p_system();
        let grid = WGrid::for_chart(&chart, n + 1, n + 1).unwrap();
        let gh = compute_gh(&chart, grid).unwrap();
        (chart, gh)
    }

    // Independent p-system pieces for oracles: K by its closed form, K⁻¹ by bisection.
    fn k_closed(a: f64) -> f64 {
        let k = (1.0 + 3.0 * a * a).sqrt();
        0.5 * a * k + (3f64.sqrt() * a).asinh() / (2.0 * 3f64.sqrt())
    }

    fn a_of(w: f64, z: f64) -> f64 {
        let target = 0.5 * (z - w);
        let (mut lo, mut hi) = (0.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if k_closed(mid) < target { lo = mid } else { hi = mid }
        }
        0.5 * (lo + hi)
    }

    fn simpson_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, 0.5 * tol) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol)
    }

    #[test]
    fn decoupled_gh_identically_one() {
        let chart = SystemChart::Decoupled;
        let gh = compute_gh(&chart, WGrid::for_chart(&chart, 17, 17).unwrap()).unwrap();
        assert!(gh.g.data.iter().chain(&gh.h.data).all(|&v| v == 1.0));
    }

    #[test]
    fn p_system_g_edges_and_center_oracle() {
        let chart = SystemChart::p_system();
        let grid = WGrid { w: Axis::new(-0.8, -0.4, 3), z: Axis::new(0.4, 0.8, 4097) };
        let gh = compute_gh(&chart, grid).unwrap();
        for i in 0..3 {
            assert_eq!(gh.g.at(i, 0), 1.0);
        }
        for j in 0..grid.z.n {
            assert_eq!(gh.h.at(0, j), 1.0);
        }
        // A = -∂_zλ₁/(λ₁-λ₂) = -3a/(4k³) for this orientation.
        let w = -0.6;
        let integrand = |y: f64| {
            let a = a_of(w, y);
            -3.0 * a / (4.0 * (1.0 + 3.0 * a * a).powf(1.5))
        };
        let exact = simpson_adaptive(&integrand, 0.4, 0.6, 1e-13).exp();
        assert!((gh.g.at(1, 2048) - exact).abs() < 1e-8, "{} vs {}", gh.g.at(1, 2048), exact);
        assert!(gh.g.data.iter().chain(&gh.h.data).all(|&v| v > 0.0));
    }

    #[test]
    fn decoupled_goursat_oracles() {
        let chart = SystemChart::Decoupled;
        let grid = WGrid::for_chart(&chart, 129, 129).unwrap();
        let gh = compute_gh(&chart, grid).unwrap();
        let xi = uniform_cuts(&grid.w, 17);
        let fam = build_family(&chart, gh, &xi, &uniform_cuts(&grid.z, 17)).unwrap();
        for (l, &x) in fam.xi.iter().enumerate() {
            for i in 0..129 {
                for j in 0..129 {
                    let ind = if grid.w.node(i) >= x { 1.0 } else { 0.0 };
                    assert!((fam.theta[l].at(i, j) - 1.0).abs() < 1e-10);
                    assert!((fam.chi(l, i, j) - ind).abs() < 1e-10);
                    assert!((fam.psi(l, i, j) - x * ind).abs() < 1e-10);
                    assert_eq!(fam.chi(l, i, j) + fam.chi_tilde(l, i, j), fam.theta[l].at(i, j));
                }
            }
        }
        assert!((fam.strip.c - 0.9).abs() < 1e-12);
        assert!((fam.strip.r_bar - 2.0).abs() < 1e-12);
        let (lam, off) = fam.kinetic_speed(0.1, 0.3, -0.2, true).unwrap();
        assert!((lam - 0.1).abs() < 1e-10 && !off);
    }

    #[test]
    fn zero_data_gives_zero() {
        let (chart, gh) = p_gh(32);
        let s = solve_goursat(&chart, &gh, -0.6, &|_| 0.0).unwrap();
        assert!(s.theta.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn data_lines_exact_and_flux_anchored() {
        let (chart, gh) = p_gh(64);
        let b0 = |w: f64| 1.0 + w * w;
        let s = solve_goursat(&chart, &gh, -0.61, &b0).unwrap();
        let g = gh.grid;
        assert_eq!(s.xi, g.w.node(s.xi_idx));
        for i in 0..g.w.n {
            assert_eq!(s.theta.at(i, 0), b0(g.w.node(i)));
        }
        for j in 0..g.z.n {
            assert_eq!(s.theta.at(s.xi_idx, j), b0(s.xi) * gh.g.at(s.xi_idx, j));
            let l1 = chart.speeds(s.xi, g.z.node(j)).0;
            assert_eq!(s.xi_flux.at(s.xi_idx, j) - l1 * s.theta.at(s.xi_idx, j), 0.0);
        }
    }

    #[test]
    fn xi_outside_grid_is_rejected() {
        let (chart, gh) = p_gh(16);
        assert!(matches!(solve_goursat(&chart, &gh, -0.2, &|_| 1.0), Err(Error::Grid(_))));
    }

    fn max_residual(n: usize) -> f64 {
        let (chart, gh) = p_gh(n);
        let s = solve_goursat(&chart, &gh, -0.6, &|_| 1.0).unwrap();
        let g = gh.grid;
        let (dw, dz) = (g.w.step(), g.z.step());
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let (ta, tb, tc, td) = (s.theta.at(i, j), s.theta.at(i + 1, j), s.theta.at(i, j + 1), s.theta.at(i + 1, j + 1));
                let (w, z) = (g.w.node(i) + 0.5 * dw, g.z.node(j) + 0.5 * dz);
                let twz = (td - tb - tc + ta) / (dw * dz);
                let tw = 0.5 * (tb - ta + td - tc) / dw;
                let tz = 0.5 * (tc - ta + td - tb) / dz;
                r = r.max((twz - coeff_a(&chart, w, z) * tw - coeff_b(&chart, w, z) * tz).abs());
            }
        }
        r
    }

    #[test]
    fn goursat_residual_is_second_order() {
        let ratio = max_residual(128) / max_residual(256);
        assert!((ratio - 4.0).abs() <= 1.0, "ratio {ratio}");
    }

    #[test]
    fn flux_compatibility_second_order() {
        // ∂_zΞ = λ₂∂_zΘ on {w > ξ}, centered differences at interior nodes.
        let err = |n: usize| {
            let (chart, gh) = p_gh(n);
            let s = solve_goursat(&chart, &gh, -0.7, &|_| 1.0).unwrap();
            let g = gh.grid;
            let dz = g.z.step();
            let mut e: f64 = 0.0;
            for i in s.xi_idx + 1..g.w.n {
                for j in 1..g.z.n - 1 {
                    let l2 = chart.speeds(g.w.node(i), g.z.node(j)).1;
                    let dxi = (s.xi_flux.at(i, j + 1) - s.xi_flux.at(i, j - 1)) / (2.0 * dz);
                    let dth = (s.theta.at(i, j + 1) - s.theta.at(i, j - 1)) / (2.0 * dz);
                    e = e.max((dxi - l2 * dth).abs());
                }
            }
            e
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e2 < 1e-4 && e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn theta_smooth_in_xi() {
        let (chart, gh) = p_gh(128);
        let jump = |nxi: usize| {
            let fam = build_family_unchecked(&chart, gh.clone(), &uniform_cuts(&gh.grid.w, nxi), &[0.4, 0.8]).unwrap();
            (0..nxi - 1).map(|l| fam.theta[l].max_abs_diff(&fam.theta[l + 1])).fold(0.0, f64::max)
        };
        let (a, b) = (jump(17), jump(33));
        assert!(a > 0.0 && (a / b - 2.0).abs() < 0.3, "{a} {b}");
    }

    #[test]
    fn p_system_strip_constants() {
        let consts = |n: usize| {
            let (chart, gh) = p_gh(n);
            let cuts = uniform_cuts(&gh.grid.w, 65);
            build_family(&chart, gh.clone(), &cuts, &uniform_cuts(&gh.grid.z, 65)).unwrap().strip
        };
        let (s1, s2) = (consts(128), consts(256));
        assert!(s1.c > 0.0 && s1.m >= 2);
        assert!((s1.c / s2.c - 1.0).abs() < 0.1, "{s1:?} {s2:?}");
    }

    #[test]
    fn strip_guard_and_clamp() {
        let (chart, gh) = p_gh(128);
        let fam = build_family(&chart, gh.clone(), &uniform_cuts(&gh.grid.w, 65), &uniform_cuts(&gh.grid.z, 65)).unwrap();
        let (w, z) = (-0.6, 0.6);
        assert!(matches!(fam.kinetic_speed(w + 0.01, w, z, true), Err(Error::Strip { .. })));
        let (clamped, off) = fam.kinetic_speed(w + 0.01, w, z, false).unwrap();
        let (at_w, _) = fam.kinetic_speed(w, w, z, true).unwrap();
        assert!(off && clamped == at_w);
        assert!((at_w - chart.speeds(w, z).0).abs() < 1e-12);
    }

    #[test]
    fn non_gnl_strip_is_degenerate() {
        let chart = SystemChart::Linear { a: -1.0, b: 1.0 };
        let gh = compute_gh(&chart, WGrid::for_chart(&chart, 65, 65).unwrap()).unwrap();
        let cuts = uniform_cuts(&gh.grid.w, 33);
        let r = build_family(&chart, gh.clone(), &cuts, &uniform_cuts(&gh.grid.z, 33));
        assert!(matches!(r, Err(Error::DegenerateStrip(_))));
    }

    #[test]
    fn reconstruction_basics() {
        let chart = SystemChart::Decoupled;
        let gh = compute_gh(&chart, WGrid::for_chart(&chart, 65, 65).unwrap()).unwrap();
        let fam = build_family(&chart, gh.clone(), &uniform_cuts(&gh.grid.w, 33), &uniform_cuts(&gh.grid.z, 33)).unwrap();
        let (eta, q) = reconstruct_entropy(&fam, &[0.0; 33], &[0.0; 33]).unwrap();
        assert_eq!(eta.max_abs() + q.max_abs(), 0.0);
        assert!(matches!(reconstruct_entropy(&fam, &[0.0; 32], &[0.0; 33]), Err(Error::GridMismatch(_))));
        let (eta, _) = reconstruct_entropy(&fam, &[1.0; 33], &[0.0; 33]).unwrap();
        let dxi = fam.xi[1] - fam.xi[0];
        for i in 0..65 {
            let w = gh.grid.w.node(i);
            assert!((eta.at(i, 7) - (w + 1.0)).abs() <= dxi);
        }
        let (eta, q) = reconstruct_entropy_exact(&fam, &|_| 1.0, &|_| 0.0);
        for i in 0..65 {
            let w = gh.grid.w.node(i);
            assert!((eta.at(i, 3) - (w + 1.0)).abs() < 1e-12);
            assert!((q.at(i, 3) - 0.5 * (w * w - 1.0)).abs() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn goursat_is_linear(alpha in -2.0f64..2.0, beta in -2.0f64..2.0, xi in -0.8f64..-0.4) {
            let (chart, gh) = p_gh(48);
            let b1 = |_: f64| 1.0;
            let b2 = |w: f64| (3.0 * w).sin();
            let s1 = solve_goursat(&chart, &gh, xi, &b1).unwrap();
            let s2 = solve_goursat(&chart, &gh, xi, &b2).unwrap();
            let s = solve_goursat(&chart, &gh, xi, &|w| alpha * b1(w) + beta * b2(w)).unwrap();
            for k in 0..s.theta.data.len() {
                let lin = alpha * s1.theta.data[k] + beta * s2.theta.data[k];
                prop_assert!((s.theta.data[k] - lin).abs() < 1e-10);
            }
        }
    }
}
