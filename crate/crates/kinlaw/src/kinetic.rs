//! Kinetic fields of a trajectory and weak-residual estimates of the defect measures.
//!
//! Every estimate is a cell-mass table on the snapshot grid, optionally with a kinetic
//! variable. Residuals use central differences in `t` and `x`, then are tested against
//! normalized tensor hats of fixed widths (in cells).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goursat::{reconstruct_entropy_exact, EntropyFamily, Table, WGrid};
use crate::quad;
use crate::system::{State, SystemChart};
use crate::viscous::GridSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// `χ_u = χ[ξ](u)`, supported on `ξ ≤ w`.
    Chi,
    /// `χ̃_u`, supported on `ξ > w`.
    ChiTilde,
    /// `υ_u = υ[ζ](u)`, supported on `ζ ≤ z`.
    Upsilon,
    /// `υ̃_u`, supported on `ζ > z`.
    UpsilonTilde,
}

impl Variant {
    fn uses_zeta(self) -> bool {
        matches!(self, Variant::Upsilon | Variant::UpsilonTilde)
    }

    fn hypograph(self) -> bool {
        matches!(self, Variant::Chi | Variant::Upsilon)
    }
}

/// Dense kinetic function over `(t, x, k)`. Stores the uncut family values at each state and
/// the cut coordinate; the indicator is applied on access.
#[derive(Clone, Debug)]
pub struct KineticField {
    pub variant: Variant,
    pub kgrid: Vec<f64>,
    pub times: Vec<f64>,
    pub nx: usize,
    pub dx: f64,
    pub length: f64,
    /// `w` (or `z`) at every `(n, i)`.
    pub cut: Vec<f64>,
    uncut: Vec<f64>,
    uncut_flux: Vec<f64>,
}

impl KineticField {
    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn nk(&self) -> usize {
        self.kgrid.len()
    }

    #[inline]
    fn inside(&self, k: f64, c: f64) -> bool {
        if self.variant.hypograph() { k <= c } else { k > c }
    }

    pub fn value(&self, n: usize, i: usize, l: usize) -> f64 {
        let p = n * self.nx + i;
        if self.inside(self.kgrid[l], self.cut[p]) { self.uncut[p * self.nk() + l] } else { 0.0 }
    }

    pub fn flux(&self, n: usize, i: usize, l: usize) -> f64 {
        let p = n * self.nx + i;
        if self.inside(self.kgrid[l], self.cut[p]) { self.uncut_flux[p * self.nk() + l] } else { 0.0 }
    }

    /// `(∫ value·ρ dk, ∫ flux·ρ dk)` at `(n, i)` with the cut applied exactly.
    fn tested(&self, p: usize, rho: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
        let nk = self.nk();
        let c = self.cut[p];
        let (a, b) = if self.variant.hypograph() { (lo, hi.min(c)) } else { (lo.max(c), hi) };
        let v = &self.uncut[p * nk..(p + 1) * nk];
        let f = &self.uncut_flux[p * nk..(p + 1) * nk];
        (quad::linear_times(&self.kgrid, v, rho, a, b), quad::linear_times(&self.kgrid, f, rho, a, b))
    }
}

fn check_chart(sol: &SystemChart, fam: &SystemChart) -> Result<()> {
    if sol != fam {
        return Err(Error::ChartMismatch { solution: sol.id().into(), family: fam.id().into() });
    }
    Ok(())
}

pub fn assemble(sol: &GridSolution, family: &EntropyFamily, variant: Variant) -> Result<KineticField> {
    check_chart(&sol.chart, &family.chart)?;
    let (tables, fluxes, kgrid) = if variant.uses_zeta() {
        (&family.theta_z, &family.flux_z, family.zeta.clone())
    } else {
        (&family.theta, &family.flux, family.xi.clone())
    };
    let grid = *family.grid();
    let nk = kgrid.len();
    let chart = &sol.chart;
    let rows: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = sol
        .u
        .par_iter()
        .map(|row| {
            let mut cut = Vec::with_capacity(row.len());
            let mut v = Vec::with_capacity(row.len() * nk);
            let mut f = Vec::with_capacity(row.len() * nk);
            for s in row {
                let (w, z) = chart.to_riemann_unchecked(*s);
                cut.push(if variant.uses_zeta() { z } else { w });
                for l in 0..nk {
                    v.push(tables[l].interp(&grid, w, z));
                    f.push(fluxes[l].interp(&grid, w, z));
                }
            }
            (cut, v, f)
        })
        .collect();
    let mut field = KineticField {
        variant,
        kgrid,
        times: sol.times.clone(),
        nx: sol.nx,
        dx: sol.dx,
        length: sol.length,
        cut: Vec::new(),
        uncut: Vec::new(),
        uncut_flux: Vec::new(),
    };
    for (c, v, f) in rows {
        field.cut.extend(c);
        field.uncut.extend(v);
        field.uncut_flux.extend(f);
    }
    Ok(field)
}

/// Hat half-widths, in cells of the respective grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestWidths {
    pub t: usize,
    pub x: usize,
    pub k: usize,
}

impl Default for TestWidths {
    fn default() -> Self {
        TestWidths { t: 4, x: 4, k: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    MuEta,
    KineticResidual,
    Mu1Eps,
    NuSup,
    Mu0Split,
    Mu1Split,
}

/// Cell masses on the snapshot grid, `mass[(n·nx + i)·nk + l]`. `kgrid` is empty when
/// the measure has no kinetic variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub kind: MeasureKind,
    pub times: Vec<f64>,
    pub nx: usize,
    pub dx: f64,
    /// Cell `i` is centred at `x0 + i·dx`.
    #[serde(default)]
    pub x0: f64,
    pub length: f64,
    pub kgrid: Vec<f64>,
    pub widths: TestWidths,
    #[serde(skip)]
    pub mass: Vec<f64>,
}

impl MeasureEstimate {
    pub fn nt(&self) -> usize {
        self.times.len()
    }

    pub fn nk(&self) -> usize {
        self.kgrid.len().max(1)
    }

    #[inline]
    pub fn at(&self, n: usize, i: usize, l: usize) -> f64 {
        self.mass[(n * self.nx + i) * self.nk() + l]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn total_variation(&self) -> f64 {
        self.mass.iter().map(|m| m.abs()).sum()
    }

    pub fn positive_part(&self) -> f64 {
        self.mass.iter().map(|m| m.max(0.0)).sum()
    }

    /// Masses summed over the kinetic variable, `(n·nx + i)`.
    pub fn project_tx(&self) -> Vec<f64> {
        self.mass.chunks(self.nk()).map(|c| c.iter().sum()).collect()
    }

    /// Sum of masses whose cell centre satisfies `keep(t, x)`.
    pub fn sum_where(&self, keep: &dyn Fn(f64, f64) -> bool) -> f64 {
        let p = self.project_tx();
        let mut s = 0.0;
        for n in 0..self.nt() {
            for i in 0..self.nx {
                if keep(self.times[n], self.x0 + i as f64 * self.dx) {
                    s += p[n * self.nx + i];
                }
            }
        }
        s
    }
}

fn hat_kernel(w: usize) -> Vec<f64> {
    let w = w.max(1);
    (0..2 * w - 1).map(|k| (1.0 - (k as f64 - (w - 1) as f64).abs() / w as f64) / w as f64).collect()
}

/// Time-cell lengths around each snapshot.
fn time_cells(times: &[f64]) -> Vec<f64> {
    let nt = times.len();
    (0..nt)
        .map(|n| {
            let a = if n == 0 { times[0] } else { 0.5 * (times[n - 1] + times[n]) };
            let b = if n + 1 == nt { times[nt - 1] } else { 0.5 * (times[n] + times[n + 1]) };
            b - a
        })
        .collect()
}

/// Central discrete divergence of `(g, f)` at interior snapshots, tested against normalized
/// hats and converted to cell masses. `g` and `f` are `(n·nx + i)` arrays.
fn tested_divergence(g: &[f64], f: &[f64], times: &[f64], nx: usize, dx: f64, wt: usize, wx: usize) -> Vec<f64> {
    let nt = times.len();
    let mut out = vec![0.0; nt * nx];
    if nt < 3 {
        return out;
    }
    let mut d = vec![0.0; nt * nx];
    for n in 1..nt - 1 {
        let dt2 = times[n + 1] - times[n - 1];
        for i in 0..nx {
            let (im, ip) = ((i + nx - 1) % nx, (i + 1) % nx);
            d[n * nx + i] = (g[(n + 1) * nx + i] - g[(n - 1) * nx + i]) / dt2 + (f[n * nx + ip] - f[n * nx + im]) / (2.0 * dx);
        }
    }
    let kx = hat_kernel(wx);
    let kt = hat_kernel(wt);
    let (hx, ht) = ((kx.len() / 2) as isize, (kt.len() / 2) as isize);
    let mut sx = vec![0.0; nt * nx];
    for n in 1..nt - 1 {
        for i in 0..nx {
            let mut s = 0.0;
            for (b, kb) in kx.iter().enumerate() {
                let ii = (i as isize + b as isize - hx).rem_euclid(nx as isize) as usize;
                s += kb * d[n * nx + ii];
            }
            sx[n * nx + i] = s;
        }
    }
    let tau = time_cells(times);
    for n in 1..nt - 1 {
        let mut norm = 0.0;
        let mut acc = vec![0.0; nx];
        for (a, ka) in kt.iter().enumerate() {
            let m = n as isize + a as isize - ht;
            if m < 1 || m > nt as isize - 2 {
                continue;
            }
            norm += ka;
            let row = &sx[m as usize * nx..(m as usize + 1) * nx];
            for i in 0..nx {
                acc[i] += ka * row[i];
            }
        }
        for i in 0..nx {
            out[n * nx + i] = acc[i] / norm * tau[n] * dx;
        }
    }
    out
}

fn ensure_widths(w: &TestWidths) -> Result<()> {
    if w.t < 1 || w.x < 1 || w.k < 1 {
        return Err(Error::Config("test widths must be at least one cell".into()));
    }
    Ok(())
}

/// Residual `∂_t χ_u + ∂_x ψ_u` tested against `φ(t,x)ρ_l(k)`, with `ρ_l` hats centred at
/// the kinetic nodes, scaled so that interior hats sum to one.
pub fn kinetic_residual(field: &KineticField, widths: TestWidths) -> Result<MeasureEstimate> {
    ensure_widths(&widths)?;
    let nk = field.nk();
    let (nt, nx) = (field.nt(), field.nx);
    let k = &field.kgrid;
    let dk = (k[nk - 1] - k[0]) / (nk - 1) as f64;
    let h = widths.k as f64 * dk;
    let scale = 1.0 / widths.k as f64;
    let per_l: Vec<Vec<f64>> = (0..nk)
        .into_par_iter()
        .map(|l| {
            let c = k[l];
            let rho = move |s: f64| scale * quad::hat(s, c, h);
            let mut g = vec![0.0; nt * nx];
            let mut f = vec![0.0; nt * nx];
            for p in 0..nt * nx {
                let (a, b) = field.tested(p, &rho, c - h, c + h);
                g[p] = a;
                f[p] = b;
            }
            tested_divergence(&g, &f, &field.times, nx, field.dx, widths.t, widths.x)
        })
        .collect();
    let mut mass = vec![0.0; nt * nx * nk];
    for (l, m) in per_l.into_iter().enumerate() {
        for p in 0..nt * nx {
            mass[p * nk + l] = m[p];
        }
    }
    Ok(MeasureEstimate {
        kind: MeasureKind::KineticResidual,
        times: field.times.clone(),
        nx,
        dx: field.dx,
        x0: 0.0,
        length: field.length,
        kgrid: field.kgrid.clone(),
        widths,
        mass,
    })
}

/// One representative of `T = ∂_k μ₁ + μ₀`: per `(t, x)` cell, `T_l = M_{l+½} − M_{l−½} + μ₀_l`
/// with `M_{−½} = 0`. Without a sign constraint the fit is exact (`μ₀ = 0`); with
/// `nonneg` the least-squares problem is solved by projected coordinate descent.
pub fn split_residual(t: &MeasureEstimate, nonneg: bool) -> (MeasureEstimate, MeasureEstimate) {
    let nk = t.nk();
    let dk = if t.kgrid.len() > 1 { (t.kgrid[nk - 1] - t.kgrid[0]) / (nk - 1) as f64 } else { 1.0 };
    let cells: Vec<(Vec<f64>, Vec<f64>)> = t
        .mass
        .par_chunks(nk)
        .map(|tl| {
            let mut m = vec![0.0; nk];
            let mut acc = 0.0;
            for l in 0..nk {
                acc += tl[l];
                m[l] = acc;
            }
            if nonneg {
                for v in m.iter_mut() {
                    *v = v.max(0.0);
                }
                // Objective Σ_l (T_l − M_l + M_{l−1})²; each M_l appears in two terms.
                for _ in 0..200 {
                    let mut change: f64 = 0.0;
                    for l in 0..nk {
                        let prev = if l == 0 { 0.0 } else { m[l - 1] };
                        let new = if l + 1 < nk {
                            0.5 * ((tl[l] + prev) + (m[l + 1] - tl[l + 1]))
                        } else {
                            tl[l] + prev
                        }
                        .max(0.0);
                        change = change.max((new - m[l]).abs());
                        m[l] = new;
                    }
                    if change < 1e-15 {
                        break;
                    }
                }
            }
            let mu0 = (0..nk).map(|l| tl[l] - m[l] + if l == 0 { 0.0 } else { m[l - 1] }).collect();
            (mu0, m.iter().map(|v| v * dk).collect())
        })
        .collect();
    let mut mu0 = t.clone();
    let mut mu1 = t.clone();
    mu0.kind = MeasureKind::Mu0Split;
    mu1.kind = MeasureKind::Mu1Split;
    for (c, (a, b)) in cells.into_iter().enumerate() {
        mu0.mass[c * nk..(c + 1) * nk].copy_from_slice(&a);
        mu1.mass[c * nk..(c + 1) * nk].copy_from_slice(&b);
    }
    (mu0, mu1)
}

/// Weak residual of `∂_t η(u) + ∂_x q(u)` for a pair given pointwise.
pub fn dissipation_measure(
    sol: &GridSolution,
    pair: &(dyn Fn(State) -> (f64, f64) + Sync),
    widths: TestWidths,
) -> Result<MeasureEstimate> {
    ensure_widths(&widths)?;
    let (eta, q): (Vec<f64>, Vec<f64>) = sol.u.par_iter().flat_map_iter(|row| row.iter().map(|s| pair(*s))).unzip();
    let mass = tested_divergence(&eta, &q, &sol.times, sol.nx, sol.dx, widths.t, widths.x);
    Ok(MeasureEstimate {
        kind: MeasureKind::MuEta,
        times: sol.times.clone(),
        nx: sol.nx,
        dx: sol.dx,
        x0: 0.0,
        length: sol.length,
        kgrid: Vec::new(),
        widths,
        mass,
    })
}

/// Discrete `μ₁^ε`: the density `Θ[w](u)·ε|∂_x w|²` (forward differences) deposited at
/// `ξ = w` by linear splitting between neighbouring cut nodes, times trapezoid time weights.
pub fn mu1_from_viscous(sol: &GridSolution, family: &EntropyFamily) -> Result<MeasureEstimate> {
    check_chart(&sol.chart, &family.chart)?;
    let chart = &sol.chart;
    let nk = family.xi.len();
    let (nt, nx) = (sol.nt(), sol.nx);
    let tau = trapezoid_time_weights(&sol.times);
    let rows: Vec<Vec<f64>> = (0..nt)
        .into_par_iter()
        .map(|n| {
            let mut row = vec![0.0; nx * nk];
            let wz: Vec<(f64, f64)> = sol.u[n].iter().map(|s| chart.to_riemann_unchecked(*s)).collect();
            for i in 0..nx {
                let j = (i + 1) % nx;
                let (w, z) = (0.5 * (wz[i].0 + wz[j].0), 0.5 * (wz[i].1 + wz[j].1));
                let dens = family.g_at(w, z) * sol.epsilon * (wz[j].0 - wz[i].0).powi(2) / (sol.dx * sol.dx);
                let m = dens * sol.dx * tau[n];
                let (l, s) = quad::locate_sorted(&family.xi, w);
                row[i * nk + l] += (1.0 - s) * m;
                row[i * nk + l + 1] += s * m;
            }
            row
        })
        .collect();
    Ok(MeasureEstimate {
        kind: MeasureKind::Mu1Eps,
        times: sol.times.clone(),
        nx,
        dx: sol.dx,
        x0: 0.0,
        length: sol.length,
        kgrid: family.xi.clone(),
        widths: TestWidths { t: 1, x: 1, k: 1 },
        mass: rows.concat(),
    })
}

fn trapezoid_time_weights(times: &[f64]) -> Vec<f64> {
    quad::trapezoid_weights(times)
}

/// `sup |Θ|·sup |∇w|²` for the discrete bound on `μ₁^ε` by the dissipation integral.
pub fn mu1_bound_factor(family: &EntropyFamily) -> f64 {
    let chart = &family.chart;
    let g = family.grid();
    let mut grad: f64 = 0.0;
    for i in 0..g.w.n {
        for j in 0..g.z.n {
            let (w, z) = (g.w.node(i), g.z.node(j));
            if let Ok(u) = chart.from_riemann(w, z) {
                let (dw, _) = chart.riemann_gradients(u);
                grad = grad.max(dw[0] * dw[0] + dw[1] * dw[1]);
            }
        }
    }
    family.sup_theta() * grad
}

/// Entropy pair tabulated on the Riemann grid.
#[derive(Clone, Debug)]
pub struct EntropyTable {
    pub label: String,
    pub grid: WGrid,
    pub eta: Table,
    pub q: Table,
}

impl EntropyTable {
    pub fn eval(&self, w: f64, z: f64) -> (f64, f64) {
        (self.eta.interp(&self.grid, w, z), self.q.interp(&self.grid, w, z))
    }

    /// `max(|η|, |Dη|, |D²η|)` over the grid in Riemann coordinates, by finite differences.
    pub fn c2_norm(&self) -> f64 {
        let g = &self.grid;
        let (nw, nz) = (g.w.n, g.z.n);
        let (hw, hz) = (g.w.step(), g.z.step());
        let e = |i: usize, j: usize| self.eta.at(i, j);
        let mut m = self.eta.max_abs();
        for i in 1..nw - 1 {
            for j in 1..nz - 1 {
                let ew = (e(i + 1, j) - e(i - 1, j)) / (2.0 * hw);
                let ez = (e(i, j + 1) - e(i, j - 1)) / (2.0 * hz);
                let eww = (e(i + 1, j) - 2.0 * e(i, j) + e(i - 1, j)) / (hw * hw);
                let ezz = (e(i, j + 1) - 2.0 * e(i, j) + e(i, j - 1)) / (hz * hz);
                let ewz = (e(i + 1, j + 1) - e(i + 1, j - 1) - e(i - 1, j + 1) + e(i - 1, j - 1)) / (4.0 * hw * hz);
                for v in [ew, ez, eww, ezz, ewz] {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }
}

/// A bank of `n` entropies from sinusoidal and bump edge profiles, half on each edge,
/// each scaled to unit `C²` norm.
pub fn entropy_bank(family: &EntropyFamily, n: usize) -> Vec<EntropyTable> {
    let g = *family.grid();
    let per_edge = (n / 2).max(1);
    let half = (per_edge / 2).max(1);
    let mut specs: Vec<(bool, usize, bool)> = Vec::new();
    for edge in [false, true] {
        for k in 0..per_edge {
            specs.push((edge, k, k < half));
        }
    }
    specs.truncate(n);
    specs
        .into_par_iter()
        .map(|(on_z, k, sinus)| {
            let (lo, hi) = if on_z { (g.z.lo, g.z.hi) } else { (g.w.lo, g.w.hi) };
            let len = hi - lo;
            let profile: Box<dyn Fn(f64) -> f64 + Sync> = if sinus {
                let freq = (k + 1) as f64;
                Box::new(move |s: f64| (std::f64::consts::PI * freq * (s - lo) / len).sin())
            } else {
                let nb = per_edge - half;
                let c = lo + len * (k - half) as f64 / nb.max(1) as f64 + 0.5 * len / nb.max(1) as f64;
                let r = 1.5 * len / nb.max(1) as f64;
                Box::new(move |s: f64| {
                    let y = (s - c) / r;
                    if y.abs() < 1.0 { (1.0 - y * y).powi(3) } else { 0.0 }
                })
            };
            let zero = |_: f64| 0.0;
            let (eta, q) = if on_z {
                reconstruct_entropy_exact(family, &zero, &*profile)
            } else {
                reconstruct_entropy_exact(family, &*profile, &zero)
            };
            let label = format!("{}-{}-{}", if on_z { "z" } else { "w" }, if sinus { "sin" } else { "bump" }, k);
            let mut t = EntropyTable { label, grid: g, eta, q };
            let s = t.c2_norm();
            if s > 0.0 {
                t.eta.data.iter_mut().for_each(|v| *v /= s);
                t.q.data.iter_mut().for_each(|v| *v /= s);
            }
            t
        })
        .collect()
}

/// Cellwise `max_η |μ_η|` over the bank, a lower approximation of the dissipation supremum.
pub fn nu_sup(sol: &GridSolution, bank: &[EntropyTable], widths: TestWidths) -> Result<MeasureEstimate> {
    if bank.is_empty() {
        return Err(Error::Config("entropy bank is empty".into()));
    }
    let chart = sol.chart.clone();
    let per: Vec<MeasureEstimate> = bank
        .par_iter()
        .map(|e| {
            let pair = |s: State| {
                let (w, z) = chart.to_riemann_unchecked(s);
                e.eval(w, z)
            };
            dissipation_measure(sol, &pair, widths)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = per[0].clone();
    out.kind = MeasureKind::NuSup;
    for m in out.mass.iter_mut() {
        *m = m.abs();
    }
    for p in &per[1..] {
        for (o, v) in out.mass.iter_mut().zip(&p.mass) {
            *o = o.max(v.abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goursat::{build_family, compute_gh, uniform_cuts};
    use crate::viscous::{decoupled_exact, simulate, InitialData, SimConfig, SineMode};

    fn dec_family(n: usize, nxi: usize) -> EntropyFamily {
        let chart = SystemChart::Decoupled;
        let gh = compute_gh(&chart, WGrid::for_chart(&chart, n, n).unwrap()).unwrap();
        build_family(&chart, gh.clone(), &uniform_cuts(&gh.grid.w, nxi), &uniform_cuts(&gh.grid.z, nxi)).unwrap()
    }

    fn smooth(nx: usize) -> GridSolution {
        let w = SineMode { mean: 0.1, amp: 0.3, k: 1, phase: 0.0 };
        let z = SineMode { mean: 0.0, amp: 0.2, k: 1, phase: 0.5 * std::f64::consts::PI };
        let dx = 2.0 / nx as f64;
        let nt = (0.5 / (0.5 * dx)).round() as usize + 1;
        let times = (0..nt).map(|n| n as f64 * 0.5 * dx).collect();
        GridSolution::from_fn(&SystemChart::Decoupled, nx, 2.0, times, &|t, x| decoupled_exact(&w, &z, 2.0, t, x)).unwrap()
    }

    fn constant(nx: usize) -> GridSolution {
        GridSolution::from_fn(&SystemChart::Decoupled, nx, 1.0, (0..9).map(|n| n as f64 * 0.01).collect(), &|_, _| [0.3, -0.2])
            .unwrap()
    }

    #[test]
    fn assemble_decoupled_is_scalar_kinetic_function() {
        let fam = dec_family(65, 33);
        let sol = smooth(32);
        let f = assemble(&sol, &fam, Variant::Chi).unwrap();
        let ft = assemble(&sol, &fam, Variant::ChiTilde).unwrap();
        for n in 0..sol.nt() {
            for i in 0..sol.nx {
                let u = sol.u[n][i][0];
                for (l, &xi) in fam.xi.iter().enumerate() {
                    let ind = if xi <= u { 1.0 } else { 0.0 };
                    assert!((f.value(n, i, l) - ind).abs() < 1e-12);
                    assert!((f.flux(n, i, l) - xi * ind).abs() < 1e-12);
                    assert!((f.value(n, i, l) + ft.value(n, i, l) - 1.0).abs() < 1e-12);
                }
            }
        }
        let p = SystemChart::p_system();
        let psol = GridSolution::from_fn(&p, 8, 1.0, vec![0.0], &|_, _| p.from_riemann(-0.6, 0.6).unwrap()).unwrap();
        assert!(matches!(assemble(&psol, &fam, Variant::Chi), Err(Error::ChartMismatch { .. })));
    }

    #[test]
    fn constant_solution_has_no_residual() {
        let fam = dec_family(65, 33);
        let sol = constant(32);
        for v in [Variant::Chi, Variant::ChiTilde, Variant::Upsilon, Variant::UpsilonTilde] {
            let f = assemble(&sol, &fam, v).unwrap();
            assert!(kinetic_residual(&f, TestWidths::default()).unwrap().total_variation() <= 1e-12);
        }
        let d = dissipation_measure(&sol, &|u| (u[0] * u[0], u[1]), TestWidths::default()).unwrap();
        assert!(d.total_variation() <= 1e-12);
        let m = mu1_from_viscous(&sol, &fam).unwrap();
        assert_eq!(m.total_variation(), 0.0);
        let bank = entropy_bank(&fam, 8);
        assert!(nu_sup(&sol, &bank, TestWidths::default()).unwrap().total_variation() <= 1e-12);
    }

    #[test]
    fn smooth_kinetic_residual_converges() {
        let r = |nx: usize, nxi: usize, s: usize| {
            let fam = dec_family(2 * nxi - 1, nxi);
            let f = assemble(&smooth(nx), &fam, Variant::Chi).unwrap();
            kinetic_residual(&f, TestWidths { t: 4 * s, x: 4 * s, k: 2 * s }).unwrap().total_variation()
        };
        let (a, b) = (r(64, 17, 1), r(128, 33, 2));
        assert!(a / b >= 1.8, "{a} {b}");
    }

    #[test]
    fn kinetic_and_entropy_residuals_agree() {
        // With unit hats in ξ the test functions sum to one on the cut range, so the summed
        // kinetic residual equals the residual of (u₁ − w̲, (u₁² − w̲²)/2).
        let fam = dec_family(65, 33);
        let sol = smooth(64);
        let f = assemble(&sol, &fam, Variant::Chi).unwrap();
        let w = TestWidths { t: 3, x: 3, k: 1 };
        let k = kinetic_residual(&f, w).unwrap().project_tx();
        let d = dissipation_measure(&sol, &|u| (u[0] + 1.0, 0.5 * (u[0] * u[0] - 1.0)), w).unwrap();
        let err = k.iter().zip(&d.mass).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-13, "{err}");
    }

    #[test]
    fn split_reconstructs_residual() {
        let fam = dec_family(65, 33);
        let f = assemble(&smooth(64), &fam, Variant::Chi).unwrap();
        let t = kinetic_residual(&f, TestWidths::default()).unwrap();
        for nonneg in [false, true] {
            let (mu0, mu1) = split_residual(&t, nonneg);
            let nk = t.nk();
            let dk = fam.xi[1] - fam.xi[0];
            for c in 0..t.mass.len() / nk {
                for l in 0..nk {
                    let prev = if l == 0 { 0.0 } else { mu1.mass[c * nk + l - 1] };
                    let rebuilt = (mu1.mass[c * nk + l] - prev) / dk + mu0.mass[c * nk + l];
                    assert!((rebuilt - t.mass[c * nk + l]).abs() < 1e-12);
                    if nonneg {
                        assert!(mu1.mass[c * nk + l] >= 0.0);
                    }
                }
            }
            if !nonneg {
                assert!(mu0.total_variation() < 1e-14);
            }
        }
    }

    fn shock(eps: f64, nx: usize) -> GridSolution {
        let cfg = SimConfig {
            chart: SystemChart::Decoupled,
            initial: InitialData::TwoJump { left: [0.8, 0.0], right: [-0.4, 0.0], x0: 0.0, x1: 1.0 },
            epsilon: eps,
            t_final: 0.6,
            nx,
            length: 2.0,
            n_snapshots: 121,
            cfl: 0.4,
            energy: None,
        };
        simulate(&cfg).unwrap().0
    }

    #[test]
    fn shock_dissipation_and_mu1() {
        let sol = shock(0.01, 512);
        let d = dissipation_measure(&sol, &|u| (0.5 * u[0] * u[0], u[0].powi(3) / 3.0), TestWidths::default()).unwrap();
        let rate = d.sum_where(&|t, x| (0.2..=0.5).contains(&t) && (x - 1.0 - 0.2 * t).abs() <= 0.15) / 0.3;
        assert!((rate / -0.144 - 1.0).abs() < 0.1, "{rate}");
        let fam = dec_family(129, 65);
        let mu1 = mu1_from_viscous(&sol, &fam).unwrap();
        assert!(mu1.mass.iter().all(|&m| m >= 0.0));
        let bank = entropy_bank(&fam, 8);
        let nu = nu_sup(&sol, &bank, TestWidths::default()).unwrap();
        let small = nu_sup(&sol, &bank[..4], TestWidths::default()).unwrap();
        assert!(nu.mass.iter().zip(&small.mass).all(|(a, b)| a >= b));
    }

    #[test]
    fn bank_members_have_unit_c2_norm() {
        let fam = dec_family(65, 33);
        let bank = entropy_bank(&fam, 32);
        assert_eq!(bank.len(), 32);
        for e in &bank {
            assert!((e.c2_norm() - 1.0).abs() < 1e-12, "{}", e.label);
        }
    }
}
