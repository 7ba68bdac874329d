//! Flat binary fields with JSON sidecars, trajectory and family persistence, CSV tables.
//!
//! A field `name` is stored as `name.bin` (little-endian `f64`, row-major, last axis fastest)
//! next to `name.json` describing the axes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{JumpSetMask, VmoConsistency, VmoProfile};
use crate::error::{Error, Result};
use crate::goursat::{EntropyFamily, GhTables, StripConstants, Table, WGrid};
use crate::kinetic::MeasureEstimate;
use crate::lagrangian::{CurveBundle, QLedger};
use crate::system::SystemChart;
use crate::viscous::GridSolution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisMeta {
    pub name: String,
    pub n: usize,
    /// Node coordinates when the axis is not a plain index.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coords: Vec<f64>,
}

impl AxisMeta {
    pub fn index(name: &str, n: usize) -> Self {
        AxisMeta { name: name.into(), n, coords: Vec::new() }
    }

    pub fn with_coords(name: &str, coords: Vec<f64>) -> Self {
        AxisMeta { name: name.into(), n: coords.len(), coords }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    dtype: String,
    order: String,
    axes: Vec<AxisMeta>,
}

const DTYPE: &str = "f64-le";
const ORDER: &str = "row-major";

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub axes: Vec<AxisMeta>,
    pub data: Vec<f64>,
}

impl Field {
    pub fn new(axes: Vec<AxisMeta>, data: Vec<f64>) -> Result<Self> {
        let len: usize = axes.iter().map(|a| a.n).product();
        if len != data.len() {
            return Err(Error::Format(format!("axes describe {len} values, data has {}", data.len())));
        }
        Ok(Field { axes, data })
    }
}

fn with_ext(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// Writes `path.bin` and `path.json`; any extension on `path` is replaced.
pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    let len: usize = field.axes.iter().map(|a| a.n).product();
    if len != field.data.len() {
        return Err(Error::Format(format!("axes describe {len} values, data has {}", field.data.len())));
    }
    let mut bytes = Vec::with_capacity(8 * len);
    for v in &field.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(with_ext(path, "bin"), bytes)?;
    let side = Sidecar { dtype: DTYPE.into(), order: ORDER.into(), axes: field.axes.clone() };
    fs::write(with_ext(path, "json"), serde_json::to_string_pretty(&side)?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    let side: Sidecar = serde_json::from_slice(&fs::read(with_ext(path, "json"))?)
        .map_err(|e| Error::Format(format!("sidecar {}: {e}", with_ext(path, "json").display())))?;
    if side.dtype != DTYPE || side.order != ORDER {
        return Err(Error::Format(format!("unsupported layout {} / {}", side.dtype, side.order)));
    }
    for a in &side.axes {
        if !a.coords.is_empty() && a.coords.len() != a.n {
            return Err(Error::Format(format!("axis '{}' lists {} coordinates for {} nodes", a.name, a.coords.len(), a.n)));
        }
    }
    let bytes = fs::read(with_ext(path, "bin"))?;
    let len: usize = side.axes.iter().map(|a| a.n).product();
    if bytes.len() != 8 * len {
        return Err(Error::Format(format!(
            "{} holds {} bytes, the sidecar describes {} values",
            with_ext(path, "bin").display(),
            bytes.len(),
            len
        )));
    }
    let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok(Field { axes: side.axes, data })
}

/// Reads a field and checks its axes (names, sizes and coordinates) against `expected`.
pub fn read_field_expect(path: &Path, expected: &[AxisMeta]) -> Result<Field> {
    let f = read_field(path)?;
    if f.axes.len() != expected.len() {
        return Err(Error::Format(format!("expected {} axes, found {}", expected.len(), f.axes.len())));
    }
    for (got, want) in f.axes.iter().zip(expected) {
        if got.name != want.name {
            return Err(Error::Format(format!("axis '{}' found where '{}' was expected", got.name, want.name)));
        }
        if got.n != want.n || (!want.coords.is_empty() && got.coords != want.coords) {
            return Err(Error::Format(format!("axis '{}' does not match: {} nodes vs {}", got.name, got.n, want.n)));
        }
    }
    Ok(f)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_slice(&fs::read(path)?).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// `dir/solution.json` plus one `dir/snap_XXXXX` field per snapshot.
pub fn save_solution(dir: &Path, sol: &GridSolution) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("solution.json"), sol)?;
    for (n, row) in sol.u.iter().enumerate() {
        let data = row.iter().flat_map(|s| s.iter().copied()).collect();
        let axes = vec![AxisMeta::index("x", sol.nx), AxisMeta::index("component", 2)];
        write_field(&dir.join(format!("snap_{n:05}")), &Field::new(axes, data)?)?;
    }
    Ok(())
}

pub fn load_solution(dir: &Path) -> Result<GridSolution> {
    let mut sol: GridSolution = read_json(&dir.join("solution.json"))?;
    let axes = [AxisMeta::index("x", sol.nx), AxisMeta::index("component", 2)];
    sol.u = (0..sol.times.len())
        .map(|n| {
            let f = read_field_expect(&dir.join(format!("snap_{n:05}")), &axes)?;
            Ok(f.data.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
        })
        .collect::<Result<_>>()?;
    Ok(sol)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct FamilyManifest {
    chart: SystemChart,
    grid: WGrid,
    xi: Vec<f64>,
    xi_idx: Vec<usize>,
    zeta: Vec<f64>,
    zeta_idx: Vec<usize>,
    strip: StripConstants,
}

fn stack(name: &str, cuts: &[f64], grid: &WGrid, tables: &[Table]) -> Result<Field> {
    let axes = vec![
        AxisMeta::with_coords(name, cuts.to_vec()),
        AxisMeta::with_coords("w", grid.w.nodes()),
        AxisMeta::with_coords("z", grid.z.nodes()),
    ];
    Field::new(axes, tables.iter().flat_map(|t| t.data.iter().copied()).collect())
}

fn unstack(f: Field, grid: &WGrid) -> Vec<Table> {
    let per = grid.w.n * grid.z.n;
    f.data.chunks_exact(per).map(|c| Table { nw: grid.w.n, nz: grid.z.n, data: c.to_vec() }).collect()
}

/// `dir/family.json` plus fields `gh`, `theta`, `flux`, `theta_z`, `flux_z`.
pub fn save_family(dir: &Path, fam: &EntropyFamily) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = *fam.grid();
    let m = FamilyManifest {
        chart: fam.chart.clone(),
        grid,
        xi: fam.xi.clone(),
        xi_idx: fam.xi_idx.clone(),
        zeta: fam.zeta.clone(),
        zeta_idx: fam.zeta_idx.clone(),
        strip: fam.strip,
    };
    write_json(&dir.join("family.json"), &m)?;
    write_field(&dir.join("gh"), &stack("which", &[0.0, 1.0], &grid, &[fam.gh.g.clone(), fam.gh.h.clone()])?)?;
    write_field(&dir.join("theta"), &stack("xi", &fam.xi, &grid, &fam.theta)?)?;
    write_field(&dir.join("flux"), &stack("xi", &fam.xi, &grid, &fam.flux)?)?;
    write_field(&dir.join("theta_z"), &stack("zeta", &fam.zeta, &grid, &fam.theta_z)?)?;
    write_field(&dir.join("flux_z"), &stack("zeta", &fam.zeta, &grid, &fam.flux_z)?)?;
    Ok(())
}

pub fn load_family(dir: &Path) -> Result<EntropyFamily> {
    let m: FamilyManifest = read_json(&dir.join("family.json"))?;
    let g = &m.grid;
    let axes = |name: &str, cuts: &[f64]| {
        [
            AxisMeta::with_coords(name, cuts.to_vec()),
            AxisMeta::with_coords("w", g.w.nodes()),
            AxisMeta::with_coords("z", g.z.nodes()),
        ]
    };
    let mut gh = unstack(read_field_expect(&dir.join("gh"), &axes("which", &[0.0, 1.0]))?, g);
    let h = gh.pop().unwrap();
    let gtab = gh.pop().unwrap();
    Ok(EntropyFamily {
        chart: m.chart,
        gh: GhTables { grid: *g, g: gtab, h },
        theta: unstack(read_field_expect(&dir.join("theta"), &axes("xi", &m.xi))?, g),
        flux: unstack(read_field_expect(&dir.join("flux"), &axes("xi", &m.xi))?, g),
        theta_z: unstack(read_field_expect(&dir.join("theta_z"), &axes("zeta", &m.zeta))?, g),
        flux_z: unstack(read_field_expect(&dir.join("flux_z"), &axes("zeta", &m.zeta))?, g),
        xi: m.xi,
        xi_idx: m.xi_idx,
        zeta: m.zeta,
        zeta_idx: m.zeta_idx,
        strip: m.strip,
    })
}

/// Rows `t, x, k, mass`; `k` is empty for measures without a kinetic variable.
pub fn write_measure_csv(path: &Path, m: &MeasureEstimate) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "k", "mass"])?;
    for n in 0..m.nt() {
        for i in 0..m.nx {
            let x = m.x0 + i as f64 * m.dx;
            for l in 0..m.nk() {
                let k = m.kgrid.get(l).map(|k| k.to_string()).unwrap_or_default();
                w.write_record([m.times[n].to_string(), x.to_string(), k, m.at(n, i, l).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `curve, band, xi, weight, t, x, clamped`.
pub fn write_bundle_csv(path: &Path, b: &CurveBundle) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["curve", "band", "xi", "weight", "t", "x", "clamped"])?;
    let band = format!("{:?}", b.band).to_lowercase();
    for (c, (curve, wt)) in b.curves.iter().zip(&b.weights).enumerate() {
        for k in 0..curve.t.len() {
            let clamped = k > 0 && curve.clamp.get(k - 1).copied().unwrap_or(false);
            w.write_record([
                c.to_string(),
                band.clone(),
                curve.xi.to_string(),
                wt.to_string(),
                curve.t[k].to_string(),
                curve.x[k].to_string(),
                clamped.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `path.csv` with rows `t, q, f_out, f_in` and `path.json` with the full ledger.
pub fn write_q_ledger(path: &Path, q: &QLedger) -> Result<()> {
    let mut w = csv::Writer::from_path(with_ext(path, "csv"))?;
    w.write_record(["t", "q", "f_out", "f_in"])?;
    for k in 0..q.t.len() {
        w.write_record([q.t[k].to_string(), q.q[k].to_string(), q.f_out[k].to_string(), q.f_in[k].to_string()])?;
    }
    w.flush()?;
    write_json(&with_ext(path, "json"), q)
}

/// Flagged cells, rows `t, x, ratio`.
pub fn write_mask_csv(path: &Path, m: &JumpSetMask) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "ratio"])?;
    for n in 0..m.times.len() {
        for i in m.row(n) {
            w.write_record([m.times[n].to_string(), m.x(i).to_string(), m.ratio[n * m.nx + i].to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `t, x, r, oscillation` for each profile.
pub fn write_vmo_csv(path: &Path, profiles: &[VmoProfile]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x", "r", "oscillation"])?;
    for p in profiles {
        for (r, o) in p.radii.iter().zip(&p.oscillation) {
            w.write_record([p.t.to_string(), p.x.to_string(), r.to_string(), o.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows `t, x, masked, decays, last_ratio`.
pub fn write_vmo_samples_csv(path: &Path, c: &VmoConsistency) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for s in &c.samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a JSON document, creating parent directories.
pub fn write_manifest<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(serde_json::to_string_pretty(v)?.as_bytes())?;
    Ok(())
}

pub fn read_manifest<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    read_json(path)
}
