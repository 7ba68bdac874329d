//! Experiment configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goursat::{build_family, compute_gh, uniform_cuts, EntropyFamily, WGrid};
use crate::system::SystemChart;
use crate::viscous::{InitialData, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    #[serde(default = "two")]
    pub length: f64,
    pub t_final: f64,
    pub n_snapshots: usize,
    #[serde(default = "cfl")]
    pub cfl: f64,
}

fn two() -> f64 {
    2.0
}

fn cfl() -> f64 {
    0.4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub n_w: usize,
    pub n_z: usize,
    pub n_xi: usize,
    pub n_zeta: usize,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig { n_w: 129, n_z: 129, n_xi: 33, n_zeta: 33 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub r: f64,
    #[serde(default)]
    pub b: Option<f64>,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig { r: 0.15, b: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub n_curves: usize,
    pub substeps: usize,
    /// Start positions of the fast and slow interaction curves.
    pub gamma_x: f64,
    pub sigma_x: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig { n_curves: 1024, substeps: 2, gamma_x: 0.5, sigma_x: 1.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub bank_size: usize,
    /// Coarse diagnostic cells, in snapshots and grid cells.
    pub block_t: usize,
    pub block_x: usize,
    /// Jump-set radii in units of the simulation `dx`.
    pub jump_radii_cells: Vec<f64>,
    /// Absolute threshold; overrides `theta_relative`.
    #[serde(default)]
    pub theta: Option<f64>,
    /// Threshold as a fraction of the largest rescaled dissipation. When both are absent
    /// the default `10 × median / dx` is used.
    #[serde(default)]
    pub theta_relative: Option<f64>,
    pub vmo_radii: Vec<f64>,
    /// Time window for dissipation rates and VMO sampling.
    pub window: [f64; 2],
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            bank_size: 32,
            block_t: 6,
            block_x: 16,
            jump_radii_cells: vec![2.0, 4.0, 8.0],
            theta: None,
            theta_relative: Some(0.25),
            vmo_radii: vec![0.3, 0.15, 0.075],
            window: [0.3, 0.9],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub chart: SystemChart,
    pub initial: InitialData,
    pub grid: GridConfig,
    pub epsilon: f64,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub family: FamilyConfig,
    #[serde(default)]
    pub band: BandConfig,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default = "out_dir")]
    pub output: PathBuf,
}

fn out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sim(&self, epsilon: f64) -> SimConfig {
        SimConfig {
            chart: self.chart.clone(),
            initial: self.initial.clone(),
            epsilon,
            t_final: self.grid.t_final,
            nx: self.grid.nx,
            length: self.grid.length,
            n_snapshots: self.grid.n_snapshots,
            cfl: self.grid.cfl,
            energy: None,
        }
    }

    /// Checks every section, including that the initial data lies in the chart domain.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.sim(self.epsilon).validate()?;
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0)) {
            return bad("eps_list entries must be positive".into());
        }
        let f = &self.family;
        if f.n_w < 3 || f.n_z < 3 || f.n_xi < 2 || f.n_zeta < 2 {
            return bad("family grids need n_w, n_z >= 3 and n_xi, n_zeta >= 2".into());
        }
        if !(self.band.r > 0.0) {
            return bad("band.r must be positive".into());
        }
        if self.trace.n_curves < 64 || self.trace.substeps == 0 {
            return bad("trace needs n_curves >= 64 and substeps >= 1".into());
        }
        let d = &self.diagnostics;
        if d.bank_size == 0 || d.block_t == 0 || d.block_x == 0 || !self.grid.nx.is_multiple_of(d.block_x) {
            return bad("diagnostics: bank_size, block_t positive and block_x dividing nx".into());
        }
        if !(d.window[0] < d.window[1]) || !(0.0..=self.grid.t_final).contains(&d.window[0]) || d.window[1] > self.grid.t_final {
            return bad(format!("diagnostics.window {:?} must lie inside [0, t_final]", d.window));
        }
        let dx = self.grid.length / self.grid.nx as f64;
        for i in 0..self.grid.nx {
            let x = i as f64 * dx;
            let u = self.initial.eval(&self.chart, x, self.grid.length).map_err(|e| Error::Config(format!("initial data: {e}")))?;
            if !self.chart.in_domain(u) {
                return bad(format!("initial state ({}, {}) at x = {x} is outside the chart domain", u[0], u[1]));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<EntropyFamily> {
        let f = &self.family;
        let gh = compute_gh(&self.chart, WGrid::for_chart(&self.chart, f.n_w, f.n_z)?)?;
        let (xi, zeta) = (uniform_cuts(&gh.grid.w, f.n_xi), uniform_cuts(&gh.grid.z, f.n_zeta));
        build_family(&self.chart, gh, &xi, &zeta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHOCK: &str = r#"{
        "name": "t",
        "chart": {"id": "decoupled"},
        "initial": {"kind": "two-jump", "left": [0.8, 0.0], "right": [-0.4, 0.0], "x0": 0.0, "x1": 1.0},
        "grid": {"nx": 64, "t_final": 1.0, "n_snapshots": 21},
        "epsilon": 0.01
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c: ExperimentConfig = serde_json::from_str(SHOCK).unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid.length, 2.0);
        assert_eq!(c.diagnostics.vmo_radii, vec![0.3, 0.15, 0.075]);
    }

    #[test]
    fn invalid_sections_are_config_errors() {
        let mut c: ExperimentConfig = serde_json::from_str(SHOCK).unwrap();
        c.initial = InitialData::Constant { u: [1.5, 0.0] };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c: ExperimentConfig = serde_json::from_str(SHOCK).unwrap();
        c.diagnostics.block_x = 5;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        assert!(serde_json::from_str::<ExperimentConfig>(&SHOCK.replace("\"epsilon\"", "\"epsilonn\"")).is_err());
    }
}
