//! Subcommand front end. Every subcommand reads an [`ExperimentConfig`] and writes into its
//! output directory, reusing the trajectory and family already stored there.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::diagnostics::{self, coarsen, jump_set, mask_from_ratio, rescaled_dissipation, JumpSetMask};
use crate::error::{Error, Result};
use crate::goursat::EntropyFamily;
use crate::io;
use crate::kinetic::{self, assemble, entropy_bank, kinetic_residual, mu1_from_viscous, nu_sup, TestWidths, Variant};
use crate::lagrangian::{crossing_check, q_functional, reconstruction_error, seed_bundle, trace, Band, BandSpec};
use crate::verify;
use crate::viscous::{simulate, GridSolution};

#[derive(Parser, Debug)]
#[command(name = "kinlaw", version, about = "Kinetic diagnostics for 2x2 conservation laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the viscous solver and store the trajectory.
    Simulate(Common),
    /// Build and store the singular entropy family.
    Family(Common),
    /// Kinetic residual, μ₁ from the viscous run and the dissipation supremum ν.
    Kinetic {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "chi")]
        variant: VariantArg,
    },
    /// Seed and trace Γ^max and Γ^min bundles; crossing and reconstruction checks.
    Trace(Common),
    /// Interaction functional Q(t) with its flux ledger.
    Qfunc(Common),
    /// Candidate jump set from the rescaled dissipation.
    Jumpset(Common),
    /// Mean-oscillation profiles, at one point or on every diagnostic cell in the window.
    Vmo {
        #[command(flatten)]
        common: Common,
        #[arg(long, requires = "x")]
        t: Option<f64>,
        #[arg(long, requires = "t")]
        x: Option<f64>,
    },
    /// Markdown summary of the outputs present in the directory.
    Report {
        /// Config; optional when the directory already holds a manifest.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the acceptance suite and write `verify.json`.
    Verify(Common),
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum VariantArg {
    Chi,
    ChiTilde,
    Upsilon,
    UpsilonTilde,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Chi => Variant::Chi,
            VariantArg::ChiTilde => Variant::ChiTilde,
            VariantArg::Upsilon => Variant::Upsilon,
            VariantArg::UpsilonTilde => Variant::UpsilonTilde,
        }
    }
}

pub const EXIT_ACCEPTANCE: i32 = 3;

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    dx: f64,
    outputs: Vec<String>,
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Ctx {
    fn new(common: &Common) -> Result<Self> {
        let cfg = ExperimentConfig::load(&common.config)?;
        let out = common.out.clone().unwrap_or_else(|| cfg.output.clone());
        fs::create_dir_all(&out)?;
        Ok(Ctx { cfg, out })
    }

    fn manifest(&self, command: &str, outputs: &[&str]) -> Result<()> {
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: &self.cfg,
            dx: self.cfg.grid.length / self.cfg.grid.nx as f64,
            outputs: outputs.iter().map(|s| s.to_string()).collect(),
        };
        io::write_manifest(&self.out.join(format!("manifest_{command}.json")), &m)
    }

    /// Stored trajectory if its metadata matches the config, otherwise a fresh run.
    fn solution(&self) -> Result<GridSolution> {
        let dir = self.out.join("solution");
        if dir.join("solution.json").exists() {
            let sol = io::load_solution(&dir)?;
            if sol.chart == self.cfg.chart && sol.nx == self.cfg.grid.nx && sol.epsilon == self.cfg.epsilon {
                return Ok(sol);
            }
        }
        let (sol, ledger) = simulate(&self.cfg.sim(self.cfg.epsilon))?;
        io::save_solution(&dir, &sol)?;
        io::write_manifest(&self.out.join("energy.json"), &ledger)?;
        Ok(sol)
    }

    fn family(&self) -> Result<EntropyFamily> {
        let dir = self.out.join("family");
        if dir.join("family.json").exists() {
            let fam = io::load_family(&dir)?;
            let f = &self.cfg.family;
            let g = fam.grid();
            if fam.chart == self.cfg.chart
                && (g.w.n, g.z.n, fam.xi.len(), fam.zeta.len()) == (f.n_w, f.n_z, f.n_xi, f.n_zeta)
            {
                return Ok(fam);
            }
        }
        let fam = self.cfg.family()?;
        io::save_family(&dir, &fam)?;
        Ok(fam)
    }

    fn spec(&self, sol: &GridSolution) -> Result<BandSpec> {
        BandSpec::from_solution(sol, self.cfg.band.r, self.cfg.band.b)
    }

    fn mask(&self, sol: &GridSolution, fam: &EntropyFamily) -> Result<JumpSetMask> {
        let d = &self.cfg.diagnostics;
        let bank = entropy_bank(fam, d.bank_size);
        let nu = nu_sup(sol, &bank, TestWidths::default())?;
        let coarse = coarsen(&nu, d.block_t, d.block_x)?;
        let radii: Vec<f64> = d.jump_radii_cells.iter().map(|k| k * sol.dx).collect();
        match (d.theta, d.theta_relative) {
            (None, Some(frac)) => {
                diagnostics::check_radii(&radii, sol.dx)?;
                let ratio = rescaled_dissipation(&coarse, &radii);
                let top = ratio.iter().cloned().fold(0.0, f64::max);
                Ok(mask_from_ratio(&coarse, &radii, ratio, frac * top))
            }
            (theta, _) => jump_set(&coarse, &radii, theta, sol.dx),
        }
    }
}

fn say(line: impl AsRef<str>) {
    println!("{}", line.as_ref());
}

fn cmd_simulate(c: &Common) -> Result<i32> {
    let ctx = Ctx::new(c)?;
    let (sol, ledger) = simulate(&ctx.cfg.sim(ctx.cfg.epsilon))?;
    io::save_solution(&ctx.out.join("solution"), &sol)?;
    io::write_manifest(&ctx.out.join("energy.json"), &ledger)?;
    ctx.manifest("simulate", &["solution/", "energy.json"])?;
    say(format!(
        "simulated {} snapshots, nx = {}, dissipation = {:.6e}, ratio = {:.6}",
        sol.nt(),
        sol.nx,
        ledger.dissipation_integral,
        ledger.ratio
    ));
    Ok(0)
}

fn cmd_family(c: &Common) -> Result<i32> {
    let ctx = Ctx::new(c)?;
    let fam = ctx.cfg.family()?;
    io::save_family(&ctx.out.join("family"), &fam)?;
    ctx.manifest("family", &["family/"])?;
    let s = fam.strip;
    say(format!("family: {} xi cuts, r_bar = {}, c = {:.6}, m = {}", fam.xi.len(), s.r_bar, s.c, s.m));
    Ok(0)
}

fn cmd_kinetic(c: &Common, variant: Variant) -> Result<i32> {
    let ctx = Ctx::new(c)?;
    let (sol, fam) = (ctx.solution()?, ctx.family()?);
    let res = kinetic_residual(&assemble(&sol, &fam, variant)?, TestWidths::default())?;
    let (mu0, mu1) = kinetic::split_residual(&res, true);
    let mu1_eps = mu1_from_viscous(&sol, &fam)?;
    let nu = nu_sup(&sol, &entropy_bank(&fam, ctx.cfg.diagnostics.bank_size), TestWidths::default())?;
    io::write_measure_csv(&ctx.out.join("kinetic_residual.csv"), &res)?;
    io::write_measure_csv(&ctx.out.join("mu0_split.csv"), &mu0)?;
    io::write_measure_csv(&ctx.out.join("mu1_split.csv"), &mu1)?;
    io::write_measure_csv(&ctx.out.join("mu1_eps.csv"), &mu1_eps)?;
    io::write_measure_csv(&ctx.out.join("nu.csv"), &nu)?;
    let summary = serde_json::json!({
        "residual_total_variation": res.total_variation(),
        "mu0_total": mu0.total(),
        "mu1_split_total": mu1.total(),
        "mu1_eps_total": mu1_eps.total(),
        "mu1_bound": kinetic::mu1_bound_factor(&fam),
        "nu_total": nu.total(),
    });
    io::write_manifest(&ctx.out.join("kinetic.json"), &summary)?;
    ctx.manifest("kinetic", &["kinetic_residual.csv", "mu0_split.csv", "mu1_split.csv", "mu1_eps.csv", "nu.csv", "kinetic.json"])?;
    say(serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn cmd_trace(c: &Common) -> Result<i32> {
    let ctx = Ctx::new(c)?;
    let (sol, fam) = (ctx.solution()?, ctx.family()?);
    let spec = ctx.spec(&sol)?;
    let t = &ctx.cfg.trace;
    let t_end = *sol.times.last().unwrap();
    let gmax = seed_bundle(&sol, &fam, spec, Band::Max, t.n_curves, t_end, t.substeps)?;
    let gmin = seed_bundle(&sol, &fam, spec, Band::Min, t.n_curves, t_end, t.substeps)?;
    io::write_bundle_csv(&ctx.out.join("bundle_max.csv"), &gmax)?;
    io::write_bundle_csv(&ctx.out.join("bundle_min.csv"), &gmin)?;
    let cross = crossing_check(&gmax, &gmin, sol.length);
    let rec = reconstruction_error(&sol, &fam, &gmax, t_end, 8, 4);
    let summary = serde_json::json!({
        "band": spec,
        "crossing": cross,
        "reconstruction_error": rec.relative_error,
        "band_violation_max": gmax.band_violation,
        "band_violation_min": gmin.band_violation,
    });
    io::write_manifest(&ctx.out.join("trace.json"), &summary)?;
    ctx.manifest("trace", &["bundle_max.csv", "bundle_min.csv", "trace.json"])?;
    say(serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

fn cmd_qfunc(c: &Common) -> Result<i32> {
    let ctx = Ctx::new(c)?;
    let (sol, fam) = (ctx.solution()?, ctx.family()?);
    let spec = ctx.spec(&sol)?;
    let tc = &ctx.cfg.trace;
    let t_end = *sol.times.last().unwrap();
    let g = trace(&sol, &fam, tc.gamma_x, 0.0, spec.b, Band::Max, t_end, tc.substeps)?;
    let s = trace(&sol, &fam, tc.sigma_x, 0.0, spec.w_min + 0.5 * spec.r, Band::Min, t_end, tc.substeps)?;
    let led = match q_functional(&sol, &fam, &g, &s, spec) {
        Ok(l) => l,
        Err(Error::Geometry { t_cross, partial }) => {
            io::write_q_ledger(&ctx.out.join("q_ledger"), &partial)?;
            return Err(Error::Geometry { t_cross, partial });
        }
        Err(e) => return Err(e),
    };
    io::write_q_ledger(&ctx.out.join("q_ledger"), &led)?;
    ctx.manifest("qfunc", &["q_ledger.csv", "q_ledger.json"])?;
    say(format!(
        "Q: {:.6e} -> {:.6e}, max slab increase {:.3e}, mean F_out {:.6e}, mean F_in {:.6e}, predicted {:.6e}",
        led.q[0],
        led.q.last().unwrap(),
        led.max_slab_increase(),
        led.mean_f_out(),
        led.mean_f_in(),
        led.predicted_rate
    ));
    Ok(0)
}

fn cmd_jumpset(c: &Common) -> Result<i32> {
    let ctx = Ctx::new(c)?;
    let (sol, fam) = (ctx.solution()?, ctx.family()?);
    let mask = ctx.mask(&sol, &fam)?;
    io::write_mask_csv(&ctx.out.join("mask.csv"), &mask)?;
    io::write_manifest(&ctx.out.join("mask.json"), &mask)?;
    ctx.manifest("jumpset", &["mask.csv", "mask.json"])?;
    say(format!("jump set: {} cells flagged, area {:.6e}, theta {:.6e}", mask.count(), mask.area(), mask.theta));
    Ok(0)
}

fn cmd_vmo(c: &Common, point: Option<(f64, f64)>) -> Result<i32> {
    let ctx = Ctx::new(c)?;
    let sol = ctx.solution()?;
    let radii = &ctx.cfg.diagnostics.vmo_radii;
    if let Some((t, x)) = point {
        let p = diagnostics::vmo_profile(&sol, t, x, radii)?;
        io::write_vmo_csv(&ctx.out.join("vmo_profile.csv"), std::slice::from_ref(&p))?;
        ctx.manifest("vmo", &["vmo_profile.csv"])?;
        say(format!("oscillation {:?}, last ratio {:.4}, decays {}", p.oscillation, p.last_ratio, p.decays));
        return Ok(0);
    }
    let fam = ctx.family()?;
    let mask = ctx.mask(&sol, &fam)?;
    let [t0, t1] = ctx.cfg.diagnostics.window;
    let v = diagnostics::vmo_consistency(&sol, &mask, radii, t0, t1)?;
    io::write_vmo_samples_csv(&ctx.out.join("vmo_samples.csv"), &v)?;
    let summary = serde_json::json!({
        "masked": v.masked,
        "masked_failing": v.masked_failing,
        "unmasked": v.unmasked,
        "unmasked_passing": v.unmasked_passing,
    });
    io::write_manifest(&ctx.out.join("vmo.json"), &summary)?;
    ctx.manifest("vmo", &["vmo_samples.csv", "vmo.json"])?;
    say(serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

const PLOT_TEMPLATE: &str = "\
# Plotting template: reads the CSV files in this directory.
import csv, sys
import matplotlib.pyplot as plt

def rows(name):
    with open(name) as f:
        return list(csv.DictReader(f))

q = rows('q_ledger.csv')
plt.plot([float(r['t']) for r in q], [float(r['q']) for r in q])
plt.xlabel('t'); plt.ylabel('Q')
plt.savefig('q.png')
";

fn cmd_report(config: Option<&Path>, out: &Path) -> Result<i32> {
    if !out.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", out.display())));
    }
    let cfg: Option<ExperimentConfig> = match config {
        Some(p) => Some(ExperimentConfig::load(p)?),
        None => fs::read_dir(out)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("manifest_")))
            .find_map(|p| io::read_manifest::<serde_json::Value>(&p).ok())
            .and_then(|v| serde_json::from_value(v["config"].clone()).ok()),
    };
    let mut md = String::from("# kinlaw report\n\n");
    if let Some(c) = &cfg {
        md += &format!("Run `{}`: chart `{}`, nx = {}, epsilon = {}.\n\n", c.name, c.chart.id(), c.grid.nx, c.epsilon);
    }
    let mut listed = Vec::new();
    if let Ok(led) = io::read_manifest::<crate::lagrangian::QLedger>(&out.join("q_ledger.json")) {
        md += "## Interaction functional\n\n| t | Q | F_out | F_in |\n|---|---|---|---|\n";
        let stride = (led.t.len() / 20).max(1);
        for k in (0..led.t.len()).step_by(stride) {
            md += &format!("| {:.4} | {:.6e} | {:.6e} | {:.6e} |\n", led.t[k], led.q[k], led.f_out[k], led.f_in[k]);
        }
        md += &format!("\nMax slab increase {:.3e}; predicted outflow rate {:.6e}.\n\n", led.max_slab_increase(), led.predicted_rate);
        listed.push("q_ledger.csv");
    }
    if let Ok(k) = io::read_manifest::<serde_json::Value>(&out.join("kinetic.json")) {
        md += "## Measure masses\n\n| measure | mass |\n|---|---|\n";
        if let Some(o) = k.as_object() {
            for (name, v) in o {
                md += &format!("| {name} | {} |\n", v);
            }
        }
        md += "\n";
        listed.extend(["kinetic_residual.csv", "mu1_eps.csv", "nu.csv"]);
    }
    if let Ok(m) = io::read_manifest::<JumpSetMask>(&out.join("mask.json")) {
        md += &format!("## Jump set\n\n{} cells flagged at theta = {:.6e}; area {:.6e}.\n\n", m.count(), m.theta, m.area());
        listed.push("mask.csv");
    }
    if let Ok(v) = io::read_manifest::<serde_json::Value>(&out.join("vmo.json")) {
        md += &format!(
            "## VMO flags\n\nMasked cells failing decay: {} of {}. Unmasked cells decaying: {} of {}.\n\n",
            v["masked_failing"], v["masked"], v["unmasked_passing"], v["unmasked"]
        );
        listed.push("vmo_samples.csv");
    }
    if let Ok(v) = io::read_manifest::<verify::VerifyReport>(&out.join("verify.json")) {
        md += "## Acceptance\n\n```\n";
        for c in &v.criteria {
            md += &c.line();
            md += "\n";
        }
        md += "```\n\n";
    }
    if !listed.is_empty() {
        md += "## Data files\n\n";
        for f in &listed {
            md += &format!("- `{f}`\n");
        }
    }
    fs::write(out.join("report.md"), &md)?;
    fs::write(out.join("plot_template.py"), PLOT_TEMPLATE)?;
    say(format!("wrote {}", out.join("report.md").display()));
    Ok(0)
}

fn cmd_verify(c: &Common) -> Result<i32> {
    let ctx = Ctx::new(c)?;
    let report = verify::run_all(&ctx.cfg)?;
    for c in &report.criteria {
        say(c.line());
    }
    io::write_manifest(&ctx.out.join("verify.json"), &report)?;
    ctx.manifest("verify", &["verify.json"])?;
    Ok(if report.all_passed() { 0 } else { EXIT_ACCEPTANCE })
}

/// Caps the global thread pool at `KINLAW_THREADS` when set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("KINLAW_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("KINLAW_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Error::Config("KINLAW_THREADS must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `argv` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = init_threads().and_then(|_| match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Family(c) => cmd_family(c),
        Command::Kinetic { common, variant } => cmd_kinetic(common, (*variant).into()),
        Command::Trace(c) => cmd_trace(c),
        Command::Qfunc(c) => cmd_qfunc(c),
        Command::Jumpset(c) => cmd_jumpset(c),
        Command::Vmo { common, t, x } => cmd_vmo(common, t.zip(*x)),
        Command::Report { config, out } => cmd_report(config.as_deref(), out),
        Command::Verify(c) => cmd_verify(c),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {e}");
            if code == 2 {
                let diag = serde_json::json!({ "error": e.to_string(), "exit_code": code });
                eprintln!("{diag}");
            }
            code
        }
    }
}
