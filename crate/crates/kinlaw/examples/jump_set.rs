//! Candidate jump set of a decoupled shock run, as a thin tube around the shock line.

use kinlaw::config::ExperimentConfig;
use kinlaw::diagnostics::{coarsen, mask_from_ratio, rescaled_dissipation};
use kinlaw::kinetic::{entropy_bank, nu_sup, TestWidths};
use kinlaw::verify::ShockRun;

fn main() -> kinlaw::error::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/decoupled_shock.json");
    let run = ShockRun::new(&ExperimentConfig::load(&path)?)?;
    let nu = nu_sup(&run.sol, &entropy_bank(&run.family, 32), TestWidths::default())?;
    let coarse = coarsen(&nu, 6, 16)?;
    let radii = [2.0 * run.sol.dx, 4.0 * run.sol.dx, 8.0 * run.sol.dx];
    let ratio = rescaled_dissipation(&coarse, &radii);
    let top = ratio.iter().cloned().fold(0.0, f64::max);
    for frac in [0.1, 0.25, 0.5] {
        let mask = mask_from_ratio(&coarse, &radii, ratio.clone(), frac * top);
        println!("θ = {frac:.2}·max: {} cells, area {:.4}", mask.count(), mask.area());
    }
    let mask = mask_from_ratio(&coarse, &radii, ratio, 0.25 * top);
    for n in (0..mask.times.len()).step_by(8) {
        let xs: Vec<String> = mask.row(n).iter().map(|&i| format!("{:.3}", mask.x(i))).collect();
        println!("t = {:.3}  flagged x = [{}]  shock at {:.3}", mask.times[n], xs.join(", "), 1.0 + 0.2 * mask.times[n]);
    }
    Ok(())
}
