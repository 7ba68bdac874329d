//! Nonnegative part μ₁ of the viscous kinetic defect against the energy-ledger bound.

use kinlaw::goursat::{build_family, compute_gh, uniform_cuts, WGrid};
use kinlaw::kinetic::{mu1_bound_factor, mu1_from_viscous};
use kinlaw::system::SystemChart;
use kinlaw::viscous::{energy_budget, simulate, EnergyId, InitialData, SimConfig, SineMode};

fn main() -> kinlaw::error::Result<()> {
    let chart = SystemChart::Decoupled;
    let gh = compute_gh(&chart, WGrid::for_chart(&chart, 129, 129)?)?;
    let fam = build_family(&chart, gh.clone(), &uniform_cuts(&gh.grid.w, 33), &uniform_cuts(&gh.grid.z, 33))?;
    let cfg = SimConfig {
        chart: chart.clone(),
        initial: InitialData::Sine {
            w: SineMode { mean: 0.1, amp: 0.4, k: 1, phase: 0.0 },
            z: SineMode { mean: 0.0, amp: 0.3, k: 2, phase: 0.0 },
        },
        epsilon: 0.005,
        t_final: 1.0,
        nx: 512,
        length: 2.0,
        n_snapshots: 101,
        cfl: 0.4,
        energy: None,
    };
    let (sol, _) = simulate(&cfg)?;
    let m = mu1_from_viscous(&sol, &fam)?;
    let budget = energy_budget(&sol, EnergyId::default_for(&chart));
    println!("min cell mass {:.3e}", m.mass.iter().cloned().fold(f64::INFINITY, f64::min));
    println!("μ₁ total {:.6}  bound {:.6}", m.total(), mu1_bound_factor(&fam) * budget.dissipation_integral);
    Ok(())
}
