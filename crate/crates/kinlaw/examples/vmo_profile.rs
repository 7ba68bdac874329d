//! Mean oscillation at a shock point (plateau) and at a rarefaction point (linear decay).

use kinlaw::diagnostics::vmo_profile;
use kinlaw::system::SystemChart;
use kinlaw::viscous::{simulate, InitialData, SimConfig};

fn main() -> kinlaw::error::Result<()> {
    let cfg = SimConfig {
        chart: SystemChart::Decoupled,
        initial: InitialData::TwoJump { left: [0.8, 0.0], right: [-0.4, 0.0], x0: 0.0, x1: 1.0 },
        epsilon: 0.005,
        t_final: 1.2,
        nx: 1024,
        length: 2.0,
        n_snapshots: 241,
        cfl: 0.4,
        energy: None,
    };
    let (sol, _) = simulate(&cfg)?;
    let radii = [0.3, 0.15, 0.075];
    println!("half-disk plateau π|u_l - u_r|/2 = {:.4}", std::f64::consts::PI * 1.2 / 2.0);
    for (label, x) in [("shock", 1.12), ("rarefaction", 0.15)] {
        let p = vmo_profile(&sol, 0.6, x, &radii)?;
        println!("{label:12} osc = {:?}  last ratio {:.3}  decays {}", p.oscillation, p.last_ratio, p.decays);
    }
    Ok(())
}
