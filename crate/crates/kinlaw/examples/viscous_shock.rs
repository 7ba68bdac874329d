//! Vanishing-viscosity run of a decoupled Burgers shock with its energy ledger.

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
        n_snapshots: 13,
        cfl: 0.4,
        energy: None,
    };
    let (sol, ledger) = simulate(&cfg)?;
    for (t, row) in sol.times.iter().zip(&sol.u) {
        let xs = row.windows(2).enumerate().min_by(|a, b| (a.1[1][0] - a.1[0][0]).total_cmp(&(b.1[1][0] - b.1[0][0]))).unwrap().0;
        println!("t = {t:.2}  steepest descent at x = {:.4}  (Rankine-Hugoniot: {:.4})", sol.x(xs), 1.0 + 0.2 * t);
    }
    println!("∫∫ε|u_x|² = {:.6}, initial entropy {:.6}, ratio {:.4}", ledger.dissipation_integral, ledger.initial_entropy, ledger.ratio);
    Ok(())
}
