//! Measured entropy dissipation rate at a shock against the Rankine-Hugoniot value.

use kinlaw::kinetic::{dissipation_measure, TestWidths};
use kinlaw::system::SystemChart;
use kinlaw::verify::shock_rate;
use kinlaw::viscous::{simulate, InitialData, SimConfig};

fn main() -> kinlaw::error::Result<()> {
    for nx in [256, 512, 1024] {
        let cfg = SimConfig {
            chart: SystemChart::Decoupled,
            initial: InitialData::TwoJump { left: [0.8, 0.0], right: [-0.4, 0.0], x0: 0.0, x1: 1.0 },
            epsilon: 5.12 / nx as f64,
            t_final: 1.2,
            nx,
            length: 2.0,
            n_snapshots: 241,
            cfl: 0.4,
            energy: None,
        };
        let (sol, _) = simulate(&cfg)?;
        let d = dissipation_measure(&sol, &|u| (0.5 * u[0] * u[0], u[0].powi(3) / 3.0), TestWidths::default())?;
        let rate = d.sum_where(&|t, x| (0.3..=0.9).contains(&t) && (x - 1.0 - 0.2 * t).abs() <= 0.15) / 0.6;
        println!("nx = {nx:4}  ε = {:.4}  rate = {rate:.5}  (exact {:.5})", cfg.epsilon, shock_rate(0.8, -0.4));
    }
    Ok(())
}
