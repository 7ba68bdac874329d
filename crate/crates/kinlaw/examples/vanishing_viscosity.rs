//! L¹ distances between successive viscosities for a p-system ramp.

use kinlaw::system::SystemChart;
use kinlaw::viscous::{vanishing_sequence, InitialData, SimConfig};

fn main() -> kinlaw::error::Result<()> {
    let chart = SystemChart::p_system();
    let left = chart.from_riemann(-0.5, 0.7)?;
    let right = chart.from_riemann(-0.7, 0.5)?;
    let cfg = SimConfig {
        chart,
        initial: InitialData::Ramp { left, right, width: 0.2 },
        epsilon: 0.01,
        t_final: 0.5,
        nx: 512,
        length: 1.0,
        n_snapshots: 6,
        cfl: 0.4,
        energy: None,
    };
    let rep = vanishing_sequence(&cfg, &[0.02, 0.01, 0.005, 0.0025])?;
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(())
}
