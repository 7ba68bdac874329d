//! Interaction functional Q(t) between a fast Γ^max curve and a slow Γ^min curve.

use kinlaw::lagrangian::{q_functional, trace, Band};
use kinlaw::verify::SmoothRun;

fn main() -> kinlaw::error::Result<()> {
    let run = SmoothRun::new(128)?;
    let spec = run.spec;
    let g = trace(&run.sol, &run.family, 0.5, 0.0, spec.b, Band::Max, 0.5, 2)?;
    let s = trace(&run.sol, &run.family, 1.5, 0.0, spec.w_min + 0.5 * spec.r, Band::Min, 0.5, 2)?;
    let led = q_functional(&run.sol, &run.family, &g, &s, spec)?;
    for k in (0..led.t.len()).step_by(16) {
        println!("t = {:.3}  Q = {:.6e}  F_out = {:.6e}  F_in = {:.6e}", led.t[k], led.q[k], led.f_out[k], led.f_in[k]);
    }
    println!("predicted outflow rate c²(b-a)²/2 = {:.6e}", led.predicted_rate);
    Ok(())
}
