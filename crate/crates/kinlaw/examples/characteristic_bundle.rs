//! Γ^max and Γ^min bundles on a smooth solution: pushforward reconstruction and crossings.

use kinlaw::lagrangian::{crossing_check, reconstruction_error, seed_bundle, Band, BandSpec};
use kinlaw::verify::{smooth_solution, SmoothRun};

fn main() -> kinlaw::error::Result<()> {
    let run = SmoothRun::new(128)?;
    let spec = BandSpec::from_solution(&smooth_solution(128)?, 0.15, None)?;
    println!("band: {spec:?}");
    for n in [256, 1024, 4096] {
        let g = seed_bundle(&run.sol, &run.family, spec, Band::Max, n, 0.5, 2)?;
        let s = seed_bundle(&run.sol, &run.family, spec, Band::Min, n, 0.5, 2)?;
        let rec = reconstruction_error(&run.sol, &run.family, &g, 0.5, 8, 4);
        let cross = crossing_check(&g, &s, run.sol.length);
        println!("n = {n:4}  reconstruction error {:.4}  (3/√n = {:.4})  crossing fraction {:.4}", rec.relative_error, 3.0 / (n as f64).sqrt(), cross.fraction);
    }
    Ok(())
}
