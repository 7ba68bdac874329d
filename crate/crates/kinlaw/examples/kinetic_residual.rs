//! Kinetic residual of a smooth solution under joint refinement of (dx, dt, dξ).

use kinlaw::goursat::{build_family, compute_gh, uniform_cuts, WGrid};
use kinlaw::kinetic::{assemble, kinetic_residual, split_residual, TestWidths, Variant};
use kinlaw::system::SystemChart;
use kinlaw::verify::smooth_solution;

fn main() -> kinlaw::error::Result<()> {
    let chart = SystemChart::Decoupled;
    let gh = compute_gh(&chart, WGrid::for_chart(&chart, 129, 129)?)?;
    for (nx, n_xi, w) in [(64, 17, 2), (128, 33, 4), (256, 65, 8)] {
        let fam = build_family(&chart, gh.clone(), &uniform_cuts(&gh.grid.w, n_xi), &uniform_cuts(&gh.grid.z, n_xi))?;
        let field = assemble(&smooth_solution(nx)?, &fam, Variant::Chi)?;
        let res = kinetic_residual(&field, TestWidths { t: w, x: w, k: w / 2 })?;
        let (mu0, mu1) = split_residual(&res, true);
        println!("nx = {nx:3}  |residual| = {:.3e}  μ₀ = {:.3e}  μ₁ = {:.3e}", res.total_variation(), mu0.total(), mu1.total());
    }
    Ok(())
}
