//! Singular entropies of the decoupled chart, where Θ ≡ 1 and λ₁[ξ] = ξ in closed form.

use kinlaw::goursat::{build_family, compute_gh, uniform_cuts, WGrid};
use kinlaw::system::SystemChart;

fn main() -> kinlaw::error::Result<()> {
    let chart = SystemChart::Decoupled;
    let grid = WGrid::for_chart(&chart, 65, 65)?;
    let fam = build_family(&chart, compute_gh(&chart, grid)?, &uniform_cuts(&grid.w, 9), &uniform_cuts(&grid.z, 9))?;
    for (l, xi) in fam.xi.iter().enumerate() {
        let (lam, _) = fam.kinetic_speed(*xi, xi + 0.1, 0.0, true)?;
        println!("xi = {xi:+.3}  sup|Θ - 1| = {:.1e}  λ₁[ξ] = {lam:+.6}", fam.theta[l].data.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max));
    }
    println!("strip: {:?}", fam.strip);
    Ok(())
}
