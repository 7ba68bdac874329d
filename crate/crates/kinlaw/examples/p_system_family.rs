//! p-system entropy family: Goursat self-convergence and the local kinetic speed strip.

use kinlaw::goursat::{build_family, compute_gh, solve_goursat, uniform_cuts, WGrid};
use kinlaw::system::SystemChart;

fn main() -> kinlaw::error::Result<()> {
    let chart = SystemChart::p_system();
    let theta = |n: usize| -> kinlaw::error::Result<_> {
        let gh = compute_gh(&chart, WGrid::for_chart(&chart, n + 1, n + 1)?)?;
        Ok(solve_goursat(&chart, &gh, -0.6, &|_| 1.0)?.theta)
    };
    let (a, b, c) = (theta(32)?, theta(64)?, theta(128)?);
    let diff = |p: &kinlaw::goursat::Table, q: &kinlaw::goursat::Table, n: usize| {
        (0..=n).flat_map(|i| (0..=n).map(move |j| (i, j))).map(|(i, j)| (p.at(i, j) - q.at(2 * i, 2 * j)).abs()).fold(0.0, f64::max)
    };
    println!("self-convergence order {:.3}", (diff(&a, &b, 32) / diff(&b, &c, 64)).log2());

    let gh = compute_gh(&chart, WGrid::for_chart(&chart, 129, 129)?)?;
    let g = gh.grid;
    let fam = build_family(&chart, gh, &uniform_cuts(&g.w, 33), &uniform_cuts(&g.z, 33))?;
    println!("strip constants: {:?}", fam.strip);
    for xi in [-0.75, -0.65, -0.55] {
        let (lam, _) = fam.kinetic_speed(xi, -0.45, 0.6, true)?;
        println!("λ₁[{xi}](w = -0.45, z = 0.6) = {lam:+.6}");
    }
    Ok(())
}
