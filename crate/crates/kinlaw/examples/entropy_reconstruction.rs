//! Rebuilds the p-system entropy η = a·v from its derivatives along the two edges of W.

use kinlaw::goursat::{build_family_unchecked, compute_gh, reconstruct_entropy, uniform_cuts, WGrid};
use kinlaw::system::SystemChart;

fn main() -> kinlaw::error::Result<()> {
    let chart = SystemChart::p_system();
    for (n_xi, n) in [(16, 61), (32, 125), (64, 253)] {
        let gh = compute_gh(&chart, WGrid::for_chart(&chart, n, n)?)?;
        let g = gh.grid;
        let fam = build_family_unchecked(&chart, gh, &uniform_cuts(&g.w, n_xi), &uniform_cuts(&g.z, n_xi))?;
        let av = |w: f64, z: f64| chart.from_riemann(w, z).map(|u| (u[0], u[1]));
        let k = |a: f64| (1.0 + 3.0 * a * a).sqrt();
        let rho1: Vec<f64> = fam.xi.iter().map(|&x| av(x, g.z.lo).map(|(a, v)| -v / (2.0 * k(a)) - 0.5 * a)).collect::<Result<_, _>>()?;
        let rho2: Vec<f64> = fam.zeta.iter().map(|&y| av(g.w.lo, y).map(|(a, v)| v / (2.0 * k(a)) - 0.5 * a)).collect::<Result<_, _>>()?;
        let (eta, _) = reconstruct_entropy(&fam, &rho1, &rho2)?;
        let (a0, v0) = av(g.w.lo, g.z.lo)?;
        let mut err: f64 = 0.0;
        for i in 0..g.w.n {
            for j in 0..g.z.n {
                let (a, v) = av(g.w.node(i), g.z.node(j))?;
                err = err.max((eta.at(i, j) - (a * v - a0 * v0)).abs());
            }
        }
        println!("N_xi = {n_xi:3}  max error {err:.3e}");
    }
    Ok(())
}
