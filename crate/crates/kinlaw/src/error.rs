use thiserror::Error;

use crate::lagrangian::{Curve, QLedger};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state ({0}, {1}) outside the chart domain")]
    Domain(f64, f64),
    #[error("eigenvalue gap {gap:.3e} below tolerance at ({u0}, {u1})")]
    Hyperbolicity { gap: f64, u0: f64, u1: f64 },
    #[error("Riemann inverse did not converge for (w, z) = ({w}, {z}) after {iters} iterations")]
    Convergence { w: f64, z: f64, iters: usize },
    #[error("chart is not genuinely nonlinear: grid minimum of the speed derivative is {min:.3e}")]
    NotGnl { min: f64 },
    #[error("non-finite quadrature integrand at (w, z) = ({w}, {z})")]
    Quadrature { w: f64, z: f64 },
    #[error("grid error: {0}")]
    Grid(String),
    #[error("kinetic speed requested off the strip: xi = {xi}, w = {w}, r_bar = {r_bar}")]
    Strip { xi: f64, w: f64, r_bar: f64 },
    #[error("no strip width of at least two xi-steps keeps chi and d(lambda)/d(xi) bounded below ({0})")]
    DegenerateStrip(String),
    #[error("sample grid mismatch: {0}")]
    GridMismatch(String),
    #[error("stability violated: advective number {advective:.3}, diffusive number {diffusive:.3} (limit 0.4)")]
    Stability { advective: f64, diffusive: f64 },
    #[error("chart mismatch: solution uses '{solution}', family uses '{family}'")]
    ChartMismatch { solution: String, family: String },
    #[error("curve left the solution window at t = {t}")]
    WindowExit { t: f64, partial: Box<Curve> },
    #[error("band has zero kinetic mass")]
    EmptyBand,
    #[error("interaction curves crossed at t = {t_cross}")]
    Geometry { t_cross: f64, partial: Box<QLedger> },
    #[error("point ({t}, {x}) is closer than {r} to the window boundary")]
    Boundary { t: f64, x: f64, r: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Format(_) | Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
