//! Numerical verification of the kinetic theory of 2×2 genuinely nonlinear conservation laws:
//! Goursat-built singular entropies, vanishing-viscosity runs, kinetic defect measures,
//! characteristic bundles with the interaction functional, and jump-set / VMO diagnostics.

// NaN-rejecting `!(x > 0.0)` checks and index loops over paired grids are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod goursat;
pub mod io;
pub mod kinetic;
pub mod lagrangian;
pub mod quad;
pub mod system;
pub mod verify;
pub mod viscous;
