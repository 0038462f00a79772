//! Macroscopic equations: the conservation law with its entropy solver and
//! exact Riemann solutions, the anomalous-scale nonlocal equation, and
//! weak-form diagnostics.

mod entropy;
mod flux;
mod grid;
mod nonlocal;
mod quad;
mod riemann;
mod weak;

pub use entropy::{entropy_snapshots, entropy_solve, EntropyRun};
pub use flux::FluxModel;
pub use grid::GridField;
pub use nonlocal::{evolve_nonlocal, nonlocal_rhs, transport_lipschitz, NonlocalRun, NonlocalSpec};
pub use quad::{gauss_legendre, integrate};
pub use riemann::{riemann_exact, RiemannSolution};
pub use weak::{kruzkov_check, weak_residual_conservation, weak_residual_nonlocal, FieldHistory, KruzkovMargin, TestBump};
