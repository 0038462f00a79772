//! Hydrodynamic limits of long-range attractive particle systems.
//!
//! Particles hop on `Z^n` by heavy-tailed jumps `p(d) ∝ ‖d‖^{-(n+α)}` at rate
//! `g(η(x)) h(η(y))`. The crate provides equilibrium tables, a Monte Carlo
//! simulator, a basic coupling, finite-volume solvers for the limiting
//! equations, and an experiment harness that compares the two.

pub mod coupling;
pub mod equilibrium;
pub mod error;
pub mod harness;
pub mod interp;
pub mod kernel;
pub mod model;
pub mod pde;
pub mod profile;
pub mod simulator;

pub use equilibrium::{EquilibriumTable, Marginal, PhiPsiTable};
pub use error::{Error, Result};
pub use kernel::{JumpKernel, Orientation};
pub use model::{RateKind, RateModel};
pub use profile::Profile;
pub use simulator::{Configuration, Torus};
