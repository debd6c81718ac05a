//! Hamiltonian flows on the manifold of probability densities over the
//! flat torus, using the L2-Wasserstein metric.
//!
//! The evolved object is a pair `(rho, phi)` of density and potential
//! solving the coupled continuity / Hamilton-Jacobi system
//!
//! ```text
//! d rho / dt + div(rho grad phi)          = 0
//! d phi / dt + 1/2 |grad phi|^2           = -dF/drho
//! ```
//!
//! for a configurable energy `F` (linear potential, pairwise interaction,
//! Fisher information). The crate provides:
//!
//! - [`grid`]: staggered periodic calculus with exact summation-by-parts
//!   adjointness;
//! - [`operators`]: the density-weighted Laplacian, its pseudo-inverse and
//!   the metric it induces in both coordinate systems;
//! - [`functionals`]: energies with exact discrete first variations;
//! - [`dynamics`]: the flow itself - Hamiltonian/Lagrangian, Legendre maps,
//!   RK4 and implicit-midpoint steppers, geodesic curvature, path action;
//! - [`particles`]: a characteristics (velocity-Verlet ensemble) oracle;
//! - [`quantum`]: split-step Schrodinger and heat-pair oracles connected
//!   through the wave and log-ratio transforms;
//! - [`scenarios`]: named, config-driven experiments tying the above
//!   together with CSV/JSON reporting;
//! - [`verify`]: the runtime invariant suite behind `whflow verify`.

pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod operators;
pub mod particles;
pub mod presets;
pub mod quantum;
pub mod scenarios;
mod spectral;
pub mod verify;

pub use error::{Error, Result};
