//! Finite element solver for the relaxed degenerate Cahn-Hilliard (RDCH)
//! system with a single-well logarithmic potential and degenerate mobility.
//!
//! The RDCH system replaces the fourth-order Cahn-Hilliard equation by two
//! coupled second-order equations through a relaxation parameter `sigma`:
//!
//! ```text
//!   dn/dt = div( b(n) grad( phi + psi_+'(n) ) )
//!   -sigma Lap(phi) + phi = -gamma Lap(n) + psi_-'(n - (sigma/gamma) phi)
//! ```
//!
//! with zero-flux boundary conditions, mobility `b(n) = n (1-n)^2` and the
//! convex/concave splitting `psi = psi_+ + psi_-` of the single-well
//! potential. The discretization uses P1 Lagrange elements with mass
//! lumping and an edge-wise upwind choice of the mobility coefficient that
//! keeps the nodal densities inside `[0, 1]`.
//!
//! Two time discretizations are provided: a nonlinear semi-implicit scheme
//! solved by Picard iteration ([`solvers::step_nonlinear`]) and a linearized
//! semi-implicit scheme ([`solvers::step_linear`]). Runtime diagnostics
//! (energy, mass, entropy, dissipation, amplification-matrix stability
//! scans) live in [`diagnostics`].

pub mod config;
pub mod diagnostics;
pub mod fem;
pub mod mesh;
pub mod output;
pub mod physics;
pub mod solvers;
pub mod sparse;

pub mod commands;
