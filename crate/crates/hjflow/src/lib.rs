//! Numerical machinery for L-infinity variational problems with Hamiltonians
//! H(x,p) on planar grids: intrinsic pseudo-distances, action functions,
//! Hamilton-Jacobi flows, absolute-minimizer criteria checks, a Dirichlet
//! fixed-point solver, and the small-slope patching construction.

pub mod action;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod hamiltonian;
pub mod io;
pub mod math;
pub mod scene;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use math::{SymMat2, Vec2};

/// Saturating stand-in for +infinity in dynamic programs.
pub const INF_SENTINEL: f64 = 1e12;
