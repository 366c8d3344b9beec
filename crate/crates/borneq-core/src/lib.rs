//! Electrostatic Born-Infeld solver library.
//!
//! Computes the gradient-constrained potential `phi_rho` generated by a
//! charge measure on the boundary of a bounded domain, the equilibrium
//! measure/potential of that domain by two independent routes (conditional
//! gradient over the probability simplex and bisection on the plateau level),
//! the truncated 2h-Laplacian approximation hierarchy, and exact radial
//! solutions on balls that serve as the trusted oracle for everything else.
//!
//! The crate is deterministic by construction: every floating-point reduction
//! goes through fixed-chunk primitives (see [`par`]), so results are
//! bit-identical whether the `parallel` feature (rayon) is enabled or not.

pub mod ballcheck;
pub mod equilibrium;
pub mod error;
pub mod functionals;
pub mod geometry;
pub mod measures;
pub mod par;
pub mod radial;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use functionals::Model;
pub use geometry::{BoundaryMesh, DomainSpec, Grid, GridFunction, Shape};
pub use measures::{BoundaryMeasure, MollifiedDensity};
