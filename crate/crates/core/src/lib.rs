//! Closed billiard trajectories in convex polytopes.
//!
//! The crate finds length-minimizing closed *regular* billiard trajectories in
//! a full-dimensional convex polytope `P ⊂ R^n` and verifies arbitrary
//! candidate trajectories against the generalized reflection law.
//!
//! Layout:
//! - [`numerics`]: rank/kernels, reflection products, cone projection, the
//!   ball-constrained cone maximization and a dense simplex LP solver.
//! - [`geometry`]: H/V polytopes, normal cones, dihedral angles, the
//!   "translate into the interior" test.
//! - [`search`]: facet-tuple enumeration and the per-tuple pipeline.
//! - [`verify`]: reflection-law, regularity and minimality checks.
//! - [`fixtures`]: reference polytopes and trajectories, random polytopes and
//!   a brute-force planar oracle.
//! - [`io`]: JSON schemas for polytopes and trajectories.

pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod numerics;
pub mod search;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{Polytope, Trajectory};
pub use numerics::ToleranceProfile;
