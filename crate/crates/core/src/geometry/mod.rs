//! Convex polytopes, their facial structure and closed polygonal lines on
//! their boundary.

mod polytope;
mod trajectory;

pub use polytope::{affine_rank, Facet, Location, Polytope, TranslationTest};
pub use trajectory::Trajectory;
