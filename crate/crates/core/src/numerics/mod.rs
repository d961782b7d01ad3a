//! Small dense linear algebra and the two optimization subproblems solved
//! for every facet tuple: a linear objective over `ball ∩ cone ∩ subspace`,
//! and the placement LP.
//!
//! Everything here is a pure function of its inputs.

mod cone;
mod linalg;
mod simplex;

pub use cone::{
    max_linear_over_cone_ball, nnls, project_polyhedral_cone, ConeBallOutcome, ConeBallProblem,
};
pub use linalg::{
    fixed_subspace, matrix_rank, null_space, positive_kernel, reflection, singular_values,
    KernelOutcome,
};
pub use simplex::{
    solve_lp, ClearanceScope, LinearProgram, LpSolution, PlacementLp, PlacementSolution,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Numerical cutoffs used throughout the crate.
///
/// `feas` is an absolute length tolerance for unit-scale data; geometric
/// predicates multiply it by the polytope diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceProfile {
    /// Relative singular-value cutoff for rank decisions.
    pub rank_rel: f64,
    /// Absolute feasibility tolerance.
    pub feas: f64,
    /// Relative cutoff for "strictly positive" multipliers.
    pub positivity: f64,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            rank_rel: 1e-10,
            feas: 1e-9,
            positivity: 1e-8,
        }
    }
}

impl ToleranceProfile {
    pub fn new(rank_rel: f64, feas: f64, positivity: f64) -> Result<Self> {
        let tol = Self {
            rank_rel,
            feas,
            positivity,
        };
        tol.validate()?;
        Ok(tol)
    }

    /// Default profile with the feasibility tolerance replaced.
    pub fn with_feas(feas: f64) -> Result<Self> {
        Self::new(Self::default().rank_rel, feas, Self::default().positivity)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rank_rel", self.rank_rel),
            ("feas", self.feas),
            ("positivity", self.positivity),
        ] {
            if !(v > 0.0 && v < 1e-2) {
                return Err(Error::invalid(format!(
                    "tolerance {name} = {v} must lie in (0, 1e-2)"
                )));
            }
        }
        Ok(())
    }
}
