//! JSON schemas for polytopes and trajectories.
//!
//! Polytope: `{"name"?, "dim", "vertices"?: [[x…]…], "halfspaces"?: [{"normal", "offset"}…]}`
//! with at least one representation; half-space normals need not be unit.
//! Trajectory: `{"points": [[x…]…], "length"?, "regular"?, "facets"?}`, where
//! the optional fields are recomputed and cross-checked on load.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polytope, Trajectory};
use crate::numerics::ToleranceProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceJson {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub halfspaces: Option<Vec<HalfspaceJson>>,
}

fn vectors(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<Vec<DVector<f64>>> {
    rows.iter()
        .map(|r| {
            if r.len() == dim {
                Ok(DVector::from_column_slice(r))
            } else {
                Err(Error::invalid(format!(
                    "{what} of length {} in dimension {dim}",
                    r.len()
                )))
            }
        })
        .collect()
}

fn rows(vs: &[DVector<f64>]) -> Vec<Vec<f64>> {
    vs.iter().map(|v| v.iter().copied().collect()).collect()
}

impl PolytopeJson {
    pub fn from_polytope(p: &Polytope) -> Self {
        Self {
            name: p.name().map(str::to_owned),
            dim: p.dim(),
            vertices: Some(rows(p.vertices())),
            halfspaces: Some(
                p.facets()
                    .iter()
                    .map(|f| HalfspaceJson {
                        normal: f.normal.iter().copied().collect(),
                        offset: f.offset,
                    })
                    .collect(),
            ),
        }
    }

    /// Build the polytope, preferring the vertex list when both are given.
    pub fn to_polytope(&self, tol: &ToleranceProfile) -> Result<Polytope> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        let p = match (&self.vertices, &self.halfspaces) {
            (Some(v), _) => Polytope::from_vertices(&vectors(v, self.dim, "vertex")?, tol)?,
            (None, Some(h)) => {
                let hs = h
                    .iter()
                    .map(|h| {
                        if h.normal.len() != self.dim {
                            return Err(Error::invalid("half-space normal has wrong dimension"));
                        }
                        Ok((DVector::from_column_slice(&h.normal), h.offset))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Polytope::from_halfspaces(&hs, tol)?
            }
            (None, None) => return Err(Error::invalid("polytope needs vertices or halfspaces")),
        };
        Ok(match &self.name {
            Some(n) => p.with_name(n.clone()),
            None => p,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regular: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facets: Option<Vec<Vec<usize>>>,
}

impl TrajectoryJson {
    pub fn from_trajectory(t: &Trajectory) -> Self {
        Self {
            points: rows(&t.points),
            length: Some(t.length),
            regular: Some(t.regular),
            facets: Some(t.active_facets.clone()),
        }
    }

    pub fn points(&self, dim: usize) -> Result<Vec<DVector<f64>>> {
        vectors(&self.points, dim, "point")
    }

    /// Differences between the stored optional fields and recomputed values.
    pub fn mismatches(&self, length: f64, regular: bool, facets: &[Vec<usize>]) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(l) = self.length {
            if (l - length).abs() > 1e-9 * length.abs().max(1.0) {
                out.push(format!(
                    "stored length {l} differs from recomputed {length}"
                ));
            }
        }
        if let Some(r) = self.regular {
            if r != regular {
                out.push(format!(
                    "stored regular={r} differs from recomputed {regular}"
                ));
            }
        }
        if let Some(f) = &self.facets {
            if f.as_slice() != facets {
                out.push("stored facet sets differ from recomputed active facets".into());
            }
        }
        out
    }
}

pub fn polytope_from_json(text: &str, tol: &ToleranceProfile) -> Result<Polytope> {
    let parsed: PolytopeJson =
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("polytope JSON: {e}")))?;
    parsed.to_polytope(tol)
}

pub fn polytope_to_json(p: &Polytope) -> String {
    serde_json::to_string_pretty(&PolytopeJson::from_polytope(p)).expect("polytope serializes")
}

pub fn trajectory_from_json(text: &str) -> Result<TrajectoryJson> {
    serde_json::from_str(text).map_err(|e| Error::invalid(format!("trajectory JSON: {e}")))
}
