use nalgebra::DVector;

use super::{Location, Polytope};
use crate::error::{Error, Result};
use crate::numerics::ToleranceProfile;

/// Closed polygonal line `p_1 → p_2 → … → p_m → p_1` on the boundary of a
/// polytope, with its segment data precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<DVector<f64>>,
    /// Unit directions `(p_{j+1} − p_j) / |p_{j+1} − p_j|`, cyclically.
    pub directions: Vec<DVector<f64>>,
    pub segment_lengths: Vec<f64>,
    pub active_facets: Vec<Vec<usize>>,
    pub length: f64,
    /// Every bounce point lies in the relative interior of a single facet.
    pub regular: bool,
}

impl Trajectory {
    /// Build from bounce points, checking that there are at least two, that
    /// consecutive points differ and that all lie on the boundary.
    pub fn from_points(
        polytope: &Polytope,
        points: Vec<DVector<f64>>,
        tol: &ToleranceProfile,
    ) -> Result<Self> {
        let m = points.len();
        if m < 2 {
            return Err(Error::invalid(
                "a closed trajectory needs at least two points",
            ));
        }
        if points.iter().any(|p| p.len() != polytope.dim()) {
            return Err(Error::invalid("point dimension differs from polytope"));
        }
        let lt = polytope.length_tol(tol);
        let mut directions = Vec::with_capacity(m);
        let mut segment_lengths = Vec::with_capacity(m);
        for j in 0..m {
            let d = &points[(j + 1) % m] - &points[j];
            let len = d.norm();
            if len <= lt {
                return Err(Error::invalid(format!(
                    "points {j} and {} coincide",
                    (j + 1) % m
                )));
            }
            directions.push(d / len);
            segment_lengths.push(len);
        }
        let mut active_facets = Vec::with_capacity(m);
        for (j, p) in points.iter().enumerate() {
            match polytope.locate(p, tol) {
                Location::Boundary(a) => active_facets.push(a),
                _ => return Err(Error::invalid(format!("point {j} is not on the boundary"))),
            }
        }
        let regular = active_facets.iter().all(|a| a.len() == 1);
        Ok(Self {
            length: segment_lengths.iter().sum(),
            points,
            directions,
            segment_lengths,
            active_facets,
            regular,
        })
    }

    pub fn bounces(&self) -> usize {
        self.points.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polytope {
        let v = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
            .map(|p| DVector::from_column_slice(&p));
        Polytope::from_vertices(&v, &ToleranceProfile::default()).unwrap()
    }

    #[test]
    fn two_bounce_segment() {
        let tol = ToleranceProfile::default();
        let pts = vec![
            DVector::from_column_slice(&[0.3, 0.0]),
            DVector::from_column_slice(&[0.3, 1.0]),
        ];
        let t = Trajectory::from_points(&square(), pts, &tol).unwrap();
        assert_eq!(t.bounces(), 2);
        assert!((t.length - 2.0).abs() < 1e-15);
        assert!(t.regular);
    }

    #[test]
    fn rejects_bad_points() {
        let tol = ToleranceProfile::default();
        let p = |x: f64, y: f64| DVector::from_column_slice(&[x, y]);
        assert!(Trajectory::from_points(&square(), vec![p(0.3, 0.0)], &tol).is_err());
        assert!(Trajectory::from_points(&square(), vec![p(0.3, 0.0), p(0.3, 0.0)], &tol).is_err());
        assert!(Trajectory::from_points(&square(), vec![p(0.3, 0.0), p(0.3, 0.5)], &tol).is_err());
        let corner =
            Trajectory::from_points(&square(), vec![p(0.0, 0.0), p(1.0, 1.0)], &tol).unwrap();
        assert!(!corner.regular);
    }
}
