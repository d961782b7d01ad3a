//! Checks for candidate trajectories that do not depend on how they were
//! produced: the generalized reflection law, regularity, membership in
//! `F(P)`, the necessary minimality conditions, and the translation that turns
//! a short regular trajectory into a non-regular one of the same length.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{affine_rank, Location, Polytope, Trajectory};
use crate::numerics::{matrix_rank, nnls, null_space, solve_lp, LinearProgram, ToleranceProfile};

/// Per-bounce diagnostics of [`verify_billiard`], indexed by bounce point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointReport {
    pub active_facets: Vec<usize>,
    /// Distance from `n_{j−1} − n_j` to the normal cone at `p_j`.
    pub cone_residual: f64,
    /// Length of the outgoing segment `p_j → p_{j+1}`.
    pub segment_length: f64,
    /// Unit direction of the outgoing segment.
    pub direction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub valid_billiard: bool,
    pub regular: bool,
    #[serde(rename = "in_FT")]
    pub in_ft: bool,
    /// Both necessary minimality conditions hold; only evaluated for valid
    /// billiard trajectories.
    pub theorem1_ok: Option<bool>,
    pub length: f64,
    pub per_point: Vec<PointReport>,
    pub notes: Vec<String>,
}

fn distance_to_segment(p: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Residual of the best nonnegative combination of `generators` matching `v`.
fn cone_residual(generators: &[DVector<f64>], v: &DVector<f64>) -> Result<f64> {
    if generators.is_empty() {
        return Ok(v.norm());
    }
    let n = v.len();
    let g = DMatrix::from_fn(n, generators.len(), |r, c| generators[c][r]);
    let coef = nnls(&g, v, 100 * (n + generators.len()))?;
    Ok((g * coef - v).norm())
}

/// Check the closed polygonal line through `points` against the billiard
/// definition: boundary points, pairwise distinct, no straight-through
/// vertex, and `n_{j−1} − n_j ∈ N_P(p_j)` at every bounce.
pub fn verify_billiard(
    polytope: &Polytope,
    points: &[DVector<f64>],
    tol: &ToleranceProfile,
) -> Result<VerificationReport> {
    let m = points.len();
    if m < 2 {
        return Err(Error::invalid(
            "a closed trajectory needs at least two points",
        ));
    }
    if points.iter().any(|p| p.len() != polytope.dim()) {
        return Err(Error::invalid("point dimension differs from polytope"));
    }
    if points.iter().any(|p| p.iter().any(|x| !x.is_finite())) {
        return Err(Error::invalid("non-finite coordinate"));
    }
    let lt = polytope.length_tol(tol);
    let mut notes = Vec::new();
    let mut lengths = Vec::with_capacity(m);
    let mut dirs = Vec::with_capacity(m);
    for j in 0..m {
        let d = &points[(j + 1) % m] - &points[j];
        let len = d.norm();
        if len <= lt {
            return Err(Error::invalid(format!(
                "consecutive points {j} and {} coincide",
                (j + 1) % m
            )));
        }
        lengths.push(len);
        dirs.push(d / len);
    }

    let mut valid = true;
    for i in 0..m {
        for j in i + 2..m {
            if (&points[i] - &points[j]).norm() <= lt {
                valid = false;
                notes.push(format!("points {i} and {j} coincide"));
            }
        }
    }
    if m > 2 {
        for j in 0..m {
            let prev = &points[(j + m - 1) % m];
            let next = &points[(j + 1) % m];
            if distance_to_segment(&points[j], prev, next) <= lt {
                valid = false;
                notes.push(format!(
                    "point {j} lies on the segment joining its neighbours"
                ));
            }
        }
    }

    let mut per_point = Vec::with_capacity(m);
    for j in 0..m {
        let active = match polytope.locate(&points[j], tol) {
            Location::Boundary(a) => a,
            other => {
                valid = false;
                notes.push(format!("point {j} is not on the boundary ({other:?})"));
                Vec::new()
            }
        };
        let generators: Vec<DVector<f64>> = active
            .iter()
            .map(|&i| polytope.facets()[i].normal.clone())
            .collect();
        let v = &dirs[(j + m - 1) % m] - &dirs[j];
        let residual = cone_residual(&generators, &v)?;
        if residual > tol.feas * v.norm().max(1.0) {
            valid = false;
            notes.push(format!(
                "reflection law fails at point {j} (residual {residual:.3e})"
            ));
        }
        per_point.push(PointReport {
            active_facets: active,
            cone_residual: residual,
            segment_length: lengths[j],
            direction: dirs[j].iter().copied().collect(),
        });
    }
    let regular = per_point.iter().all(|p| p.active_facets.len() == 1);
    let in_ft = !polytope.can_translate_into_interior(points, tol)?.movable;
    if valid && !in_ft {
        notes.push("points can be translated into the interior".into());
    }
    let theorem1_ok = if valid {
        let mc = check_minimality_conditions(polytope, points, tol)?;
        Some(mc.dim_v_ok && mc.cone_dim_ok)
    } else {
        None
    };
    Ok(VerificationReport {
        valid_billiard: valid,
        regular,
        in_ft,
        theorem1_ok,
        length: lengths.iter().sum(),
        per_point,
        notes,
    })
}

/// Whether every point lies in the relative interior of a single facet.
pub fn is_regular(
    polytope: &Polytope,
    points: &[DVector<f64>],
    tol: &ToleranceProfile,
) -> Result<bool> {
    let mut regular = true;
    for (j, p) in points.iter().enumerate() {
        match polytope.locate(p, tol) {
            Location::Boundary(a) => regular &= a.len() == 1,
            _ => {
                return Err(Error::precondition(format!(
                    "point {j} is not on the boundary"
                )))
            }
        }
    }
    Ok(regular)
}

/// Outcome of [`check_minimality_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimalityCheck {
    /// Dimension of the affine hull `V` of the bouncing points.
    pub dim_v: usize,
    /// `dim V = m − 1`.
    pub dim_v_ok: bool,
    /// Dimension of the linear span of `N_P(p_j) ∩ V_0` for each bounce.
    pub cone_dims: Vec<usize>,
    /// Every entry of `cone_dims` equals one.
    pub cone_dim_ok: bool,
}

/// Linear span dimension of `{Σ c_k g_k : c ≥ 0} ∩ V_0`, where `w` holds an
/// orthonormal basis of `V_0^⊥` as columns.
fn restricted_cone_dim(
    generators: &[DVector<f64>],
    w: &DMatrix<f64>,
    tol: &ToleranceProfile,
) -> Result<usize> {
    let k = generators.len();
    if k == 0 {
        return Ok(0);
    }
    let n = generators[0].len();
    let g = DMatrix::from_fn(n, k, |r, c| generators[c][r]);
    let mut constraint = w.transpose() * &g;
    constraint
        .iter_mut()
        .filter(|x| x.abs() <= tol.feas)
        .for_each(|x| *x = 0.0);

    // Support: generators that carry positive weight in some admissible
    // combination. The cone {c ≥ 0 : Mc = 0} has a point positive on exactly
    // this support, so its span is the null space of M restricted to it.
    let mut support = Vec::new();
    for idx in 0..k {
        let mut obj = vec![0.0; k];
        obj[idx] = 1.0;
        let mut lp = LinearProgram::new(obj, vec![false; k]);
        for r in 0..constraint.nrows() {
            lp.add_eq(constraint.row(r).iter().copied().collect(), 0.0);
        }
        lp.add_le(vec![1.0; k], 1.0);
        let sol = solve_lp(&lp, tol)?;
        if sol.objective > tol.positivity {
            support.push(idx);
        }
    }
    if support.is_empty() {
        return Ok(0);
    }
    let m_s = constraint.select_columns(&support);
    let g_s = g.select_columns(&support);
    let kernel = if m_s.nrows() == 0 || m_s.iter().all(|&x| x == 0.0) {
        DMatrix::identity(support.len(), support.len())
    } else {
        null_space(&m_s, tol)?
    };
    if kernel.ncols() == 0 {
        return Ok(0);
    }
    matrix_rank(&(g_s * kernel), tol)
}

/// The two necessary conditions for a length minimizer with `m` bounces:
/// the bouncing points span an `(m−1)`-flat `V`, and each normal cone meets
/// the direction space `V_0` in a ray.
pub fn check_minimality_conditions(
    polytope: &Polytope,
    points: &[DVector<f64>],
    tol: &ToleranceProfile,
) -> Result<MinimalityCheck> {
    let m = points.len();
    let n = polytope.dim();
    let refs: Vec<&DVector<f64>> = points.iter().collect();
    let dim_v = affine_rank(&refs, tol);
    let centered = DMatrix::from_fn(n, m.saturating_sub(1), |r, c| {
        points[c + 1][r] - points[0][r]
    });
    let w = if centered.ncols() == 0 {
        DMatrix::identity(n, n)
    } else {
        null_space(&centered.transpose(), tol)?
    };
    let mut cone_dims = Vec::with_capacity(m);
    for p in points {
        let generators = polytope.normal_cone_generators(p, tol)?;
        cone_dims.push(restricted_cone_dim(&generators, &w, tol)?);
    }
    Ok(MinimalityCheck {
        dim_v,
        dim_v_ok: dim_v + 1 == m,
        cone_dim_ok: cone_dims.iter().all(|&d| d == 1),
        cone_dims,
    })
}

/// Translate a regular trajectory with at most `n` bounces along the common
/// tangent space of its bounce facets until some point reaches a lower
/// dimensional face. Length and validity are preserved.
pub fn translate_to_nonregular(
    polytope: &Polytope,
    trajectory: &Trajectory,
    tol: &ToleranceProfile,
) -> Result<Trajectory> {
    let n = polytope.dim();
    let m = trajectory.bounces();
    if m > n {
        return Err(Error::precondition(format!(
            "{m} bounces in dimension {n}; at most n allowed"
        )));
    }
    if !trajectory.regular {
        return Err(Error::precondition("trajectory is not regular"));
    }
    let normals: Vec<&DVector<f64>> = trajectory
        .active_facets
        .iter()
        .map(|a| &polytope.facets()[a[0]].normal)
        .collect();

    // Orthonormal basis of span{u_j}, then the first coordinate axis with a
    // nonzero component orthogonal to it.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for u in &normals {
        let mut v = (*u).clone();
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalize());
        }
    }
    let direction = (0..n)
        .find_map(|k| {
            let mut v = DVector::zeros(n);
            v[k] = 1.0;
            for b in &basis {
                v -= b * b.dot(&v);
            }
            (v.norm() > 1e-8).then(|| v.normalize())
        })
        .ok_or_else(|| Error::numerical("bounce normals span the whole space"))?;

    let lt = polytope.length_tol(tol);
    for d in [direction.clone(), -direction] {
        let mut step = f64::INFINITY;
        for (p, active) in trajectory.points.iter().zip(&trajectory.active_facets) {
            for (i, f) in polytope.facets().iter().enumerate() {
                let rate = f.normal.dot(&d);
                if active.contains(&i) || rate <= 1e-12 {
                    continue;
                }
                let t = f.slack(p) / rate;
                if t > lt && t < step {
                    step = t;
                }
            }
        }
        if step.is_finite() {
            let moved: Vec<DVector<f64>> =
                trajectory.points.iter().map(|p| p + &d * step).collect();
            return Trajectory::from_points(polytope, moved, tol);
        }
    }
    Err(Error::numerical(
        "no bounded translation step in either direction",
    ))
}
