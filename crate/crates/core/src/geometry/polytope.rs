use std::f64::consts::PI;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{matrix_rank, solve_lp, LinearProgram, ToleranceProfile};

/// Facet hyperplanes closer than this (in normal and in offset per unit
/// diameter) are merged.
const FACET_MERGE_TOL: f64 = 1e-8;

/// Supporting half-space `{x : ⟨normal, x⟩ ≤ offset}` with unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Facet {
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        self.offset - self.normal.dot(x)
    }
}

/// Position of a point relative to a polytope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Location {
    Interior,
    Boundary(Vec<usize>),
    Exterior,
}

/// Outcome of [`Polytope::can_translate_into_interior`].
#[derive(Debug, Clone, PartialEq)]
pub struct TranslationTest {
    /// Some translate of the point set lies in the open interior.
    pub movable: bool,
    /// Optimal common clearance `δ*` from all facets after translation.
    pub depth: f64,
    pub witness: Option<DVector<f64>>,
}

/// Full-dimensional convex polytope with both representations.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    name: Option<String>,
    dim: usize,
    facets: Vec<Facet>,
    vertices: Vec<DVector<f64>>,
    incidence: Vec<Vec<usize>>,
    diameter: f64,
}

/// Dimension of the affine hull of `points` (−1 is reported as 0 for an
/// empty list).
pub fn affine_rank(points: &[&DVector<f64>], tol: &ToleranceProfile) -> usize {
    let Some(first) = points.first() else {
        return 0;
    };
    if points.len() == 1 {
        return 0;
    }
    let n = first.len();
    let m = DMatrix::from_fn(n, points.len() - 1, |r, c| points[c + 1][r] - first[r]);
    matrix_rank(&m, tol).unwrap_or(0)
}

fn diameter_of(points: &[DVector<f64>]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Normal of the hyperplane through `n` points in `R^n` via the generalized
/// cross product of the edge vectors. `None` when the points are affinely
/// dependent.
fn hyperplane_normal(points: &[&DVector<f64>]) -> Option<DVector<f64>> {
    let n = points[0].len();
    let diffs: Vec<DVector<f64>> = points[1..].iter().map(|p| *p - points[0]).collect();
    if n == 1 {
        return Some(DVector::from_element(1, 1.0));
    }
    let scale: f64 = diffs.iter().map(|d| d.norm()).product();
    if scale == 0.0 {
        return None;
    }
    let normal = DVector::from_fn(n, |k, _| {
        let minor = DMatrix::from_fn(n - 1, n - 1, |r, c| diffs[r][if c < k { c } else { c + 1 }]);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    });
    let norm = normal.norm();
    (norm > 1e-10 * scale).then(|| normal / norm)
}

fn same_facet(a: &Facet, b: &Facet, diameter: f64) -> bool {
    (&a.normal - &b.normal).norm() <= FACET_MERGE_TOL
        && (a.offset - b.offset).abs() <= FACET_MERGE_TOL * diameter.max(1.0)
}

impl Polytope {
    /// Convex hull of a point set, with facets found by enumerating every
    /// `n`-subset of the input.
    pub fn from_vertices(points: &[DVector<f64>], tol: &ToleranceProfile) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::invalid("empty point list"));
        };
        let n = first.len();
        if n == 0 || points.iter().any(|p| p.len() != n) {
            return Err(Error::invalid("points must share a positive dimension"));
        }
        if points.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        if points.len() < n + 1 {
            return Err(Error::invalid(format!(
                "need at least {} points in R^{n}",
                n + 1
            )));
        }
        let diameter = diameter_of(points);
        let lin_tol = tol.feas * diameter;
        let mut unique: Vec<DVector<f64>> = Vec::with_capacity(points.len());
        for p in points {
            if !unique.iter().any(|q| (q - p).norm() <= lin_tol) {
                unique.push(p.clone());
            }
        }
        let refs: Vec<&DVector<f64>> = unique.iter().collect();
        if affine_rank(&refs, tol) < n {
            return Err(Error::invalid(
                "points do not affinely span the ambient space",
            ));
        }

        let mut facets: Vec<Facet> = Vec::new();
        for subset in (0..unique.len()).combinations(n) {
            let pts: Vec<&DVector<f64>> = subset.iter().map(|&i| &unique[i]).collect();
            let Some(u) = hyperplane_normal(&pts) else {
                continue;
            };
            let b = u.dot(pts[0]);
            let (mut below, mut above) = (true, true);
            for p in &unique {
                let s = u.dot(p) - b;
                below &= s <= lin_tol;
                above &= s >= -lin_tol;
                if !below && !above {
                    break;
                }
            }
            let facet = if below {
                Facet {
                    normal: u,
                    offset: b,
                }
            } else if above {
                Facet {
                    normal: -u,
                    offset: -b,
                }
            } else {
                continue;
            };
            if !facets.iter().any(|f| same_facet(f, &facet, diameter)) {
                facets.push(facet);
            }
        }
        Self::assemble(None, n, facets, unique, diameter, tol)
    }

    /// Bounded intersection of half-spaces `⟨a, x⟩ ≤ b`; normals need not be
    /// unit. Redundant half-spaces are dropped.
    pub fn from_halfspaces(
        halfspaces: &[(DVector<f64>, f64)],
        tol: &ToleranceProfile,
    ) -> Result<Self> {
        let Some((first, _)) = halfspaces.first() else {
            return Err(Error::invalid("empty half-space list"));
        };
        let n = first.len();
        let mut normalized = Vec::with_capacity(halfspaces.len());
        for (a, b) in halfspaces {
            if a.len() != n || n == 0 {
                return Err(Error::invalid(
                    "half-space normals must share a positive dimension",
                ));
            }
            let norm = a.norm();
            if !(norm.is_finite() && b.is_finite()) || norm == 0.0 {
                return Err(Error::invalid("half-space with zero or non-finite data"));
            }
            normalized.push(Facet {
                normal: a / norm,
                offset: b / norm,
            });
        }

        // Bounding box by 2n LPs; unboundedness and emptiness surface here.
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for k in 0..n {
            for sign in [1.0, -1.0] {
                let mut obj = vec![0.0; n];
                obj[k] = sign;
                let mut lp = LinearProgram::new(obj, vec![true; n]);
                for f in &normalized {
                    lp.add_le(f.normal.iter().copied().collect(), f.offset);
                }
                let sol = solve_lp(&lp, tol).map_err(|e| match e {
                    Error::Infeasible(_) => Error::invalid("half-spaces have empty intersection"),
                    Error::NumericalFailure(m) => {
                        Error::invalid(format!("half-space intersection is unbounded ({m})"))
                    }
                    other => other,
                })?;
                if sign > 0.0 {
                    hi[k] = sol.x[k];
                } else {
                    lo[k] = sol.x[k];
                }
            }
        }
        let box_diag = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt();
        let (_, radius) = chebyshev(&normalized, n, tol)?;
        if radius <= tol.feas * box_diag.max(1.0) {
            return Err(Error::invalid("half-space intersection has empty interior"));
        }

        let lin_tol = tol.feas * box_diag.max(1.0);
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        for subset in (0..normalized.len()).combinations(n) {
            let a = DMatrix::from_fn(n, n, |r, c| normalized[subset[r]].normal[c]);
            let b = DVector::from_fn(n, |r, _| normalized[subset[r]].offset);
            let s = crate::numerics::singular_values(&a);
            if s[n - 1] <= 1e-10 * s[0] {
                continue;
            }
            let Some(x) = a.lu().solve(&b) else { continue };
            if normalized
                .iter()
                .all(|f| f.normal.dot(&x) - f.offset <= lin_tol)
                && !vertices.iter().any(|v| (v - &x).norm() <= lin_tol)
            {
                vertices.push(x);
            }
        }
        let diameter = diameter_of(&vertices);
        let mut facets: Vec<Facet> = Vec::new();
        for f in normalized {
            if !facets.iter().any(|g| same_facet(g, &f, diameter)) {
                facets.push(f);
            }
        }
        Self::assemble(None, n, facets, vertices, diameter, tol)
    }

    /// Keep irredundant facets and extreme points, and build incidence.
    fn assemble(
        name: Option<String>,
        dim: usize,
        facets: Vec<Facet>,
        points: Vec<DVector<f64>>,
        diameter: f64,
        tol: &ToleranceProfile,
    ) -> Result<Self> {
        let lin_tol = tol.feas * diameter;
        let on = |f: &Facet, p: &DVector<f64>| f.slack(p).abs() <= lin_tol;
        let facets: Vec<Facet> = facets
            .into_iter()
            .filter(|f| {
                let pts: Vec<&DVector<f64>> = points.iter().filter(|p| on(f, p)).collect();
                pts.len() >= dim && affine_rank(&pts, tol) == dim - 1
            })
            .collect();
        let vertices: Vec<DVector<f64>> = points
            .into_iter()
            .filter(|p| {
                let normals: Vec<&Facet> = facets.iter().filter(|f| on(f, p)).collect();
                let m = DMatrix::from_fn(dim, normals.len(), |r, c| normals[c].normal[r]);
                !normals.is_empty() && matrix_rank(&m, tol).unwrap_or(0) == dim
            })
            .collect();
        let incidence: Vec<Vec<usize>> = facets
            .iter()
            .map(|f| {
                (0..vertices.len())
                    .filter(|&i| on(f, &vertices[i]))
                    .collect()
            })
            .collect();
        if facets.len() < dim + 1 || vertices.len() < dim + 1 {
            return Err(Error::invalid("degenerate polytope"));
        }
        Ok(Self {
            name,
            dim,
            facets,
            vertices,
            incidence,
            diameter,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet_count(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[DVector<f64>] {
        &self.vertices
    }

    /// Vertex indices lying on each facet.
    pub fn incidence(&self) -> &[Vec<usize>] {
        &self.incidence
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Absolute length tolerance for this polytope: `feas · diameter`.
    pub fn length_tol(&self, tol: &ToleranceProfile) -> f64 {
        tol.feas * self.diameter
    }

    /// Half-space data `(u_i, b_i)` in facet order.
    pub fn halfspaces(&self) -> Vec<(DVector<f64>, f64)> {
        self.facets
            .iter()
            .map(|f| (f.normal.clone(), f.offset))
            .collect()
    }

    /// Same polytope scaled about the origin by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            name: self.name.clone(),
            dim: self.dim,
            facets: self
                .facets
                .iter()
                .map(|f| Facet {
                    normal: f.normal.clone(),
                    offset: f.offset * k,
                })
                .collect(),
            vertices: self.vertices.iter().map(|v| v * k).collect(),
            incidence: self.incidence.clone(),
            diameter: self.diameter * k,
        }
    }

    /// Same polytope translated by `c`.
    pub fn translated(&self, c: &DVector<f64>) -> Self {
        Self {
            name: self.name.clone(),
            dim: self.dim,
            facets: self
                .facets
                .iter()
                .map(|f| Facet {
                    normal: f.normal.clone(),
                    offset: f.offset + f.normal.dot(c),
                })
                .collect(),
            vertices: self.vertices.iter().map(|v| v + c).collect(),
            incidence: self.incidence.clone(),
            diameter: self.diameter,
        }
    }

    /// Facets whose hyperplane passes through `x` within `feas · diameter`.
    pub fn active_facets(&self, x: &DVector<f64>, tol: &ToleranceProfile) -> Vec<usize> {
        let lt = self.length_tol(tol);
        (0..self.facets.len())
            .filter(|&i| self.facets[i].slack(x).abs() <= lt)
            .collect()
    }

    pub fn locate(&self, x: &DVector<f64>, tol: &ToleranceProfile) -> Location {
        let lt = self.length_tol(tol);
        let worst = self
            .facets
            .iter()
            .map(|f| -f.slack(x))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst > lt {
            return Location::Exterior;
        }
        let active = self.active_facets(x, tol);
        if active.is_empty() {
            Location::Interior
        } else {
            Location::Boundary(active)
        }
    }

    /// Outward unit normals of the facets through a boundary point; their
    /// nonnegative hull is the outer normal cone at `x`.
    pub fn normal_cone_generators(
        &self,
        x: &DVector<f64>,
        tol: &ToleranceProfile,
    ) -> Result<Vec<DVector<f64>>> {
        match self.locate(x, tol) {
            Location::Boundary(active) => Ok(active
                .into_iter()
                .map(|i| self.facets[i].normal.clone())
                .collect()),
            _ => Err(Error::precondition("point is not on the boundary")),
        }
    }

    /// Pairs of facets meeting in an `(n−2)`-face, with dihedral angle
    /// `α = π − ∠(q_i, q_j)` for inward normals `q = −u`.
    pub fn dihedral_angles(&self, tol: &ToleranceProfile) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        let f = self.facets.len();
        for i in 0..f {
            for j in i + 1..f {
                let shared: Vec<&DVector<f64>> = self.incidence[i]
                    .iter()
                    .filter(|v| self.incidence[j].contains(v))
                    .map(|&v| &self.vertices[v])
                    .collect();
                if shared.is_empty() || affine_rank(&shared, tol) != self.dim - 2 {
                    continue;
                }
                let cos = self.facets[i]
                    .normal
                    .dot(&self.facets[j].normal)
                    .clamp(-1.0, 1.0);
                out.push((i, j, PI - cos.acos()));
            }
        }
        out
    }

    /// Whether every dihedral angle lies strictly inside `(0, π/2)`, and the
    /// sum of all dihedral angles.
    pub fn is_acute(&self, tol: &ToleranceProfile) -> (bool, f64) {
        let angles = self.dihedral_angles(tol);
        let sum = angles.iter().map(|a| a.2).sum();
        let acute = angles
            .iter()
            .all(|&(_, _, a)| a > tol.feas && a < PI / 2.0 - tol.feas);
        (acute, sum)
    }

    /// Chebyshev center and radius (the point maximizing the smallest slack).
    pub fn chebyshev_center(&self, tol: &ToleranceProfile) -> Result<(DVector<f64>, f64)> {
        chebyshev(&self.facets, self.dim, tol)
    }

    pub fn interior_point(&self, tol: &ToleranceProfile) -> Result<DVector<f64>> {
        Ok(self.chebyshev_center(tol)?.0)
    }

    /// Decide whether the point set can be translated into the open
    /// interior: `max δ` subject to `⟨u_i, p_j + t⟩ + δ ≤ b_i` for all `i, j`.
    /// A non-movable set belongs to `F(P)`.
    pub fn can_translate_into_interior(
        &self,
        points: &[DVector<f64>],
        tol: &ToleranceProfile,
    ) -> Result<TranslationTest> {
        if points.is_empty() {
            return Err(Error::precondition("empty point list"));
        }
        if points.iter().any(|p| p.len() != self.dim) {
            return Err(Error::invalid("point dimension differs from polytope"));
        }
        let n = self.dim;
        let mut obj = vec![0.0; n + 1];
        obj[0] = 1.0;
        let mut lp = LinearProgram::new(obj, vec![true; n + 1]);
        for f in &self.facets {
            for p in points {
                let mut row = Vec::with_capacity(n + 1);
                row.push(1.0);
                row.extend(f.normal.iter());
                lp.add_le(row, f.slack(p));
            }
        }
        let sol = solve_lp(&lp, tol)?;
        let depth = sol.x[0];
        let movable = depth > self.length_tol(tol);
        Ok(TranslationTest {
            movable,
            depth,
            witness: movable.then(|| DVector::from_column_slice(&sol.x[1..])),
        })
    }
}

fn chebyshev(facets: &[Facet], n: usize, tol: &ToleranceProfile) -> Result<(DVector<f64>, f64)> {
    let mut obj = vec![0.0; n + 1];
    obj[n] = 1.0;
    let mut free = vec![true; n + 1];
    free[n] = false;
    let mut lp = LinearProgram::new(obj, free);
    for f in facets {
        let mut row: Vec<f64> = f.normal.iter().copied().collect();
        row.push(f.normal.norm());
        lp.add_le(row, f.offset);
    }
    let sol = solve_lp(&lp, tol).map_err(|e| match e {
        Error::Infeasible(_) => Error::invalid("half-spaces have empty intersection"),
        other => other,
    })?;
    Ok((DVector::from_column_slice(&sol.x[..n]), sol.x[n]))
}
