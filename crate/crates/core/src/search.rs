//! Exhaustive search for the shortest closed regular billiard trajectory.
//!
//! For every cyclic class of `m` distinct facets (`2 ≤ m ≤ n + 1`) the
//! pipeline in [`evaluate_tuple`] decides whether a regular trajectory
//! bouncing on exactly those facets, in that order, exists; if so the
//! placement LP produces one. Tuples are independent, so they are evaluated
//! in parallel and reduced in enumeration order.

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Polytope, Trajectory};
use crate::numerics::{
    matrix_rank, max_linear_over_cone_ball, positive_kernel, reflection, ClearanceScope,
    ConeBallOutcome, ConeBallProblem, KernelOutcome, PlacementLp, PlacementSolution,
    ToleranceProfile,
};
use crate::verify::verify_billiard;

/// Relative length window inside which candidates count as tied.
const TIE_REL: f64 = 1e-9;

/// Tuples handed to the worker pool at a time.
const CHUNK: usize = 4096;

/// Ordered facet indices, canonical under cyclic shift (smallest first).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FacetTuple(pub Vec<usize>);

impl FacetTuple {
    /// Canonical rotation of an arbitrary cyclic sequence of distinct facets.
    pub fn canonical(indices: &[usize]) -> Result<Self> {
        if indices.len() < 2 || !indices.iter().all_unique() {
            return Err(Error::invalid(
                "a facet tuple needs at least two distinct indices",
            ));
        }
        let start = indices.iter().position_min().unwrap_or(0);
        Ok(Self(
            indices[start..]
                .iter()
                .chain(&indices[..start])
                .copied()
                .collect(),
        ))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for FacetTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// Number of canonical tuples of length `m` over `f` facets:
/// `C(f, m) · (m − 1)!`.
pub fn tuple_count(f: usize, m: usize) -> u64 {
    if m < 2 || m > f {
        return 0;
    }
    let mut binom: u64 = 1;
    for i in 0..m as u64 {
        binom = binom * (f as u64 - i) / (i + 1);
    }
    binom * (1..m as u64).product::<u64>()
}

/// Canonical tuples in lexicographic order: the smallest index first, then
/// every arrangement of `m − 1` larger indices.
pub fn enumerate_facet_tuples(f: usize, m: usize) -> impl Iterator<Item = FacetTuple> {
    let valid = m >= 2 && m <= f;
    (0..if valid { f } else { 0 }).flat_map(move |first| {
        ((first + 1)..f).permutations(m - 1).map(move |rest| {
            let mut t = Vec::with_capacity(m);
            t.push(first);
            t.extend(rest);
            FacetTuple(t)
        })
    })
}

/// Reflect `n_1` successively in the hyperplanes `u_1^⊥, …, u_m^⊥`.
///
/// Returns `n_1..n_m`, the multipliers `μ_j = 2⟨n_j, u_j⟩` and the closure
/// residual `‖R_m n_m − n_1‖`.
pub fn propagate_normals(
    n1: &DVector<f64>,
    u: &[DVector<f64>],
) -> (Vec<DVector<f64>>, Vec<f64>, f64) {
    let mut normals = Vec::with_capacity(u.len());
    let mut mu = Vec::with_capacity(u.len());
    let mut cur = n1.clone();
    for uj in u {
        let mj = 2.0 * cur.dot(uj);
        let next = &cur - uj * mj;
        normals.push(cur);
        mu.push(mj);
        cur = next;
    }
    let closure = (cur - n1).norm();
    (normals, mu, closure)
}

/// Vertices `γ_1 = 0, γ_{j+1} = γ_j + w_j d_j` of the closed polygonal line
/// with edges `w_j d_j`.
pub fn build_closed_line(
    directions: &[DVector<f64>],
    weights: &[f64],
    tol: &ToleranceProfile,
) -> Result<Vec<DVector<f64>>> {
    if directions.is_empty() || directions.len() != weights.len() {
        return Err(Error::invalid(
            "directions and weights must be nonempty and of equal length",
        ));
    }
    let n = directions[0].len();
    let mut vertices = Vec::with_capacity(directions.len());
    let mut cur = DVector::zeros(n);
    let mut scale: f64 = 0.0;
    for (d, &w) in directions.iter().zip(weights) {
        vertices.push(cur.clone());
        cur += d * w;
        scale += (d * w).norm();
    }
    if cur.norm() > tol.feas * scale.max(1.0) {
        return Err(Error::precondition(format!(
            "polygonal line does not close (gap {:.3e})",
            cur.norm()
        )));
    }
    Ok(vertices)
}

/// Where a tuple left the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "rank_U")]
    RankU,
    #[serde(rename = "kernel_mu")]
    KernelMu,
    #[serde(rename = "socp")]
    Socp,
    #[serde(rename = "rank_N")]
    RankN,
    #[serde(rename = "kernel_lambda")]
    KernelLambda,
    #[serde(rename = "lp_infeasible")]
    LpInfeasible,
    #[serde(rename = "lp_nonregular")]
    LpNonregular,
    /// Accepted by the pipeline but rejected by the independent verifier.
    #[serde(rename = "verify_failed")]
    VerifyFailed,
    #[serde(rename = "accepted")]
    Accepted,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::RankU => "rank_U",
            Stage::KernelMu => "kernel_mu",
            Stage::Socp => "socp",
            Stage::RankN => "rank_N",
            Stage::KernelLambda => "kernel_lambda",
            Stage::LpInfeasible => "lp_infeasible",
            Stage::LpNonregular => "lp_nonregular",
            Stage::VerifyFailed => "verify_failed",
            Stage::Accepted => "accepted",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Intermediate quantities of an accepted tuple, kept so that callers can
/// re-solve the placement problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Outward normals `u_j` (of the facet hit by `p_{j+1}`).
    pub u: Vec<DVector<f64>>,
    /// Unit segment directions `n_j`.
    pub directions: Vec<DVector<f64>>,
    /// Positive kernel `λ'` of the direction matrix (minimum entry 1).
    pub lambda: DVector<f64>,
    pub placement: PlacementLp,
    pub solution: PlacementSolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateResult {
    pub tuple: FacetTuple,
    pub stage: Stage,
    pub trajectory: Option<Trajectory>,
    pub certificate: Option<Certificate>,
    pub rejection_detail: String,
}

impl CandidateResult {
    fn reject(tuple: &FacetTuple, stage: Stage, detail: impl Into<String>) -> Self {
        Self {
            tuple: tuple.clone(),
            stage,
            trajectory: None,
            certificate: None,
            rejection_detail: detail.into(),
        }
    }
}

fn columns(vs: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(vs[0].len(), vs.len(), |r, c| vs[c][r])
}

/// Run the per-tuple pipeline: rank of the facet normals, positive closing
/// combination, direction problem, rank and positive kernel of the
/// directions, placement LP.
pub fn evaluate_tuple(
    polytope: &Polytope,
    tuple: &FacetTuple,
    tol: &ToleranceProfile,
    scope: ClearanceScope,
) -> CandidateResult {
    let t = tuple.indices();
    let m = t.len();
    let n = polytope.dim();
    if m < 2 || t.iter().any(|&i| i >= polytope.facet_count()) {
        return CandidateResult::reject(
            tuple,
            Stage::RankU,
            "tuple does not index facets of the polytope",
        );
    }
    let u: Vec<DVector<f64>> = (0..m)
        .map(|j| polytope.facets()[t[(j + 1) % m]].normal.clone())
        .collect();

    match matrix_rank(&columns(&u), tol) {
        Ok(r) if r + 1 == m => {}
        Ok(r) => {
            return CandidateResult::reject(
                tuple,
                Stage::RankU,
                format!("rank {r}, need {}", m - 1),
            )
        }
        Err(e) => return CandidateResult::reject(tuple, Stage::RankU, e.to_string()),
    }

    let mu = match positive_kernel(&columns(&u), tol) {
        Ok(KernelOutcome::Positive(mu)) => mu,
        Ok(KernelOutcome::Rejected(why)) => {
            return CandidateResult::reject(tuple, Stage::KernelMu, why)
        }
        Err(e) => return CandidateResult::reject(tuple, Stage::KernelMu, e.to_string()),
    };
    let neg_u: Vec<DVector<f64>> = u.iter().map(|x| -x).collect();
    if let Err(e) = build_closed_line(&neg_u, mu.as_slice(), tol) {
        return CandidateResult::reject(tuple, Stage::KernelMu, e.to_string());
    }

    // Direction problem: n_j = P_j n_1 with P_j = R_{j−1}⋯R_1, so that
    // μ_j = ⟨2P_jᵀu_j, n_1⟩ and closure reads (P_{m+1} − I) n_1 = 0.
    let mut prod = DMatrix::identity(n, n);
    let mut a = Vec::with_capacity(m);
    for uj in &u {
        a.push(prod.transpose() * uj * 2.0);
        prod = reflection(uj) * prod;
    }
    let objective = a.iter().fold(DVector::zeros(n), |acc, x| acc + x);
    let problem = ConeBallProblem {
        objective,
        ineq_normals: a,
        eq_matrix: prod - DMatrix::identity(n, n),
    };
    let n1 = match max_linear_over_cone_ball(&problem, tol) {
        Ok(ConeBallOutcome::Optimal { x, .. }) => x,
        Ok(ConeBallOutcome::Degenerate { value }) => {
            return CandidateResult::reject(
                tuple,
                Stage::Socp,
                format!("degenerate optimum {value:.3e}"),
            )
        }
        Err(e) => return CandidateResult::reject(tuple, Stage::Socp, e.to_string()),
    };
    let (directions, mus, closure) = propagate_normals(&n1, &u);
    let mu_max = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if mu_max <= 0.0 || mus.iter().any(|&x| x <= tol.positivity * mu_max) {
        return CandidateResult::reject(
            tuple,
            Stage::Socp,
            "reflection multipliers not strictly positive",
        );
    }
    if closure > tol.feas {
        return CandidateResult::reject(
            tuple,
            Stage::Socp,
            format!("directions do not close ({closure:.3e})"),
        );
    }

    let dir_matrix = columns(&directions);
    match matrix_rank(&dir_matrix, tol) {
        Ok(r) if r + 1 == m => {}
        Ok(r) => {
            return CandidateResult::reject(
                tuple,
                Stage::RankN,
                format!("rank {r}, need {}", m - 1),
            )
        }
        Err(e) => return CandidateResult::reject(tuple, Stage::RankN, e.to_string()),
    }
    let lambda = match positive_kernel(&dir_matrix, tol) {
        Ok(KernelOutcome::Positive(l)) => l,
        Ok(KernelOutcome::Rejected(why)) => {
            return CandidateResult::reject(tuple, Stage::KernelLambda, why)
        }
        Err(e) => return CandidateResult::reject(tuple, Stage::KernelLambda, e.to_string()),
    };
    let xi = match build_closed_line(&directions, lambda.as_slice(), tol) {
        Ok(xi) => xi,
        Err(e) => return CandidateResult::reject(tuple, Stage::KernelLambda, e.to_string()),
    };

    let placement = PlacementLp {
        xi,
        on_facet: t.to_vec(),
        halfspaces: polytope.halfspaces(),
        scope,
    };
    let solution = match placement.solve(tol) {
        Ok(s) => s,
        Err(Error::Infeasible(why)) => {
            return CandidateResult::reject(tuple, Stage::LpInfeasible, why)
        }
        Err(e) => return CandidateResult::reject(tuple, Stage::LpInfeasible, e.to_string()),
    };
    if solution.rho <= polytope.length_tol(tol) {
        return CandidateResult::reject(
            tuple,
            Stage::LpNonregular,
            format!("clearance {:.3e}", solution.rho),
        );
    }
    let points = placement.points(&solution);
    let trajectory = match Trajectory::from_points(polytope, points, tol) {
        Ok(tr) if tr.regular => tr,
        Ok(_) => {
            return CandidateResult::reject(
                tuple,
                Stage::LpNonregular,
                "placed points are not regular",
            )
        }
        Err(e) => return CandidateResult::reject(tuple, Stage::LpNonregular, e.to_string()),
    };
    CandidateResult {
        tuple: tuple.clone(),
        stage: Stage::Accepted,
        trajectory: Some(trajectory),
        certificate: Some(Certificate {
            u,
            directions,
            lambda,
            placement,
            solution,
        }),
        rejection_detail: String::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    /// Largest bounce count considered; defaults to `n + 1`.
    pub max_bounces: Option<usize>,
    pub tol: ToleranceProfile,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    pub scope: ClearanceScope,
    /// Keep every accepted candidate in the report.
    pub keep_accepted: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_bounces: None,
            tol: ToleranceProfile::default(),
            workers: None,
            scope: ClearanceScope::AllFacets,
            keep_accepted: false,
        }
    }
}

/// Best trajectory for one bounce count.
///
/// Regular entries come from the tuple pipeline and carry their tuple. For
/// two bounces, non-regular double normals from a facet to a farthest vertex
/// also compete (see [`vertex_facet_double_normals`]); those have no tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct BounceBest {
    pub length: f64,
    pub tuple: Option<FacetTuple>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub best: Option<Trajectory>,
    pub best_tuple: Option<FacetTuple>,
    pub per_m_best: BTreeMap<usize, BounceBest>,
    pub per_m_tuples: BTreeMap<usize, u64>,
    pub per_m_elapsed: BTreeMap<usize, f64>,
    pub stage_counts: BTreeMap<Stage, u64>,
    pub tuples_examined: u64,
    pub elapsed: f64,
    pub accepted: Vec<CandidateResult>,
    pub warnings: Vec<String>,
}

/// Tie-aware comparison: `a` beats `b` if it is shorter by more than the
/// tie window, or tied and (fewer bounces, smaller tuple).
fn beats(a: (f64, &FacetTuple), b: (f64, &FacetTuple), window: f64) -> bool {
    if (a.0 - b.0).abs() > window {
        a.0 < b.0
    } else {
        (a.1.len(), a.1) < (b.1.len(), b.1)
    }
}

fn check_accepted(
    polytope: &Polytope,
    mut c: CandidateResult,
    tol: &ToleranceProfile,
) -> CandidateResult {
    if let Some(tr) = &c.trajectory {
        let outcome = verify_billiard(polytope, &tr.points, tol);
        let failure = match outcome {
            Ok(r) if r.valid_billiard && r.in_ft => None,
            Ok(r) => Some(format!("verifier rejected: {}", r.notes.join("; "))),
            Err(e) => Some(e.to_string()),
        };
        if let Some(why) = failure {
            c.stage = Stage::VerifyFailed;
            c.trajectory = None;
            c.certificate = None;
            c.rejection_detail = why;
        }
    }
    c
}

/// Double normals joining a facet to a vertex farthest from it: for facet
/// `i` and each vertex `v` minimizing `⟨u_i, v⟩`, the perpendicular chord
/// from `v` to the facet hyperplane, kept when its foot lies on the facet and
/// the two-point line passes [`verify_billiard`]. Ordered by facet, then
/// vertex index.
pub fn vertex_facet_double_normals(
    polytope: &Polytope,
    tol: &ToleranceProfile,
) -> Result<Vec<Trajectory>> {
    let lt = polytope.length_tol(tol);
    let mut out = Vec::new();
    for (i, f) in polytope.facets().iter().enumerate() {
        let heights: Vec<f64> = polytope.vertices().iter().map(|v| f.slack(v)).collect();
        let width = heights.iter().copied().fold(0.0, f64::max);
        for (v, h) in polytope.vertices().iter().zip(&heights) {
            if *h < width - lt {
                continue;
            }
            let foot = v + &f.normal * width;
            if !polytope.active_facets(&foot, tol).contains(&i) {
                continue;
            }
            let Ok(tr) = Trajectory::from_points(polytope, vec![foot, v.clone()], tol) else {
                continue;
            };
            if verify_billiard(polytope, &tr.points, tol)?.valid_billiard {
                out.push(tr);
            }
        }
    }
    Ok(out)
}

/// Evaluate every canonical tuple with `2 ≤ m ≤ min(n + 1, max_bounces, f)`
/// and return the shortest accepted trajectory. The result does not depend
/// on the number of workers.
pub fn search_min(polytope: &Polytope, opts: &SearchOptions) -> Result<SearchReport> {
    opts.tol.validate()?;
    let start = Instant::now();
    let n = polytope.dim();
    let f = polytope.facet_count();
    let m_max = (n + 1).min(opts.max_bounces.unwrap_or(n + 1)).min(f);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::numerical(format!("thread pool: {e}")))?;
    let tol = &opts.tol;
    let window = TIE_REL * polytope.diameter();

    let mut report = SearchReport {
        best: None,
        best_tuple: None,
        per_m_best: BTreeMap::new(),
        per_m_tuples: BTreeMap::new(),
        per_m_elapsed: BTreeMap::new(),
        stage_counts: BTreeMap::new(),
        tuples_examined: 0,
        elapsed: 0.0,
        accepted: Vec::new(),
        warnings: Vec::new(),
    };
    let mut best: Option<(f64, FacetTuple, Trajectory)> = None;
    for m in 2..=m_max {
        let m_start = Instant::now();
        let mut count = 0u64;
        let mut m_best: Option<BounceBest> = None;
        let mut tuples = enumerate_facet_tuples(f, m).peekable();
        while tuples.peek().is_some() {
            let chunk: Vec<FacetTuple> = tuples.by_ref().take(CHUNK).collect();
            let results: Vec<CandidateResult> = pool.install(|| {
                chunk
                    .par_iter()
                    .map(|t| {
                        check_accepted(polytope, evaluate_tuple(polytope, t, tol, opts.scope), tol)
                    })
                    .collect()
            });
            for r in results {
                count += 1;
                *report.stage_counts.entry(r.stage).or_insert(0) += 1;
                let Some(tr) = &r.trajectory else { continue };
                let len = tr.length;
                if m_best.as_ref().is_none_or(|b| {
                    b.tuple
                        .as_ref()
                        .is_some_and(|bt| beats((len, &r.tuple), (b.length, bt), window))
                }) {
                    m_best = Some(BounceBest {
                        length: len,
                        tuple: Some(r.tuple.clone()),
                        trajectory: tr.clone(),
                    });
                }
                if best
                    .as_ref()
                    .is_none_or(|b| beats((len, &r.tuple), (b.0, &b.1), window))
                {
                    best = Some((len, r.tuple.clone(), tr.clone()));
                }
                if opts.keep_accepted {
                    report.accepted.push(r);
                }
            }
        }
        report.tuples_examined += count;
        report.per_m_tuples.insert(m, count);
        if m == 2 {
            for tr in vertex_facet_double_normals(polytope, tol)? {
                // A regular double normal wins ties.
                if m_best
                    .as_ref()
                    .is_none_or(|b| tr.length < b.length - window)
                {
                    m_best = Some(BounceBest {
                        length: tr.length,
                        tuple: None,
                        trajectory: tr,
                    });
                }
            }
        }
        report
            .per_m_elapsed
            .insert(m, m_start.elapsed().as_secs_f64());
        if let Some(b) = m_best {
            report.per_m_best.insert(m, b);
        }
    }

    if let Some(k) = report.stage_counts.get(&Stage::VerifyFailed) {
        report.warnings.push(format!(
            "{k} pipeline candidates failed independent verification"
        ));
    }
    match &best {
        None => report.warnings.push(
            "no closed regular billiard trajectory exists; every length minimizer is non-regular".into(),
        ),
        Some((_, _, tr)) if tr.bounces() <= n => report.warnings.push(format!(
            "best regular trajectory has {} < n + 1 bounces; a non-regular trajectory of the same length exists \
             and non-regular trajectories may be shorter",
            tr.bounces()
        )),
        Some(_) => {}
    }
    if let Some((_, tuple, tr)) = best {
        report.best = Some(tr);
        report.best_tuple = Some(tuple);
    }
    report.elapsed = start.elapsed().as_secs_f64();
    Ok(report)
}
