//! Reference polytopes with known trajectories, random polytopes and a
//! brute-force planar oracle.

use itertools::Itertools;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Polytope;
use crate::io::{PolytopeJson, TrajectoryJson};
use crate::numerics::ToleranceProfile;
use crate::verify::verify_billiard;

/// Default tilt for the two families that need a small positive parameter.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Every builtin name; parameterized ones accept `name(value)` or
/// `name:value`.
pub const BUILTIN_NAMES: &[&str] = &[
    "example_a",
    "example_b",
    "example_c",
    "example_d_base",
    "example_e",
    "example_f",
    "unit_square",
    "equilateral_triangle",
    "regular_simplex",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub points: Vec<DVector<f64>>,
    pub expected_length: f64,
    pub expected_regular: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub name: String,
    pub polytope: Polytope,
    pub references: Vec<ReferenceTrajectory>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureJson {
    pub name: String,
    pub polytope: PolytopeJson,
    pub references: Vec<ReferenceJson>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceJson {
    #[serde(flatten)]
    pub trajectory: TrajectoryJson,
    pub note: String,
}

impl Fixture {
    pub fn to_json(&self) -> FixtureJson {
        FixtureJson {
            name: self.name.clone(),
            polytope: PolytopeJson::from_polytope(&self.polytope),
            references: self
                .references
                .iter()
                .map(|r| ReferenceJson {
                    trajectory: TrajectoryJson {
                        points: r
                            .points
                            .iter()
                            .map(|p| p.iter().copied().collect())
                            .collect(),
                        length: Some(r.expected_length),
                        regular: Some(r.expected_regular),
                        facets: None,
                    },
                    note: r.note.clone(),
                })
                .collect(),
            notes: self.notes.clone(),
        }
    }
}

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn reference(
    points: Vec<DVector<f64>>,
    expected_length: f64,
    expected_regular: bool,
    note: &str,
) -> ReferenceTrajectory {
    ReferenceTrajectory {
        points,
        expected_length,
        expected_regular,
        note: note.into(),
    }
}

fn hull(name: &str, points: &[DVector<f64>]) -> Result<Polytope> {
    Ok(Polytope::from_vertices(points, &ToleranceProfile::default())?.with_name(name))
}

/// Split `name(value)` / `name:value` into its parts.
fn parse_name(spec: &str) -> Result<(&str, Option<&str>)> {
    let spec = spec.trim();
    if let Some((name, rest)) = spec.split_once('(') {
        let arg = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::invalid(format!("unbalanced parentheses in {spec:?}")))?;
        return Ok((name.trim(), Some(arg.trim())));
    }
    if let Some((name, arg)) = spec.split_once(':') {
        return Ok((name.trim(), Some(arg.trim())));
    }
    Ok((spec, None))
}

fn epsilon(arg: Option<&str>) -> Result<f64> {
    let eps = match arg {
        None => DEFAULT_EPSILON,
        Some(a) => a
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("bad epsilon {a:?}")))?,
    };
    if !(eps > 0.0 && eps < 0.2) {
        return Err(Error::invalid(format!(
            "epsilon {eps} must lie in (0, 0.2)"
        )));
    }
    Ok(eps)
}

/// Build a named fixture, e.g. `"example_a"`, `"example_e(0.1)"`,
/// `"regular_simplex:3"`.
pub fn builtin(spec: &str) -> Result<Fixture> {
    let (name, arg) = parse_name(spec)?;
    if arg.is_some() && !matches!(name, "example_e" | "example_f" | "regular_simplex") {
        return Err(Error::invalid(format!("fixture {name} takes no parameter")));
    }
    let s3 = 3f64.sqrt();
    let mut notes = Vec::new();
    let (polytope, references) = match name {
        "example_a" => {
            let p = hull(
                name,
                &[
                    v(&[-0.5, 0.0, 0.0]),
                    v(&[0.5, 0.0, 0.0]),
                    v(&[0.0, 0.0, 1.0]),
                    v(&[-0.5, -0.5, 0.0]),
                    v(&[0.5, -0.5, 0.0]),
                    v(&[0.0, -0.5, 1.0]),
                ],
            )?;
            let r = reference(
                vec![v(&[0.0, 0.0, 0.75]), v(&[0.0, -0.5, 0.75])],
                1.0,
                true,
                "length minimizer; its section z = 3/4 has a shorter trajectory of length 1/2",
            );
            (p, vec![r])
        }
        "example_b" => {
            let p = hull(
                name,
                &[
                    v(&[0.0, 0.0, 0.0]),
                    v(&[4.0, 0.0, 0.0]),
                    v(&[0.0, -4.0, 0.0]),
                    v(&[3.2, -2.4, 0.0]),
                    v(&[0.0, 0.0, 8.0]),
                    v(&[0.0, -4.0, 8.0]),
                ],
            )?;
            notes.push(
                "the stated length 16/(5*sqrt(5)) does not match the listed points, which give 16/sqrt(5); \
                 the recomputed value is used"
                    .into(),
            );
            let r = reference(
                vec![v(&[0.0, 0.0, 4.0]), v(&[1.6, -3.2, 4.0])],
                16.0 / 5f64.sqrt(),
                false,
                "double normal through an edge point; length recomputed from the points",
            );
            (p, vec![r])
        }
        "example_c" | "example_d_base" => {
            let p = hull(
                name,
                &[
                    v(&[0.0, 0.0, 0.0]),
                    v(&[1.0, 0.0, 0.0]),
                    v(&[0.5, 0.0, s3 / 2.0]),
                    v(&[0.0, -2.0, 0.0]),
                    v(&[1.0, -2.0, 0.0]),
                ],
            )?;
            if name == "example_d_base" {
                notes.push(
                    "perturbation family: move the second point of example_c to (1/4 + d, -1, sqrt(3)/4), d > 0 small; \
                     the perturbed lines stay in F of the section but leave F of the polytope"
                        .into(),
                );
                (p, Vec::new())
            } else {
                let r = reference(
                    vec![
                        v(&[0.5, -1.0, 0.0]),
                        v(&[0.25, -1.0, s3 / 4.0]),
                        v(&[0.75, -1.0, s3 / 4.0]),
                    ],
                    1.5,
                    false,
                    "translated Fagnano triangle of the front face; two points lie on edges",
                );
                (p, vec![r])
            }
        }
        "example_e" => {
            let e = epsilon(arg)?;
            let d = e / s3;
            let p = hull(
                name,
                &[
                    v(&[0.0, 0.0, 0.0]),
                    v(&[-0.5, 0.0, s3 / 2.0]),
                    v(&[0.5, 0.0, s3 / 2.0]),
                    v(&[0.0, -2.0, 0.0]),
                    v(&[0.0, -2.0, s3 / 2.0]),
                    v(&[-0.5 + d, -2.0, s3 / 2.0 - e]),
                    v(&[0.5 - d, -2.0, s3 / 2.0 - e]),
                ],
            )?;
            let family = |a: f64| {
                vec![
                    v(&[-0.25, -a, s3 / 4.0]),
                    v(&[0.25, -a, s3 / 4.0]),
                    v(&[0.0, -a, s3 / 2.0]),
                ]
            };
            let refs = vec![
                reference(
                    family(0.0),
                    1.5,
                    false,
                    "a = 0: Fagnano triangle of the front face",
                ),
                reference(
                    family(1.0),
                    1.5,
                    true,
                    "a = 1: regular member of the minimizing family",
                ),
                reference(family(2.0), 1.5, false, "a = 2: third point is a vertex"),
            ];
            (p.with_name(format!("example_e({e})")), refs)
        }
        "example_f" => {
            let e = epsilon(arg)?;
            let d = e / s3;
            let p = hull(
                name,
                &[
                    v(&[0.0, 0.0, 0.0]),
                    v(&[-0.5 + d, 0.0, s3 / 2.0 - e]),
                    v(&[-0.5 + d, 0.0, s3 / 2.0]),
                    v(&[0.5 - d, 0.0, s3 / 2.0 - e]),
                    v(&[0.0, -2.0, 0.0]),
                    v(&[-0.5 + d, -2.0, s3 / 2.0 - e]),
                    v(&[0.5 - d, -2.0, s3 / 2.0 - e]),
                    v(&[0.5 - d, -2.0, s3 / 2.0]),
                ],
            )?;
            let r = reference(
                vec![
                    v(&[-0.25, -1.0, s3 / 4.0]),
                    v(&[0.25, -1.0, s3 / 4.0]),
                    v(&[0.0, -1.0, s3 / 2.0]),
                ],
                1.5,
                false,
                "unique length minimizer; the third point is interior to an edge",
            );
            (p.with_name(format!("example_f({e})")), vec![r])
        }
        "unit_square" => {
            let p = hull(
                name,
                &[
                    v(&[0.0, 0.0]),
                    v(&[1.0, 0.0]),
                    v(&[1.0, 1.0]),
                    v(&[0.0, 1.0]),
                ],
            )?;
            let r = reference(
                vec![v(&[0.5, 0.0]), v(&[0.5, 1.0])],
                2.0,
                true,
                "double normal across the width",
            );
            (p, vec![r])
        }
        "equilateral_triangle" => {
            let p = hull(name, &[v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.5, s3 / 2.0])])?;
            let r = reference(
                vec![v(&[0.5, 0.0]), v(&[0.75, s3 / 4.0]), v(&[0.25, s3 / 4.0])],
                1.5,
                true,
                "Fagnano triangle (edge midpoints)",
            );
            (p, vec![r])
        }
        "regular_simplex" => {
            let n = match arg {
                None => 3,
                Some(a) => a
                    .parse::<usize>()
                    .map_err(|_| Error::invalid(format!("bad dimension {a:?}")))?,
            };
            (regular_simplex(n)?, Vec::new())
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown fixture {other:?}; known: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    Ok(Fixture {
        name: polytope.name().unwrap_or(name).to_owned(),
        polytope,
        references,
        notes,
    })
}

/// Regular simplex with unit edge length in `R^n`: `e_1..e_n` together with
/// `((1 − √(n+1))/n)·(1,…,1)`, scaled by `1/√2`.
pub fn regular_simplex(n: usize) -> Result<Polytope> {
    if !(1..=8).contains(&n) {
        return Err(Error::invalid(format!(
            "regular_simplex dimension {n} outside 1..=8"
        )));
    }
    let k = 1.0 / 2f64.sqrt();
    let mut pts: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = k;
            e
        })
        .collect();
    let c = (1.0 - ((n + 1) as f64).sqrt()) / n as f64;
    pts.push(DVector::from_element(n, c * k));
    Ok(Polytope::from_vertices(&pts, &ToleranceProfile::default())?
        .with_name(format!("regular_simplex({n})")))
}

const RANDOM_RETRIES: u64 = 10;

/// Convex hull of `count` standard-normal vectors, each scaled by an
/// independent factor drawn uniformly from `[1, 3]`. A degenerate hull is
/// retried with the next seed.
pub fn random_polytope(dim: usize, count: usize, seed: u64) -> Result<Polytope> {
    if !(2..=5).contains(&dim) {
        return Err(Error::invalid(format!(
            "random_polytope dimension {dim} outside 2..=5"
        )));
    }
    if count < dim + 1 {
        return Err(Error::invalid(format!(
            "need at least {} points in dimension {dim}",
            dim + 1
        )));
    }
    let scale = Uniform::new_inclusive(1.0, 3.0).map_err(|e| Error::invalid(e.to_string()))?;
    let mut last = None;
    for attempt in 0..=RANDOM_RETRIES {
        let s = seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let pts: Vec<DVector<f64>> = (0..count)
            .map(|_| {
                let g = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let k: f64 = rng.sample(scale);
                g * k
            })
            .collect();
        match Polytope::from_vertices(&pts, &ToleranceProfile::default()) {
            Ok(p) => return Ok(p.with_name(format!("random({dim},{count},{s})"))),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::invalid("degenerate random hull")))
}

/// A random polytope with a prescribed facet count, with the generator
/// arguments that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SizedRandom {
    pub polytope: Polytope,
    pub points: usize,
    pub seed: u64,
}

/// Seeds tried per point count in [`random_polytope_with_facets`].
const SEEDS_PER_COUNT: u64 = 100;

/// First polytope from [`random_polytope`] with exactly `facets` facets,
/// scanning point counts upward from `dim + 1` and, for each count,
/// `SEEDS_PER_COUNT` consecutive seeds starting at `seed`. The scan stops
/// early once every sample at a count has more facets than requested.
pub fn random_polytope_with_facets(
    dim: usize,
    facets: usize,
    seed: u64,
    max_points: usize,
) -> Result<SizedRandom> {
    if facets < dim + 1 {
        return Err(Error::invalid(format!(
            "a {dim}-polytope has at least {} facets",
            dim + 1
        )));
    }
    // Random hulls are simplicial, and a simplicial 3-polytope has 2V − 4 facets.
    if dim == 3 && facets % 2 == 1 {
        return Err(Error::invalid(format!(
            "random 3-polytopes have an even facet count, not {facets}"
        )));
    }
    for points in dim + 1..=max_points {
        let mut fewest = usize::MAX;
        for k in 0..SEEDS_PER_COUNT {
            let s = seed.wrapping_add(k);
            let polytope = random_polytope(dim, points, s)?;
            if polytope.facet_count() == facets {
                return Ok(SizedRandom {
                    polytope,
                    points,
                    seed: s,
                });
            }
            fewest = fewest.min(polytope.facet_count());
        }
        if fewest > facets {
            break;
        }
    }
    Err(Error::invalid(format!(
        "no random {dim}-polytope with {facets} facets from at most {max_points} points"
    )))
}

/// Result of [`brute_force_min_2d`].
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub length: f64,
    pub points: Vec<DVector<f64>>,
    pub edges: Vec<usize>,
}

const GOLDEN_TOL: f64 = 1e-10;
const INTERIOR_MARGIN: f64 = 1e-6;

fn perimeter(pts: &[DVector<f64>]) -> f64 {
    (0..pts.len())
        .map(|j| (&pts[(j + 1) % pts.len()] - &pts[j]).norm())
        .sum()
}

fn golden_section(mut lo: f64, mut hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > GOLDEN_TOL {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    (lo + hi) / 2.0
}

/// Shortest closed billiard trajectory with at most `m_max ≤ 3` bounces in a
/// polygon whose bounce points lie in the open edges.
///
/// Each ordered edge tuple is handled by coordinate descent with exact
/// golden-section line searches on the edge parameters (the length is convex
/// in them). Minimizers with a parameter at an edge end, or that fail the
/// reflection law at a relaxed tolerance, are discarded. Single-threaded and
/// independent of the search pipeline.
pub fn brute_force_min_2d(polygon: &Polytope, m_max: usize) -> Result<Option<OracleResult>> {
    if polygon.dim() != 2 {
        return Err(Error::invalid("brute_force_min_2d needs a polygon"));
    }
    if !(2..=3).contains(&m_max) {
        return Err(Error::invalid("m_max must be 2 or 3"));
    }
    let edges: Vec<(DVector<f64>, DVector<f64>)> = polygon
        .incidence()
        .iter()
        .map(|inc| {
            (
                polygon.vertices()[inc[0]].clone(),
                polygon.vertices()[inc[1]].clone(),
            )
        })
        .collect();
    let relaxed = ToleranceProfile::with_feas(1e-6)?;
    let at = |e: usize, t: f64| &edges[e].0 + (&edges[e].1 - &edges[e].0) * t;
    let mut best: Option<OracleResult> = None;
    for m in 2..=m_max {
        for tuple in (0..edges.len()).permutations(m) {
            if tuple[0] != *tuple.iter().min().expect("nonempty") {
                continue;
            }
            let starts: [Vec<f64>; 3] = [
                vec![0.5; m],
                (0..m).map(|j| [0.3, 0.7][j % 2]).collect(),
                vec![0.25; m],
            ];
            let mut tuple_best: Option<(f64, Vec<f64>)> = None;
            for mut t in starts {
                let eval =
                    |t: &[f64]| perimeter(&(0..m).map(|j| at(tuple[j], t[j])).collect::<Vec<_>>());
                let mut value = eval(&t);
                for _ in 0..500 {
                    for k in 0..m {
                        let mut probe = t.clone();
                        t[k] = golden_section(0.0, 1.0, |x| {
                            probe[k] = x;
                            eval(&probe)
                        });
                    }
                    let next = eval(&t);
                    let done = value - next <= 1e-15 * value.max(1.0);
                    value = next;
                    if done {
                        break;
                    }
                }
                if tuple_best.as_ref().is_none_or(|(b, _)| value < *b) {
                    tuple_best = Some((value, t));
                }
            }
            let (value, t) = tuple_best.expect("at least one start");
            if t.iter()
                .any(|&x| x <= INTERIOR_MARGIN || x >= 1.0 - INTERIOR_MARGIN)
            {
                continue;
            }
            if best.as_ref().is_some_and(|b| b.length <= value) {
                continue;
            }
            let points: Vec<DVector<f64>> = (0..m).map(|j| at(tuple[j], t[j])).collect();
            let Ok(report) = verify_billiard(polygon, &points, &relaxed) else {
                continue;
            };
            if report.valid_billiard {
                best = Some(OracleResult {
                    length: value,
                    points,
                    edges: tuple,
                });
            }
        }
    }
    Ok(best)
}
