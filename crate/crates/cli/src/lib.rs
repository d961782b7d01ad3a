//! Command-line front end: `solve`, `verify`, `inspect`, `gen` and `bench`.
//!
//! Every command produces a single document (JSON by default) on standard
//! output or `--output`, diagnostics on standard error, and an exit code:
//! 0 success, 1 input error, 2 no regular trajectory, 3 verification failed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use billiards_core::fixtures::{self, Fixture};
use billiards_core::geometry::{Polytope, Trajectory};
use billiards_core::io::{PolytopeJson, TrajectoryJson};
use billiards_core::search::{search_min, tuple_count, SearchOptions, SearchReport, Stage};
use billiards_core::verify::{verify_billiard, VerificationReport};
use billiards_core::{Error, ToleranceProfile};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_REGULAR: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "billiards",
    version,
    about = "Shortest closed billiard trajectories in convex polytopes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Find the shortest closed regular billiard trajectory.
    Solve(SolveArgs),
    /// Check a trajectory against the billiard reflection law.
    Verify(VerifyArgs),
    /// Describe a polytope: facets, dihedral angles, tuple counts.
    Inspect(InspectArgs),
    /// Generate a random polytope.
    Gen(GenArgs),
    /// Time the search over a grid of random polytopes.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
    Svg,
}

#[derive(Debug, Clone, Args)]
pub struct Source {
    /// Builtin fixture, e.g. `example_a`, `example_e(0.1)`, `regular_simplex(3)`.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub fixture: Option<String>,
    /// Polytope JSON file.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: Source,
    /// Largest bounce count to consider (default n + 1).
    #[arg(long)]
    pub max_bounces: Option<usize>,
    /// Feasibility tolerance (default 1e-9).
    #[arg(long)]
    pub tol_feas: Option<f64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: Source,
    /// Trajectory JSON, or a `solve` report whose `best` is checked.
    #[arg(long, conflicts_with = "reference")]
    pub trajectory: Option<PathBuf>,
    /// Index of a fixture reference trajectory (default 0).
    #[arg(long)]
    pub reference: Option<usize>,
    /// Feasibility tolerance (default 1e-9).
    #[arg(long)]
    pub tol_feas: Option<f64>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Clone, Args)]
pub struct InspectArgs {
    #[command(flatten)]
    pub source: Source,
    /// Feasibility tolerance (default 1e-9).
    #[arg(long)]
    pub tol_feas: Option<f64>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Ambient dimension.
    #[arg(long)]
    pub dim: usize,
    /// Number of random points whose convex hull is taken.
    #[arg(long)]
    pub points: usize,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the polytope JSON here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dim: Vec<usize>,
    /// Facet counts, comma separated; every (dim, facets) pair is run.
    #[arg(long, value_delimiter = ',', required = true)]
    pub facets: Vec<usize>,
    /// First seed tried when looking for a polytope of the requested size.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest point cloud tried when looking for a polytope.
    #[arg(long, default_value_t = 120)]
    pub max_points: usize,
    /// Largest bounce count to consider (default n + 1).
    #[arg(long)]
    pub max_bounces: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Feasibility tolerance (default 1e-9).
    #[arg(long)]
    pub tol_feas: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Result of a command: exit code, document and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub body: String,
    pub diagnostics: Vec<String>,
    pub output: Option<PathBuf>,
}

/// A failure before any document could be produced.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::PreconditionViolation(_) => EXIT_INPUT,
            Error::NumericalFailure(_) | Error::Infeasible(_) => EXIT_VERIFY_FAILED,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

fn tolerance(tol_feas: Option<f64>) -> Result<ToleranceProfile, CliError> {
    Ok(match tol_feas {
        Some(f) => ToleranceProfile::with_feas(f)?,
        None => ToleranceProfile::default(),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))
}

/// Polytope plus the fixture it came from, if any.
fn load(source: &Source, tol: &ToleranceProfile) -> Result<(Polytope, Option<Fixture>), CliError> {
    match (&source.fixture, &source.input) {
        (Some(name), _) => {
            let f = fixtures::builtin(name)?;
            Ok((f.polytope.clone(), Some(f)))
        }
        (None, Some(path)) => Ok((
            billiards_core::io::polytope_from_json(&read(path)?, tol)?,
            None,
        )),
        (None, None) => Err(input_error("one of --fixture or --input is required")),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

#[derive(Debug, Serialize)]
pub struct PerBounceJson {
    pub tuples: u64,
    pub length: Option<f64>,
    pub tuple: Option<Vec<usize>>,
    pub regular: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct SolveJson {
    pub polytope: Option<String>,
    pub best: Option<TrajectoryJson>,
    pub best_tuple: Option<Vec<usize>>,
    pub length: Option<f64>,
    pub bounces: Option<usize>,
    pub per_m: BTreeMap<usize, PerBounceJson>,
    pub stage_counts: BTreeMap<Stage, u64>,
    pub tuples_examined: u64,
    pub warnings: Vec<String>,
    pub elapsed_s: f64,
}

impl SolveJson {
    pub fn new(polytope: &Polytope, report: &SearchReport) -> Self {
        let per_m = report
            .per_m_tuples
            .iter()
            .map(|(&m, &tuples)| {
                let best = report.per_m_best.get(&m);
                let entry = PerBounceJson {
                    tuples,
                    length: best.map(|b| b.length),
                    tuple: best.and_then(|b| b.tuple.as_ref().map(|t| t.0.clone())),
                    regular: best.map(|b| b.trajectory.regular),
                };
                (m, entry)
            })
            .collect();
        Self {
            polytope: polytope.name().map(str::to_owned),
            best: report.best.as_ref().map(TrajectoryJson::from_trajectory),
            best_tuple: report.best_tuple.as_ref().map(|t| t.0.clone()),
            length: report.best.as_ref().map(|b| b.length),
            bounces: report.best.as_ref().map(Trajectory::bounces),
            per_m,
            stage_counts: report.stage_counts.clone(),
            tuples_examined: report.tuples_examined,
            warnings: report.warnings.clone(),
            elapsed_s: report.elapsed,
        }
    }
}

fn solve_text(p: &Polytope, r: &SearchReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "polytope: {} (dim {}, {} facets)",
        p.name().unwrap_or("-"),
        p.dim(),
        p.facet_count()
    );
    match &r.best {
        Some(b) => {
            let _ = writeln!(s, "best length: {:.12}", b.length);
            let _ = writeln!(s, "bounces: {}", b.bounces());
            if let Some(t) = &r.best_tuple {
                let _ = writeln!(s, "tuple: {t}");
            }
            for (j, pt) in b.points.iter().enumerate() {
                // rounding residue would otherwise print as -0.000000000
                let coords: Vec<String> = pt
                    .iter()
                    .map(|&x| format!("{:.9}", if x.abs() < 5e-10 { 0.0 } else { x }))
                    .collect();
                let _ = writeln!(s, "  p{} = ({})", j + 1, coords.join(", "));
            }
        }
        None => s.push_str("no closed regular billiard trajectory\n"),
    }
    for (m, count) in &r.per_m_tuples {
        let best = r
            .per_m_best
            .get(m)
            .map(|b| {
                format!(
                    "{:.12}{}",
                    b.length,
                    if b.trajectory.regular {
                        ""
                    } else {
                        " (non-regular)"
                    }
                )
            })
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(s, "m = {m}: {count} tuples, best {best}");
    }
    let stages: Vec<String> = r
        .stage_counts
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    let _ = writeln!(s, "stages: {}", stages.join(" "));
    let _ = writeln!(s, "tuples examined: {}", r.tuples_examined);
    for w in &r.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// SVG of a polygon and an optional closed trajectory. The bounding box is
/// mapped with a uniform scale into a 1000×1000 viewport, y pointing up.
pub fn svg(polygon: &Polytope, trajectory: Option<&[Vec<f64>]>) -> Result<String, CliError> {
    if polygon.dim() != 2 {
        return Err(input_error("SVG output is only available for polygons"));
    }
    let vs = polygon.vertices();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for v in vs {
        for k in 0..2 {
            lo[k] = lo[k].min(v[k]);
            hi[k] = hi[k].max(v[k]);
        }
    }
    let size = 1000.0;
    let margin = 50.0;
    let scale = (size - 2.0 * margin) / (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let ox = margin + ((size - 2.0 * margin) - (hi[0] - lo[0]) * scale) / 2.0;
    let oy = margin + ((size - 2.0 * margin) - (hi[1] - lo[1]) * scale) / 2.0;
    let map = |x: f64, y: f64| (ox + (x - lo[0]) * scale, size - (oy + (y - lo[1]) * scale));
    let cx = vs.iter().map(|v| v[0]).sum::<f64>() / vs.len() as f64;
    let cy = vs.iter().map(|v| v[1]).sum::<f64>() / vs.len() as f64;
    let mut order: Vec<usize> = (0..vs.len()).collect();
    order.sort_by(|&a, &b| {
        let ta = (vs[a][1] - cy).atan2(vs[a][0] - cx);
        let tb = (vs[b][1] - cy).atan2(vs[b][0] - cx);
        ta.total_cmp(&tb)
    });
    let outline: Vec<String> = order
        .iter()
        .map(|&i| {
            let (x, y) = map(vs[i][0], vs[i][1]);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"1000\" height=\"1000\" viewBox=\"0 0 1000 1000\">\n",
    );
    let _ = writeln!(
        s,
        "  <polygon points=\"{}\" fill=\"#f4f4f4\" stroke=\"#222222\" stroke-width=\"3\"/>",
        outline.join(" ")
    );
    if let Some(points) = trajectory {
        let path: Vec<String> = points
            .iter()
            .map(|p| {
                let (x, y) = map(p[0], p[1]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            "  <polygon points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>",
            path.join(" ")
        );
        for p in points {
            let (x, y) = map(p[0], p[1]);
            let _ = writeln!(
                s,
                "  <circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"6\" fill=\"#c0392b\"/>"
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn cmd_solve(args: &SolveArgs) -> Result<Outcome, CliError> {
    let tol = tolerance(args.tol_feas)?;
    let (polytope, _) = load(&args.source, &tol)?;
    let opts = SearchOptions {
        max_bounces: args.max_bounces,
        tol,
        workers: args.workers.map(|w| w as usize),
        ..SearchOptions::default()
    };
    if args.max_bounces.is_some_and(|m| m < 2) {
        return Err(input_error("--max-bounces must be at least 2"));
    }
    let report = search_min(&polytope, &opts)?;
    let body = match args.out.format {
        Format::Json => to_json(&SolveJson::new(&polytope, &report)),
        Format::Text => solve_text(&polytope, &report),
        Format::Svg => {
            let pts = report
                .best
                .as_ref()
                .map(|b| TrajectoryJson::from_trajectory(b).points);
            svg(&polytope, pts.as_deref())?
        }
    };
    Ok(Outcome {
        code: if report.best.is_some() {
            EXIT_OK
        } else {
            EXIT_NO_REGULAR
        },
        body,
        // the text report already lists its warnings
        diagnostics: match args.out.format {
            Format::Text => Vec::new(),
            _ => report
                .warnings
                .iter()
                .map(|w| format!("warning: {w}"))
                .collect(),
        },
        output: args.out.output.clone(),
    })
}

#[derive(Debug, Serialize)]
pub struct VerifyJson {
    pub polytope: Option<String>,
    #[serde(flatten)]
    pub report: VerificationReport,
    /// Disagreements between optional stored fields and recomputed values.
    pub mismatches: Vec<String>,
}

/// Trajectory document: either the trajectory schema itself or a `solve`
/// report, whose `best` field is used.
fn parse_trajectory(text: &str) -> Result<TrajectoryJson, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| input_error(format!("trajectory JSON: {e}")))?;
    let inner = match value.get("best") {
        Some(serde_json::Value::Null) => {
            return Err(input_error("solve report contains no trajectory"))
        }
        Some(best) => best.clone(),
        None => value,
    };
    serde_json::from_value(inner).map_err(|e| input_error(format!("trajectory JSON: {e}")))
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let tol = tolerance(args.tol_feas)?;
    let (polytope, fixture) = load(&args.source, &tol)?;
    let traj = match (&args.trajectory, &fixture) {
        (Some(path), _) => parse_trajectory(&read(path)?)?,
        (None, Some(f)) => {
            let k = args.reference.unwrap_or(0);
            let r = f.references.get(k).ok_or_else(|| {
                input_error(format!(
                    "fixture {} has no reference trajectory {k}",
                    f.name
                ))
            })?;
            TrajectoryJson {
                points: r
                    .points
                    .iter()
                    .map(|p| p.iter().copied().collect())
                    .collect(),
                length: Some(r.expected_length),
                regular: Some(r.expected_regular),
                facets: None,
            }
        }
        (None, None) => return Err(input_error("--trajectory is required with --input")),
    };
    let points = traj.points(polytope.dim())?;
    let report = verify_billiard(&polytope, &points, &tol)?;
    let facets: Vec<Vec<usize>> = report
        .per_point
        .iter()
        .map(|p| p.active_facets.clone())
        .collect();
    let mismatches = traj.mismatches(report.length, report.regular, &facets);
    let code = if report.valid_billiard {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    };
    let mut diagnostics: Vec<String> = mismatches.iter().map(|m| format!("warning: {m}")).collect();
    diagnostics.extend(report.notes.iter().map(|n| format!("note: {n}")));
    let body = match args.out.format {
        Format::Json => to_json(&VerifyJson {
            polytope: polytope.name().map(str::to_owned),
            report,
            mismatches,
        }),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "valid billiard: {}", report.valid_billiard);
            let _ = writeln!(s, "regular: {}", report.regular);
            let _ = writeln!(s, "in F(P): {}", report.in_ft);
            let th = report.theorem1_ok.map_or("-".to_owned(), |b| b.to_string());
            let _ = writeln!(s, "minimality conditions: {th}");
            let _ = writeln!(s, "length: {:.12}", report.length);
            for (j, p) in report.per_point.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "  p{}: facets {:?}, cone residual {:.3e}, segment {:.12}",
                    j + 1,
                    p.active_facets,
                    p.cone_residual,
                    p.segment_length
                );
            }
            for n in report.notes.iter().chain(&mismatches) {
                let _ = writeln!(s, "note: {n}");
            }
            s
        }
        Format::Svg => svg(&polytope, Some(&traj.points))?,
    };
    Ok(Outcome {
        code,
        body,
        diagnostics,
        output: args.out.output.clone(),
    })
}

#[derive(Debug, Serialize)]
pub struct DihedralJson {
    pub facets: [usize; 2],
    pub angle: f64,
}

#[derive(Debug, Serialize)]
pub struct InspectJson {
    pub name: Option<String>,
    pub dim: usize,
    pub facet_count: usize,
    pub vertex_count: usize,
    pub diameter: f64,
    pub acute: bool,
    pub dihedral_angle_sum: f64,
    pub dihedral_angles: Vec<DihedralJson>,
    pub interior_point: Vec<f64>,
    pub inradius: f64,
    /// Canonical facet tuples per bounce count.
    pub tuple_counts: BTreeMap<usize, u64>,
    pub polytope: PolytopeJson,
    pub incidence: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<TrajectoryJson>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn cmd_inspect(args: &InspectArgs) -> Result<Outcome, CliError> {
    let tol = tolerance(args.tol_feas)?;
    let (p, fixture) = load(&args.source, &tol)?;
    let (acute, sum) = p.is_acute(&tol);
    let (center, radius) = p.chebyshev_center(&tol)?;
    let f = p.facet_count();
    let info = InspectJson {
        name: p.name().map(str::to_owned),
        dim: p.dim(),
        facet_count: f,
        vertex_count: p.vertices().len(),
        diameter: p.diameter(),
        acute,
        dihedral_angle_sum: sum,
        dihedral_angles: p
            .dihedral_angles(&tol)
            .into_iter()
            .map(|(i, j, a)| DihedralJson {
                facets: [i, j],
                angle: a,
            })
            .collect(),
        interior_point: center.iter().copied().collect(),
        inradius: radius,
        tuple_counts: (2..=(p.dim() + 1).min(f))
            .map(|m| (m, tuple_count(f, m)))
            .collect(),
        polytope: PolytopeJson::from_polytope(&p),
        incidence: p.incidence().to_vec(),
        references: fixture
            .as_ref()
            .map(|fx| {
                fx.references
                    .iter()
                    .map(|r| TrajectoryJson {
                        points: r
                            .points
                            .iter()
                            .map(|x| x.iter().copied().collect())
                            .collect(),
                        length: Some(r.expected_length),
                        regular: Some(r.expected_regular),
                        facets: None,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        notes: fixture.map(|fx| fx.notes).unwrap_or_default(),
    };
    let body = match args.out.format {
        Format::Json => to_json(&info),
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(s, "polytope: {}", info.name.as_deref().unwrap_or("-"));
            let _ = writeln!(
                s,
                "dim {}, {} facets, {} vertices",
                info.dim, info.facet_count, info.vertex_count
            );
            let _ = writeln!(s, "diameter: {:.12}", info.diameter);
            let _ = writeln!(s, "inradius: {:.12}", info.inradius);
            let _ = writeln!(
                s,
                "acute: {} (dihedral angle sum {:.9})",
                info.acute, info.dihedral_angle_sum
            );
            for (m, c) in &info.tuple_counts {
                let _ = writeln!(s, "m = {m}: {c} tuples");
            }
            for n in &info.notes {
                let _ = writeln!(s, "note: {n}");
            }
            s
        }
        Format::Svg => {
            let refs = info.references.first().map(|r| r.points.clone());
            svg(&p, refs.as_deref())?
        }
    };
    Ok(Outcome {
        code: EXIT_OK,
        body,
        diagnostics: Vec::new(),
        output: args.out.output.clone(),
    })
}

pub fn cmd_gen(args: &GenArgs) -> Result<Outcome, CliError> {
    let p = fixtures::random_polytope(args.dim, args.points, args.seed)?;
    Ok(Outcome {
        code: EXIT_OK,
        body: to_json(&PolytopeJson::from_polytope(&p)),
        diagnostics: Vec::new(),
        output: args.output.clone(),
    })
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub facets: usize,
    pub dim: usize,
    pub points: usize,
    pub seed: u64,
    /// Seconds spent per bounce count (informational).
    pub elapsed_s: BTreeMap<usize, f64>,
    pub tuples: BTreeMap<usize, u64>,
    pub tuples_examined: u64,
    pub expected_tuples: u64,
    pub best_length: Option<f64>,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Outcome, CliError> {
    let tol = tolerance(args.tol_feas)?;
    if args.dim.is_empty() || args.facets.is_empty() {
        return Err(input_error(
            "bench needs at least one dimension and one facet count",
        ));
    }
    for &d in &args.dim {
        if !(2..=5).contains(&d) {
            return Err(input_error(format!("bench dimension {d} outside 2..=5")));
        }
        if let Some(&f) = args.facets.iter().find(|&&f| f < d + 1) {
            return Err(input_error(format!(
                "{f} facets is too few in dimension {d}"
            )));
        }
    }
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut code = EXIT_OK;
    for &dim in &args.dim {
        for &facets in &args.facets {
            let sized =
                fixtures::random_polytope_with_facets(dim, facets, args.seed, args.max_points)?;
            let opts = SearchOptions {
                max_bounces: args.max_bounces,
                tol,
                workers: args.workers.map(|w| w as usize),
                ..SearchOptions::default()
            };
            let report = search_min(&sized.polytope, &opts)?;
            let expected: u64 = report
                .per_m_tuples
                .keys()
                .map(|&m| tuple_count(facets, m))
                .sum();
            if expected != report.tuples_examined {
                code = EXIT_VERIFY_FAILED;
                diagnostics.push(format!(
                    "tuple count mismatch for dim {dim}, {facets} facets: {} examined, {expected} expected",
                    report.tuples_examined
                ));
            }
            rows.push(BenchRow {
                facets,
                dim,
                points: sized.points,
                seed: sized.seed,
                elapsed_s: report.per_m_elapsed.clone(),
                tuples: report.per_m_tuples.clone(),
                tuples_examined: report.tuples_examined,
                expected_tuples: expected,
                best_length: report.best.as_ref().map(|b| b.length),
            });
        }
    }
    let body = match args.format {
        Format::Json => to_json(&rows),
        Format::Text => {
            let mut s = String::from(
                "# facets | dim | time 2 bp. | time 3 bp. | time 4 bp. | time 5 bp. | tuples | expected | best length\n",
            );
            for r in &rows {
                let t = |m: usize| {
                    r.elapsed_s
                        .get(&m)
                        .map_or("-".to_owned(), |x| format!("{x:.5}"))
                };
                let best = r.best_length.map_or("-".to_owned(), |l| format!("{l:.9}"));
                let _ = writeln!(
                    s,
                    "{} | {} | {} | {} | {} | {} | {} | {} | {}",
                    r.facets,
                    r.dim,
                    t(2),
                    t(3),
                    t(4),
                    t(5),
                    r.tuples_examined,
                    r.expected_tuples,
                    best
                );
            }
            s
        }
        Format::Svg => return Err(input_error("bench supports json and text output")),
    };
    Ok(Outcome {
        code,
        body,
        diagnostics,
        output: args.output.clone(),
    })
}

/// Run a parsed command without touching the file system for output.
pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

/// Run a command and deliver its output; returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(out) => {
            for d in &out.diagnostics {
                eprintln!("{d}");
            }
            let written = match &out.output {
                Some(path) => std::fs::write(path, &out.body)
                    .map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => {
                    print!("{}", out.body);
                    Ok(())
                }
            };
            match written {
                Ok(()) => out.code,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_INPUT
                }
            }
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Parse arguments (help and version exit 0, usage errors exit 1) and run.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
