//! Acceptance checks, one line per criterion. Exits nonzero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use billiards_cli::{execute, Cli, EXIT_OK};
use billiards_core::fixtures::{
    brute_force_min_2d, random_polytope, random_polytope_with_facets, regular_simplex,
};
use billiards_core::geometry::Polytope;
use billiards_core::numerics::{project_polyhedral_cone, reflection, solve_lp, LinearProgram};
use billiards_core::search::{enumerate_facet_tuples, search_min, SearchOptions};
use billiards_core::verify::{check_minimality_conditions, is_regular};
use billiards_core::ToleranceProfile;
use clap::Parser;
use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn tol() -> ToleranceProfile {
    ToleranceProfile::default()
}

/// Run the CLI in-process and parse its JSON document.
fn cli(args: &[&str]) -> std::result::Result<(i32, Value), String> {
    let cli = Cli::try_parse_from(std::iter::once("billiards").chain(args.iter().copied()))
        .map_err(|e| e.to_string())?;
    let out = execute(&cli).map_err(|e| e.message)?;
    let v = serde_json::from_str(&out.body).map_err(|e| e.to_string())?;
    Ok((out.code, v))
}

fn num(v: &Value) -> std::result::Result<f64, String> {
    v.as_f64()
        .ok_or_else(|| format!("expected a number, got {v}"))
}

fn example_a_golden() -> Check {
    let (code, v) = cli(&["solve", "--fixture", "example_a"])?;
    ensure!(code == EXIT_OK, "exit code {code}");
    let length = num(&v["length"])?;
    ensure!((length - 1.0).abs() <= 1e-9, "length {length}");
    ensure!(v["bounces"] == 2, "bounces {}", v["bounces"]);
    let points = v["best"]["points"].as_array().ok_or("no points")?;
    let mut ys = Vec::new();
    for p in points {
        let y = num(&p[1])?;
        ensure!(
            y.abs() <= 1e-9 || (y + 0.5).abs() <= 1e-9,
            "bounce point y = {y}"
        );
        ys.push(y);
    }
    Ok(format!("length {length:.12}, y = {ys:?}"))
}

fn fagnano_golden() -> Check {
    let (_, v) = cli(&["solve", "--fixture", "equilateral_triangle"])?;
    let length = num(&v["length"])?;
    ensure!((length - 1.5).abs() <= 1e-9, "length {length}");
    ensure!(v["bounces"] == 3, "bounces {}", v["bounces"]);
    let two = num(&v["per_m"]["2"]["length"])?;
    ensure!((two - 3f64.sqrt()).abs() <= 1e-9, "per_m[2] = {two}");
    Ok(format!("length {length:.12}, per_m[2] {two:.12}"))
}

fn example_e() -> Check {
    let (_, v) = cli(&["solve", "--fixture", "example_e(0.05)"])?;
    let length = num(&v["length"])?;
    ensure!((length - 1.5).abs() <= 1e-6, "length {length}");
    ensure!(v["bounces"] == 3, "bounces {}", v["bounces"]);
    let (code, r) = cli(&["verify", "--fixture", "example_e(0.05)", "--reference", "2"])?;
    ensure!(
        code == EXIT_OK && r["valid_billiard"] == true,
        "p^2 did not verify"
    );
    ensure!(r["regular"] == false, "p^2 reported regular");
    Ok(format!("length {length:.12}; p^2 valid, non-regular"))
}

fn example_f() -> Check {
    let (code, r) = cli(&["verify", "--fixture", "example_f(0.05)"])?;
    ensure!(
        code == EXIT_OK && r["valid_billiard"] == true,
        "reference did not verify"
    );
    let length = num(&r["length"])?;
    ensure!((length - 1.5).abs() <= 1e-9, "reference length {length}");
    ensure!(r["regular"] == false, "reference reported regular");
    let (_, v) = cli(&["solve", "--fixture", "example_f(0.05)"])?;
    let best = num(&v["length"])?;
    ensure!(best > 1.5 + 1e-6, "best regular length {best}");
    Ok(format!(
        "reference {length:.12} non-regular; best regular {best:.9}"
    ))
}

/// Independent oracle: for each ordered facet 4-tuple, minimize the
/// perimeter with every point a convex combination of its facet's vertices
/// (a convex problem), by random perturbation with an adaptive step from
/// several random starts. Only minima whose points keep clear of all other
/// facets count, since boundary minima are not regular trajectories.
fn perimeter_oracle(p: &Polytope, m: usize, restarts: usize, seed: u64) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perimeter = |pts: &[DVector<f64>]| -> f64 {
        (0..pts.len())
            .map(|j| (&pts[(j + 1) % pts.len()] - &pts[j]).norm())
            .sum()
    };
    let mut best: Option<f64> = None;
    for tuple in enumerate_facet_tuples(p.facet_count(), m) {
        let t = tuple.indices();
        let verts: Vec<Vec<DVector<f64>>> = t
            .iter()
            .map(|&i| {
                p.incidence()[i]
                    .iter()
                    .map(|&k| p.vertices()[k].clone())
                    .collect()
            })
            .collect();
        let place = |w: &[Vec<f64>]| -> Vec<DVector<f64>> {
            (0..m)
                .map(|j| {
                    verts[j]
                        .iter()
                        .zip(&w[j])
                        .fold(DVector::zeros(p.dim()), |a, (v, x)| a + v * *x)
                })
                .collect()
        };
        let mut tuple_best: Option<(f64, Vec<DVector<f64>>)> = None;
        for _ in 0..restarts {
            let mut w: Vec<Vec<f64>> = verts
                .iter()
                .map(|vs| {
                    let r: Vec<f64> = vs.iter().map(|_| rng.random_range(0.05..1.0)).collect();
                    let s: f64 = r.iter().sum();
                    r.into_iter().map(|x| x / s).collect()
                })
                .collect();
            let mut cur = perimeter(&place(&w));
            let (mut step, mut tries, mut wins) = (0.3, 0, 0);
            while step > 1e-12 {
                let j = rng.random_range(0..m);
                let mut cand = w.clone();
                for x in cand[j].iter_mut() {
                    *x = (*x + step * rng.sample::<f64, _>(StandardNormal)).max(0.0);
                }
                let s: f64 = cand[j].iter().sum();
                if s > 0.0 {
                    cand[j].iter_mut().for_each(|x| *x /= s);
                    let val = perimeter(&place(&cand));
                    if val < cur {
                        cur = val;
                        w = cand;
                        wins += 1;
                    }
                }
                tries += 1;
                if tries == 60 {
                    step *= if wins < 6 { 0.6 } else { 1.3 };
                    tries = 0;
                    wins = 0;
                }
            }
            if tuple_best.as_ref().is_none_or(|b| cur < b.0) {
                tuple_best = Some((cur, place(&w)));
            }
        }
        let (len, pts) = tuple_best.expect("at least one restart");
        let margin = 1e-6 * p.diameter();
        let interior = pts.iter().zip(t).all(|(x, &own)| {
            p.facets()
                .iter()
                .enumerate()
                .all(|(i, f)| i == own || f.slack(x) > margin)
        });
        if interior && best.is_none_or(|b| len < b) {
            best = Some(len);
        }
    }
    best
}

fn simplices() -> Check {
    let t = tol();
    let mut detail = Vec::new();
    for n in [2, 3] {
        let s = regular_simplex(n).map_err(|e| e.to_string())?;
        ensure!(s.is_acute(&t).0, "simplex in R^{n} not acute");
        let best = search_min(&s, &SearchOptions::default())
            .map_err(|e| e.to_string())?
            .best
            .ok_or("no trajectory")?;
        ensure!(best.bounces() == n + 1, "R^{n}: {} bounces", best.bounces());
        ensure!(
            is_regular(&s, &best.points, &t).map_err(|e| e.to_string())?,
            "R^{n}: not regular"
        );
        detail.push(format!("R^{n} {:.12}", best.length));
        if n == 3 {
            let oracle =
                perimeter_oracle(&s, 4, 10, 1).ok_or("oracle found no interior minimum")?;
            ensure!(
                (best.length - oracle).abs() <= 1e-5,
                "oracle {oracle} vs search {}",
                best.length
            );
            detail.push(format!("oracle {oracle:.9}"));
        }
    }
    Ok(detail.join(", "))
}

/// Seeded random polytopes with a closed regular billiard trajectory: the
/// first `per_dim[k]` hits in dimension `k + 2`, scanning seeds upward.
fn polytopes_with_trajectories(per_dim: [usize; 3]) -> Vec<(Polytope, billiards_core::Trajectory)> {
    let mut out = Vec::new();
    for (k, &want) in per_dim.iter().enumerate() {
        let dim = k + 2;
        let points = [8, 8, 6][k];
        let mut found = 0;
        for seed in 0..400u64 {
            if found == want {
                break;
            }
            let p = random_polytope(dim, points, seed).expect("random polytope");
            if let Some(best) = search_min(&p, &SearchOptions::default())
                .expect("search")
                .best
            {
                out.push((p, best));
                found += 1;
            }
        }
    }
    out
}

fn theorem1_property() -> Check {
    let t = tol();
    let set = polytopes_with_trajectories([7, 7, 6]);
    ensure!(
        set.len() == 20,
        "only {} polytopes with trajectories",
        set.len()
    );
    for (p, best) in &set {
        let mc = check_minimality_conditions(p, &best.points, &t).map_err(|e| e.to_string())?;
        ensure!(mc.dim_v_ok && mc.cone_dim_ok, "{:?}: {mc:?}", p.name());
        let moved = p
            .can_translate_into_interior(&best.points, &t)
            .map_err(|e| e.to_string())?;
        ensure!(
            !moved.movable,
            "{:?}: movable by depth {}",
            p.name(),
            moved.depth
        );
    }
    let names: Vec<&str> = set.iter().filter_map(|(p, _)| p.name()).collect();
    Ok(format!("20 polytopes ({})", names.join(" ")))
}

fn oracle_equivalence() -> Check {
    let mut compared = 0;
    let mut scanned = 0;
    let mut seed = 0u64;
    while compared < 20 {
        ensure!(
            scanned < 200,
            "only {compared} polygons with trajectories after {scanned}"
        );
        let facets = 5 + (scanned % 8);
        let sized = random_polytope_with_facets(2, facets, seed, 120).map_err(|e| e.to_string())?;
        seed = sized.seed + 1;
        scanned += 1;
        let p = sized.polytope;
        let s = search_min(&p, &SearchOptions::default())
            .map_err(|e| e.to_string())?
            .best
            .map(|b| b.length);
        let o = brute_force_min_2d(&p, 3)
            .map_err(|e| e.to_string())?
            .map(|o| o.length);
        match (s, o) {
            (Some(s), Some(o)) => {
                ensure!(
                    (s - o).abs() <= 1e-6 * o,
                    "{:?}: search {s} vs oracle {o}",
                    p.name()
                );
                compared += 1;
            }
            (None, None) => {}
            other => return Err(format!("{:?}: search/oracle {other:?}", p.name())),
        }
    }
    Ok(format!(
        "{compared} polygons agree ({scanned} scanned, the rest agree on having none)"
    ))
}

fn same_length() -> Check {
    let t = tol();
    let set = polytopes_with_trajectories([0, 10, 0]);
    ensure!(
        set.len() == 10,
        "only {} 3-D polytopes with trajectories",
        set.len()
    );
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut tuples, mut solutions, mut worst) = (0, 0, 0.0f64);
    for (p, _) in &set {
        let opts = SearchOptions {
            keep_accepted: true,
            ..SearchOptions::default()
        };
        let r = search_min(p, &opts).map_err(|e| e.to_string())?;
        for c in &r.accepted {
            let cert = c
                .certificate
                .as_ref()
                .ok_or("accepted without certificate")?;
            let length = c
                .trajectory
                .as_ref()
                .ok_or("accepted without trajectory")?
                .length;
            tuples += 1;
            for _ in 0..20 {
                let obj: Vec<f64> = (0..p.dim() + 2)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                // solutions with λ = 0 are reported as errors and skipped
                let Ok(sol) = cert.placement.solve_with_objective(&obj, &t) else {
                    continue;
                };
                let pts = cert.placement.points(&sol);
                let alt: f64 = (0..pts.len())
                    .map(|j| (&pts[(j + 1) % pts.len()] - &pts[j]).norm())
                    .sum();
                worst = worst.max((alt - length).abs());
                solutions += 1;
            }
        }
    }
    ensure!(solutions > 0, "no alternative solution with positive scale");
    ensure!(worst <= 1e-8, "length spread {worst:.3e}");
    Ok(format!(
        "{tuples} tuples, {solutions} alternative solutions, max deviation {worst:.2e}"
    ))
}

fn enumeration_count() -> Check {
    let mut detail = Vec::new();
    for (n, f) in [(2, 10), (3, 14), (4, 11)] {
        let p = random_polytope_with_facets(n, f, 0, 120)
            .map_err(|e| e.to_string())?
            .polytope;
        let expected: u64 = (2..=n + 1)
            .map(|j| (0..j).fold(1u64, |a, k| a * (f - k) as u64) / j as u64)
            .sum();
        let started = Instant::now();
        let r = search_min(&p, &SearchOptions::default()).map_err(|e| e.to_string())?;
        ensure!(
            r.tuples_examined == expected,
            "(n={n}, f={f}): {} vs {expected}",
            r.tuples_examined
        );
        detail.push(format!(
            "({n},{f}) {expected} in {:.2}s",
            started.elapsed().as_secs_f64()
        ));
    }
    Ok(detail.join(", "))
}

fn lp_oracle(lp: &LinearProgram) -> f64 {
    let n = lp.objective.len();
    let mut ineq = lp.le_rows.clone();
    for j in (0..n).filter(|&j| !lp.free[j]) {
        let mut e = vec![0.0; n];
        e[j] = -1.0;
        ineq.push((e, 0.0));
    }
    let dot = |a: &[f64], x: &DVector<f64>| a.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>();
    let mut best = f64::NEG_INFINITY;
    for subset in (0..ineq.len()).combinations(n - lp.eq_rows.len()) {
        let rows: Vec<&(Vec<f64>, f64)> = lp
            .eq_rows
            .iter()
            .chain(subset.iter().map(|&i| &ineq[i]))
            .collect();
        let a = DMatrix::from_fn(n, n, |r, c| rows[r].0[c]);
        if a.determinant().abs() < 1e-10 {
            continue;
        }
        let Some(x) = a.lu().solve(&DVector::from_fn(n, |r, _| rows[r].1)) else {
            continue;
        };
        let feasible = ineq.iter().all(|(a, b)| dot(a, &x) <= b + 1e-9)
            && lp
                .eq_rows
                .iter()
                .all(|(a, b)| (dot(a, &x) - b).abs() <= 1e-9);
        if feasible {
            best = best.max(dot(&lp.objective, &x));
        }
    }
    best
}

fn numerics_suite() -> Check {
    let t = tol();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let gauss = |rng: &mut ChaCha8Rng, n: usize| {
        DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
    };

    let mut moreau = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..6);
        let m = rng.random_range(1..8);
        let normals: Vec<DVector<f64>> = (0..m).map(|_| gauss(&mut rng, n)).collect();
        let c = gauss(&mut rng, n);
        let proj = project_polyhedral_cone(&c, &normals, &DMatrix::identity(n, n), &t)
            .map_err(|e| e.to_string())?;
        let polar = &c - &proj;
        // c = Π_K(c) + Π_K°(c) with orthogonal parts, Π_K(c) ∈ K, and the
        // remainder a nonnegative combination of the −a_j
        moreau = moreau.max(proj.dot(&polar).abs());
        for a in &normals {
            moreau = moreau.max((-a.dot(&proj)).max(0.0));
        }
        let gens = DMatrix::from_fn(n, m, |r, k| -normals[k][r]);
        let w = billiards_core::numerics::nnls(&gens, &polar, 1000).map_err(|e| e.to_string())?;
        moreau = moreau.max((gens * w - &polar).norm());
    }
    ensure!(moreau <= 1e-9, "Moreau residual {moreau:.3e}");

    let mut refl = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..7);
        let u = gauss(&mut rng, n).normalize();
        let r = reflection(&u);
        let x = gauss(&mut rng, n);
        refl = refl
            .max((&r * &r - DMatrix::<f64>::identity(n, n)).amax())
            .max(((&r * &x).norm() - x.norm()).abs() / x.norm().max(1.0));
    }
    ensure!(refl <= 1e-12, "reflection defect {refl:.3e}");

    let mut gap = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let free: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        let x0: Vec<f64> = free
            .iter()
            .map(|&f| {
                if f {
                    rng.random_range(-2.0..2.0)
                } else {
                    rng.random_range(0.0..2.0)
                }
            })
            .collect();
        let mut lp = LinearProgram::new(
            (0..n).map(|_| rng.sample(StandardNormal)).collect(),
            free.clone(),
        );
        let row_through = |rng: &mut ChaCha8Rng| {
            let row: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let ax: f64 = row.iter().zip(&x0).map(|(a, b)| a * b).sum();
            (row, ax)
        };
        for _ in 0..rng.random_range(1..=6) {
            let (row, ax) = row_through(&mut rng);
            lp.add_le(row, ax + rng.random_range(0.0..1.0));
        }
        if rng.random_bool(0.3) {
            let (row, ax) = row_through(&mut rng);
            lp.add_eq(row, ax);
        }
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            lp.add_le(e.clone(), 5.0);
            if free[j] {
                e[j] = -1.0;
                lp.add_le(e, 5.0);
            }
        }
        let sol = solve_lp(&lp, &t).map_err(|e| e.to_string())?;
        let oracle = lp_oracle(&lp);
        gap = gap.max((sol.objective - oracle).abs() / (1.0 + oracle.abs()));
    }
    ensure!(gap <= 1e-9, "LP gap {gap:.3e}");
    Ok(format!(
        "Moreau {moreau:.1e}, reflections {refl:.1e}, LP gap {gap:.1e}"
    ))
}

fn dihedral_sum() -> Check {
    let s = regular_simplex(3).map_err(|e| e.to_string())?;
    let (acute, sum) = s.is_acute(&tol());
    let expected = 6.0 * (1.0f64 / 3.0).acos();
    ensure!(acute, "tetrahedron not acute");
    ensure!((sum - expected).abs() <= 1e-12, "sum {sum} vs {expected}");
    ensure!(
        sum > 2.0 * PI && sum < 3.0 * PI,
        "sum {sum} outside (2π, 3π)"
    );
    Ok(format!(
        "sum {sum:.12} in ({:.6}, {:.6})",
        2.0 * PI,
        3.0 * PI
    ))
}

fn determinism() -> Check {
    let dir = std::env::temp_dir().join(format!("billiards-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let random = dir.join("random.json");
    let p = random_polytope(3, 9, 18).map_err(|e| e.to_string())?;
    std::fs::write(&random, billiards_core::io::polytope_to_json(&p)).map_err(|e| e.to_string())?;
    let random = random.to_str().ok_or("temp path is not UTF-8")?.to_owned();
    let sources: [&[&str]; 4] = [
        &["--fixture", "example_e"],
        &["--fixture", "example_f"],
        &["--fixture", "regular_simplex(4)"],
        &["--input", random.as_str()],
    ];
    for src in sources {
        let mut bodies = Vec::new();
        for workers in ["1", "8"] {
            let mut args = vec!["solve"];
            args.extend_from_slice(src);
            args.extend(["--workers", workers]);
            let (_, mut v) = cli(&args)?;
            v.as_object_mut()
                .ok_or("report is not an object")?
                .remove("elapsed_s");
            bodies.push(serde_json::to_string_pretty(&v).map_err(|e| e.to_string())?);
        }
        ensure!(
            bodies[0] == bodies[1],
            "{src:?}: outputs differ between 1 and 8 workers"
        );
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok("4 inputs byte-identical with 1 and 8 workers".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 12] = [
        ("example A golden", example_a_golden),
        ("Fagnano golden", fagnano_golden),
        ("example E", example_e),
        ("example F", example_f),
        ("acute simplices", simplices),
        ("minimality conditions", theorem1_property),
        ("2-D oracle equivalence", oracle_equivalence),
        ("same length placements", same_length),
        ("enumeration count", enumeration_count),
        ("numerics suite", numerics_suite),
        ("dihedral angle sum", dihedral_sum),
        ("worker determinism", determinism),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", k + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
