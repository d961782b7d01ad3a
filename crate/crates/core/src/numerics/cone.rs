use nalgebra::{DMatrix, DVector};

use super::linalg::null_space_above;
use super::ToleranceProfile;
use crate::error::{Error, Result};

/// Least-squares solve restricted to the columns in `active`, via SVD
/// (minimum-norm for rank-deficient column sets).
fn restricted_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, active: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(active);
    let dim = sub.nrows().max(sub.ncols()) as f64;
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-13 * smax.max(f64::MIN_POSITIVE) * dim;
    svd.solve(b, eps).expect("u and v_t were computed")
}

/// Nonnegative least squares `argmin_{x ≥ 0} ‖Ax − b‖` by the Lawson–Hanson
/// active-set method.
///
/// Fails with a numerical error when the iteration cap is exceeded.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> Result<DVector<f64>> {
    let (rows, k) = a.shape();
    if b.len() != rows {
        return Err(Error::invalid("nnls: dimension mismatch"));
    }
    let mut x = DVector::zeros(k);
    if k == 0 {
        return Ok(x);
    }
    let scale = (1.0 + a.norm()) * (1.0 + b.norm());
    let w_tol = 1e-14 * scale;
    let mut passive = vec![false; k];
    let mut iterations = 0usize;

    loop {
        let residual = b - a * &x;
        let w = a.transpose() * residual;
        let mut blocked = vec![false; k];
        let entering = loop {
            let cand = (0..k)
                .filter(|&j| !passive[j] && !blocked[j] && w[j] > w_tol)
                .max_by(|&i, &j| w[i].total_cmp(&w[j]).then(j.cmp(&i)));
            let Some(j) = cand else { break None };
            // Guard against round-off: the entering variable must come out
            // positive in the unconstrained solve.
            let mut trial: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            trial.push(j);
            trial.sort_unstable();
            let z = restricted_lstsq(a, b, &trial);
            let pos = trial.iter().position(|&i| i == j).unwrap();
            if z[pos] > 0.0 {
                break Some(j);
            }
            blocked[j] = true;
        };
        let Some(j) = entering else { return Ok(x) };
        passive[j] = true;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::numerical(format!(
                    "nnls exceeded {max_iter} iterations"
                )));
            }
            let set: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let z = restricted_lstsq(a, b, &set);
            if z.iter().all(|&v| v > 0.0) {
                for (pos, &i) in set.iter().enumerate() {
                    x[i] = z[pos];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (pos, &i) in set.iter().enumerate() {
                if z[pos] <= 0.0 {
                    let denom = x[i] - z[pos];
                    let step = if denom > 0.0 { x[i] / denom } else { 0.0 };
                    alpha = alpha.min(step);
                }
            }
            for (pos, &i) in set.iter().enumerate() {
                x[i] += alpha * (z[pos] - x[i]);
            }
            for &i in &set {
                if x[i] <= 1e-15 * (1.0 + x.amax()) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
}

/// Euclidean projection of `c` onto `K = {x ∈ span(basis) : ⟨a_j, x⟩ ≥ 0}`.
///
/// Solved in basis coordinates through the dual nonnegative least-squares
/// problem: with `A` the reduced constraint rows, `Π_K(c) = B(Bᵀc + Aᵀν)`
/// where `ν = argmin_{ν ≥ 0} ‖Aᵀν + Bᵀc‖`.
pub fn project_polyhedral_cone(
    c: &DVector<f64>,
    ineq_normals: &[DVector<f64>],
    basis: &DMatrix<f64>,
    tol: &ToleranceProfile,
) -> Result<DVector<f64>> {
    let n = c.len();
    if basis.nrows() != n || ineq_normals.iter().any(|a| a.len() != n) {
        return Err(Error::invalid(
            "project_polyhedral_cone: dimension mismatch",
        ));
    }
    let k = basis.ncols();
    if k == 0 {
        return Ok(DVector::zeros(n));
    }
    let reduced_c = basis.transpose() * c;
    let m = ineq_normals.len();
    if m == 0 {
        return Ok(basis * reduced_c);
    }
    // Columns of `at` are the reduced constraint normals Bᵀa_j.
    let at = DMatrix::from_fn(k, m, |r, j| basis.column(r).dot(&ineq_normals[j]));
    let cap = 100 * (n + m);
    let nu = nnls(&at, &(-&reduced_c), cap)?;
    let y = &reduced_c + &at * &nu;
    let x = basis * y;
    // KKT: primal feasibility of the projection.
    let scale = 1.0 + c.norm();
    for a in ineq_normals {
        let viol = -a.dot(&x) / a.norm().max(f64::MIN_POSITIVE);
        if viol > tol.feas * scale {
            return Err(Error::numerical(format!(
                "cone projection infeasible by {viol:.3e}"
            )));
        }
    }
    Ok(x)
}

/// `maximize ⟨c, x⟩ s.t. ‖x‖ ≤ 1, ⟨a_j, x⟩ ≥ 0, E x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeBallProblem {
    pub objective: DVector<f64>,
    pub ineq_normals: Vec<DVector<f64>>,
    pub eq_matrix: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeBallOutcome {
    /// Unit-norm maximizer and the optimal value.
    Optimal { x: DVector<f64>, value: f64 },
    /// Optimal value at most `feas`; no meaningful direction exists.
    Degenerate { value: f64 },
}

/// Solve a [`ConeBallProblem`] exactly: restrict to `ker E`, project the
/// objective onto the cone and normalize (the optimum over the unit ball of
/// a cone is `‖Π_K(c)‖`, attained at `Π_K(c)/‖Π_K(c)‖`).
pub fn max_linear_over_cone_ball(
    p: &ConeBallProblem,
    tol: &ToleranceProfile,
) -> Result<ConeBallOutcome> {
    let n = p.objective.len();
    if p.eq_matrix.ncols() != n || p.ineq_normals.iter().any(|a| a.len() != n) {
        return Err(Error::invalid(
            "cone-ball problem has inconsistent dimensions",
        ));
    }
    let basis = if p.eq_matrix.nrows() == 0 {
        DMatrix::identity(n, n)
    } else {
        // E is a difference of orthogonal matrices in the search, so its
        // entries live on unit scale even when it is numerically zero.
        null_space_above(&p.eq_matrix, tol, 1.0)?
    };
    let proj = project_polyhedral_cone(&p.objective, &p.ineq_normals, &basis, tol)?;
    let value = proj.norm();
    if value <= tol.feas {
        return Ok(ConeBallOutcome::Degenerate { value });
    }
    Ok(ConeBallOutcome::Optimal {
        x: proj / value,
        value,
    })
}
