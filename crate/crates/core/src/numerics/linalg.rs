use nalgebra::{DMatrix, DVector};

use super::ToleranceProfile;
use crate::error::{Error, Result};

/// Householder reflection `I - 2uuᵀ` for a unit vector `u`.
pub fn reflection(u: &DVector<f64>) -> DMatrix<f64> {
    let n = u.len();
    DMatrix::identity(n, n) - 2.0 * u * u.transpose()
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid("matrix has non-finite entries"))
    }
}

/// Full SVD of `m` padded with zero rows so that right singular vectors
/// span all of `R^cols`. Singular values are sorted in decreasing order and
/// the returned `v` has the matching right singular vectors as columns.
fn full_right_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let padded = if rows >= cols {
        m.clone()
    } else {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = DMatrix::from_fn(cols, cols, |r, c| v_t[(order[c], r)]);
    (values, v)
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn rank_cutoff(m: &DMatrix<f64>, sigma_max: f64, tol: &ToleranceProfile) -> f64 {
    tol.rank_rel * sigma_max * m.nrows().max(m.ncols()) as f64
}

/// Number of singular values above `rank_rel · σ_max · max(rows, cols)`.
pub fn matrix_rank(m: &DMatrix<f64>, tol: &ToleranceProfile) -> Result<usize> {
    check_finite(m)?;
    let s = singular_values(m);
    let Some(&smax) = s.first() else { return Ok(0) };
    if smax == 0.0 {
        return Ok(0);
    }
    let cut = rank_cutoff(m, smax, tol);
    Ok(s.iter().filter(|&&v| v > cut).count())
}

/// Orthonormal basis (as columns) of the null space of `m`, using the
/// relative rank cutoff of [`matrix_rank`].
pub fn null_space(m: &DMatrix<f64>, tol: &ToleranceProfile) -> Result<DMatrix<f64>> {
    null_space_above(m, tol, 0.0)
}

/// Like [`null_space`], but singular values are compared against
/// `rank_rel · max(σ_max, scale) · max(rows, cols)`, so a matrix that is
/// pure rounding noise relative to `scale` has a full null space.
pub(crate) fn null_space_above(
    m: &DMatrix<f64>,
    tol: &ToleranceProfile,
    scale: f64,
) -> Result<DMatrix<f64>> {
    check_finite(m)?;
    let cols = m.ncols();
    if cols == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (s, v) = full_right_svd(m);
    let reference = s[0].max(scale);
    let cut = if reference == 0.0 {
        0.0
    } else {
        rank_cutoff(m, reference, tol)
    };
    let rank = s.iter().filter(|&&x| x > cut).count();
    Ok(v.columns(rank, cols - rank).into_owned())
}

/// Result of [`positive_kernel`].
#[derive(Debug, Clone, PartialEq)]
pub enum KernelOutcome {
    /// Kernel vector with every component strictly positive, scaled so the
    /// smallest component equals one.
    Positive(DVector<f64>),
    /// The one-dimensional kernel has a zero or sign-changing component.
    Rejected(String),
}

/// The unique (up to scale) kernel vector of a matrix of corank one, if it
/// can be chosen strictly positive.
pub fn positive_kernel(m: &DMatrix<f64>, tol: &ToleranceProfile) -> Result<KernelOutcome> {
    let cols = m.ncols();
    let rank = matrix_rank(m, tol)?;
    if cols == 0 || rank + 1 != cols {
        return Err(Error::precondition(format!(
            "positive_kernel needs rank = columns - 1, got rank {rank} with {cols} columns"
        )));
    }
    let (_, v) = full_right_svd(m);
    let mut k: DVector<f64> = v.column(cols - 1).into_owned();
    if k.sum() < 0.0 {
        k = -k;
    }
    let scale = k.amax();
    let cutoff = tol.positivity * scale;
    if let Some((i, &bad)) = k.iter().enumerate().find(|(_, &x)| x <= cutoff) {
        return Ok(KernelOutcome::Rejected(format!(
            "kernel component {i} = {:.3e} is not strictly positive",
            bad / scale
        )));
    }
    let min = k.min();
    Ok(KernelOutcome::Positive(k / min))
}

/// Orthonormal basis of the fixed subspace `{x : Qx = x}` of an orthogonal
/// matrix.
pub fn fixed_subspace(q: &DMatrix<f64>, tol: &ToleranceProfile) -> Result<DMatrix<f64>> {
    check_finite(q)?;
    let n = q.nrows();
    if q.ncols() != n {
        return Err(Error::invalid("fixed_subspace needs a square matrix"));
    }
    let defect = (q.transpose() * q - DMatrix::identity(n, n)).amax();
    if defect > tol.feas {
        return Err(Error::invalid(format!(
            "matrix is not orthogonal (defect {defect:.3e})"
        )));
    }
    // ‖Q − I‖ ≤ 2 for orthogonal Q, so the cutoff is taken against that scale
    // rather than against σ_max, which may be arbitrarily small.
    let diff = q - DMatrix::identity(n, n);
    let (s, v) = full_right_svd(&diff);
    let cut = tol.rank_rel * 2.0 * n as f64;
    let rank = s.iter().filter(|&&x| x > cut).count();
    Ok(v.columns(rank, n - rank).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tol() -> ToleranceProfile {
        ToleranceProfile::default()
    }

    fn cols(v: &[&[f64]]) -> DMatrix<f64> {
        let rows = v[0].len();
        DMatrix::from_fn(rows, v.len(), |r, c| v[c][r])
    }

    #[test]
    fn rank_of_identity_and_zero() {
        assert_eq!(matrix_rank(&DMatrix::identity(3, 3), &tol()).unwrap(), 3);
        assert_eq!(matrix_rank(&DMatrix::zeros(2, 3), &tol()).unwrap(), 0);
    }

    #[test]
    fn rank_of_antiparallel_pair() {
        let u = cols(&[&[0.0, 1.0, 0.0], &[0.0, -1.0, 0.0]]);
        assert_eq!(matrix_rank(&u, &tol()).unwrap(), 1);
    }

    #[test]
    fn rank_of_triangle_normals() {
        let s = 3f64.sqrt() / 2.0;
        let u = cols(&[&[0.0, -1.0], &[s, 0.5], &[-s, 0.5]]);
        // Brute-force 2×2 minors: some minor is nonzero, so the rank is 2.
        let minor = |a: usize, b: usize| u[(0, a)] * u[(1, b)] - u[(1, a)] * u[(0, b)];
        assert!(minor(0, 1).abs() > 0.5);
        assert_eq!(matrix_rank(&u, &tol()).unwrap(), 2);
    }

    #[test]
    fn rank_rejects_nan() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(
            matrix_rank(&m, &tol()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn kernel_of_antiparallel_pair() {
        let u = cols(&[&[0.0, 1.0, 0.0], &[0.0, -1.0, 0.0]]);
        let KernelOutcome::Positive(k) = positive_kernel(&u, &tol()).unwrap() else {
            panic!()
        };
        assert_relative_eq!(k[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(k[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn kernel_mixed_sign_rejected() {
        let m = cols(&[&[1.0, 0.0], &[-1.0, 1.0]]);
        // Full rank 2 with 2 columns: precondition fails.
        assert!(matches!(
            positive_kernel(&m, &tol()),
            Err(Error::PreconditionViolation(_))
        ));
        // Corank one but the kernel (1, 1, -1)/… has a negative entry.
        let m = cols(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            positive_kernel(&m, &tol()).unwrap(),
            KernelOutcome::Rejected(_)
        ));
        // Kernel with a zero component.
        let m = cols(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(
            positive_kernel(&m, &tol()).unwrap(),
            KernelOutcome::Rejected(_)
        ));
    }

    #[test]
    fn kernel_of_triangle_normals() {
        let s = 3f64.sqrt() / 2.0;
        let u = cols(&[&[0.0, -1.0], &[s, 0.5], &[-s, 0.5]]);
        let KernelOutcome::Positive(k) = positive_kernel(&u, &tol()).unwrap() else {
            panic!()
        };
        for v in k.iter() {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-12);
        }
        assert!((&u * &k).norm() < 1e-12);
    }

    #[test]
    fn fixed_subspaces() {
        let t = tol();
        assert_eq!(
            fixed_subspace(&DMatrix::identity(3, 3), &t)
                .unwrap()
                .ncols(),
            3
        );
        let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0]));
        let b = fixed_subspace(&r, &t).unwrap();
        assert_eq!(b.ncols(), 2);
        assert!(b.row(1).amax() < 1e-12);
        assert_eq!(fixed_subspace(&(&r * &r), &t).unwrap().ncols(), 3);
        let bad = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            fixed_subspace(&bad, &t),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn wide_null_space_is_complete() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&m, &tol()).unwrap();
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).amax() < 1e-12);
        assert!((ns.transpose() * &ns - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn tolerance_bounds() {
        assert!(ToleranceProfile::new(1e-10, 1e-9, 1e-8).is_ok());
        assert!(ToleranceProfile::new(0.0, 1e-9, 1e-8).is_err());
        assert!(ToleranceProfile::with_feas(0.5).is_err());
    }
}
