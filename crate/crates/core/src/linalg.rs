//! Small dense helpers built on nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Singular values at or below `rel_tol * sigma_max` are treated as zero.
const SVD_REL_TOL: f64 = 1e-10;

/// Orthonormal basis of `{v : m v = 0}` as matrix columns.
pub fn nullspace(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad to at least square so the SVD returns a full right basis.
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max();
    let tol = SVD_REL_TOL * smax.max(f64::MIN_POSITIVE);
    let null_rows: Vec<usize> = (0..cols)
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= tol)
        .collect();
    DMatrix::from_fn(cols, null_rows.len(), |i, j| v_t[(null_rows[j], i)])
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn min_norm_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DVector::zeros(cols);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = SVD_REL_TOL * smax.max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("U and V^T were computed")
}

/// Nonnegative least squares `min ||m x - b||, x >= 0` (Lawson-Hanson).
pub fn nnls(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let cols = m.ncols();
    let mut x = DVector::zeros(cols);
    let mut passive = vec![false; cols];
    let scale = m.amax().max(b.amax()).max(1.0);
    let tol = 1e-12 * scale * (cols.max(1) as f64);
    for _outer in 0..3 * cols + 10 {
        let grad = m.transpose() * (b - m * &x);
        let candidate = (0..cols)
            .filter(|&j| !passive[j] && grad[j] > tol)
            .max_by(|&a, &c| grad[a].total_cmp(&grad[c]));
        let Some(enter) = candidate else { break };
        passive[enter] = true;
        loop {
            let idx: Vec<usize> = (0..cols).filter(|&j| passive[j]).collect();
            let sub = m.select_columns(&idx);
            let s_p = min_norm_solve(&sub, b);
            if s_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = s_p[k];
                }
                break;
            }
            // Step toward the unconstrained subproblem solution until a
            // passive component hits zero.
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if s_p[k] <= 0.0 {
                    let denom = x[j] - s_p[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (s_p[k] - x[j]);
            }
            let mut dropped = false;
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                    dropped = true;
                }
            }
            if !dropped {
                break;
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let n = nullspace(&m);
        assert_eq!(n.ncols(), 2);
        assert!((m * &n).amax() < 1e-12);
        assert!((n.transpose() * &n - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn nullspace_of_full_rank_square_is_empty() {
        let n = nullspace(&DMatrix::identity(3, 3));
        assert_eq!(n.ncols(), 0);
    }

    #[test]
    fn min_norm_on_underdetermined_system() {
        let m = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = min_norm_solve(&m, &DVector::from_vec(vec![2.0]));
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nnls_clamps_negative_component() {
        let m = DMatrix::identity(2, 2);
        let x = nnls(&m, &DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(x, DVector::from_vec(vec![1.0, 0.0]));
    }

    #[test]
    fn nnls_finds_feasible_point_of_consistent_system() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 1.0, -1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0]);
        let x = nnls(&m, &b);
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!((&m * &x - &b).amax() < 1e-12);
    }
}
