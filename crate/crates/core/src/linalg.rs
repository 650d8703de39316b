//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis (as columns) of `{v : A v = 0}`, treating singular values
/// below `rel_tol · max(1, σ_max)` as zero. Also returns the singular values.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, Vec<f64>) {
    let n = a.ncols();
    // pad so the SVD returns a full right basis
    let a = if a.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    let cut = rel_tol * smax.max(1.0);
    let cols: Vec<DVector<f64>> = sv
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    let basis = if cols.is_empty() { DMatrix::zeros(n, 0) } else { DMatrix::from_columns(&cols) };
    let mut sorted = sv;
    sorted.sort_by(|a, b| b.total_cmp(a));
    (basis, sorted)
}

/// Numerical rank with the same threshold convention as [`nullspace`].
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.singular_values();
    let smax = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    sv.iter().filter(|&&s| s > rel_tol * smax.max(1.0)).count()
}

/// Orthonormal basis of the column span.
pub fn column_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return a.clone();
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > rel_tol * smax.max(1e-300))
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(a.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_rank_deficient_matrix() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, 1.0, 2.0, 4.0, 0.0, 2.0]);
        let (n, _) = nullspace(&a, 1e-12);
        assert_eq!(n.ncols(), 3);
        assert!(max_abs(&(&a * &n)) < 1e-14);
        assert_eq!(rank(&a, 1e-12), 1);
    }
}
