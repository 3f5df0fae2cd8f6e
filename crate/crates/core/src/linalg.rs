//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues of the smaller Gram matrix of `a` (`a a^T` or `a^T a`), i.e. the
/// squared singular values of `a`, sorted descending and clamped at zero.
pub fn squared_singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.transpose() * a
    };
    sorted_eigenvalues(gram)
}

/// Eigenvalues of a symmetric matrix, descending, negatives clamped to 0.
pub fn sorted_eigenvalues(symmetric: DMatrix<f64>) -> Vec<f64> {
    let mut eig: Vec<f64> = symmetric
        .symmetric_eigenvalues()
        .iter()
        .map(|&v| v.max(0.0))
        .collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

/// `1^T pinv(sym)` where eigenvalues with magnitude at most
/// `relative_cutoff * max |eigenvalue|` are treated as zero.
pub fn pinv_row_sums(sym: &DMatrix<f64>, relative_cutoff: f64) -> DVector<f64> {
    let n = sym.nrows();
    let eigen = SymmetricEigen::new(sym.clone());
    let largest = eigen.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = DVector::zeros(n);
    if largest == 0.0 {
        return out;
    }
    let cutoff = relative_cutoff * largest;
    for (k, &lambda) in eigen.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cutoff {
            continue;
        }
        let v = eigen.eigenvectors.column(k);
        let coef = v.sum() / lambda;
        out.axpy(coef, &v, 1.0);
    }
    out
}
