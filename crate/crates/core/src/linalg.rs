use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Relative pivot threshold below which a Gram matrix is treated as singular.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct LsSolution {
    pub x: DVector<Complex64>,
    pub rank_deficient: bool,
}

/// Minimum-norm least-squares solution of `a x = y`.
///
/// Full-rank systems go through a Cholesky factorization of the smaller Gram
/// matrix; rank-deficient ones fall back to the SVD pseudoinverse.
pub(crate) fn min_norm_lstsq(a: &DMatrix<Complex64>, y: &DVector<Complex64>) -> LsSolution {
    let (n, m) = a.shape();
    assert_eq!(n, y.len(), "row count must match measurement length");
    let ah = a.adjoint();
    let tall = n >= m;
    let gram = if tall { &ah * a } else { a * &ah };

    if let Some(chol) = gram.clone().cholesky() {
        let diag = chol.l_dirty().diagonal();
        let max = diag.iter().map(|d| d.re * d.re).fold(0.0, f64::max);
        let min = diag
            .iter()
            .map(|d| d.re * d.re)
            .fold(f64::INFINITY, f64::min);
        if max > 0.0 && min / max > RANK_TOL {
            let x = if tall {
                chol.solve(&(&ah * y))
            } else {
                &ah * chol.solve(y)
            };
            return LsSolution {
                x,
                rank_deficient: false,
            };
        }
    }

    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = (smax * RANK_TOL.sqrt()).max(f64::MIN_POSITIVE);
    let x = svd.solve(y, eps).expect("SVD computed with both factors");
    LsSolution {
        x,
        rank_deficient: true,
    }
}
