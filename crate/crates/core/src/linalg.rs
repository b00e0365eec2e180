//! Dense complex linear algebra on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative pivot below which a Hermitian factorization is declared singular.
const PIVOT_FLOOR: f64 = 1e-13;

/// One draw of CN(0, variance): independent real and imaginary parts, each
/// with variance `variance / 2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// `rows x cols` matrix whose column `c` is i.i.d. CN(0, variances[c]).
/// Entries are drawn column by column.
pub fn gaussian_columns<R: Rng + ?Sized>(rng: &mut R, rows: usize, variances: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(rows, variances.len());
    for (c, &v) in variances.iter().enumerate() {
        for r in 0..rows {
            m[(r, c)] = complex_gaussian(rng, v);
        }
    }
    m
}

/// Cholesky factorization of a Hermitian positive-definite matrix.
pub fn cholesky(a: CMatrix) -> Result<Cholesky<C64, Dyn>> {
    let n = a.nrows();
    let scale = (0..n).map(|i| a[(i, i)].re).fold(0.0_f64, f64::max);
    let chol = Cholesky::new(a).ok_or_else(|| Error::Singular("Cholesky failed".into()))?;
    let l = chol.l_dirty();
    for i in 0..n {
        let pivot = l[(i, i)].re * l[(i, i)].re;
        if !(pivot > PIVOT_FLOOR * scale) {
            return Err(Error::Singular(format!(
                "pivot {i} is {pivot:e} against diagonal scale {scale:e}"
            )));
        }
    }
    Ok(chol)
}

/// Solves `a x = b` for Hermitian positive-definite `a`.
pub fn hpd_solve(a: CMatrix, b: &CVector) -> Result<CVector> {
    Ok(cholesky(a)?.solve(b))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted in
/// decreasing order with eigenvectors as matching columns.
pub fn hermitian_eigen(a: CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 10_000)
        .ok_or(Error::Convergence {
            what: "Hermitian eigen-solver",
            iterations: 10_000,
            residual: f64::NAN,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues of a Hermitian matrix in decreasing order.
pub fn hermitian_eigenvalues(a: CMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eigen(a)?.0)
}

/// Counts eigenvalues above `rel_tol * trace`.
pub fn numerical_rank(eigenvalues: &[f64], rel_tol: f64) -> usize {
    let trace: f64 = eigenvalues.iter().sum();
    eigenvalues.iter().filter(|&&l| l > rel_tol * trace).count()
}

/// `‖x‖²` for a complex vector slice.
pub fn norm_sqr(x: &CVector) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solve_matches_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = gaussian_columns(&mut rng, 6, &[1.0; 4]);
        let a = &g * g.adjoint() + CMatrix::identity(6, 6) * C64::new(0.5, 0.0);
        let b = CVector::from_fn(6, |i, _| C64::new(i as f64, 1.0));
        let x = hpd_solve(a.clone(), &b).unwrap();
        assert!((a * x - b).norm() < 1e-12);
    }

    #[test]
    fn singular_gram_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut g = gaussian_columns(&mut rng, 5, &[1.0; 3]);
        let c0 = g.column(0).clone_owned();
        g.set_column(2, &(c0 * C64::new(2.0, -1.0)));
        assert!(matches!(cholesky(g.adjoint() * &g), Err(Error::Singular(_))));
    }

    #[test]
    fn eigen_reconstructs_and_sorts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = gaussian_columns(&mut rng, 7, &[1.0, 2.0, 0.5]);
        let s = &g * g.adjoint();
        let (vals, vecs) = hermitian_eigen(s.clone()).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(numerical_rank(&vals, 1e-10), 3);
        let lam = CMatrix::from_diagonal(&CVector::from_iterator(
            7,
            vals.iter().map(|&v| C64::new(v, 0.0)),
        ));
        let rebuilt = &vecs * lam * vecs.adjoint();
        assert!((rebuilt - s).norm() < 1e-10);
    }
}
