//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

pub fn solve_vec(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular(what.to_string()))
}

/// `dst(s, .) += p * src(s, .)`
pub fn add_scaled_row(dst: &mut DMatrix<f64>, src: &DMatrix<f64>, s: usize, p: f64) {
    for j in 0..dst.ncols() {
        dst[(s, j)] += p * src[(s, j)];
    }
}

/// `(A + A^T) / 2`
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn all_finite(a: &DMatrix<f64>) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Eigenpairs of a symmetric matrix sorted by eigenvalue, largest first.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (values, vectors)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(a));
    eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Factor `L` with `L L^T = cov` for a symmetric PSD matrix.
///
/// Uses the eigendecomposition so that singular covariances are accepted.
/// Eigenvalues down to `-tol` are clamped to zero; anything lower is rejected.
pub fn psd_sqrt(cov: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(cov));
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -tol {
        return Err(Error::NotPsd(min));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Boolean transitive closure of the support of `p` (paths of length >= 1).
pub fn reachability(p: &DMatrix<f64>) -> Vec<Vec<bool>> {
    let n = p.nrows();
    let mut reach = vec![vec![false; n]; n];
    for s in 0..n {
        let mut stack: Vec<usize> = (0..n).filter(|&j| p[(s, j)] > 0.0).collect();
        while let Some(j) = stack.pop() {
            if reach[s][j] {
                continue;
            }
            reach[s][j] = true;
            for k in 0..n {
                if p[(j, k)] > 0.0 && !reach[s][k] {
                    stack.push(k);
                }
            }
        }
    }
    reach
}
