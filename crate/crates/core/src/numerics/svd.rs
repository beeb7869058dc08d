use super::{jacobi_eigh, Matrix, SymMatrix};
use crate::error::{Error, Result};

/// `B = left · diag(singular) · rightᵀ`, singular values descending.
#[derive(Debug, Clone)]
pub struct SvdDecomposition {
    pub left: Matrix,
    pub singular: Vec<f64>,
    pub right: Matrix,
}

impl SvdDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.left.clone();
        for (j, &s) in self.singular.iter().enumerate() {
            scaled.column_mut(j).scale_mut(s);
        }
        scaled * self.right.transpose()
    }
}

/// SVD of a small square matrix through the eigendecomposition of `BᵀB`.
///
/// Right singular vectors are sign-fixed so that their largest-magnitude
/// entry is positive. Left vectors are `B v / ‖B v‖`, re-orthogonalized in
/// order of decreasing singular value; columns belonging to numerically zero
/// singular values are completed from the standard basis.
pub fn svd_small(b: &Matrix) -> Result<SvdDecomposition> {
    let n = b.nrows();
    if n == 0 || b.ncols() != n {
        return Err(Error::Dimension(format!(
            "svd_small expects a non-empty square matrix, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }

    let normal = SymMatrix::symmetrize(b.transpose() * b);
    let eig = jacobi_eigh(&normal)?;

    let mut right = Matrix::zeros(n, n);
    let mut singular = Vec::with_capacity(n);
    for (col, src) in (0..n).rev().enumerate() {
        let mut v = eig.vectors.column(src).clone_owned();
        let pivot = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best });
        if pivot.1 < 0.0 {
            v.neg_mut();
        }
        right.set_column(col, &v);
        singular.push(eig.values[src].max(0.0).sqrt());
    }

    let scale = b.norm().max(1.0);
    let mut left = Matrix::zeros(n, n);
    let mut filled = vec![false; n];
    for j in 0..n {
        let mut u = b * right.column(j);
        for i in 0..j {
            if filled[i] {
                let proj = left.column(i).dot(&u);
                u.axpy(-proj, &left.column(i).clone_owned(), 1.0);
            }
        }
        let norm = u.norm();
        if norm > 1e-14 * scale {
            left.set_column(j, &(u / norm));
            filled[j] = true;
        }
    }
    complete_basis(&mut left, &mut filled);

    Ok(SvdDecomposition { left, singular, right })
}

/// Fills unset columns with unit vectors orthogonal to the filled ones.
fn complete_basis(q: &mut Matrix, filled: &mut [bool]) {
    let n = q.nrows();
    for j in 0..n {
        if filled[j] {
            continue;
        }
        let mut best: Option<nalgebra::DVector<f64>> = None;
        let mut best_norm = 0.0;
        for e in 0..n {
            let mut u = nalgebra::DVector::zeros(n);
            u[e] = 1.0;
            for _ in 0..2 {
                for i in 0..n {
                    if filled[i] {
                        let proj = q.column(i).dot(&u);
                        u.axpy(-proj, &q.column(i).clone_owned(), 1.0);
                    }
                }
            }
            let norm = u.norm();
            if norm > best_norm {
                best_norm = norm;
                best = Some(u);
            }
        }
        let u = best.expect("a completing direction exists while columns remain");
        q.set_column(j, &(u / best_norm));
        filled[j] = true;
    }
}
