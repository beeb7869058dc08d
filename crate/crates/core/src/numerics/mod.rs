//! Dense linear algebra and special functions used throughout the solver.
//!
//! Everything here is a pure function of its inputs. Matrices are stored as
//! `nalgebra::DMatrix<f64>`; the factorizations themselves (cyclic Jacobi,
//! SVD through the normal matrix, Löwdin inverse square root) are implemented
//! locally so that results are reproducible bit for bit across platforms.

mod boys;
mod jacobi;
mod svd;

pub use boys::{boys_f0, erf};
pub use jacobi::{jacobi_eigh, EigDecomposition, JACOBI_MAX_SWEEPS};
pub use svd::{svd_small, SvdDecomposition};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Real symmetric matrix. Symmetry is exact: the constructor averages the
/// input with its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut out = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        Ok(SymMatrix(out))
    }

    /// Builds from a matrix known to be square; panics otherwise.
    pub fn symmetrize(m: Matrix) -> Self {
        Self::from_matrix(m).expect("square matrix")
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(Matrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(Matrix::identity(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        SymMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Congruence transform `Bᵀ A B`, re-symmetrized.
    pub fn congruence(&self, b: &Matrix) -> SymMatrix {
        SymMatrix::symmetrize(b.transpose() * &self.0 * b)
    }

    pub fn scaled(&self, alpha: f64) -> SymMatrix {
        SymMatrix(&self.0 * alpha)
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &other.0)
    }
}

impl std::ops::Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// `Tr(A B)` for square matrices of equal size, without forming the product.
pub fn trace_product(a: &Matrix, b: &Matrix) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Largest entry of `|QᵀQ − I|`.
pub fn orthogonality_defect(q: &Matrix) -> f64 {
    let g = q.transpose() * q;
    let n = g.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Orthonormalizes the columns of `m` in place by modified Gram-Schmidt.
/// Returns an error when a column is numerically dependent on its predecessors.
pub fn gram_schmidt(m: &mut Matrix) -> Result<()> {
    let cols = m.ncols();
    for j in 0..cols {
        for i in 0..j {
            let proj = m.column(i).dot(&m.column(j));
            let ci = m.column(i).clone_owned();
            let mut cj = m.column_mut(j);
            cj.axpy(-proj, &ci, 1.0);
        }
        let norm = m.column(j).norm();
        if norm < 1e-12 {
            return Err(Error::InvalidInput(format!(
                "column {j} is linearly dependent on previous columns"
            )));
        }
        m.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(())
}

/// Nearest orthogonal matrix (polar factor `U Vᵀ`) of a square matrix.
pub fn nearest_orthogonal(m: &Matrix) -> Result<Matrix> {
    let svd = svd_small(m)?;
    Ok(&svd.left * svd.right.transpose())
}

/// Löwdin orthonormalizer `X = S^{-1/2}` so that `Xᵀ S X = I`.
pub fn sqrt_inv_spd(s: &SymMatrix) -> Result<Matrix> {
    let eig = jacobi_eigh(s)?;
    let smallest = eig.values.first().copied().unwrap_or(0.0);
    if smallest < 1e-10 {
        return Err(Error::LinearDependence(smallest));
    }
    let n = s.dim();
    let mut scaled = eig.vectors.clone();
    for (j, &lambda) in eig.values.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lambda.sqrt().recip());
    }
    let x = &scaled * eig.vectors.transpose();
    // X is symmetric in exact arithmetic.
    let mut out = x;
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    Ok(out)
}
