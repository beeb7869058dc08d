use nalgebra::DVector;

use super::{Matrix, SymMatrix};
use crate::error::{Error, Result};

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Converged once the off-diagonal Frobenius norm drops below this fraction
/// of `‖A‖_F`.
const OFF_DIAGONAL_TOL: f64 = 1e-13;

/// Eigenpairs of a real symmetric matrix.
///
/// `values` are ascending and column `j` of `vectors` belongs to `values[j]`.
/// Degenerate eigenvectors are left as the solver produced them.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl EigDecomposition {
    pub fn reconstruct(&self) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        scaled * self.vectors.transpose()
    }
}

/// Cyclic Jacobi eigensolver with threshold sweeps.
///
/// The first three sweeps only rotate entries above `0.2·Σ|a_pq|/n²`; later
/// sweeps rotate everything and flush entries that are negligible next to
/// both diagonal elements.
pub fn jacobi_eigh(a: &SymMatrix) -> Result<EigDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Err(Error::Dimension("eigendecomposition of an empty matrix".into()));
    }
    let src = a.as_matrix();
    if src.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }

    // Row-major working copy; only the strict upper triangle is updated.
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = src[(i, j)];
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut d: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let tol = OFF_DIAGONAL_TOL * a.frobenius_norm();
    let off_norm = |m: &[f64]| {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += m[p * n + q] * m[p * n + q];
            }
        }
        (2.0 * s).sqrt()
    };

    for sweep in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&m) <= tol {
            return Ok(finish(d, v, n));
        }
        let threshold = if sweep < 3 {
            let mut sum = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    sum += m[p * n + q].abs();
                }
            }
            0.2 * sum / (n * n) as f64
        } else {
            0.0
        };

        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    m[p * n + q] = 0.0;
                    continue;
                }
                if apq == 0.0 || apq.abs() <= threshold {
                    continue;
                }
                let diff = d[q] - d[p];
                let t = if diff.abs() + g == diff.abs() {
                    apq / diff
                } else {
                    let theta = 0.5 * diff / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                m[p * n + q] = 0.0;

                let rotate = |m: &mut [f64], ij: usize, kl: usize| {
                    let g = m[ij];
                    let h = m[kl];
                    m[ij] = g - s * (h + g * tau);
                    m[kl] = h + s * (g - h * tau);
                };
                for j in 0..p {
                    rotate(&mut m, j * n + p, j * n + q);
                }
                for j in (p + 1)..q {
                    rotate(&mut m, p * n + j, j * n + q);
                }
                for j in (q + 1)..n {
                    rotate(&mut m, p * n + j, q * n + j);
                }
                for j in 0..n {
                    rotate(&mut v, j * n + p, j * n + q);
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
    }

    let off = off_norm(&m);
    if off <= tol {
        return Ok(finish(d, v, n));
    }
    Err(Error::NoConvergence {
        sweeps: JACOBI_MAX_SWEEPS,
        off_norm: off,
    })
}

fn finish(d: Vec<f64>, v: Vec<f64>, n: usize) -> EigDecomposition {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let column = DVector::from_fn(n, |row, _| v[row * n + src]);
        vectors.set_column(col, &column);
    }
    EigDecomposition { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::orthogonality_defect;
    use proptest::prelude::*;

    fn pseudo_random_symmetric(n: usize, seed: u64) -> SymMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let m = Matrix::from_fn(n, n, |_, _| next());
        SymMatrix::symmetrize(&m + m.transpose())
    }

    #[test]
    fn diagonal_input_is_sorted() {
        let eig = jacobi_eigh(&SymMatrix::from_diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        // permutation of identity
        for j in 0..3 {
            let col = eig.vectors.column(j);
            assert_eq!(col.iter().filter(|x| x.abs() == 1.0).count(), 1);
        }
    }

    #[test]
    fn swap_matrix_has_plus_minus_one() {
        let a = SymMatrix::symmetrize(Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let eig = jacobi_eigh(&a).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_eight_by_eight_residuals() {
        let a = pseudo_random_symmetric(8, 11);
        let eig = jacobi_eigh(&a).unwrap();
        let norm = a.frobenius_norm();
        for j in 0..8 {
            let v = eig.vectors.column(j);
            let r = a.as_matrix() * v - v * eig.values[j];
            assert!(r.norm() <= 1e-10 * norm, "residual {}", r.norm());
        }
        assert!(orthogonality_defect(&eig.vectors) < 1e-12);
        assert!((eig.reconstruct() - a.as_matrix()).norm() <= 1e-10 * norm);
    }

    #[test]
    fn one_by_one_and_zero_matrices() {
        let eig = jacobi_eigh(&SymMatrix::from_diagonal(&[-2.5])).unwrap();
        assert_eq!(eig.values, vec![-2.5]);
        let eig = jacobi_eigh(&SymMatrix::zeros(4)).unwrap();
        assert!(eig.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_non_finite() {
        let a = SymMatrix::from_diagonal(&[1.0, f64::NAN]);
        assert!(matches!(jacobi_eigh(&a), Err(Error::NonFinite)));
    }

    proptest! {
        #[test]
        fn reconstruction_and_orthogonal_invariance(n in 1usize..12, seed in any::<u64>(), qseed in any::<u64>()) {
            let a = pseudo_random_symmetric(n, seed);
            let eig = jacobi_eigh(&a).unwrap();
            let norm = a.frobenius_norm().max(1e-300);
            prop_assert!((eig.reconstruct() - a.as_matrix()).norm() <= 1e-10 * norm);
            prop_assert!(orthogonality_defect(&eig.vectors) < 1e-12);
            prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));

            // Q from the eigenvectors of an unrelated symmetric matrix
            let q = jacobi_eigh(&pseudo_random_symmetric(n, qseed)).unwrap().vectors;
            let rotated = a.congruence(&q);
            let eig2 = jacobi_eigh(&rotated).unwrap();
            for (x, y) in eig.values.iter().zip(&eig2.values) {
                prop_assert!((x - y).abs() <= 1e-10 * norm);
            }
        }
    }
}
