//! Galerkin discretizations: s-type Gaussian molecules and a 1D soft-Coulomb
//! grid. Both produce a [`BasisContext`] with the same contraction interface.

mod basis_file;
mod gaussian;
mod grid1d;

pub use basis_file::{BasisLibrary, Contraction};
pub use gaussian::build_gaussian_backend;
pub use grid1d::{build_grid1d_backend, GridParams};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SymMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Nucleus {
    pub charge: f64,
    /// Bohr. The grid backend only reads the first component.
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub nuclei: Vec<Nucleus>,
    pub electron_count: usize,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.electron_count == 0 {
            return Err(Error::InvalidGeometry("electron count must be at least 1".into()));
        }
        for (i, n) in self.nuclei.iter().enumerate() {
            if !(n.charge > 0.0) || !n.charge.is_finite() {
                return Err(Error::InvalidGeometry(format!(
                    "nucleus {i} has non-positive charge {}",
                    n.charge
                )));
            }
            if n.position.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidGeometry(format!("nucleus {i} has a non-finite position")));
            }
        }
        for i in 0..self.nuclei.len() {
            for j in (i + 1)..self.nuclei.len() {
                if distance(&self.nuclei[i].position, &self.nuclei[j].position) < 1e-8 {
                    return Err(Error::InvalidGeometry(format!(
                        "nuclei {i} and {j} occupy the same position"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// How electrons map onto orbitals.
///
/// `Spinless`: one electron per orbital and `G(D) = J(D) − K(D)`.
/// `ClosedShell`: doubly occupied spatial orbitals, `G(D) = 2J(D) − K(D)`;
/// energies are then per spin channel (half the restricted total).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Occupation {
    #[default]
    Spinless,
    ClosedShell,
}

impl Occupation {
    pub fn orbital_count(self, electrons: usize) -> Result<usize> {
        match self {
            Occupation::Spinless => Ok(electrons),
            Occupation::ClosedShell if electrons.is_multiple_of(2) => Ok(electrons / 2),
            Occupation::ClosedShell => Err(Error::param(
                "electrons",
                format!("closed-shell occupation needs an even electron count, got {electrons}"),
            )),
        }
    }

    pub fn coulomb_weight(self) -> f64 {
        match self {
            Occupation::Spinless => 1.0,
            Occupation::ClosedShell => 2.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Occupation::Spinless => "spinless",
            Occupation::ClosedShell => "closed-shell",
        }
    }
}

/// Hamiltonian conventions shared by both backends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    pub occupation: Occupation,
    /// Prefactor on `−Δ`. 1.0 keeps the bare Laplacian, 0.5 gives atomic units.
    pub kinetic_factor: f64,
    /// Scales the two-electron operator `G`; 0 switches the interaction off.
    pub interaction_scale: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            occupation: Occupation::Spinless,
            kinetic_factor: 1.0,
            interaction_scale: 1.0,
        }
    }
}

impl ModelOptions {
    fn validate(&self) -> Result<()> {
        if !(self.kinetic_factor > 0.0) || !self.kinetic_factor.is_finite() {
            return Err(Error::param("kinetic_factor", "must be positive"));
        }
        if !(self.interaction_scale >= 0.0) || !self.interaction_scale.is_finite() {
            return Err(Error::param("interaction_scale", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Gaussian,
    Grid1d,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Gaussian => "gaussian",
            Backend::Grid1d => "grid1d",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridInfo {
    pub nodes: Vec<f64>,
    pub spacing: f64,
    pub half_width: f64,
    pub softening: f64,
}

/// Two-electron integrals behind `J` and `K`.
#[derive(Debug, Clone)]
pub enum TwoElectron {
    /// Dense `(ij|kl)` in chemists' notation, index `((i·M + j)·M + k)·M + l`.
    Tensor { dim: usize, values: Vec<f64> },
    /// Multiplicative pair kernel `w(x_p, x_q)` on grid nodes.
    PairKernel(Matrix),
}

impl TwoElectron {
    /// `J(P)_{μν} = Σ (μν|λσ) P_{λσ}` and `K(P)_{μν} = Σ (μλ|νσ) P_{λσ}` in the
    /// native (non-orthogonal) frame.
    pub fn contract(&self, p: &SymMatrix) -> (SymMatrix, SymMatrix) {
        match self {
            TwoElectron::Tensor { dim, values } => {
                let m = *dim;
                let pm = p.as_matrix();
                let mut j = Matrix::zeros(m, m);
                let mut k = Matrix::zeros(m, m);
                for mu in 0..m {
                    for nu in 0..m {
                        let mut jsum = 0.0;
                        let mut ksum = 0.0;
                        for lam in 0..m {
                            for sig in 0..m {
                                let pls = pm[(lam, sig)];
                                jsum += values[((mu * m + nu) * m + lam) * m + sig] * pls;
                                ksum += values[((mu * m + lam) * m + nu) * m + sig] * pls;
                            }
                        }
                        j[(mu, nu)] = jsum;
                        k[(mu, nu)] = ksum;
                    }
                }
                (SymMatrix::symmetrize(j), SymMatrix::symmetrize(k))
            }
            TwoElectron::PairKernel(w) => {
                let n = w.nrows();
                let pm = p.as_matrix();
                let mut j = Matrix::zeros(n, n);
                for a in 0..n {
                    let mut s = 0.0;
                    for b in 0..n {
                        s += w[(a, b)] * pm[(b, b)];
                    }
                    j[(a, a)] = s;
                }
                let k = w.component_mul(pm);
                (SymMatrix::symmetrize(j), SymMatrix::symmetrize(k))
            }
        }
    }

    /// `(ij|kl)` for any backend (the grid kernel is diagonal in each pair).
    pub fn element(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        match self {
            TwoElectron::Tensor { dim, values } => values[((i * dim + j) * dim + k) * dim + l],
            TwoElectron::PairKernel(w) => {
                if i == j && k == l {
                    w[(i, k)]
                } else {
                    0.0
                }
            }
        }
    }
}

/// An immutable Galerkin discretization plus the occupation data the SCF
/// needs.
#[derive(Debug, Clone)]
pub struct BasisContext {
    pub backend: Backend,
    pub dim: usize,
    pub overlap: SymMatrix,
    /// Core Hamiltonian `h = c·(−Δ) + V` in the native frame.
    pub core: SymMatrix,
    pub kinetic: SymMatrix,
    pub eri: TwoElectron,
    /// Löwdin orthonormalizer, `Xᵀ S X = I`.
    pub orthonormalizer: Matrix,
    pub core_lowdin: SymMatrix,
    pub kinetic_lowdin: SymMatrix,
    pub grid: Option<GridInfo>,
    pub options: ModelOptions,
    pub electron_count: usize,
    /// Number of occupied orbitals `N`.
    pub occupied: usize,
    pub nuclear_repulsion: f64,
    orthonormal_basis: bool,
}

impl BasisContext {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        backend: Backend,
        overlap: SymMatrix,
        core: SymMatrix,
        kinetic: SymMatrix,
        eri: TwoElectron,
        grid: Option<GridInfo>,
        options: ModelOptions,
        electron_count: usize,
        nuclear_repulsion: f64,
    ) -> Result<Self> {
        let dim = overlap.dim();
        let occupied = options.occupation.orbital_count(electron_count)?;
        if occupied > dim {
            return Err(Error::param(
                "electrons",
                format!("{occupied} occupied orbitals do not fit in a basis of dimension {dim}"),
            ));
        }
        let orthonormal_basis = (overlap.as_matrix() - Matrix::identity(dim, dim)).amax() == 0.0;
        let orthonormalizer = if orthonormal_basis {
            Matrix::identity(dim, dim)
        } else {
            crate::numerics::sqrt_inv_spd(&overlap)?
        };
        let (core_lowdin, kinetic_lowdin) = if orthonormal_basis {
            (core.clone(), kinetic.clone())
        } else {
            (core.congruence(&orthonormalizer), kinetic.congruence(&orthonormalizer))
        };
        Ok(BasisContext {
            backend,
            dim,
            overlap,
            core,
            kinetic,
            eri,
            orthonormalizer,
            core_lowdin,
            kinetic_lowdin,
            grid,
            options,
            electron_count,
            occupied,
            nuclear_repulsion,
            orthonormal_basis,
        })
    }

    /// `J(D)` and `K(D)` for a Löwdin-frame matrix `D`, returned in the Löwdin
    /// frame.
    pub fn coulomb_exchange(&self, d: &SymMatrix) -> (SymMatrix, SymMatrix) {
        if self.orthonormal_basis {
            return self.eri.contract(d);
        }
        let x = &self.orthonormalizer;
        let p = SymMatrix::symmetrize(x * d.as_matrix() * x.transpose());
        let (j, k) = self.eri.contract(&p);
        (j.congruence(x), k.congruence(x))
    }

    /// SHA-256 over the bit patterns of `S` and `h`.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.backend.as_str().as_bytes());
        hasher.update((self.dim as u64).to_le_bytes());
        for m in [&self.overlap, &self.core] {
            for x in m.as_matrix().iter() {
                hasher.update(x.to_bits().to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupation_counts() {
        assert_eq!(Occupation::Spinless.orbital_count(3).unwrap(), 3);
        assert_eq!(Occupation::ClosedShell.orbital_count(2).unwrap(), 1);
        assert!(Occupation::ClosedShell.orbital_count(3).is_err());
    }

    #[test]
    fn geometry_rejects_duplicates_and_bad_charges() {
        let dup = Geometry {
            nuclei: vec![
                Nucleus { charge: 1.0, position: [0.0; 3] },
                Nucleus { charge: 1.0, position: [0.0; 3] },
            ],
            electron_count: 2,
        };
        assert!(matches!(dup.validate(), Err(Error::InvalidGeometry(_))));
        let neg = Geometry {
            nuclei: vec![Nucleus { charge: -1.0, position: [0.0; 3] }],
            electron_count: 1,
        };
        assert!(neg.validate().is_err());
        let none = Geometry { nuclei: vec![], electron_count: 0 };
        assert!(none.validate().is_err());
    }
}
