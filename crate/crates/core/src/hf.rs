//! Density matrices, the Fock build and the three Hartree-Fock energies, all
//! in the Löwdin frame of a [`BasisContext`].

use crate::error::{Error, Result};
use crate::models::BasisContext;
use crate::numerics::{orthogonality_defect, trace_product, Matrix, SymMatrix};

/// Orthonormality defect above which orbitals are rejected.
pub const ORBITAL_DEFECT_LIMIT: f64 = 1e-8;

/// Occupied orbitals as the columns of an `M×N` coefficient matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalSet {
    coeffs: Matrix,
}

impl OrbitalSet {
    pub fn new(coeffs: Matrix) -> Result<Self> {
        if coeffs.ncols() == 0 || coeffs.ncols() > coeffs.nrows() {
            return Err(Error::Dimension(format!(
                "orbital set must be M×N with 1 ≤ N ≤ M, got {}x{}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        if coeffs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let defect = orthogonality_defect(&coeffs);
        if defect > ORBITAL_DEFECT_LIMIT {
            return Err(Error::InvalidOrbitals(defect));
        }
        Ok(OrbitalSet { coeffs })
    }

    /// Skips the orthonormality check, for evaluating maps off the manifold.
    pub fn unchecked(coeffs: Matrix) -> Self {
        OrbitalSet { coeffs }
    }

    pub fn coeffs(&self) -> &Matrix {
        &self.coeffs
    }

    pub fn count(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn dim(&self) -> usize {
        self.coeffs.nrows()
    }

    /// `C·Aᵀ`, i.e. `φ_i ↦ Σ_j A_ij φ_j`.
    pub fn rotated(&self, a: &Matrix) -> OrbitalSet {
        OrbitalSet { coeffs: &self.coeffs * a.transpose() }
    }
}

/// Projector `D = CCᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(SymMatrix);

impl DensityMatrix {
    /// Wraps a matrix without checking idempotency or trace (the zero matrix
    /// and convex combinations are useful test inputs).
    pub fn unchecked(m: SymMatrix) -> Self {
        DensityMatrix(m)
    }

    /// Checks `D² = D` and `Tr D = N` to `1e-10`.
    pub fn new(m: SymMatrix, count: usize) -> Result<Self> {
        let dm = m.as_matrix();
        let idem = (dm * dm - dm).amax();
        if idem > 1e-10 {
            return Err(Error::InvalidDensity(format!("idempotency defect {idem:e}")));
        }
        let tr = m.trace();
        if (tr - count as f64).abs() > 1e-10 {
            return Err(Error::InvalidDensity(format!("trace {tr} differs from {count}")));
        }
        Ok(DensityMatrix(m))
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &Matrix {
        self.0.as_matrix()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Occupied orbital energies with the aufbau gap.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitalEnergies {
    pub values: Vec<f64>,
    /// `ε_{N+1} − ε_N`; `None` when every orbital is occupied.
    pub gap: Option<f64>,
}

impl OrbitalEnergies {
    pub fn homo_level(&self) -> f64 {
        *self.values.last().expect("at least one occupied orbital")
    }
}

pub fn density_from_orbitals(phi: &OrbitalSet) -> Result<DensityMatrix> {
    let c = phi.coeffs();
    let defect = orthogonality_defect(c);
    if defect > ORBITAL_DEFECT_LIMIT {
        return Err(Error::InvalidOrbitals(defect));
    }
    Ok(DensityMatrix(SymMatrix::symmetrize(c * c.transpose())))
}

/// `G(D) = s·(w·J(D) − K(D))`, with Coulomb weight `w` from the occupation mode
/// and interaction scale `s`.
pub fn build_g(d: &DensityMatrix, ctx: &BasisContext) -> SymMatrix {
    let (j, k) = ctx.coulomb_exchange(d.as_sym());
    let w = ctx.options.occupation.coulomb_weight();
    j.scaled(w).sub(&k).scaled(ctx.options.interaction_scale)
}

pub fn build_fock(d: &DensityMatrix, ctx: &BasisContext) -> SymMatrix {
    ctx.core_lowdin.add(&build_g(d, ctx))
}

/// `Ê(D) = Tr(hD) + ½ Tr(G(D) D)`.
pub fn hf_energy(d: &DensityMatrix, ctx: &BasisContext) -> f64 {
    let g = build_g(d, ctx);
    trace_product(ctx.core_lowdin.as_matrix(), d.as_matrix()) + 0.5 * trace_product(g.as_matrix(), d.as_matrix())
}

/// `E(D, D̃) = Tr(hD) + Tr(hD̃) + Tr(G(D) D̃)`.
pub fn pair_energy(d: &DensityMatrix, d2: &DensityMatrix, ctx: &BasisContext) -> f64 {
    let h = ctx.core_lowdin.as_matrix();
    let g = build_g(d, ctx);
    trace_product(h, d.as_matrix()) + trace_product(h, d2.as_matrix()) + trace_product(g.as_matrix(), d2.as_matrix())
}

/// Hilbert-Schmidt distance `‖D − D̃‖₂`.
pub fn hs_distance(d: &DensityMatrix, d2: &DensityMatrix) -> f64 {
    (d.as_matrix() - d2.as_matrix()).norm()
}

/// `B_ij = ⟨φ_i, φ̃_j⟩`.
pub fn orbital_overlap(phi: &OrbitalSet, phi2: &OrbitalSet) -> Matrix {
    phi.coeffs().transpose() * phi2.coeffs()
}

/// Value of the residual map at `(Φ, Φ̃, 𝐞, ẽ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVector {
    /// Column `i` is `F(D_Φ̃) φ_i − ε_i φ_i`.
    pub block1: Matrix,
    /// Column `i` is `F(D_Φ) φ̃_i − ε̃_i φ̃_i`.
    pub block2: Matrix,
    pub norm1_defect: Vec<f64>,
    pub norm2_defect: Vec<f64>,
}

/// Weight on the orbital blocks in [`ResidualVector::norm`].
pub const RESIDUAL_FUNCTION_WEIGHT: f64 = 2.0;

impl ResidualVector {
    /// `√(2‖b₁‖² + 2‖b₂‖² + ‖d₁‖² + ‖d₂‖²)`.
    pub fn norm(&self) -> f64 {
        let defects: f64 = self.norm1_defect.iter().chain(&self.norm2_defect).map(|x| x * x).sum();
        (RESIDUAL_FUNCTION_WEIGHT * (self.block1.norm_squared() + self.block2.norm_squared()) + defects).sqrt()
    }
}

pub fn residual_map(
    phi: &OrbitalSet,
    phi2: &OrbitalSet,
    e: &OrbitalEnergies,
    e2: &OrbitalEnergies,
    ctx: &BasisContext,
) -> ResidualVector {
    let raw_density = |p: &OrbitalSet| DensityMatrix(SymMatrix::symmetrize(p.coeffs() * p.coeffs().transpose()));
    let f_of_phi2 = build_fock(&raw_density(phi2), ctx);
    let f_of_phi = build_fock(&raw_density(phi), ctx);
    let block = |f: &SymMatrix, p: &OrbitalSet, eps: &[f64]| {
        let mut b = f.as_matrix() * p.coeffs();
        for (i, &ei) in eps.iter().enumerate() {
            b.column_mut(i).axpy(-ei, &p.coeffs().column(i), 1.0);
        }
        b
    };
    let defects = |p: &OrbitalSet| p.coeffs().column_iter().map(|c| 1.0 - c.norm_squared()).collect();
    ResidualVector {
        block1: block(&f_of_phi2, phi, &e.values),
        block2: block(&f_of_phi, phi2, &e2.values),
        norm1_defect: defects(phi),
        norm2_defect: defects(phi2),
    }
}
