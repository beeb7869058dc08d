//! The Roothaan iteration with trace recording, pairwise orbital alignment,
//! the two-step alignment chain and the limit classification.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hf::{
    build_fock, density_from_orbitals, hf_energy, hs_distance, orbital_overlap, pair_energy, residual_map,
    DensityMatrix, OrbitalEnergies, OrbitalSet,
};
use crate::models::BasisContext;
use crate::numerics::{jacobi_eigh, nearest_orthogonal, orthogonality_defect, svd_small, Matrix, SymMatrix};
use crate::rng;

/// Gap of `F(D^k)` fell below `gap_floor`.
pub const FLAG_UWP_VIOLATION: u32 = 1;
/// Eigenvalues within `tie_tolerance` straddle the Fermi level.
pub const FLAG_DEGENERATE_AUFBAU: u32 = 2;
/// The alignment chain drifted from orthogonality and was re-orthonormalized.
pub const FLAG_CHAIN_REORTHONORMALIZED: u32 = 4;

const CHAIN_DEFECT_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Lowest eigenvectors of `h`.
    Core,
    /// Occupied eigenvectors of a supplied projector (Löwdin frame).
    Density(DensityMatrix),
    RandomOrthonormal { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScfConfig {
    pub max_iterations: usize,
    /// Bound on `α_k = ‖D^{k+1} − D^{k−1}‖₂`; three consecutive hits stop the run.
    pub convergence_threshold: f64,
    /// Do not stop before this many records exist.
    pub min_iterations: usize,
    pub gap_floor: f64,
    pub tie_tolerance: f64,
    pub initial_guess: InitialGuess,
    pub hf_residual_tolerance: f64,
    /// Largest `1 − σ_min` accepted as the even and odd limits spanning one space.
    pub relation_tolerance: f64,
}

impl Default for ScfConfig {
    fn default() -> Self {
        ScfConfig {
            max_iterations: 500,
            convergence_threshold: 1e-9,
            min_iterations: 0,
            gap_floor: 1e-6,
            tie_tolerance: 1e-10,
            initial_guess: InitialGuess::Core,
            hf_residual_tolerance: 1e-8,
            relation_tolerance: 1e-6,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 2 {
            return Err(Error::param("max_iterations", "must be at least 2"));
        }
        for (name, v) in [
            ("convergence_threshold", self.convergence_threshold),
            ("gap_floor", self.gap_floor),
            ("tie_tolerance", self.tie_tolerance),
            ("hf_residual_tolerance", self.hf_residual_tolerance),
            ("relation_tolerance", self.relation_tolerance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(name, "must be positive"));
            }
        }
        Ok(())
    }
}

/// One aufbau step `D^k ↦ Φ^{k+1}` and the quantities measured along it.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `𝐞^{k+1}` with the gap of `F(D^k)`.
    pub energies: OrbitalEnergies,
    /// `𝓔(Φ^k, Φ^{k+1})`.
    pub pair_energy: f64,
    /// `Ê(D^k)`.
    pub hf_energy: f64,
    /// `‖D^{k+1} − D^k‖₂`.
    pub step_distance: f64,
    /// `‖D^{k+1} − D^{k−1}‖₂`, absent at `k = 0`.
    pub alpha: Option<f64>,
    /// `‖F(Φ^k, Φ^{k+1}, 𝐞^k, 𝐞^{k+1})‖`.
    pub residual_norm: f64,
    /// `‖Ξ^{k+1} − Ξ^{k−1}‖_H`, absent at `k = 0`.
    pub aligned_step: Option<f64>,
    /// `‖⟨x⟩φ_i^{k+1}‖`, grid backend only.
    pub moments: Option<Vec<f64>>,
    /// `(φ_i^{k+1}, T φ_i^{k+1})^{1/2}`.
    pub kinetic_norms: Vec<f64>,
    pub flags: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScfTrace {
    pub records: Vec<IterationRecord>,
    /// `𝐞^0`: Rayleigh quotients of `h` on `Φ^0`.
    pub initial_energies: Vec<f64>,
    pub occupied: usize,
    /// Stopped by the α rule rather than by `max_iterations`.
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl ScfTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn min_gap(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.energies.gap)
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Orthogonal `A`, `Ã` with `AΦ` and `ÃΦ̃` sharing a diagonal overlap.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPair {
    pub a: Matrix,
    pub a2: Matrix,
    /// Singular values of `⟨Φ, Φ̃⟩`, descending.
    pub singular: Vec<f64>,
}

impl AlignmentPair {
    /// `‖AΦ − ÃΦ̃‖² = 2(N − Σλ_i)`.
    pub fn aligned_distance_squared(&self) -> f64 {
        (2.0 * (self.singular.len() as f64 - self.singular.iter().sum::<f64>())).max(0.0)
    }

    /// `‖AΦ − ÃΦ̃‖` evaluated on coefficients, free of the cancellation in
    /// [`Self::aligned_distance_squared`].
    pub fn aligned_distance(&self, phi: &OrbitalSet, phi2: &OrbitalSet) -> f64 {
        (phi.rotated(&self.a).coeffs() - phi2.rotated(&self.a2).coeffs()).norm()
    }
}

/// SVD `B = UΣVᵀ` of the overlap gives `A = Uᵀ`, `Ã = Vᵀ`.
pub fn align_orbitals(phi: &OrbitalSet, phi2: &OrbitalSet) -> Result<AlignmentPair> {
    let svd = svd_small(&orbital_overlap(phi, phi2))?;
    Ok(AlignmentPair {
        a: svd.left.transpose(),
        a2: svd.right.transpose(),
        singular: svd.singular,
    })
}

/// `Ã_{k+1} = Ã_{k−1} · A⁺_{k+1} · (A⁻_{k+1})ᵀ`.
pub fn alignment_chain_update(prev_chain: &Matrix, a_plus: &Matrix, a_minus: &Matrix) -> Matrix {
    prev_chain * a_plus * a_minus.transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConvergedHfSolution,
    TwoCycleOscillation,
    Undetermined,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ConvergedHfSolution => "converged-hf-solution",
            Verdict::TwoCycleOscillation => "two-cycle-oscillation",
            Verdict::Undetermined => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub even_limit: OrbitalSet,
    pub odd_limit: OrbitalSet,
    pub even_density: DensityMatrix,
    pub odd_density: DensityMatrix,
    /// Gap of `F(D_even)`.
    pub limit_gap: Option<f64>,
    /// Occupied eigenvectors of `F(D_even)`.
    pub canonical_orbitals: OrbitalSet,
    pub canonical_energies: OrbitalEnergies,
    /// `‖A_∞ Ξ̃ − Ã Φ̂‖` after pairwise alignment of the odd limit with `Φ̂`.
    pub alignment_defect: f64,
    /// `1 − σ_min(⟨Ξ, Ξ̃⟩)`.
    pub unitary_relation_defect: f64,
    /// `(Σ_i ‖F(Φ̂)φ̂_i − ε̂_i φ̂_i‖²)^{1/2}`, computed when the limits share a span.
    pub hf_residual: Option<f64>,
    /// `max_i |ε̂_i − ε_i|` against the most recent odd iterate.
    pub energy_mismatch: Option<f64>,
    /// Eigenvalue tolerance used when grouping degenerate levels.
    pub degeneracy_tolerance: f64,
    pub verdict: Verdict,
}

/// Result of one aufbau step.
#[derive(Debug, Clone)]
pub struct AufbauStep {
    pub orbitals: OrbitalSet,
    pub energies: OrbitalEnergies,
    pub density: DensityMatrix,
    pub flags: u32,
}

fn fix_sign(v: &mut nalgebra::DVector<f64>) {
    let mut pivot = 0.0f64;
    for &x in v.iter() {
        if x.abs() > pivot.abs() {
            pivot = x;
        }
    }
    if pivot < 0.0 {
        v.neg_mut();
    }
}

/// Lexicographic comparison of absolute coefficients, entries closer than
/// `1e-12` counting as equal. Larger first.
fn lexicographic_abs(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        let (x, y) = (x.abs(), y.abs());
        if (x - y).abs() > 1e-12 {
            return y.total_cmp(&x);
        }
    }
    Ordering::Equal
}

/// Diagonalizes a Fock matrix and occupies the `n` lowest levels.
pub fn aufbau(fock: &SymMatrix, n: usize, cfg: &ScfConfig) -> Result<AufbauStep> {
    let eig = jacobi_eigh(fock)?;
    let m = eig.values.len();
    let mut flags = 0;
    let mut columns: Vec<nalgebra::DVector<f64>> = (0..m)
        .map(|j| {
            let mut v = eig.vectors.column(j).clone_owned();
            fix_sign(&mut v);
            v
        })
        .collect();

    let gap = (n < m).then(|| eig.values[n] - eig.values[n - 1]);
    if let Some(g) = gap {
        if g < cfg.gap_floor {
            flags |= FLAG_UWP_VIOLATION;
        }
        if g <= cfg.tie_tolerance {
            flags |= FLAG_DEGENERATE_AUFBAU;
            let fermi = eig.values[n - 1];
            let lo = (0..n).find(|&j| (eig.values[j] - fermi).abs() <= cfg.tie_tolerance).unwrap_or(n - 1);
            let hi = (n..m).take_while(|&j| (eig.values[j] - fermi).abs() <= cfg.tie_tolerance).last().unwrap_or(n);
            columns[lo..=hi].sort_by(lexicographic_abs);
        }
    }

    let mut c = Matrix::zeros(m, n);
    for (j, col) in columns.iter().take(n).enumerate() {
        c.set_column(j, col);
    }
    let orbitals = OrbitalSet::new(c)?;
    let density = density_from_orbitals(&orbitals)?;
    Ok(AufbauStep {
        orbitals,
        energies: OrbitalEnergies { values: eig.values[..n].to_vec(), gap },
        density,
        flags,
    })
}

/// `Φ^{k+1}`, `𝐞^{k+1}` and `D^{k+1}` from `D^k`.
pub fn scf_step(d: &DensityMatrix, ctx: &BasisContext, cfg: &ScfConfig) -> Result<AufbauStep> {
    aufbau(&build_fock(d, ctx), ctx.occupied, cfg)
}

fn initial_orbitals(ctx: &BasisContext, cfg: &ScfConfig) -> Result<(OrbitalSet, Vec<f64>)> {
    let n = ctx.occupied;
    let phi = match &cfg.initial_guess {
        InitialGuess::Core => {
            let step = aufbau(&ctx.core_lowdin, n, cfg)?;
            return Ok((step.orbitals, step.energies.values));
        }
        InitialGuess::Density(d) => {
            if d.dim() != ctx.dim {
                return Err(Error::Dimension(format!(
                    "initial density is {}x{}, basis has dimension {}",
                    d.dim(),
                    d.dim(),
                    ctx.dim
                )));
            }
            let d = DensityMatrix::new(d.as_sym().clone(), n)?;
            let eig = jacobi_eigh(d.as_sym())?;
            OrbitalSet::new(eig.vectors.columns(ctx.dim - n, n).clone_owned())?
        }
        InitialGuess::RandomOrthonormal { seed } => {
            let mut r = rng::stream(*seed, rng::STREAM_INITIAL_GUESS);
            OrbitalSet::new(rng::random_orthonormal(&mut r, ctx.dim, n))?
        }
    };
    let h = ctx.core_lowdin.as_matrix();
    let energies = phi.coeffs().column_iter().map(|c| c.dot(&(h * c))).collect();
    Ok((phi, energies))
}

/// `(Σ_i ‖u_i‖² + ‖T u_i‖²)^{1/2}` on coefficient columns.
pub fn h_norm(u: &Matrix, kinetic: &SymMatrix) -> f64 {
    (u.norm_squared() + (kinetic.as_matrix() * u).norm_squared()).sqrt()
}

fn moment_norms(phi: &OrbitalSet, ctx: &BasisContext) -> Option<Vec<f64>> {
    let grid = ctx.grid.as_ref()?;
    Some(
        phi.coeffs()
            .column_iter()
            .map(|c| {
                c.iter()
                    .zip(&grid.nodes)
                    .map(|(ci, x)| (1.0 + x * x) * ci * ci)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect(),
    )
}

fn kinetic_norms(phi: &OrbitalSet, ctx: &BasisContext) -> Vec<f64> {
    let t = ctx.kinetic_lowdin.as_matrix();
    phi.coeffs()
        .column_iter()
        .map(|c| c.dot(&(t * c)).max(0.0).sqrt())
        .collect()
}

/// Per-parity state of the alignment chain: `Ã_{j−2}` and `A⁺_j` for the
/// newest iterate `j` of that parity.
#[derive(Debug, Clone, Default)]
struct ChainState {
    pending: Option<(Matrix, Matrix)>,
}

/// Runs the plain Roothaan iteration.
pub fn run_scf(ctx: &BasisContext, cfg: &ScfConfig) -> Result<(ScfTrace, FixedPointReport)> {
    cfg.validate()?;
    let n = ctx.occupied;
    let (phi0, e0) = initial_orbitals(ctx, cfg)?;
    let d0 = density_from_orbitals(&phi0)?;

    let mut trace = ScfTrace {
        records: Vec::new(),
        initial_energies: e0.clone(),
        occupied: n,
        converged: false,
        warnings: Vec::new(),
    };

    // Φ^{k−1}, Φ^k and their densities, aligned orbitals Ξ; index 1 is newest.
    let mut phis = [phi0.clone(), phi0.clone()];
    let mut dens = [d0.clone(), d0];
    let mut xis = [phi0.clone(), phi0];
    let mut energies_k = OrbitalEnergies { values: e0, gap: None };
    let mut odd_energies: Option<Vec<f64>> = None;
    let mut chains = [ChainState::default(), ChainState::default()];
    let mut streak = 0;

    for k in 0..cfg.max_iterations {
        let step = scf_step(&dens[1], ctx, cfg)?;
        let mut flags = step.flags;
        let pe = pair_energy(&dens[1], &step.density, ctx);
        let he = hf_energy(&dens[1], ctx);
        let step_distance = hs_distance(&step.density, &dens[1]);
        let alpha = (k >= 1).then(|| hs_distance(&step.density, &dens[0]));
        let residual = residual_map(&phis[1], &step.orbitals, &energies_k, &step.energies, ctx).norm();

        let (xi_next, aligned_step) = if k >= 1 {
            let pair = align_orbitals(&step.orbitals, &phis[0])?;
            let parity = (k + 1) % 2;
            let mut tilde = match chains[parity].pending.take() {
                None => pair.a2.transpose(),
                Some((tilde_prev, plus)) => alignment_chain_update(&tilde_prev, &plus, &pair.a2),
            };
            let defect = orthogonality_defect(&tilde);
            if defect > CHAIN_DEFECT_LIMIT {
                tilde = nearest_orthogonal(&tilde)?;
                flags |= FLAG_CHAIN_REORTHONORMALIZED;
                trace.warnings.push(format!(
                    "alignment chain re-orthonormalized at k = {k} (defect {defect:e})"
                ));
            }
            let a_next = &tilde * &pair.a;
            chains[parity].pending = Some((tilde, pair.a));
            let xi = step.orbitals.rotated(&a_next);
            let diff = xi.coeffs() - xis[0].coeffs();
            let norm = h_norm(&diff, &ctx.kinetic_lowdin);
            (xi, Some(norm))
        } else {
            (step.orbitals.clone(), None)
        };

        trace.records.push(IterationRecord {
            k,
            energies: step.energies.clone(),
            pair_energy: pe,
            hf_energy: he,
            step_distance,
            alpha,
            residual_norm: residual,
            aligned_step,
            moments: moment_norms(&step.orbitals, ctx),
            kinetic_norms: kinetic_norms(&step.orbitals, ctx),
            flags,
        });

        if (k + 1) % 2 == 1 {
            odd_energies = Some(step.energies.values.clone());
        }
        energies_k = step.energies;
        phis = [std::mem::replace(&mut phis[1], step.orbitals.clone()), step.orbitals];
        dens = [std::mem::replace(&mut dens[1], step.density.clone()), step.density];
        xis = [std::mem::replace(&mut xis[1], xi_next.clone()), xi_next];

        if alpha.is_some_and(|a| a <= cfg.convergence_threshold) {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= 3 && trace.records.len() >= cfg.min_iterations {
            trace.converged = true;
            break;
        }
    }

    // newest iterate has index K = len; order the last two by parity
    let newest = trace.records.len();
    let (even, odd) = if newest.is_multiple_of(2) {
        (xis[1].clone(), xis[0].clone())
    } else {
        (xis[0].clone(), xis[1].clone())
    };
    let mut report = classify_fixed_point(&even, &odd, ctx, cfg)?;
    report.energy_mismatch = odd_energies.map(|odd| {
        odd.iter()
            .zip(&report.canonical_energies.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    if !trace.converged {
        report.verdict = Verdict::Undetermined;
    }
    Ok((trace, report))
}

/// Classifies the pair of limits `(Ξ^∞, Ξ̃^∞)`.
pub fn classify_fixed_point(
    even: &OrbitalSet,
    odd: &OrbitalSet,
    ctx: &BasisContext,
    cfg: &ScfConfig,
) -> Result<FixedPointReport> {
    let even_density = density_from_orbitals(even)?;
    let odd_density = density_from_orbitals(odd)?;
    let canonical = scf_step(&even_density, ctx, cfg)?;

    let to_canonical = align_orbitals(odd, &canonical.orbitals)?;
    let alignment_defect = to_canonical.aligned_distance(odd, &canonical.orbitals);

    let relation = svd_small(&orbital_overlap(even, odd))?;
    let sigma_min = relation.singular.last().copied().unwrap_or(0.0);
    let unitary_relation_defect = (1.0 - sigma_min).max(0.0);

    let (hf_residual, verdict) = if unitary_relation_defect <= cfg.relation_tolerance {
        let f = build_fock(&canonical.density, ctx);
        let c = canonical.orbitals.coeffs();
        let mut r = f.as_matrix() * c;
        for (i, &e) in canonical.energies.values.iter().enumerate() {
            r.column_mut(i).axpy(-e, &c.column(i), 1.0);
        }
        let res = r.norm();
        let v = if res <= cfg.hf_residual_tolerance {
            Verdict::ConvergedHfSolution
        } else {
            Verdict::Undetermined
        };
        (Some(res), v)
    } else {
        (None, Verdict::TwoCycleOscillation)
    };

    Ok(FixedPointReport {
        even_limit: even.clone(),
        odd_limit: odd.clone(),
        even_density,
        odd_density,
        limit_gap: canonical.energies.gap,
        canonical_orbitals: canonical.orbitals,
        canonical_energies: canonical.energies,
        alignment_defect,
        unitary_relation_defect,
        hf_residual,
        energy_mismatch: None,
        degeneracy_tolerance: cfg.tie_tolerance,
        verdict,
    })
}
