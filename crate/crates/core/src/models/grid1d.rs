use super::{Backend, BasisContext, Geometry, GridInfo, ModelOptions, TwoElectron};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub half_width: f64,
    pub points: usize,
    pub softening: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { half_width: 12.0, points: 256, softening: 1.0 }
    }
}

/// Finite-difference model on `(−L, L)` with Dirichlet walls.
///
/// Interior nodes `x_p = −L + (p+1)Δx`, `Δx = 2L/(n+1)`. Basis functions are
/// node indicators scaled by `1/√Δx`, so `S = I` and `Σ_p D_pp = N`. In that
/// basis a multiplicative potential `u(x)` has matrix `diag(u(x_p))`. The Hartree
/// potential of `D` at `x_p` is `Σ_q w_pq D_qq` because `ρ(x_q)Δx = D_qq`.
pub fn build_grid1d_backend(
    params: GridParams,
    geom: &Geometry,
    options: ModelOptions,
) -> Result<BasisContext> {
    geom.validate()?;
    options.validate()?;
    let GridParams { half_width: l, points: n, softening: a } = params;
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::param("half_width", "must be positive"));
    }
    if n < 16 {
        return Err(Error::param("points", format!("need at least 16 points, got {n}")));
    }
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::param("softening", "must be positive"));
    }
    for (i, nuc) in geom.nuclei.iter().enumerate() {
        let x = nuc.position[0];
        if x <= -l || x >= l {
            return Err(Error::InvalidGeometry(format!(
                "nucleus {i} at {x} lies outside the box (−{l}, {l})"
            )));
        }
    }

    let dx = 2.0 * l / (n + 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|p| -l + (p + 1) as f64 * dx).collect();

    let c = options.kinetic_factor;
    let mut t = Matrix::zeros(n, n);
    for p in 0..n {
        t[(p, p)] = 2.0 * c / (dx * dx);
        if p + 1 < n {
            t[(p, p + 1)] = -c / (dx * dx);
            t[(p + 1, p)] = -c / (dx * dx);
        }
    }
    let mut h = t.clone();
    for (p, &x) in nodes.iter().enumerate() {
        let v: f64 = geom
            .nuclei
            .iter()
            .map(|nuc| -nuc.charge / ((x - nuc.position[0]).powi(2) + a * a).sqrt())
            .sum();
        h[(p, p)] += v;
    }

    let w = Matrix::from_fn(n, n, |p, q| 1.0 / ((nodes[p] - nodes[q]).powi(2) + a * a).sqrt());

    let mut repulsion = 0.0;
    for (i, x) in geom.nuclei.iter().enumerate() {
        for y in &geom.nuclei[i + 1..] {
            repulsion += x.charge * y.charge / ((x.position[0] - y.position[0]).powi(2) + a * a).sqrt();
        }
    }

    BasisContext::assemble(
        Backend::Grid1d,
        SymMatrix::identity(n),
        SymMatrix::symmetrize(h),
        SymMatrix::symmetrize(t),
        TwoElectron::PairKernel(w),
        Some(GridInfo { nodes, spacing: dx, half_width: l, softening: a }),
        options,
        geom.electron_count,
        repulsion,
    )
}
