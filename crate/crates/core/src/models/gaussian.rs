use std::f64::consts::PI;

use super::{distance, Backend, BasisContext, Contraction, Geometry, ModelOptions, TwoElectron};
use crate::error::{Error, Result};
use crate::numerics::{boys_f0, Matrix, SymMatrix};

/// Normalized contracted s-function centred at `center`, stored as
/// `(exponent, coefficient × primitive norm)` so that integrals run over bare
/// Gaussians `exp(−α|r−A|²)`.
#[derive(Debug, Clone)]
struct Function {
    center: [f64; 3],
    primitives: Vec<(f64, f64)>,
}

fn gaussian_product(a: f64, ca: &[f64; 3], b: f64, cb: &[f64; 3]) -> (f64, [f64; 3], f64) {
    let p = a + b;
    let center = [
        (a * ca[0] + b * cb[0]) / p,
        (a * ca[1] + b * cb[1]) / p,
        (a * ca[2] + b * cb[2]) / p,
    ];
    let r2 = distance(ca, cb).powi(2);
    (p, center, (-a * b / p * r2).exp())
}

fn overlap_prim(a: f64, ca: &[f64; 3], b: f64, cb: &[f64; 3]) -> f64 {
    let (p, _, pre) = gaussian_product(a, ca, b, cb);
    (PI / p).powf(1.5) * pre
}

/// `⟨g_a| −Δ |g_b⟩`.
fn laplacian_prim(a: f64, ca: &[f64; 3], b: f64, cb: &[f64; 3]) -> f64 {
    let mu = a * b / (a + b);
    let r2 = distance(ca, cb).powi(2);
    2.0 * mu * (3.0 - 2.0 * mu * r2) * overlap_prim(a, ca, b, cb)
}

/// `⟨g_a| −Z/|r−C| |g_b⟩`.
fn nuclear_prim(a: f64, ca: &[f64; 3], b: f64, cb: &[f64; 3], z: f64, c: &[f64; 3]) -> f64 {
    let (p, pc, pre) = gaussian_product(a, ca, b, cb);
    -z * 2.0 * PI / p * pre * boys_f0(p * distance(&pc, c).powi(2))
}

fn eri_prim(
    (a, ca): (f64, &[f64; 3]),
    (b, cb): (f64, &[f64; 3]),
    (c, cc): (f64, &[f64; 3]),
    (d, cd): (f64, &[f64; 3]),
) -> f64 {
    let (p, pp, pre_ab) = gaussian_product(a, ca, b, cb);
    let (q, qq, pre_cd) = gaussian_product(c, cc, d, cd);
    let t = p * q / (p + q) * distance(&pp, &qq).powi(2);
    2.0 * PI.powf(2.5) / (p * q * (p + q).sqrt()) * pre_ab * pre_cd * boys_f0(t)
}

fn contract2(f: &Function, g: &Function, prim: impl Fn(f64, &[f64; 3], f64, &[f64; 3]) -> f64) -> f64 {
    let mut s = 0.0;
    for &(a, ca) in &f.primitives {
        for &(b, cb) in &g.primitives {
            s += ca * cb * prim(a, &f.center, b, &g.center);
        }
    }
    s
}

fn normalize(center: [f64; 3], contraction: &Contraction) -> Function {
    let primitives: Vec<(f64, f64)> = contraction
        .primitives
        .iter()
        .map(|&(alpha, coef)| (alpha, coef * (2.0 * alpha / PI).powf(0.75)))
        .collect();
    let mut f = Function { center, primitives };
    let self_overlap = contract2(&f, &f, overlap_prim);
    let scale = self_overlap.sqrt().recip();
    for p in &mut f.primitives {
        p.1 *= scale;
    }
    f
}

/// Closed-form s-Gaussian integrals for `geom`; `shells[l]` lists the
/// contractions placed on nucleus `l`.
pub fn build_gaussian_backend(
    geom: &Geometry,
    shells: &[Vec<Contraction>],
    options: ModelOptions,
) -> Result<BasisContext> {
    geom.validate()?;
    options.validate()?;
    if geom.nuclei.is_empty() {
        return Err(Error::InvalidGeometry("the gaussian backend needs at least one nucleus".into()));
    }
    if shells.len() != geom.nuclei.len() {
        return Err(Error::Dimension(format!(
            "{} shell lists for {} nuclei",
            shells.len(),
            geom.nuclei.len()
        )));
    }
    let mut functions = Vec::new();
    for (nucleus, list) in geom.nuclei.iter().zip(shells) {
        if list.is_empty() {
            return Err(Error::param("basis", "every nucleus needs at least one contracted function"));
        }
        for c in list {
            if c.primitives.is_empty() || c.primitives.iter().any(|&(a, _)| !(a > 0.0)) {
                return Err(Error::param("basis", "contractions need positive exponents"));
            }
            functions.push(normalize(nucleus.position, c));
        }
    }

    let m = functions.len();
    let mut s = Matrix::zeros(m, m);
    let mut t = Matrix::zeros(m, m);
    let mut v = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let (fi, fj) = (&functions[i], &functions[j]);
            let sij = if i == j { 1.0 } else { contract2(fi, fj, overlap_prim) };
            let tij = options.kinetic_factor * contract2(fi, fj, laplacian_prim);
            let mut vij = 0.0;
            for n in &geom.nuclei {
                vij += contract2(fi, fj, |a, ca, b, cb| nuclear_prim(a, ca, b, cb, n.charge, &n.position));
            }
            s[(i, j)] = sij;
            s[(j, i)] = sij;
            t[(i, j)] = tij;
            t[(j, i)] = tij;
            v[(i, j)] = vij;
            v[(j, i)] = vij;
        }
    }

    let eri = eri_tensor(&functions);

    let mut repulsion = 0.0;
    for (i, a) in geom.nuclei.iter().enumerate() {
        for b in &geom.nuclei[i + 1..] {
            repulsion += a.charge * b.charge / distance(&a.position, &b.position);
        }
    }

    let kinetic = SymMatrix::symmetrize(t);
    let core = kinetic.add(&SymMatrix::symmetrize(v));
    BasisContext::assemble(
        Backend::Gaussian,
        SymMatrix::symmetrize(s),
        core,
        kinetic,
        eri,
        None,
        options,
        geom.electron_count,
        repulsion,
    )
}

/// Dense `(ij|kl)`, computed once per eight-fold symmetry class.
fn eri_tensor(functions: &[Function]) -> TwoElectron {
    let m = functions.len();
    let mut values = vec![0.0; m * m * m * m];
    let idx = |i: usize, j: usize, k: usize, l: usize| ((i * m + j) * m + k) * m + l;
    for i in 0..m {
        for j in 0..=i {
            for k in 0..m {
                for l in 0..=k {
                    if i * (i + 1) / 2 + j < k * (k + 1) / 2 + l {
                        continue;
                    }
                    let (fi, fj, fk, fl) = (&functions[i], &functions[j], &functions[k], &functions[l]);
                    let mut sum = 0.0;
                    for &(a, ca) in &fi.primitives {
                        for &(b, cb) in &fj.primitives {
                            for &(c, cc) in &fk.primitives {
                                for &(d, cd) in &fl.primitives {
                                    sum += ca * cb * cc * cd
                                        * eri_prim(
                                            (a, &fi.center),
                                            (b, &fj.center),
                                            (c, &fk.center),
                                            (d, &fl.center),
                                        );
                                }
                            }
                        }
                    }
                    for (p, q, r, s) in [(i, j, k, l), (k, l, i, j)] {
                        values[idx(p, q, r, s)] = sum;
                        values[idx(q, p, r, s)] = sum;
                        values[idx(p, q, s, r)] = sum;
                        values[idx(q, p, s, r)] = sum;
                    }
                }
            }
        }
    }
    TwoElectron::Tensor { dim: m, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{BasisLibrary, Nucleus, Occupation};
    use crate::testutil::adaptive_simpson;

    fn sto3g() -> BasisLibrary {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sto-3g.basis");
        BasisLibrary::load(&path).unwrap()
    }

    fn molecule(nuclei: &[(f64, f64)], electrons: usize) -> Geometry {
        Geometry {
            nuclei: nuclei
                .iter()
                .map(|&(z, x)| Nucleus { charge: z, position: [0.0, 0.0, x] })
                .collect(),
            electron_count: electrons,
        }
    }

    fn build(geom: &Geometry, options: ModelOptions) -> BasisContext {
        let charges: Vec<f64> = geom.nuclei.iter().map(|n| n.charge).collect();
        build_gaussian_backend(geom, &sto3g().shells_for(&charges).unwrap(), options).unwrap()
    }

    #[test]
    fn hydrogen_self_overlap_is_one() {
        let ctx = build(&molecule(&[(1.0, 0.0)], 1), ModelOptions::default());
        assert!((ctx.overlap[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn h2_overlap_is_symmetric_and_bounded() {
        let ctx = build(&molecule(&[(1.0, 0.0), (1.0, 1.4)], 2), ModelOptions::default());
        let s12 = ctx.overlap[(0, 1)];
        assert_eq!(s12, ctx.overlap[(1, 0)]);
        assert!(s12 > 0.0 && s12 < 1.0);
        let x = &ctx.orthonormalizer;
        let w = x.transpose() * ctx.overlap.as_matrix() * x;
        assert!((w - Matrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn h2_sto3g_reference_integrals() {
        // Szabo-Ostlund table values at R = 1.4 bohr, chemistry kinetic convention
        let options = ModelOptions {
            kinetic_factor: 0.5,
            occupation: Occupation::ClosedShell,
            ..ModelOptions::default()
        };
        let ctx = build(&molecule(&[(1.0, 0.0), (1.0, 1.4)], 2), options);
        assert!((ctx.overlap[(0, 1)] - 0.6593).abs() < 1e-4);
        assert!((ctx.core[(0, 0)] + 1.1204).abs() < 1e-4);
        assert!((ctx.core[(0, 1)] + 0.9584).abs() < 1e-4);
        assert!((ctx.eri.element(0, 0, 0, 0) - 0.7746).abs() < 1e-4);
        assert!((ctx.eri.element(0, 0, 1, 1) - 0.5697).abs() < 1e-4);
        assert!((ctx.eri.element(1, 0, 0, 0) - 0.4441).abs() < 1e-4);
        assert!((ctx.eri.element(1, 0, 1, 0) - 0.2970).abs() < 1e-4);
        assert!((ctx.nuclear_repulsion - 1.0 / 1.4).abs() < 1e-15);
    }

    #[test]
    fn hydrogen_core_matches_radial_quadrature() {
        for &c in &[1.0, 0.5] {
            let options = ModelOptions { kinetic_factor: c, ..ModelOptions::default() };
            let ctx = build(&molecule(&[(1.0, 0.0)], 1), options);
            let prims = &sto3g().elements["H"][0].primitives;
            let g = |r: f64| -> f64 {
                prims
                    .iter()
                    .map(|&(a, d)| d * (2.0 * a / PI).powf(0.75) * (-a * r * r).exp())
                    .sum()
            };
            let dg = |r: f64| -> f64 {
                prims
                    .iter()
                    .map(|&(a, d)| -2.0 * a * r * d * (2.0 * a / PI).powf(0.75) * (-a * r * r).exp())
                    .sum()
            };
            // unit panels so the adaptive rule cannot skip the peak
            let radial = |f: &dyn Fn(f64) -> f64| -> f64 {
                4.0 * PI * (0..16).map(|i| adaptive_simpson(f, i as f64, i as f64 + 1.0, 1e-15)).sum::<f64>()
            };
            let norm = radial(&|r| r * r * g(r) * g(r));
            let energy = radial(&|r| c * r * r * dg(r) * dg(r) - r * g(r) * g(r));
            let h11 = energy / norm;
            assert!((ctx.core[(0, 0)] - h11).abs() < 1e-8, "c={c}: {} vs {h11}", ctx.core[(0, 0)]);
        }
    }

    #[test]
    fn eri_eightfold_symmetry() {
        let ctx = build(&molecule(&[(2.0, 0.0), (1.0, 1.46), (1.0, -2.1)], 2), ModelOptions::default());
        let m = ctx.dim;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    for l in 0..m {
                        let x = ctx.eri.element(i, j, k, l);
                        for y in [
                            ctx.eri.element(j, i, k, l),
                            ctx.eri.element(i, j, l, k),
                            ctx.eri.element(k, l, i, j),
                            ctx.eri.element(l, k, j, i),
                        ] {
                            assert!((x - y).abs() < 1e-15);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn contraction_is_linear_and_symmetric() {
        let ctx = build(&molecule(&[(2.0, 0.0), (1.0, 1.46)], 2), ModelOptions::default());
        let d1 = SymMatrix::symmetrize(Matrix::from_row_slice(2, 2, &[0.7, 0.2, 0.2, 0.3]));
        let d2 = SymMatrix::symmetrize(Matrix::from_row_slice(2, 2, &[-0.1, 0.5, 0.5, 0.9]));
        let (j1, k1) = ctx.coulomb_exchange(&d1);
        let (j2, k2) = ctx.coulomb_exchange(&d2);
        let (j, k) = ctx.coulomb_exchange(&d1.scaled(1.5).add(&d2.scaled(-0.25)));
        assert!((j.as_matrix() - (j1.as_matrix() * 1.5 - j2.as_matrix() * 0.25)).amax() < 1e-10);
        assert!((k.as_matrix() - (k1.as_matrix() * 1.5 - k2.as_matrix() * 0.25)).amax() < 1e-10);
        let (j0, k0) = ctx.coulomb_exchange(&SymMatrix::zeros(2));
        assert_eq!(j0.frobenius_norm(), 0.0);
        assert_eq!(k0.frobenius_norm(), 0.0);
    }

    #[test]
    fn rejects_duplicate_nuclei_and_unsupported_elements() {
        let geom = molecule(&[(1.0, 0.0), (1.0, 0.0)], 2);
        let shells = sto3g().shells_for(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            build_gaussian_backend(&geom, &shells, ModelOptions::default()),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(sto3g().shells_for(&[2.5]).is_err());
    }

    #[test]
    fn rejects_linear_dependence() {
        let geom = molecule(&[(1.0, 0.0), (1.0, 1e-6)], 2);
        let shells = sto3g().shells_for(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            build_gaussian_backend(&geom, &shells, ModelOptions::default()),
            Err(Error::LinearDependence(_))
        ));
    }
}
