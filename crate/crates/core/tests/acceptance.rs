//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown
//! by `cargo test`; the process fails if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use scflab::diagnostics::{
    check_descent, check_lojasiewicz, check_series, check_theorem1_cauchy, check_ubound, check_wpbound,
    probe_lojasiewicz, series_alphas,
};
use scflab::hf::{build_g, density_from_orbitals, hf_energy, hs_distance, orbital_overlap, DensityMatrix, OrbitalSet};
use scflab::io::{cmd_run, execute_run, load_config, RunConfig};
use scflab::models::{build_gaussian_backend, BasisContext, BasisLibrary, Geometry, ModelOptions, Nucleus, Occupation};
use scflab::numerics::SymMatrix;
use scflab::rng::{random_orthonormal, stream};
use scflab::scf::{align_orbitals, run_scf, FixedPointReport, ScfTrace, Verdict};

const CONVERGING: [&str; 4] = ["h2.ini", "heh+.ini", "grid1d-one-center.ini", "grid1d-two-center.ini"];
const OSCILLATING: &str = "grid1d-oscillation.ini";

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

struct Run {
    name: &'static str,
    ctx: BasisContext,
    trace: ScfTrace,
    report: FixedPointReport,
    seconds: f64,
}

fn run(name: &'static str) -> Run {
    let cfg = load_config(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
    let ctx = cfg.build_context().unwrap();
    let scf = cfg.scf_config(&ctx).unwrap();
    let t = Instant::now();
    let (trace, report) = run_scf(&ctx, &scf).unwrap();
    Run { name, ctx, trace, report, seconds: t.elapsed().as_secs_f64() }
}

struct Outcome {
    results: Vec<(usize, bool, String)>,
}

impl Outcome {
    fn record(&mut self, criterion: usize, passed: bool, details: String) {
        println!("criterion {criterion:>2}: {} {details}", if passed { "PASS" } else { "FAIL" });
        self.results.push((criterion, passed, details));
    }
}

/// `(pq|rs)` in the Löwdin frame, by explicit four-index transformation.
fn lowdin_eri(ctx: &BasisContext) -> Vec<f64> {
    let m = ctx.dim;
    let x = &ctx.orthonormalizer;
    let mut out = vec![0.0; m * m * m * m];
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    let mut v = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            for c in 0..m {
                                for d in 0..m {
                                    v += x[(a, p)] * x[(b, q)] * x[(c, r)] * x[(d, s)] * ctx.eri.element(a, b, c, d);
                                }
                            }
                        }
                    }
                    out[((p * m + q) * m + r) * m + s] = v;
                }
            }
        }
    }
    out
}

/// Brute-force minimum of `Ê` over rank-one projectors `D = v vᵀ`,
/// `v = (cos θ, sin θ)`, for a two-function closed-shell basis.
fn h2_oracle(ctx: &BasisContext) -> (f64, f64) {
    assert_eq!(ctx.dim, 2);
    let x = &ctx.orthonormalizer;
    let h = x.transpose() * ctx.core.as_matrix() * x;
    let eri = lowdin_eri(ctx);
    let g = |p: usize, q: usize, r: usize, s: usize| eri[((p * 2 + q) * 2 + r) * 2 + s];
    let weight = ctx.options.occupation.coulomb_weight();
    let scale = ctx.options.interaction_scale;
    let energy = |theta: f64| {
        let v = [theta.cos(), theta.sin()];
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                e1 += h[(p, q)] * v[p] * v[q];
                for r in 0..2 {
                    for s in 0..2 {
                        let d = v[p] * v[q] * v[r] * v[s];
                        e2 += (weight * g(p, q, r, s) - g(p, r, q, s)) * d;
                    }
                }
            }
        }
        e1 + 0.5 * scale * e2
    };
    let step = 1e-6;
    let steps = (std::f64::consts::PI / step).ceil() as usize;
    let (mut best, mut best_theta) = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let theta = i as f64 * step;
        let e = energy(theta);
        if e < best {
            best = e;
            best_theta = theta;
        }
    }
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (best_theta - step, best_theta + step);
    while b - a > 1e-13 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if energy(c) < energy(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let theta = 0.5 * (a + b);
    (energy(theta).min(best), theta)
}

fn criterion1(out: &mut Outcome, h2: &Run) {
    let (oracle, theta) = h2_oracle(&h2.ctx);
    let engine = hf_energy(&h2.report.even_density, &h2.ctx);
    let diff = (engine - oracle).abs();
    let ok = h2.report.verdict == Verdict::ConvergedHfSolution && h2.trace.converged && diff <= 1e-8 && h2.seconds < 1.0;
    out.record(
        1,
        ok,
        format!(
            "H2/STO-3G {}: Ê engine {engine:.12} vs oracle {oracle:.12} (θ = {theta:.9}), |Δ| = {diff:.2e} ≤ 1e-8, run {:.3} s < 1 s",
            h2.report.verdict.as_str(),
            h2.seconds
        ),
    );
}

fn criterion2(out: &mut Outcome, runs: &[&Run]) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let c = check_descent(&r.trace);
        ok &= c.passed;
        parts.push(format!("{} {} ({:.1e})", r.name, if c.passed { "ok" } else { "fails" }, c.worst_margin));
    }
    out.record(2, ok && runs.len() >= 4, format!("descent on {} configs: {}", runs.len(), parts.join(", ")));
}

fn criterion3(out: &mut Outcome, runs: &[&Run]) {
    let t = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let c = check_wpbound(&r.trace);
        ok &= c.passed;
        parts.push(format!("{} {} ({:.1e})", r.name, if c.passed { "ok" } else { "fails" }, c.worst_margin));
    }
    let total = t.elapsed().as_secs_f64() + runs.iter().map(|r| r.seconds).sum::<f64>();
    out.record(
        3,
        ok && total < 5.0,
        format!("wpbound slack ≥ −1e-10: {}; runs + checks {total:.2} s < 5 s", parts.join(", ")),
    );
}

fn criterion4(out: &mut Outcome) {
    let lemma = check_ubound(1000, 20, 5, 0).unwrap();
    let mut r = stream(2024, 0);
    let mut worst_identity: f64 = 0.0;
    let mut worst_hs: f64 = 0.0;
    let mut worst_inequality = f64::INFINITY;
    for _ in 0..1000 {
        let m = r.gen_range(1..=20);
        let n = r.gen_range(1..=5.min(m));
        let phi = OrbitalSet::new(random_orthonormal(&mut r, m, n)).unwrap();
        let phi2 = OrbitalSet::new(random_orthonormal(&mut r, m, n)).unwrap();
        let pair = align_orbitals(&phi, &phi2).unwrap();
        let rotated = &pair.a * phi.coeffs().transpose() - &pair.a2 * phi2.coeffs().transpose();
        let aligned_sq = rotated.norm_squared();
        let nf = n as f64;
        worst_identity = worst_identity.max((aligned_sq - 2.0 * (nf - pair.singular.iter().sum::<f64>())).abs());
        let hs = hs_distance(&density_from_orbitals(&phi).unwrap(), &density_from_orbitals(&phi2).unwrap());
        worst_hs = worst_hs.max((hs * hs - (2.0 * nf - 2.0 * orbital_overlap(&phi, &phi2).norm_squared())).abs());
        worst_inequality = worst_inequality.min(hs - aligned_sq.sqrt());
    }
    let ok = lemma.passed && worst_identity <= 1e-10 && worst_hs <= 1e-10 && worst_inequality >= -1e-10;
    out.record(
        4,
        ok,
        format!(
            "ubound lemma check {} (worst slack {:.1e}); independent 1000 pairs: |‖AΦ−ÃΦ̃‖² − 2(N−Σλ)| ≤ {worst_identity:.1e}, |hs² − (2N−2‖B‖²)| ≤ {worst_hs:.1e}, min(‖D−D̃‖ − ‖AΦ−ÃΦ̃‖) = {worst_inequality:.1e}",
            if lemma.passed { "passes" } else { "fails" },
            lemma.worst_margin
        ),
    );
}

fn criterion5(out: &mut Outcome, runs: &[Run]) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let c = check_theorem1_cauchy(&r.trace);
        let alpha = r.trace.records.last().and_then(|x| x.alpha).unwrap_or(f64::NAN);
        let step = r.trace.records.last().and_then(|x| x.aligned_step).unwrap_or(f64::NAN);
        let pass = c.passed && alpha < 1e-9 && step < 1e-6;
        ok &= pass;
        parts.push(format!("{} α {alpha:.1e} ‖ΔΞ‖_H {step:.1e}{}", r.name, if pass { "" } else { " FAILS" }));
    }
    out.record(5, ok, format!("Cauchy desk-check on converging configs: {}", parts.join(", ")));
}

fn criterion6(out: &mut Outcome, converging: &[Run], osc: &Run) {
    let tail = &osc.trace.records[osc.trace.len().saturating_sub(50)..];
    let alpha_max = tail.iter().map(|r| r.alpha.unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
    let step_min = tail.iter().map(|r| r.step_distance).fold(f64::INFINITY, f64::min);
    let osc_ok = tail.len() == 50
        && alpha_max < 1e-8
        && step_min > 0.05
        && osc.report.verdict == Verdict::TwoCycleOscillation
        && osc.report.unitary_relation_defect > 0.01;
    let mut ok = osc_ok;
    let mut parts = vec![format!(
        "{}: {} over last 50, max α {alpha_max:.1e} < 1e-8, min step {step_min:.3} > 0.05, defect {:.3} > 0.01",
        osc.name,
        osc.report.verdict.as_str(),
        osc.report.unitary_relation_defect
    )];
    for r in converging {
        let res = r.report.hf_residual.unwrap_or(f64::INFINITY);
        let mis = r.report.energy_mismatch.unwrap_or(f64::INFINITY);
        let pass = r.report.verdict == Verdict::ConvergedHfSolution && res <= 1e-8 && mis <= 1e-8;
        ok &= pass;
        parts.push(format!("{} {} residual {res:.1e} ε-mismatch {mis:.1e}", r.name, r.report.verdict.as_str()));
    }
    out.record(6, ok, parts.join("; "));
}

fn criterion7(out: &mut Outcome, runs: &[Run]) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let fit = probe_lojasiewicz(&r.trace, 0.25).unwrap();
        let check = check_lojasiewicz(&fit);
        let finite = fit.ratios.iter().all(|x| x.is_finite());
        let stable = fit.stability.is_none_or(|s| s <= 10.0);
        ok &= check.passed && finite && stable;
        parts.push(match fit.stability {
            Some(s) => format!("{} κ {:.3} max/median {s:.3} over {} ratios", r.name, fit.kappa_estimate, fit.ratios.len()),
            None => format!("{} no resolvable window (exact after the first step; κ = 0)", r.name),
        });
    }
    out.record(7, ok, parts.join("; "));
}

fn criterion8(out: &mut Outcome, runs: &[&Run]) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in runs {
        let c = check_series(&series_alphas(&r.trace)).unwrap();
        ok &= c.passed;
        parts.push(format!("{} {}", r.name, if c.passed { "ok" } else { "fails" }));
    }
    let geometric: Vec<f64> = (1..=80).map(|k| 2f64.powi(-k)).collect();
    let g = check_series(&geometric).unwrap();
    let harmonic: Vec<f64> = (1..=2000).map(|k| 1.0 / k as f64).collect();
    let h = check_series(&harmonic).unwrap();
    let synthetic = g.passed && g.details.contains("both flat") && h.passed && h.details.contains("hypothesis not satisfied");
    out.record(
        8,
        ok && synthetic,
        format!("partial-sum bound on every run: {}; geometric: {}; harmonic: {}", parts.join(", "), g.details, h.details),
    );
}

fn g_positivity(ctx: &BasisContext, seed: u64) -> f64 {
    let mut r = stream(seed, 0);
    let m = ctx.dim;
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let n = r.gen_range(1..m.min(6));
        let c = random_orthonormal(&mut r, m, n);
        let d = DensityMatrix::unchecked(SymMatrix::symmetrize(&c * c.transpose()));
        let g: DMatrix<f64> = build_g(&d, ctx).into_matrix();
        for _ in 0..100 {
            let mut w = DVector::from_fn(m, |_, _| r.gen_range(-1.0..1.0));
            w /= w.norm();
            worst = worst.min(w.dot(&(&g * &w)));
        }
    }
    worst
}

/// Linear H4 in STO-3G, four basis functions.
fn h4_chain() -> BasisContext {
    let nuclei = (0..4).map(|i| Nucleus { charge: 1.0, position: [0.0, 0.0, 1.6 * i as f64] }).collect();
    let geom = Geometry { nuclei, electron_count: 4 };
    let lib = BasisLibrary::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sto-3g.basis")).unwrap();
    let options = ModelOptions { occupation: Occupation::ClosedShell, ..ModelOptions::default() };
    build_gaussian_backend(&geom, &lib.shells_for(&[1.0; 4]).unwrap(), options).unwrap()
}

fn criterion9(out: &mut Outcome, gaussian: &BasisContext, grid: &BasisContext) {
    let wg = g_positivity(gaussian, 91);
    let wd = g_positivity(grid, 92);
    out.record(
        9,
        wg >= -1e-12 && wd >= -1e-12,
        format!("min ⟨w, G(D)w⟩ over 100 densities × 100 vectors: gaussian H4 chain (M = {}) {wg:.3e}, grid1d two-center (M = {}) {wd:.3e}, bound −1e-12", gaussian.dim, grid.dim),
    );
}

fn criterion10(out: &mut Outcome) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["h2.ini", "grid1d-two-center.ini"] {
        let mut cfg: RunConfig = load_config(&config_path(name)).unwrap();
        cfg.set_seed(12345);
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let files: Vec<Vec<u8>> = dirs
            .iter()
            .map(|d| {
                let o = cmd_run(&cfg, d.path()).unwrap();
                std::fs::read(o.trace_path.unwrap()).unwrap()
            })
            .collect();
        let same = files[0] == files[1] && !files[0].is_empty();
        ok &= same;
        parts.push(format!("{name} {} bytes {}", files[0].len(), if same { "identical" } else { "DIFFER" }));
    }
    let mut cfg = load_config(&config_path("grid1d-two-center.ini")).unwrap();
    cfg.scf.initial_guess = scflab::scf::InitialGuess::RandomOrthonormal { seed: 77 };
    cfg.guess = scflab::io::GuessSpec::Random;
    cfg.set_seed(77);
    let a = execute_run(&cfg).unwrap().trace_text;
    let b = execute_run(&cfg).unwrap().trace_text;
    ok &= a == b;
    parts.push(format!("random guess seed 77 {}", if a == b { "identical" } else { "DIFFER" }));
    out.record(10, ok, parts.join(", "));
}

fn main() {
    let started = Instant::now();
    let mut out = Outcome { results: Vec::new() };
    let converging: Vec<Run> = CONVERGING.iter().map(|n| run(n)).collect();
    let osc = run(OSCILLATING);

    criterion1(&mut out, &converging[0]);
    let every: Vec<&Run> = converging.iter().chain(std::iter::once(&osc)).collect();
    criterion2(&mut out, &every);
    criterion3(&mut out, &every);
    criterion4(&mut out);
    criterion5(&mut out, &converging);
    criterion6(&mut out, &converging, &osc);
    criterion7(&mut out, &converging);
    criterion8(&mut out, &every);
    criterion9(&mut out, &h4_chain(), &converging[3].ctx);
    criterion10(&mut out);

    let failed: Vec<usize> = out.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} criteria pass in {:.2} s",
        out.results.len() - failed.len(),
        out.results.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
