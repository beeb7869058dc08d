//! Checks of the convergence lemmas on recorded traces. Everything here reads
//! only the trace (plus a seed for the sampled alignment check), so a trace
//! file reproduces every result.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hf::{density_from_orbitals, hs_distance, orbital_overlap, OrbitalSet};
use crate::rng;
use crate::scf::{align_orbitals, ScfTrace, FLAG_UWP_VIOLATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaId {
    Descent,
    Wpbound,
    Ubound,
    Gammabound,
    Hbound,
    Expbound,
    Series,
    Lojasiewicz,
    #[serde(rename = "theorem1-cauchy")]
    Theorem1Cauchy,
}

impl LemmaId {
    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::Descent => "descent",
            LemmaId::Wpbound => "wpbound",
            LemmaId::Ubound => "ubound",
            LemmaId::Gammabound => "gammabound",
            LemmaId::Hbound => "hbound",
            LemmaId::Expbound => "expbound",
            LemmaId::Series => "series",
            LemmaId::Lojasiewicz => "lojasiewicz",
            LemmaId::Theorem1Cauchy => "theorem1-cauchy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheckResult {
    pub lemma_id: LemmaId,
    pub passed: bool,
    /// Most negative slack observed; the check passes iff this is at least
    /// minus its tolerance.
    pub worst_margin: f64,
    /// Iteration or sample index of the worst slack.
    pub location: Option<usize>,
    pub details: String,
    /// Monitored quantity only; a failure does not count against a run.
    pub advisory: bool,
}

impl LemmaCheckResult {
    fn vacuous(lemma_id: LemmaId, details: impl Into<String>) -> Self {
        LemmaCheckResult {
            lemma_id,
            passed: true,
            worst_margin: 0.0,
            location: None,
            details: details.into(),
            advisory: false,
        }
    }
}

/// Running minimum of a slack with its location.
#[derive(Debug, Clone, Copy)]
struct Worst {
    margin: f64,
    location: Option<usize>,
}

impl Worst {
    fn new() -> Self {
        Worst { margin: f64::INFINITY, location: None }
    }

    fn push(&mut self, margin: f64, location: usize) {
        if margin < self.margin || margin.is_nan() {
            self.margin = margin;
            self.location = Some(location);
        }
    }

    fn finish(self, lemma_id: LemmaId, tolerance: f64, details: String) -> LemmaCheckResult {
        let margin = if self.location.is_none() { 0.0 } else { self.margin };
        LemmaCheckResult {
            lemma_id,
            passed: margin >= -tolerance,
            worst_margin: margin,
            location: self.location,
            details,
            advisory: false,
        }
    }
}

pub const DESCENT_RELATIVE_TOLERANCE: f64 = 1e-12;
pub const WPBOUND_TOLERANCE: f64 = 1e-10;
pub const UBOUND_TOLERANCE: f64 = 1e-10;

/// `𝓔(Φ^k, Φ^{k+1})` nonincreasing up to `1e-12·max(1, |𝓔₀|)`.
pub fn check_descent(trace: &ScfTrace) -> LemmaCheckResult {
    if trace.len() < 2 {
        return LemmaCheckResult::vacuous(LemmaId::Descent, "insufficient data: fewer than two records");
    }
    let tol = DESCENT_RELATIVE_TOLERANCE * trace.records[0].pair_energy.abs().max(1.0);
    let mut worst = Worst::new();
    for w in trace.records.windows(2) {
        worst.push(w[0].pair_energy - w[1].pair_energy, w[1].k);
    }
    let details = format!("{} decrements checked, tolerance {tol:e}", trace.len() - 1);
    worst.finish(LemmaId::Descent, tol, details)
}

/// `𝓔_k − 𝓔_{k+1} − ½ γ ‖D^{k+2} − D^k‖₂² ≥ −1e-10` with `γ` the smallest
/// recorded gap.
pub fn check_wpbound(trace: &ScfTrace) -> LemmaCheckResult {
    if trace.len() < 2 {
        return LemmaCheckResult::vacuous(LemmaId::Wpbound, "insufficient data: fewer than two records");
    }
    let (gamma, mut notes) = match trace.min_gap() {
        Some(g) => (g, Vec::new()),
        None => (0.0, vec!["no gap recorded (all orbitals occupied), γ = 0".to_string()]),
    };
    let violations = trace.records.iter().filter(|r| r.flags & FLAG_UWP_VIOLATION != 0).count();
    if violations > 0 {
        notes.push(format!("γ unreliable: {violations} records flag a gap below the floor"));
    }
    let mut worst = Worst::new();
    for w in trace.records.windows(2) {
        let two_step = w[1].alpha.unwrap_or(0.0);
        let slack = w[0].pair_energy - w[1].pair_energy - 0.5 * gamma * two_step * two_step;
        worst.push(slack, w[0].k);
    }
    let mut details = format!("γ_meas = {gamma:e}");
    for n in notes {
        details.push_str("; ");
        details.push_str(&n);
    }
    worst.finish(LemmaId::Wpbound, WPBOUND_TOLERANCE, details)
}

/// Random orthonormal pairs with `M ≤ max_dim`, `N ≤ max_count`, checking
/// `‖AΦ − ÃΦ̃‖² = 2(N − Σλ) ≤ 2(N − Σλ²) = ‖D_Φ − D_Φ̃‖₂²` and
/// `‖AΦ − ÃΦ̃‖ ≤ ‖D_Φ − D_Φ̃‖₂`.
pub fn check_ubound(samples: usize, max_dim: usize, max_count: usize, seed: u64) -> Result<LemmaCheckResult> {
    if samples == 0 {
        return Err(Error::param("ubound_samples", "must be at least 1"));
    }
    if max_dim == 0 || max_count == 0 {
        return Err(Error::param("ubound dimensions", "must be positive"));
    }
    let mut r = rng::stream(seed, rng::STREAM_UBOUND_SAMPLES);
    let mut worst = Worst::new();
    for s in 0..samples {
        let m = r.gen_range(1..=max_dim);
        let n = r.gen_range(1..=max_count.min(m));
        let phi = OrbitalSet::new(rng::random_orthonormal(&mut r, m, n))?;
        let phi2 = OrbitalSet::new(rng::random_orthonormal(&mut r, m, n))?;
        worst.push(ubound_slack(&phi, &phi2)?, s);
    }
    let details = format!("{samples} pairs, M ≤ {max_dim}, N ≤ {max_count}, seed {seed}");
    Ok(worst.finish(LemmaId::Ubound, UBOUND_TOLERANCE, details))
}

/// Smallest slack among the identities and inequalities of the alignment
/// bound for one pair.
pub fn ubound_slack(phi: &OrbitalSet, phi2: &OrbitalSet) -> Result<f64> {
    let n = phi.count() as f64;
    let pair = align_orbitals(phi, phi2)?;
    let aligned = pair.aligned_distance(phi, phi2);
    let linear = 2.0 * (n - pair.singular.iter().sum::<f64>());
    let quadratic = 2.0 * (n - pair.singular.iter().map(|s| s * s).sum::<f64>());
    let hs = hs_distance(&density_from_orbitals(phi)?, &density_from_orbitals(phi2)?);
    let frob = 2.0 * n - 2.0 * orbital_overlap(phi, phi2).norm_squared();
    Ok([
        -(aligned * aligned - linear).abs(),
        quadratic - linear,
        -(quadratic - hs * hs).abs(),
        -(frob - hs * hs).abs(),
        hs - aligned,
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LojasiewiczFit {
    pub mu_estimate: f64,
    pub kappa_estimate: f64,
    /// `|𝓔_k − μ|^{1/2} / ‖F_k‖` over the window.
    pub ratios: Vec<f64>,
    /// First and last record index of the window.
    pub window: Option<(usize, usize)>,
    /// Max over median of the ratios.
    pub stability: Option<f64>,
    pub note: Option<String>,
}

/// Residuals below this are round-off.
pub const LOJASIEWICZ_RESIDUAL_FLOOR: f64 = 1e-14;
/// Energy differences below this fraction of `max(1, |μ|)` are round-off.
pub const LOJASIEWICZ_ENERGY_FLOOR: f64 = 1e-12;

/// Fits `κ` in `|𝓔_k − μ|^{1/2} ≤ κ ‖F_k‖` with `μ` the final pair energy.
///
/// Records whose energy is no longer resolved against `μ` are dropped from
/// the end, then the window is the last `⌈tail_fraction·len⌉` of the rest.
pub fn probe_lojasiewicz(trace: &ScfTrace, tail_fraction: f64) -> Result<LojasiewiczFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::param("tail_fraction", "must lie in (0, 1]"));
    }
    if trace.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "Łojasiewicz probe needs at least two records, trace has {}",
            trace.len()
        )));
    }
    let mu = trace.records.last().expect("nonempty").pair_energy;
    let floor = LOJASIEWICZ_ENERGY_FLOOR * mu.abs().max(1.0);
    let resolved = trace
        .records
        .iter()
        .rposition(|r| (r.pair_energy - mu).abs() > floor)
        .map_or(0, |i| i + 1);
    let take = ((tail_fraction * resolved as f64).ceil() as usize).min(resolved);
    let window_records = &trace.records[resolved - take..resolved];

    let mut ratios = Vec::new();
    let mut excluded = 0;
    for r in window_records {
        if r.residual_norm < LOJASIEWICZ_RESIDUAL_FLOOR {
            excluded += 1;
            continue;
        }
        ratios.push((r.pair_energy - mu).abs().sqrt() / r.residual_norm);
    }
    if ratios.is_empty() {
        return Ok(LojasiewiczFit {
            mu_estimate: mu,
            kappa_estimate: 0.0,
            ratios,
            window: None,
            stability: None,
            note: Some(format!(
                "no resolvable records: energies within {floor:e} of μ or residuals below {LOJASIEWICZ_RESIDUAL_FLOOR:e}; κ reported as 0"
            )),
        });
    }
    let kappa = ratios.iter().cloned().fold(0.0, f64::max);
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
    let stability = (median > 0.0).then(|| kappa / median);
    let note = (excluded > 0).then(|| format!("{excluded} records with residual below {LOJASIEWICZ_RESIDUAL_FLOOR:e} excluded"));
    Ok(LojasiewiczFit {
        mu_estimate: mu,
        kappa_estimate: kappa,
        ratios,
        window: Some((window_records[0].k, window_records[window_records.len() - 1].k)),
        stability,
        note,
    })
}

pub const LOJASIEWICZ_STABILITY_LIMIT: f64 = 10.0;

pub fn check_lojasiewicz(fit: &LojasiewiczFit) -> LemmaCheckResult {
    match fit.stability {
        None => LemmaCheckResult::vacuous(
            LemmaId::Lojasiewicz,
            fit.note.clone().unwrap_or_else(|| "no ratios".into()),
        ),
        Some(s) => LemmaCheckResult {
            lemma_id: LemmaId::Lojasiewicz,
            passed: s.is_finite() && s <= LOJASIEWICZ_STABILITY_LIMIT,
            worst_margin: LOJASIEWICZ_STABILITY_LIMIT - s,
            location: fit.window.map(|w| w.0),
            details: format!("κ = {:e}, max/median = {s:.6}, {} ratios", fit.kappa_estimate, fit.ratios.len()),
            advisory: false,
        },
    }
}

/// Tail sums below this count as converged.
pub const SERIES_FLAT_TOLERANCE: f64 = 1e-12;

fn tail_quarter_sum(terms: &[f64]) -> f64 {
    let q = terms.len().div_ceil(4);
    terms[terms.len() - q..].iter().sum()
}

/// Partial-sum bound `(Σ_{k≤K} α_k)^{1/2} ≤ α₁^{1/2} + (Σ_{k≤K} α_{k+1}²/α_k)^{1/2}`
/// at every `K`, plus the series implication on the observed tail.
pub fn check_series(alphas: &[f64]) -> Result<LemmaCheckResult> {
    if let Some(i) = alphas.iter().position(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidInput(format!("series terms must be positive, entry {i} is {}", alphas[i])));
    }
    if alphas.len() < 2 {
        return Ok(LemmaCheckResult::vacuous(LemmaId::Series, "insufficient data: fewer than two terms"));
    }
    let ratio_terms: Vec<f64> = alphas.windows(2).map(|w| w[1] * w[1] / w[0]).collect();
    let mut worst = Worst::new();
    let mut plain = 0.0;
    let mut ratio = 0.0;
    for k in 0..ratio_terms.len() {
        plain += alphas[k];
        ratio += ratio_terms[k];
        let rhs = alphas[0].sqrt() + ratio.sqrt();
        let slack = (rhs - plain.sqrt()) / rhs.max(1.0);
        worst.push(slack, k + 1);
    }
    let ratio_flat = tail_quarter_sum(&ratio_terms) < SERIES_FLAT_TOLERANCE;
    let plain_flat = tail_quarter_sum(alphas) < SERIES_FLAT_TOLERANCE;
    let mut result = worst.finish(LemmaId::Series, 1e-12, String::new());
    result.details = if !ratio_flat {
        "partial-sum bound checked; hypothesis not satisfied, no claim on convergence".into()
    } else if plain_flat {
        "partial-sum bound checked; ratio series and plain series both flat".into()
    } else {
        result.passed = false;
        "ratio series flat but plain series is not".into()
    };
    Ok(result)
}

/// The positive prefix of the recorded `α_k` (a zero `α` means the iteration
/// has reached an exact fixed point or 2-cycle, after which terms stay zero).
pub fn series_alphas(trace: &ScfTrace) -> Vec<f64> {
    trace
        .records
        .iter()
        .filter_map(|r| r.alpha)
        .take_while(|&a| a > 0.0)
        .collect()
}

pub const BOUNDED_RATIO_LIMIT: f64 = 100.0;

fn bounded_monitor(lemma_id: LemmaId, series: Vec<Vec<f64>>, what: &str) -> LemmaCheckResult {
    let mut worst = Worst::new();
    let mut worst_ratio = 0.0f64;
    for (i, values) in series.iter().enumerate() {
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let finite = values.iter().all(|v| v.is_finite());
        let margin = if finite { BOUNDED_RATIO_LIMIT * min - max } else { f64::NEG_INFINITY };
        worst.push(margin, i);
        if min > 0.0 {
            worst_ratio = worst_ratio.max(max / min);
        }
    }
    let details = format!("{what}: largest max/min over the run {worst_ratio:.6} (limit {BOUNDED_RATIO_LIMIT})");
    worst.finish(lemma_id, 0.0, details)
}

/// Uniform boundedness of the kinetic and moment norms, and the HOMO level
/// against 0.
pub fn check_monitored_bounds(trace: &ScfTrace) -> Vec<LemmaCheckResult> {
    if trace.is_empty() {
        return [LemmaId::Hbound, LemmaId::Expbound, LemmaId::Gammabound]
            .into_iter()
            .map(|id| LemmaCheckResult::vacuous(id, "insufficient data: empty trace"))
            .collect();
    }
    let n = trace.occupied;
    let per_orbital = |get: &dyn Fn(&crate::scf::IterationRecord) -> Option<&Vec<f64>>| -> Option<Vec<Vec<f64>>> {
        let mut out = vec![Vec::with_capacity(trace.len()); n];
        for r in &trace.records {
            let v = get(r)?;
            for (i, x) in v.iter().enumerate() {
                out[i].push(*x);
            }
        }
        Some(out)
    };

    let hbound = bounded_monitor(
        LemmaId::Hbound,
        per_orbital(&|r| Some(&r.kinetic_norms)).expect("kinetic norms are always recorded"),
        "kinetic norms",
    );
    let expbound = match per_orbital(&|r| r.moments.as_ref()) {
        Some(s) => bounded_monitor(LemmaId::Expbound, s, "moment norms"),
        None => LemmaCheckResult::vacuous(LemmaId::Expbound, "not applicable: trace has no moment data"),
    };

    let mut worst = Worst::new();
    for r in &trace.records {
        worst.push(-r.energies.homo_level(), r.k);
    }
    let mut gammabound = worst.finish(LemmaId::Gammabound, 0.0, String::new());
    gammabound.details = format!("largest HOMO level {:e} against reference 0", -gammabound.worst_margin);
    gammabound.advisory = true;
    vec![hbound, expbound, gammabound]
}

/// Values below this count as zero when testing monotone shrinkage.
pub const CAUCHY_ROUNDOFF_FLOOR: f64 = 1e-13;
pub const THEOREM1_ALPHA_LIMIT: f64 = 1e-9;
pub const THEOREM1_ALIGNED_LIMIT: f64 = 1e-6;
const CAUCHY_TAIL: usize = 10;

/// Final `α` below `1e-9`, even and odd two-step distances nonincreasing over
/// the last ten records, final aligned step below `1e-6` in the H-norm.
pub fn check_theorem1_cauchy(trace: &ScfTrace) -> LemmaCheckResult {
    let alphas: Vec<(usize, f64)> = trace.records.iter().filter_map(|r| r.alpha.map(|a| (r.k, a))).collect();
    if alphas.is_empty() {
        return LemmaCheckResult::vacuous(LemmaId::Theorem1Cauchy, "insufficient data: no two-step distances");
    }
    let mut worst = Worst::new();
    let mut problems = Vec::new();

    let (k_last, alpha_last) = *alphas.last().expect("nonempty");
    worst.push(THEOREM1_ALPHA_LIMIT - alpha_last, k_last);
    if alpha_last >= THEOREM1_ALPHA_LIMIT {
        problems.push(format!("final α = {alpha_last:e}"));
    }

    let tail = &alphas[alphas.len().saturating_sub(CAUCHY_TAIL)..];
    for parity in 0..2 {
        let sub: Vec<(usize, f64)> = tail.iter().filter(|(k, _)| k % 2 == parity).cloned().collect();
        for w in sub.windows(2) {
            let (prev, next) = (w[0].1, w[1].1);
            let ok = next <= prev || next <= CAUCHY_ROUNDOFF_FLOOR;
            let margin = if ok { 0.0 } else { prev - next };
            worst.push(margin, w[1].0);
            if !ok {
                problems.push(format!("two-step distance grows at k = {}", w[1].0));
            }
        }
    }

    let aligned_last = trace.records.iter().rev().find_map(|r| r.aligned_step.map(|a| (r.k, a)));
    if let Some((k, a)) = aligned_last {
        worst.push(THEOREM1_ALIGNED_LIMIT - a, k);
        if a >= THEOREM1_ALIGNED_LIMIT {
            problems.push(format!("final aligned step {a:e}"));
        }
    }

    let details = if problems.is_empty() {
        format!(
            "final α = {alpha_last:e}, final aligned step {:e}",
            aligned_last.map_or(0.0, |(_, a)| a)
        )
    } else {
        problems.join("; ")
    };
    let mut result = worst.finish(LemmaId::Theorem1Cauchy, 0.0, details);
    result.passed = problems.is_empty();
    result
}

/// Which checks to run and their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub descent: bool,
    pub wpbound: bool,
    pub ubound: bool,
    pub lojasiewicz: bool,
    pub series: bool,
    pub monitored: bool,
    pub theorem1: bool,
    pub tail_fraction: f64,
    pub ubound_samples: usize,
    pub ubound_max_dim: usize,
    pub ubound_max_count: usize,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            descent: true,
            wpbound: true,
            ubound: true,
            lojasiewicz: true,
            series: true,
            monitored: true,
            theorem1: true,
            tail_fraction: 0.25,
            ubound_samples: 1000,
            ubound_max_dim: 20,
            ubound_max_count: 5,
            seed: 0,
        }
    }
}

/// Runs the enabled checks. The limit-dependent ones (Łojasiewicz probe and
/// the Cauchy check) apply only to traces that stopped on the α rule with a
/// vanishing one-step distance; otherwise they are reported as not applicable.
pub fn run_checks(trace: &ScfTrace, opts: &CheckOptions) -> Result<(Vec<LemmaCheckResult>, Option<LojasiewiczFit>)> {
    let mut out = Vec::new();
    if opts.descent {
        out.push(check_descent(trace));
    }
    if opts.wpbound {
        out.push(check_wpbound(trace));
    }
    if opts.ubound {
        out.push(check_ubound(opts.ubound_samples, opts.ubound_max_dim, opts.ubound_max_count, opts.seed)?);
    }
    if opts.series {
        out.push(check_series(&series_alphas(trace))?);
    }
    if opts.monitored {
        out.extend(check_monitored_bounds(trace));
    }
    let settled = trace.converged
        && trace
            .records
            .last()
            .is_some_and(|r| r.step_distance <= THEOREM1_ALIGNED_LIMIT);
    if opts.theorem1 {
        out.push(if settled {
            check_theorem1_cauchy(trace)
        } else {
            LemmaCheckResult::vacuous(LemmaId::Theorem1Cauchy, "not applicable: run did not settle on a single limit")
        });
    }
    let mut fit = None;
    if opts.lojasiewicz {
        if settled && trace.len() >= 2 {
            let f = probe_lojasiewicz(trace, opts.tail_fraction)?;
            out.push(check_lojasiewicz(&f));
            fit = Some(f);
        } else {
            out.push(LemmaCheckResult::vacuous(
                LemmaId::Lojasiewicz,
                "not applicable: run did not settle on a single limit",
            ));
        }
    }
    Ok((out, fit))
}

/// True when some non-advisory check failed.
pub fn any_failed(checks: &[LemmaCheckResult]) -> bool {
    checks.iter().any(|c| !c.passed && !c.advisory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hf::OrbitalEnergies;
    use crate::scf::IterationRecord;

    fn record(k: usize, pair_energy: f64, residual: f64, alpha: Option<f64>) -> IterationRecord {
        IterationRecord {
            k,
            energies: OrbitalEnergies { values: vec![-0.5], gap: Some(0.3) },
            pair_energy,
            hf_energy: pair_energy / 2.0,
            step_distance: alpha.unwrap_or(1.0),
            alpha,
            residual_norm: residual,
            aligned_step: alpha,
            moments: None,
            kinetic_norms: vec![1.0],
            flags: 0,
        }
    }

    fn trace(records: Vec<IterationRecord>) -> ScfTrace {
        ScfTrace { records, initial_energies: vec![-0.5], occupied: 1, converged: true, warnings: vec![] }
    }

    #[test]
    fn descent_catches_uptick() {
        let mut recs: Vec<_> = (0..6).map(|k| record(k, -1.0 - k as f64 * 0.01, 1e-3, Some(1e-3))).collect();
        let ok = check_descent(&trace(recs.clone()));
        assert!(ok.passed);
        recs[3].pair_energy += 0.02 + 1e-3;
        let bad = check_descent(&trace(recs));
        assert!(!bad.passed);
        assert_eq!(bad.location, Some(3));
        let single = check_descent(&trace(vec![record(0, -1.0, 1.0, None)]));
        assert!(single.passed);
        assert!(single.details.contains("insufficient data"));
    }

    #[test]
    fn wpbound_on_constructed_traces() {
        let recs = vec![
            record(0, -1.0, 1.0, None),
            record(1, -1.1, 1.0, Some(0.5)),
            record(2, -1.1, 1.0, Some(0.0)),
        ];
        // 𝓔₀ − 𝓔₁ = 0.1 ≥ ½·0.3·0.25
        assert!(check_wpbound(&trace(recs.clone())).passed);
        let mut bad = recs;
        bad[1].alpha = Some(2.0);
        let r = check_wpbound(&trace(bad));
        assert!(!r.passed);
        assert_eq!(r.location, Some(0));
    }

    #[test]
    fn ubound_identical_and_rotated_pairs() {
        let phi = OrbitalSet::new(rng::random_orthonormal(&mut rng::stream(1, 0), 6, 2)).unwrap();
        assert!(ubound_slack(&phi, &phi).unwrap() >= -1e-12);
        let q = rng::random_orthonormal(&mut rng::stream(2, 0), 2, 2);
        let rot = phi.rotated(&q);
        assert!(ubound_slack(&phi, &rot).unwrap() >= -1e-12);
        let pair = align_orbitals(&phi, &rot).unwrap();
        assert!(pair.aligned_distance(&phi, &rot) < 1e-12);
    }

    #[test]
    fn ubound_sampling_is_deterministic() {
        let a = check_ubound(200, 20, 5, 42).unwrap();
        let b = check_ubound(200, 20, 5, 42).unwrap();
        assert!(a.passed);
        assert_eq!(a, b);
        assert!(check_ubound(0, 20, 5, 42).is_err());
    }

    #[test]
    fn lojasiewicz_equality_case() {
        let mu = -2.0;
        let mut recs: Vec<_> = (0..12)
            .map(|k| record(k, mu + 4f64.powi(-(k as i32)), 2f64.powi(-(k as i32)), Some(1.0)))
            .collect();
        recs.push(record(12, mu, 0.0, Some(0.0)));
        let fit = probe_lojasiewicz(&trace(recs.clone()), 1.0).unwrap();
        assert!(fit.ratios.iter().all(|r| (r - 1.0).abs() < 1e-12));
        assert!((fit.kappa_estimate - 1.0).abs() < 1e-12);
        assert!((fit.stability.unwrap() - 1.0).abs() < 1e-12);

        // invariant under an energy shift
        let shifted: Vec<_> = recs
            .iter()
            .map(|r| IterationRecord { pair_energy: r.pair_energy + 0.75, ..r.clone() })
            .collect();
        let fit2 = probe_lojasiewicz(&trace(shifted), 1.0).unwrap();
        for (a, b) in fit.ratios.iter().zip(&fit2.ratios) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lojasiewicz_all_excluded_reports_zero() {
        let recs: Vec<_> = (0..5).map(|k| record(k, -1.0, 0.0, Some(0.0))).collect();
        let fit = probe_lojasiewicz(&trace(recs), 0.25).unwrap();
        assert_eq!(fit.kappa_estimate, 0.0);
        assert!(fit.note.is_some());
        assert!(check_lojasiewicz(&fit).passed);
        assert!(probe_lojasiewicz(&trace(vec![record(0, -1.0, 1.0, None)]), 0.5).is_err());
    }

    #[test]
    fn series_geometric_and_harmonic() {
        let geometric: Vec<f64> = (1..=80).map(|k| 2f64.powi(-k)).collect();
        let g = check_series(&geometric).unwrap();
        assert!(g.passed);
        assert!(g.details.contains("both flat"));
        let harmonic: Vec<f64> = (1..=2000).map(|k| 1.0 / k as f64).collect();
        let h = check_series(&harmonic).unwrap();
        assert!(h.passed);
        assert!(h.details.contains("hypothesis not satisfied"));
        assert!(check_series(&[1.0, 0.0]).is_err());
        assert!(check_series(&[1.0]).unwrap().passed);
    }

    #[test]
    fn monitored_bounds_without_moments() {
        let recs: Vec<_> = (0..4).map(|k| record(k, -1.0, 1e-3, Some(1e-3))).collect();
        let out = check_monitored_bounds(&trace(recs));
        assert_eq!(out.len(), 3);
        assert!(out[0].passed);
        assert!(out[1].details.contains("not applicable"));
        assert!(out[2].passed && out[2].advisory);
    }

    #[test]
    fn monitored_bounds_detect_blowup() {
        let mut recs: Vec<_> = (0..4).map(|k| record(k, -1.0, 1e-3, Some(1e-3))).collect();
        recs[3].kinetic_norms = vec![1e3];
        recs[2].energies.values = vec![0.2];
        let out = check_monitored_bounds(&trace(recs));
        assert!(!out[0].passed);
        assert!(!out[2].passed);
        assert!(!any_failed(&out[2..]));
    }

    #[test]
    fn theorem1_shrinking_and_growing_tails() {
        let recs: Vec<_> = (0..14)
            .map(|k| record(k, -1.0, 1e-3, (k > 0).then(|| 10f64.powi(-(k as i32)))))
            .collect();
        assert!(check_theorem1_cauchy(&trace(recs.clone())).passed);
        let mut bad = recs;
        bad[12].alpha = Some(1e-3);
        assert!(!check_theorem1_cauchy(&trace(bad)).passed);
    }
}
