use serde::{Deserialize, Serialize};

use crate::diagnostics::{LemmaCheckResult, LojasiewiczFit};
use crate::hf::hs_distance;
use crate::models::BasisContext;
use crate::scf::{FixedPointReport, ScfTrace, Verdict};

/// Convention for the residual norm column, restated in every report.
pub const RESIDUAL_CONVENTION: &str =
    "residual_norm = (2·‖block1‖_F² + 2·‖block2‖_F² + Σ_i (1−‖φ_i‖²)² + Σ_i (1−‖φ̃_i‖²)²)^{1/2}, coefficients in the Löwdin frame";
pub const RNG_DESCRIPTION: &str =
    "xoshiro256** seeded by seed_from_u64(seed) (SplitMix64 expansion); stream j is the base state after j jump() calls; stream 0 = random initial guess, stream 1 = ubound samples";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySummary {
    pub hf_energy: f64,
    /// Spin-summed electronic energy: `Ê` for spinless, `2Ê` for closed-shell.
    pub electronic_energy: f64,
    pub pair_energy: f64,
    pub nuclear_repulsion: f64,
    pub total_energy: f64,
    pub orbital_energies: Vec<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LojasiewiczSummary {
    pub mu: f64,
    pub kappa: f64,
    pub ratios: Vec<f64>,
    pub window: Option<(usize, usize)>,
    pub stability: Option<f64>,
    pub note: Option<String>,
}

impl From<&LojasiewiczFit> for LojasiewiczSummary {
    fn from(f: &LojasiewiczFit) -> Self {
        LojasiewiczSummary {
            mu: f.mu_estimate,
            kappa: f.kappa_estimate,
            ratios: f.ratios.clone(),
            window: f.window,
            stability: f.stability,
            note: f.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSummary {
    pub verdict: Verdict,
    pub even_odd_distance: f64,
    pub limit_gap: Option<f64>,
    pub canonical_energies: Vec<f64>,
    pub alignment_defect: f64,
    pub unitary_relation_defect: f64,
    pub hf_residual: Option<f64>,
    pub energy_mismatch: Option<f64>,
    pub degeneracy_tolerance: f64,
}

impl From<&FixedPointReport> for FixedPointSummary {
    fn from(r: &FixedPointReport) -> Self {
        FixedPointSummary {
            verdict: r.verdict,
            even_odd_distance: hs_distance(&r.even_density, &r.odd_density),
            limit_gap: r.limit_gap,
            canonical_energies: r.canonical_energies.values.clone(),
            alignment_defect: r.alignment_defect,
            unitary_relation_defect: r.unitary_relation_defect,
            hf_residual: r.hf_residual,
            energy_mismatch: r.energy_mismatch,
            degeneracy_tolerance: r.degeneracy_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub exit_code: i32,
    pub fingerprint: Option<String>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub seed: Option<u64>,
    pub residual_norm_convention: String,
    pub rng: String,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        Metadata {
            tool: "scflab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            exit_code: 0,
            fingerprint: None,
            iterations: None,
            converged: None,
            seed: None,
            residual_norm_convention: RESIDUAL_CONVENTION.into(),
            rng: RNG_DESCRIPTION.into(),
            warnings: Vec::new(),
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub verdict: Option<Verdict>,
    pub energies: Option<EnergySummary>,
    pub checks: Vec<LemmaCheckResult>,
    pub lojasiewicz: Option<LojasiewiczSummary>,
    pub fixed_point: Option<FixedPointSummary>,
    pub metadata: Metadata,
}

impl Report {
    pub fn empty(command: &str) -> Self {
        Report {
            verdict: None,
            energies: None,
            checks: Vec::new(),
            lojasiewicz: None,
            fixed_point: None,
            metadata: Metadata::new(command),
        }
    }

    pub fn error(command: &str, message: String) -> Self {
        let mut r = Report::empty(command);
        r.metadata.exit_code = 1;
        r.metadata.error = Some(message);
        r
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Energies of the last recorded iterate.
pub fn energy_summary(trace: &ScfTrace, ctx: &BasisContext) -> Option<EnergySummary> {
    let last = trace.records.last()?;
    let electronic = ctx.options.occupation.coulomb_weight() * last.hf_energy;
    Some(EnergySummary {
        hf_energy: last.hf_energy,
        electronic_energy: electronic,
        pair_energy: last.pair_energy,
        nuclear_repulsion: ctx.nuclear_repulsion,
        total_energy: electronic + ctx.nuclear_repulsion,
        orbital_energies: last.energies.values.clone(),
        gap: last.energies.gap,
    })
}
