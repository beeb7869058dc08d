use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::config::{parse_config, BackendConfig, RunConfig};
use super::report::{energy_summary, FixedPointSummary, LojasiewiczSummary, Report};
use super::trace_file::{fmt_real, TraceFile};
use crate::diagnostics::{any_failed, run_checks, LemmaCheckResult};
use crate::error::{Error, Result};
use crate::scf::{run_scf, ScfTrace, Verdict};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_TWO_CYCLE: i32 = 2;
pub const EXIT_UNDETERMINED: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// Errors first, then failed non-advisory checks, then the verdict.
pub fn exit_code(verdict: Option<Verdict>, checks: &[LemmaCheckResult], error: bool) -> i32 {
    if error {
        return EXIT_ERROR;
    }
    if any_failed(checks) {
        return EXIT_CHECK_FAILED;
    }
    match verdict {
        None | Some(Verdict::ConvergedHfSolution) => EXIT_CONVERGED,
        Some(Verdict::TwoCycleOscillation) => EXIT_TWO_CYCLE,
        Some(Verdict::Undetermined) => EXIT_UNDETERMINED,
    }
}

/// Everything a run produces, before anything touches the filesystem.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub trace_file: TraceFile,
    pub trace_text: String,
    pub report: Report,
    pub exit_code: i32,
}

pub fn execute_run(cfg: &RunConfig) -> Result<RunArtifacts> {
    let ctx = cfg.build_context()?;
    let scf = cfg.scf_config(&ctx)?;
    let (trace, fixed) = run_scf(&ctx, &scf)?;
    let (checks, fit) = run_checks(&trace, &cfg.diagnostics)?;
    let trace_file = TraceFile { fingerprint: ctx.fingerprint(), config_echo: cfg.to_ini(), trace };
    let trace_text = trace_file.to_text()?;

    let mut report = Report::empty("run");
    report.verdict = Some(fixed.verdict);
    report.energies = energy_summary(&trace_file.trace, &ctx);
    report.lojasiewicz = fit.as_ref().map(LojasiewiczSummary::from);
    report.fixed_point = Some(FixedPointSummary::from(&fixed));
    report.checks = checks;
    fill_metadata(&mut report, &trace_file, cfg.seed);
    let code = exit_code(report.verdict, &report.checks, false);
    report.metadata.exit_code = code;
    Ok(RunArtifacts { trace_file, trace_text, report, exit_code: code })
}

fn fill_metadata(report: &mut Report, tf: &TraceFile, seed: u64) {
    let m = &mut report.metadata;
    m.fingerprint = Some(tf.fingerprint.clone());
    m.iterations = Some(tf.trace.len());
    m.converged = Some(tf.trace.converged);
    m.seed = Some(seed);
    m.warnings = tf.trace.warnings.clone();
}

/// Writes `contents` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub report: Report,
    pub report_path: PathBuf,
    pub trace_path: Option<PathBuf>,
    /// Message of the error that ended the command, if any.
    pub error: Option<String>,
}

/// Runs a config and writes the trace and report under `out_dir`. Failures
/// are turned into an error report whenever the directory is writable.
pub fn cmd_run(cfg: &RunConfig, out_dir: &Path) -> Result<CommandOutcome> {
    let trace_path = out_dir.join(&cfg.output.trace);
    let report_path = out_dir.join(&cfg.output.report);
    match execute_run(cfg) {
        Ok(art) => {
            write_atomic(&trace_path, &art.trace_text)?;
            write_atomic(&report_path, &art.report.to_json())?;
            Ok(CommandOutcome {
                exit_code: art.exit_code,
                report: art.report,
                report_path,
                trace_path: Some(trace_path),
                error: None,
            })
        }
        Err(e) => {
            let report = Report::error("run", e.to_string());
            write_atomic(&report_path, &report.to_json())?;
            Ok(CommandOutcome { exit_code: EXIT_ERROR, report, report_path, trace_path: None, error: Some(e.to_string()) })
        }
    }
}

pub const SCANNABLE: [&str; 7] =
    ["separation", "softening", "half_width", "points", "interaction_scale", "kinetic_factor", "charge"];

pub fn parse_values(list: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::InvalidInput(format!("scan value `{s}` is not a number"))))
        .collect::<Result<_>>()?;
    if values.is_empty() {
        return Err(Error::InvalidInput("scan needs at least one value".into()));
    }
    Ok(values)
}

/// Copy of `cfg` with one numeric field replaced.
pub fn apply_axis(cfg: &RunConfig, axis: &str, value: f64) -> Result<RunConfig> {
    let field = |f: &str| format!("scan.{f}");
    let mut out = cfg.clone();
    fn grid_only<'a>(out: &'a mut RunConfig, axis: &str) -> Result<&'a mut crate::models::GridParams> {
        match &mut out.backend {
            BackendConfig::Grid1d { params } => Ok(params),
            BackendConfig::Gaussian { .. } => Err(Error::param(&format!("scan.{axis}"), "only defined for the grid1d backend")),
        }
    }
    match axis {
        "separation" => {
            if out.nuclei.len() != 2 {
                return Err(Error::param(&field(axis), "needs exactly two nuclei"));
            }
            if !(value > 0.0) {
                return Err(Error::param(&field(axis), "must be positive"));
            }
            let (p, q) = (out.nuclei[0].position, out.nuclei[1].position);
            let mid: Vec<f64> = (0..3).map(|i| 0.5 * (p[i] + q[i])).collect();
            let d: Vec<f64> = (0..3).map(|i| q[i] - p[i]).collect();
            let len = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            for i in 0..3 {
                let u = d[i] / len;
                out.nuclei[0].position[i] = mid[i] - 0.5 * value * u;
                out.nuclei[1].position[i] = mid[i] + 0.5 * value * u;
            }
        }
        "softening" => grid_only(&mut out, axis)?.softening = value,
        "half_width" => grid_only(&mut out, axis)?.half_width = value,
        "points" => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::param(&field(axis), format!("must be a whole number, got {value}")));
            }
            grid_only(&mut out, axis)?.points = value as usize;
        }
        "interaction_scale" => out.model.interaction_scale = value,
        "kinetic_factor" => out.model.kinetic_factor = value,
        "charge" => match out.nuclei.last_mut() {
            Some(n) => n.charge = value,
            None => return Err(Error::param(&field(axis), "config has no nuclei")),
        },
        other => {
            return Err(Error::UnknownAxis {
                axis: other.to_string(),
                scannable: SCANNABLE.iter().map(|s| s.to_string()).collect(),
            })
        }
    }
    // re-validate through the normal parser so ranges are enforced uniformly
    parse_config(&out.to_ini(), Path::new("/"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub index: usize,
    pub value: f64,
    pub exit_code: i32,
    pub verdict: Option<Verdict>,
    pub iterations: usize,
    pub hf_energy: Option<f64>,
    pub energies: Vec<f64>,
    pub alpha_last: Option<f64>,
    pub alpha_tail_max: Option<f64>,
    pub step_last: Option<f64>,
    pub step_tail_min: Option<f64>,
    pub unitary_relation_defect: Option<f64>,
    pub error: Option<String>,
}

/// Number of trailing records summarized in scan rows.
pub const SCAN_TAIL: usize = 50;

fn tail_stats(trace: &ScfTrace) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    let start = trace.len().saturating_sub(SCAN_TAIL);
    let tail = &trace.records[start..];
    let alphas: Vec<f64> = tail.iter().filter_map(|r| r.alpha).collect();
    let steps: Vec<f64> = tail.iter().map(|r| r.step_distance).collect();
    (
        alphas.last().copied(),
        alphas.iter().copied().reduce(f64::max),
        steps.last().copied(),
        steps.iter().copied().reduce(f64::min),
    )
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub rows: Vec<ScanRow>,
    pub summary_path: PathBuf,
    pub exit_code: i32,
}

/// Runs one config per value, rows in parallel. Row `i` is written to
/// `out_dir/<axis>-<i>/`, the summary to `out_dir/scan-<axis>.csv`.
pub fn cmd_scan(template: &RunConfig, axis: &str, values: &[f64], out_dir: &Path) -> Result<ScanOutcome> {
    if !SCANNABLE.contains(&axis) {
        return Err(Error::UnknownAxis {
            axis: axis.to_string(),
            scannable: SCANNABLE.iter().map(|s| s.to_string()).collect(),
        });
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("scan needs at least one value".into()));
    }
    let rows: Vec<ScanRow> = values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| scan_row(template, axis, index, value, out_dir))
        .collect::<Result<_>>()?;
    let summary_path = out_dir.join(format!("scan-{axis}.csv"));
    write_atomic(&summary_path, &scan_csv(axis, &rows)?)?;
    let exit_code = if rows.iter().any(|r| r.error.is_some()) { EXIT_ERROR } else { EXIT_CONVERGED };
    Ok(ScanOutcome { rows, summary_path, exit_code })
}

fn scan_row(template: &RunConfig, axis: &str, index: usize, value: f64, out_dir: &Path) -> Result<ScanRow> {
    let mut row = ScanRow {
        index,
        value,
        exit_code: EXIT_ERROR,
        verdict: None,
        iterations: 0,
        hf_energy: None,
        energies: Vec::new(),
        alpha_last: None,
        alpha_tail_max: None,
        step_last: None,
        step_tail_min: None,
        unitary_relation_defect: None,
        error: None,
    };
    let dir = out_dir.join(format!("{axis}-{index}"));
    let result = apply_axis(template, axis, value).and_then(|cfg| Ok((execute_run(&cfg)?, cfg)));
    match result {
        Ok((art, cfg)) => {
            write_atomic(&dir.join(&cfg.output.trace), &art.trace_text)?;
            write_atomic(&dir.join(&cfg.output.report), &art.report.to_json())?;
            let trace = &art.trace_file.trace;
            (row.alpha_last, row.alpha_tail_max, row.step_last, row.step_tail_min) = tail_stats(trace);
            row.exit_code = art.exit_code;
            row.verdict = art.report.verdict;
            row.iterations = trace.len();
            row.hf_energy = art.report.energies.as_ref().map(|e| e.hf_energy);
            row.energies = art.report.energies.map(|e| e.orbital_energies).unwrap_or_default();
            row.unitary_relation_defect = art.report.fixed_point.map(|f| f.unitary_relation_defect);
        }
        Err(e) => {
            write_atomic(&dir.join(&template.output.report), &Report::error("scan", e.to_string()).to_json())?;
            row.error = Some(e.to_string());
        }
    }
    Ok(row)
}

fn scan_csv(axis: &str, rows: &[ScanRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let opt = |x: Option<f64>| x.map(fmt_real).unwrap_or_default();
    let header = [
        "index",
        axis,
        "verdict",
        "exit_code",
        "iterations",
        "hf_energy",
        "orbital_energies",
        "alpha_last",
        "alpha_tail_max",
        "step_last",
        "step_tail_min",
        "unitary_relation_defect",
        "error",
    ];
    let csv_err = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        let mut energies = String::new();
        for (i, e) in r.energies.iter().enumerate() {
            let _ = write!(energies, "{}{}", if i > 0 { " " } else { "" }, fmt_real(*e));
        }
        w.write_record([
            r.index.to_string(),
            format!("{:?}", r.value),
            r.verdict.map_or("error", Verdict::as_str).to_string(),
            r.exit_code.to_string(),
            r.iterations.to_string(),
            opt(r.hf_energy),
            energies,
            opt(r.alpha_last),
            opt(r.alpha_tail_max),
            opt(r.step_last),
            opt(r.step_tail_min),
            opt(r.unitary_relation_defect),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Recomputes every enabled check from a trace file alone. The basis is
/// rebuilt from the config echo only to confirm the fingerprint.
pub fn check_trace(text: &str, seed_override: Option<u64>) -> Result<Report> {
    let tf = TraceFile::parse(text)?;
    let mut cfg = parse_config(&tf.config_echo, Path::new("/"))?;
    if let Some(seed) = seed_override {
        cfg.set_seed(seed);
    }
    let ctx = cfg.build_context()?;
    let computed = ctx.fingerprint();
    if computed != tf.fingerprint {
        return Err(Error::StaleTrace { recorded: tf.fingerprint, computed });
    }
    let (checks, fit) = run_checks(&tf.trace, &cfg.diagnostics)?;
    let mut report = Report::empty("check");
    report.energies = energy_summary(&tf.trace, &ctx);
    report.lojasiewicz = fit.as_ref().map(LojasiewiczSummary::from);
    report.checks = checks;
    fill_metadata(&mut report, &tf, cfg.seed);
    report.metadata.exit_code = exit_code(None, &report.checks, false);
    Ok(report)
}

/// Checks a trace file; the report goes to `out_dir/check-report.json`.
pub fn cmd_check(trace_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<CommandOutcome> {
    let report_path = out_dir.join("check-report.json");
    let result = std::fs::read_to_string(trace_path)
        .map_err(|e| Error::io(trace_path, e))
        .and_then(|text| check_trace(&text, seed_override));
    let (report, error) = match result {
        Ok(r) => (r, None),
        Err(e) => (Report::error("check", e.to_string()), Some(e.to_string())),
    };
    write_atomic(&report_path, &report.to_json())?;
    Ok(CommandOutcome {
        exit_code: report.metadata.exit_code,
        report,
        report_path,
        trace_path: Some(trace_path.to_path_buf()),
        error,
    })
}
