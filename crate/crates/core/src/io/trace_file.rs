//! Trace CSV with a `# `-prefixed header.
//!
//! ```text
//! # scflab-trace 1
//! # fingerprint <sha256 of backend, S, h>
//! # rows <record count>
//! # occupied <N>
//! # converged <bool>
//! # initial_energies <e_1> ... <e_N>
//! # warning <text>            (zero or more)
//! # config <normalized config line>   (one per line of the echo)
//! k,e1,..,eN,gap,pair_energy,hf_energy,step_distance,alpha,residual_norm,aligned_step,[m1,..,mN,]t1,..,tN,flags
//! ```
//!
//! Reals use 17 significant digits (`{:.16e}`), which round-trips every
//! `f64`; absent values are empty fields.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hf::OrbitalEnergies;
use crate::scf::{IterationRecord, ScfTrace};

pub const TRACE_FORMAT: &str = "scflab-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub fingerprint: String,
    /// Normalized config document the run was made with.
    pub config_echo: String,
    pub trace: ScfTrace,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::TraceFormat(msg.into())
}

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

fn columns(n: usize, moments: bool) -> Vec<String> {
    let mut cols = vec!["k".to_string()];
    cols.extend((1..=n).map(|i| format!("e{i}")));
    cols.extend(
        ["gap", "pair_energy", "hf_energy", "step_distance", "alpha", "residual_norm", "aligned_step"]
            .map(String::from),
    );
    if moments {
        cols.extend((1..=n).map(|i| format!("m{i}")));
    }
    cols.extend((1..=n).map(|i| format!("t{i}")));
    cols.push("flags".into());
    cols
}

impl TraceFile {
    pub fn to_text(&self) -> Result<String> {
        let t = &self.trace;
        let n = t.occupied;
        let moments = t.records.first().is_some_and(|r| r.moments.is_some());
        for r in &t.records {
            if r.energies.values.len() != n
                || r.kinetic_norms.len() != n
                || r.moments.is_some() != moments
                || r.moments.as_ref().is_some_and(|m| m.len() != n)
            {
                return Err(bad(format!("record {} does not match {n} occupied orbitals", r.k)));
            }
        }
        let mut out = String::new();
        let _ = writeln!(out, "# {TRACE_FORMAT} {TRACE_VERSION}");
        let _ = writeln!(out, "# fingerprint {}", self.fingerprint);
        let _ = writeln!(out, "# rows {}", t.records.len());
        let _ = writeln!(out, "# occupied {n}");
        let _ = writeln!(out, "# converged {}", t.converged);
        let energies: Vec<String> = t.initial_energies.iter().map(|&e| fmt_real(e)).collect();
        let _ = writeln!(out, "# initial_energies {}", energies.join(" "));
        for w in &t.warnings {
            let _ = writeln!(out, "# warning {}", w.replace(['\n', '\r'], " "));
        }
        for line in self.config_echo.lines() {
            if line.is_empty() {
                out.push_str("# config\n");
            } else {
                let _ = writeln!(out, "# config {line}");
            }
        }

        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| bad(e.to_string());
        w.write_record(columns(n, moments)).map_err(csv_err)?;
        for r in &t.records {
            let mut row = vec![r.k.to_string()];
            row.extend(r.energies.values.iter().map(|&e| fmt_real(e)));
            row.push(fmt_opt(r.energies.gap));
            row.push(fmt_real(r.pair_energy));
            row.push(fmt_real(r.hf_energy));
            row.push(fmt_real(r.step_distance));
            row.push(fmt_opt(r.alpha));
            row.push(fmt_real(r.residual_norm));
            row.push(fmt_opt(r.aligned_step));
            if let Some(m) = &r.moments {
                row.extend(m.iter().map(|&x| fmt_real(x)));
            }
            row.extend(r.kinetic_norms.iter().map(|&x| fmt_real(x)));
            row.push(r.flags.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| bad(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).map_err(|e| bad(e.to_string()))?);
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if !text.ends_with('\n') {
            return Err(bad("file does not end with a newline (truncated?)"));
        }
        let mut lines = text.split_inclusive('\n').peekable();
        let mut header: Vec<&str> = Vec::new();
        let mut offset = 0;
        while let Some(line) = lines.next_if(|l| l.starts_with('#')) {
            offset += line.len();
            header.push(line.trim_end_matches('\n'));
        }
        let body = &text[offset..];

        let mut it = header.into_iter();
        let mut expect = |key: &str| -> Result<&str> {
            let line = it.next().ok_or_else(|| bad(format!("missing header `{key}`")))?;
            line.strip_prefix("# ")
                .and_then(|l| l.strip_prefix(key))
                .and_then(|l| l.strip_prefix(' '))
                .ok_or_else(|| bad(format!("expected header `{key}`, got `{line}`")))
        };
        let version = expect(TRACE_FORMAT)?;
        if version != TRACE_VERSION.to_string() {
            return Err(bad(format!("unsupported version `{version}`")));
        }
        let fingerprint = expect("fingerprint")?.to_string();
        let rows: usize = expect("rows")?.parse().map_err(|_| bad("bad row count"))?;
        let occupied: usize = expect("occupied")?.parse().map_err(|_| bad("bad occupied count"))?;
        let converged = match expect("converged")? {
            "true" => true,
            "false" => false,
            other => return Err(bad(format!("bad converged flag `{other}`"))),
        };
        let initial = expect_list(&mut it, occupied)?;
        let mut warnings = Vec::new();
        let mut config_echo = String::new();
        for line in it {
            if let Some(w) = line.strip_prefix("# warning ") {
                if !config_echo.is_empty() {
                    return Err(bad("warning after config echo"));
                }
                warnings.push(w.to_string());
            } else if line == "# config" {
                config_echo.push('\n');
            } else if let Some(c) = line.strip_prefix("# config ") {
                config_echo.push_str(c);
                config_echo.push('\n');
            } else {
                return Err(bad(format!("unexpected header line `{line}`")));
            }
        }

        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let head = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        let moments = head.iter().any(|c| c == "m1");
        let cols = columns(occupied, moments);
        if head.iter().ne(cols.iter().map(String::as_str)) {
            return Err(bad(format!("column header does not match `{}`", cols.join(","))));
        }
        let mut records = Vec::with_capacity(rows);
        for (idx, row) in reader.records().enumerate() {
            let row = row.map_err(|e| bad(format!("row {idx}: {e}")))?;
            records.push(parse_row(&row, idx, occupied, moments)?);
        }
        if records.len() != rows {
            return Err(bad(format!("header announces {rows} rows, found {}", records.len())));
        }
        Ok(TraceFile {
            fingerprint,
            config_echo,
            trace: ScfTrace { records, initial_energies: initial, occupied, converged, warnings },
        })
    }
}

fn expect_list<'a>(it: &mut impl Iterator<Item = &'a str>, n: usize) -> Result<Vec<f64>> {
    let line = it.next().ok_or_else(|| bad("missing header `initial_energies`"))?;
    let rest = line
        .strip_prefix("# initial_energies")
        .ok_or_else(|| bad(format!("expected header `initial_energies`, got `{line}`")))?;
    let values: Vec<f64> = rest
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("bad initial energy"))?;
    if values.len() != n {
        return Err(bad(format!("expected {n} initial energies, found {}", values.len())));
    }
    Ok(values)
}

fn parse_row(row: &csv::StringRecord, idx: usize, n: usize, moments: bool) -> Result<IterationRecord> {
    let mut fields = row.iter();
    let mut next = |name: &str| fields.next().ok_or_else(|| bad(format!("row {idx}: missing `{name}`")));
    let real = |s: &str, name: &str| -> Result<f64> {
        s.parse().map_err(|_| bad(format!("row {idx}: bad value `{s}` in `{name}`")))
    };
    let opt = |s: &str, name: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            real(s, name).map(Some)
        }
    };
    let k: usize = next("k")?.parse().map_err(|_| bad(format!("row {idx}: bad k")))?;
    if k != idx {
        return Err(bad(format!("row {idx}: k = {k} out of sequence")));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(real(next("e")?, "e")?);
    }
    let gap = opt(next("gap")?, "gap")?;
    let pair_energy = real(next("pair_energy")?, "pair_energy")?;
    let hf_energy = real(next("hf_energy")?, "hf_energy")?;
    let step_distance = real(next("step_distance")?, "step_distance")?;
    let alpha = opt(next("alpha")?, "alpha")?;
    let residual_norm = real(next("residual_norm")?, "residual_norm")?;
    let aligned_step = opt(next("aligned_step")?, "aligned_step")?;
    let moments = if moments {
        let mut m = Vec::with_capacity(n);
        for _ in 0..n {
            m.push(real(next("m")?, "m")?);
        }
        Some(m)
    } else {
        None
    };
    let mut kinetic_norms = Vec::with_capacity(n);
    for _ in 0..n {
        kinetic_norms.push(real(next("t")?, "t")?);
    }
    let flags: u32 = next("flags")?.parse().map_err(|_| bad(format!("row {idx}: bad flags")))?;
    Ok(IterationRecord {
        k,
        energies: OrbitalEnergies { values, gap },
        pair_energy,
        hf_energy,
        step_distance,
        alpha,
        residual_norm,
        aligned_step,
        moments,
        kinetic_norms,
        flags,
    })
}
