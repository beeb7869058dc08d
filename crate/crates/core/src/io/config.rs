use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ini::Ini;

use crate::diagnostics::CheckOptions;
use crate::error::{Error, Result};
use crate::hf::DensityMatrix;
use crate::models::{
    build_gaussian_backend, build_grid1d_backend, BasisContext, BasisLibrary, Geometry, GridParams, ModelOptions,
    Nucleus, Occupation,
};
use crate::numerics::{Matrix, SymMatrix};
use crate::scf::{InitialGuess, ScfConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum BackendConfig {
    Gaussian { basis_file: PathBuf },
    Grid1d { params: GridParams },
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuessSpec {
    Core,
    Random,
    Density(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub trace: String,
    pub report: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), trace: "trace.csv".into(), report: "report.json".into() }
    }
}

/// A validated run description. Input paths are resolved against the
/// directory of the config file; the output directory is taken as written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub nuclei: Vec<Nucleus>,
    pub electrons: usize,
    pub model: ModelOptions,
    pub scf: ScfConfig,
    pub guess: GuessSpec,
    pub seed: u64,
    pub diagnostics: CheckOptions,
    pub output: OutputConfig,
}

const SYMBOLS: [(&str, f64); 2] = [("H", 1.0), ("He", 2.0)];

fn value_err(field: &str, reason: impl Into<String>) -> Error {
    Error::ConfigValue { field: field.to_string(), reason: reason.into() }
}

struct Section<'a> {
    name: &'static str,
    entries: BTreeMap<String, &'a str>,
}

impl<'a> Section<'a> {
    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.entries.remove(key)
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.name)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(raw) => raw
                .trim()
                .parse()
                .map_err(|_| value_err(&self.field(key), format!("cannot parse `{raw}`"))),
        }
    }

    fn flag(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key).map(|s| s.trim().to_ascii_lowercase()) {
            None => Ok(default),
            Some(s) if s == "true" || s == "yes" || s == "1" || s == "on" => Ok(true),
            Some(s) if s == "false" || s == "no" || s == "0" || s == "off" => Ok(false),
            Some(s) => Err(value_err(&self.field(key), format!("expected a boolean, got `{s}`"))),
        }
    }

    fn finish(self) -> Result<()> {
        match self.entries.keys().next() {
            None => Ok(()),
            Some(k) => Err(value_err(&format!("{}.{k}", self.name), "unknown key")),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(value_err(field, format!("must be positive, got {v}")))
    }
}

fn parse_nuclei(raw: &str, gaussian: bool) -> Result<Vec<Nucleus>> {
    let field = "backend.nuclei";
    let mut out = Vec::new();
    for (i, chunk) in raw.split(';').map(str::trim).filter(|s| !s.is_empty()).enumerate() {
        let tokens: Vec<&str> = chunk.split_whitespace().collect();
        let want = if gaussian { 4 } else { 2 };
        if tokens.len() != want {
            let shape = if gaussian { "`charge-or-symbol x y z`" } else { "`charge x`" };
            return Err(value_err(field, format!("nucleus {i}: expected {shape}, got `{chunk}`")));
        }
        let charge = match SYMBOLS.iter().find(|(s, _)| s.eq_ignore_ascii_case(tokens[0])) {
            Some(&(_, z)) => z,
            None => tokens[0]
                .parse::<f64>()
                .map_err(|_| value_err(field, format!("nucleus {i}: unknown element or charge `{}`", tokens[0])))?,
        };
        let mut position = [0.0; 3];
        for (slot, t) in position.iter_mut().zip(&tokens[1..]) {
            *slot = t
                .parse()
                .map_err(|_| value_err(field, format!("nucleus {i}: cannot parse coordinate `{t}`")))?;
        }
        out.push(Nucleus { charge, position });
    }
    Ok(out)
}

fn resolve(base: &Path, raw: &str, field: &str) -> Result<PathBuf> {
    let p = Path::new(raw.trim());
    let full = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    if !full.is_file() {
        return Err(value_err(field, format!("file {} does not exist", full.display())));
    }
    Ok(full.canonicalize().unwrap_or(full))
}

/// Line-level shape check; the INI reader itself reports positions loosely.
fn check_syntax(text: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |reason: &str| Err(Error::ConfigSyntax { line: i + 1, reason: format!("{reason}: `{line}`") });
        if line.is_empty() || line.starts_with(';') || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') || line.len() < 3 || line[1..line.len() - 1].contains(['[', ']']) {
                return err("malformed section header");
            }
        } else if !line.contains('=') {
            return err("expected `key = value`");
        } else if line.starts_with('=') {
            return err("missing key");
        }
    }
    Ok(())
}

/// Parses a config document; relative input paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    check_syntax(text)?;
    let ini = Ini::load_from_str_noescape(text).map_err(|e| Error::ConfigSyntax {
        line: e.line,
        reason: e.msg.to_string(),
    })?;
    let mut sections: BTreeMap<&str, Section> = BTreeMap::new();
    for (name, props) in ini.iter() {
        let Some(name) = name else {
            if props.iter().next().is_some() {
                return Err(value_err("(top level)", "keys must live inside a section"));
            }
            continue;
        };
        let canonical = match name.trim() {
            "backend" => "backend",
            "scf" => "scf",
            "diagnostics" => "diagnostics",
            "output" => "output",
            other => return Err(value_err(other, "unknown section")),
        };
        let section = sections
            .entry(canonical)
            .or_insert_with(|| Section { name: canonical, entries: BTreeMap::new() });
        for (k, v) in props.iter() {
            section.entries.insert(k.trim().to_string(), v);
        }
    }
    let mut take = |name: &'static str| sections.remove(name).unwrap_or(Section { name, entries: BTreeMap::new() });
    let mut b = take("backend");
    let mut s = take("scf");
    let mut d = take("diagnostics");
    let mut o = take("output");

    let kind = b.take("kind").ok_or_else(|| value_err("backend.kind", "required (gaussian or grid1d)"))?;
    let gaussian = match kind.trim() {
        "gaussian" => true,
        "grid1d" => false,
        other => return Err(value_err("backend.kind", format!("unknown backend `{other}`"))),
    };
    let nuclei = parse_nuclei(b.take("nuclei").unwrap_or(""), gaussian)?;
    let electrons: usize = b.parse("electrons", 1)?;
    if electrons == 0 {
        return Err(value_err("backend.electrons", "must be at least 1"));
    }
    let occupation = match b.take("occupation").map(str::trim) {
        None | Some("spinless") => Occupation::Spinless,
        Some("closed-shell") => Occupation::ClosedShell,
        Some(other) => return Err(value_err("backend.occupation", format!("expected spinless or closed-shell, got `{other}`"))),
    };
    let kinetic_factor = positive("backend.kinetic_factor", b.parse("kinetic_factor", 1.0)?)?;
    let interaction_scale: f64 = b.parse("interaction_scale", 1.0)?;
    if !(interaction_scale >= 0.0) || !interaction_scale.is_finite() {
        return Err(value_err("backend.interaction_scale", "must be nonnegative"));
    }
    let backend = if gaussian {
        let raw = b.take("basis_file").ok_or_else(|| value_err("backend.basis_file", "required for the gaussian backend"))?;
        if nuclei.is_empty() {
            return Err(value_err("backend.nuclei", "the gaussian backend needs at least one nucleus"));
        }
        BackendConfig::Gaussian { basis_file: resolve(base_dir, raw, "backend.basis_file")? }
    } else {
        let defaults = GridParams::default();
        let half_width = positive("backend.half_width", b.parse("half_width", defaults.half_width)?)?;
        let points: usize = b.parse("points", defaults.points)?;
        if points < 16 {
            return Err(value_err("backend.points", format!("n ≥ 16 required, got {points}")));
        }
        let softening = positive("backend.softening", b.parse("softening", defaults.softening)?)?;
        BackendConfig::Grid1d { params: GridParams { half_width, points, softening } }
    };
    b.finish()?;

    let dflt = ScfConfig::default();
    let max_iterations: usize = s.parse("max_iterations", dflt.max_iterations)?;
    if max_iterations < 2 {
        return Err(value_err("scf.max_iterations", "must be at least 2"));
    }
    let mut scf = ScfConfig {
        max_iterations,
        convergence_threshold: positive("scf.convergence_threshold", s.parse("convergence_threshold", dflt.convergence_threshold)?)?,
        min_iterations: s.parse("min_iterations", dflt.min_iterations)?,
        gap_floor: positive("scf.gap_floor", s.parse("gap_floor", dflt.gap_floor)?)?,
        tie_tolerance: positive("scf.tie_tolerance", s.parse("tie_tolerance", dflt.tie_tolerance)?)?,
        initial_guess: InitialGuess::Core,
        hf_residual_tolerance: positive("scf.hf_residual_tolerance", s.parse("hf_residual_tolerance", dflt.hf_residual_tolerance)?)?,
        relation_tolerance: positive("scf.relation_tolerance", s.parse("relation_tolerance", dflt.relation_tolerance)?)?,
    };
    let seed: u64 = s.parse("seed", 0)?;
    let guess_kind = s.take("initial_guess").map(str::trim).unwrap_or("core");
    let density_file = s.take("density_file");
    let guess = match guess_kind {
        "core" => GuessSpec::Core,
        "random" => GuessSpec::Random,
        "density" => {
            let raw = density_file.ok_or_else(|| value_err("scf.density_file", "required when initial_guess = density"))?;
            GuessSpec::Density(resolve(base_dir, raw, "scf.density_file")?)
        }
        other => return Err(value_err("scf.initial_guess", format!("expected core, random or density, got `{other}`"))),
    };
    if guess_kind != "density" && density_file.is_some() {
        return Err(value_err("scf.density_file", "only meaningful with initial_guess = density"));
    }
    if guess == GuessSpec::Random {
        scf.initial_guess = InitialGuess::RandomOrthonormal { seed };
    }
    s.finish()?;

    let dd = CheckOptions::default();
    let tail_fraction: f64 = d.parse("tail_fraction", dd.tail_fraction)?;
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(value_err("diagnostics.tail_fraction", "must lie in (0, 1]"));
    }
    let diagnostics = CheckOptions {
        descent: d.flag("descent", dd.descent)?,
        wpbound: d.flag("wpbound", dd.wpbound)?,
        ubound: d.flag("ubound", dd.ubound)?,
        lojasiewicz: d.flag("lojasiewicz", dd.lojasiewicz)?,
        series: d.flag("series", dd.series)?,
        monitored: d.flag("monitored", dd.monitored)?,
        theorem1: d.flag("theorem1", dd.theorem1)?,
        tail_fraction,
        ubound_samples: d.parse("ubound_samples", dd.ubound_samples)?,
        ubound_max_dim: dd.ubound_max_dim,
        ubound_max_count: dd.ubound_max_count,
        seed,
    };
    if diagnostics.ubound && diagnostics.ubound_samples == 0 {
        return Err(value_err("diagnostics.ubound_samples", "must be at least 1"));
    }
    d.finish()?;

    let od = OutputConfig::default();
    let output = OutputConfig {
        dir: o.take("dir").map(|s| PathBuf::from(s.trim())).unwrap_or(od.dir),
        trace: o.take("trace").map(|s| s.trim().to_string()).unwrap_or(od.trace),
        report: o.take("report").map(|s| s.trim().to_string()).unwrap_or(od.report),
    };
    o.finish()?;

    let cfg = RunConfig {
        backend,
        nuclei,
        electrons,
        model: ModelOptions { occupation, kinetic_factor, interaction_scale },
        scf,
        guess,
        seed,
        diagnostics,
        output,
    };
    cfg.validate_geometry()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    parse_config(&text, base)
}

/// Whitespace-separated rows of an `M×M` Löwdin-frame projector.
pub fn load_density(path: &Path, dim: usize, occupied: usize) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| value_err("scf.density_file", format!("{} contains a non-numeric entry", path.display())))?;
    if values.len() != dim * dim {
        return Err(value_err(
            "scf.density_file",
            format!("{} has {} entries, expected {dim}×{dim}", path.display(), values.len()),
        ));
    }
    DensityMatrix::new(SymMatrix::symmetrize(Matrix::from_row_slice(dim, dim, &values)), occupied)
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

impl RunConfig {
    fn validate_geometry(&self) -> Result<()> {
        let geom = self.geometry();
        geom.validate().map_err(|e| value_err("backend.nuclei", e.to_string()))?;
        self.model
            .occupation
            .orbital_count(self.electrons)
            .map_err(|e| value_err("backend.electrons", e.to_string()))?;
        if let BackendConfig::Grid1d { params } = &self.backend {
            for (i, n) in self.nuclei.iter().enumerate() {
                if n.position[0].abs() >= params.half_width {
                    return Err(value_err("backend.nuclei", format!("nucleus {i} lies outside (−L, L)")));
                }
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Geometry {
        Geometry { nuclei: self.nuclei.clone(), electron_count: self.electrons }
    }

    pub fn build_context(&self) -> Result<BasisContext> {
        let geom = self.geometry();
        match &self.backend {
            BackendConfig::Gaussian { basis_file } => {
                let lib = BasisLibrary::load(basis_file)?;
                let charges: Vec<f64> = self.nuclei.iter().map(|n| n.charge).collect();
                build_gaussian_backend(&geom, &lib.shells_for(&charges)?, self.model)
            }
            BackendConfig::Grid1d { params } => build_grid1d_backend(*params, &geom, self.model),
        }
    }

    /// The engine configuration, loading the initial density if one is named.
    pub fn scf_config(&self, ctx: &BasisContext) -> Result<ScfConfig> {
        let mut scf = self.scf.clone();
        scf.initial_guess = match &self.guess {
            GuessSpec::Core => InitialGuess::Core,
            GuessSpec::Random => InitialGuess::RandomOrthonormal { seed: self.seed },
            GuessSpec::Density(p) => InitialGuess::Density(load_density(p, ctx.dim, ctx.occupied)?),
        };
        Ok(scf)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.diagnostics.seed = seed;
        if let InitialGuess::RandomOrthonormal { .. } = self.scf.initial_guess {
            self.scf.initial_guess = InitialGuess::RandomOrthonormal { seed };
        }
    }

    /// Normalized document: every field, fixed order, shortest round-trip
    /// float rendering. Parsing it back yields an equal config.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let gaussian = matches!(self.backend, BackendConfig::Gaussian { .. });
        let nuclei: Vec<String> = self
            .nuclei
            .iter()
            .map(|n| {
                let charge = SYMBOLS
                    .iter()
                    .find(|(_, z)| *z == n.charge && gaussian)
                    .map_or_else(|| fmt_f64(n.charge), |(sym, _)| sym.to_string());
                if gaussian {
                    format!("{charge} {} {} {}", fmt_f64(n.position[0]), fmt_f64(n.position[1]), fmt_f64(n.position[2]))
                } else {
                    format!("{charge} {}", fmt_f64(n.position[0]))
                }
            })
            .collect();
        s.push_str("[backend]\n");
        match &self.backend {
            BackendConfig::Gaussian { basis_file } => {
                let _ = writeln!(s, "kind = gaussian");
                let _ = writeln!(s, "basis_file = {}", basis_file.display());
            }
            BackendConfig::Grid1d { params } => {
                let _ = writeln!(s, "kind = grid1d");
                let _ = writeln!(s, "half_width = {}", fmt_f64(params.half_width));
                let _ = writeln!(s, "points = {}", params.points);
                let _ = writeln!(s, "softening = {}", fmt_f64(params.softening));
            }
        }
        let _ = writeln!(s, "nuclei = {}", nuclei.join("; "));
        let _ = writeln!(s, "electrons = {}", self.electrons);
        let _ = writeln!(s, "occupation = {}", self.model.occupation.as_str());
        let _ = writeln!(s, "kinetic_factor = {}", fmt_f64(self.model.kinetic_factor));
        let _ = writeln!(s, "interaction_scale = {}", fmt_f64(self.model.interaction_scale));

        let c = &self.scf;
        s.push_str("\n[scf]\n");
        let _ = writeln!(s, "max_iterations = {}", c.max_iterations);
        let _ = writeln!(s, "min_iterations = {}", c.min_iterations);
        let _ = writeln!(s, "convergence_threshold = {}", fmt_f64(c.convergence_threshold));
        let _ = writeln!(s, "gap_floor = {}", fmt_f64(c.gap_floor));
        let _ = writeln!(s, "tie_tolerance = {}", fmt_f64(c.tie_tolerance));
        let _ = writeln!(s, "hf_residual_tolerance = {}", fmt_f64(c.hf_residual_tolerance));
        let _ = writeln!(s, "relation_tolerance = {}", fmt_f64(c.relation_tolerance));
        match &self.guess {
            GuessSpec::Core => s.push_str("initial_guess = core\n"),
            GuessSpec::Random => s.push_str("initial_guess = random\n"),
            GuessSpec::Density(p) => {
                let _ = writeln!(s, "initial_guess = density\ndensity_file = {}", p.display());
            }
        }
        let _ = writeln!(s, "seed = {}", self.seed);

        let d = &self.diagnostics;
        s.push_str("\n[diagnostics]\n");
        for (k, v) in [
            ("descent", d.descent),
            ("wpbound", d.wpbound),
            ("ubound", d.ubound),
            ("lojasiewicz", d.lojasiewicz),
            ("series", d.series),
            ("monitored", d.monitored),
            ("theorem1", d.theorem1),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "tail_fraction = {}", fmt_f64(d.tail_fraction));
        let _ = writeln!(s, "ubound_samples = {}", d.ubound_samples);

        s.push_str("\n[output]\n");
        let _ = writeln!(s, "dir = {}", self.output.dir.display());
        let _ = writeln!(s, "trace = {}", self.output.trace);
        let _ = writeln!(s, "report = {}", self.output.report);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
    }

    #[test]
    fn minimal_grid_document_gets_defaults() {
        let cfg = parse_config("[backend]\nkind = grid1d\n", Path::new(".")).unwrap();
        assert_eq!(cfg.backend, BackendConfig::Grid1d { params: GridParams { half_width: 12.0, points: 256, softening: 1.0 } });
        assert_eq!(cfg.electrons, 1);
        assert_eq!(cfg.scf, ScfConfig::default());
    }

    #[test]
    fn rejects_small_grid() {
        let err = parse_config("[backend]\nkind = grid1d\npoints = 4\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("n ≥ 16"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_config("[backend]\nkind = grid1d\n[scf\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 3, .. }), "{err:?}");
        let err = parse_config("[backend]\nkind = grid1d\nbogus line\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::ConfigSyntax { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn unknown_keys_and_missing_files_are_named() {
        let err = parse_config("[backend]\nkind = grid1d\nfoo = 1\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("backend.foo"));
        let err = parse_config("[backend]\nkind = gaussian\nbasis_file = nope.basis\nnuclei = H 0 0 0\n", Path::new("/tmp"))
            .unwrap_err();
        assert!(err.to_string().contains("nope.basis"));
    }

    #[test]
    fn h2_document_round_trips_through_echo() {
        let text = "[backend]\nkind = gaussian\nbasis_file = sto-3g.basis\nnuclei = H 0 0 0; H 0 0 1.4\nelectrons = 2\noccupation = closed-shell\n\n[scf]\nconvergence_threshold = 1e-11\nseed = 9\n";
        let cfg = parse_config(text, &data_dir()).unwrap();
        assert_eq!(cfg.nuclei[1].position, [0.0, 0.0, 1.4]);
        let echo = cfg.to_ini();
        let again = parse_config(&echo, Path::new("/")).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(echo, again.to_ini());
    }

    #[test]
    fn density_guess_requires_a_file() {
        let err = parse_config("[backend]\nkind = grid1d\n[scf]\ninitial_guess = density\n", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("density_file"));
    }
}
