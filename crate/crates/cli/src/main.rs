use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scflab::io::{self, Report, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "scflab", version, about = "Instrumented Hartree-Fock SCF runs and convergence checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory; SCFLAB_OUT takes precedence when set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one SCF and write its trace and report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a config once per value of one numeric field.
    Scan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute every check from a trace file.
    Check {
        trace: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn out_dir(common: &Common, fallback: &Path) -> PathBuf {
    std::env::var_os("SCFLAB_OUT")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| common.out.clone())
        .unwrap_or_else(|| fallback.to_path_buf())
}

fn load(path: &Path, common: &Common) -> scflab::Result<io::RunConfig> {
    let mut cfg = io::load_config(path)?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

/// Config failures have no output directory from the config; write the
/// error report only when one was given explicitly.
fn config_failure(command: &str, common: &Common, err: &scflab::Error) -> i32 {
    eprintln!("error: {err}");
    let explicit = std::env::var_os("SCFLAB_OUT").filter(|v| !v.is_empty()).map(PathBuf::from).or(common.out.clone());
    if let Some(dir) = explicit {
        let path = dir.join("report.json");
        if let Err(e) = io::write_atomic(&path, &Report::error(command, err.to_string()).to_json()) {
            eprintln!("error: {e}");
        }
    }
    EXIT_ERROR
}

fn summarize(quiet: bool, outcome: &io::CommandOutcome) {
    if let Some(err) = &outcome.error {
        eprintln!("error: {err}");
    }
    if quiet {
        return;
    }
    let r = &outcome.report;
    if let Some(v) = r.verdict {
        println!("verdict: {}", v.as_str());
    }
    if let (Some(n), Some(e)) = (r.metadata.iterations, &r.energies) {
        println!("iterations: {n}  hf_energy: {:.12}  total: {:.12}", e.hf_energy, e.total_energy);
    }
    for c in &r.checks {
        let status = match (c.passed, c.advisory) {
            (true, _) => "pass",
            (false, true) => "fail (advisory)",
            (false, false) => "FAIL",
        };
        println!("  {:<16} {status:<16} {}", c.lemma_id.as_str(), c.details);
    }
    if let Some(p) = &outcome.trace_path {
        println!("trace:  {}", p.display());
    }
    println!("report: {}", outcome.report_path.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run { config, common } => match load(config, common) {
            Err(e) => config_failure("run", common, &e),
            Ok(cfg) => match io::cmd_run(&cfg, &out_dir(common, &cfg.output.dir)) {
                Ok(outcome) => {
                    summarize(common.quiet, &outcome);
                    outcome.exit_code
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ERROR
                }
            },
        },
        Command::Scan { config, axis, values, common } => {
            match load(config, common).and_then(|cfg| {
                let values = io::parse_values(values)?;
                io::cmd_scan(&cfg, axis, &values, &out_dir(common, &cfg.output.dir))
            }) {
                Err(e) => config_failure("scan", common, &e),
                Ok(scan) => {
                    if !common.quiet {
                        for r in &scan.rows {
                            let verdict = r.verdict.map_or("error", |v| v.as_str());
                            println!("{axis} = {:<10} {verdict:<24} iterations {}", r.value, r.iterations);
                            if let Some(e) = &r.error {
                                println!("    {e}");
                            }
                        }
                        println!("summary: {}", scan.summary_path.display());
                    }
                    scan.exit_code
                }
            }
        }
        Command::Check { trace, common } => {
            let fallback = trace.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            match io::cmd_check(trace, &out_dir(common, fallback), common.seed) {
                Ok(outcome) => {
                    summarize(common.quiet, &outcome);
                    outcome.exit_code
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_ERROR
                }
            }
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
