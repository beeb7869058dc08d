//! Config parsing, trace and report serialization, and the run/scan/check
//! commands behind the CLI.

mod commands;
mod config;
mod report;
mod trace_file;

pub use commands::{
    apply_axis, check_trace, cmd_check, cmd_run, cmd_scan, execute_run, exit_code, parse_values, write_atomic,
    CommandOutcome, RunArtifacts, ScanOutcome, ScanRow, EXIT_CHECK_FAILED, EXIT_CONVERGED, EXIT_ERROR,
    EXIT_TWO_CYCLE, EXIT_UNDETERMINED, SCANNABLE, SCAN_TAIL,
};
pub use config::{load_config, load_density, parse_config, BackendConfig, GuessSpec, OutputConfig, RunConfig};
pub use report::{
    energy_summary, EnergySummary, FixedPointSummary, LojasiewiczSummary, Metadata, Report, RESIDUAL_CONVENTION,
    RNG_DESCRIPTION,
};
pub use trace_file::{fmt_real, TraceFile, TRACE_FORMAT, TRACE_VERSION};
