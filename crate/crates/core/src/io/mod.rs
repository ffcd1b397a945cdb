//! Problem and experiment files, result persistence, the run manifest and
//! the stage pipeline behind the `twh` binary.

mod config;
mod files;
mod manifest;
mod pipeline;
mod problem;
mod report;
mod svg;

pub use config::{
    ContinuationSettings, ExperimentConfig, HomologySettings, LegSpec, LoadedExperiment, OrbitMethodChoice, OrbitSettings,
    ReportFlags, Stage, Tolerances, ValidationSettings, CONFIG_SCHEMA,
};
pub use files::{
    ContinuationFile, EndpointRecord, EnergyBound, HomologyFile, LegRecord, OrbitRecord, OrbitsFile, StationaryFile,
    ValidationFile, RESULT_SCHEMA, UNCERTIFIED_BANNER,
};
pub use manifest::{sha256_hex, FileRecord, RunManifest, StageRecord, StageWriter, MANIFEST_NAME, MANIFEST_SCHEMA};
pub use pipeline::{rank_summary, read_result, report_run, Overrides, Pipeline, StageOutcome};
pub use problem::{AlphaSpec, DomainName, DomainSpec, NonlinearitySpec, ProblemFile, PROBLEM_SCHEMA};
pub use report::{write_report, MONOTONE_SLACK};
pub use svg::{LinePlot, Series};

use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PREREQUISITE: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidPartition(_) | Error::NonRegularLevel { .. } => EXIT_CONFIG,
        Error::MissingPrerequisite(_) => EXIT_PREREQUISITE,
        Error::Io(_) | Error::Json(_) => EXIT_IO,
        _ => EXIT_CERTIFICATION,
    }
}

/// Short machine-readable name of the error variant.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Numeric(_) => "numeric",
        Error::Divergence { .. } => "divergence",
        Error::Singular(_) => "singular",
        Error::NonHyperbolic { .. } => "non_hyperbolic",
        Error::Stiffness { .. } => "stiffness",
        Error::AssemblyMismatch(_) => "assembly_mismatch",
        Error::InsufficientData(_) => "insufficient_data",
        Error::Degenerate(_) => "degenerate",
        Error::NonRegularLevel { .. } => "non_regular_level",
        Error::Uncertified(_) => "uncertified",
        Error::InvalidPartition(_) => "invalid_partition",
        Error::Validation(_) => "validation",
        Error::MissingPrerequisite(_) => "missing_prerequisite",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

/// `{"error": kind, "message": …, "exit_code": n}` for stderr.
pub fn diagnostic(e: &Error) -> serde_json::Value {
    serde_json::json!({ "error": error_kind(e), "message": e.to_string(), "exit_code": exit_code(e) })
}
