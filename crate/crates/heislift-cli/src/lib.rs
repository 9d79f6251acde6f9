//! Batch pipeline: load sites and boundary data, build the cube
//! decomposition, the simplicial complex, and the extension field, run
//! the enabled certification checks, and write the artifact bundle.
//!
//! The pipeline is a pure function of the config and input bytes:
//! reruns produce byte-identical outputs.

pub mod config;
pub mod pipeline;

pub use config::{AnalysisPlan, CheckKind, RunConfig, TargetConfig};
pub use pipeline::{run, validate, CheckResult, RunSummary, ValidationReport};

/// Process exit codes, one per failure family (messages name the module
/// that raised the error).
pub fn exit_code_for(err: &heislift::Error) -> i32 {
    match err {
        heislift::Error::Parse { .. } | heislift::Error::InvalidArgument { .. } => 2,
        heislift::Error::UnsupportedFill { .. } => 3,
        heislift::Error::Construction { .. } => 4,
        heislift::Error::Io(_) | heislift::Error::Json(_) => 6,
        _ => 1,
    }
}
