//! Configuration-driven batch front end for the quantile hedging engine.
//!
//! Parses one TOML config describing market, claim, options, and model set,
//! then runs one of seven modes (certify, superhedge, curve-alpha, curve-x,
//! strategy, oracle-check, convergence-sweep) and emits deterministic CSV or
//! structured-text results.

pub mod config;
pub mod run;

pub use config::{parse_alpha_grid, parse_levels, Mode, ModelForm, RunConfig};
pub use run::{build_pipeline, fmt12, run, Pipeline, RunOutput};

use qhedge_core::EngineError;

/// Exit code contract of the binary.
pub fn exit_code(err: &EngineError) -> i32 {
    match err {
        EngineError::Config(_) | EngineError::Domain(_) | EngineError::Structural(_) => 2,
        EngineError::Uncertified(_) => 3,
        EngineError::Resource(_) => 4,
        EngineError::Solver(_) => 5,
    }
}
