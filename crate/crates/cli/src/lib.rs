//! Configuration, pipeline orchestration and the property suite behind the
//! `bcsgl` command.

pub mod config;
pub mod pipeline;
pub mod props;

pub use config::{validate_config, validate_config_with, ConfigIssue, Overrides, RunConfig};
pub use pipeline::{Pipeline, StageError, SweepKind, SweepOutcome};
pub use props::{prop_test_suite, Fault, PropResult};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const CONFIG_ERROR: u8 = 2;
    pub const NUMERICAL_FAILURE: u8 = 3;
    pub const ACCEPTANCE_REGRESSION: u8 = 4;
}

/// Runs every stage, writes `report.csv` and `config.json`, and returns the
/// pipeline for inspection. Sweep criteria failures are not errors here;
/// check [`Pipeline::all_passed`].
pub fn run_pipeline(config: RunConfig) -> Result<Pipeline, StageError> {
    let mut p = Pipeline::new(config);
    p.write_config()?;
    p.gap()?;
    p.coeffs()?;
    p.gl()?;
    for kind in SweepKind::ALL {
        p.sweep(kind)?;
    }
    p.write_report()?;
    Ok(p)
}
