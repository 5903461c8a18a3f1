//! Configuration and end-to-end workflows behind the command line.

mod config;
mod run;
mod witness;

pub use config::{Mode, OracleSettings, Preset, RunConfig};
pub use run::{
    build_problem, coeff_errors, field_errors, oracle_checks, oracle_table, run_invert, run_oracle, run_report, targets,
    InvertOutput, Oracle, OracleOutput, ResidualCheck, CONFIG_TXT, ERRORS_CSV, FIELDS_CSV, PRED_CSV, RUN_TXT,
    SENSORS_CSV, SUMMARY_CSV, TRAJECTORY_CSV,
};
pub use witness::{identifiability, total_loss, Identifiability, OracleField, Perturbation};
