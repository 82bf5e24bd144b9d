//! Command-line runner: cohort generation, simulation, two-stage training,
//! evaluation and CVGA plotting.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{
    cmd_cohort, cmd_evaluate, cmd_inspect_checkpoint, cmd_plot_cvga, cmd_simulate, cmd_train, load_cohort, Arm, ArmKind, EvaluationOutput,
};
pub use config::{RunConfig, OUTPUT_DIR_ENV};
pub use error::{exit, CliError, CliResult};
