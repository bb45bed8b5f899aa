//! Command-line driver: argument parsing, config resolution and the
//! subcommands.

pub mod args;
pub mod commands;
pub mod config;
mod resolve;

pub use commands::{
    cmd_design, cmd_evaluate, cmd_features, cmd_gen_data, cmd_predict, cmd_train, DesignSettings, EchoInput, EvaluateSettings,
    FeaturesSettings, GenDataSettings, PredictSettings, RoomInput, TrainSettings,
};
pub use resolve::resolve_and_run;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Exit status for an error: invalid input anywhere in the chain maps to 2.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let invalid = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<echoroom::Error>(),
            Some(echoroom::Error::InvalidInput(_) | echoroom::Error::UnsupportedVersion { .. })
        )
    });
    if invalid {
        EXIT_INVALID_INPUT
    } else {
        EXIT_FAILURE
    }
}
