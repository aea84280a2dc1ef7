//! Scenario files, batch runs and trajectory logs.

mod builtin;
mod log;
mod run;
mod scenario;

pub use builtin::{builtin, builtin_names, builtin_scenarios};
pub use log::{csv_header, fmt9, read_csv, round9, write_csv, Failure, TrajectoryLog, TrajectoryRow, CSV_COLUMNS, DIVERGED};
pub use run::{apply_preset, run, run_batch, simulation};
pub use scenario::{
    load_scenario, BodySpec, EnvironmentSpec, InitialSpec, MediumSpec, Scenario, ScenarioSpec, ScriptEntry, TerrainSpec,
    SCHEMA_VERSION,
};
