//! Seeded Monte-Carlo experiment runner.
//!
//! A TOML [`ExperimentConfig`] describes one scenario; [`run_experiment`]
//! produces one [`ResultRow`] per realization, pilot length and scheme, and
//! [`write_results`] serializes them as CSV.

mod config;
mod output;
mod run;
mod scenario;

pub use config::{
    default_pilot_length, ArraySpec, EstimatorSpec, ExperimentConfig, NarrowbandSpec, ScenarioKind,
    WidebandSpec,
};
pub use output::{format_significant, write_results, ResultRow, RESULT_HEADER, RESULT_PREAMBLE};
pub use run::{
    match_errors, qpsk_pilots, realization_rng, run_experiment, run_narrowband_realization,
    run_wideband_realization, scan_objective, wideband_signal, ScanRow, ThetaGrid, SCAN_HEADER,
};
pub use scenario::{
    generate_narrowband_scenario, min_separation, well_separated, NarrowbandScenario,
    MAX_SEPARATION_ATTEMPTS, RESOLUTION_CONSTANT,
};
