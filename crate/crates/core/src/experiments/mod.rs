//! Sampled-α scans of the minimal gap and checks of the almost-sure bounds
//! `N^{−(2+η)} < δ_min < N^{−(2−η)}`, with exponent fits and CSV/JSON output.

pub mod config;
pub mod grid;
pub mod run;
pub mod table;

pub use config::{
    AlphaConfig, ExperimentConfig, ExperimentKind, MRule, MRuleKind, OutputConfig, OutputFormat,
    Thresholds,
};
pub use grid::{borel_cantelli_grid, geometric_grid, GridKind, GridSpec};
pub use run::{
    gap_rows, prime_gap_experiment, rows_for_orbit, run, run_config, run_experiment,
    scan_minimal_gap, verify_theorem1, verify_theorem2, verify_three_gap, write_table,
    DDiagnostic, Manifest, Outcome, RowOptions, RunReport, Summary,
};
pub use table::{fit_exponent, ExponentFit, ResultRow, ResultTable};
