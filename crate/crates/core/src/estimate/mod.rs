//! Monte Carlo estimation over replicated field samples.
//!
//! Replicate `i` under master seed `m` always sees the sample with seed
//! `replicate_seed(m, i)`, and reductions run in replicate order, so every
//! result is bitwise reproducible whatever the worker count.

mod mc;
mod output;
mod stats;
mod validate;

pub(crate) use mc::par_map_indexed;
pub use mc::{
    bisect_level, check_compatible, map_replicates, replicate_values, run_mc, run_mc_with,
    run_records, summarize, sweep_levels, BisectionParams, BisectionResult, BisectionStep,
    LevelCurve,
};
pub use output::{csv_bytes, read_csv, write_csv, CsvRow};
pub use stats::{wilson, Estimate, Stats, Z95};
pub use validate::{
    covariance, duality_check, field_covariance, fkg_check, kac_rice_bound, kac_rice_check,
    quantile, sprinkling_check, truncation_check, truncation_sd, CovarianceEstimate, DualityResult,
    KacRiceResult, LagCovariance, SprinklingResult, TruncationParams, TruncationRow,
};
