//! Fixtures shared by the benchmarks.

use credsel::data::standardize;
use credsel::experiment::replicate_dataset;
use credsel::Dataset;

/// Standardized simulated dataset with `n = 60` rows.
pub fn simulated(p: usize, rho: f64) -> Dataset {
    let (raw, _, _) = replicate_dataset(1, 60, p, rho, 0).expect("valid design");
    standardize(&raw).expect("no constant columns")
}
