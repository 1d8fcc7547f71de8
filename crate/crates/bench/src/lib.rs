//! Shared fixtures for the pipeline benchmarks.

use baybn::datagen::{generate_scenario, sample_covariance, ErrorSpec, Scenario, ScenarioSpec};
use baybn::nalgebra::DMatrix;

/// A reproducible scenario plus its sample covariance.
pub fn bench_scenario(p: usize, d_m: usize, n: usize, seed: u64) -> (Scenario, DMatrix<f64>) {
    let spec = ScenarioSpec::new(p, d_m, n, ErrorSpec::GaussianEqualVar, seed);
    let scenario = generate_scenario(&spec).expect("valid scenario");
    let (cov, _) = sample_covariance(&scenario.dataset).expect("covariance");
    (scenario, cov)
}
