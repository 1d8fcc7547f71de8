//! Solver-level contracts that span module boundaries: stationarity under
//! sample/penalty rescaling and objective bookkeeping on sampled data.

use baybn::bagus::{fit_map, BagusConfig};
use baybn::datagen::{generate_scenario, sample_covariance, ErrorSpec, ScenarioSpec};
use baybn::nalgebra::DMatrix;

fn tight(nu: f64, n: usize, tau: f64) -> BagusConfig {
    BagusConfig {
        nu0: nu,
        nu1: nu,
        eta: 0.5,
        tau,
        threshold_t: 0.5,
        spectral_bound_b0: None,
        max_outer_iters: 400,
        tol: 1e-12,
        inner_max_iters: 500,
        inner_tol: 1e-13,
        ..BagusConfig::defaults_for_n(n)
    }
}

/// Per-sample stationarity residual of the collapsed-prior (single Laplace)
/// objective: zero at an exact stationary point.
fn stationarity_residual(
    omega: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
    n: f64,
    nu: f64,
    tau: f64,
) -> f64 {
    let p = omega.nrows();
    let winv = omega.clone().try_inverse().unwrap();
    let mut worst = 0.0f64;
    for j in 0..p {
        let r = 0.5 * (sigma_hat[(j, j)] - winv[(j, j)]) + tau / n;
        worst = worst.max(r.abs());
        for k in (j + 1)..p {
            let g = sigma_hat[(j, k)] - winv[(j, k)];
            let theta = omega[(j, k)];
            let r = if theta != 0.0 {
                (g + theta.signum() / (n * nu)).abs()
            } else {
                (g.abs() - 1.0 / (n * nu)).max(0.0)
            };
            worst = worst.max(r.abs());
        }
    }
    worst
}

#[test]
fn rescaled_problem_has_identical_stationary_conditions() {
    // (sigma_hat, n, tau, nu) and (sigma_hat, 2n, 2tau, nu/2) share the same
    // per-sample optimality conditions; each fit must satisfy both.
    let spec = ScenarioSpec::new(5, 2, 300, ErrorSpec::GaussianEqualVar, 77);
    let sc = generate_scenario(&spec).unwrap();
    let (sigma_hat, n) = sample_covariance(&sc.dataset).unwrap();
    let nu = 0.05;
    let tau = 0.3;

    let fit_a = fit_map(&sigma_hat, n, &tight(nu, n, tau)).unwrap();
    let fit_b = fit_map(&sigma_hat, 2 * n, &tight(nu / 2.0, 2 * n, 2.0 * tau)).unwrap();
    assert!(fit_a.converged && fit_b.converged);

    for omega in [&fit_a.omega_hat, &fit_b.omega_hat] {
        let res_a = stationarity_residual(omega, &sigma_hat, n as f64, nu, tau);
        let res_b =
            stationarity_residual(omega, &sigma_hat, 2.0 * n as f64, nu / 2.0, 2.0 * tau);
        assert!(res_a < 1e-6, "residual under original scaling: {res_a}");
        assert!((res_a - res_b).abs() < 1e-12, "scalings disagree");
    }
    assert!((&fit_a.omega_hat - &fit_b.omega_hat).abs().max() < 1e-6);
}

#[test]
fn singular_covariance_still_fits() {
    // n < p: the sample covariance is rank-deficient; the diagonal
    // initialization and the log-det barrier keep iterates SPD.
    let spec = ScenarioSpec::new(12, 3, 8, ErrorSpec::GaussianEqualVar, 5);
    let sc = generate_scenario(&spec).unwrap();
    let (sigma_hat, n) = sample_covariance(&sc.dataset).unwrap();
    let fit = fit_map(&sigma_hat, n, &BagusConfig::defaults_for_n(n)).unwrap();
    assert!(fit.omega_hat.clone().cholesky().is_some());
    for w in fit.objective_trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-8);
    }
}

#[test]
fn spectral_bound_warning_is_reported() {
    let spec = ScenarioSpec::new(4, 2, 500, ErrorSpec::GaussianEqualVar, 9);
    let sc = generate_scenario(&spec).unwrap();
    let (sigma_hat, n) = sample_covariance(&sc.dataset).unwrap();
    let mut cfg = BagusConfig::defaults_for_n(n);
    cfg.spectral_bound_b0 = Some(1e-3); // deliberately violated
    let fit = fit_map(&sigma_hat, n, &cfg).unwrap();
    assert!(fit
        .warnings
        .iter()
        .any(|w| w.contains("spectral norm")), "{:?}", fit.warnings);
    assert!(fit.spectral_norm > 1e-3);
}
