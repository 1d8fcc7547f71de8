//! Exactness properties of the backward learner on analytic (population)
//! covariance inputs.

use std::collections::BTreeSet;

use baybn::bagus::BagusConfig;
use baybn::datagen::{assign_weights, generate_dag};
use baybn::eval::{check_identifiability, ordering_correct, theory_report};
use baybn::learner::{learn_ordering_only, learn_structure, LearnInput, LearnOptions};
use baybn::model::{covariance_from_model, LinearSemModel};
use baybn::nalgebra::{DMatrix, DVector};

const POPULATION_N: usize = 1_000_000;

fn random_equal_variance_model(p: usize, d_m: usize, seed: u64) -> LinearSemModel {
    let dag = generate_dag(p, d_m, seed).unwrap();
    let b = assign_weights(&dag, 0.5, 1.0, seed ^ 0xABCD_EF01);
    LinearSemModel::gaussian(b, DVector::from_element(p, 1.0)).unwrap()
}

#[test]
fn backward_ordering_recovery_on_populations() {
    for seed in 0..30u64 {
        let p = 4 + (seed as usize % 5);
        let model = random_equal_variance_model(p, 3, seed);
        let ident = check_identifiability(&model).unwrap();
        assert!(ident.backward_ok, "equal variances must satisfy the gap");
        let sigma = covariance_from_model(&model).unwrap();
        let res = learn_ordering_only(
            LearnInput::Covariance { sigma_hat: &sigma, n: POPULATION_N },
            &BagusConfig::defaults_for_n(POPULATION_N),
            LearnOptions::default(),
        )
        .unwrap();
        assert!(
            ordering_correct(model.dag(), &res.ordering_hat),
            "seed {seed}: ordering {:?} invalid for edges {:?}",
            res.ordering_hat,
            model.dag().edges()
        );
    }
}

#[test]
fn parent_recovery_on_populations() {
    let mut checked = 0;
    for seed in 100..130u64 {
        let p = 4 + (seed as usize % 5);
        let model = random_equal_variance_model(p, 3, seed);
        // Only claim exactness when the smallest sub-model precision entry
        // over true edges is comfortably above the inclusion cutoff.
        let report = theory_report(&model).unwrap();
        if report.theta_min < 0.01 || !report.warnings.is_empty() {
            continue;
        }
        checked += 1;
        let sigma = covariance_from_model(&model).unwrap();
        let res = learn_structure(
            LearnInput::Covariance { sigma_hat: &sigma, n: POPULATION_N },
            &BagusConfig::defaults_for_n(POPULATION_N),
            LearnOptions::default(),
        )
        .unwrap();
        let truth: BTreeSet<(usize, usize)> = model.dag().edges().clone();
        assert_eq!(res.edges_hat, truth, "seed {seed}");
    }
    assert!(checked >= 25, "only {checked} models had the signal margin");
}

#[test]
fn column_relabelling_relabels_the_estimate() {
    // Tie-free chain with distinct weights; population input keeps the
    // whole run deterministic.
    let mut b = DMatrix::zeros(5, 5);
    for (j, w) in [0.9, -0.8, 0.7, -0.6].iter().enumerate() {
        b[(j + 1, j)] = *w;
    }
    let model = LinearSemModel::gaussian(b, DVector::from_element(5, 1.0)).unwrap();
    let sigma = covariance_from_model(&model).unwrap();
    let cfg = BagusConfig::defaults_for_n(POPULATION_N);
    let base = learn_structure(
        LearnInput::Covariance { sigma_hat: &sigma, n: POPULATION_N },
        &cfg,
        LearnOptions::default(),
    )
    .unwrap();

    for perm in [[4usize, 2, 0, 3, 1], [1, 0, 3, 4, 2]] {
        // relabelled[perm[i]][perm[j]] = sigma[i][j]
        let relabelled = DMatrix::from_fn(5, 5, |i, j| {
            let inv_i = perm.iter().position(|&v| v == i).unwrap();
            let inv_j = perm.iter().position(|&v| v == j).unwrap();
            sigma[(inv_i, inv_j)]
        });
        let res = learn_structure(
            LearnInput::Covariance { sigma_hat: &relabelled, n: POPULATION_N },
            &cfg,
            LearnOptions::default(),
        )
        .unwrap();
        let mapped: BTreeSet<(usize, usize)> = base
            .edges_hat
            .iter()
            .map(|&(a, c)| (perm[a], perm[c]))
            .collect();
        assert_eq!(res.edges_hat, mapped, "perm {perm:?}");
        let mapped_ordering: Vec<usize> =
            base.ordering_hat.0.iter().map(|&v| perm[v]).collect();
        assert_eq!(res.ordering_hat.0, mapped_ordering, "perm {perm:?}");
    }
}
