//! Backward element-wise structure recovery.
//!
//! For `r = 1..p-1`: fit the spike-and-slab precision MAP on the sample
//! covariance of the remaining variables, place the node with the smallest
//! fitted diagonal at position `p+1-r` of the ordering, attach as parents
//! every remaining node whose inclusion probability with it reaches the
//! threshold, then drop the node and repeat. The single remaining node
//! becomes the first ordering element and receives no parents, so the
//! returned edge set is acyclic by construction.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::bagus::{fit_map_with_init, BagusConfig};
use crate::datagen::{sample_covariance, Dataset};
use crate::model::{principal_submatrix, Ordering};
use crate::{Error, Result};

/// Input to the learner: raw observations or a precomputed covariance with
/// its effective sample count.
pub enum LearnInput<'a> {
    Data(&'a Dataset),
    Covariance { sigma_hat: &'a DMatrix<f64>, n: usize },
}

/// Learner options beyond the prior configuration.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct LearnOptions {
    /// Warm-start each subset fit from the previous fit's principal
    /// submatrix instead of the diagonal initialization. Off by default:
    /// it changes solver trajectories.
    pub warm_start: bool,
}

/// Per-iteration record of the backward recovery.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepDiagnostic {
    /// Iteration index `r`, starting at 1.
    pub step: usize,
    /// Original indices of the variables still in play, ascending.
    pub subset: Vec<usize>,
    /// Chosen node (original index): the argmin of the fitted diagonal.
    pub chosen: usize,
    /// Fitted precision diagonal, aligned with `subset`.
    pub diag: Vec<f64>,
    /// Inclusion probabilities between `chosen` and each subset member
    /// (1.0 at its own position), aligned with `subset`.
    pub inclusion_row: Vec<f64>,
    /// Difference between the two smallest diagonal values; near-zero values
    /// signal a near-violation of the minimum-gap condition.
    pub diag_gap: f64,
    pub solver_converged: bool,
    pub warnings: Vec<String>,
}

/// Output of the structure learner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnResult {
    pub ordering_hat: Ordering,
    /// Directed edges `(parent, child)`; every edge points from earlier to
    /// later in `ordering_hat`.
    pub edges_hat: BTreeSet<(usize, usize)>,
    pub steps: Vec<StepDiagnostic>,
    pub config_used: BagusConfig,
    pub warnings: Vec<String>,
}

/// Runs the full backward recovery: ordering and parent sets.
pub fn learn_structure(
    input: LearnInput<'_>,
    config: &BagusConfig,
    options: LearnOptions,
) -> Result<LearnResult> {
    learn_impl(input, config, options, true)
}

/// Ordering recovery only; parent bookkeeping is skipped in the result.
pub fn learn_ordering_only(
    input: LearnInput<'_>,
    config: &BagusConfig,
    options: LearnOptions,
) -> Result<LearnResult> {
    learn_impl(input, config, options, false)
}

fn learn_impl(
    input: LearnInput<'_>,
    config: &BagusConfig,
    options: LearnOptions,
    collect_parents: bool,
) -> Result<LearnResult> {
    config.validate()?;
    let (sigma_hat, n) = match input {
        LearnInput::Data(data) => {
            data.validate()?;
            sample_covariance(data)?
        }
        LearnInput::Covariance { sigma_hat, n } => {
            if sigma_hat.nrows() != sigma_hat.ncols() {
                return Err(Error::Dimension("sigma_hat must be square".into()));
            }
            (sigma_hat.clone(), n)
        }
    };
    let p = sigma_hat.nrows();
    if p == 0 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }

    let mut pi = vec![usize::MAX; p];
    let mut edges = BTreeSet::new();
    let mut steps = Vec::with_capacity(p.saturating_sub(1));
    let mut warnings = Vec::new();
    let mut subset: Vec<usize> = (0..p).collect();
    // Previous fit aligned with the previous subset, for warm starts.
    let mut prev_fit: Option<(Vec<usize>, DMatrix<f64>)> = None;

    for r in 1..p {
        let sub_sigma = principal_submatrix(&sigma_hat, &subset);
        let m = subset.len();
        let init = if options.warm_start {
            prev_fit.as_ref().map(|(prev_subset, omega)| {
                let pos: Vec<usize> = subset
                    .iter()
                    .map(|v| prev_subset.iter().position(|w| w == v).expect("subset shrinks"))
                    .collect();
                principal_submatrix(omega, &pos)
            })
        } else {
            None
        };
        let fit = fit_map_with_init(&sub_sigma, n, config, init.as_ref())?;

        let mut step_warnings = fit.warnings.clone();
        if n < m {
            step_warnings.push(format!("n = {n} below remaining dimension {m} at step {r}"));
        }

        // Argmin of the fitted diagonal; ties resolved toward the lowest
        // original index because `subset` is ascending.
        let mut best_pos = 0;
        for i in 1..m {
            if fit.omega_hat[(i, i)] < fit.omega_hat[(best_pos, best_pos)] {
                best_pos = i;
            }
        }
        let chosen = subset[best_pos];
        let diag: Vec<f64> = (0..m).map(|i| fit.omega_hat[(i, i)]).collect();
        let mut sorted = diag.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let diag_gap = if m > 1 { sorted[1] - sorted[0] } else { f64::INFINITY };

        let inclusion_row: Vec<f64> =
            (0..m).map(|i| fit.inclusion_prob[(best_pos, i)]).collect();
        if collect_parents {
            for i in 0..m {
                if i != best_pos && inclusion_row[i] >= config.threshold_t {
                    edges.insert((subset[i], chosen));
                }
            }
        }

        if !fit.converged {
            step_warnings.push(format!("solver did not converge at step {r}"));
        }
        steps.push(StepDiagnostic {
            step: r,
            subset: subset.clone(),
            chosen,
            diag,
            inclusion_row,
            diag_gap,
            solver_converged: fit.converged,
            warnings: step_warnings,
        });

        pi[p - r] = chosen;
        prev_fit = Some((subset.clone(), fit.omega_hat));
        subset.remove(best_pos);
    }
    // The single remaining node opens the ordering and gets no parents.
    pi[0] = subset[0];

    for s in &steps {
        warnings.extend(s.warnings.iter().cloned());
    }
    Ok(LearnResult {
        ordering_hat: Ordering::new(pi)?,
        edges_hat: edges,
        steps,
        config_used: config.clone(),
        warnings,
    })
}
