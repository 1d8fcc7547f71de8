//! Replication sweep harness: runs the full generate/learn/score pipeline
//! over a grid of `(p, d_M, n, error law)` cells with deterministic
//! per-replication seeds derived from one master seed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::bagus::BagusConfig;
use crate::datagen::{generate_scenario, mix_seed, ErrorSpec, ScenarioSpec};
use crate::eval::{hamming_distance, ordering_correct};
use crate::learner::{learn_structure, LearnInput, LearnOptions};
use crate::model::Dag;
use crate::{Error, Result};

/// Grid of sweep cells (the Cartesian product of the four axes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub p: Vec<usize>,
    pub d_m: Vec<usize>,
    pub n: Vec<usize>,
    pub error_specs: Vec<ErrorSpec>,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<(usize, usize, usize, ErrorSpec)> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &d_m in &self.d_m {
                for &n in &self.n {
                    for &es in &self.error_specs {
                        out.push((p, d_m, n, es));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells().is_empty() {
            return Err(Error::InvalidArgument("sweep grid is empty".into()));
        }
        Ok(())
    }
}

/// One replication outcome. `hamming`/`ordering_ok` are absent when the
/// replication failed; the failure reason is kept alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: usize,
    pub d_m: usize,
    pub n: usize,
    pub error_spec: String,
    pub seed: u64,
    pub replication: usize,
    pub hamming: Option<usize>,
    pub ordering_ok: Option<bool>,
    pub runtime_ms: u64,
    pub failure: Option<String>,
}

/// Per-cell aggregate over successful replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub p: usize,
    pub d_m: usize,
    pub n: usize,
    pub error_spec: String,
    /// Rescaled sample-size axis `n / log p`.
    pub c_scaled: f64,
    pub mean_hamming: f64,
    pub sd_hamming: f64,
    pub ordering_ok_rate: f64,
    pub replications: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<CellAggregate>,
}

/// Deterministic per-replication seed.
pub fn replication_seed(master_seed: u64, cell_index: usize, replication: usize) -> u64 {
    mix_seed(
        mix_seed(master_seed, 0x5EED + cell_index as u64),
        1 + replication as u64,
    )
}

/// Runs every cell of the grid `replications` times. Hamming distances and
/// ordering validity are scored against the generated ground truth; failed
/// replications are recorded with their reason and excluded from the
/// aggregates. With `base_config = None` each cell uses the sample-size
/// defaults. Results are deterministic in `master_seed` regardless of
/// `threads`.
pub fn run_sweep(
    grid: &SweepGrid,
    replications: usize,
    base_config: Option<&BagusConfig>,
    master_seed: u64,
    threads: usize,
) -> Result<SweepResult> {
    grid.validate()?;
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be >= 1".into()));
    }
    let cells = grid.cells();
    let mut jobs = Vec::with_capacity(cells.len() * replications);
    for (ci, &(p, d_m, n, es)) in cells.iter().enumerate() {
        for rep in 0..replications {
            jobs.push((ci, p, d_m, n, es, rep, replication_seed(master_seed, ci, rep)));
        }
    }

    let run_job = |&(_, p, d_m, n, es, rep, seed): &(usize, usize, usize, usize, ErrorSpec, usize, u64)| {
        let start = Instant::now();
        let outcome = run_replication(p, d_m, n, es, seed, base_config);
        let runtime_ms = start.elapsed().as_millis() as u64;
        match outcome {
            Ok((hamming, ordering_ok)) => SweepRow {
                p,
                d_m,
                n,
                error_spec: es.label().to_string(),
                seed,
                replication: rep,
                hamming: Some(hamming),
                ordering_ok: Some(ordering_ok),
                runtime_ms,
                failure: None,
            },
            Err(e) => SweepRow {
                p,
                d_m,
                n,
                error_spec: es.label().to_string(),
                seed,
                replication: rep,
                hamming: None,
                ordering_ok: None,
                runtime_ms,
                failure: Some(e.to_string()),
            },
        }
    };

    let rows: Vec<SweepRow> = if threads == 1 {
        jobs.iter().map(run_job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(run_job).collect())
    };

    let cells = aggregate_rows(&rows);
    Ok(SweepResult { rows, cells })
}

fn run_replication(
    p: usize,
    d_m: usize,
    n: usize,
    es: ErrorSpec,
    seed: u64,
    base_config: Option<&BagusConfig>,
) -> Result<(usize, bool)> {
    let spec = ScenarioSpec::new(p, d_m, n, es, seed);
    let sc = generate_scenario(&spec)?;
    let config = match base_config {
        Some(c) => c.clone(),
        None => BagusConfig::defaults_for_n(n),
    };
    let res = learn_structure(
        LearnInput::Data(&sc.dataset),
        &config,
        LearnOptions::default(),
    )?;
    let est = Dag::new(p, res.edges_hat.iter().cloned())?;
    let hamming = hamming_distance(sc.model.dag(), &est)?;
    let ok = ordering_correct(sc.model.dag(), &res.ordering_hat);
    Ok((hamming, ok))
}

/// Serial aggregation of raw rows into cell summaries: mean and sample
/// standard deviation of the Hamming distance, ordering-validity rate and
/// the failure count.
pub fn aggregate_rows(rows: &[SweepRow]) -> Vec<CellAggregate> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(usize, usize, usize, String), Vec<&SweepRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.p, row.d_m, row.n, row.error_spec.clone()))
            .or_default()
            .push(row);
    }
    groups
        .into_iter()
        .map(|((p, d_m, n, error_spec), rows)| {
            let ok_rows: Vec<&&SweepRow> = rows.iter().filter(|r| r.failure.is_none()).collect();
            let failures = rows.len() - ok_rows.len();
            let k = ok_rows.len();
            let mean = if k > 0 {
                ok_rows.iter().map(|r| r.hamming.unwrap() as f64).sum::<f64>() / k as f64
            } else {
                f64::NAN
            };
            let sd = if k > 1 {
                let ss: f64 = ok_rows
                    .iter()
                    .map(|r| (r.hamming.unwrap() as f64 - mean).powi(2))
                    .sum();
                (ss / (k - 1) as f64).sqrt()
            } else {
                0.0
            };
            let ok_rate = if k > 0 {
                ok_rows.iter().filter(|r| r.ordering_ok.unwrap()).count() as f64 / k as f64
            } else {
                f64::NAN
            };
            CellAggregate {
                p,
                d_m,
                n,
                error_spec,
                c_scaled: n as f64 / (p as f64).ln(),
                mean_hamming: mean,
                sd_hamming: sd,
                ordering_ok_rate: ok_rate,
                replications: rows.len(),
                failures,
            }
        })
        .collect()
}
