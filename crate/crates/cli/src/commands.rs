//! Command implementations. Every command writes its primary outputs
//! atomically into the output directory, echoes the fully-resolved
//! configuration as `resolved_config.json`, and segregates timing and
//! timestamps into `run_meta.json` so reruns with the same seed produce
//! byte-identical primary files.

use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use baybn::datagen::{generate_scenario, ScenarioSpec};
use baybn::eval::{
    edge_confusion, hamming_distance, ordering_correct, recommend_hyperparams, run_sweep,
    theory_report, SweepGrid,
};
use baybn::io::{
    read_dataset_csv, read_json, write_dataset_csv, write_edge_list_csv, write_json,
    write_sweep_aggregate_csv, write_sweep_raw_csv, LearnResultJson, MetricsJson, ModelJson,
};
use baybn::learner::{learn_structure, LearnInput, LearnOptions};
use baybn::model::{Dag, Ordering};

use crate::config::{BagusBlock, RunConfig, ScenarioBlock, TheoryBlock};
use crate::CliError;

const DEFAULT_SEED: u64 = 0;

fn out_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = config
        .out
        .clone()
        .ok_or_else(|| CliError::Config("no output directory (--out or config.out)".into()))?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Data(format!("cannot create output directory {dir}: {e}")))?;
    Ok(PathBuf::from(dir))
}

#[derive(Serialize)]
struct RunMeta {
    command: &'static str,
    version: &'static str,
    unix_time_s: u64,
    runtime_ms: u128,
}

fn write_meta(dir: &Path, command: &'static str, started: Instant) -> Result<(), CliError> {
    let meta = RunMeta {
        command,
        version: env!("CARGO_PKG_VERSION"),
        unix_time_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        runtime_ms: started.elapsed().as_millis(),
    };
    write_json(&dir.join("run_meta.json"), &meta).map_err(CliError::from)
}

fn echo_config(dir: &Path, resolved: &RunConfig) -> Result<(), CliError> {
    // The output path is invocation plumbing, not part of the run's
    // scientific configuration; dropping it keeps the echo byte-identical
    // across reruns into different directories.
    let mut echo = resolved.clone();
    echo.out = None;
    write_json(&dir.join("resolved_config.json"), &echo).map_err(CliError::from)
}

pub fn simulate(
    mut config: RunConfig,
    p: Option<usize>,
    d_m: Option<usize>,
    n: Option<usize>,
    error: Option<String>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let mut block = config.scenario.clone().unwrap_or(ScenarioBlock {
        p: p.unwrap_or(0),
        d_m_cap: d_m.unwrap_or(0),
        n: n.unwrap_or(0),
        weight_min: 0.5,
        weight_max: 1.0,
        error_spec: "gaussian".into(),
    });
    if let Some(p) = p {
        block.p = p;
    }
    if let Some(d_m) = d_m {
        block.d_m_cap = d_m;
    }
    if let Some(n) = n {
        block.n = n;
    }
    if let Some(error) = error {
        block.error_spec = error;
    }
    if block.p == 0 || block.d_m_cap == 0 || block.n == 0 {
        return Err(CliError::Config(
            "simulate requires p, d-m and n (flags or config.scenario)".into(),
        ));
    }
    let error_spec = block.error_spec()?;
    let seed = config.seed.unwrap_or(DEFAULT_SEED);
    let spec = ScenarioSpec {
        p: block.p,
        d_m_cap: block.d_m_cap,
        weight_min: block.weight_min,
        weight_max: block.weight_max,
        error_spec,
        seed,
        n: block.n,
    };
    let scenario = generate_scenario(&spec)?;

    config.scenario = Some(block);
    config.seed = Some(seed);
    let dir = out_dir(&config)?;
    write_dataset_csv(&dir.join("dataset.csv"), &scenario.dataset)?;
    let truth = ModelJson::from_model(
        &scenario.model,
        scenario.dataset.column_names.clone(),
        Some(spec),
    );
    write_json(&dir.join("truth.json"), &truth)?;
    echo_config(&dir, &config)?;
    write_meta(&dir, "simulate", started)?;
    println!(
        "simulate: p = {}, edges = {}, n = {} -> {}",
        scenario.model.p(),
        scenario.model.dag().n_edges(),
        scenario.dataset.n(),
        dir.display()
    );
    Ok(())
}

pub fn learn(mut config: RunConfig, data: Option<PathBuf>) -> Result<(), CliError> {
    let started = Instant::now();
    let data_path = data
        .map(|p| p.display().to_string())
        .or(config.learn.as_ref().map(|l| l.data.clone()))
        .ok_or_else(|| CliError::Config("learn requires --data or config.learn.data".into()))?;
    let dataset = read_dataset_csv(Path::new(&data_path))?;
    let n = dataset.n();
    let block = config.bagus.clone().unwrap_or_default();
    let bagus_config = block.resolve(n)?;
    let warm_start = block.warm_start.unwrap_or(false);

    let result = learn_structure(
        LearnInput::Data(&dataset),
        &bagus_config,
        LearnOptions { warm_start },
    )?;
    let result_json = LearnResultJson::from_result(&result, dataset.column_names.clone());

    config.learn = Some(crate::config::LearnBlock { data: data_path });
    config.bagus = Some(resolved_bagus_block(&bagus_config, warm_start));
    let dir = out_dir(&config)?;
    write_json(&dir.join("learn_result.json"), &result_json)?;
    write_edge_list_csv(&dir.join("edges.csv"), &result_json)?;
    echo_config(&dir, &config)?;
    write_meta(&dir, "learn", started)?;
    println!(
        "learn: p = {}, n = {n}, edges = {} -> {}",
        dataset.p(),
        result_json.edges.len(),
        dir.display()
    );
    Ok(())
}

fn resolved_bagus_block(cfg: &baybn::bagus::BagusConfig, warm_start: bool) -> BagusBlock {
    BagusBlock {
        nu0: Some(cfg.nu0),
        nu1: Some(cfg.nu1),
        eta: Some(cfg.eta),
        tau: Some(cfg.tau),
        threshold_t: Some(cfg.threshold_t),
        spectral_bound_b0: cfg.spectral_bound_b0,
        max_outer_iters: Some(cfg.max_outer_iters),
        tol: Some(cfg.tol),
        inner_max_iters: Some(cfg.inner_max_iters),
        inner_tol: Some(cfg.inner_tol),
        warm_start: Some(warm_start),
    }
}

pub fn eval(
    mut config: RunConfig,
    truth: Option<PathBuf>,
    estimate: Option<PathBuf>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let block = match (truth, estimate) {
        (Some(t), Some(e)) => crate::config::EvalBlock {
            truth: t.display().to_string(),
            estimate: e.display().to_string(),
        },
        _ => config
            .eval
            .clone()
            .ok_or_else(|| CliError::Config("eval requires --truth and --estimate".into()))?,
    };
    let truth_doc: ModelJson = read_json(Path::new(&block.truth))?;
    let truth_model = truth_doc.to_model()?;
    let est_doc: LearnResultJson = read_json(Path::new(&block.estimate))?;
    let p = truth_model.p();
    let est_dag = Dag::new(p, est_doc.edges.iter().map(|e| (e.parent, e.child)))
        .map_err(|e| CliError::Data(format!("estimate edges: {e}")))?;
    let hamming = hamming_distance(truth_model.dag(), &est_dag)?;
    let confusion = edge_confusion(truth_model.dag(), &est_dag)?;
    let ordering_ok = Ordering::new(est_doc.ordering.clone())
        .ok()
        .map(|pi| ordering_correct(truth_model.dag(), &pi));
    let metrics = MetricsJson {
        hamming,
        ordering_ok,
        true_positives: confusion.true_positives,
        false_positives: confusion.false_positives,
        false_negatives: confusion.false_negatives,
    };

    config.eval = Some(block);
    let dir = out_dir(&config)?;
    write_json(&dir.join("metrics.json"), &metrics)?;
    echo_config(&dir, &config)?;
    write_meta(&dir, "eval", started)?;
    println!(
        "eval: hamming = {hamming}, ordering_ok = {ordering_ok:?} -> {}",
        dir.display()
    );
    Ok(())
}

pub fn sweep(mut config: RunConfig, replications: Option<usize>) -> Result<(), CliError> {
    let started = Instant::now();
    let mut block = config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep requires config.sweep".into()))?;
    if let Some(r) = replications {
        block.replications = r;
    }
    let mut error_specs = Vec::new();
    for label in &block.error_specs {
        error_specs.push(baybn::datagen::ErrorSpec::parse(label)?);
    }
    let grid = SweepGrid {
        p: block.p.clone(),
        d_m: block.d_m.clone(),
        n: block.n.clone(),
        error_specs,
    };
    let seed = config.seed.unwrap_or(DEFAULT_SEED);
    let threads = config.threads.unwrap_or(0);
    let base = match &config.bagus {
        // A fixed prior block applies to every cell (absent fields resolved
        // at the first grid n); otherwise each cell resolves the
        // sample-size defaults for its own n.
        Some(b) if !b.is_empty() => {
            let n0 = *block.n.first().unwrap_or(&100);
            Some(b.resolve(n0)?)
        }
        _ => None,
    };
    let result = run_sweep(&grid, block.replications, base.as_ref(), seed, threads)?;

    config.sweep = Some(block);
    config.seed = Some(seed);
    config.threads = Some(threads);
    // Echo the fixed prior in full; an absent block means every cell used
    // the sample-size defaults for its own n.
    config.bagus = base.as_ref().map(|b| resolved_bagus_block(b, false));
    let dir = out_dir(&config)?;
    write_sweep_raw_csv(&dir.join("sweep_raw.csv"), &result.rows)?;
    write_sweep_aggregate_csv(&dir.join("sweep_agg.csv"), &result.cells)?;
    echo_config(&dir, &config)?;
    write_meta(&dir, "sweep", started)?;
    for cell in &result.cells {
        println!(
            "sweep: p = {:>3}, d_M = {}, n = {:>5}, {}: mean hamming = {:.3} (sd {:.3}, ordering ok {:.0}%, {} failures)",
            cell.p,
            cell.d_m,
            cell.n,
            cell.error_spec,
            cell.mean_hamming,
            cell.sd_hamming,
            100.0 * cell.ordering_ok_rate,
            cell.failures
        );
    }
    Ok(())
}

pub fn theory(
    mut config: RunConfig,
    model: Option<PathBuf>,
    n: Option<usize>,
    epsilon1: Option<f64>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let mut block = config.theory.clone().unwrap_or(TheoryBlock {
        model: String::new(),
        n: 10_000,
        epsilon1: 1.0,
    });
    if let Some(m) = model {
        block.model = m.display().to_string();
    }
    if let Some(n) = n {
        block.n = n;
    }
    if let Some(e) = epsilon1 {
        block.epsilon1 = e;
    }
    if block.model.is_empty() {
        return Err(CliError::Config("theory requires --model".into()));
    }
    let doc: ModelJson = read_json(Path::new(&block.model))?;
    let model = doc.to_model()?;
    let report = theory_report(&model)?;
    let recommendation = recommend_hyperparams(&report, block.n, model.p(), block.epsilon1)?;

    config.theory = Some(block);
    let dir = out_dir(&config)?;
    write_json(&dir.join("theory_report.json"), &report)?;
    write_json(&dir.join("admissibility.json"), &recommendation)?;
    echo_config(&dir, &config)?;
    write_meta(&dir, "theory", started)?;

    println!("theory report:");
    println!("  k1 (min eig Sigma)      {:.6}", report.k1);
    println!("  k2 (max diag Sigma)     {:.6}", report.k2);
    println!("  tau_min                 {:.6}", report.tau_min);
    println!("  theta_min               {:.6}", report.theta_min);
    println!("  M_Sigma                 {:.6}", report.m_sigma);
    println!("  M_Gamma_max / min       {:.6} / {:.6}", report.m_gamma_max, report.m_gamma_min);
    println!("  d / d_M                 {} / {}", report.d, report.d_m);
    println!(
        "  identifiability         forward {} / backward {}",
        report.forward_ok, report.backward_ok
    );
    let f = &recommendation.flags;
    println!("admissibility (constructed hyper-parameters):");
    println!(
        "  nu0 {:.6e}  nu1 {:.6e}  tau {:.6e}  eta {:.8}  T {:.8}",
        recommendation.config.nu0,
        recommendation.config.nu1,
        recommendation.config.tau,
        recommendation.config.eta,
        recommendation.config.threshold_t
    );
    for (name, ok) in [
        ("C3*eps1 <= k1^2 p/2", f.c3_epsilon_bound),
        ("C1+C3 curvature bound", f.c1_c3_bound),
        ("C2 > C3", f.c2_exceeds_c3),
        ("0 < nu0 < nu1", f.nu_scales_ordered),
        ("eta ratio condition", f.eta_condition),
        ("tau <= C3 n/(2p)", f.tau_condition),
        ("threshold window nonempty", f.t_window_nonempty),
        ("B0 window nonempty", f.b0_window_nonempty),
    ] {
        println!("  [{}] {name}", if ok { "ok" } else { "FAIL" });
    }
    Ok(())
}
