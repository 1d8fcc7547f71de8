//! Synthetic scenario generation: random DAGs under a moralized-degree cap,
//! random edge weights, error laws and i.i.d. sampling.
//!
//! Everything is a pure function of `(parameters, seed)`; the generator is
//! ChaCha12, which is seedable and produces identical streams on every
//! platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::model::{Dag, ErrorLaw, LinearSemModel};
use crate::{Error, Result};

/// Error-law family assigned to a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorSpec {
    /// Every node: `N(0, 2)`.
    GaussianEqualVar,
    /// Cyclic by node index: `U(-2.5, 2.5)`, `N(0, 2)`, then `N(0, 10)`
    /// truncated to `(-2.5, 2.5)`.
    SubGaussianMix,
    /// Student t with 10 degrees of freedom (variance 1.25).
    StudentT,
}

impl ErrorSpec {
    /// The law at node `j` (0-based).
    pub fn law_for_node(&self, j: usize) -> ErrorLaw {
        match self {
            ErrorSpec::GaussianEqualVar => ErrorLaw::Gaussian { variance: 2.0 },
            ErrorSpec::SubGaussianMix => match j % 3 {
                0 => ErrorLaw::Uniform { half_width: 2.5 },
                1 => ErrorLaw::Gaussian { variance: 2.0 },
                _ => ErrorLaw::TruncatedGaussian {
                    base_variance: 10.0,
                    cut: 2.5,
                },
            },
            ErrorSpec::StudentT => ErrorLaw::StudentT { dof: 10.0 },
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ErrorSpec::GaussianEqualVar => "gaussian",
            ErrorSpec::SubGaussianMix => "subgaussian_mix",
            ErrorSpec::StudentT => "student_t",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(ErrorSpec::GaussianEqualVar),
            "subgaussian_mix" => Ok(ErrorSpec::SubGaussianMix),
            "student_t" => Ok(ErrorSpec::StudentT),
            other => Err(Error::InvalidArgument(format!(
                "unknown error spec '{other}' (expected gaussian | subgaussian_mix | student_t)"
            ))),
        }
    }
}

/// Full description of a synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub p: usize,
    /// Target maximum degree of the moralized graph.
    pub d_m_cap: usize,
    /// Edge-weight magnitude range; signs are drawn equiprobably.
    pub weight_min: f64,
    pub weight_max: f64,
    pub error_spec: ErrorSpec,
    pub seed: u64,
    pub n: usize,
}

impl ScenarioSpec {
    pub fn new(p: usize, d_m_cap: usize, n: usize, error_spec: ErrorSpec, seed: u64) -> Self {
        ScenarioSpec {
            p,
            d_m_cap,
            weight_min: 0.5,
            weight_max: 1.0,
            error_spec,
            seed,
            n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidArgument("p must be >= 1".into()));
        }
        if self.d_m_cap == 0 {
            return Err(Error::InvalidArgument("d_m_cap must be >= 1".into()));
        }
        if !(self.weight_min > 0.0 && self.weight_min < self.weight_max) {
            return Err(Error::InvalidArgument(
                "weight magnitudes must satisfy 0 < min < max".into(),
            ));
        }
        Ok(())
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Scenario(ScenarioSpec),
    External { source: String },
}

/// An `n x p` observation matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub column_names: Vec<String>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if self.column_names.len() != self.p() {
            return Err(Error::Data("column name count differs from p".into()));
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("dataset contains non-finite entries".into()));
        }
        Ok(())
    }
}

/// Default column names `x1..xp`.
pub fn default_column_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// SplitMix64; used to derive independent stream seeds deterministically.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The initial edge probability of the random-DAG draw.
pub fn initial_edge_probability(p: usize, d_m_cap: usize) -> f64 {
    (3.0 * d_m_cap as f64 / p as f64).min(1.0)
}

/// Draws a random DAG whose moralized graph has maximum degree at most
/// `d_m_cap`.
///
/// A uniformly random permutation fixes the causal order; each forward pair
/// receives an edge with probability `q = min(1, 3 d_m_cap / p)`. Whenever
/// the realized moralized degree exceeds the cap, the whole graph is redrawn
/// with `q` lowered by 0.001 (floored at zero, where the empty graph always
/// satisfies the cap).
pub fn generate_dag(p: usize, d_m_cap: usize, seed: u64) -> Result<Dag> {
    generate_dag_with_rng(p, d_m_cap, &mut ChaCha12Rng::seed_from_u64(seed))
}

pub fn generate_dag_with_rng(p: usize, d_m_cap: usize, rng: &mut ChaCha12Rng) -> Result<Dag> {
    if p == 0 {
        return Err(Error::InvalidArgument("p must be >= 1".into()));
    }
    if d_m_cap == 0 {
        return Err(Error::InvalidArgument("d_m_cap must be >= 1".into()));
    }
    let mut q = initial_edge_probability(p, d_m_cap);
    loop {
        let mut order: Vec<usize> = (0..p).collect();
        // Fisher-Yates with the shared stream.
        for i in (1..p).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut edges = Vec::new();
        for a in 0..p {
            for b in (a + 1)..p {
                if rng.gen_bool(q) {
                    edges.push((order[a], order[b]));
                }
            }
        }
        let dag = Dag::new(p, edges)?;
        if dag.moral_degree() <= d_m_cap {
            return Ok(dag);
        }
        q = (q - 0.001).max(0.0);
    }
}

/// Assigns edge weights drawn uniformly from
/// `(-weight_max, -weight_min) U (weight_min, weight_max)` and returns the
/// model with Gaussian unit-variance placeholders replaced by the caller.
pub fn assign_weights(dag: &Dag, weight_min: f64, weight_max: f64, seed: u64) -> DMatrix<f64> {
    assign_weights_with_rng(
        dag,
        weight_min,
        weight_max,
        &mut ChaCha12Rng::seed_from_u64(seed),
    )
}

pub fn assign_weights_with_rng(
    dag: &Dag,
    weight_min: f64,
    weight_max: f64,
    rng: &mut ChaCha12Rng,
) -> DMatrix<f64> {
    let p = dag.p();
    let mut b = DMatrix::zeros(p, p);
    let mag = Uniform::new(weight_min, weight_max);
    for &(j, k) in dag.edges() {
        let m = mag.sample(rng);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        b[(k, j)] = sign * m; // edge j -> k lives at B[child][parent]
    }
    b
}

/// Draws one value from an error law.
fn sample_error(law: &ErrorLaw, rng: &mut ChaCha12Rng) -> f64 {
    match *law {
        ErrorLaw::Gaussian { variance } => {
            let z: f64 = StandardNormal.sample(rng);
            z * variance.sqrt()
        }
        ErrorLaw::Uniform { half_width } => rng.gen_range(-half_width..half_width),
        ErrorLaw::TruncatedGaussian { base_variance, cut } => {
            let base = Normal::new(0.0, base_variance.sqrt()).expect("valid normal");
            loop {
                let v = base.sample(rng);
                if v.abs() < cut {
                    return v;
                }
            }
        }
        ErrorLaw::StudentT { dof } => {
            let t = rand_distr::StudentT::new(dof).expect("valid dof");
            t.sample(rng)
        }
    }
}

/// Draws `n` i.i.d. observations from the model: errors per node law, then
/// `X_j = sum_parents beta X_parent + eps_j` along a topological order.
pub fn sample(model: &LinearSemModel, n: usize, seed: u64) -> Result<Dataset> {
    sample_with_rng(model, n, &mut ChaCha12Rng::seed_from_u64(seed), None)
}

pub fn sample_with_rng(
    model: &LinearSemModel,
    n: usize,
    rng: &mut ChaCha12Rng,
    provenance: Option<Provenance>,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let p = model.p();
    let order = model
        .dag()
        .topological_order()
        .ok_or(Error::Cyclic)?;
    let mut x = DMatrix::zeros(n, p);
    let parents: Vec<Vec<usize>> = (0..p).map(|j| model.dag().parents(j)).collect();
    for i in 0..n {
        for &j in &order {
            let mut v = sample_error(&model.error_laws()[j], rng);
            for &par in &parents[j] {
                v += model.weight(par, j) * x[(i, par)];
            }
            x[(i, j)] = v;
        }
    }
    Ok(Dataset {
        x,
        column_names: default_column_names(p),
        provenance: provenance.unwrap_or(Provenance::External {
            source: "in-memory".into(),
        }),
    })
}

/// A generated scenario: the ground-truth model and a sampled dataset.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub model: LinearSemModel,
    pub dataset: Dataset,
}

/// Runs the full pipeline for a scenario spec: DAG draw, weight assignment,
/// error-law attachment and sampling, each on an independent derived stream.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let dag = generate_dag(spec.p, spec.d_m_cap, mix_seed(spec.seed, 1))?;
    let b = assign_weights(&dag, spec.weight_min, spec.weight_max, mix_seed(spec.seed, 2));
    let laws: Vec<ErrorLaw> = (0..spec.p).map(|j| spec.error_spec.law_for_node(j)).collect();
    let sigma2 = DVector::from_iterator(spec.p, laws.iter().map(|l| l.variance()));
    let model = LinearSemModel::new(b, sigma2, laws)?;
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(spec.seed, 3));
    let dataset = sample_with_rng(
        &model,
        spec.n,
        &mut rng,
        Some(Provenance::Scenario(spec.clone())),
    )?;
    Ok(Scenario {
        spec: spec.clone(),
        model,
        dataset,
    })
}

/// Mean-centered, `1/n`-scaled sample covariance. Requires `n >= 2`.
pub fn sample_covariance(data: &Dataset) -> Result<(DMatrix<f64>, usize)> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Data(format!(
            "sample covariance needs n >= 2, got n = {n}"
        )));
    }
    let p = data.p();
    let nf = n as f64;
    let mut means = vec![0.0; p];
    for j in 0..p {
        means[j] = data.x.column(j).sum() / nf;
    }
    let mut cov = DMatrix::zeros(p, p);
    for i in 0..n {
        for j in 0..p {
            let dj = data.x[(i, j)] - means[j];
            for k in j..p {
                cov[(j, k)] += dj * (data.x[(i, k)] - means[k]);
            }
        }
    }
    for j in 0..p {
        for k in j..p {
            let v = cov[(j, k)] / nf;
            cov[(j, k)] = v;
            cov[(k, j)] = v;
        }
    }
    Ok((cov, n))
}
