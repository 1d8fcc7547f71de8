//! Linear SEM data model, DAG representation and exact covariance/precision algebra.
//!
//! The generating model is `X = B X + eps` with an acyclic weight matrix `B`
//! (`B[j][k]` is the weight of the edge `k -> j`, i.e. rows index children)
//! and independent zero-mean errors with variances `sigma2`. All algebra here
//! is exact up to floating point: the precision matrix is assembled as
//! `(I - B)^T diag(1/sigma2) (I - B)` and the covariance as its inverse.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::{Error, Result};

/// Entries of an analytic precision matrix below this magnitude are treated
/// as structural zeros (coefficient cancellation is flagged, not resolved).
pub const STRUCTURAL_ZERO_TOL: f64 = 1e-12;

/// A directed acyclic graph over nodes `0..p`.
///
/// Edges are stored both as a sorted pair set and as a dense adjacency
/// matrix (`adjacency[parent][child]`); the two are kept consistent by
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<bool>>,
}

impl Dag {
    /// Builds a DAG from directed edges `(parent, child)`.
    ///
    /// Rejects self-loops, out-of-range nodes and directed cycles.
    pub fn new(p: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        let mut adjacency = vec![vec![false; p]; p];
        for (j, k) in edges {
            if j >= p || k >= p {
                return Err(Error::InvalidModel(format!(
                    "edge ({j}, {k}) out of range for p = {p}"
                )));
            }
            if j == k {
                return Err(Error::InvalidModel(format!("self-loop at node {j}")));
            }
            set.insert((j, k));
            adjacency[j][k] = true;
        }
        let dag = Dag {
            p,
            edges: set,
            adjacency,
        };
        if dag.topological_order().is_none() {
            return Err(Error::Cyclic);
        }
        Ok(dag)
    }

    pub fn empty(p: usize) -> Self {
        Dag {
            p,
            edges: BTreeSet::new(),
            adjacency: vec![vec![false; p]; p],
        }
    }

    /// Chain `0 -> 1 -> ... -> p-1`.
    pub fn chain(p: usize) -> Self {
        Dag::new(p, (0..p.saturating_sub(1)).map(|j| (j, j + 1))).expect("chain is acyclic")
    }

    /// Star with hub `0` pointing at every other node.
    pub fn star(p: usize) -> Self {
        Dag::new(p, (1..p).map(|k| (0, k))).expect("star is acyclic")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.adjacency[parent][child]
    }

    pub fn adjacency(&self) -> &[Vec<bool>] {
        &self.adjacency
    }

    pub fn parents(&self, k: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.adjacency[j][k]).collect()
    }

    pub fn children(&self, j: usize) -> Vec<usize> {
        (0..self.p).filter(|&k| self.adjacency[j][k]).collect()
    }

    /// All ancestors of `k` (nodes with a directed path into `k`).
    pub fn ancestors(&self, k: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = self.parents(k);
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.parents(v));
            }
        }
        seen
    }

    /// All descendants of `j` (nodes reachable from `j`).
    pub fn descendants(&self, j: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = self.children(j);
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(self.children(v));
            }
        }
        seen
    }

    /// One topological order (Kahn's algorithm, smallest index first), or
    /// `None` if the graph is cyclic.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = (0..self.p).map(|k| self.parents(k).len()).collect();
        let mut ready: BTreeSet<usize> =
            (0..self.p).filter(|&k| indeg[k] == 0).collect();
        let mut order = Vec::with_capacity(self.p);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for c in self.children(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        (order.len() == self.p).then_some(order)
    }

    /// Neighbors in the moralized graph: parents, children and co-parents.
    pub fn moral_neighbors(&self, v: usize) -> BTreeSet<usize> {
        let mut nb: BTreeSet<usize> = self.parents(v).into_iter().collect();
        for c in self.children(v) {
            nb.insert(c);
            for co in self.parents(c) {
                nb.insert(co);
            }
        }
        nb.remove(&v);
        nb
    }

    /// Maximum degree of the moralized graph.
    pub fn moral_degree(&self) -> usize {
        (0..self.p)
            .map(|v| self.moral_neighbors(v).len())
            .max()
            .unwrap_or(0)
    }

    /// Restriction of the DAG to a node subset; nodes are relabelled by their
    /// position in `subset`.
    pub fn induced_subgraph(&self, subset: &[usize]) -> Result<Dag> {
        let pos: std::collections::HashMap<usize, usize> =
            subset.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let edges = self
            .edges
            .iter()
            .filter_map(|&(j, k)| Some((*pos.get(&j)?, *pos.get(&k)?)));
        Dag::new(subset.len(), edges)
    }
}

/// A node permutation; position `r` holds the `r`-th ordering element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ordering(pub Vec<usize>);

impl Ordering {
    pub fn new(pi: Vec<usize>) -> Result<Self> {
        let p = pi.len();
        let mut seen = vec![false; p];
        for &v in &pi {
            if v >= p || seen[v] {
                return Err(Error::InvalidArgument(format!(
                    "not a permutation of 0..{p}: {pi:?}"
                )));
            }
            seen[v] = true;
        }
        Ok(Ordering(pi))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Returns true iff every edge `(j, k)` has `j` before `k` in `pi`.
pub fn is_valid_ordering(dag: &Dag, pi: &Ordering) -> bool {
    if pi.len() != dag.p() {
        return false;
    }
    let mut pos = vec![0usize; dag.p()];
    for (r, &v) in pi.0.iter().enumerate() {
        pos[v] = r;
    }
    dag.edges().iter().all(|&(j, k)| pos[j] < pos[k])
}

/// Enumerates every topological ordering of a small DAG.
///
/// Refused for `p > 12`; the count can reach `p!`.
pub fn topological_orderings(dag: &Dag) -> Result<Vec<Ordering>> {
    if dag.p() > 12 {
        return Err(Error::InvalidArgument(format!(
            "ordering enumeration limited to p <= 12, got p = {}",
            dag.p()
        )));
    }
    let p = dag.p();
    let mut indeg: Vec<usize> = (0..p).map(|k| dag.parents(k).len()).collect();
    let mut used = vec![false; p];
    let mut prefix = Vec::with_capacity(p);
    let mut out = Vec::new();
    fn rec(
        dag: &Dag,
        indeg: &mut [usize],
        used: &mut [bool],
        prefix: &mut Vec<usize>,
        out: &mut Vec<Ordering>,
    ) {
        let p = dag.p();
        if prefix.len() == p {
            out.push(Ordering(prefix.clone()));
            return;
        }
        for v in 0..p {
            if !used[v] && indeg[v] == 0 {
                used[v] = true;
                prefix.push(v);
                for c in dag.children(v) {
                    indeg[c] -= 1;
                }
                rec(dag, indeg, used, prefix, out);
                for c in dag.children(v) {
                    indeg[c] += 1;
                }
                prefix.pop();
                used[v] = false;
            }
        }
    }
    rec(dag, &mut indeg, &mut used, &mut prefix, &mut out);
    Ok(out)
}

/// Error distribution attached to each node of a generating model.
///
/// Every law is zero-mean; `variance()` is its exact second moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorLaw {
    Gaussian { variance: f64 },
    Uniform { half_width: f64 },
    /// `N(0, base_variance)` conditioned on `|x| < cut`.
    TruncatedGaussian { base_variance: f64, cut: f64 },
    StudentT { dof: f64 },
}

impl ErrorLaw {
    /// Exact variance of the law.
    pub fn variance(&self) -> f64 {
        match *self {
            ErrorLaw::Gaussian { variance } => variance,
            ErrorLaw::Uniform { half_width } => half_width * half_width / 3.0,
            ErrorLaw::TruncatedGaussian { base_variance, cut } => {
                // Var of a symmetric two-sided truncation of N(0, s^2) at |x| < c:
                // s^2 * (1 - 2a phi(a) / (2 Phi(a) - 1)), a = c / s.
                let s = base_variance.sqrt();
                let a = cut / s;
                let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let mass = 2.0 * standard_normal_cdf(a) - 1.0;
                base_variance * (1.0 - 2.0 * a * phi / mass)
            }
            ErrorLaw::StudentT { dof } => dof / (dof - 2.0),
        }
    }
}

fn standard_normal_cdf(x: f64) -> f64 {
    // Abramowitz-Stegun 7.1.26 style erf via erfc of |x|/sqrt(2).
    0.5 * erfc_scalar(-x / std::f64::consts::SQRT_2)
}

fn erfc_scalar(x: f64) -> f64 {
    // W. J. Cody rational approximation; |error| < 1.2e-7 which is plenty
    // for variance bookkeeping (exact laws are sampled, never approximated).
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// A linear structural equation model: weight matrix `B` with
/// `B[(j, k)] = beta_{k,j}` (weight of edge `k -> j`), error variances and
/// per-node error laws.
#[derive(Debug, Clone)]
pub struct LinearSemModel {
    b: DMatrix<f64>,
    sigma2: DVector<f64>,
    error_laws: Vec<ErrorLaw>,
    dag: Dag,
}

impl LinearSemModel {
    /// Validates and builds a model. The support of `B` must be the
    /// transpose-adjacency of an acyclic DAG; all variances must be positive;
    /// each law's variance must equal the node's `sigma2` entry.
    pub fn new(b: DMatrix<f64>, sigma2: DVector<f64>, error_laws: Vec<ErrorLaw>) -> Result<Self> {
        let p = sigma2.len();
        if b.nrows() != p || b.ncols() != p {
            return Err(Error::Dimension(format!(
                "B is {}x{} but sigma2 has length {p}",
                b.nrows(),
                b.ncols()
            )));
        }
        if error_laws.len() != p {
            return Err(Error::Dimension(format!(
                "{} error laws for p = {p}",
                error_laws.len()
            )));
        }
        for (j, &v) in sigma2.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "sigma2[{j}] = {v} is not strictly positive"
                )));
            }
        }
        for (j, law) in error_laws.iter().enumerate() {
            let lv = law.variance();
            if (lv - sigma2[j]).abs() > 1e-8 * sigma2[j].max(1.0) {
                return Err(Error::InvalidModel(format!(
                    "error law variance {lv} at node {j} disagrees with sigma2 {}",
                    sigma2[j]
                )));
            }
        }
        let mut edges = Vec::new();
        for j in 0..p {
            for k in 0..p {
                if b[(j, k)] != 0.0 {
                    if j == k {
                        return Err(Error::InvalidModel(format!("self-weight at node {j}")));
                    }
                    edges.push((k, j)); // B[j][k] != 0 encodes edge k -> j
                }
            }
        }
        let dag = Dag::new(p, edges)?; // rejects cycles
        Ok(LinearSemModel {
            b,
            sigma2,
            error_laws,
            dag,
        })
    }

    /// Convenience constructor with Gaussian errors matching `sigma2`.
    pub fn gaussian(b: DMatrix<f64>, sigma2: DVector<f64>) -> Result<Self> {
        let laws = sigma2
            .iter()
            .map(|&v| ErrorLaw::Gaussian { variance: v })
            .collect();
        LinearSemModel::new(b, sigma2, laws)
    }

    /// Chain `0 -> 1 -> ... -> p-1` with constant weight and equal variances.
    pub fn chain(p: usize, beta: f64, sigma2: f64) -> Self {
        let mut b = DMatrix::zeros(p, p);
        for j in 0..p.saturating_sub(1) {
            b[(j + 1, j)] = beta;
        }
        LinearSemModel::gaussian(b, DVector::from_element(p, sigma2)).expect("valid chain")
    }

    /// Star with hub `0`, constant weight and equal variances.
    pub fn star(p: usize, beta: f64, sigma2: f64) -> Self {
        let mut b = DMatrix::zeros(p, p);
        for k in 1..p {
            b[(k, 0)] = beta;
        }
        LinearSemModel::gaussian(b, DVector::from_element(p, sigma2)).expect("valid star")
    }

    pub fn p(&self) -> usize {
        self.sigma2.len()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Weight of edge `parent -> child` (zero when absent).
    pub fn weight(&self, parent: usize, child: usize) -> f64 {
        self.b[(child, parent)]
    }

    pub fn sigma2(&self) -> &DVector<f64> {
        &self.sigma2
    }

    pub fn error_laws(&self) -> &[ErrorLaw] {
        &self.error_laws
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// Restriction of the model to a node subset (relabelled by position).
    /// Valid as a generating model whenever `subset` is ancestrally closed;
    /// callers working with leading ordering segments satisfy that.
    pub fn restrict(&self, subset: &[usize]) -> Result<LinearSemModel> {
        let m = subset.len();
        let mut b = DMatrix::zeros(m, m);
        for (i, &vi) in subset.iter().enumerate() {
            for (j, &vj) in subset.iter().enumerate() {
                b[(i, j)] = self.b[(vi, vj)];
            }
        }
        let sigma2 = DVector::from_iterator(m, subset.iter().map(|&v| self.sigma2[v]));
        let laws = subset.iter().map(|&v| self.error_laws[v].clone()).collect();
        LinearSemModel::new(b, sigma2, laws)
    }
}

/// A covariance matrix paired with its precision (inverse).
#[derive(Debug, Clone)]
pub struct CovariancePair {
    pub sigma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
}

impl CovariancePair {
    /// Both analytic routes at once: `omega` assembled from the model,
    /// `sigma` as its Cholesky inverse.
    pub fn from_model(model: &LinearSemModel) -> Result<Self> {
        let omega = precision_from_model(model)?;
        let sigma = spd_inverse(&omega)?;
        Ok(CovariancePair { sigma, omega })
    }
}

/// `Omega = (I - B)^T diag(1/sigma2) (I - B)`; symmetric positive definite
/// for any valid model.
pub fn precision_from_model(model: &LinearSemModel) -> Result<DMatrix<f64>> {
    let p = model.p();
    let mut ib = DMatrix::identity(p, p);
    ib -= model.b();
    let dinv = DMatrix::from_diagonal(&model.sigma2().map(|v| 1.0 / v));
    let omega = ib.transpose() * dinv * ib;
    Ok(symmetrize(&omega))
}

/// `Sigma = (I - B)^{-1} diag(sigma2) (I - B)^{-T}`, computed as the
/// Cholesky inverse of [`precision_from_model`].
pub fn covariance_from_model(model: &LinearSemModel) -> Result<DMatrix<f64>> {
    let omega = precision_from_model(model)?;
    spd_inverse(&omega)
}

/// Analytic off-diagonal precision entry:
/// `-beta_{k,j}/sigma_j^2 - beta_{j,k}/sigma_k^2
///  + sum over common children l of beta_{k,l} beta_{j,l} / sigma_l^2`.
pub fn precision_offdiag(model: &LinearSemModel, j: usize, k: usize) -> Result<f64> {
    if j == k {
        return Err(Error::InvalidArgument(
            "precision_offdiag requires j != k".into(),
        ));
    }
    let s2 = model.sigma2();
    let mut v = -model.weight(k, j) / s2[j] - model.weight(j, k) / s2[k];
    for l in 0..model.p() {
        if model.dag().has_edge(k, l) && model.dag().has_edge(j, l) {
            v += model.weight(k, l) * model.weight(j, l) / s2[l];
        }
    }
    Ok(v)
}

/// `(Sigma_{S,S})^{-1}`: the inverse of the partial covariance matrix on a
/// node subset. This is not a submatrix of `Omega`.
pub fn sub_precision(sigma: &DMatrix<f64>, subset: &[usize]) -> Result<DMatrix<f64>> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty subset".into()));
    }
    if let Some(&v) = subset.iter().find(|&&v| v >= sigma.nrows()) {
        return Err(Error::InvalidArgument(format!(
            "subset node {v} out of range for p = {}",
            sigma.nrows()
        )));
    }
    let sub = principal_submatrix(sigma, subset);
    spd_inverse(&sub)
}

/// [`sub_precision`] with the covariance built from the model.
pub fn sub_precision_of_model(model: &LinearSemModel, subset: &[usize]) -> Result<DMatrix<f64>> {
    sub_precision(&covariance_from_model(model)?, subset)
}

/// Principal submatrix with rows/columns picked by `subset` order.
pub fn principal_submatrix(m: &DMatrix<f64>, subset: &[usize]) -> DMatrix<f64> {
    let k = subset.len();
    DMatrix::from_fn(k, k, |i, j| m[(subset[i], subset[j])])
}

/// Cholesky-based SPD inverse. A failed factorization is the singularity
/// signal; the error carries a conditioning diagnostic.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m.clone().cholesky().ok_or_else(|| {
        let eig_min = m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        Error::NotPositiveDefinite(format!(
            "Cholesky failed on {}x{} matrix (min eigenvalue {eig_min:.3e})",
            m.nrows(),
            m.ncols()
        ))
    })?;
    Ok(symmetrize(&chol.inverse()))
}

/// Largest absolute eigenvalue of a symmetric matrix (its spectral norm).
pub fn spectral_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue_symmetric(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}
