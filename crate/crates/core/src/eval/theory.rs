//! Theory quantities: assumption constants computed exactly from a model,
//! chain/star closed-form evaluation and the hyper-parameter constructor
//! with per-constraint admissibility flags.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bagus::BagusConfig;
use crate::eval::check_identifiability;
use crate::model::{
    min_eigenvalue_symmetric, precision_from_model, LinearSemModel, STRUCTURAL_ZERO_TOL,
};
use crate::{Error, Result};

/// Exactly computed assumption constants for a model.
///
/// Sub-model quantities run over the leading segments of the canonical
/// topological ordering. `m_gamma_*` are max-row-abs-sums of the restricted
/// Kronecker product `(Omega^(r) (x) Omega^(r))` over support-pair rows and
/// columns, built row by row without materializing the p^2 x p^2 matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryReport {
    /// Minimum eigenvalue of the covariance matrix.
    pub k1: f64,
    /// Maximum diagonal entry of the covariance matrix.
    pub k2: f64,
    /// Smallest backward diagonal gap over all (step, ancestor) pairs.
    pub tau_min: f64,
    /// Smallest nonzero |precision entry| over edges of every sub-model.
    pub theta_min: f64,
    /// Max-abs-row-sum norm of the covariance matrix.
    pub m_sigma: f64,
    pub m_gamma_max: f64,
    pub m_gamma_min: f64,
    /// Max nonzero count of any precision row over all sub-models
    /// (diagonal included).
    pub d: usize,
    /// Max degree of the moralized graph.
    pub d_m: usize,
    pub forward_ok: bool,
    pub backward_ok: bool,
    pub warnings: Vec<String>,
}

/// Guard: sub-model precision and restricted Kronecker row sums stay cheap.
const THEORY_MAX_P: usize = 60;

/// Computes every [`TheoryReport`] field numerically from the analytic model.
pub fn theory_report(model: &LinearSemModel) -> Result<TheoryReport> {
    let p = model.p();
    if p > THEORY_MAX_P {
        return Err(Error::InvalidArgument(format!(
            "theory_report limited to p <= {THEORY_MAX_P}, got p = {p}"
        )));
    }
    let pi = model
        .dag()
        .topological_order()
        .ok_or(Error::Cyclic)?;
    let sigma = crate::model::covariance_from_model(model)?;
    let k1 = min_eigenvalue_symmetric(&sigma);
    let k2 = sigma.diagonal().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let m_sigma = max_abs_row_sum(&sigma);

    let mut warnings = Vec::new();
    let mut m_gamma_max = f64::NEG_INFINITY;
    let mut m_gamma_min = f64::INFINITY;
    let mut theta_min = f64::INFINITY;
    let mut tau_min = f64::INFINITY;
    let mut d = 1usize;

    for m in 1..=p {
        let prefix = &pi[..m];
        let sub_model = model.restrict(prefix)?;
        let omega = precision_from_model(&sub_model)?;
        for i in 0..m {
            let nonzeros = (0..m)
                .filter(|&j| omega[(i, j)].abs() > STRUCTURAL_ZERO_TOL)
                .count();
            d = d.max(nonzeros);
        }
        if m >= 2 {
            let gamma = restricted_kronecker_norm(&omega);
            m_gamma_max = m_gamma_max.max(gamma);
            m_gamma_min = m_gamma_min.min(gamma);

            for &(a, b) in sub_model.dag().edges() {
                let v = omega[(a, b)].abs();
                if v <= STRUCTURAL_ZERO_TOL {
                    warnings.push(format!(
                        "edge ({}, {}) cancels to a structural zero in the {m}-node sub-model",
                        prefix[a], prefix[b]
                    ));
                } else {
                    theta_min = theta_min.min(v);
                }
            }

            // Backward gaps of this prefix: ancestors of the prefix's last node.
            let last = m - 1;
            let anc = sub_model.dag().ancestors(last);
            for pos in 0..last {
                if anc.contains(&pos) {
                    tau_min = tau_min.min(omega[(pos, pos)] - omega[(last, last)]);
                }
            }
        }
    }

    let ident = check_identifiability(model)?;
    Ok(TheoryReport {
        k1,
        k2,
        tau_min,
        theta_min,
        m_sigma,
        m_gamma_max,
        m_gamma_min,
        d,
        d_m: model.dag().moral_degree(),
        forward_ok: ident.forward_ok,
        backward_ok: ident.backward_ok,
        warnings,
    })
}

fn max_abs_row_sum(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max)
}

/// `max over (i,j) in S of sum over (k,l) in S of |Omega[i][k] Omega[j][l]|`
/// where `S` is the support of `Omega` (ordered pairs, diagonal included).
pub fn restricted_kronecker_norm(omega: &DMatrix<f64>) -> f64 {
    let p = omega.nrows();
    let mut support: Vec<(usize, usize)> = Vec::new();
    for i in 0..p {
        for j in 0..p {
            if omega[(i, j)].abs() > STRUCTURAL_ZERO_TOL {
                support.push((i, j));
            }
        }
    }
    let mut best = 0.0f64;
    for &(i, j) in &support {
        let mut row_sum = 0.0;
        for &(k, l) in &support {
            row_sum += (omega[(i, k)] * omega[(j, l)]).abs();
        }
        best = best.max(row_sum);
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormKind {
    Chain,
    Star,
}

/// Closed-form quantity set for the constant-weight chain and star models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedForms {
    pub m_gamma_max: f64,
    pub m_gamma_min: f64,
    pub m_sigma: f64,
    /// p-independent upper bound on `m_sigma` (chain only; infinite otherwise).
    pub m_sigma_upper: f64,
    pub k1_bound: f64,
    pub tau_min_bound: f64,
    pub theta_min_bound: f64,
}

/// Evaluates the closed-form expressions for the two reference graphs.
/// Chain `m_sigma` requires `|beta| < 1`.
pub fn chain_star_closed_forms(
    kind: ClosedFormKind,
    p: usize,
    beta: f64,
    sigma2: f64,
) -> Result<ClosedForms> {
    if p < 2 {
        return Err(Error::InvalidArgument("closed forms need p >= 2".into()));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("sigma2 must be > 0".into()));
    }
    let b = beta.abs();
    let s4 = sigma2 * sigma2;
    let forms = match kind {
        ClosedFormKind::Chain => {
            if b >= 1.0 {
                return Err(Error::InvalidArgument(
                    "chain m_sigma closed form requires |beta| < 1".into(),
                ));
            }
            let pf = p as i32;
            ClosedForms {
                m_gamma_max: (b.powi(4) + 2.0 * b.powi(3) + 4.0 * b * b + 2.0 * b + 1.0) / s4,
                m_gamma_min: (b.powi(4) + 2.0 * b.powi(3) + 3.0 * b * b + 2.0 * b + 1.0) / s4,
                m_sigma: (1.0 - b.powi(pf)) * (1.0 - b.powi(pf + 1))
                    / ((1.0 - b) * (1.0 - b * b))
                    * sigma2,
                m_sigma_upper: sigma2 / ((1.0 - b) * (1.0 - b * b)),
                k1_bound: sigma2 / (1.0 + b).powi(2),
                tau_min_bound: b * b / sigma2,
                theta_min_bound: b / sigma2,
            }
        }
        ClosedFormKind::Star => {
            let q = (p - 1) as f64;
            ClosedForms {
                m_gamma_max: (2.0 * q * q * b.powi(4)
                    + 2.0 * q * q * b.powi(3)
                    + 3.0 * q * b * b
                    + 2.0 * q * b
                    + 1.0)
                    / s4,
                m_gamma_min: (2.0 * b.powi(4) + 2.0 * b.powi(3) + 3.0 * b * b + 2.0 * b + 1.0)
                    / s4,
                m_sigma: (q * b + 1.0).max(q * b * b + b + 1.0) * sigma2,
                m_sigma_upper: f64::INFINITY,
                k1_bound: sigma2 / (1.0 + b).powi(2),
                tau_min_bound: b * b / sigma2,
                theta_min_bound: b / sigma2,
            }
        }
    };
    Ok(forms)
}

/// The constants appearing in the hyper-parameter construction.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RecommendationConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

/// Per-constraint satisfiability of the consistency-theorem conditions,
/// evaluated on the constructed hyper-parameters. Construction places
/// several quantities exactly on their boundary; those are accepted within
/// a relative tolerance of 1e-12.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdmissibilityFlags {
    /// `C3 eps1 <= k1^2 p / 2`.
    pub c3_epsilon_bound: bool,
    /// `C1 + C3 < (1 / 4 M_gamma_max) min{tau_min, 2 theta_min d, k1^2,
    /// 2/(3 M_sigma), 2/(3 M_gamma_max M_sigma^3)}`.
    pub c1_c3_bound: bool,
    /// `C2 > C3`.
    pub c2_exceeds_c3: bool,
    /// Constructed scales satisfy `nu1 > nu0 > 0`.
    pub nu_scales_ordered: bool,
    /// `nu1^2 (1-eta) / (nu0^2 eta) <= eps1 exp{2 (C2-C3) M_gamma_min (C4-C3) n/p^2}`.
    pub eta_condition: bool,
    /// `tau <= C3 n / (2p)`.
    pub tau_condition: bool,
    /// The threshold window `(0, (theta_min - 2(C1+C3) M_gamma_max / d)(1/nu0 - 1/nu1))`
    /// is nonempty.
    pub t_window_nonempty: bool,
    /// `1/k1 + 2 (C1+C3) M_gamma_max < sqrt(2 n nu0)`.
    pub b0_window_nonempty: bool,
}

impl AdmissibilityFlags {
    pub fn all_satisfiable(&self) -> bool {
        self.c3_epsilon_bound
            && self.c1_c3_bound
            && self.c2_exceeds_c3
            && self.nu_scales_ordered
            && self.eta_condition
            && self.tau_condition
            && self.t_window_nonempty
            && self.b0_window_nonempty
    }
}

/// Output of the hyper-parameter constructor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Recommendation {
    pub config: BagusConfig,
    pub constants: RecommendationConstants,
    pub flags: AdmissibilityFlags,
    /// Admissible spectral-bound window `(lower, upper)`.
    pub b0_window: (f64, f64),
    /// Width of the admissible log-odds threshold window.
    pub t_window_width: f64,
}

/// Builds the recommended hyper-parameters from a theory report:
/// `C1 = C3/10`, `C2 = d theta_min / (2 M_gamma_max)`, `C3` as half the
/// six-way minimum, then `nu1 = p(1+eps1)/(n C3)`, `nu0 = p/(n C4)`,
/// `tau = n C3/(2p)`, `eta = nu1^2/(nu1^2 + nu0^2 eps1)` and
/// `T = nu0 eta / (nu1(1-eta) + nu0 eta)`.
pub fn recommend_hyperparams(
    report: &TheoryReport,
    n: usize,
    p: usize,
    epsilon1: f64,
) -> Result<Recommendation> {
    if !(epsilon1 > 0.0) {
        return Err(Error::InvalidArgument("epsilon1 must be > 0".into()));
    }
    if n == 0 || p == 0 {
        return Err(Error::InvalidArgument("n and p must be >= 1".into()));
    }
    let m = report.m_gamma_max;
    let ms = report.m_sigma;
    let k1 = report.k1;
    let d = report.d as f64;
    let nf = n as f64;
    let pf = p as f64;

    let c3 = 0.5
        * [
            1.0 / (6.0 * m * ms),
            1.0 / (6.0 * m * m * ms.powi(3)),
            k1 * k1 / (4.0 * m),
            report.tau_min / (4.0 * m),
            d * report.theta_min / (2.0 * m),
            k1 * k1 * pf / (2.0 * epsilon1),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let c1 = c3 / 10.0;
    let c2 = d * report.theta_min / (2.0 * m);
    let c4 = c1 + ms * ms * 2.0 * (c1 + c3) * m + 6.0 * (c1 + c3).powi(2) * m * m * ms.powi(3);

    let nu1 = pf * (1.0 + epsilon1) / (nf * c3);
    let nu0 = pf / (nf * c4);
    let tau = nf * c3 / (2.0 * pf);
    let eta = nu1 * nu1 / (nu1 * nu1 + nu0 * nu0 * epsilon1);
    let t = nu0 * eta / (nu1 * (1.0 - eta) + nu0 * eta);

    let rel = 1.0 + 1e-12;
    let c1c3_cap = (1.0 / (4.0 * m))
        * [
            report.tau_min,
            2.0 * report.theta_min * d,
            k1 * k1,
            2.0 / (3.0 * ms),
            2.0 / (3.0 * m * ms.powi(3)),
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let eta_lhs = nu1 * nu1 * (1.0 - eta) / (nu0 * nu0 * eta);
    let eta_rhs = epsilon1 * (2.0 * (c2 - c3) * report.m_gamma_min * (c4 - c3) * nf / (pf * pf)).exp();
    let t_window_width = (report.theta_min - 2.0 * (c1 + c3) * m / d) * (1.0 / nu0 - 1.0 / nu1);
    let b0_lo = 1.0 / k1 + 2.0 * (c1 + c3) * m;
    let b0_hi = (2.0 * nf * nu0).sqrt();

    let flags = AdmissibilityFlags {
        c3_epsilon_bound: c3 * epsilon1 <= k1 * k1 * pf / 2.0 * rel,
        c1_c3_bound: c1 + c3 < c1c3_cap,
        c2_exceeds_c3: c2 > c3,
        nu_scales_ordered: nu0 > 0.0 && nu1 > nu0,
        eta_condition: eta_lhs <= eta_rhs * rel,
        tau_condition: tau <= nf * c3 / (2.0 * pf) * rel,
        t_window_nonempty: t_window_width > 0.0 && 1.0 / nu0 > 1.0 / nu1,
        b0_window_nonempty: b0_lo < b0_hi,
    };

    let config = BagusConfig {
        nu0,
        nu1,
        eta,
        tau,
        threshold_t: t,
        spectral_bound_b0: flags
            .b0_window_nonempty
            .then_some(0.5 * (b0_lo + b0_hi)),
        ..BagusConfig::defaults_for_n(n)
    };
    Ok(Recommendation {
        config,
        constants: RecommendationConstants { c1, c2, c3, c4 },
        flags,
        b0_window: (b0_lo, b0_hi),
        t_window_width,
    })
}
