//! Spike-and-slab MAP estimation of a precision matrix (BAGUS).
//!
//! Off-diagonal entries carry a two-component Laplace mixture prior (narrow
//! spike of scale `nu0`, wide slab of scale `nu1`, mixing weight `eta`);
//! diagonal entries carry an exponential prior with rate `tau`. The MAP
//! estimate minimizes
//!
//! ```text
//! (n/2) [ tr(S W) - log det W ] + sum_{j<k} pen_ss(W[j][k]) + tau * tr(W)
//! ```
//!
//! via EM: the E-step computes per-entry slab responsibilities, which turn
//! the mixture penalty into an entry-weighted l1 penalty; the M-step runs
//! column-free exact coordinate descent on the weighted problem, maintaining
//! the running inverse with rank-one updates so every iterate stays positive
//! definite (the log-det barrier makes each one-dimensional minimizer
//! interior). Each E+M pair cannot increase the true objective (standard
//! minorize-maximize argument), which the tests assert.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::{spectral_norm_symmetric, symmetrize};
use crate::{Error, Result};

/// Prior hyper-parameters and solver controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BagusConfig {
    /// Spike scale; must satisfy `0 < nu0 <= nu1` (equality collapses the
    /// mixture to a single Laplace, i.e. a plain l1 penalty).
    pub nu0: f64,
    /// Slab scale.
    pub nu1: f64,
    /// Prior proportion of signals, in (0, 1).
    pub eta: f64,
    /// Exponential rate on diagonal entries.
    pub tau: f64,
    /// Posterior inclusion threshold, in (0, 1).
    pub threshold_t: f64,
    /// Spectral-norm bound; `None` leaves it unmonitored. Exceeding it
    /// produces a warning on the fit, not a failure.
    pub spectral_bound_b0: Option<f64>,
    pub max_outer_iters: usize,
    /// Outer convergence tolerance on the max-abs change of the iterate.
    pub tol: f64,
    pub inner_max_iters: usize,
    pub inner_tol: f64,
}

impl BagusConfig {
    /// The fixed experiment defaults: `nu0 = sqrt(1/(100 n))`, `nu1 = 1`,
    /// `tau = 1e-4`, `T = 0.5`, `eta = 0.5`.
    pub fn defaults_for_n(n: usize) -> Self {
        BagusConfig {
            nu0: (1.0 / (100.0 * n as f64)).sqrt(),
            nu1: 1.0,
            eta: 0.5,
            tau: 1e-4,
            threshold_t: 0.5,
            spectral_bound_b0: None,
            max_outer_iters: 100,
            tol: 1e-4,
            inner_max_iters: 200,
            inner_tol: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu0 > 0.0 && self.nu1 >= self.nu0) {
            return Err(Error::InvalidArgument(format!(
                "require nu1 >= nu0 > 0, got nu0 = {}, nu1 = {}",
                self.nu0, self.nu1
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidArgument(format!("eta = {} not in (0,1)", self.eta)));
        }
        if !(self.threshold_t > 0.0 && self.threshold_t < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold T = {} not in (0,1)",
                self.threshold_t
            )));
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau = {} must be > 0", self.tau)));
        }
        if !(self.tol > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be > 0".into()));
        }
        Ok(())
    }
}

/// Result of a MAP fit.
#[derive(Debug, Clone)]
pub struct PrecisionFit {
    pub omega_hat: DMatrix<f64>,
    /// Posterior inclusion probabilities, symmetric, diagonal fixed at 1.
    pub inclusion_prob: DMatrix<f64>,
    /// Objective value after initialization and after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iters: usize,
    pub spectral_norm: f64,
    pub warnings: Vec<String>,
}

/// Mixture penalty `-log[(eta/(2 nu1)) e^{-|t|/nu1} + ((1-eta)/(2 nu0)) e^{-|t|/nu0}]`.
pub fn pen_ss(theta: f64, config: &BagusConfig) -> f64 {
    let (a_slab, a_spike) = log_components(theta, config);
    -log_sum_exp(a_slab, a_spike)
}

fn log_components(theta: f64, config: &BagusConfig) -> (f64, f64) {
    let t = theta.abs();
    let a_slab = (config.eta / (2.0 * config.nu1)).ln() - t / config.nu1;
    let a_spike = ((1.0 - config.eta) / (2.0 * config.nu0)).ln() - t / config.nu0;
    (a_slab, a_spike)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Posterior probability that the slab generated an entry of size `theta`.
///
/// Nondecreasing in `|theta|` whenever `nu1 > nu0`; identically `eta` when
/// the two scales coincide.
pub fn inclusion_probability(theta: f64, config: &BagusConfig) -> f64 {
    let (a_slab, a_spike) = log_components(theta, config);
    1.0 / (1.0 + (a_spike - a_slab).exp())
}

/// E-step weight: expected l1 scale of an entry given its responsibility.
fn entry_weight(theta: f64, config: &BagusConfig) -> f64 {
    let p = inclusion_probability(theta, config);
    p / config.nu1 + (1.0 - p) / config.nu0
}

/// The MAP objective (a minimization; see [`fit_map`]). Rejects non-SPD input.
pub fn negative_log_posterior(
    omega: &DMatrix<f64>,
    sigma_hat: &DMatrix<f64>,
    n: usize,
    config: &BagusConfig,
) -> Result<f64> {
    let p = omega.nrows();
    if sigma_hat.nrows() != p || sigma_hat.ncols() != p || omega.ncols() != p {
        return Err(Error::Dimension("omega and sigma_hat must be p x p".into()));
    }
    let chol = omega
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("omega in objective".into()))?;
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let mut trace = 0.0;
    for j in 0..p {
        for i in 0..p {
            trace += sigma_hat[(i, j)] * omega[(j, i)];
        }
    }
    let mut pen = 0.0;
    for j in 0..p {
        for k in (j + 1)..p {
            pen += pen_ss(omega[(j, k)], config);
        }
    }
    let diag: f64 = omega.diagonal().iter().sum();
    Ok(0.5 * n as f64 * (trace - log_det) + pen + config.tau * diag)
}

/// All unordered pairs with inclusion probability at least `t`.
pub fn threshold_support(fit: &PrecisionFit, t: f64) -> Result<Vec<(usize, usize)>> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {t} not in (0,1)")));
    }
    let p = fit.inclusion_prob.nrows();
    let mut out = Vec::new();
    for j in 0..p {
        for k in (j + 1)..p {
            if fit.inclusion_prob[(j, k)] >= t {
                out.push((j, k));
            }
        }
    }
    Ok(out)
}

/// Fits the spike-and-slab precision MAP for a sample covariance matrix.
///
/// `sigma_hat` must be symmetric (PSD is enough; singular inputs are handled
/// by the ridge-diagonal initialization). Non-convergence after
/// `max_outer_iters` is reported through `converged = false`, not an error.
pub fn fit_map(sigma_hat: &DMatrix<f64>, n: usize, config: &BagusConfig) -> Result<PrecisionFit> {
    fit_map_with_init(sigma_hat, n, config, None)
}

/// [`fit_map`] with an explicit SPD starting point (used for warm starts
/// across shrinking subsets).
pub fn fit_map_with_init(
    sigma_hat: &DMatrix<f64>,
    n: usize,
    config: &BagusConfig,
    init: Option<&DMatrix<f64>>,
) -> Result<PrecisionFit> {
    config.validate()?;
    let p = sigma_hat.nrows();
    if p == 0 || sigma_hat.ncols() != p {
        return Err(Error::Dimension("sigma_hat must be square with p >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let scale = sigma_hat.abs().max().max(1.0);
    for j in 0..p {
        for k in 0..p {
            let d = (sigma_hat[(j, k)] - sigma_hat[(k, j)]).abs();
            if !sigma_hat[(j, k)].is_finite() || d > 1e-8 * scale {
                return Err(Error::Data(format!(
                    "sigma_hat not symmetric/finite at ({j}, {k})"
                )));
            }
        }
    }

    let nf = n as f64;
    if p == 1 {
        // Exact stationary point of (n/2)(s w - log w) + tau w.
        let w = nf / (nf * sigma_hat[(0, 0)] + 2.0 * config.tau);
        let omega = DMatrix::from_element(1, 1, w);
        let objective = negative_log_posterior(&omega, sigma_hat, n, config)?;
        return Ok(PrecisionFit {
            spectral_norm: w,
            omega_hat: omega,
            inclusion_prob: DMatrix::from_element(1, 1, 1.0),
            objective_trace: vec![objective],
            converged: true,
            iters: 0,
            warnings: warn_spectral(w, config),
        });
    }

    let omega = match init {
        Some(start) => {
            if start.nrows() != p || start.ncols() != p {
                return Err(Error::Dimension("init must be p x p".into()));
            }
            symmetrize(start)
        }
        None => {
            // Diagonal initialization: always SPD, robust to singular sigma_hat.
            let eps = 1e-4 * sigma_hat.diagonal().iter().sum::<f64>() / p as f64;
            let eps = if eps > 0.0 { eps } else { 1e-4 };
            let mut omega = DMatrix::zeros(p, p);
            for j in 0..p {
                omega[(j, j)] = 1.0 / (sigma_hat[(j, j)] + eps);
            }
            omega
        }
    };

    let mut state = CoordState::new(omega, sigma_hat.clone(), nf, config.tau)?;
    let mut trace = vec![negative_log_posterior(&state.omega, sigma_hat, n, config)?];
    let mut converged = false;
    let mut iters = 0;

    for _ in 0..config.max_outer_iters {
        iters += 1;
        // E-step: entry weights from current responsibilities.
        let mut weights = DMatrix::zeros(p, p);
        for j in 0..p {
            for k in (j + 1)..p {
                let w = entry_weight(state.omega[(j, k)], config);
                weights[(j, k)] = w;
                weights[(k, j)] = w;
            }
        }
        let before = state.omega.clone();
        // M-step: weighted-l1 penalized Gaussian MAP by coordinate descent.
        state.descend(&weights, config.inner_max_iters, config.inner_tol)?;
        trace.push(negative_log_posterior(&state.omega, sigma_hat, n, config)?);
        let delta = (&state.omega - &before).abs().max();
        if delta < config.tol {
            converged = true;
            break;
        }
    }

    let omega_hat = symmetrize(&state.omega);
    let mut inclusion = DMatrix::zeros(p, p);
    for j in 0..p {
        inclusion[(j, j)] = 1.0;
        for k in (j + 1)..p {
            let pr = inclusion_probability(omega_hat[(j, k)], config);
            inclusion[(j, k)] = pr;
            inclusion[(k, j)] = pr;
        }
    }
    let spectral = spectral_norm_symmetric(&omega_hat);
    let mut warnings = warn_spectral(spectral, config);
    if !converged {
        warnings.push(format!(
            "solver did not converge within {} outer iterations (last max-abs step above {})",
            config.max_outer_iters, config.tol
        ));
    }
    Ok(PrecisionFit {
        omega_hat,
        inclusion_prob: inclusion,
        objective_trace: trace,
        converged,
        iters,
        spectral_norm: spectral,
        warnings,
    })
}

fn warn_spectral(spectral: f64, config: &BagusConfig) -> Vec<String> {
    match config.spectral_bound_b0 {
        Some(b0) if spectral > b0 => vec![format!(
            "spectral norm {spectral:.6} exceeds configured bound B0 = {b0:.6}"
        )],
        _ => Vec::new(),
    }
}

/// Coordinate-descent state: the iterate and its maintained inverse.
struct CoordState {
    omega: DMatrix<f64>,
    winv: DMatrix<f64>,
    sigma_hat: DMatrix<f64>,
    n: f64,
    tau: f64,
    // scratch vectors for rank-one updates
    z: DVector<f64>,
    z2: DVector<f64>,
}

impl CoordState {
    fn new(omega: DMatrix<f64>, sigma_hat: DMatrix<f64>, n: f64, tau: f64) -> Result<Self> {
        let p = omega.nrows();
        let winv = refresh_inverse(&omega)?;
        Ok(CoordState {
            omega,
            winv,
            sigma_hat,
            n,
            tau,
            z: DVector::zeros(p),
            z2: DVector::zeros(p),
        })
    }

    /// Full sweeps of exact single-coordinate minimization until the largest
    /// parameter move drops below `tol` or `max_sweeps` is reached.
    fn descend(&mut self, weights: &DMatrix<f64>, max_sweeps: usize, tol: f64) -> Result<()> {
        let p = self.omega.nrows();
        for sweep in 0..max_sweeps {
            let mut max_move = 0.0f64;
            for j in 0..p {
                let d = self.update_diagonal(j);
                max_move = max_move.max(d.abs());
                for k in (j + 1)..p {
                    let d = self.update_offdiag(j, k, weights[(j, k)]);
                    max_move = max_move.max(d.abs());
                }
            }
            // Periodic refactorization keeps the maintained inverse honest
            // and doubles as the SPD check on the accepted iterate.
            if sweep % 4 == 3 {
                self.winv = refresh_inverse(&self.omega)?;
            }
            if max_move < tol {
                break;
            }
        }
        self.winv = refresh_inverse(&self.omega)?;
        Ok(())
    }

    /// Exact minimizer in the diagonal coordinate; returns the step taken.
    fn update_diagonal(&mut self, j: usize) -> f64 {
        let wjj = self.winv[(j, j)];
        let target = self.sigma_hat[(j, j)] + 2.0 * self.tau / self.n;
        let delta = 1.0 / target - 1.0 / wjj;
        if delta == 0.0 || !delta.is_finite() {
            return 0.0;
        }
        self.omega[(j, j)] += delta;
        // W <- W - delta (W e_j)(W e_j)^T / (1 + delta W_jj)
        let denom = 1.0 + delta * wjj;
        self.z.copy_from(&self.winv.column(j));
        self.winv.ger(-delta / denom, &self.z, &self.z, 1.0);
        delta
    }

    /// Exact minimizer in the symmetric off-diagonal pair `(j, k)` under an
    /// l1 weight `w`; returns the step taken.
    fn update_offdiag(&mut self, j: usize, k: usize, w: f64) -> f64 {
        let wjj = self.winv[(j, j)];
        let wkk = self.winv[(k, k)];
        let wjk = self.winv[(j, k)];
        let theta0 = self.omega[(j, k)];
        let s_jk = self.sigma_hat[(j, k)];
        let n = self.n;

        // Stay-at-zero fast path: subgradient check at the current point.
        if theta0 == 0.0 && (n * (s_jk - wjk)).abs() <= w {
            return 0.0;
        }

        // Feasible interval for delta: (1 + delta wjk)^2 - delta^2 wjj wkk > 0.
        let a = wjk * wjk - wjj * wkk; // strictly negative for SPD inverse
        let s = (wjj * wkk).sqrt();
        let lo = (-wjk + s) / a;
        let hi = (-wjk - s) / a;
        debug_assert!(lo < 0.0 && hi > 0.0);

        let phi = |delta: f64| -> f64 {
            let q = 1.0 + 2.0 * wjk * delta + a * delta * delta;
            let qp = 2.0 * wjk + 2.0 * a * delta;
            n * s_jk - 0.5 * n * qp / q
        };

        let kink = -theta0;
        let kink_feasible = kink > lo && kink < hi;
        let delta = if kink_feasible && phi(kink).abs() <= w {
            kink
        } else {
            // Pick the sign branch of the new theta and solve phi + sign*w = 0,
            // a quadratic in delta.
            let sign = if !kink_feasible {
                if kink <= lo {
                    1.0
                } else {
                    -1.0
                }
            } else if phi(kink) < -w {
                1.0
            } else {
                -1.0
            };
            let (blo, bhi) = if kink_feasible {
                if sign > 0.0 {
                    (kink, hi)
                } else {
                    (lo, kink)
                }
            } else {
                (lo, hi)
            };
            solve_branch(n, s_jk, sign * w, wjk, a, blo, bhi)
        };

        if delta == 0.0 || !delta.is_finite() {
            return 0.0;
        }
        self.omega[(j, k)] += delta;
        self.omega[(k, j)] = self.omega[(j, k)];
        // Snap to an exact zero when the kink was selected.
        if delta == kink {
            self.omega[(j, k)] = 0.0;
            self.omega[(k, j)] = 0.0;
        }
        self.rank_two_update(j, k, delta);
        delta
    }

    /// W <- (Omega + delta (e_j e_k^T + e_k e_j^T))^{-1} via two rank-one
    /// Sherman-Morrison steps, adding the positive-semidefinite part first.
    fn rank_two_update(&mut self, j: usize, k: usize, delta: f64) {
        let half = 0.5 * delta.abs();
        // delta (ej ek^T + ek ej^T) = (|d|/2)(uu^T - vv^T) with u, v chosen by sign.
        // u = ej + ek, v = ej - ek for delta > 0; swapped for delta < 0.
        let (c_add, c_sub) = (half, half);
        let plus_is_u = delta > 0.0;

        // First rank-one: + c_add * aa^T.
        self.z.fill(0.0);
        {
            let col_j = self.winv.column(j).clone_owned();
            let col_k = self.winv.column(k).clone_owned();
            if plus_is_u {
                self.z.copy_from(&(&col_j + &col_k));
            } else {
                self.z.copy_from(&(&col_j - &col_k));
            }
        }
        let aa = if plus_is_u {
            self.winv[(j, j)] + 2.0 * self.winv[(j, k)] + self.winv[(k, k)]
        } else {
            self.winv[(j, j)] - 2.0 * self.winv[(j, k)] + self.winv[(k, k)]
        };
        let denom1 = 1.0 + c_add * aa;
        let z = self.z.clone();
        self.winv.ger(-c_add / denom1, &z, &z, 1.0);

        // Second rank-one: - c_sub * bb^T.
        {
            let col_j = self.winv.column(j).clone_owned();
            let col_k = self.winv.column(k).clone_owned();
            if plus_is_u {
                self.z2.copy_from(&(&col_j - &col_k));
            } else {
                self.z2.copy_from(&(&col_j + &col_k));
            }
        }
        let bb = if plus_is_u {
            self.winv[(j, j)] - 2.0 * self.winv[(j, k)] + self.winv[(k, k)]
        } else {
            self.winv[(j, j)] + 2.0 * self.winv[(j, k)] + self.winv[(k, k)]
        };
        let denom2 = 1.0 - c_sub * bb;
        let z2 = self.z2.clone();
        self.winv.ger(c_sub / denom2, &z2, &z2, 1.0);
    }
}

fn refresh_inverse(omega: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    omega
        .clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or_else(|| {
            Error::NotPositiveDefinite(
                "coordinate descent produced a non-SPD iterate; step rejected".into(),
            )
        })
}

/// Solves `n s_jk + sw - (n/2) q'(delta)/q(delta) = 0` on `(blo, bhi)` where
/// `q(delta) = 1 + 2 wjk delta + a delta^2`. The smooth derivative is
/// strictly increasing, so the root is unique; a closed-form quadratic solve
/// is validated against the bracket with bisection as fallback.
fn solve_branch(n: f64, s_jk: f64, sw: f64, wjk: f64, a: f64, blo: f64, bhi: f64) -> f64 {
    let c = n * s_jk + sw;
    let psi = |delta: f64| -> f64 {
        let q = 1.0 + 2.0 * wjk * delta + a * delta * delta;
        let qp = 2.0 * wjk + 2.0 * a * delta;
        c - 0.5 * n * qp / q
    };
    // c q(delta) = (n/2) q'(delta)  <=>  A d^2 + B d + C = 0
    let qa = c * a;
    let qb = 2.0 * c * wjk - n * a;
    let qc = c - n * wjk;
    let mut candidates = [f64::NAN; 2];
    if qa.abs() < 1e-300 {
        if qb != 0.0 {
            candidates[0] = -qc / qb;
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let r = -0.5 * (qb + qb.signum() * sq);
            candidates[0] = r / qa;
            if r != 0.0 {
                candidates[1] = qc / r;
            }
        }
    }
    let width = bhi - blo;
    let margin = 1e-14 * width.max(1.0);
    for &cand in &candidates {
        if cand.is_finite() && cand > blo + margin && cand < bhi - margin {
            return cand;
        }
    }
    // Bisection fallback on the monotone derivative.
    let mut lo = blo;
    let mut hi = bhi;
    // The derivative runs to -inf at the left edge and +inf at the right edge
    // of the feasible interval; shrink edges until psi is finite and bracketing.
    let mut flo = psi(lo + 1e-12 * width);
    let mut fhi = psi(hi - 1e-12 * width);
    if !flo.is_finite() || !fhi.is_finite() || flo > 0.0 || fhi < 0.0 {
        // No sign change inside the branch: stay put.
        return 0.0;
    }
    lo += 1e-12 * width;
    hi -= 1e-12 * width;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = psi(mid);
        if !fm.is_finite() {
            break;
        }
        if fm < 0.0 {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
        if hi - lo < 1e-15 * width {
            break;
        }
    }
    let _ = (flo, fhi);
    0.5 * (lo + hi)
}
