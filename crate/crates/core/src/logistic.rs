//! Logistic regression by iteratively re-weighted least squares, with ridge
//! and Liu-type shrinkage of the ML estimate and data-driven `(k, d)` rules.
//!
//! Datasets are used as given: callers that want an intercept prepend the
//! column of ones with [`Dataset::with_intercept`].

use nalgebra::{DMatrix, DVector};

use crate::dataset::{Dataset, ResponseKind};
use crate::error::{Error, Result};
use crate::linalg::{shifted, solve_checked, sym_eigen_desc};
use crate::linear::{ShrinkageParams, ShrinkageRule};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const MAX_HALVINGS: usize = 20;
/// Coefficient norm beyond which a fit is treated as diverging.
pub const DIVERGENCE_NORM: f64 = 1e6;
/// A terminal linear predictor this large in magnitude means fitted
/// probabilities within about 1e-13 of 0 or 1, i.e. (quasi-)separation.
pub const SATURATION_ETA: f64 = 30.0;
const WEIGHT_FLOOR: f64 = 1e-300;

/// `1 / (1 + exp(-eta))` without ever exponentiating a positive number.
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

pub fn link(x: &DVector<f64>, beta: &DVector<f64>) -> Result<f64> {
    if x.len() != beta.len() {
        return Err(Error::dims("predictor and coefficient lengths differ"));
    }
    Ok(logistic(x.dot(beta)))
}

/// `log(1 + exp(eta))`.
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Bernoulli log-likelihood `sum y eta - log(1 + exp(eta))`.
pub fn log_likelihood(data: &Dataset, beta: &DVector<f64>) -> f64 {
    let eta = data.x() * beta;
    eta.iter().zip(data.y().iter()).map(|(&e, &y)| y * e - softplus(e)).sum()
}

/// Score vector `Xᵀ(y - mu)`.
pub fn gradient(data: &Dataset, beta: &DVector<f64>) -> DVector<f64> {
    let mu = (data.x() * beta).map(logistic);
    data.x().tr_mul(&(data.y() - mu))
}

/// IRLS weights `mu (1 - mu)`, floored away from zero.
pub fn irls_weights(data: &Dataset, beta: &DVector<f64>) -> DVector<f64> {
    (data.x() * beta).map(|e| {
        let m = logistic(e);
        (m * (1.0 - m)).max(WEIGHT_FLOOR)
    })
}

/// `XᵀVX` with `V` evaluated at `beta`.
pub fn information_matrix(data: &Dataset, beta: &DVector<f64>) -> DMatrix<f64> {
    let w = irls_weights(data, beta);
    let mut xw = data.x().clone();
    for (mut row, &wi) in xw.row_iter_mut().zip(w.iter()) {
        row *= wi;
    }
    data.x().tr_mul(&xw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrlsState {
    pub beta: DVector<f64>,
    pub weights: DVector<f64>,
    pub iteration: usize,
    pub last_step_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFitResult {
    pub beta: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub params: Option<ShrinkageParams>,
    pub gradient_norm: f64,
    pub log_likelihood: f64,
}

fn check_binary(data: &Dataset) -> Result<()> {
    if data.kind() != ResponseKind::Binary {
        return Err(Error::invalid("logistic fitting needs a binary response"));
    }
    Ok(())
}

fn saturated(data: &Dataset, beta: &DVector<f64>) -> bool {
    beta.norm() > DIVERGENCE_NORM || (data.x() * beta).amax() > SATURATION_ETA
}

/// One IRLS update: weighted least squares of the working response
/// `z = X beta + V⁻¹(y - mu)` on `X` with weights `V`.
fn irls_step(data: &Dataset, state: &IrlsState) -> Result<DVector<f64>> {
    let x = data.x();
    let eta = x * &state.beta;
    let mut xw = x.clone();
    let mut wz = DVector::zeros(data.n());
    for i in 0..data.n() {
        let w = state.weights[i];
        let mu = logistic(eta[i]);
        let z = eta[i] + (data.y()[i] - mu) / w;
        wz[i] = w * z;
        xw.row_mut(i).scale_mut(w);
    }
    let (next, _) = solve_checked(&x.tr_mul(&xw), &x.tr_mul(&wz), "IRLS weighted normal equations")?;
    Ok(next)
}

/// Maximum-likelihood fit starting from `beta = 0`.
pub fn ml_fit(data: &Dataset, tol: f64, max_iter: usize) -> Result<LogisticFitResult> {
    check_binary(data)?;
    data.require_overdetermined()?;
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::invalid("tolerance must be positive and max_iter at least 1"));
    }
    let p = data.p();
    let beta = DVector::zeros(p);
    let mut state = IrlsState {
        weights: irls_weights(data, &beta),
        beta,
        iteration: 0,
        last_step_norm: f64::INFINITY,
    };
    let mut ll = log_likelihood(data, &state.beta);
    let mut grad_norm = gradient(data, &state.beta).norm();

    while state.iteration < max_iter {
        let target = match irls_step(data, &state) {
            Ok(t) => t,
            Err(e) if e.is_numerical() && saturated(data, &state.beta) => {
                return Err(Error::Separation(format!("weights collapsed at iteration {}", state.iteration)));
            }
            Err(e) => return Err(e),
        };
        let mut step = target - &state.beta;
        let mut candidate = &state.beta + &step;
        let mut cand_ll = log_likelihood(data, &candidate);
        let mut halvings = 0;
        while !(cand_ll >= ll) && halvings < MAX_HALVINGS {
            step *= 0.5;
            candidate = &state.beta + &step;
            cand_ll = log_likelihood(data, &candidate);
            halvings += 1;
        }
        state.iteration += 1;
        state.last_step_norm = step.norm();
        state.beta = candidate;
        state.weights = irls_weights(data, &state.beta);
        ll = cand_ll;
        grad_norm = gradient(data, &state.beta).norm();
        if !state.beta.iter().all(|b| b.is_finite()) || state.beta.norm() > DIVERGENCE_NORM {
            return Err(Error::Separation(format!(
                "coefficient norm diverged at iteration {}",
                state.iteration
            )));
        }
        if state.last_step_norm <= tol && grad_norm <= tol {
            break;
        }
    }

    if saturated(data, &state.beta) {
        return Err(Error::Separation(format!(
            "fitted probabilities saturate after {} iterations",
            state.iteration
        )));
    }
    if !(state.last_step_norm <= tol && grad_norm <= tol) {
        return Err(Error::NonConvergence {
            iterations: state.iteration,
            step_norm: state.last_step_norm,
            gradient_norm: grad_norm,
        });
    }
    Ok(LogisticFitResult {
        beta: state.beta,
        converged: true,
        iterations: state.iteration,
        params: None,
        gradient_norm: grad_norm,
        log_likelihood: ll,
    })
}

fn shrink(data: &Dataset, ml: &LogisticFitResult, k: f64, total: f64, params: ShrinkageParams) -> Result<LogisticFitResult> {
    if ml.beta.len() != data.p() {
        return Err(Error::dims("ML coefficients do not match the design width"));
    }
    let m = information_matrix(data, &ml.beta);
    // (M + kI)⁻¹(M - dI) b = b - (k + d)(M + kI)⁻¹ b
    let (t, _) = solve_checked(&shifted(&m, k), &ml.beta, "(XᵀVX + kI) system")?;
    let beta = &ml.beta - t * total;
    Ok(LogisticFitResult {
        log_likelihood: log_likelihood(data, &beta),
        gradient_norm: gradient(data, &beta).norm(),
        beta,
        converged: ml.converged,
        iterations: ml.iterations,
        params: Some(params),
    })
}

/// `(XᵀVX + kI)⁻¹ XᵀVX beta_ML` from an existing ML fit.
pub fn ridge_logistic_from_ml(data: &Dataset, ml: &LogisticFitResult, k: f64) -> Result<LogisticFitResult> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("ridge parameter must be finite and non-negative, got {k}")));
    }
    shrink(data, ml, k, k, ShrinkageParams::manual(k, 0.0))
}

/// `(XᵀVX + kI)⁻¹ (XᵀVX - dI) beta_ML` from an existing ML fit.
pub fn liu_logistic_from_ml(data: &Dataset, ml: &LogisticFitResult, k: f64, d: f64) -> Result<LogisticFitResult> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("Liu-type parameter k must be positive and finite, got {k}")));
    }
    if !d.is_finite() {
        return Err(Error::invalid("Liu parameter d must be finite"));
    }
    shrink(data, ml, k, k + d, ShrinkageParams::manual(k, d))
}

pub fn ridge_logistic_fit(data: &Dataset, k: f64) -> Result<LogisticFitResult> {
    let ml = ml_fit(data, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    ridge_logistic_from_ml(data, &ml, k)
}

pub fn liu_logistic_fit(data: &Dataset, k: f64, d: f64) -> Result<LogisticFitResult> {
    let ml = ml_fit(data, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    liu_logistic_from_ml(data, &ml, k, d)
}

/// `k = (p + 1) / beta_MLᵀ beta_ML`; `p` counts predictors, not the intercept.
pub fn select_k_logistic(ml: &LogisticFitResult, p: usize) -> Result<ShrinkageParams> {
    let ss = ml.beta.norm_squared();
    if !(ss > 0.0) || !ss.is_finite() {
        return Err(Error::DegenerateCoefficients(
            "ML coefficients are zero, k = (p + 1) / b'b is undefined".into(),
        ));
    }
    Ok(ShrinkageParams {
        k: (p as f64 + 1.0) / ss,
        d: 0.0,
        rule: ShrinkageRule::LogisticKp1,
    })
}

/// Plug-in MSE of the Liu-type logistic estimator as a function of `d`:
/// `tr(A M⁻¹ Aᵀ) + ||A M⁻¹ XᵀV mu - b||²` with `A = (M + kI)⁻¹(M - dI)`,
/// `M = XᵀVX`, and `V`, `mu`, `b` all taken at the ML estimate.
/// Evaluated through the eigen decomposition of `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiuLogisticObjective {
    k: f64,
    lambda: DVector<f64>,
    q: DMatrix<f64>,
    /// `Qᵀ M⁻¹ XᵀV mu`.
    qtg: DVector<f64>,
    beta: DVector<f64>,
}

impl LiuLogisticObjective {
    pub fn new(data: &Dataset, ml: &LogisticFitResult, k: f64) -> Result<Self> {
        if ml.beta.len() != data.p() {
            return Err(Error::dims("ML coefficients do not match the design width"));
        }
        let m = information_matrix(data, &ml.beta);
        let w = irls_weights(data, &ml.beta);
        let mu = (data.x() * &ml.beta).map(logistic);
        let xvmu = data.x().tr_mul(&w.component_mul(&mu));
        let (g, _) = solve_checked(&m, &xvmu, "XᵀVX")?;
        let (lambda, q) = sym_eigen_desc(&m);
        let qtg = q.tr_mul(&g);
        Ok(Self {
            k,
            lambda,
            q,
            qtg,
            beta: ml.beta.clone(),
        })
    }

    pub fn value(&self, d: f64) -> f64 {
        let k = self.k;
        let trace: f64 = self
            .lambda
            .iter()
            .map(|&l| (l - d).powi(2) / ((l + k).powi(2) * l))
            .sum();
        let scaled = DVector::from_fn(self.lambda.len(), |j, _| {
            let l = self.lambda[j];
            (l - d) / (l + k) * self.qtg[j]
        });
        let bias = &self.q * scaled - &self.beta;
        trace + bias.norm_squared()
    }
}

const GRID_STEP: f64 = 0.1;
const GRID_HALF_WIDTH: f64 = 50.0;
const GOLDEN_WIDTH: f64 = 1e-4;

/// Minimise `f` on `[lo, hi]` by golden-section search down to `width`.
pub(crate) fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, width: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    while hi - lo > width {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Grid search of [`LiuLogisticObjective`] over `d in [-k - 50, k + 50]` in
/// steps of 0.1, refined by golden section around the best grid point.
pub fn select_d_logistic(data: &Dataset, k: f64, ml: &LogisticFitResult) -> Result<ShrinkageParams> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("k must be positive and finite, got {k}")));
    }
    let objective = LiuLogisticObjective::new(data, ml, k)?;
    let d = minimise_over_grid(|d| objective.value(d), k)?;
    Ok(ShrinkageParams {
        k,
        d,
        rule: ShrinkageRule::LogisticMse,
    })
}

pub(crate) fn minimise_over_grid(f: impl Fn(f64) -> f64, k: f64) -> Result<f64> {
    let lo = -k - GRID_HALF_WIDTH;
    let steps = ((2.0 * (k + GRID_HALF_WIDTH)) / GRID_STEP).round() as usize;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..=steps {
        let d = lo + i as f64 * GRID_STEP;
        let v = f(d);
        if v.is_finite() && best.is_none_or(|(_, bv)| v < bv) {
            best = Some((d, v));
        }
    }
    let (d0, v0) = best.ok_or_else(|| Error::SelectionFailure("objective is non-finite across the whole d grid".into()))?;
    let refined = golden_section(&f, d0 - GRID_STEP, d0 + GRID_STEP, GOLDEN_WIDTH);
    let vr = f(refined);
    Ok(if vr.is_finite() && vr < v0 { refined } else { d0 })
}
