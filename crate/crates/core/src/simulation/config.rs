use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::labels::{Estimator, SchemeLabel};
use crate::error::{Error, Result};
use crate::linear::HkbVariant;
use crate::restricted::RestrictionSpec;

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearStudyConfig {
    /// Cycles `n`; the sample size is `n H`.
    #[serde(alias = "n")]
    pub cycles: usize,
    /// Set size `H`.
    #[serde(alias = "H", alias = "h")]
    pub set_size: usize,
    pub kappa: f64,
    pub beta0: Vec<f64>,
    pub sigma: f64,
    pub observer_rhos: Vec<f64>,
    /// DPS tie parameter.
    pub c: f64,
    pub replications: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeLabel>,
    pub estimators: Vec<Estimator>,
    pub hkb: HkbVariant,
    pub parallel: bool,
}

impl Default for LinearStudyConfig {
    fn default() -> Self {
        Self {
            cycles: 3,
            set_size: 3,
            kappa: 0.9,
            beta0: vec![0.25; 4],
            sigma: 1.0,
            observer_rhos: vec![1.0, 1.0, 1.0],
            c: 1.0,
            replications: 10_000,
            seed: 1,
            schemes: SchemeLabel::ALL.to_vec(),
            estimators: vec![Estimator::Ls, Estimator::Ridge, Estimator::LiuType],
            hkb: HkbVariant::default(),
            parallel: true,
        }
    }
}

fn check_common(cycles: usize, set_size: usize, c: f64, rhos: &[f64], replications: usize, schemes: &[SchemeLabel]) -> Result<()> {
    if cycles == 0 || set_size == 0 {
        return Err(config_err("cycles n and set size H must be positive"));
    }
    if replications == 0 {
        return Err(config_err("replications must be at least 1"));
    }
    if schemes.is_empty() {
        return Err(config_err("at least one sampling scheme is required"));
    }
    if schemes.iter().any(|s| *s != SchemeLabel::Srs) {
        if !(c > 0.0 && c.is_finite()) {
            return Err(config_err("tie parameter c must be positive"));
        }
        if rhos.is_empty() || rhos.iter().all(|&r| r == 0.0) {
            return Err(config_err("ranked schemes need observer correlations, not all zero"));
        }
        if rhos.iter().any(|r| !(-1.0..=1.0).contains(r)) {
            return Err(config_err("observer correlations must lie in [-1, 1]"));
        }
    }
    Ok(())
}

impl LinearStudyConfig {
    pub fn sample_size(&self) -> usize {
        self.cycles * self.set_size
    }

    pub fn validate(&self) -> Result<()> {
        check_common(self.cycles, self.set_size, self.c, &self.observer_rhos, self.replications, &self.schemes)?;
        if !(0.0..1.0).contains(&self.kappa) {
            return Err(config_err(format!("kappa must lie in [0, 1), got {}", self.kappa)));
        }
        if self.beta0.is_empty() || self.beta0.iter().any(|b| !b.is_finite()) {
            return Err(config_err("beta0 must be a non-empty vector of finite values"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(config_err("sigma must be finite and non-negative"));
        }
        if self.sample_size() <= self.beta0.len() {
            return Err(config_err(format!(
                "sample size n H = {} must exceed the number of coefficients {}",
                self.sample_size(),
                self.beta0.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_estimators(&self, restricted: bool) -> Result<()> {
        for e in &self.estimators {
            if *e == Estimator::Ml || (!restricted && e.needs_restriction()) {
                return Err(config_err(format!(
                    "estimator {} is not available in a {} study",
                    e.label(),
                    if restricted { "restricted" } else { "linear" }
                )));
            }
        }
        Ok(())
    }
}

/// Stochastic restriction as written in a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestrictionConfig {
    /// Rows of the restriction matrix `R`.
    #[serde(alias = "R")]
    pub matrix: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    pub v: f64,
    /// Standard deviation of the restriction noise `e` added to `r` per sample.
    pub noise_sd: f64,
}

impl Default for RestrictionConfig {
    fn default() -> Self {
        Self {
            matrix: vec![vec![1.0, -2.0, -2.0, -2.0]],
            r: vec![0.0],
            omega: vec![vec![1.0]],
            v: 1.0,
            noise_sd: 0.0015f64.sqrt(),
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(config_err(format!("{what} must be a non-empty rectangular array of rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl RestrictionConfig {
    pub fn to_spec(&self) -> Result<RestrictionSpec> {
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(config_err("restriction noise_sd must be finite and non-negative"));
        }
        let spec = RestrictionSpec::new(
            rows_to_matrix(&self.matrix, "restriction matrix")?,
            DVector::from_column_slice(&self.r),
            rows_to_matrix(&self.omega, "omega")?,
            self.v,
        )
        .map_err(|e| config_err(e.to_string()))?;
        if spec.omega.clone().cholesky().is_none() {
            return Err(config_err("omega must be positive definite"));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestrictedStudyConfig {
    pub study: LinearStudyConfig,
    pub restriction: RestrictionConfig,
}

impl Default for RestrictedStudyConfig {
    fn default() -> Self {
        Self {
            study: LinearStudyConfig {
                beta0: vec![0.6455, 0.0896, 0.1436, 0.1526],
                estimators: vec![Estimator::Ls, Estimator::Mixed, Estimator::Srr, Estimator::Srl],
                ..LinearStudyConfig::default()
            },
            restriction: RestrictionConfig::default(),
        }
    }
}

impl RestrictedStudyConfig {
    pub fn validate(&self) -> Result<RestrictionSpec> {
        self.study.validate()?;
        self.study.check_estimators(true)?;
        let spec = self.restriction.to_spec()?;
        if spec.r_matrix.ncols() != self.study.beta0.len() {
            return Err(config_err(format!(
                "restriction has {} columns but beta0 has {} entries",
                spec.r_matrix.ncols(),
                self.study.beta0.len()
            )));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticStudyConfig {
    #[serde(alias = "n")]
    pub cycles: usize,
    #[serde(alias = "H", alias = "h")]
    pub set_size: usize,
    pub phi: f64,
    pub eta: f64,
    /// Truth including the intercept when `intercept` is set.
    pub beta0: Vec<f64>,
    pub observer_rhos: Vec<f64>,
    pub c: f64,
    pub replications: usize,
    pub seed: u64,
    pub schemes: Vec<SchemeLabel>,
    pub estimators: Vec<Estimator>,
    pub intercept: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub parallel: bool,
}

impl Default for LogisticStudyConfig {
    fn default() -> Self {
        Self {
            cycles: 4,
            set_size: 6,
            phi: 0.95,
            eta: 0.95,
            beta0: vec![-0.2, 1.3, 0.8, -0.3, -0.9],
            observer_rhos: vec![0.95, 0.95],
            c: 0.2,
            replications: 10_000,
            seed: 1,
            schemes: SchemeLabel::ALL.to_vec(),
            estimators: Estimator::LOGISTIC.to_vec(),
            intercept: true,
            tol: crate::logistic::DEFAULT_TOL,
            max_iter: crate::logistic::DEFAULT_MAX_ITER,
            parallel: true,
        }
    }
}

impl LogisticStudyConfig {
    pub fn sample_size(&self) -> usize {
        self.cycles * self.set_size
    }

    /// Validation shared by synthetic and finite-population runs.
    pub(crate) fn validate_common(&self) -> Result<()> {
        check_common(self.cycles, self.set_size, self.c, &self.observer_rhos, self.replications, &self.schemes)?;
        for e in &self.estimators {
            if !Estimator::LOGISTIC.contains(e) {
                return Err(config_err(format!("estimator {} is not available in a logistic study", e.label())));
            }
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(config_err("tol must be positive and max_iter at least 1"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        for (name, v) in [("phi", self.phi), ("eta", self.eta)] {
            if !(0.0..1.0).contains(&v) {
                return Err(config_err(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        let expected = 4 + usize::from(self.intercept);
        if self.beta0.len() != expected {
            return Err(config_err(format!(
                "logistic beta0 needs {expected} entries (4 predictors{}), got {}",
                if self.intercept { " plus intercept" } else { "" },
                self.beta0.len()
            )));
        }
        if self.observer_rhos.iter().any(|r| r.abs() >= 1.0) {
            return Err(config_err("logistic observer correlations must lie in (-1, 1)"));
        }
        if self.sample_size() <= expected {
            return Err(config_err("sample size n H must exceed the number of coefficients"));
        }
        Ok(())
    }
}
