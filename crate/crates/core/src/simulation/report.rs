use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Linear,
    Restricted,
    Logistic,
}

impl StudyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Restricted => "restricted",
            Self::Logistic => "logistic",
        }
    }
}

/// Where the sampled units came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationSource {
    /// A fresh synthetic population per scheme draw.
    Synthetic,
    /// Repeated draws from one fixed finite population.
    Finite,
}

/// Collinearity setting of the generating design; absent for finite populations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub kappa: Option<f64>,
    pub phi: Option<f64>,
    pub eta: Option<f64>,
    pub cycles: usize,
    pub set_size: usize,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: String,
    pub estimator: String,
    /// Replications with a usable estimate.
    pub replications: usize,
    /// Replications where the estimator (or a fit it depends on) failed.
    pub failures: usize,
    pub mse: f64,
    pub median_sse: f64,
    /// `mse` over the baseline's `mse` (LS on SRS; ML on SRS for logistic studies).
    pub re: f64,
    /// 2.5% and 97.5% percentiles of the per-replication squared errors,
    /// linear interpolation between order statistics.
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Per-replication squared errors in replication order; `None` marks a failure.
    #[serde(skip)]
    pub sse: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub study: StudyKind,
    pub source: PopulationSource,
    pub design: Design,
    pub seed: u64,
    pub replications: usize,
    pub baseline: String,
    /// Observer probabilities clamped away from 0 or 1 (logistic studies).
    pub clamped_probabilities: usize,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, scheme: &str, estimator: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.scheme.eq_ignore_ascii_case(scheme) && r.estimator.eq_ignore_ascii_case(estimator))
    }

    pub fn total_failures(&self) -> usize {
        self.rows.iter().map(|r| r.failures).sum()
    }
}
