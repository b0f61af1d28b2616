//! Monte Carlo studies comparing sampling designs and estimators.

pub mod config;
pub mod generators;
pub mod labels;
pub mod metrics;
pub mod report;
pub mod study;

pub use config::{LinearStudyConfig, LogisticStudyConfig, RestrictedStudyConfig, RestrictionConfig};
pub use labels::{Estimator, SchemeLabel};
pub use metrics::{metrics, percentile_ci, Metrics};
pub use report::{Design, ExperimentReport, PopulationSource, ReportRow, StudyKind};
pub use study::{
    replication_seed, run_linear_on_population, run_linear_study, run_logistic_on_population, run_logistic_study,
    run_restricted_on_population, run_restricted_study,
};
