//! Replication engine shared by the linear, restricted and logistic studies.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::config::{LinearStudyConfig, LogisticStudyConfig, RestrictedStudyConfig};
use super::generators::{
    gen_collinear_predictors, gen_linear_observer, gen_logistic_observer, gen_logistic_predictors, standardize,
};
use super::labels::{Estimator, SchemeLabel};
use super::metrics::{percentile_ci, summarise};
use super::report::{Design, ExperimentReport, PopulationSource, ReportRow, StudyKind};
use crate::dataset::{Dataset, ResponseKind};
use crate::error::{Error, Result};
use crate::linear::{liu_type_fit, ls_fit, ridge_fit, select_k_hkb, select_kd_liu, HkbVariant, ShrinkageParams};
use crate::logistic::{
    liu_logistic_from_ml, logistic, ml_fit, ridge_logistic_from_ml, select_d_logistic, select_k_logistic,
};
use crate::restricted::{
    liu_one_fit, mixed_fit, mixed_liu_fit, mixed_ridge_fit, srl_fit, srr_fit, RestrictionSpec,
};
use crate::sampling::{draw_sample, draw_sample_sequential, Population, SchemeSpec};

/// Seed of replication `index`: a SplitMix64 finaliser applied to the master
/// seed offset by the index, so every replication owns an independent stream
/// whatever order the replications run in.
pub fn replication_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Outcome {
    /// Scheme-major grid of squared errors.
    sse: Vec<Option<f64>>,
    clamped: usize,
}

fn replicate<F>(replications: usize, seed: u64, parallel: bool, f: F) -> Result<Vec<Outcome>>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Outcome> + Sync,
{
    let one = |i: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(replication_seed(seed, i as u64));
        f(&mut rng)
    };
    if parallel {
        (0..replications).into_par_iter().map(one).collect()
    } else {
        (0..replications).map(one).collect()
    }
}

/// Evaluation grid: the requested schemes and estimators plus the baseline cell.
struct Grid {
    schemes: Vec<SchemeLabel>,
    estimators: Vec<Estimator>,
    requested_schemes: Vec<SchemeLabel>,
    requested_estimators: Vec<Estimator>,
    baseline: (SchemeLabel, Estimator),
}

impl Grid {
    fn new(schemes: &[SchemeLabel], estimators: &[Estimator], baseline: (SchemeLabel, Estimator)) -> Self {
        let mut s = dedup(schemes);
        let mut e = dedup(estimators);
        if !s.contains(&baseline.0) {
            s.insert(0, baseline.0);
        }
        if !e.contains(&baseline.1) {
            e.insert(0, baseline.1);
        }
        Self {
            schemes: s,
            estimators: e,
            requested_schemes: dedup(schemes),
            requested_estimators: dedup(estimators),
            baseline,
        }
    }

    fn index(&self, s: SchemeLabel, e: Estimator) -> usize {
        let si = self.schemes.iter().position(|x| *x == s).expect("scheme in grid");
        let ei = self.estimators.iter().position(|x| *x == e).expect("estimator in grid");
        si * self.estimators.len() + ei
    }
}

fn dedup<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for &i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

fn summarise_cell(values: Vec<Option<f64>>) -> Result<(ReportRow, f64)> {
    let ok: Vec<f64> = values.iter().flatten().copied().collect();
    let failures = values.len() - ok.len();
    let mut row = ReportRow {
        scheme: String::new(),
        estimator: String::new(),
        replications: ok.len(),
        failures,
        mse: f64::NAN,
        median_sse: f64::NAN,
        re: f64::NAN,
        ci_lo: f64::NAN,
        ci_hi: f64::NAN,
        sse: values,
    };
    if !ok.is_empty() {
        let (lo, hi) = percentile_ci(&ok, 0.025, 0.975)?;
        let m = summarise(ok)?;
        row.mse = m.mse;
        row.median_sse = m.median_sse;
        row.ci_lo = lo;
        row.ci_hi = hi;
    }
    let mse = row.mse;
    Ok((row, mse))
}

fn assemble(
    study: StudyKind,
    source: PopulationSource,
    design: Design,
    seed: u64,
    grid: &Grid,
    outcomes: Vec<Outcome>,
) -> Result<ExperimentReport> {
    let replications = outcomes.len();
    let clamped_probabilities = outcomes.iter().map(|o| o.clamped).sum();
    let column = |idx: usize| outcomes.iter().map(|o| o.sse[idx]).collect::<Vec<_>>();
    let (_, baseline_mse) = summarise_cell(column(grid.index(grid.baseline.0, grid.baseline.1)))?;
    let mut rows = Vec::new();
    for &s in &grid.requested_schemes {
        for &e in &grid.requested_estimators {
            let (mut row, mse) = summarise_cell(column(grid.index(s, e)))?;
            row.scheme = s.as_str().to_owned();
            row.estimator = e.label().to_owned();
            row.re = if (s, e) == grid.baseline && mse.is_finite() {
                1.0
            } else {
                mse / baseline_mse
            };
            rows.push(row);
        }
    }
    Ok(ExperimentReport {
        study,
        source,
        design,
        seed,
        replications,
        baseline: format!("{},{}", grid.baseline.1.label(), grid.baseline.0.as_str()),
        clamped_probabilities,
        rows,
    })
}

fn sse(beta: &DVector<f64>, beta0: &DVector<f64>) -> Option<f64> {
    let v = (beta - beta0).norm_squared();
    v.is_finite().then_some(v)
}

/// Squared errors of the linear-model estimators on one sample. Shrinkage
/// parameters are chosen from the sample: HKB `k` for ridge, SRR and mixed
/// ridge; the Liu-type `(k, d)` rule for LT, and its `d` for LT1, SRL and mixed Liu.
fn linear_sse(
    data: &Dataset,
    restr: Option<&RestrictionSpec>,
    estimators: &[Estimator],
    hkb: HkbVariant,
    beta0: &DVector<f64>,
) -> Vec<Option<f64>> {
    let mut hkb_k: Option<Option<f64>> = None;
    let mut liu: Option<Option<ShrinkageParams>> = None;
    let mut k_hkb = || *hkb_k.get_or_insert_with(|| select_k_hkb(data, hkb).ok().map(|p| p.k));
    let mut liu_params = || *liu.get_or_insert_with(|| select_kd_liu(data).ok());
    estimators
        .iter()
        .map(|&e| {
            let fit = match e {
                Estimator::Ls => ls_fit(data),
                Estimator::Ridge => ridge_fit(data, k_hkb()?),
                Estimator::LiuType => {
                    let p = liu_params()?;
                    liu_type_fit(data, p.k, p.d)
                }
                Estimator::LiuOne => liu_one_fit(data, liu_params()?.d),
                Estimator::Mixed => mixed_fit(data, restr?),
                Estimator::MixedLiu => mixed_liu_fit(data, restr?, liu_params()?.d),
                Estimator::Srl => srl_fit(data, restr?, liu_params()?.d),
                Estimator::MixedRidge => mixed_ridge_fit(data, restr?, k_hkb()?),
                Estimator::Srr => srr_fit(data, restr?, k_hkb()?),
                Estimator::Ml => return None,
            };
            fit.ok().and_then(|f| sse(&f.beta, beta0))
        })
        .collect()
}

fn logistic_sse(
    data: &Dataset,
    estimators: &[Estimator],
    predictors: usize,
    tol: f64,
    max_iter: usize,
    beta0: &DVector<f64>,
) -> Vec<Option<f64>> {
    let Ok(ml) = ml_fit(data, tol, max_iter) else {
        return vec![None; estimators.len()];
    };
    let k = select_k_logistic(&ml, predictors).ok().map(|p| p.k);
    estimators
        .iter()
        .map(|&e| {
            let beta = match e {
                Estimator::Ml => Some(ml.beta.clone()),
                Estimator::Ridge => k.and_then(|k| ridge_logistic_from_ml(data, &ml, k).ok()).map(|f| f.beta),
                Estimator::LiuType => k.and_then(|k| {
                    let d = select_d_logistic(data, k, &ml).ok()?.d;
                    liu_logistic_from_ml(data, &ml, k, d).ok().map(|f| f.beta)
                }),
                _ => None,
            };
            beta.and_then(|b| sse(&b, beta0))
        })
        .collect()
}

fn normal_vector<R: Rng + ?Sized>(len: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Units consumed by one sample of `spec`.
fn units_needed(spec: &SchemeSpec) -> usize {
    let per_cycle = if spec.scheme.is_ranked() {
        spec.set_size * spec.set_size
    } else {
        spec.set_size
    };
    per_cycle * spec.cycles
}

fn linear_population<R: Rng + ?Sized>(rng: &mut R, units: usize, cfg: &LinearStudyConfig) -> Result<Population> {
    let beta0 = DVector::from_column_slice(&cfg.beta0);
    let x = gen_collinear_predictors(units, beta0.len(), cfg.kappa, rng)?;
    let y = &x * &beta0 + normal_vector(units, rng) * cfg.sigma;
    let y_std = standardize(&y);
    let mut scores = DMatrix::zeros(units, cfg.observer_rhos.len());
    for (j, &rho) in cfg.observer_rhos.iter().enumerate() {
        scores.set_column(j, &gen_linear_observer(&y_std, rho, rng)?);
    }
    Population::new(y, x, scores, ResponseKind::Continuous)
}

fn logistic_population<R: Rng + ?Sized>(
    rng: &mut R,
    units: usize,
    cfg: &LogisticStudyConfig,
) -> Result<(Population, usize)> {
    let beta0 = DVector::from_column_slice(&cfg.beta0);
    let x = gen_logistic_predictors(units, cfg.phi, cfg.eta, rng)?;
    let design = if cfg.intercept { x.clone().insert_column(0, 1.0) } else { x.clone() };
    let eta = &design * &beta0;
    let y = eta.map(|e| if rng.random::<f64>() < logistic(e) { 1.0 } else { 0.0 });
    let mut scores = DMatrix::zeros(units, cfg.observer_rhos.len());
    let mut clamped = 0;
    for (j, &rho) in cfg.observer_rhos.iter().enumerate() {
        let (s, c) = gen_logistic_observer(&y, &design, &beta0, rho, rng)?;
        scores.set_column(j, &s);
        clamped += c;
    }
    Ok((Population::new(y, x, scores, ResponseKind::Binary)?, clamped))
}

/// Restriction with `r` replaced by `r + e`, `e = noise_sd L z`, `Omega = L Lᵀ`.
fn perturbed_restriction<R: Rng + ?Sized>(
    spec: &RestrictionSpec,
    chol: &DMatrix<f64>,
    noise_sd: f64,
    rng: &mut R,
) -> RestrictionSpec {
    let z = normal_vector(spec.r.len(), rng);
    let mut out = spec.clone();
    out.r = &spec.r + chol * z * noise_sd;
    out
}

fn scheme_specs(schemes: &[SchemeLabel], set_size: usize, cycles: usize, c: f64, rhos: &[f64]) -> Vec<SchemeSpec> {
    schemes.iter().map(|s| s.spec(set_size, cycles, c, rhos)).collect()
}

fn linear_design(cfg: &LinearStudyConfig, source: PopulationSource) -> Design {
    Design {
        kappa: (source == PopulationSource::Synthetic).then_some(cfg.kappa),
        phi: None,
        eta: None,
        cycles: cfg.cycles,
        set_size: cfg.set_size,
        c: cfg.c,
    }
}

/// Shared body of the linear and restricted studies.
fn run_linear_like(
    study: StudyKind,
    cfg: &LinearStudyConfig,
    restriction: Option<(&RestrictionSpec, f64)>,
    population: Option<&Population>,
    truth: DVector<f64>,
) -> Result<ExperimentReport> {
    let grid = Grid::new(&cfg.schemes, &cfg.estimators, (SchemeLabel::Srs, Estimator::Ls));
    let specs = scheme_specs(&grid.schemes, cfg.set_size, cfg.cycles, cfg.c, &cfg.observer_rhos);
    let chol = match restriction {
        Some((spec, _)) => Some(
            spec.omega
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Config("omega must be positive definite".into()))?
                .l(),
        ),
        None => None,
    };
    let outcomes = replicate(cfg.replications, cfg.seed, cfg.parallel, |rng| {
        let mut out = Vec::with_capacity(specs.len() * grid.estimators.len());
        for spec in &specs {
            let sample = match population {
                None => {
                    let pop = linear_population(rng, units_needed(spec), cfg)?;
                    draw_sample_sequential(&pop, spec)?
                }
                Some(pop) => draw_sample(pop, spec, rng.next_u64())?,
            };
            let restr = match (restriction, &chol) {
                (Some((spec, noise_sd)), Some(l)) => Some(perturbed_restriction(spec, l, noise_sd, rng)),
                _ => None,
            };
            out.extend(linear_sse(&sample.dataset, restr.as_ref(), &grid.estimators, cfg.hkb, &truth));
        }
        Ok(Outcome { sse: out, clamped: 0 })
    })?;
    let source = if population.is_some() {
        PopulationSource::Finite
    } else {
        PopulationSource::Synthetic
    };
    assemble(study, source, linear_design(cfg, source), cfg.seed, &grid, outcomes)
}

pub fn run_linear_study(cfg: &LinearStudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    cfg.check_estimators(false)?;
    run_linear_like(StudyKind::Linear, cfg, None, None, DVector::from_column_slice(&cfg.beta0))
}

pub fn run_restricted_study(cfg: &RestrictedStudyConfig) -> Result<ExperimentReport> {
    let spec = cfg.validate()?;
    run_linear_like(
        StudyKind::Restricted,
        &cfg.study,
        Some((&spec, cfg.restriction.noise_sd)),
        None,
        DVector::from_column_slice(&cfg.study.beta0),
    )
}

pub fn run_logistic_study(cfg: &LogisticStudyConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    run_logistic_like(cfg, None, DVector::from_column_slice(&cfg.beta0))
}

fn run_logistic_like(cfg: &LogisticStudyConfig, population: Option<&Population>, truth: DVector<f64>) -> Result<ExperimentReport> {
    let grid = Grid::new(&cfg.schemes, &cfg.estimators, (SchemeLabel::Srs, Estimator::Ml));
    let specs = scheme_specs(&grid.schemes, cfg.set_size, cfg.cycles, cfg.c, &cfg.observer_rhos);
    let predictors = truth.len() - usize::from(cfg.intercept);
    let outcomes = replicate(cfg.replications, cfg.seed, cfg.parallel, |rng| {
        let mut out = Vec::with_capacity(specs.len() * grid.estimators.len());
        let mut clamped = 0;
        for spec in &specs {
            let sample = match population {
                None => {
                    let (pop, c) = logistic_population(rng, units_needed(spec), cfg)?;
                    clamped += c;
                    draw_sample_sequential(&pop, spec)?
                }
                Some(pop) => draw_sample(pop, spec, rng.next_u64())?,
            };
            let data = if cfg.intercept {
                sample.dataset.with_intercept()
            } else {
                sample.dataset
            };
            out.extend(logistic_sse(&data, &grid.estimators, predictors, cfg.tol, cfg.max_iter, &truth));
        }
        Ok(Outcome { sse: out, clamped })
    })?;
    let source = if population.is_some() {
        PopulationSource::Finite
    } else {
        PopulationSource::Synthetic
    };
    let synthetic = source == PopulationSource::Synthetic;
    let design = Design {
        kappa: None,
        phi: synthetic.then_some(cfg.phi),
        eta: synthetic.then_some(cfg.eta),
        cycles: cfg.cycles,
        set_size: cfg.set_size,
        c: cfg.c,
    };
    assemble(StudyKind::Logistic, source, design, cfg.seed, &grid, outcomes)
}

fn check_population(pop: &Population, kind: ResponseKind, schemes: &[SchemeLabel], rhos: &[f64]) -> Result<()> {
    if pop.kind() != kind {
        return Err(Error::Data(format!("population response is {:?}, study needs {:?}", pop.kind(), kind)));
    }
    if schemes.iter().any(|s| *s != SchemeLabel::Srs) && rhos.len() > pop.k() {
        return Err(Error::Config(format!(
            "{} observer correlations configured but the population has {} observer columns",
            rhos.len(),
            pop.k()
        )));
    }
    Ok(())
}

/// Least-squares fit of the whole population, used as the truth for resampling studies.
pub fn population_truth_linear(pop: &Population) -> Result<DVector<f64>> {
    Ok(ls_fit(&pop.as_dataset()?)?.beta)
}

/// ML fit of the whole population (with intercept when requested).
pub fn population_truth_logistic(pop: &Population, cfg: &LogisticStudyConfig) -> Result<DVector<f64>> {
    let data = pop.as_dataset()?;
    let data = if cfg.intercept { data.with_intercept() } else { data };
    Ok(ml_fit(&data, cfg.tol, cfg.max_iter)?.beta)
}

fn check_truth(truth: &DVector<f64>, expected: usize) -> Result<()> {
    if truth.len() != expected {
        return Err(Error::Config(format!("truth has {} entries, model has {expected}", truth.len())));
    }
    Ok(())
}

/// Linear study by repeated sampling from a fixed population. `truth` defaults
/// to the full-population least-squares fit.
pub fn run_linear_on_population(
    cfg: &LinearStudyConfig,
    pop: &Population,
    truth: Option<DVector<f64>>,
) -> Result<ExperimentReport> {
    cfg.check_estimators(false)?;
    check_population(pop, ResponseKind::Continuous, &cfg.schemes, &cfg.observer_rhos)?;
    let truth = match truth {
        Some(t) => t,
        None => population_truth_linear(pop)?,
    };
    check_truth(&truth, pop.p())?;
    let mut cfg = cfg.clone();
    cfg.beta0 = truth.iter().copied().collect();
    cfg.validate()?;
    run_linear_like(StudyKind::Linear, &cfg, None, Some(pop), truth)
}

pub fn run_restricted_on_population(
    cfg: &RestrictedStudyConfig,
    pop: &Population,
    truth: Option<DVector<f64>>,
) -> Result<ExperimentReport> {
    check_population(pop, ResponseKind::Continuous, &cfg.study.schemes, &cfg.study.observer_rhos)?;
    let truth = match truth {
        Some(t) => t,
        None => population_truth_linear(pop)?,
    };
    check_truth(&truth, pop.p())?;
    let mut cfg = cfg.clone();
    cfg.study.beta0 = truth.iter().copied().collect();
    let spec = cfg.validate()?;
    run_linear_like(
        StudyKind::Restricted,
        &cfg.study,
        Some((&spec, cfg.restriction.noise_sd)),
        Some(pop),
        truth,
    )
}

pub fn run_logistic_on_population(
    cfg: &LogisticStudyConfig,
    pop: &Population,
    truth: Option<DVector<f64>>,
) -> Result<ExperimentReport> {
    cfg.validate_common()?;
    check_population(pop, ResponseKind::Binary, &cfg.schemes, &cfg.observer_rhos)?;
    let truth = match truth {
        Some(t) => t,
        None => population_truth_logistic(pop, cfg)?,
    };
    check_truth(&truth, pop.p() + usize::from(cfg.intercept))?;
    if cfg.sample_size() <= truth.len() {
        return Err(Error::Config("sample size n H must exceed the number of coefficients".into()));
    }
    run_logistic_like(cfg, Some(pop), truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_linear() -> LinearStudyConfig {
        LinearStudyConfig {
            replications: 40,
            seed: 9,
            ..LinearStudyConfig::default()
        }
    }

    #[test]
    fn seeds_differ_per_replication() {
        let a: Vec<u64> = (0..100).map(|i| replication_seed(1, i)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), a.len());
        assert_ne!(replication_seed(1, 0), replication_seed(2, 0));
    }

    #[test]
    fn noiseless_orthogonal_ls_is_exact() {
        let cfg = LinearStudyConfig {
            replications: 1,
            sigma: 0.0,
            kappa: 0.0,
            schemes: vec![SchemeLabel::Srs],
            estimators: vec![Estimator::Ls],
            ..small_linear()
        };
        let report = run_linear_study(&cfg).unwrap();
        assert!(report.rows[0].mse < 1e-25);
        assert_eq!(report.rows[0].re, 1.0);
    }

    #[test]
    fn serial_and_parallel_agree() {
        let mut cfg = small_linear();
        let par = run_linear_study(&cfg).unwrap();
        cfg.parallel = false;
        let ser = run_linear_study(&cfg).unwrap();
        assert_eq!(par, ser);
    }

    #[test]
    fn baseline_added_when_not_requested() {
        let cfg = LinearStudyConfig {
            schemes: vec![SchemeLabel::Mrs],
            estimators: vec![Estimator::Ridge],
            ..small_linear()
        };
        let report = run_linear_study(&cfg).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.rows[0].re > 0.0 && report.rows[0].re.is_finite());
    }

    #[test]
    fn restricted_estimators_need_restricted_study() {
        let cfg = LinearStudyConfig {
            estimators: vec![Estimator::Srr],
            ..small_linear()
        };
        assert!(matches!(run_linear_study(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn logistic_single_replication() {
        let cfg = LogisticStudyConfig {
            replications: 1,
            seed: 3,
            ..LogisticStudyConfig::default()
        };
        let report = run_logistic_study(&cfg).unwrap();
        for row in &report.rows {
            if row.replications == 1 {
                let v = row.sse[0].unwrap();
                assert_eq!(row.median_sse, v);
                assert_eq!(row.mse, v);
                assert_eq!((row.ci_lo, row.ci_hi), (v, v));
            }
        }
    }
}
