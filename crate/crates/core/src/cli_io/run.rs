//! Dispatch of a resolved run configuration and the command-line entry point.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use super::config::{resolve, AutoRule, FitSection, Job, OutputFormat, Overrides, Param, RunConfig, RunKind, SampleSection, Truth};
use super::emit::{emit, FitReport, Meta, Output, SampleReport, SampleRow};
use super::format::format_real;
use super::input::load_population;
use crate::dataset::{Dataset, ResponseKind};
use crate::error::{Error, Result};
use crate::linear::{ls_fit, liu_type_fit, ridge_fit, select_k_hkb, select_kd_liu, ShrinkageParams};
use crate::logistic::{liu_logistic_from_ml, ml_fit, ridge_logistic_from_ml, select_d_logistic, select_k_logistic};
use crate::restricted::{liu_one_fit, mixed_fit, mixed_liu_fit, mixed_ridge_fit, srl_fit, srr_fit};
use crate::sampling::{draw_sample, Population};
use crate::simulation::{
    run_linear_on_population, run_linear_study, run_logistic_on_population, run_logistic_study,
    run_restricted_on_population, run_restricted_study, Estimator, ExperimentReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidInput(_) | Error::DimensionMismatch(_) => EXIT_CONFIG,
        Error::Data(_) | Error::Io(_) | Error::InsufficientPopulation { .. } => EXIT_DATA,
        _ => EXIT_NUMERICAL,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match exit_code(err) {
        EXIT_CONFIG => "config",
        EXIT_DATA => "data",
        _ => "numerical",
    }
}

/// One-line JSON error record.
pub fn error_record(err: &Error) -> String {
    serde_json::json!({
        "error": {
            "kind": error_kind(err),
            "code": exit_code(err),
            "message": err.to_string(),
        }
    })
    .to_string()
}

/// Write via a temporary file in the target directory and rename it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error.to_string()))?;
    Ok(())
}

/// Result of a run: serialised output plus a short per-row summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub bytes: Vec<u8>,
    pub summary: Vec<String>,
}

fn load_input(cfg: &RunConfig) -> Result<Option<Population>> {
    match (&cfg.input, &cfg.input_section) {
        (Some(path), Some(section)) => Ok(Some(load_population(path, &section.mapping())?)),
        _ => Ok(None),
    }
}

fn study_summary(report: &ExperimentReport) -> Vec<String> {
    report
        .rows
        .iter()
        .map(|r| {
            format!(
                "{} {}: RE={} median_sse={} ci=[{}, {}] failures={}",
                r.scheme,
                r.estimator,
                format_real(r.re),
                format_real(r.median_sse),
                format_real(r.ci_lo),
                format_real(r.ci_hi),
                r.failures
            )
        })
        .collect()
}

fn config_truth(cfg: &RunConfig, beta0: &[f64]) -> Option<DVector<f64>> {
    match cfg.input_section.as_ref().map(|s| s.truth) {
        Some(Truth::Config) => Some(DVector::from_column_slice(beta0)),
        _ => None,
    }
}

/// Execute a resolved configuration without touching the output file.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let meta = Meta {
        kind: cfg.kind,
        seed: cfg.seed,
        config_sha256: cfg.config_sha256.clone(),
    };
    let population = load_input(cfg)?;
    match &cfg.job {
        Job::Linear(_) | Job::Restricted(_) | Job::Logistic(_) => {
            let report = run_study_with(cfg, population.as_ref())?;
            finish_study(&report, cfg.format, &meta)
        }
        Job::Fit { fit, restriction } => {
            let pop = population.ok_or_else(|| Error::Config("fit needs an input file".into()))?;
            let restriction = restriction.as_ref().map(|r| r.to_spec()).transpose()?;
            let names = cfg.input_section.as_ref().map(|s| s.predictors.clone()).unwrap_or_default();
            let report = fit_population(&pop, fit, restriction.as_ref(), names)?;
            let summary = vec![format!(
                "{} ({}): k={} d={} beta=[{}]",
                report.estimator,
                report.rule,
                report.k.map_or("NA".into(), format_real),
                report.d.map_or("NA".into(), format_real),
                report.beta.iter().map(|&b| format_real(b)).collect::<Vec<_>>().join(", ")
            )];
            Ok(RunOutcome {
                bytes: emit(Output::Fit(&report), cfg.format, &meta)?,
                summary,
            })
        }
        Job::Sample(s) => {
            let pop = population.ok_or_else(|| Error::Config("sample needs an input file".into()))?;
            let names = cfg.input_section.as_ref().map(|s| s.predictors.clone()).unwrap_or_default();
            let report = sample_population(&pop, s, cfg.seed, names)?;
            let summary = vec![format!("{}: drew {} units", report.scheme, report.rows.len())];
            Ok(RunOutcome {
                bytes: emit(Output::Sample(&report), cfg.format, &meta)?,
                summary,
            })
        }
    }
}

/// Run the study a configuration describes, on its input population when one is given.
pub fn run_study(cfg: &RunConfig) -> Result<ExperimentReport> {
    let population = load_input(cfg)?;
    run_study_with(cfg, population.as_ref())
}

fn run_study_with(cfg: &RunConfig, population: Option<&Population>) -> Result<ExperimentReport> {
    match (&cfg.job, population) {
        (Job::Linear(c), Some(pop)) => run_linear_on_population(c, pop, config_truth(cfg, &c.beta0)),
        (Job::Linear(c), None) => run_linear_study(c),
        (Job::Restricted(c), Some(pop)) => run_restricted_on_population(c, pop, config_truth(cfg, &c.study.beta0)),
        (Job::Restricted(c), None) => run_restricted_study(c),
        (Job::Logistic(c), Some(pop)) => run_logistic_on_population(c, pop, config_truth(cfg, &c.beta0)),
        (Job::Logistic(c), None) => run_logistic_study(c),
        _ => Err(Error::Config(format!("run kind {} is not a study", cfg.kind.as_str()))),
    }
}

fn finish_study(report: &ExperimentReport, format: OutputFormat, meta: &Meta) -> Result<RunOutcome> {
    Ok(RunOutcome {
        bytes: emit(Output::Study(report), format, meta)?,
        summary: study_summary(report),
    })
}

fn manual_or(param: Param, auto: impl FnOnce() -> Result<f64>) -> Result<(f64, bool)> {
    match param {
        Param::Value(v) => Ok((v, true)),
        Param::Rule(AutoRule::Auto | AutoRule::Hkb | AutoRule::Liu) => Ok((auto()?, false)),
    }
}

/// Coefficients of one estimator and the shrinkage parameters it used.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorFit {
    pub beta: DVector<f64>,
    pub k: Option<f64>,
    pub d: Option<f64>,
    /// `manual`, or the selection rule that produced `k`/`d`.
    pub rule: String,
    /// IRLS iterations of the underlying ML fit, for logistic models.
    pub iterations: Option<usize>,
}

/// Fit `fit.estimator` to a prepared dataset. Binary responses take the
/// logistic estimators; `predictors` counts the non-intercept columns.
pub fn fit_dataset(
    data: &Dataset,
    fit: &FitSection,
    restriction: Option<&crate::restricted::RestrictionSpec>,
    predictors: usize,
) -> Result<EstimatorFit> {
    let binary = data.kind() == ResponseKind::Binary;
    let restr = || restriction.ok_or_else(|| Error::Config(format!("{} needs a [restriction] section", fit.estimator.label())));
    let rule_name = |manual: bool, rule: &str| if manual { "manual".to_owned() } else { rule.to_owned() };

    let (beta, k, d, rule, iterations) = if binary {
        let ml = ml_fit(data, fit.tol, fit.max_iter)?;
        match fit.estimator {
            Estimator::Ml => (ml.beta.clone(), None, None, "ml".to_owned(), Some(ml.iterations)),
            Estimator::Ridge => {
                let (k, manual) = manual_or(fit.k, || Ok(select_k_logistic(&ml, predictors)?.k))?;
                let f = ridge_logistic_from_ml(data, &ml, k)?;
                (f.beta, Some(k), None, rule_name(manual, "k=(p+1)/b'b"), Some(ml.iterations))
            }
            Estimator::LiuType => {
                let (k, mk) = manual_or(fit.k, || Ok(select_k_logistic(&ml, predictors)?.k))?;
                let (d, md) = manual_or(fit.d, || Ok(select_d_logistic(data, k, &ml)?.d))?;
                let f = liu_logistic_from_ml(data, &ml, k, d)?;
                (f.beta, Some(k), Some(d), rule_name(mk && md, "k=(p+1)/b'b, d=min-mse"), Some(ml.iterations))
            }
            e => {
                return Err(Error::Config(format!(
                    "estimator {} does not apply to a binary response (use ml, ridge or liu-type)",
                    e.label()
                )))
            }
        }
    } else {
        let hkb = || Ok(select_k_hkb(data, fit.hkb)?.k);
        let liu = || -> Result<ShrinkageParams> { select_kd_liu(data) };
        match fit.estimator {
            Estimator::Ls => (ls_fit(data)?.beta, None, None, "ls".to_owned(), None),
            Estimator::Ridge => {
                let (k, m) = manual_or(fit.k, hkb)?;
                (ridge_fit(data, k)?.beta, Some(k), None, rule_name(m, "hkb"), None)
            }
            Estimator::LiuType => {
                let (k, mk) = manual_or(fit.k, || Ok(liu()?.k))?;
                let (d, md) = match fit.d {
                    Param::Value(v) => (v, true),
                    Param::Rule(_) if mk => {
                        return Err(Error::Config("liu-type with a manual k needs a manual d".into()))
                    }
                    Param::Rule(_) => (liu()?.d, false),
                };
                (liu_type_fit(data, k, d)?.beta, Some(k), Some(d), rule_name(mk && md, "liu-type"), None)
            }
            Estimator::LiuOne => {
                let (d, m) = manual_or(fit.d, || Ok(liu()?.d))?;
                (liu_one_fit(data, d)?.beta, None, Some(d), rule_name(m, "liu-type d"), None)
            }
            Estimator::Mixed => (mixed_fit(data, restr()?)?.beta, None, None, "mixed".to_owned(), None),
            Estimator::MixedLiu => {
                let (d, m) = manual_or(fit.d, || Ok(liu()?.d))?;
                (mixed_liu_fit(data, restr()?, d)?.beta, None, Some(d), rule_name(m, "liu-type d"), None)
            }
            Estimator::Srl => {
                let (d, m) = manual_or(fit.d, || Ok(liu()?.d))?;
                (srl_fit(data, restr()?, d)?.beta, None, Some(d), rule_name(m, "liu-type d"), None)
            }
            Estimator::MixedRidge => {
                let (k, m) = manual_or(fit.k, hkb)?;
                (mixed_ridge_fit(data, restr()?, k)?.beta, Some(k), None, rule_name(m, "hkb"), None)
            }
            Estimator::Srr => {
                let (k, m) = manual_or(fit.k, hkb)?;
                (srr_fit(data, restr()?, k)?.beta, Some(k), None, rule_name(m, "hkb"), None)
            }
            Estimator::Ml => {
                return Err(Error::Config(
                    "ml needs a binary response: set `threshold` in [input]".into(),
                ))
            }
        }
    };
    Ok(EstimatorFit { beta, k, d, rule, iterations })
}

/// Fit one estimator to a whole population file.
pub fn fit_population(
    pop: &Population,
    fit: &FitSection,
    restriction: Option<&crate::restricted::RestrictionSpec>,
    predictor_names: Vec<String>,
) -> Result<FitReport> {
    let binary = pop.kind() == ResponseKind::Binary;
    let intercept = fit.intercept.unwrap_or(binary);
    let base = pop.as_dataset()?;
    let predictors = base.p();
    let data: Dataset = if intercept { base.with_intercept() } else { base };
    let mut names = predictor_names;
    if intercept {
        names.insert(0, "intercept".into());
    }
    let EstimatorFit { beta, k, d, rule, iterations } = fit_dataset(&data, fit, restriction, predictors)?;
    if names.len() != beta.len() {
        names = (1..=beta.len()).map(|i| format!("beta_{i}")).collect();
    }
    Ok(FitReport {
        estimator: fit.estimator.label().to_owned(),
        response: pop.kind(),
        rule,
        k,
        d,
        n: data.n(),
        names,
        beta: beta.iter().copied().collect(),
        iterations,
    })
}

/// Draw one sample of the configured scheme from a population file.
pub fn sample_population(pop: &Population, s: &SampleSection, seed: u64, predictor_names: Vec<String>) -> Result<SampleReport> {
    let spec = s.scheme.spec(s.set_size, s.cycles, s.c, &s.observer_rhos);
    let sample = draw_sample(pop, &spec, seed)?;
    let x = sample.dataset.x();
    let y = sample.dataset.y();
    let rows = sample
        .draws
        .iter()
        .enumerate()
        .map(|(i, d)| SampleRow {
            cycle: d.cycle,
            set: d.set,
            rank: d.measured_rank,
            unit: d.unit,
            weight: d.weight,
            response: y[i],
            x: x.row(i).iter().copied().collect(),
        })
        .collect();
    Ok(SampleReport {
        scheme: s.scheme.as_str().to_owned(),
        predictor_names,
        rows,
    })
}

#[derive(Debug, Parser)]
#[command(name = "rankshrink", version, about = "Ranked set sampling and shrinkage estimators for collinear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw one SRS/RSS/MRS/MMR sample from a population CSV.
    Sample(RunArgs),
    /// Fit a single estimator to a CSV.
    Fit(RunArgs),
    /// Monte Carlo study of LS, ridge and Liu-type estimators.
    SimulateLinear(RunArgs),
    /// Monte Carlo study of the stochastic restricted estimators.
    SimulateRestricted(RunArgs),
    /// Monte Carlo study of the logistic estimators.
    SimulateLogistic(RunArgs),
    /// Run whatever `[run] kind` the config file names.
    Run(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// csv, markdown or json-lines.
    #[arg(short, long)]
    format: Option<OutputFormat>,
    /// Population CSV.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Run replications on one thread.
    #[arg(long)]
    serial: bool,
    /// Override any config key: `--set study.kappa=0.95`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

fn run_cli(kind: Option<RunKind>, args: RunArgs) -> Result<()> {
    let text = match &args.config {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let overrides = Overrides {
        seed: args.seed,
        replications: args.replications,
        output: args.output,
        format: args.format,
        input: args.input,
        serial: args.serial,
        set: args.set,
    };
    let from_file = overrides.input.is_none();
    let mut cfg = resolve(text.as_deref(), kind, &overrides)?;
    // An input path written in the config file is relative to that file.
    if let (true, Some(conf), Some(input)) = (from_file, &args.config, &cfg.input) {
        if input.is_relative() {
            if let Some(dir) = conf.parent() {
                cfg.input = Some(dir.join(input));
            }
        }
    }
    let outcome = execute(&cfg)?;
    match &cfg.output {
        Some(path) => {
            write_atomic(path, &outcome.bytes)?;
            for line in &outcome.summary {
                println!("{line}");
            }
        }
        None => {
            std::io::stdout().write_all(&outcome.bytes)?;
            for line in &outcome.summary {
                eprintln!("{line}");
            }
        }
    }
    Ok(())
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (kind, args) = match cli.command {
        Command::Sample(a) => (Some(RunKind::Sample), a),
        Command::Fit(a) => (Some(RunKind::Fit), a),
        Command::SimulateLinear(a) => (Some(RunKind::Linear), a),
        Command::SimulateRestricted(a) => (Some(RunKind::Restricted), a),
        Command::SimulateLogistic(a) => (Some(RunKind::Logistic), a),
        Command::Run(a) => (None, a),
    };
    match run_cli(kind, args) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            exit_code(&e)
        }
    }
}
