//! Run configuration: a TOML file with `[run]`, `[study]`, `[restriction]`,
//! `[input]`, `[fit]` and `[sample]` sections, layered over per-kind defaults
//! and then over command-line flags.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use super::input::{Direction, PopulationCsv};
use crate::error::{Error, Result};
use crate::simulation::{
    Estimator, LinearStudyConfig, LogisticStudyConfig, RestrictedStudyConfig, RestrictionConfig, SchemeLabel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    #[serde(alias = "simulate-linear")]
    Linear,
    #[serde(alias = "simulate-restricted")]
    Restricted,
    #[serde(alias = "simulate-logistic")]
    Logistic,
    Fit,
    Sample,
}

impl RunKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Restricted => "restricted",
            Self::Logistic => "logistic",
            Self::Fit => "fit",
            Self::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    #[serde(alias = "md")]
    Markdown,
    #[serde(alias = "jsonl", alias = "json")]
    JsonLines,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Value::String(s.to_owned())
            .try_into()
            .map_err(|_| Error::Config(format!("unknown output format `{s}` (csv, markdown, json-lines)")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub kind: Option<RunKind>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub input: Option<PathBuf>,
}

/// Source of the coefficients that squared errors are measured against when
/// a study resamples a population file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    /// Fit the whole population (least squares, or ML for a binary response).
    #[default]
    Fit,
    /// Use `beta0` from `[study]`.
    Config,
}

/// Column mapping for the input file, plus how studies pick their truth.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub response: String,
    pub predictors: Vec<String>,
    pub observers: Vec<String>,
    pub threshold: Option<f64>,
    pub direction: Direction,
    pub standardize: bool,
    pub truth: Truth,
}

impl InputSection {
    pub fn mapping(&self) -> PopulationCsv {
        PopulationCsv {
            response: self.response.clone(),
            predictors: self.predictors.clone(),
            observers: self.observers.clone(),
            threshold: self.threshold,
            direction: self.direction,
            standardize: self.standardize,
        }
    }
}

/// A shrinkage parameter: a number, or `"auto"` for the estimator's selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Value(f64),
    Rule(AutoRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoRule {
    Auto,
    Hkb,
    Liu,
}

impl Default for Param {
    fn default() -> Self {
        Param::Rule(AutoRule::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub estimator: Estimator,
    #[serde(default)]
    pub k: Param,
    #[serde(default)]
    pub d: Param,
    /// Defaults to false for continuous and true for binary responses.
    #[serde(default)]
    pub intercept: Option<bool>,
    #[serde(default)]
    pub hkb: crate::linear::HkbVariant,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    crate::logistic::DEFAULT_TOL
}

fn default_max_iter() -> usize {
    crate::logistic::DEFAULT_MAX_ITER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub scheme: SchemeLabel,
    #[serde(alias = "H", alias = "h")]
    pub set_size: usize,
    #[serde(alias = "n")]
    pub cycles: usize,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub observer_rhos: Vec<f64>,
}

fn default_c() -> f64 {
    1.0
}

/// File layout; which sections are allowed depends on the run kind.
#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FileShape<S> {
    #[serde(default)]
    run: RunSection,
    study: Option<S>,
    restriction: Option<RestrictionConfig>,
    input: Option<InputSection>,
    fit: Option<FitSection>,
    sample: Option<SampleSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Linear(LinearStudyConfig),
    Restricted(RestrictedStudyConfig),
    Logistic(LogisticStudyConfig),
    Fit {
        fit: FitSection,
        restriction: Option<RestrictionConfig>,
    },
    Sample(SampleSection),
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<OutputFormat>,
    pub input: Option<PathBuf>,
    pub serial: bool,
    /// `section.key=value` assignments; the value is read as TOML, or as a
    /// bare string when it does not parse.
    pub set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: RunKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    pub input: Option<PathBuf>,
    pub input_section: Option<InputSection>,
    pub job: Job,
    /// Effective configuration after layering, as canonical TOML.
    pub canonical: String,
    pub config_sha256: String,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| config_err(e.to_string().trim_end().to_owned()))
}

/// Key-level validation against the typed layout, so unknown keys and type
/// errors are reported with their line and column.
fn check_shape<S: DeserializeOwned>(text: &str) -> Result<()> {
    toml::from_str::<FileShape<S>>(text)
        .map(|_| ())
        .map_err(|e| config_err(e.to_string().trim_end().to_owned()))
}

const STUDY_ALIASES: [(&str, &str); 3] = [("n", "cycles"), ("H", "set_size"), ("h", "set_size")];
const RESTRICTION_ALIASES: [(&str, &str); 1] = [("R", "matrix")];

fn canonical_keys(table: &mut Table, aliases: &[(&str, &str)]) {
    for (alias, name) in aliases {
        if let Some(v) = table.remove(*alias) {
            table.insert((*name).to_owned(), v);
        }
    }
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn to_table<T: Serialize>(value: &T) -> Result<Table> {
    match Value::try_from(value).map_err(|e| config_err(e.to_string()))? {
        Value::Table(t) => Ok(t),
        _ => Err(config_err("configuration did not serialize to a table")),
    }
}

fn apply_set(doc: &mut Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("--set expects section.key=value, got `{assignment}`")))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| config_err(format!("--set key `{path}` must look like section.key")))?;
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_owned()));
    let entry = doc
        .entry(section.to_owned())
        .or_insert_with(|| Value::Table(Table::new()));
    let Value::Table(t) = entry else {
        return Err(config_err(format!("`{section}` is not a section")));
    };
    t.insert(key.to_owned(), value);
    Ok(())
}

fn section_table(doc: &mut Table, name: &str) -> Result<Table> {
    match doc.remove(name) {
        None => Ok(Table::new()),
        Some(Value::Table(t)) => Ok(t),
        Some(_) => Err(config_err(format!("`{name}` must be a section"))),
    }
}

fn decode<T: DeserializeOwned>(table: Table, what: &str) -> Result<T> {
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| config_err(format!("[{what}]: {}", e.message())))
}

/// Build the effective run configuration. `cli_kind` comes from the
/// subcommand; a `kind` in the file must agree with it.
pub fn resolve(text: Option<&str>, cli_kind: Option<RunKind>, overrides: &Overrides) -> Result<RunConfig> {
    let text = text.unwrap_or("");
    let mut user = parse_table(text)?;
    let run_section: RunSection = match user.get("run") {
        Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| config_err(format!("[run]: {}", e.message())))?,
        None => RunSection::default(),
    };
    let kind = match (cli_kind, run_section.kind) {
        (Some(a), Some(b)) if a != b => {
            return Err(config_err(format!(
                "subcommand runs `{}` but the file sets kind = \"{}\"",
                a.as_str(),
                b.as_str()
            )))
        }
        (Some(a), _) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(config_err("run kind missing: use a subcommand or set [run] kind")),
    };
    match kind {
        RunKind::Linear | RunKind::Restricted => check_shape::<LinearStudyConfig>(text)?,
        RunKind::Logistic => check_shape::<LogisticStudyConfig>(text)?,
        RunKind::Fit | RunKind::Sample => check_shape::<Table>(text)?,
    }
    if let Some(Value::Table(study)) = user.get("study") {
        if study.contains_key("seed") {
            return Err(config_err("the seed belongs in [run], not [study]"));
        }
    }
    let allowed: &[&str] = match kind {
        RunKind::Linear | RunKind::Logistic => &["run", "study", "input"],
        RunKind::Restricted => &["run", "study", "restriction", "input"],
        RunKind::Fit => &["run", "fit", "restriction", "input"],
        RunKind::Sample => &["run", "sample", "input"],
    };
    if let Some(extra) = user.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(config_err(format!("section [{extra}] is not used by `{}` runs", kind.as_str())));
    }

    let mut doc = match kind {
        RunKind::Linear => {
            let mut t = Table::new();
            t.insert("study".into(), Value::Table(to_table(&LinearStudyConfig::default())?));
            t
        }
        RunKind::Restricted => to_table(&RestrictedStudyConfig::default())?,
        RunKind::Logistic => {
            let mut t = Table::new();
            t.insert("study".into(), Value::Table(to_table(&LogisticStudyConfig::default())?));
            t
        }
        RunKind::Fit | RunKind::Sample => Table::new(),
    };
    for (section, aliases) in [("study", &STUDY_ALIASES[..]), ("restriction", &RESTRICTION_ALIASES[..]), ("sample", &STUDY_ALIASES[..])] {
        if let Some(Value::Table(t)) = user.get_mut(section) {
            canonical_keys(t, aliases);
        }
    }
    merge(&mut doc, user);
    for assignment in &overrides.set {
        apply_set(&mut doc, assignment)?;
        for (section, aliases) in [("study", &STUDY_ALIASES[..]), ("restriction", &RESTRICTION_ALIASES[..])] {
            if let Some(Value::Table(t)) = doc.get_mut(section) {
                canonical_keys(t, aliases);
            }
        }
    }

    let mut run: RunSection = decode(section_table(&mut doc, "run")?, "run")?;
    run.kind = Some(kind);
    if overrides.seed.is_some() {
        run.seed = overrides.seed;
    }
    if overrides.output.is_some() {
        run.output.clone_from(&overrides.output);
    }
    if overrides.format.is_some() {
        run.format = overrides.format;
    }
    if overrides.input.is_some() {
        run.input.clone_from(&overrides.input);
    }
    let seed = run
        .seed
        .ok_or_else(|| config_err("a seed is required: set [run] seed or pass --seed"))?;

    let input_section: Option<InputSection> = match doc.remove("input") {
        Some(v) => Some(v.try_into().map_err(|e: toml::de::Error| config_err(format!("[input]: {}", e.message())))?),
        None => None,
    };
    if run.input.is_some() && input_section.is_none() {
        return Err(config_err("an input file needs an [input] section mapping its columns"));
    }

    let study_overrides = |t: &mut Table| {
        t.insert("seed".into(), Value::Integer(seed as i64));
        if let Some(r) = overrides.replications {
            t.insert("replications".into(), Value::Integer(r as i64));
        }
        if overrides.serial {
            t.insert("parallel".into(), Value::Boolean(false));
        }
    };
    if seed > i64::MAX as u64 {
        return Err(config_err("seed must fit in a signed 64-bit integer"));
    }
    let job = match kind {
        RunKind::Linear | RunKind::Logistic | RunKind::Restricted => {
            let mut study = section_table(&mut doc, "study")?;
            study_overrides(&mut study);
            match kind {
                RunKind::Linear => Job::Linear(decode(study, "study")?),
                RunKind::Logistic => Job::Logistic(decode(study, "study")?),
                _ => Job::Restricted(RestrictedStudyConfig {
                    study: decode(study, "study")?,
                    restriction: decode(section_table(&mut doc, "restriction")?, "restriction")?,
                }),
            }
        }
        RunKind::Fit => {
            let fit = doc
                .remove("fit")
                .ok_or_else(|| config_err("fit runs need a [fit] section with at least `estimator`"))?;
            let fit: FitSection = fit
                .try_into()
                .map_err(|e: toml::de::Error| config_err(format!("[fit]: {}", e.message())))?;
            let restriction = match doc.remove("restriction") {
                Some(Value::Table(t)) => Some(decode(t, "restriction")?),
                Some(_) => return Err(config_err("`restriction` must be a section")),
                None => None,
            };
            Job::Fit { fit, restriction }
        }
        RunKind::Sample => {
            let mut sample = doc
                .remove("sample")
                .ok_or_else(|| config_err("sample runs need a [sample] section"))?;
            if let Value::Table(t) = &mut sample {
                canonical_keys(t, &STUDY_ALIASES);
            }
            Job::Sample(
                sample
                    .try_into()
                    .map_err(|e: toml::de::Error| config_err(format!("[sample]: {}", e.message())))?,
            )
        }
    };
    if run.input.is_none() && matches!(kind, RunKind::Fit | RunKind::Sample) {
        return Err(config_err(format!("`{}` runs need an input file (--input or [run] input)", kind.as_str())));
    }

    let canonical = canonical_text(&run, &job, input_section.as_ref())?;
    let digest = Sha256::digest(canonical.as_bytes());
    let config_sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(RunConfig {
        kind,
        seed,
        output: run.output.clone(),
        format: run.format.unwrap_or_default(),
        input: run.input.clone(),
        input_section,
        job,
        canonical,
        config_sha256,
    })
}

/// Output location and format do not affect the results and are left out, so
/// the hash identifies the computation.
fn canonical_text(run: &RunSection, job: &Job, input: Option<&InputSection>) -> Result<String> {
    let mut doc = Table::new();
    let mut r = Table::new();
    r.insert("kind".into(), Value::String(run.kind.map(RunKind::as_str).unwrap_or_default().into()));
    r.insert("seed".into(), Value::Integer(run.seed.unwrap_or_default() as i64));
    if let Some(p) = &run.input {
        r.insert("input".into(), Value::String(p.display().to_string()));
    }
    doc.insert("run".into(), Value::Table(r));
    match job {
        Job::Linear(c) => {
            doc.insert("study".into(), Value::Table(to_table(c)?));
        }
        Job::Logistic(c) => {
            doc.insert("study".into(), Value::Table(to_table(c)?));
        }
        Job::Restricted(c) => merge(&mut doc, to_table(c)?),
        Job::Fit { fit, restriction } => {
            doc.insert("fit".into(), Value::Table(to_table(fit)?));
            if let Some(r) = restriction {
                doc.insert("restriction".into(), Value::Table(to_table(r)?));
            }
        }
        Job::Sample(s) => {
            doc.insert("sample".into(), Value::Table(to_table(s)?));
        }
    }
    if let Some(i) = input {
        doc.insert("input".into(), Value::Table(to_table(i)?));
    }
    toml::to_string(&doc).map_err(|e| config_err(e.to_string()))
}
