//! Serialisation of study, fit and sample results.

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::{OutputFormat, RunKind};
use super::format::{format_real, parse_real, round_real};
use crate::dataset::ResponseKind;
use crate::error::{Error, Result};
use crate::simulation::{ExperimentReport, ReportRow, StudyKind};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written at the top of every output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Meta {
    pub kind: RunKind,
    pub seed: u64,
    pub config_sha256: String,
}

impl Meta {
    fn line(&self) -> String {
        format!(
            "rankshrink {VERSION} kind={} seed={} config_sha256={}",
            self.kind.as_str(),
            self.seed,
            self.config_sha256
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub estimator: String,
    pub response: ResponseKind,
    /// How `k` and `d` were obtained (`manual`, `hkb`, `liu-type`, ...).
    pub rule: String,
    pub k: Option<f64>,
    pub d: Option<f64>,
    pub n: usize,
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    /// IRLS iterations for logistic fits.
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRow {
    pub cycle: usize,
    pub set: usize,
    pub rank: usize,
    pub unit: usize,
    pub weight: f64,
    pub response: f64,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub scheme: String,
    pub predictor_names: Vec<String>,
    pub rows: Vec<SampleRow>,
}

#[derive(Debug, Clone, Copy)]
pub enum Output<'a> {
    Study(&'a ExperimentReport),
    Fit(&'a FitReport),
    Sample(&'a SampleReport),
}

pub fn emit(output: Output<'_>, format: OutputFormat, meta: &Meta) -> Result<Vec<u8>> {
    match output {
        Output::Study(r) => emit_report(r, format, meta),
        Output::Fit(f) => emit_fit(f, format, meta),
        Output::Sample(s) => emit_sample(s, format, meta),
    }
}

fn opt_real(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_owned(), format_real)
}

fn json_real(x: f64) -> Value {
    let r = round_real(x);
    if r.is_finite() {
        json!(r)
    } else {
        Value::Null
    }
}

fn json_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_real)
}

fn csv_bytes(comments: &[String], header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for c in comments {
        out.extend_from_slice(format!("# {c}\n").as_bytes());
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn jsonl(records: &[Value]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        out.extend_from_slice(r.to_string().as_bytes());
        out.push(b'\n');
    }
    out
}

fn header_record(meta: &Meta) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("record".into(), json!("header"));
    m.insert("tool".into(), json!("rankshrink"));
    m.insert("version".into(), json!(VERSION));
    m.insert("kind".into(), json!(meta.kind.as_str()));
    m.insert("seed".into(), json!(meta.seed));
    m.insert("config_sha256".into(), json!(meta.config_sha256));
    m
}

fn design_columns(report: &ExperimentReport) -> Vec<(&'static str, String)> {
    let d = &report.design;
    let mut cols = match report.study {
        StudyKind::Logistic => vec![("phi", opt_real(d.phi)), ("eta", opt_real(d.eta))],
        _ => vec![("kappa", opt_real(d.kappa))],
    };
    cols.push(("n", d.cycles.to_string()));
    cols.push(("H", d.set_size.to_string()));
    cols.push(("c", format_real(d.c)));
    cols
}

const METRIC_COLUMNS: [&str; 7] = ["RE", "ci_lo", "ci_hi", "failures", "replications", "mse", "median_sse"];

fn metric_values(row: &ReportRow) -> Vec<String> {
    vec![
        format_real(row.re),
        format_real(row.ci_lo),
        format_real(row.ci_hi),
        row.failures.to_string(),
        row.replications.to_string(),
        format_real(row.mse),
        format_real(row.median_sse),
    ]
}

fn study_comments(report: &ExperimentReport, meta: &Meta) -> Vec<String> {
    vec![
        meta.line(),
        format!(
            "study={} source={} replications={} baseline={} quantiles=linear-interpolation clamped_probabilities={}",
            report.study.as_str(),
            match report.source {
                crate::simulation::PopulationSource::Synthetic => "synthetic",
                crate::simulation::PopulationSource::Finite => "finite",
            },
            report.replications,
            report.baseline,
            report.clamped_probabilities
        ),
    ]
}

/// Serialise a study report. CSV column order is fixed:
/// `scheme, estimator, <design>, RE, ci_lo, ci_hi, failures, replications, mse, median_sse`
/// where `<design>` is `kappa, n, H, c` (or `phi, eta, n, H, c` for logistic studies).
pub fn emit_report(report: &ExperimentReport, format: OutputFormat, meta: &Meta) -> Result<Vec<u8>> {
    let design = design_columns(report);
    match format {
        OutputFormat::Csv => {
            let mut header: Vec<String> = vec!["scheme".into(), "estimator".into()];
            header.extend(design.iter().map(|(k, _)| (*k).to_owned()));
            header.extend(METRIC_COLUMNS.iter().map(|s| (*s).to_owned()));
            let rows: Vec<Vec<String>> = report
                .rows
                .iter()
                .map(|r| {
                    let mut v = vec![r.scheme.clone(), r.estimator.clone()];
                    v.extend(design.iter().map(|(_, val)| val.clone()));
                    v.extend(metric_values(r));
                    v
                })
                .collect();
            csv_bytes(&study_comments(report, meta), &header, &rows)
        }
        OutputFormat::JsonLines => {
            let mut head = header_record(meta);
            head.insert("study".into(), json!(report.study.as_str()));
            head.insert("source".into(), serde_json::to_value(report.source).unwrap_or(Value::Null));
            head.insert("replications".into(), json!(report.replications));
            head.insert("baseline".into(), json!(report.baseline));
            head.insert("quantiles".into(), json!("linear-interpolation"));
            head.insert("clamped_probabilities".into(), json!(report.clamped_probabilities));
            let mut records = vec![Value::Object(head)];
            for r in &report.rows {
                let mut m = Map::new();
                m.insert("record".into(), json!("row"));
                m.insert("scheme".into(), json!(r.scheme));
                m.insert("estimator".into(), json!(r.estimator));
                let d = &report.design;
                match report.study {
                    StudyKind::Logistic => {
                        m.insert("phi".into(), json_opt(d.phi));
                        m.insert("eta".into(), json_opt(d.eta));
                    }
                    _ => {
                        m.insert("kappa".into(), json_opt(d.kappa));
                    }
                }
                m.insert("n".into(), json!(d.cycles));
                m.insert("H".into(), json!(d.set_size));
                m.insert("c".into(), json_real(d.c));
                m.insert("re".into(), json_real(r.re));
                m.insert("ci_lo".into(), json_real(r.ci_lo));
                m.insert("ci_hi".into(), json_real(r.ci_hi));
                m.insert("failures".into(), json!(r.failures));
                m.insert("replications".into(), json!(r.replications));
                m.insert("mse".into(), json_real(r.mse));
                m.insert("median_sse".into(), json_real(r.median_sse));
                records.push(Value::Object(m));
            }
            Ok(jsonl(&records))
        }
        OutputFormat::Markdown => Ok(report_markdown(report, meta).into_bytes()),
    }
}

/// Estimators as rows, schemes as columns. Linear studies show RE; logistic
/// studies show the median squared error with its 95% percentile interval.
fn report_markdown(report: &ExperimentReport, meta: &Meta) -> String {
    let mut schemes: Vec<&str> = Vec::new();
    let mut estimators: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !schemes.contains(&r.scheme.as_str()) {
            schemes.push(&r.scheme);
        }
        if !estimators.contains(&r.estimator.as_str()) {
            estimators.push(&r.estimator);
        }
    }
    let mut out = String::new();
    for c in study_comments(report, meta) {
        out.push_str(&format!("<!-- {c} -->\n"));
    }
    let design: Vec<String> = design_columns(report).iter().map(|(k, v)| format!("{k}={v}")).collect();
    let what = if report.study == StudyKind::Logistic {
        "median SSE [2.5%, 97.5%]"
    } else {
        "RE"
    };
    out.push_str(&format!("\n{what}, {}\n\n", design.join(", ")));
    out.push_str("| Estimator |");
    for s in &schemes {
        out.push_str(&format!(" {s} |"));
    }
    out.push_str("\n|---|");
    for _ in &schemes {
        out.push_str("---|");
    }
    out.push('\n');
    for e in &estimators {
        out.push_str(&format!("| {e} |"));
        for s in &schemes {
            let cell = report.row(s, e).map_or_else(String::new, |r| {
                if report.study == StudyKind::Logistic {
                    format!(
                        "{} [{}, {}]",
                        format_real(r.median_sse),
                        format_real(r.ci_lo),
                        format_real(r.ci_hi)
                    )
                } else {
                    format_real(r.re)
                }
            });
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out
}

/// Read back the rows of a CSV written by [`emit_report`]. Per-replication
/// errors are not part of the file and come back empty.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("report column `{name}` missing")))
    };
    let idx: Vec<usize> = ["scheme", "estimator"]
        .iter()
        .chain(METRIC_COLUMNS.iter())
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let real = |i: usize| {
            parse_real(&rec[idx[i]]).ok_or_else(|| Error::Data(format!("bad number `{}`", &rec[idx[i]])))
        };
        let count = |i: usize| {
            rec[idx[i]]
                .parse::<usize>()
                .map_err(|_| Error::Data(format!("bad count `{}`", &rec[idx[i]])))
        };
        rows.push(ReportRow {
            scheme: rec[idx[0]].to_owned(),
            estimator: rec[idx[1]].to_owned(),
            re: real(2)?,
            ci_lo: real(3)?,
            ci_hi: real(4)?,
            failures: count(5)?,
            replications: count(6)?,
            mse: real(7)?,
            median_sse: real(8)?,
            sse: Vec::new(),
        });
    }
    Ok(rows)
}

fn emit_fit(fit: &FitReport, format: OutputFormat, meta: &Meta) -> Result<Vec<u8>> {
    let header: Vec<String> = ["estimator", "rule", "k", "d", "n"]
        .iter()
        .map(|s| (*s).to_owned())
        .chain(fit.names.iter().cloned())
        .collect();
    let mut row = vec![
        fit.estimator.clone(),
        fit.rule.clone(),
        opt_real(fit.k),
        opt_real(fit.d),
        fit.n.to_string(),
    ];
    row.extend(fit.beta.iter().map(|&b| format_real(b)));
    match format {
        OutputFormat::Csv => csv_bytes(&[meta.line()], &header, &[row]),
        OutputFormat::Markdown => {
            let mut out = format!("<!-- {} -->\n\n", meta.line());
            out.push_str(&format!("| {} |\n", header.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            out.push_str(&format!("| {} |\n", row.join(" | ")));
            Ok(out.into_bytes())
        }
        OutputFormat::JsonLines => {
            let mut m = Map::new();
            m.insert("record".into(), json!("fit"));
            m.insert("estimator".into(), json!(fit.estimator));
            m.insert("response".into(), serde_json::to_value(fit.response).unwrap_or(Value::Null));
            m.insert("rule".into(), json!(fit.rule));
            m.insert("k".into(), json_opt(fit.k));
            m.insert("d".into(), json_opt(fit.d));
            m.insert("n".into(), json!(fit.n));
            m.insert("iterations".into(), json!(fit.iterations));
            let coef: Map<String, Value> = fit
                .names
                .iter()
                .zip(&fit.beta)
                .map(|(n, &b)| (n.clone(), json_real(b)))
                .collect();
            m.insert("coefficients".into(), Value::Object(coef));
            Ok(jsonl(&[Value::Object(header_record(meta)), Value::Object(m)]))
        }
    }
}

fn emit_sample(sample: &SampleReport, format: OutputFormat, meta: &Meta) -> Result<Vec<u8>> {
    let header: Vec<String> = ["cycle", "set", "rank", "unit", "rank_weight", "response"]
        .iter()
        .map(|s| (*s).to_owned())
        .chain(sample.predictor_names.iter().cloned())
        .collect();
    let rows: Vec<Vec<String>> = sample
        .rows
        .iter()
        .map(|r| {
            let mut v = vec![
                (r.cycle + 1).to_string(),
                (r.set + 1).to_string(),
                r.rank.to_string(),
                (r.unit + 1).to_string(),
                format_real(r.weight),
                format_real(r.response),
            ];
            v.extend(r.x.iter().map(|&x| format_real(x)));
            v
        })
        .collect();
    let scheme_line = format!("scheme={} units are 1-based file rows", sample.scheme);
    match format {
        OutputFormat::Csv => csv_bytes(&[meta.line(), scheme_line], &header, &rows),
        OutputFormat::Markdown => {
            let mut out = format!("<!-- {} -->\n<!-- {scheme_line} -->\n\n", meta.line());
            out.push_str(&format!("| {} |\n", header.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
            for r in &rows {
                out.push_str(&format!("| {} |\n", r.join(" | ")));
            }
            Ok(out.into_bytes())
        }
        OutputFormat::JsonLines => {
            let mut head = header_record(meta);
            head.insert("scheme".into(), json!(sample.scheme));
            let mut records = vec![Value::Object(head)];
            for r in &sample.rows {
                let x: Map<String, Value> = sample
                    .predictor_names
                    .iter()
                    .zip(&r.x)
                    .map(|(n, &v)| (n.clone(), json_real(v)))
                    .collect();
                records.push(json!({
                    "record": "draw",
                    "cycle": r.cycle + 1,
                    "set": r.set + 1,
                    "rank": r.rank,
                    "unit": r.unit + 1,
                    "rank_weight": json_real(r.weight),
                    "response": json_real(r.response),
                    "x": x,
                }));
            }
            Ok(jsonl(&records))
        }
    }
}
