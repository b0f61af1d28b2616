//! C ABI over the rankshrink estimators, samplers and Monte Carlo studies.
//!
//! Every function returns an [`RksStatus`]; on failure a message is kept per
//! thread and can be read with [`rks_last_error`]. Objects are opaque handles
//! created by `*_new`/producer functions and released with the matching
//! `*_free`. Matrices are passed row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use rankshrink::cli_io::config::{FitSection, Param};
use rankshrink::cli_io::emit::{emit, Meta, Output};
use rankshrink::cli_io::{fit_dataset, resolve, run_study, EstimatorFit, OutputFormat, Overrides};
use rankshrink::dataset::{Dataset, ResponseKind};
use rankshrink::error::Error;
use rankshrink::linear::HkbVariant;
use rankshrink::logistic::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use rankshrink::restricted::RestrictionSpec;
use rankshrink::sampling::{draw_sample, Population, RankedSample};
use rankshrink::simulation::{Estimator, ExperimentReport, SchemeLabel};

/// Result of every call. The non-zero values match the CLI exit codes where
/// they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RksStatus {
    Ok = 0,
    /// Null pointer, out-of-range code, bad UTF-8 or a too-small buffer.
    InvalidArgument = 1,
    Config = 2,
    Data = 3,
    Numerical = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RksEstimator {
    Ls = 0,
    Ridge = 1,
    LiuType = 2,
    LiuOne = 3,
    Mixed = 4,
    MixedLiu = 5,
    Srl = 6,
    MixedRidge = 7,
    Srr = 8,
    Ml = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RksScheme {
    Srs = 0,
    Rss = 1,
    Mrs = 2,
    Mmrs = 3,
    Mmrm = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RksFormat {
    Csv = 0,
    Markdown = 1,
    JsonLines = 2,
}

/// One (scheme, estimator) cell of a study report. Undefined reals are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RksReportRow {
    /// An [`RksScheme`] value.
    pub scheme: u32,
    /// An [`RksEstimator`] value.
    pub estimator: u32,
    pub replications: usize,
    pub failures: usize,
    pub mse: f64,
    pub median_sse: f64,
    pub re: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

pub struct RksDataset {
    data: Dataset,
    /// Set when the first column is an added intercept.
    intercept: bool,
}

pub struct RksRestriction {
    spec: RestrictionSpec,
}

pub struct RksFit {
    fit: EstimatorFit,
}

pub struct RksPopulation {
    population: Population,
}

pub struct RksSample {
    sample: RankedSample,
}

pub struct RksReport {
    report: ExperimentReport,
    meta: Meta,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(RksStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match rankshrink::cli_io::exit_code(&e) {
            2 => RksStatus::Config,
            3 => RksStatus::Data,
            _ => RksStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn bad_arg(msg: impl Into<String>) -> Failure {
    Failure(RksStatus::InvalidArgument, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RksStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            RksStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal error: panic caught at the C boundary");
            RksStatus::Internal
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller guarantees a non-null pointer refers to a live object.
    unsafe { p.as_ref() }.ok_or_else(|| bad_arg(format!("{what} is null")))
}

fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(bad_arg(format!("{what} is null")));
    }
    // SAFETY: the caller guarantees `len` readable values at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(bad_arg("output pointer is null"));
    }
    // SAFETY: checked non-null; the caller owns the slot.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(bad_arg("output pointer is null"));
    }
    // SAFETY: checked non-null.
    unsafe { *out = value };
    Ok(())
}

fn free<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this library and is freed once.
        drop(unsafe { Box::from_raw(p) });
    }
}

fn estimator_from(code: u32) -> Result<Estimator, Failure> {
    Ok(match code {
        0 => Estimator::Ls,
        1 => Estimator::Ridge,
        2 => Estimator::LiuType,
        3 => Estimator::LiuOne,
        4 => Estimator::Mixed,
        5 => Estimator::MixedLiu,
        6 => Estimator::Srl,
        7 => Estimator::MixedRidge,
        8 => Estimator::Srr,
        9 => Estimator::Ml,
        _ => return Err(bad_arg(format!("unknown estimator code {code}"))),
    })
}

fn estimator_code(e: Estimator) -> u32 {
    let code = match e {
        Estimator::Ls => RksEstimator::Ls,
        Estimator::Ridge => RksEstimator::Ridge,
        Estimator::LiuType => RksEstimator::LiuType,
        Estimator::LiuOne => RksEstimator::LiuOne,
        Estimator::Mixed => RksEstimator::Mixed,
        Estimator::MixedLiu => RksEstimator::MixedLiu,
        Estimator::Srl => RksEstimator::Srl,
        Estimator::MixedRidge => RksEstimator::MixedRidge,
        Estimator::Srr => RksEstimator::Srr,
        Estimator::Ml => RksEstimator::Ml,
    };
    code as u32
}

fn scheme_from(code: u32) -> Result<SchemeLabel, Failure> {
    Ok(match code {
        0 => SchemeLabel::Srs,
        1 => SchemeLabel::Rss,
        2 => SchemeLabel::Mrs,
        3 => SchemeLabel::Mmrs,
        4 => SchemeLabel::Mmrm,
        _ => return Err(bad_arg(format!("unknown scheme code {code}"))),
    })
}

fn scheme_code(s: SchemeLabel) -> u32 {
    let code = match s {
        SchemeLabel::Srs => RksScheme::Srs,
        SchemeLabel::Rss => RksScheme::Rss,
        SchemeLabel::Mrs => RksScheme::Mrs,
        SchemeLabel::Mmrs => RksScheme::Mmrs,
        SchemeLabel::Mmrm => RksScheme::Mmrm,
    };
    code as u32
}

fn format_from(code: u32) -> Result<OutputFormat, Failure> {
    Ok(match code {
        0 => OutputFormat::Csv,
        1 => OutputFormat::Markdown,
        2 => OutputFormat::JsonLines,
        _ => return Err(bad_arg(format!("unknown format code {code}"))),
    })
}

fn param(v: f64) -> Param {
    if v.is_nan() {
        Param::default()
    } else {
        Param::Value(v)
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rks_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the buffer size the whole message needs.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rks_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            // SAFETY: `buf` has `len >= n` writable bytes.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len()
    })
}

/// Build a dataset from an `n x p` row-major design and `n` responses.
/// With `binary` set the responses must be 0 or 1.
///
/// # Safety
/// `x` must hold `n * p` values and `y` `n` values.
#[no_mangle]
pub unsafe extern "C" fn rks_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    binary: bool,
    out: *mut *mut RksDataset,
) -> RksStatus {
    guard(|| {
        let len = n.checked_mul(p).ok_or_else(|| bad_arg("n * p overflows"))?;
        let x = DMatrix::from_row_slice(n, p, slice(x, len, "x")?);
        let y = DVector::from_column_slice(slice(y, n, "y")?);
        let kind = if binary { ResponseKind::Binary } else { ResponseKind::Continuous };
        let data = Dataset::new(x, y, kind)?;
        store(out, RksDataset { data, intercept: false })
    })
}

/// New dataset with a leading column of ones. Logistic selection rules then
/// leave that column out of their predictor count.
///
/// # Safety
/// `dataset` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rks_dataset_with_intercept(dataset: *const RksDataset, out: *mut *mut RksDataset) -> RksStatus {
    guard(|| {
        let ds = non_null(dataset, "dataset")?;
        if ds.intercept {
            return Err(bad_arg("dataset already has an intercept column"));
        }
        store(out, RksDataset { data: ds.data.with_intercept(), intercept: true })
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rks_dataset_free(dataset: *mut RksDataset) {
    free(dataset);
}

/// Stochastic restriction `r = R beta + e`, `Cov(e) = sigma^2 Omega / v`,
/// with `R` of size `q x p`.
///
/// # Safety
/// `r_matrix` must hold `q * p` values, `r` `q` values and `omega` `q * q`.
#[no_mangle]
pub unsafe extern "C" fn rks_restriction_new(
    r_matrix: *const f64,
    r: *const f64,
    omega: *const f64,
    q: usize,
    p: usize,
    v: f64,
    out: *mut *mut RksRestriction,
) -> RksStatus {
    guard(|| {
        let qp = q.checked_mul(p).ok_or_else(|| bad_arg("q * p overflows"))?;
        let qq = q.checked_mul(q).ok_or_else(|| bad_arg("q * q overflows"))?;
        let spec = RestrictionSpec::new(
            DMatrix::from_row_slice(q, p, slice(r_matrix, qp, "r_matrix")?),
            DVector::from_column_slice(slice(r, q, "r")?),
            DMatrix::from_row_slice(q, q, slice(omega, qq, "omega")?),
            v,
        )?;
        store(out, RksRestriction { spec })
    })
}

/// # Safety
/// `restriction` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rks_restriction_free(restriction: *mut RksRestriction) {
    free(restriction);
}

/// Fit one estimator. Pass NaN for `k` or `d` to use the estimator's
/// selection rule. A binary dataset takes `ML`, `RIDGE` or `LIU_TYPE` (the
/// logistic versions); the restricted estimators need `restriction`, which
/// may otherwise be null.
///
/// # Safety
/// Handles must be live; `restriction` may be null.
#[no_mangle]
pub unsafe extern "C" fn rks_fit(
    dataset: *const RksDataset,
    estimator: u32,
    k: f64,
    d: f64,
    restriction: *const RksRestriction,
    out: *mut *mut RksFit,
) -> RksStatus {
    guard(|| {
        let ds = non_null(dataset, "dataset")?;
        // SAFETY: null or live per the contract.
        let restr = unsafe { restriction.as_ref() }.map(|r| &r.spec);
        let section = FitSection {
            estimator: estimator_from(estimator)?,
            k: param(k),
            d: param(d),
            intercept: Some(ds.intercept),
            hkb: HkbVariant::default(),
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        };
        let predictors = ds.data.p() - usize::from(ds.intercept);
        let fit = fit_dataset(&ds.data, &section, restr, predictors)?;
        store(out, RksFit { fit })
    })
}

/// Number of coefficients in a fit.
///
/// # Safety
/// `fit` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rks_fit_len(fit: *const RksFit, out: *mut usize) -> RksStatus {
    guard(|| write_out(out, non_null(fit, "fit")?.fit.beta.len()))
}

/// Copy the coefficients into `buf`, which must hold at least `rks_fit_len` values.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn rks_fit_coefficients(fit: *const RksFit, buf: *mut f64, len: usize) -> RksStatus {
    guard(|| {
        let beta = &non_null(fit, "fit")?.fit.beta;
        if buf.is_null() || len < beta.len() {
            return Err(bad_arg(format!("buffer needs room for {} coefficients", beta.len())));
        }
        // SAFETY: `buf` has at least `beta.len()` slots.
        unsafe { ptr::copy_nonoverlapping(beta.as_ptr(), buf, beta.len()) };
        Ok(())
    })
}

/// Shrinkage parameters used by the fit; NaN when the estimator has none.
///
/// # Safety
/// `fit` must be a live handle; `k` and `d` may be null.
#[no_mangle]
pub unsafe extern "C" fn rks_fit_params(fit: *const RksFit, k: *mut f64, d: *mut f64) -> RksStatus {
    guard(|| {
        let f = &non_null(fit, "fit")?.fit;
        if !k.is_null() {
            write_out(k, f.k.unwrap_or(f64::NAN))?;
        }
        if !d.is_null() {
            write_out(d, f.d.unwrap_or(f64::NAN))?;
        }
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rks_fit_free(fit: *mut RksFit) {
    free(fit);
}

/// Finite population of `n` units: responses, an `n x p` predictor matrix and
/// an `n x k` matrix of observer scores (both row-major).
///
/// # Safety
/// Buffers must hold the stated number of values.
#[no_mangle]
pub unsafe extern "C" fn rks_population_new(
    y: *const f64,
    x: *const f64,
    scores: *const f64,
    n: usize,
    p: usize,
    k: usize,
    binary: bool,
    out: *mut *mut RksPopulation,
) -> RksStatus {
    guard(|| {
        let np = n.checked_mul(p).ok_or_else(|| bad_arg("n * p overflows"))?;
        let nk = n.checked_mul(k).ok_or_else(|| bad_arg("n * k overflows"))?;
        let kind = if binary { ResponseKind::Binary } else { ResponseKind::Continuous };
        let population = Population::new(
            DVector::from_column_slice(slice(y, n, "y")?),
            DMatrix::from_row_slice(n, p, slice(x, np, "x")?),
            DMatrix::from_row_slice(n, k, slice(scores, nk, "scores")?),
            kind,
        )?;
        store(out, RksPopulation { population })
    })
}

/// # Safety
/// `population` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rks_population_free(population: *mut RksPopulation) {
    free(population);
}

/// Draw `cycles * set_size` units with the given scheme. `rhos` holds one
/// ranking correlation per observer (RSS and MMRS use the first only).
///
/// # Safety
/// `population` must be live; `rhos` must hold `n_rhos` values.
#[no_mangle]
pub unsafe extern "C" fn rks_draw_sample(
    population: *const RksPopulation,
    scheme: u32,
    set_size: usize,
    cycles: usize,
    c: f64,
    rhos: *const f64,
    n_rhos: usize,
    seed: u64,
    out: *mut *mut RksSample,
) -> RksStatus {
    guard(|| {
        let pop = &non_null(population, "population")?.population;
        let spec = scheme_from(scheme)?.spec(set_size, cycles, c, slice(rhos, n_rhos, "rhos")?);
        let sample = draw_sample(pop, &spec, seed)?;
        store(out, RksSample { sample })
    })
}

/// Number of measured units.
///
/// # Safety
/// `sample` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rks_sample_len(sample: *const RksSample, out: *mut usize) -> RksStatus {
    guard(|| write_out(out, non_null(sample, "sample")?.sample.draws.len()))
}

/// 0-based population indices of the measured units, in draw order.
///
/// # Safety
/// `buf` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn rks_sample_units(sample: *const RksSample, buf: *mut usize, len: usize) -> RksStatus {
    guard(|| {
        let draws = &non_null(sample, "sample")?.sample.draws;
        if buf.is_null() || len < draws.len() {
            return Err(bad_arg(format!("buffer needs room for {} units", draws.len())));
        }
        for (i, d) in draws.iter().enumerate() {
            // SAFETY: `i < draws.len() <= len`.
            unsafe { *buf.add(i) = d.unit };
        }
        Ok(())
    })
}

/// Dataset of the measured units, ready for [`rks_fit`].
///
/// # Safety
/// `sample` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rks_sample_dataset(sample: *const RksSample, out: *mut *mut RksDataset) -> RksStatus {
    guard(|| {
        let data = non_null(sample, "sample")?.sample.dataset.clone();
        store(out, RksDataset { data, intercept: false })
    })
}

/// # Safety
/// `sample` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rks_sample_free(sample: *mut RksSample) {
    free(sample);
}

/// Run the Monte Carlo study described by a TOML configuration, in the same
/// format the command-line tool reads. `[run] kind` must name a study and
/// `[run] seed` must be set.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rks_run_study(config_toml: *const c_char, out: *mut *mut RksReport) -> RksStatus {
    guard(|| {
        if config_toml.is_null() {
            return Err(bad_arg("config is null"));
        }
        // SAFETY: non-null and NUL-terminated per the contract.
        let text = unsafe { CStr::from_ptr(config_toml) }
            .to_str()
            .map_err(|_| bad_arg("config is not valid UTF-8"))?;
        let cfg = resolve(Some(text), None, &Overrides::default())?;
        let report = run_study(&cfg)?;
        let meta = Meta { kind: cfg.kind, seed: cfg.seed, config_sha256: cfg.config_sha256 };
        store(out, RksReport { report, meta })
    })
}

/// Number of (scheme, estimator) rows.
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rks_report_len(report: *const RksReport, out: *mut usize) -> RksStatus {
    guard(|| write_out(out, non_null(report, "report")?.report.rows.len()))
}

/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rks_report_row(report: *const RksReport, index: usize, out: *mut RksReportRow) -> RksStatus {
    guard(|| {
        let rows = &non_null(report, "report")?.report.rows;
        let r = rows
            .get(index)
            .ok_or_else(|| bad_arg(format!("row {index} out of range (report has {})", rows.len())))?;
        write_out(
            out,
            RksReportRow {
                scheme: scheme_code(r.scheme.parse::<SchemeLabel>()?),
                estimator: estimator_code(r.estimator.parse::<Estimator>()?),
                replications: r.replications,
                failures: r.failures,
                mse: r.mse,
                median_sse: r.median_sse,
                re: r.re,
                ci_lo: r.ci_lo,
                ci_hi: r.ci_hi,
            },
        )
    })
}

/// Render the report as a NUL-terminated string; release it with [`rks_string_free`].
///
/// # Safety
/// `report` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn rks_report_render(report: *const RksReport, format: u32, out: *mut *mut c_char) -> RksStatus {
    guard(|| {
        let rep = non_null(report, "report")?;
        let bytes = emit(Output::Study(&rep.report), format_from(format)?, &rep.meta)?;
        let text = CString::new(bytes).map_err(|_| bad_arg("rendered report contains NUL"))?;
        write_out(out, text.into_raw())
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rks_report_free(report: *mut RksReport) {
    free(report);
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn rks_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: produced by `CString::into_raw` above.
        drop(unsafe { CString::from_raw(s) });
    }
}
