use std::ffi::{CStr, CString};
use std::ptr;

use rankshrink_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe { rks_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

// Collinear 8 x 3 design with a known coefficient vector and small noise.
fn linear_data() -> (Vec<f64>, Vec<f64>) {
    let x = vec![
        1.0, 1.1, 0.3, 2.0, 2.1, -0.4, 3.0, 2.9, 0.8, -1.0, -0.8, 1.2, 0.5, 0.4, -1.1, -2.0, -2.2, 0.1, 1.5, 1.7,
        0.9, -0.7, -0.5, -0.6,
    ];
    let noise = [0.05, -0.02, 0.03, -0.04, 0.01, 0.02, -0.03, 0.04];
    let beta = [1.0, 0.5, -0.25];
    let y = (0..8)
        .map(|i| (0..3).map(|j| x[i * 3 + j] * beta[j]).sum::<f64>() + noise[i])
        .collect();
    (x, y)
}

fn dataset() -> *mut RksDataset {
    let (x, y) = linear_data();
    let mut ds = ptr::null_mut();
    let st = unsafe { rks_dataset_new(x.as_ptr(), y.as_ptr(), 8, 3, false, &mut ds) };
    assert_eq!(st, RksStatus::Ok);
    ds
}

fn coefficients(fit: *const RksFit) -> Vec<f64> {
    let mut len = 0;
    assert_eq!(unsafe { rks_fit_len(fit, &mut len) }, RksStatus::Ok);
    let mut beta = vec![0.0; len];
    assert_eq!(unsafe { rks_fit_coefficients(fit, beta.as_mut_ptr(), len) }, RksStatus::Ok);
    beta
}

fn fit(ds: *const RksDataset, est: RksEstimator, k: f64, d: f64, restr: *const RksRestriction) -> Vec<f64> {
    let mut f = ptr::null_mut();
    let st = unsafe { rks_fit(ds, est as u32, k, d, restr, &mut f) };
    assert_eq!(st, RksStatus::Ok, "{}", last_error());
    let beta = coefficients(f);
    unsafe { rks_fit_free(f) };
    beta
}

#[test]
fn ridge_at_zero_matches_least_squares() {
    let ds = dataset();
    let ls = fit(ds, RksEstimator::Ls, f64::NAN, f64::NAN, ptr::null());
    let ridge = fit(ds, RksEstimator::Ridge, 0.0, f64::NAN, ptr::null());
    for (a, b) in ls.iter().zip(&ridge) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((ls[0] - 1.0).abs() < 0.3);
    unsafe { rks_dataset_free(ds) };
}

#[test]
fn selection_rules_report_their_parameters() {
    let ds = dataset();
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { rks_fit(ds, RksEstimator::LiuType as u32, f64::NAN, f64::NAN, ptr::null(), &mut f) },
        RksStatus::Ok
    );
    let (mut k, mut d) = (f64::NAN, f64::NAN);
    assert_eq!(unsafe { rks_fit_params(f, &mut k, &mut d) }, RksStatus::Ok);
    assert!(k >= 0.0 && d.is_finite());
    unsafe { rks_fit_free(f) };

    let mut f = ptr::null_mut();
    assert_eq!(unsafe { rks_fit(ds, RksEstimator::Ls as u32, 1.0, 1.0, ptr::null(), &mut f) }, RksStatus::Ok);
    assert_eq!(unsafe { rks_fit_params(f, &mut k, &mut d) }, RksStatus::Ok);
    assert!(k.is_nan() && d.is_nan());
    unsafe {
        rks_fit_free(f);
        rks_dataset_free(ds);
    }
}

#[test]
fn restricted_estimators_through_the_abi() {
    let ds = dataset();
    let (r_matrix, r, omega) = ([1.0, -2.0, 0.0], [0.0], [1.0]);
    let mut restr = ptr::null_mut();
    let st = unsafe { rks_restriction_new(r_matrix.as_ptr(), r.as_ptr(), omega.as_ptr(), 1, 3, 1.0, &mut restr) };
    assert_eq!(st, RksStatus::Ok);
    let mixed = fit(ds, RksEstimator::Mixed, f64::NAN, f64::NAN, restr);
    let srl = fit(ds, RksEstimator::Srl, f64::NAN, 1.0, restr);
    let srr = fit(ds, RksEstimator::Srr, 0.0, f64::NAN, restr);
    for i in 0..3 {
        assert!((mixed[i] - srl[i]).abs() < 1e-12);
        assert!((mixed[i] - srr[i]).abs() < 1e-12);
    }

    let mut f = ptr::null_mut();
    let st = unsafe { rks_fit(ds, RksEstimator::Srr as u32, 0.1, f64::NAN, ptr::null(), &mut f) };
    assert_eq!(st, RksStatus::Config);
    assert!(last_error().contains("restriction"));
    unsafe {
        rks_restriction_free(restr);
        rks_dataset_free(ds);
    }
}

#[test]
fn logistic_fit_with_intercept() {
    let x = [-2.0, -1.5, -1.0, -0.5, -0.2, 0.0, 0.3, 0.6, 1.0, 1.4, 1.8, 2.5];
    let y = [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0];
    let mut base = ptr::null_mut();
    assert_eq!(unsafe { rks_dataset_new(x.as_ptr(), y.as_ptr(), 12, 1, true, &mut base) }, RksStatus::Ok);
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { rks_dataset_with_intercept(base, &mut ds) }, RksStatus::Ok);
    let ml = fit(ds, RksEstimator::Ml, f64::NAN, f64::NAN, ptr::null());
    assert_eq!(ml.len(), 2);
    assert!(ml[1] > 0.0);
    let liu = fit(ds, RksEstimator::LiuType, 0.5, -0.5, ptr::null());
    for (a, b) in ml.iter().zip(&liu) {
        assert!((a - b).abs() < 1e-12);
    }
    let mut f = ptr::null_mut();
    assert_eq!(
        unsafe { rks_fit(ds, RksEstimator::Srl as u32, f64::NAN, 1.0, ptr::null(), &mut f) },
        RksStatus::Config
    );
    unsafe {
        rks_dataset_free(ds);
        rks_dataset_free(base);
    }
}

#[test]
fn sampling_is_seeded() {
    let n = 30;
    let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let x: Vec<f64> = (0..n).flat_map(|i| [i as f64, (i as f64).sqrt()]).collect();
    let scores: Vec<f64> = y.iter().flat_map(|&v| [v, -v]).collect();
    let mut pop = ptr::null_mut();
    let st = unsafe { rks_population_new(y.as_ptr(), x.as_ptr(), scores.as_ptr(), n, 2, 2, false, &mut pop) };
    assert_eq!(st, RksStatus::Ok);
    let rhos = [1.0, 0.5];
    let draw = |seed| {
        let mut s = ptr::null_mut();
        let st = unsafe { rks_draw_sample(pop, RksScheme::Mrs as u32, 3, 2, 0.01, rhos.as_ptr(), 2, seed, &mut s) };
        assert_eq!(st, RksStatus::Ok, "{}", last_error());
        let mut len = 0;
        unsafe { rks_sample_len(s, &mut len) };
        let mut units = vec![0usize; len];
        assert_eq!(unsafe { rks_sample_units(s, units.as_mut_ptr(), len) }, RksStatus::Ok);
        let mut ds = ptr::null_mut();
        assert_eq!(unsafe { rks_sample_dataset(s, &mut ds) }, RksStatus::Ok);
        unsafe {
            rks_dataset_free(ds);
            rks_sample_free(s);
        }
        units
    };
    let a = draw(9);
    assert_eq!(a.len(), 6);
    assert_eq!(a, draw(9));
    assert!(a.iter().all(|&u| u < n));

    let mut s = ptr::null_mut();
    let st = unsafe { rks_draw_sample(pop, RksScheme::Rss as u32, 6, 2, 1.0, rhos.as_ptr(), 2, 1, &mut s) };
    assert_eq!(st, RksStatus::Data);
    unsafe { rks_population_free(pop) };
}

#[test]
fn study_report_and_rendering() {
    let cfg = CString::new(
        "[run]\nkind = \"linear\"\nseed = 4\n[study]\nreplications = 20\nschemes = [\"SRS\", \"RSS\"]\n",
    )
    .unwrap();
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { rks_run_study(cfg.as_ptr(), &mut rep) }, RksStatus::Ok, "{}", last_error());
    let mut len = 0;
    unsafe { rks_report_len(rep, &mut len) };
    assert_eq!(len, 6);
    let mut row = RksReportRow {
        scheme: 99,
        estimator: 99,
        replications: 0,
        failures: 0,
        mse: 0.0,
        median_sse: 0.0,
        re: 0.0,
        ci_lo: 0.0,
        ci_hi: 0.0,
    };
    assert_eq!(unsafe { rks_report_row(rep, 0, &mut row) }, RksStatus::Ok);
    assert_eq!((row.scheme, row.estimator), (RksScheme::Srs as u32, RksEstimator::Ls as u32));
    assert_eq!(row.re, 1.0);
    assert_eq!(row.replications, 20);
    assert_eq!(unsafe { rks_report_row(rep, 6, &mut row) }, RksStatus::InvalidArgument);

    let mut text = ptr::null_mut();
    assert_eq!(unsafe { rks_report_render(rep, RksFormat::Csv as u32, &mut text) }, RksStatus::Ok);
    let csv = unsafe { CStr::from_ptr(text) }.to_string_lossy().into_owned();
    assert!(csv.starts_with("# rankshrink"));
    assert!(csv.contains("\nscheme,estimator,kappa,n,H,c,RE,ci_lo,ci_hi,failures"));
    unsafe {
        rks_string_free(text);
        rks_report_free(rep);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut ds = ptr::null_mut();
    let y = [1.0, 2.0];
    assert_eq!(unsafe { rks_dataset_new(ptr::null(), y.as_ptr(), 2, 1, false, &mut ds) }, RksStatus::InvalidArgument);
    assert!(last_error().contains("x is null"));
    let x = [1.0, 2.0];
    let bad = [0.0, 2.0];
    assert_ne!(unsafe { rks_dataset_new(x.as_ptr(), bad.as_ptr(), 2, 1, true, &mut ds) }, RksStatus::Ok);
    assert_eq!(unsafe { rks_fit(ptr::null(), 0, 0.0, 0.0, ptr::null(), ptr::null_mut()) }, RksStatus::InvalidArgument);

    let no_seed = CString::new("[run]\nkind = \"linear\"\n").unwrap();
    let mut rep = ptr::null_mut();
    assert_eq!(unsafe { rks_run_study(no_seed.as_ptr(), &mut rep) }, RksStatus::Config);
    assert!(rep.is_null());
    assert!(last_error().contains("seed"));

    // Truncated copies stay NUL-terminated and report the full size.
    let mut small = [1 as std::ffi::c_char; 4];
    let need = unsafe { rks_last_error(small.as_mut_ptr(), small.len()) };
    assert!(need > 4);
    assert_eq!(small[3], 0);

    let collinear = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
    let y3 = [1.0, 2.0, 2.5];
    assert_eq!(unsafe { rks_dataset_new(collinear.as_ptr(), y3.as_ptr(), 3, 2, false, &mut ds) }, RksStatus::Ok);
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { rks_fit(ds, RksEstimator::Ls as u32, 0.0, 0.0, ptr::null(), &mut f) }, RksStatus::Numerical);
    assert_eq!(unsafe { rks_fit(ds, 42, 0.0, 0.0, ptr::null(), &mut f) }, RksStatus::InvalidArgument);
    unsafe { rks_dataset_free(ds) };
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(rks_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
