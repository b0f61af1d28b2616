use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rankshrink::cli_io::config::RunKind;
use rankshrink::cli_io::emit::Meta;
use rankshrink::cli_io::format::{format_real, parse_real, round_real};
use rankshrink::cli_io::{emit_report, parse_report_csv, OutputFormat};
use rankshrink::dataset::Dataset;
use rankshrink::linear::{liu_type_fit, ls_fit, ridge_fit, select_kd_liu};
use rankshrink::logistic::{gradient, ml_fit, DEFAULT_MAX_ITER, DEFAULT_TOL};
use rankshrink::restricted::{mixed_fit, mixed_fit_normal_form, woodbury_inverse, RestrictionSpec};
use rankshrink::simulation::metrics::{percentile_ci, quantile_sorted};
use rankshrink::simulation::{Design, ExperimentReport, PopulationSource, ReportRow, StudyKind};

fn design(n: usize, p: usize) -> impl Strategy<Value = (DMatrix<f64>, DVector<f64>)> {
    (
        proptest::collection::vec(-1.0f64..1.0, n * p),
        proptest::collection::vec(-2.0f64..2.0, n),
    )
        .prop_map(move |(x, y)| (DMatrix::from_row_slice(n, p, &x), DVector::from_vec(y)))
}

fn well_conditioned(x: &DMatrix<f64>) -> bool {
    let s = x.transpose() * x;
    let ev = s.symmetric_eigenvalues();
    ev.min() > 1e-2 * ev.max()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ridge_norm_decreases_in_k((x, y) in design(12, 3), k1 in 0.0f64..5.0, dk in 0.01f64..5.0) {
        prop_assume!(well_conditioned(&x));
        let data = Dataset::continuous(x, y).unwrap();
        let a = ridge_fit(&data, k1).unwrap().beta.norm();
        let b = ridge_fit(&data, k1 + dk).unwrap().beta.norm();
        prop_assert!(b <= a + 1e-12);
    }

    #[test]
    fn liu_type_with_zero_d_is_ridge((x, y) in design(10, 3), k in 0.0f64..3.0) {
        prop_assume!(well_conditioned(&x));
        let data = Dataset::continuous(x, y).unwrap();
        let lt = liu_type_fit(&data, k, 0.0).unwrap().beta;
        let r = ridge_fit(&data, k).unwrap().beta;
        prop_assert!((lt - r).amax() <= 1e-12);
    }

    #[test]
    fn liu_rule_gives_nonnegative_k((x, y) in design(15, 4)) {
        prop_assume!(well_conditioned(&x));
        let data = Dataset::continuous(x, y).unwrap();
        let params = select_kd_liu(&data).unwrap();
        prop_assert!(params.k >= 0.0 && params.d.is_finite());
    }

    #[test]
    fn mixed_forms_agree((x, y) in design(12, 3), rm in proptest::collection::vec(-1.0f64..1.0, 3),
                         r in -1.0f64..1.0, omega in 0.1f64..3.0, v in 0.05f64..=1.0) {
        prop_assume!(well_conditioned(&x));
        let data = Dataset::continuous(x, y).unwrap();
        let spec = RestrictionSpec::new(
            DMatrix::from_row_slice(1, 3, &rm),
            DVector::from_element(1, r),
            DMatrix::from_element(1, 1, omega),
            v,
        ).unwrap();
        let a = mixed_fit(&data, &spec).unwrap().beta;
        let b = mixed_fit_normal_form(&data, &spec).unwrap().beta;
        prop_assert!((a - b).amax() <= 1e-9 * (1.0 + ls_fit(&data).unwrap().beta.amax()));
    }

    #[test]
    fn woodbury_matches_direct_inverse(a in proptest::collection::vec(-1.0f64..1.0, 16),
                                       b in proptest::collection::vec(-1.0f64..1.0, 8),
                                       c in 0.1f64..2.0) {
        let a = DMatrix::from_row_slice(4, 4, &a);
        let a = &a * a.transpose() + DMatrix::identity(4, 4);
        let b = DMatrix::from_row_slice(4, 2, &b);
        let c = DMatrix::identity(2, 2) * c;
        let direct = (&a + &b * &c * b.transpose()).try_inverse().unwrap();
        let w = woodbury_inverse(&a, &b, &c, &b.transpose()).unwrap();
        prop_assert!((w - direct).amax() <= 1e-9);
    }

    #[test]
    fn ml_gradient_vanishes(x in proptest::collection::vec(-2.0f64..2.0, 40), flips in proptest::collection::vec(0.0f64..1.0, 40)) {
        let x = DMatrix::from_row_slice(40, 1, &x).insert_column(0, 1.0);
        // Noisy labels keep the classes overlapping.
        let y = DVector::from_fn(40, |i, _| f64::from(u8::from(flips[i] < 1.0 / (1.0 + (-x[(i, 1)]).exp()))));
        let ones = y.sum();
        prop_assume!(ones >= 5.0 && ones <= 35.0);
        let data = Dataset::binary(x, y).unwrap();
        if let Ok(fit) = ml_fit(&data, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            prop_assert!(gradient(&data, &fit.beta).norm() <= 1e-6);
        }
    }

    #[test]
    fn quantiles_are_monotone_and_bounded(mut v in proptest::collection::vec(-1e3f64..1e3, 1..200), q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let a = quantile_sorted(&v, lo);
        let b = quantile_sorted(&v, hi);
        prop_assert!(a <= b);
        prop_assert!(v[0] <= a && b <= v[v.len() - 1]);
        let (ci_lo, ci_hi) = percentile_ci(&v, 0.025, 0.975).unwrap();
        prop_assert!(ci_lo <= ci_hi);
    }

    #[test]
    fn real_format_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL) {
        let text = format_real(x);
        prop_assert!(!text.contains(','));
        prop_assert_eq!(parse_real(&text).unwrap(), round_real(x));
    }

    #[test]
    fn report_csv_round_trips(rows in proptest::collection::vec(
        (0usize..5, 0usize..3, 1usize..10_000, 0usize..50, 0.0f64..1e6, 0.0f64..1e6, 0.0f64..10.0, 0.0f64..1.0, 1.0f64..1e7),
        0..12,
    )) {
        let schemes = ["SRS", "RSS", "MRS", "MMRS", "MMRM"];
        let ests = ["LS", "R", "LT"];
        let rows: Vec<ReportRow> = rows.into_iter().map(|(s, e, n, f, mse, med, re, lo, hi)| ReportRow {
            scheme: schemes[s].into(),
            estimator: ests[e].into(),
            replications: n,
            failures: f,
            mse,
            median_sse: med,
            re,
            ci_lo: lo,
            ci_hi: hi,
            sse: Vec::new(),
        }).collect();
        let report = ExperimentReport {
            study: StudyKind::Linear,
            source: PopulationSource::Synthetic,
            design: Design { kappa: Some(0.9), phi: None, eta: None, cycles: 3, set_size: 3, c: 1.0 },
            seed: 1,
            replications: 10,
            baseline: "LS,SRS".into(),
            clamped_probabilities: 0,
            rows: rows.clone(),
        };
        let meta = Meta { kind: RunKind::Linear, seed: 1, config_sha256: "0".repeat(64) };
        let text = String::from_utf8(emit_report(&report, OutputFormat::Csv, &meta).unwrap()).unwrap();
        let back = parse_report_csv(&text).unwrap();
        prop_assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            prop_assert_eq!(&a.scheme, &b.scheme);
            prop_assert_eq!(&a.estimator, &b.estimator);
            prop_assert_eq!((a.replications, a.failures), (b.replications, b.failures));
            for (x, y) in [(a.mse, b.mse), (a.median_sse, b.median_sse), (a.re, b.re), (a.ci_lo, b.ci_lo), (a.ci_hi, b.ci_hi)] {
                prop_assert_eq!(round_real(x), y);
                prop_assert!((x - y).abs() <= 5e-6 * x.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
}
