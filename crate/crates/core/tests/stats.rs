use lgin::stats::{beta_inc, ln_gamma, mean, paired_t_test, std_dev, student_t_two_sided};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

fn statrs_two_sided(t: f64, df: f64) -> f64 {
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

#[test]
fn five_pair_example_matches_closed_form() {
    let a = [0.82, 0.90, 0.78, 0.88, 0.85];
    let b = [0.80, 0.86, 0.79, 0.84, 0.80];
    let r = paired_t_test(&a, &b, 0.10).unwrap();
    // d = [0.02, 0.04, −0.01, 0.04, 0.05], mean 0.028, Σ(d − d̄)² = 0.00228
    let md = 0.028;
    let sd = (0.00228f64 / 4.0).sqrt();
    let t = md / (sd / 5f64.sqrt());
    assert!((r.mean_diff - md).abs() < 1e-12);
    assert!((r.t - t).abs() < 1e-10, "{} vs {t}", r.t);
    assert!((r.p - statrs_two_sided(t, 4.0)).abs() < 1e-10);
    assert_eq!(r.df, 4);
    assert!(r.significant);
}

#[test]
fn identical_samples_give_zero() {
    let a = [0.8, 0.7, 0.9];
    let r = paired_t_test(&a, &a, 0.10).unwrap();
    assert_eq!(r.t, 0.0);
    assert_eq!(r.p, 1.0);
    assert!(!r.significant);
}

#[test]
fn constant_nonzero_difference_is_infinite() {
    let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.5, 1.5, 2.5], 0.10).unwrap();
    assert_eq!(r.t, f64::INFINITY);
    assert_eq!(r.p, 0.0);
    assert!(r.significant);
    let r = paired_t_test(&[0.5, 1.5], &[1.0, 2.0], 0.10).unwrap();
    assert_eq!(r.t, f64::NEG_INFINITY);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(paired_t_test(&[1.0, 2.0], &[1.0], 0.1).is_err());
    assert!(paired_t_test(&[1.0], &[1.0], 0.1).is_err());
}

#[test]
fn printed_table_critical_values() {
    // (df, two-sided alpha, critical t) from standard t tables
    let table = [
        (4.0, 0.20, 1.533),
        (4.0, 0.10, 2.132),
        (4.0, 0.05, 2.776),
        (9.0, 0.10, 1.833),
        (9.0, 0.05, 2.262),
        (9.0, 0.01, 3.250),
        (1.0, 0.10, 6.314),
        (30.0, 0.05, 2.042),
    ];
    for (df, alpha, t) in table {
        let p = student_t_two_sided(t, df);
        assert!((p - alpha).abs() < 0.01 * alpha, "df {df} t {t}: {p}");
    }
}

#[test]
fn special_function_identities() {
    assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
    assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    assert!(ln_gamma(1.0).abs() < 1e-13);
    assert_eq!(beta_inc(2.0, 3.0, 0.0), 0.0);
    assert_eq!(beta_inc(2.0, 3.0, 1.0), 1.0);
    assert!((beta_inc(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
    // I_x(2, 1) = x²
    assert!((beta_inc(2.0, 1.0, 0.6) - 0.36).abs() < 1e-14);
}

#[test]
fn summary_statistics() {
    let x = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
    assert_eq!(mean(&x), 5.0);
    assert!((std_dev(&x) - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
    assert_eq!(std_dev(&[3.0]), 0.0);
}

proptest! {
    #[test]
    fn tail_matches_reference(t in -40.0f64..40.0, df in 1usize..60) {
        let p = student_t_two_sided(t, df as f64);
        prop_assert!((p - statrs_two_sided(t, df as f64)).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn t_test_matches_reference(
        pairs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..12),
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = paired_t_test(&a, &b, 0.10).unwrap();
        let swapped = paired_t_test(&b, &a, 0.10).unwrap();
        prop_assert!((r.t + swapped.t).abs() < 1e-9 * r.t.abs().max(1.0));
        prop_assert!((r.p - swapped.p).abs() < 1e-12);
        if r.t.is_finite() {
            prop_assert!((r.p - statrs_two_sided(r.t, r.df as f64)).abs() < 1e-10);
        }
        prop_assert_eq!(r.significant, r.p < 0.10);
    }

    #[test]
    fn beta_symmetry(a in 0.1f64..20.0, b in 0.1f64..20.0, x in 0.0f64..1.0) {
        let l = beta_inc(a, b, x);
        let r = 1.0 - beta_inc(b, a, 1.0 - x);
        prop_assert!((l - r).abs() < 1e-10, "{} vs {}", l, r);
    }
}
