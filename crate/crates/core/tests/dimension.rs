use dtlab::dimension::{dimension_scan, packing_terms, ScanConfig, ScanRow};
use dtlab::measures::CompactMeasure;
use num_complex::Complex64;
use proptest::prelude::*;

fn row(eps: f64, big_n: usize, k: usize, f_lb: f64, omega: f64, chi: f64) -> ScanRow {
    ScanRow::assemble(eps, 0.1, big_n, k, &packing_terms(eps, big_n, k, f_lb, omega), chi)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn leading_term_is_exactly_two_minus_one_over_n(
        eps in 1e-9f64..0.01, big_n in 2usize..16, k in 2usize..64, f in -5.0f64..0.0, omega in -3.0f64..0.0,
    ) {
        let n2 = ((big_n * k) as f64).powi(2);
        let r = row(eps, big_n, k, f * n2, omega, 0.0);
        let le = eps.ln().abs();
        let lead = 2.0 - 1.0 / big_n as f64;
        prop_assert!((r.delta_hat - (r.f_lb_norm + r.const_term) / le - lead).abs() <= 1e-12 * (1.0 + r.delta_hat.abs()));
        prop_assert!((r.log_packing_lb / n2 - lead * le - r.f_lb_norm - r.const_term).abs() <= 1e-12 * r.log_packing_lb.abs() / n2);
    }

    #[test]
    fn chi_offset_shifts_delta_hat_exactly(
        eps in 1e-9f64..0.01, big_n in 2usize..16, k in 2usize..64, chi in -1e6f64..1e6,
    ) {
        let a = row(eps, big_n, k, -1e3, -0.5, 0.0);
        let b = row(eps, big_n, k, -1e3, -0.5, chi);
        let n2 = ((big_n * k) as f64).powi(2);
        let want = chi / (n2 * eps.ln().abs());
        prop_assert!((b.delta_hat - a.delta_hat - want).abs() <= 1e-12 * (1.0 + a.delta_hat.abs()));
        prop_assert_eq!(a.const_term, b.const_term);
        prop_assert_eq!(a.f_lb_norm, b.f_lb_norm);
    }

    /// Holding the normalized Selberg term and the residual constant fixed,
    /// a larger N raises delta_hat by the change in 2 - 1/N.
    #[test]
    fn delta_hat_increases_with_n_through_the_leading_term(
        eps in 1e-9f64..0.01, big_n in 2usize..16, k in 2usize..64,
    ) {
        let a = row(eps, big_n, k, -1e3, -0.5, 0.0);
        let b = row(eps, big_n + 1, k, -1e3, -0.5, 0.0);
        let le = eps.ln().abs();
        let hat_a = 2.0 - 1.0 / big_n as f64 + (a.f_lb_norm + a.const_term) / le;
        let matched = 2.0 - 1.0 / (big_n + 1) as f64 + (a.f_lb_norm + a.const_term) / le;
        prop_assert!(matched > hat_a);
        prop_assert!((hat_a - a.delta_hat).abs() <= 1e-12 * (1.0 + hat_a.abs()));
        prop_assert!(((2.0 - 1.0 / (big_n + 1) as f64) - (b.delta_hat - (b.f_lb_norm + b.const_term) / le)).abs() <= 1e-12 * (1.0 + b.delta_hat.abs()));
    }
}

/// μ = δ₀, c = 1, N = 4, k = 128, ε = 1e-2. The finite-size value is far
/// below the asymptotic range; what is pinned is the value and its split.
#[test]
fn packing_example_value_and_decomposition() {
    let cfg = ScanConfig {
        mu: CompactMeasure::dirac(Complex64::new(0.0, 0.0)),
        c: 1.0,
        big_n: 4,
        k: 128,
        eps_grid: vec![1e-2],
        chi_offset: 0.0,
        log_vol_omega: None,
        seed: 17,
    };
    let report = dimension_scan(&cfg).unwrap();
    let r = &report.rows[0];
    let le = 1e-2f64.ln().abs();
    let value = r.log_packing_lb / (512.0f64 * 512.0) / le;
    assert!((value - r.delta_hat).abs() < 1e-12);
    assert!((-1.1..-0.8).contains(&value), "{value}");
    assert!((r.delta_hat - 1.75 - (r.f_lb_norm + r.const_term) / le).abs() < 1e-12);
    // The Selberg term dominates the deficit at this ε.
    assert!(r.f_lb_norm / le < -2.0);
}
