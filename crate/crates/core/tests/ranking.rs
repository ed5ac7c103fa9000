mod common;

use pareto_nas::metrics::{common_ratio, spearman};
use proptest::prelude::*;

fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..10).prop_map(f64::from), n),
            prop::collection::vec((0i32..10).prop_map(f64::from), n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn spearman_is_symmetric((x, y) in series()) {
        match (spearman(&x, &y), spearman(&y, &x)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (a, b) => prop_assert!(a.is_err() && b.is_err()),
        }
    }

    #[test]
    fn spearman_matches_oracle((x, y) in series()) {
        if let Ok(r) = spearman(&x, &y) {
            prop_assert!((r - common::spearman_oracle(&x, &y)).abs() < 1e-12);
        }
    }

    #[test]
    fn spearman_invariant_under_monotone_map((x, y) in series()) {
        let x2: Vec<f64> = x.iter().map(|v| v.powi(3) + 7.0).collect();
        if let (Ok(a), Ok(b)) = (spearman(&x, &y), spearman(&x2, &y)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn common_ratio_matches_oracle((x, y) in series(), k in 1u32..=100) {
        let truth: Vec<(u32, f64)> = x.iter().enumerate().map(|(i, v)| (i as u32, *v)).collect();
        let proxy: Vec<(u32, f64)> = y.iter().enumerate().map(|(i, v)| (i as u32, *v)).collect();
        let got = common_ratio(&truth, &proxy, k as f64).unwrap();
        prop_assert!((got - common::common_ratio_oracle(&truth, &proxy, k as f64)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
    }
}
