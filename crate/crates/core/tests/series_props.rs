mod common;

use conjlab::series::{self, CoefficientSeq, SimplexWeights};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn coeffs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 1..=max_len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn log_partition_is_convex_in_c_and_log_rho(
        c1 in coeffs(31),
        shift in prop::collection::vec(-3.0f64..3.0, 31),
        lr1 in (0.05f64).ln()..(0.95f64).ln(),
        lr2 in (0.05f64).ln()..(0.95f64).ln(),
    ) {
        let n = c1.len() - 1;
        let c2: Vec<f64> = c1.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let mid: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| 0.5 * (a + b)).collect();
        let f = |c: &[f64], lr: f64| {
            series::log_partition_at_exponent(&CoefficientSeq::new(c.to_vec()).unwrap(), lr, n).unwrap()
        };
        let excess = f(&mid, 0.5 * (lr1 + lr2)) - 0.5 * (f(&c1, lr1) + f(&c2, lr2));
        prop_assert!(excess <= 1e-12, "midpoint excess {excess}");
    }

    #[test]
    fn gibbs_mean_matches_derivative_oracle(c in coeffs(41), rho in 0.01f64..0.99) {
        let n = c.len() - 1;
        let seq = CoefficientSeq::new(c.clone()).unwrap();
        let t = series::gibbs_maximizer(&seq, rho, n).unwrap();
        let oracle = common::mean_via_derivative(&c, rho);
        prop_assert!((series::mean_index(&t) - oracle).abs() <= 1e-10, "{} vs {oracle}", series::mean_index(&t));
    }

    #[test]
    fn log_partition_matches_direct_sum(c in coeffs(20), rho in 0.05f64..0.95) {
        let n = c.len() - 1;
        let lp = series::log_partition(&CoefficientSeq::new(c.clone()).unwrap(), rho, n).unwrap();
        prop_assert!((lp - common::naive_log_partition(&c, rho)).abs() <= 1e-12);
    }

    #[test]
    fn gibbs_weights_attain_and_dominate(c in coeffs(30), rho in 0.05f64..0.95, seed in any::<u64>()) {
        let n = c.len() - 1;
        let seq = CoefficientSeq::new(c).unwrap();
        let lp = series::log_partition(&seq, rho, n).unwrap();
        let t = series::gibbs_maximizer(&seq, rho, n).unwrap();
        let at_max = series::variational_objective(&seq, rho.ln(), &t).unwrap();
        prop_assert!((at_max - lp).abs() <= 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let r = SimplexWeights::new(common::dirichlet(&mut rng, n + 1)).unwrap();
            prop_assert!(series::variational_objective(&seq, rho.ln(), &r).unwrap() <= lp + 1e-12);
        }
    }

    #[test]
    fn log_partition_is_monotone_in_each_coefficient(c in coeffs(15), k in 0usize..15, drop in 0.0f64..2.0, rho in 0.05f64..0.95) {
        let n = c.len() - 1;
        let k = k.min(n);
        let mut lower = c.clone();
        lower[k] -= drop;
        let a = series::log_partition(&CoefficientSeq::new(c).unwrap(), rho, n).unwrap();
        let b = series::log_partition(&CoefficientSeq::new(lower).unwrap(), rho, n).unwrap();
        prop_assert!(b <= a);
    }

    #[test]
    fn suggested_truncation_meets_tail_target(sup in -2.0f64..2.0, rho in 0.05f64..0.95) {
        let c = CoefficientSeq::new(vec![sup]).unwrap();
        let n = series::suggest_truncation(&c, rho, 1e-12).unwrap();
        prop_assert!(series::tail_bound(&c, rho, n).unwrap() <= 1e-12 * (1.0 + 1e-9));
        if n > 0 {
            prop_assert!(series::tail_bound(&c, rho, n - 1).unwrap() > 1e-12);
        }
    }
}

#[test]
fn truncation_errors() {
    let c = CoefficientSeq::zeros(3);
    assert!(matches!(
        series::log_partition(&c, 0.5, 5),
        Err(series::SeriesError::TruncationMismatch {
            requested: 5,
            available: 2
        })
    ));
    assert!(matches!(
        series::log_partition(&c, 0.0, 2),
        Err(series::SeriesError::NonPositiveRho(_))
    ));
    assert!(series::suggest_truncation(&c, 1.0, 1e-12).is_err());
}
