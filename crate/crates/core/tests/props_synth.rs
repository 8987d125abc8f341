//! Randomized properties of the Gaussian-process generator.

use cropcast::synth::{gram_matrix, jittered_cholesky, sample_gp, KernelSpec, SeriesStats};
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = KernelSpec> {
    (
        0.0f64..2.0,
        0.1f64..3.0,
        0.0f64..5.0,
        1.0f64..80.0,
        0.0f64..0.5,
        5.0f64..100.0,
    )
        .prop_map(|(sigma_p2, ell_p, sigma_r2, ell_r, sigma_n2, mu)| KernelSpec {
            sigma_p2,
            ell_p,
            sigma_r2,
            ell_r,
            sigma_n2,
            mu,
            period: 12.0,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gram_matrix_symmetric_with_fixed_diagonal(s in spec(), t in 1usize..80) {
        let k = gram_matrix(&s, t);
        let diag = s.sigma_p2 + s.sigma_r2 + s.sigma_n2;
        for i in 0..t {
            prop_assert_eq!(k[(i, i)], diag);
            for j in 0..i {
                prop_assert_eq!(k[(i, j)], k[(j, i)]);
            }
        }
    }

    #[test]
    fn jittered_factor_reproduces_covariance(s in spec(), t in 1usize..60) {
        let k = gram_matrix(&s, t);
        let (l, jitter) = jittered_cholesky(&k).unwrap();
        let mut expect = k.clone();
        for i in 0..t {
            expect[(i, i)] += jitter;
        }
        let scale = k.trace().max(1e-300) / t as f64;
        prop_assert!((&l * l.transpose() - expect).amax() <= 1e-9 * scale);
        prop_assert!(jitter <= 1e-4 * scale * (1.0 + 1e-9));
    }

    #[test]
    fn accepted_path_depends_only_on_spec_length_and_seed(s in spec(), t in 1usize..60, seed in any::<u64>()) {
        let a = sample_gp(&s, t, seed);
        let b = sample_gp(&s, t, seed);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.values.len(), t);
                prop_assert!(a.values.values().iter().all(|v| *v > 0.0));
                prop_assert_eq!(a, b);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn statistics_are_finite_for_positive_paths(s in spec(), seed in any::<u64>()) {
        if let Ok(path) = sample_gp(&s, 48, seed) {
            let st = SeriesStats::of(path.values.values(), 1);
            prop_assert!(st.autocorr.abs() <= 1.0 + 1e-12);
            prop_assert!(st.seasonal.is_finite() && st.seasonal >= 0.0);
            prop_assert!(st.volatility.is_finite() && st.volatility >= 0.0);
        }
    }
}
