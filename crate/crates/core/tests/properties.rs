use decompound::likelihood::log_likelihood;
use decompound::metrics::{self, Method, MetricsConfig};
use decompound::prior::{LambdaFamily, LambdaPrior};
use decompound::{CppModel, DensityConfig, IncrementSample, NormalMixture};
use proptest::prelude::*;

fn mixture_1d() -> impl Strategy<Value = NormalMixture> {
    prop::collection::vec((0.05f64..1.0, -3.0f64..3.0, 0.2f64..2.0), 1..4).prop_map(|c| {
        let total: f64 = c.iter().map(|t| t.0).sum();
        NormalMixture::new(
            1,
            c.iter().map(|t| t.0 / total).collect(),
            c.iter().map(|t| vec![t.1]).collect(),
            c.iter().map(|t| vec![t.2]).collect(),
            false,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convolution_adds_means_and_covariances(a in mixture_1d(), b in mixture_1d()) {
        let c = a.convolve(&b).unwrap();
        prop_assert!((c.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(c.len() <= a.len() * b.len());
        prop_assert!((c.mean()[0] - a.mean()[0] - b.mean()[0]).abs() < 1e-10);
        let var = |m: &NormalMixture| m.total_covariance()[0];
        prop_assert!((var(&c) - var(&a) - var(&b)).abs() < 1e-9);
    }

    #[test]
    fn scalar_divergence_ordering(x in 0.01f64..10.0, y in 0.01f64..10.0) {
        let k = metrics::scalar_k(x, y).unwrap();
        let h = metrics::scalar_h(x, y).unwrap();
        prop_assert!(k >= 0.0);
        prop_assert!(h * h <= k + 1e-12);
    }

    #[test]
    fn scalar_kl_is_dominated_by_the_constant(
        lo in 0.1f64..1.0,
        span in 0.0f64..4.0,
        s in 0.0f64..1.0,
        t in 0.0f64..1.0,
    ) {
        let hi = lo + span;
        let (l0, l1) = (lo + s * span, lo + t * span);
        let c = metrics::lemma_constant(lo, hi);
        let d2 = (l0 - l1).powi(2);
        prop_assert!(metrics::scalar_k(l0, l1).unwrap() <= c * d2 * (1.0 + 1e-9) + 1e-15);
        prop_assert!(metrics::scalar_h(l0, l1).unwrap() <= c * (l0 - l1).abs() * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn likelihood_is_permutation_invariant(
        zs in prop::collection::vec(prop_oneof![Just(0.0f64), -5.0f64..5.0], 1..30),
        seed in any::<u64>(),
    ) {
        let sample = IncrementSample::new(1, 1.0, zs.iter().map(|z| vec![*z]).collect()).unwrap();
        let mut order: Vec<usize> = (0..zs.len()).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let model = CppModel::new(1.3, NormalMixture::univariate(0.4, 1.2).unwrap()).unwrap();
        let cfg = DensityConfig::default();
        let a = log_likelihood(&sample, &model, &cfg).unwrap();
        let b = log_likelihood(&sample.permuted(&order), &model, &cfg).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn csv_round_trip_is_exact(zs in prop::collection::vec(prop::array::uniform2(-1e6f64..1e6), 0..20)) {
        let sample = IncrementSample::new(2, 0.5, zs.iter().map(|z| z.to_vec()).collect()).unwrap();
        let mut buf = Vec::new();
        sample.write_csv(&mut buf).unwrap();
        let back = IncrementSample::read_csv(buf.as_slice(), 0.5, 2).unwrap();
        prop_assert_eq!(back.values(), sample.values());
    }

    #[test]
    fn mixture_json_round_trip(m in mixture_1d()) {
        let text = serde_json::to_string(&m).unwrap();
        let back: NormalMixture = serde_json::from_str(&text).unwrap();
        for x in [-2.0, 0.0, 1.7] {
            prop_assert_eq!(m.density(&[x]).unwrap(), back.density(&[x]).unwrap());
        }
    }

    #[test]
    fn linear_prior_quantile_inverts_cdf(
        left in 0.0f64..3.0,
        right in 0.01f64..3.0,
        p in 0.0f64..1.0,
    ) {
        let prior = LambdaPrior::new(0.2, 3.0, LambdaFamily::Linear { left, right }).unwrap();
        let x = prior.quantile(p);
        prop_assert!((0.2..=3.0).contains(&x));
        prop_assert!((prior.cdf(x) - p).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kl_inequality_holds_for_random_pairs(
        mu in -2.0f64..2.0,
        var in 0.3f64..3.0,
        l0 in 0.5f64..2.0,
        l1 in 0.5f64..2.0,
    ) {
        let m0 = CppModel::new(l0, NormalMixture::univariate(0.0, 1.0).unwrap()).unwrap();
        let m1 = CppModel::new(l1, NormalMixture::univariate(mu, var).unwrap()).unwrap();
        let rep = metrics::check_lemma1(&m0, &m1, (0.5, 2.0), Method::Quadrature, &MetricsConfig::default()).unwrap();
        prop_assert!(rep.all_pass(), "{:?}", rep.records);
    }
}
