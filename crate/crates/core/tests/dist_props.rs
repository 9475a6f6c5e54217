use proptest::prelude::*;
use queuecap::dist::{convolve, max_entropy_mean_bound, ClipSubtractChannel, Pmf, ServiceModel, ServiceSpec};

fn pmf(max_len: usize) -> impl Strategy<Value = Pmf<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..=max_len).prop_filter_map("all-zero weights", |w| {
        let z: f64 = w.iter().sum();
        (z > 1e-3).then(|| Pmf::new(w.iter().map(|v| v / z).collect()).unwrap())
    })
}

fn close(a: &Pmf<f64>, b: &Pmf<f64>, tol: f64) -> bool {
    a.total_variation(b) <= tol
}

proptest! {
    #[test]
    fn convolution_is_commutative(a in pmf(8), b in pmf(8)) {
        prop_assert!(close(&convolve(&a, &b), &convolve(&b, &a), 1e-15));
    }

    #[test]
    fn convolution_is_associative(a in pmf(6), b in pmf(6), c in pmf(6)) {
        prop_assert!(close(&a.convolve(&b).convolve(&c), &a.convolve(&b.convolve(&c)), 1e-14));
    }

    #[test]
    fn convolution_adds_means(a in pmf(10), b in pmf(10)) {
        let m = a.convolve(&b).mean_value();
        prop_assert!((m - a.mean_value() - b.mean_value()).abs() < 1e-12);
    }

    #[test]
    fn convolution_does_not_lower_entropy(a in pmf(10), b in pmf(10)) {
        let h = a.convolve(&b).entropy();
        prop_assert!(h >= a.entropy().max(b.entropy()) - 1e-12);
    }

    #[test]
    fn entropy_within_mean_bound(a in pmf(16)) {
        prop_assert!(a.entropy() <= max_entropy_mean_bound(a.mean_value()) + 1e-12);
    }

    #[test]
    fn threshold_zero_is_identity(a in pmf(10)) {
        prop_assert!(close(&a.threshold_transform(0), &a, 0.0));
    }

    #[test]
    fn threshold_mean_nonincreasing(a in pmf(10), tau in 0usize..12) {
        let lo = a.threshold_transform(tau + 1).mean_value();
        let hi = a.threshold_transform(tau).mean_value();
        prop_assert!(lo <= hi + 1e-15);
        // shifting down by τ and clipping at zero
        let want: f64 = a.probs().iter().enumerate().map(|(k, p)| p * k.saturating_sub(tau) as f64).sum();
        prop_assert!((hi - want).abs() < 1e-12);
    }

    #[test]
    fn clip_subtract_matches_matrix(x in pmf(8), t in pmf(5)) {
        let n = x.len() - 1;
        let ch = ClipSubtractChannel::new(&t, n);
        for j in 0..=n {
            let col: f64 = (0..=n).map(|i| ch.entry(i, j)).sum();
            prop_assert!((col - 1.0).abs() < 1e-12);
        }
        let direct = x.clip_subtract(&t);
        let via = ch.apply(x.probs());
        for (i, v) in via.iter().enumerate() {
            prop_assert!((direct.get(i) - v).abs() < 1e-15);
        }
    }

    #[test]
    fn clip_subtract_mean(x in pmf(8), t in pmf(5)) {
        // E[(X - T)+] by brute force over the product law
        let mut want = 0.0;
        for (i, px) in x.probs().iter().enumerate() {
            for (k, pt) in t.probs().iter().enumerate() {
                want += px * pt * i.saturating_sub(k) as f64;
            }
        }
        prop_assert!((x.clip_subtract(&t).mean_value() - want).abs() < 1e-12);
    }

    #[test]
    fn pmf_json_roundtrip(a in pmf(12)) {
        let s = serde_json::to_string(&a).unwrap();
        let b: Pmf<f64> = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn builtin_services_are_normalized() {
    for name in ["uniform12", "uniform0123", "geom", "geom-trunc20", "geom-trunc80"] {
        let spec = ServiceSpec::builtin(name).unwrap();
        let s: ServiceModel<f64> = spec.build().unwrap();
        let total: f64 = s.pmf.probs().iter().sum::<f64>() + s.pmf.tail_mass();
        assert!((total - 1.0).abs() < 1e-12, "{name}: {total}");
        assert!((s.rate_mu * s.mean - 1.0).abs() < 1e-12);
    }
}

#[test]
fn service_file_format() {
    let text = r#"{"version": 1, "family": "custom", "probs": [0.0, 0.25, 0.75]}"#;
    let spec: ServiceSpec = serde_json::from_str(text).unwrap();
    let s: ServiceModel<f64> = spec.build().unwrap();
    assert_eq!(s.ess_sup(), 2);
    assert!((s.mean - 1.75).abs() < 1e-15);
    let bad = r#"{"version": 1, "family": "custom", "probs": [0.5], "extra": 1}"#;
    assert!(serde_json::from_str::<ServiceSpec>(bad).is_err());
}

#[test]
fn single_precision_pmf_ops() {
    let a = Pmf::<f32>::new(vec![0.5, 0.5]).unwrap();
    let b = a.convolve(&a);
    assert!((b.entropy() - 1.5 * std::f32::consts::LN_2).abs() < 1e-6);
    assert!((b.mean_value() - 1.0).abs() < 1e-6);
}
