//! Property checks on the observation maps and their likelihoods.

use glfm::data::{AttributeType, Value};
use glfm::transforms::{categorical_probs, count_boundary, forward_categorical, TransformSpec};
use proptest::prelude::*;

fn ordinal() -> impl Strategy<Value = TransformSpec> {
    prop::collection::vec(0.05f64..3.0, 1..6).prop_map(|gaps| {
        let mut t = vec![0.0];
        for g in gaps {
            t.push(t.last().unwrap() + g);
        }
        TransformSpec::Ordinal { thresholds: t }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn continuous_maps_round_trip(y in -8.0f64..8.0, mu in -50.0f64..50.0, w in 0.01f64..20.0) {
        let real = TransformSpec::Real { mu, w };
        let x = real.forward(y).unwrap().as_f64();
        prop_assert!((real.inverse_point(x).unwrap() - y).abs() <= 1e-9 * (1.0 + mu.abs() / w));

        let pos = TransformSpec::PositiveReal { w };
        let x = pos.forward(y).unwrap().as_f64();
        prop_assert!(x > 0.0);
        prop_assert!((pos.inverse_point(x).unwrap() - y).abs() < 1e-6);
    }

    #[test]
    fn counts_land_in_their_own_interval(y in -6.0f64..12.0, w in 0.01f64..5.0) {
        let t = TransformSpec::Count { w };
        let x = t.forward(y).unwrap();
        let Value::Count(v) = x else { unreachable!() };
        let iv = t.inverse_interval(x).unwrap();
        // [lower, upper), loosened by rounding at the boundary
        let slack = 1e-9 * (1.0 + y.abs());
        prop_assert!(iv.lower <= y + slack && y < iv.upper + slack, "{y} not in {iv:?}");
        prop_assert_eq!(iv.lower, count_boundary(w, v));
    }

    #[test]
    fn ordinal_levels_land_in_their_own_interval(t in ordinal(), y in -5.0f64..20.0) {
        let x = t.forward(y).unwrap();
        let iv = t.inverse_interval(x).unwrap();
        prop_assert!(iv.lower < y && y <= iv.upper);
    }

    #[test]
    fn discrete_likelihoods_normalize(m in -4.0f64..6.0, s in 0.2f64..4.0, w in 0.05f64..2.0, t in ordinal()) {
        let count = TransformSpec::Count { w };
        let top = count.count_support_max(m, s);
        let total: f64 = (0..=top)
            .map(|v| count.observation_logdensity(Value::Count(v), &[m], s).unwrap().exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "count mass {total}");

        let levels = t.levels().unwrap();
        let total: f64 = (1..=levels)
            .map(|r| t.observation_logdensity(Value::Category(r), &[m], s).unwrap().exp())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "ordinal mass {total}");
    }

    #[test]
    fn categorical_probabilities_sum_to_one_and_follow_their_channel(
        means in prop::collection::vec(-3.0f64..3.0, 2..6),
        s in 0.3f64..3.0,
        shift in 1usize..6,
    ) {
        let p = categorical_probs(&means, s);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6, "{p:?}");
        prop_assert!(p.iter().all(|&q| (0.0..=1.0).contains(&q)));

        let r = means.len();
        let rotated: Vec<f64> = (0..r).map(|i| means[(i + shift) % r]).collect();
        let q = categorical_probs(&rotated, s);
        for i in 0..r {
            prop_assert!((q[i] - p[(i + shift) % r]).abs() < 1e-9);
        }
        // the channel with the largest mean is the most probable category
        let top = forward_categorical(&means) - 1;
        prop_assert!(p.iter().all(|&x| x <= p[top] + 1e-12));
    }

    #[test]
    fn logdensity_is_never_nan(
        m in -40.0f64..40.0,
        s in 0.01f64..50.0,
        x in 0.0f64..1e4,
        v in 0u64..10_000,
        w in 0.001f64..10.0,
    ) {
        let cases = [
            (TransformSpec::Real { mu: 1.0, w }, Value::Real(x - 5.0)),
            (TransformSpec::PositiveReal { w }, Value::Real(x)),
            (TransformSpec::Count { w }, Value::Count(v)),
            (TransformSpec::Ordinal { thresholds: vec![0.0, 2.0] }, Value::Category(1 + (v % 3) as usize)),
        ];
        for (t, value) in cases {
            let l = t.observation_logdensity(value, &[m], s).unwrap();
            prop_assert!(!l.is_nan(), "{t:?} {value:?}");
            prop_assert!(l < f64::INFINITY);
        }
        let cat = TransformSpec::Categorical { r: 3 };
        let l = cat.observation_logdensity(Value::Category(1 + (v % 3) as usize), &[m, -m, 0.0], s).unwrap();
        prop_assert!(!l.is_nan());
    }

    #[test]
    fn fitted_real_transform_standardizes_the_column(xs in prop::collection::vec(-1e3f64..1e3, 2..40)) {
        let column: Vec<Option<Value>> = xs.iter().map(|&x| Some(Value::Real(x))).collect();
        let TransformSpec::Real { mu, w } = TransformSpec::fit(&column, &AttributeType::Real).unwrap() else {
            unreachable!()
        };
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assert!((mu - mean).abs() < 1e-9);
        if sd > 0.0 {
            prop_assert!((w - sd).abs() < 1e-9 * (1.0 + sd));
        } else {
            prop_assert_eq!(w, 1.0);
        }
    }

    #[test]
    fn fitted_positive_scale_maps_the_maximum_to_two(xs in prop::collection::vec(0.01f64..1e4, 1..40)) {
        let column: Vec<Option<Value>> = xs.iter().map(|&x| Some(Value::Real(x))).collect();
        let TransformSpec::PositiveReal { w } = TransformSpec::fit(&column, &AttributeType::PositiveReal).unwrap() else {
            unreachable!()
        };
        let max = xs.iter().copied().fold(0.0, f64::max);
        prop_assert!((w * max - 2.0).abs() < 1e-12);
    }
}
