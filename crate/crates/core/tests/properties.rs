//! Structural invariants checked over randomized inputs.
//!
//! These are the algebraic facts the estimators silently rely on: gauges are
//! norms, support functions are their duals, samplers stay inside their body,
//! cached norms match their definitions, and the textual grammars round-trip.

use multinorm::bounds::TermCount;
use multinorm::norms::q_n_cube;
use multinorm::sampling::{BodySampler, Pattern, WeightVector};
use multinorm::stats::quantile_with_ci;
use multinorm::{BodySpec, Estimate, RngStream};
use proptest::prelude::*;

/// Dimension-four bodies covering round, spiky, flat, intermediate, rotated
/// and non-normalized cases.
const BODY_DESCRIPTORS: [&str; 6] = [
    "lp:2:4:vol1",
    "lp:inf:4:vol1",
    "lp:1:4:vol1",
    "lp:4:4:vol1",
    "lp:1.5:4",
    "lp:2:4:rot=3",
];

fn bodies() -> Vec<BodySpec> {
    BODY_DESCRIPTORS
        .iter()
        .map(|d| BodySpec::parse(d).unwrap())
        .collect()
}

fn vec4() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 4)
}

proptest! {
    #[test]
    fn gauge_is_positively_homogeneous_and_symmetric(x in vec4(), lambda in -50.0f64..50.0) {
        for body in bodies() {
            let g = body.gauge(&x);
            let scaled: Vec<f64> = x.iter().map(|v| v * lambda).collect();
            let gs = body.gauge(&scaled);
            prop_assert!((gs - lambda.abs() * g).abs() <= 1e-9 * (1.0 + gs.abs()),
                "{}: gauge({lambda} x) = {gs}, |lambda| gauge(x) = {}", body.descriptor(), lambda.abs() * g);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((body.gauge(&neg) - g).abs() <= 1e-12 * (1.0 + g));
        }
    }

    #[test]
    fn gauge_satisfies_the_triangle_inequality(x in vec4(), y in vec4()) {
        for body in bodies() {
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let lhs = body.gauge(&sum);
            let rhs = body.gauge(&x) + body.gauge(&y);
            prop_assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12,
                "{}: gauge(x+y) = {lhs} > {rhs}", body.descriptor());
        }
    }

    #[test]
    fn support_is_the_dual_of_the_gauge(x in vec4(), y in vec4()) {
        // <x, y> <= gauge(x) support(y), with equality achievable; the
        // special case y = x gives gauge(x) support(x) >= |x|^2.
        for body in bodies() {
            let inner: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let bound = body.gauge(&x) * body.support(&y);
            prop_assert!(inner <= bound * (1.0 + 1e-9) + 1e-9,
                "{}: <x,y> = {inner} > {bound}", body.descriptor());
            let norm_sq: f64 = x.iter().map(|v| v * v).sum();
            let self_bound = body.gauge(&x) * body.support(&x);
            prop_assert!(norm_sq <= self_bound * (1.0 + 1e-9) + 1e-9);
        }
    }

    #[test]
    fn normalization_fixes_the_volume_and_keeps_the_shape(p in prop::sample::select(vec![1.0, 1.5, 2.0, 4.0]), n in 1usize..12) {
        let body = BodySpec::parse(&format!("lp:{p}:{n}")).unwrap();
        let normalized = body.clone().normalized();
        prop_assert!(normalized.log_volume().abs() < 1e-10);
        // normalization is scaling: gauges differ by the scale ratio only
        let x: Vec<f64> = (0..n).map(|i| 0.3 + 0.1 * i as f64).collect();
        let ratio = body.gauge(&x) / normalized.gauge(&x);
        let expected = normalized.scale() / body.scale();
        prop_assert!((ratio - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn scaling_scales_the_volume_by_lambda_to_the_n(lambda in 0.2f64..5.0, n in 1usize..10) {
        let body = BodySpec::parse(&format!("lp:2:{n}")).unwrap();
        let scaled = body.clone().scaled(lambda).unwrap();
        let expected = body.log_volume() + n as f64 * lambda.ln();
        prop_assert!((scaled.log_volume() - expected).abs() < 1e-10);
    }

    #[test]
    fn closed_form_cube_norm_is_a_norm_equivalent(entries in prop::collection::vec(-10.0f64..10.0, 1..32), n in 2usize..64, lambda in 0.1f64..10.0) {
        prop_assume!(entries.iter().any(|v| v.abs() > 1e-6));
        let t = WeightVector::new(entries.clone()).unwrap();
        let q = q_n_cube(&t, n);
        let u = (n as f64).ln().round().max(1.0) as usize;
        // bounded between the sup norm and 2 sqrt(u) |t|_2
        prop_assert!(q >= t.linf() - 1e-12);
        prop_assert!(q <= 2.0 * (u as f64).sqrt() * t.l2() + 1e-12);
        // positively homogeneous
        let scaled = WeightVector::new(entries.iter().map(|v| v * lambda).collect()).unwrap();
        prop_assert!((q_n_cube(&scaled, n) - lambda * q).abs() < 1e-9 * (1.0 + q));
        // permutation invariant (reverse is enough to catch order bugs)
        let reversed = WeightVector::new(entries.iter().rev().copied().collect()).unwrap();
        prop_assert!((q_n_cube(&reversed, n) - q).abs() < 1e-12 * (1.0 + q));
    }

    #[test]
    fn quantiles_are_monotone_with_valid_intervals(mut values in prop::collection::vec(-1e3f64..1e3, 60..300), a in 0.05f64..0.95, b in 0.05f64..0.95) {
        values.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let (lo_level, hi_level) = if a <= b { (a, b) } else { (b, a) };
        let (q_lo, ci_lo) = quantile_with_ci(&values, lo_level);
        let (q_hi, ci_hi) = quantile_with_ci(&values, hi_level);
        prop_assert!(q_lo <= q_hi + 1e-12);
        prop_assert!(ci_lo.0 <= q_lo && q_lo <= ci_lo.1);
        prop_assert!(ci_hi.0 <= q_hi && q_hi <= ci_hi.1);
    }

    #[test]
    fn weight_vectors_cache_their_norms_faithfully(entries in prop::collection::vec(-50.0f64..50.0, 1..64)) {
        prop_assume!(entries.iter().any(|v| *v != 0.0));
        let t = WeightVector::new(entries.clone()).unwrap();
        let l2: f64 = entries.iter().map(|v| v * v).sum::<f64>().sqrt();
        let linf = entries.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!((t.l2() - l2).abs() < 1e-12 * (1.0 + l2));
        prop_assert!((t.linf() - linf).abs() == 0.0);
        // decreasing rearrangement: sorted and a permutation of |entries|
        let rearranged = t.decreasing_abs();
        prop_assert!(rearranged.windows(2).all(|w| w[0] >= w[1]));
        let mut expect: Vec<f64> = entries.iter().map(|v| v.abs()).collect();
        expect.sort_by(|x, y| y.partial_cmp(x).unwrap());
        prop_assert_eq!(rearranged, &expect[..]);
    }

    #[test]
    fn named_patterns_have_unit_norm(s in 1usize..64, pattern_idx in 0usize..5) {
        let pattern = Pattern::ALL[pattern_idx];
        let t = WeightVector::from_pattern(pattern, s, RngStream::new(11).child(s as u64)).unwrap();
        prop_assert_eq!(t.len(), s);
        prop_assert!((t.l2() - 1.0).abs() < 1e-9, "{}: |t|_2 = {}", pattern.name(), t.l2());
    }

    #[test]
    fn estimates_scale_linearly(value in 0.1f64..1e3, stderr in 0.0f64..10.0, factor in 0.1f64..100.0) {
        let e = Estimate::new(value, stderr, 1000);
        let s = e.scaled(factor);
        prop_assert!((s.value - factor * value).abs() < 1e-9 * s.value.abs());
        prop_assert!((s.stderr - factor * stderr).abs() < 1e-9 * (1.0 + s.stderr));
        prop_assert!(s.ci95.0 <= s.value && s.value <= s.ci95.1);
    }

    #[test]
    fn descriptor_grammar_round_trips(p_idx in 0usize..5, n in 1usize..33, vol1 in any::<bool>(), rot in prop::option::of(0u64..1000)) {
        let p = ["1", "1.5", "2", "4", "inf"][p_idx];
        let mut desc = format!("lp:{p}:{n}");
        if vol1 {
            desc.push_str(":vol1");
        }
        if let Some(seed) = rot {
            desc.push_str(&format!(":rot={seed}"));
        }
        let body = BodySpec::parse(&desc).unwrap();
        let canonical = body.descriptor();
        let reparsed = BodySpec::parse(&canonical).unwrap();
        prop_assert_eq!(reparsed.descriptor(), canonical);
        prop_assert_eq!(reparsed.dim(), n);
    }

    #[test]
    fn term_count_grammar_round_trips(s in 1usize..1000) {
        let fixed = TermCount::parse(&s.to_string()).unwrap();
        prop_assert_eq!(TermCount::parse(&fixed.to_string()).unwrap(), fixed);
        prop_assert_eq!(fixed.resolve(7), s);
        prop_assert_eq!(TermCount::MatchDim.resolve(s), s);
    }
}

#[test]
fn samples_stay_inside_their_body() {
    for body in bodies() {
        let mut sampler = BodySampler::new(&body);
        let mut rng = RngStream::new(23).child_from_key(&body.descriptor()).rng();
        let mut x = vec![0.0; body.dim()];
        let mut max_gauge = 0.0f64;
        for _ in 0..5000 {
            sampler.sample_into(&mut rng, &mut x);
            max_gauge = max_gauge.max(body.gauge(&x));
        }
        assert!(
            max_gauge <= 1.0 + 1e-9,
            "{}: sample escaped, gauge {max_gauge}",
            body.descriptor()
        );
        // and they are not degenerate: the max should approach the boundary
        assert!(max_gauge > 0.5, "{}: samples collapsed", body.descriptor());
    }
}
