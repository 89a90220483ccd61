//! Property tests over random states, priors and streams.

use countseq::seqtest::batch_log_odds;
use countseq::*;
use proptest::prelude::*;

fn simplex(d: usize) -> impl Strategy<Value = SimplexVector> {
    prop::collection::vec(0.05f64..1.0, d).prop_map(|w| {
        let s: f64 = w.iter().sum();
        SimplexVector::new(w.iter().map(|x| x / s).collect()).unwrap()
    })
}

fn prior() -> impl Strategy<Value = Prior> {
    prop_oneof![Just(Prior::Uniform), (0.2f64..50.0).prop_map(|k| Prior::Concentrated { k })]
}

/// A null, a prior and an arm sequence.
fn stream(max_n: usize) -> impl Strategy<Value = (SimplexVector, Prior, Vec<usize>)> {
    (2usize..=5).prop_flat_map(move |d| {
        (simplex(d), prior(), prop::collection::vec(0..d, 0..max_n))
    })
}

fn feed(theta0: &SimplexVector, prior: Prior, arms: &[usize]) -> OddsState {
    let mut s = OddsState::new(theta0.clone(), prior).unwrap();
    for &a in arms {
        s.observe(a).unwrap();
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn recursive_matches_batch((theta0, prior, arms) in stream(200)) {
        let s = feed(&theta0, prior, &arms);
        let batch = batch_log_odds(&theta0, s.alpha0(), s.counts()).unwrap();
        prop_assert!((s.log_odds() - batch).abs() <= 1e-9 * batch.abs().max(1.0));
        s.validate().unwrap();
    }

    #[test]
    fn log_odds_ignores_arrival_order((theta0, prior, arms) in stream(120), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = arms.clone();
        shuffled.shuffle(&mut countseq::sim::rng_for(seed, 0));
        let a = feed(&theta0, prior, &arms);
        let b = feed(&theta0, prior, &shuffled);
        prop_assert!((a.log_odds() - b.log_odds()).abs() <= 1e-9 * a.log_odds().abs().max(1.0));
    }

    #[test]
    fn batch_update_matches_single_steps((theta0, prior, arms) in stream(100)) {
        let one = feed(&theta0, prior, &arms);
        let mut counts = vec![0u64; theta0.dim()];
        for &a in &arms {
            counts[a] += 1;
        }
        let start = OddsState::new(theta0.clone(), prior).unwrap();
        let batched = start.update_batch(&CountVector::new(counts)).unwrap();
        prop_assert_eq!(batched.counts(), one.counts());
        prop_assert!((batched.log_odds() - one.log_odds()).abs() <= 1e-9 * one.log_odds().abs().max(1.0));
    }

    #[test]
    fn sequential_p_is_nonincreasing((theta0, prior, arms) in stream(150)) {
        let mut s = OddsState::new(theta0, prior).unwrap();
        let mut last = s.sequential_p();
        prop_assert_eq!(last, 1.0);
        for a in arms {
            s.observe(a).unwrap();
            let p = s.sequential_p();
            prop_assert!(p > 0.0 && p <= last);
            last = p;
        }
    }

    #[test]
    fn null_is_in_set_exactly_when_odds_below_threshold(
        (theta0, prior, arms) in stream(150),
        u in 0.01f64..0.5,
    ) {
        let s = feed(&theta0, prior, &arms);
        let margin = (s.log_odds() + u.ln()).abs();
        prop_assume!(margin > 1e-9);
        let inside = in_confidence_set(&theta0, &s, u).unwrap();
        prop_assert_eq!(inside, s.log_odds() < -u.ln());
    }

    #[test]
    fn marginal_intervals_are_nested_and_contain_frequencies(
        (theta0, prior, arms) in stream(150),
        u in 0.01f64..0.3,
    ) {
        prop_assume!(!arms.is_empty());
        let s = feed(&theta0, prior, &arms);
        for i in 0..s.dim() {
            let wide = marginal_ci(&s, u / 2.0, i).unwrap();
            let narrow = marginal_ci(&s, u, i).unwrap();
            let freq = s.counts().get(i) as f64 / s.n() as f64;
            prop_assert!(0.0 <= wide.lo && wide.hi <= 1.0);
            prop_assert!(wide.lo <= narrow.lo + 1e-7 && narrow.hi <= wide.hi + 1e-7);
            prop_assert!(narrow.lo <= freq + 1e-7 && freq <= narrow.hi + 1e-7);
        }
    }

    #[test]
    fn softmax_is_gauge_invariant(
        rho in simplex(4),
        delta in prop::collection::vec(-5.0f64..5.0, 4),
        shift in -20.0f64..20.0,
    ) {
        let a = softmax_rho(&rho, &delta).unwrap();
        let moved: Vec<f64> = delta.iter().map(|x| x + shift).collect();
        let b = softmax_rho(&rho, &moved).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let pinned = DeltaGauge::pin(&delta);
        prop_assert_eq!(pinned.len(), 4);
        prop_assert_eq!(pinned[3], 0.0);
        let back = DeltaGauge::embed(&pinned[..3]);
        let c = softmax_rho(&rho, &back).unwrap();
        for (x, y) in a.values().iter().zip(c.values()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn contrast_interval_contains_estimate_and_true_shift(
        rho in simplex(3),
        counts in prop::collection::vec(1u64..60, 3),
        a in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let coeffs = vec![a[0], a[1], -a[0] - a[1]];
        prop_assume!(coeffs.iter().any(|c| c.abs() > 1e-3));
        let spec = ContrastSpec::new(coeffs).unwrap();
        let theta0 = null_from_equality(&rho);
        let s = OddsState::new(theta0, Prior::Uniform).unwrap()
            .update_batch(&CountVector::new(counts)).unwrap();
        let ci = contrast_ci(&s, &rho, 0.05, &spec).unwrap();
        let mle = countseq::contrasts::contrast_mle(&s, &rho, &spec).unwrap().unwrap();
        prop_assert!(ci.lo <= mle + 1e-7 && mle <= ci.hi + 1e-7, "{ci:?} vs {mle}");
        let wider = contrast_ci(&s, &rho, 0.01, &spec).unwrap();
        prop_assert!(wider.lo <= ci.lo + 1e-7 && ci.hi <= wider.hi + 1e-7);

        let neg = ContrastSpec::new(spec.coeffs().iter().map(|c| -c).collect()).unwrap();
        let flipped = contrast_ci(&s, &rho, 0.05, &neg).unwrap();
        prop_assert!((flipped.lo + ci.hi).abs() <= 1e-7 * ci.hi.abs().max(1.0));
        prop_assert!((flipped.hi + ci.lo).abs() <= 1e-7 * ci.lo.abs().max(1.0));
    }

    #[test]
    fn composite_p_bounded_by_point_nulls_inside_hypothesis(
        rho in simplex(3),
        counts in prop::collection::vec(0u64..60, 3),
        member in prop::collection::vec(-3.0f64..0.0, 2),
    ) {
        // δ₀ ≥ δ₁ and δ₀ ≥ δ₂, so δ = (0, m₁, m₂) with m ≤ 0 is a member.
        let h = LinearHypothesis::dominates(3, 0, &[1, 2]).unwrap();
        let delta = vec![0.0, member[0], member[1]];
        prop_assert!(h.contains(&delta));
        let theta_m = softmax_rho(&rho, &delta).unwrap();
        let s = OddsState::new(null_from_equality(&rho), Prior::Uniform).unwrap()
            .update_batch(&CountVector::new(counts.clone())).unwrap();
        let p = composite_p(&s, &rho, &h).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);

        let at_member = OddsState::new(theta_m, Prior::Uniform).unwrap()
            .update_batch(&CountVector::new(counts)).unwrap();
        let inst = (-at_member.log_odds()).exp().min(1.0);
        prop_assert!(p >= inst * (1.0 - 1e-6), "composite {p} < point {inst}");
    }

    #[test]
    fn state_survives_serialization((theta0, prior, arms) in stream(80), next in 0usize..2) {
        let s = feed(&theta0, prior, &arms);
        let json = serde_json::to_string(&s).unwrap();
        let back: OddsState = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.update(next).unwrap().log_odds(), s.update(next).unwrap().log_odds());
    }

    #[test]
    fn marked_events_sort_stably(times in prop::collection::vec(0.0f64..10.0, 0..50), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let events: Vec<MarkedEvent> = times.iter().enumerate()
            .map(|(i, &t)| MarkedEvent::new(t, i % 3, 3).unwrap())
            .collect();
        let mut shuffled = events.clone();
        shuffled.shuffle(&mut countseq::sim::rng_for(seed, 1));
        let mut sorted = events.clone();
        sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
        let obs = events_to_observations(&shuffled);
        prop_assert_eq!(obs, sorted.iter().map(|e| e.arm).collect::<Vec<_>>());
    }
}

#[test]
fn kl_rate_converges_for_fixed_stream() {
    let theta0 = SimplexVector::new(vec![0.1, 0.4, 0.5]).unwrap();
    let theta = SimplexVector::new(vec![0.1, 0.3, 0.6]).unwrap();
    let kl = kl_divergence(&theta, &theta0).unwrap();
    // Exactly proportional counts make the rate deterministic.
    let s = OddsState::new(theta0, Prior::Uniform).unwrap()
        .update_batch(&CountVector::new(vec![100_000, 300_000, 600_000])).unwrap();
    let rate = s.kl_rate().unwrap();
    assert!((rate - kl).abs() < 1e-4, "{rate} vs {kl}");
}
