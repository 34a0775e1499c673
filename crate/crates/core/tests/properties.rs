//! Property tests for the decision procedures and the diagonal formulas.

use nucemb::classifier::{classify, ClassificationDoc, EmbeddingQuery, Mode, Setting};
use nucemb::exponents::{frac, ExtRat, Kind, Rat, SpaceParams};
use nucemb::nucdiag::{decomposition_upper_bound, tong_nuclear_norm, trace_dual_lower_bound, DiagonalSpec};
use nucemb::seqmodel::lr_norm;
use nucemb::weights::WeightSpec;
use proptest::prelude::*;

fn r12(k: i64) -> Rat {
    frac(k, 12)
}

fn exp_from(k: i64) -> ExtRat {
    ExtRat::from_recip(r12(k))
}

prop_compose! {
    /// A weighted query with `p, q ≥ 1`, `p₁ < ∞` and a power weight.
    fn weighted_query()(
        d in 1u32..=3,
        s1 in -12i64..48, s2 in -24i64..24,
        ip1 in 1i64..=12, ip2 in 0i64..=12, iq1 in 0i64..=12, iq2 in 0i64..=12,
        a in -5i64..18, b in -5i64..18,
    ) -> EmbeddingQuery {
        let sp = |s: i64, ip: i64, iq: i64| SpaceParams::new(Kind::B, frac(s, 6), exp_from(ip), exp_from(iq), d).unwrap();
        let w = WeightSpec::PolyPoly { alpha: frac(a * d as i64, 6), beta: frac(b * d as i64, 6) };
        EmbeddingQuery::new(sp(s1, ip1, iq1), sp(s2, ip2, iq2), Setting::WeightedRn(w)).unwrap()
    }
}

fn rs() -> impl Strategy<Value = ExtRat> {
    prop_oneof![Just("1"), Just("4/3"), Just("3/2"), Just("2"), Just("3"), Just("5"), Just("inf")]
        .prop_map(|s| s.parse().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn nuclear_implies_compact(q in weighted_query()) {
        if classify(&q, Mode::Nuclear).verdict.is_yes() {
            prop_assert!(classify(&q, Mode::Compact).verdict.is_yes());
        }
    }

    #[test]
    fn verdict_is_its_trace_reevaluated(q in weighted_query(), nuclear in any::<bool>()) {
        let c = classify(&q, if nuclear { Mode::Nuclear } else { Mode::Compact });
        prop_assert_eq!(&c.trace.reevaluate(), &c.verdict);
        let doc = ClassificationDoc::from(&c);
        let back: ClassificationDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        prop_assert_eq!(back.reevaluate(), c.verdict);
    }

    #[test]
    fn more_smoothness_never_hurts(q in weighted_query(), extra in 1i64..24) {
        let mut smoother = q.clone();
        smoother.src.s += frac(extra, 6);
        for mode in [Mode::Compact, Mode::Nuclear] {
            if classify(&q, mode).verdict.is_yes() {
                prop_assert!(classify(&smoother, mode).verdict.is_yes());
            }
        }
    }

    #[test]
    fn fine_indices_do_not_matter(q in weighted_query(), iq1 in 0i64..=12, iq2 in 0i64..=12) {
        let mut other = q.clone();
        other.src.q = exp_from(iq1);
        other.tgt.q = exp_from(iq2);
        for mode in [Mode::Compact, Mode::Nuclear] {
            prop_assert_eq!(classify(&q, mode).verdict, classify(&other, mode).verdict);
        }
    }

    #[test]
    fn domain_nuclear_implies_compact(d in 1u32..=4, ds in -24i64..60, ip1 in 0i64..=12, ip2 in 0i64..=12) {
        let sp = |s: Rat, ip: i64| SpaceParams::new(Kind::F, s, exp_from(ip.max(1)), exp_from(6), d).unwrap();
        let q = EmbeddingQuery::new(sp(frac(ds, 12), ip1), sp(frac(0, 1), ip2), Setting::BoundedDomain).unwrap();
        if classify(&q, Mode::Nuclear).verdict.is_yes() {
            prop_assert!(classify(&q, Mode::Compact).verdict.is_yes());
        }
    }

    #[test]
    fn dual_witness_attains_formula(tau in prop::collection::vec(0.0f64..4.0, 1..8), r1 in rs(), r2 in rs()) {
        let spec = DiagonalSpec::finite(tau, r1, r2).unwrap();
        let f = tong_nuclear_norm(&spec).unwrap().value().unwrap();
        let dual = trace_dual_lower_bound(&spec).unwrap().value;
        prop_assert!((dual - f).abs() <= 1e-12 * f.max(1e-300));
    }

    #[test]
    fn decompositions_cost_at_least_formula(tau in prop::collection::vec(0.0f64..4.0, 1..10), r1 in rs(), r2 in rs()) {
        let spec = DiagonalSpec::finite(tau, r1, r2).unwrap();
        let f = tong_nuclear_norm(&spec).unwrap().value().unwrap();
        prop_assert!(decomposition_upper_bound(&spec).unwrap().cost >= f * (1.0 - 1e-12));
    }

    #[test]
    fn formula_is_homogeneous_and_symmetric(
        tau in prop::collection::vec(0.0f64..4.0, 1..8), c in 0.01f64..100.0, r1 in rs(), r2 in rs(),
    ) {
        let nu = |t: Vec<f64>| {
            tong_nuclear_norm(&DiagonalSpec::finite(t, r1.clone(), r2.clone()).unwrap()).unwrap().value().unwrap()
        };
        let base = nu(tau.clone());
        let scaled = nu(tau.iter().map(|x| c * x).collect());
        prop_assert!((scaled - c * base).abs() <= 1e-12 * scaled.max(1e-300));
        let mut rev = tau.clone();
        rev.reverse();
        prop_assert!((nu(rev) - base).abs() <= 1e-12 * base.max(1e-300));
    }

    #[test]
    fn lr_norms_decrease_in_r(v in prop::collection::vec(0.0f64..10.0, 1..12), a in 1i64..=12, b in 1i64..=12) {
        let (lo, hi) = (a.min(b), a.max(b));
        // 1/r = hi/12 ≥ lo/12, so the first exponent is the smaller one.
        let small = lr_norm(v.iter().copied(), &exp_from(hi));
        let large = lr_norm(v.iter().copied(), &exp_from(lo));
        prop_assert!(large <= small * (1.0 + 1e-12));
    }

    #[test]
    fn extended_rationals_round_trip(n in -1000i64..1000, den in 1i64..500, inf in any::<bool>()) {
        let x = if inf { ExtRat::Inf } else { ExtRat::Finite(frac(n, den)) };
        prop_assert_eq!(x.to_string().parse::<ExtRat>().unwrap(), x);
    }
}
