mod common;

use common::{check_claim, Claim, Config, AGG_CLAIMS, IND_CLAIMS};
use moment_eq::empirics::{l1_distance, moment_distance};
use moment_eq::{
    Belief, BiddingFunction, EmpiricalDistribution, Family, Orientation,
};
use proptest::prelude::*;

fn family() -> impl Strategy<Value = Family> {
    prop_oneof![Just(Family::Aggregate), Just(Family::Individual)]
}

fn orientation() -> impl Strategy<Value = Orientation> {
    prop_oneof![Just(Orientation::BuyerAuction), Just(Orientation::Procurement)]
}

prop_compose! {
    fn belief()(
        family in family(),
        orientation in orientation(),
        low in -2.0..2.0f64,
        width in 0.1..3.0f64,
        share in 0.05..0.95f64,
        bidders in 2usize..8,
    ) -> Belief {
        Belief::new(family, low, low + share * width, low + width, bidders, orientation).unwrap()
    }
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, 1..30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn bids_are_monotone_and_individually_rational(b in belief(), s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let f = BiddingFunction::new(b);
        let w = b.high() - b.low();
        let (x, y) = match b.orientation() {
            Orientation::BuyerAuction => (b.low() + 1.5 * w * s.min(t), b.low() + 1.5 * w * s.max(t)),
            Orientation::Procurement => (b.high() - 1.5 * w * s.max(t), b.high() - 1.5 * w * s.min(t)),
        };
        let (bx, by) = (f.bid(x).unwrap(), f.bid(y).unwrap());
        prop_assert!(bx <= by + 1e-12 * w.max(1.0));
        prop_assert!(bx >= b.low() - 1e-12 && by <= b.high() + 1e-12);
        match b.orientation() {
            Orientation::BuyerAuction => prop_assert!(bx <= x + 1e-12),
            Orientation::Procurement => prop_assert!(bx >= x - 1e-12),
        }
    }

    #[test]
    fn inverse_round_trips(b in belief(), s in 0.01..0.99f64) {
        let f = BiddingFunction::new(b);
        let bid = b.low() + s * (b.high() - b.low());
        let v = f.inverse(bid).unwrap();
        let back = f.bid(v).unwrap();
        prop_assert!((back - bid).abs() < 1e-8 * (b.high() - b.low()).max(1.0), "{} -> {} -> {}", bid, v, back);
    }

    #[test]
    fn minimax_bid_equalizes_losses(b in belief(), s in 0.0..1.0f64) {
        let w = b.high() - b.low();
        let value = match b.orientation() {
            Orientation::BuyerAuction => b.low() + w * s,
            Orientation::Procurement => b.high() - w * s,
        };
        let bid = BiddingFunction::new(b).bid(value).unwrap();
        let inside = bid > b.low() + 1e-9 * w && bid < b.high() - 1e-9 * w;
        if inside {
            let hi = b.worst_loss_high(value, bid).unwrap();
            let lo = b.worst_loss_low(value, bid).unwrap();
            prop_assert!((hi - lo).abs() < 1e-7 * w.max(1.0), "{} vs {}", hi, lo);
        }
    }

    #[test]
    fn reflection_maps_bids(b in belief(), s in 0.0..1.0f64) {
        let pivot = b.low() + b.high();
        let value = b.low() + (b.high() - b.low()) * 1.2 * s
            - if b.orientation() == Orientation::Procurement { 0.2 * (b.high() - b.low()) } else { 0.0 };
        let direct = BiddingFunction::new(b).bid(value).unwrap();
        let mirrored = BiddingFunction::new(b.reflect()).bid(pivot - value).unwrap();
        prop_assert!((direct - (pivot - mirrored)).abs() < 1e-9);
    }

    #[test]
    fn comparative_statics_hold(
        family in family(),
        low in -1.0..1.0f64,
        width in 0.2..2.0f64,
        share in 0.05..0.95f64,
        bidders in 2usize..8,
        vs in 0.0..1.6f64,
    ) {
        let c = Config { family, low, moment: low + share * width, high: low + width, bidders, value: low + vs * width };
        let claims: &[Claim] = match family {
            Family::Aggregate => &AGG_CLAIMS,
            Family::Individual => &IND_CLAIMS,
        };
        for &claim in claims {
            if let Some(outcome) = check_claim(&c, claim) {
                prop_assert!(outcome.is_ok(), "{:?}", outcome);
            }
        }
    }

    #[test]
    fn order_statistic_pmfs_sum_to_one(points in sample(), n in 1usize..6) {
        let d = EmpiricalDistribution::from_sample(&points).unwrap();
        let lo: f64 = d.min_order_stat_pmf_all(n).unwrap().iter().sum();
        let hi: f64 = d.max_order_stat_pmf_all(n).unwrap().iter().sum();
        prop_assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        prop_assert!(d.min_order_stat_mean(n).unwrap() <= d.max_order_stat_mean(n).unwrap() + 1e-12);
    }

    #[test]
    fn cdf_is_monotone(points in sample(), x in -6.0..6.0f64, y in -6.0..6.0f64) {
        let d = EmpiricalDistribution::from_sample(&points).unwrap();
        let (a, b) = (x.min(y), x.max(y));
        prop_assert!(d.cdf(a) <= d.cdf(b));
        prop_assert!(d.cdf_left(a) <= d.cdf(a));
        prop_assert_eq!(d.cdf(d.max()), 1.0);
        prop_assert_eq!(d.cdf_left(d.min()), 0.0);
    }

    #[test]
    fn metrics_are_symmetric_and_subadditive(a in sample(), b in sample(), c in sample()) {
        let (a, b, c) = (
            EmpiricalDistribution::from_sample(&a).unwrap(),
            EmpiricalDistribution::from_sample(&b).unwrap(),
            EmpiricalDistribution::from_sample(&c).unwrap(),
        );
        prop_assert!((l1_distance(&a, &b) - l1_distance(&b, &a)).abs() < 1e-12);
        prop_assert!((moment_distance(&a, &b) - moment_distance(&b, &a)).abs() < 1e-12);
        prop_assert!(l1_distance(&a, &c) <= l1_distance(&a, &b) + l1_distance(&b, &c) + 1e-12);
        prop_assert!(moment_distance(&a, &c) <= moment_distance(&a, &b) + moment_distance(&b, &c) + 1e-12);
        prop_assert!(l1_distance(&a, &b) >= 0.0);
    }

    #[test]
    fn l1_of_shift_is_shift(a in sample(), shift in -3.0..3.0f64) {
        let d = EmpiricalDistribution::from_sample(&a).unwrap();
        let moved = d.map(|x| x + shift).unwrap();
        prop_assert!((l1_distance(&d, &moved) - shift.abs()).abs() < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf(points in sample(), p in 0.0..1.0f64) {
        let d = EmpiricalDistribution::from_sample(&points).unwrap();
        let q = d.quantile(p);
        prop_assert!(d.cdf(q) >= p - 1e-12);
        prop_assert!(d.cdf_left(q) <= p + 1e-12);
    }
}
