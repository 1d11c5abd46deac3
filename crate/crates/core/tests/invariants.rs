use num_traits::Zero;
use proptest::prelude::*;

use saltlab::attacks::{AdviceTable, AttackFamily, AttackParams};
use saltlab::bounds::{distinct_count_distribution, salting_bound};
use saltlab::decimal::root_ceil;
use saltlab::game::{build_game, Family, GameSpec};
use saltlab::qsim::{
    project_salt_counts, transition_probability, Classifier, Dims, OracleKind, PropertySpec,
    QState, SaltMode,
};
use saltlab::ratio::{pow, rat};
use saltlab::solver::{optimal_value, property_finding_value};
use saltlab::{Budget, Rational};

fn small_rat() -> impl Strategy<Value = Rational> {
    (-20i64..=20, 1i64..=6).prop_map(|(a, b)| rat(a, b))
}

/// Prefix sums of `a` dominated by those of `b`, and a non-increasing `c >= 0`.
fn abel_triple() -> impl Strategy<Value = (Vec<Rational>, Vec<Rational>, Vec<Rational>)> {
    (1usize..8).prop_flat_map(|n| {
        (
            proptest::collection::vec(small_rat(), n),
            proptest::collection::vec((0i64..=10, 1i64..=4), n),
            proptest::collection::vec((0i64..=10, 1i64..=4), n),
        )
            .prop_map(|(a, slack, steps)| {
                let mut b = Vec::new();
                let mut prev = Rational::zero();
                for (ai, &(s, d)) in a.iter().zip(&slack) {
                    let cur = rat(s, d);
                    b.push(ai + &cur - &prev);
                    prev = cur;
                }
                let mut c: Vec<Rational> = Vec::new();
                let mut level = rat(100, 1);
                for &(s, d) in &steps {
                    level = (level - rat(s, d)).max(Rational::zero());
                    c.push(level.clone());
                }
                (a, b, c)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn abel_summation((a, b, c) in abel_triple()) {
        let (mut sa, mut sb) = (Rational::zero(), Rational::zero());
        let (mut pa, mut pb) = (Rational::zero(), Rational::zero());
        for i in 0..a.len() {
            pa += &a[i];
            pb += &b[i];
            prop_assert!(pa <= pb);
            sa += &c[i] * &a[i];
            sb += &c[i] * &b[i];
            prop_assert!(sa <= sb);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn root_ceil_is_an_upper_bound(num in 1i64..10_000, den in 1i64..10_000, n in 1u32..7) {
        let x = rat(num, den);
        let r = root_ceil(&x, n, 50).to_rational();
        prop_assert!(pow(&r, n) >= x);
        prop_assert!(pow(&(r - rat(1, 1_000_000_000_000)), n) < x);
    }

    #[test]
    fn distinct_counts_are_a_distribution(k in 1u64..10, l in 1u64..10) {
        let d = distinct_count_distribution(k, l);
        let total: Rational = d.iter().sum();
        prop_assert_eq!(total, rat(1, 1));
        prop_assert!(d[0].is_zero());
        prop_assert!(d.iter().skip(k as usize + 1).all(|p| p.is_zero()));
    }

    #[test]
    fn salting_bound_never_undercuts_eps(num in 0i64..=10, s in 0u32..6, k in 1u64..50) {
        let eps = rat(num, 10);
        let r = salting_bound(&eps, s, 1, k, 16).unwrap();
        prop_assert!(r.dominates(&eps));
    }

    #[test]
    fn advice_round_trip(k in 1usize..40, m in 2usize..40, n in 1u32..40, pick in proptest::collection::vec(any::<u32>(), 0..6)) {
        for family in [AttackFamily::Collision, AttackFamily::PreimageZero, AttackFamily::Inversion] {
            let params = AttackParams { family, k, m, n, s: 400, t: 1 };
            let arity = if family == AttackFamily::PreimageZero { 1 } else { 2 };
            let entries: Vec<(usize, Vec<u32>)> = pick
                .iter()
                .map(|&v| {
                    let ans = (0..arity)
                        .map(|j| if family == AttackFamily::Inversion && j == 0 { v % n } else { v % m as u32 })
                        .collect();
                    (v as usize % k, ans)
                })
                .collect();
            let table = AdviceTable::encode(&params, &entries).unwrap();
            prop_assert_eq!(table.bits.len(), 400);
            prop_assert_eq!(table.decode(), entries);
        }
    }

    #[test]
    fn oracle_queries_preserve_norm(seed in any::<u64>(), csto in any::<bool>()) {
        let dims = Dims::new(2, 1, 3, 2).unwrap();
        let psi = QState::random(dims, &Budget::default(), seed, |_, _| true).unwrap();
        let kind = if csto { OracleKind::Csto } else { OracleKind::Cphso };
        let out = psi.apply_oracle(kind);
        prop_assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn salt_count_projections_resolve_the_identity(seed in any::<u64>()) {
        let dims = Dims::new(3, 1, 2, 1).unwrap();
        let c = Classifier::new(dims, &PropertySpec::preimage_zero()).unwrap();
        let psi = QState::random(dims, &Budget::default(), seed, |_, _| true).unwrap();
        let total: f64 = (0..=3).map(|r| project_salt_counts(&psi, &c, SaltMode::Exact(r)).1).sum();
        prop_assert!((total - psi.norm_sqr()).abs() < 1e-10);
    }
}

#[test]
fn classical_property_finding_within_transition_sum() {
    let budget = Budget::default();
    let props = [
        PropertySpec::preimage_zero(),
        PropertySpec::collision(),
        PropertySpec::ksum(2),
    ];
    for p in &props {
        for (m, n) in [(2, 2), (3, 2), (3, 3), (4, 2), (4, 3)] {
            let pred = |d: &[Option<u32>]| p.holds(d, n);
            for t in 0..=m {
                let v = property_finding_value(m, n, t, &pred);
                let sum: Rational = (0..t)
                    .map(|i| transition_probability(p, m, n, i, &budget).unwrap())
                    .sum();
                assert!(v <= sum, "{p:?} M={m} N={n} T={t}: {v} > {sum}");
            }
        }
    }
}

#[test]
fn solver_values_grow_with_queries() {
    let budget = Budget::default();
    for (family, m, n) in [
        (Family::PreimageZero, 3, 3),
        (Family::Collision, 3, 3),
        (Family::Inversion, 3, 2),
    ] {
        let g = build_game(&GameSpec::new(family, m, n), &budget).unwrap();
        let vals: Vec<Rational> = (0..=m + 1).map(|t| optimal_value(&g, t)).collect();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{family:?}");
        assert!(vals.iter().all(|v| *v <= rat(1, 1)));
    }
}
