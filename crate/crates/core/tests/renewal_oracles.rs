use lclt_core::montecarlo::{estimate_mlclt, McConfig, MlcltTarget, ProductSet};
use lclt_core::renewal_exact::{brute_force_enumerate, dp_distribution, StartMode};
use lclt_core::{QuadScalar, RenewalBase};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn palm_dp_is_a_probability_and_matches_enumeration(num in 2i64..40, den in 1i64..11) {
        let t = QuadScalar::ratio(num, den);
        prop_assume!(t.to_f64() <= 4.0);
        let base = RenewalBase::counterexample();
        let dp = dp_distribution(&base, &t, StartMode::Palm).unwrap();
        prop_assert_eq!(dp.total(), QuadScalar::one());
        let bf = brute_force_enumerate(&base, &t).unwrap();
        prop_assert_eq!(dp.marginal, bf.marginal);
    }
}

#[test]
fn stationary_dp_agrees_with_monte_carlo() {
    let base = RenewalBase::counterexample();
    let t = QuadScalar::parse("12.3").unwrap();
    let exact = dp_distribution(&base, &t, StartMode::Stationary).unwrap();
    assert_eq!(exact.total(), QuadScalar::one());
    let rt = t.to_f64().sqrt();
    let everything = ProductSet::full();
    for l in [-1, 0, 2] {
        let mc = estimate_mlclt(&base, &everything, &everything, &MlcltTarget::Fiber { l, spacing: 1.0 }, t.to_f64(), 0.0, &McConfig::new(400_000, (7 + l) as u64))
            .unwrap()
            .estimate;
        let want = exact.prob(l).to_f64() * rt;
        assert!(mc.agrees(want, 4.0, 0.0), "l = {l}: {} ± {} vs {want}", mc.point, mc.std_error);
    }
}
