mod common;

use lclt_core::groups::{classify_case, closure_of_group};
use lclt_core::{QVec, QuadScalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact_letter(set: &[QVec]) -> &'static str {
    let z = QuadScalar::zero;
    classify_case(&closure_of_group(set, &[z(), z()]).unwrap()).unwrap().letter()
}

#[test]
fn exact_classifier_matches_point_cloud_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    for _ in 0..40 {
        let set = common::random_generator_set(&mut rng);
        let floats = common::to_f64(&set);
        assert_eq!(exact_letter(&set), common::oracle_letter(&floats), "generators {floats:?}");
    }
}

#[test]
fn hand_picked_sets_cover_every_letter() {
    let (z, one, s2) = (QuadScalar::zero, QuadScalar::one, || QuadScalar::sqrt(2));
    let sets: Vec<(Vec<QVec>, &str)> = vec![
        (vec![[one(), z()], [z(), one()], [s2(), z()], [z(), s2()]], "A"),
        (vec![[z(), one()], [z(), s2()], [one(), z()]], "B"),
        (vec![[one(), one()], [s2(), s2()], [z(), one()]], "C"),
        (vec![[z(), one()], [one(), s2()]], "D"),
        (vec![[one(), s2()], [s2(), one()]], "E"),
        (vec![[one(), z()], [s2(), z()], [z(), one()]], "Degenerate"),
    ];
    for (set, want) in sets {
        assert_eq!(exact_letter(&set), want);
        assert_eq!(common::oracle_letter(&common::to_f64(&set)), want);
    }
}
