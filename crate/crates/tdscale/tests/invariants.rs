//! Structural laws on random words: tidiness under powers and inversion,
//! the modular function as a homomorphism, commutators in flat groups.

use num_bigint::BigUint;
use proptest::prelude::*;
use tdscale::core::{Model, Word};
use tdscale::dynamics::{is_tidy, modular, scale_pair, tidying};
use tdscale::model_padic_vec::VecModel;
use tdscale::model_shift::{ShiftModel, Support};

fn vec_model() -> Model {
    Model::Vec(VecModel::new(3, 2).unwrap())
}

fn laurent_times_full() -> Model {
    Model::Shift(ShiftModel::new(2, vec![Support::LeftRestricted, Support::Full]).unwrap())
}

fn word(m: &Model, letters: &[(String, i64)]) -> Word {
    Word::parse(m, letters).unwrap()
}

/// Monomial words on `Q_3^2`.
fn arb_vec_word() -> impl Strategy<Value = Vec<(String, i64)>> {
    prop::collection::vec(
        prop_oneof![
            (-2i64..=2, -2i64..=2).prop_map(|(a, b)| (format!("diag({a},{b})"), 1)),
            Just(("swap_0_1".to_string(), 1)),
        ],
        1..4,
    )
}

/// Words in `τ`, `σ` and the `β` elements on `F_2((t)) × F_2^Z`.
fn arb_k_word() -> impl Strategy<Value = Vec<(String, i64)>> {
    prop::collection::vec(
        prop_oneof![
            (-2i64..=2).prop_map(|e| ("tau_0".to_string(), e)),
            (-2i64..=2).prop_map(|e| ("tau_1".to_string(), e)),
            (-1i64..=1, -1i64..=1).prop_map(|(m, n)| (format!("beta_0_1_{m}_{n}"), 1)),
        ],
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tidy_for_powers_and_inverse(w in arb_vec_word(), n in 2i64..=3) {
        let m = vec_model();
        let w = word(&m, &w);
        let a = m.eval(&w).unwrap();
        let u = tidying(&m, &m.standard(), &a).unwrap().tidy;
        prop_assert!(is_tidy(&m, &u, &a).unwrap());
        prop_assert!(is_tidy(&m, &u, &a.inverse()).unwrap());
        prop_assert!(is_tidy(&m, &u, &m.eval(&w.pow(n)).unwrap()).unwrap());
    }

    #[test]
    fn modular_is_multiplicative(x in arb_vec_word(), y in arb_vec_word()) {
        let m = vec_model();
        let (x, y) = (word(&m, &x), word(&m, &y));
        let (a, b) = (m.eval(&x).unwrap(), m.eval(&y).unwrap());
        let ab = m.eval(&x.then_after(&y)).unwrap();
        prop_assert_eq!(modular(&m, &ab).unwrap(), &modular(&m, &a).unwrap() * &modular(&m, &b).unwrap());
    }

    #[test]
    fn scale_pair_matches_modular(x in arb_vec_word()) {
        let m = vec_model();
        let a = m.eval(&word(&m, &x)).unwrap();
        let (s, si) = scale_pair(&m, &a).unwrap();
        prop_assert_eq!(modular(&m, &a).unwrap(), tdscale::IndexRatio::new(s, si));
    }

    #[test]
    fn commutators_uniscalar(x in arb_k_word(), y in arb_k_word()) {
        let m = laurent_times_full();
        let c = Word::commutator(&word(&m, &x), &word(&m, &y));
        let (s, si) = scale_pair(&m, &m.eval(&c).unwrap()).unwrap();
        prop_assert_eq!((s, si), (BigUint::from(1u32), BigUint::from(1u32)));
    }
}
