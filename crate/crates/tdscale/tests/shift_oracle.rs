//! Window subgroups of `F_2((t))` checked against explicit subsets of
//! `t^L F_2[[t]] / t^H F_2[[t]]`.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use proptest::prelude::*;
use tdscale::model_shift::{ShiftGen, ShiftModel, Support, Tail, WindowSub};

const L: i64 = -6;
const H: i64 = 6;

fn bit(n: i64) -> u32 {
    1 << (n - L)
}

fn span(gens: &[u32]) -> BTreeSet<u32> {
    let mut set: BTreeSet<u32> = [0].into();
    for &g in gens {
        let more: Vec<u32> = set.iter().map(|x| x ^ g).collect();
        set.extend(more);
    }
    set
}

/// The subgroup as a set of bitmasks, built straight from its window data.
fn explicit(u: &WindowSub) -> BTreeSet<u32> {
    assert_eq!(u.below, vec![Tail::Trivial]);
    assert_eq!(u.above, vec![Tail::Full]);
    assert!(u.lo >= L && u.hi <= H);
    let mut gens: Vec<u32> = u
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|x| *x.1 == 1)
                .map(|(i, _)| bit(u.lo + i as i64))
                .fold(0, |a, b| a | b)
        })
        .collect();
    gens.extend((u.hi..H).map(bit));
    span(&gens)
}

fn arb_sub() -> impl Strategy<Value = (i64, Vec<Vec<u32>>)> {
    (
        -3i64..=0,
        prop::collection::vec(prop::collection::vec(0u32..2, 3), 0..4),
    )
}

fn build(m: &ShiftModel, (lo, rows): (i64, Vec<Vec<u32>>)) -> WindowSub {
    m.window(lo, lo + 3, vec![Tail::Trivial], vec![Tail::Full], rows)
        .unwrap()
}

proptest! {
    #[test]
    fn lattice_ops_match_sets(a in arb_sub(), b in arb_sub()) {
        let m = ShiftModel::new(2, vec![Support::LeftRestricted]).unwrap();
        let (u, v) = (build(&m, a), build(&m, b));
        let (su, sv) = (explicit(&u), explicit(&v));
        let meet: BTreeSet<u32> = su.intersection(&sv).cloned().collect();
        prop_assert_eq!(explicit(&m.intersect(&u, &v)), meet.clone());
        let gens: Vec<u32> = su.iter().chain(&sv).cloned().collect();
        prop_assert_eq!(explicit(&m.sum(&u, &v)), span(&gens));
        prop_assert_eq!(m.le(&u, &v), su.is_subset(&sv));
        let w = m.intersect(&u, &v);
        prop_assert_eq!(m.index(&u, &w).unwrap(), BigUint::from((su.len() / meet.len()) as u64));
    }

    #[test]
    fn shifts_match_sets(a in arb_sub(), k in -2i64..=2) {
        let m = ShiftModel::new(2, vec![Support::LeftRestricted]).unwrap();
        let u = build(&m, a);
        let image = m.apply(&[(ShiftGen::Tau(0), k)], &u);
        let mask = bit(H) - 1;
        let moved: BTreeSet<u32> = explicit(&u)
            .into_iter()
            .map(|x| if k >= 0 { (x << k) & mask } else { x >> -k })
            .collect();
        let mut gens: Vec<u32> = moved.into_iter().collect();
        gens.extend((H + k.min(0)..H).map(bit));
        prop_assert_eq!(explicit(&image), span(&gens));
        prop_assert_eq!(m.apply(&[(ShiftGen::Tau(0), -k)], &image), u);
    }
}
