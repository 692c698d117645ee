use proptest::prelude::*;
use tecert::frattini::{enumerate_maximal, frattini_vector, is_almost_primitive, schreier_basis};
use tecert::{Verdict, Word};

fn word(max_gen: u32, max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec((1..=max_gen, -4i64..=4), 0..max_len).prop_map(Word::from_syllables)
}

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3, 5])
}

proptest! {
    #[test]
    fn pth_powers_and_commutators_lie_in_frattini(u in word(3, 6), v in word(3, 6), p in prime()) {
        prop_assert!(frattini_vector(&u.pow(p as i64), 3, p).unwrap().in_frattini());
        prop_assert!(frattini_vector(&Word::commutator(&u, &v), 3, p).unwrap().in_frattini());
    }

    #[test]
    fn schreier_rewrite_expands_back(w in word(2, 8), p in prime()) {
        for m in enumerate_maximal(2, p).unwrap() {
            let basis = schreier_basis(&m);
            prop_assert_eq!(basis.len(), 1 + (p as usize));
            if m.contains(&w) {
                let v = basis.rewrite(&w).unwrap();
                prop_assert_eq!(basis.expand(&v).unwrap(), w.clone());
            } else {
                prop_assert!(basis.rewrite(&w).is_err());
            }
        }
    }

    #[test]
    fn almost_primitive_implies_frattini(w in word(2, 8), p in prime()) {
        let c = is_almost_primitive(&w, 2, p).unwrap();
        if c.verdict == Verdict::AlmostPrimitive {
            prop_assert!(frattini_vector(&w, 2, p).unwrap().in_frattini());
        }
    }

    #[test]
    fn almost_primitivity_ignores_generator_order(w in word(3, 6)) {
        let swapped = w.rename(|i| match i { 1 => 2, 2 => 1, other => other });
        let a = is_almost_primitive(&w, 3, 2).unwrap().verdict;
        let b = is_almost_primitive(&swapped, 3, 2).unwrap().verdict;
        prop_assert_eq!(a, b);
    }
}

#[test]
fn maximal_subgroup_counts() {
    for (n, p, count) in [(1, 2, 1), (2, 2, 3), (2, 3, 4), (3, 2, 7), (3, 3, 13), (2, 5, 6)] {
        assert_eq!(enumerate_maximal(n, p).unwrap().len(), count, "n = {n}, p = {p}");
    }
}

#[test]
fn classical_almost_primitive_examples() {
    let ap: Word = "x1^3*x2^3*[x1,x2]".parse().unwrap();
    assert_eq!(
        is_almost_primitive(&ap, 2, 3).unwrap().verdict,
        Verdict::AlmostPrimitive
    );
    let prim: Word = "x1*x2".parse().unwrap();
    assert_eq!(
        is_almost_primitive(&prim, 2, 3).unwrap().verdict,
        Verdict::NotAlmostPrimitive
    );
    let square: Word = "x1^9".parse().unwrap();
    assert_eq!(
        is_almost_primitive(&square, 2, 3).unwrap().verdict,
        Verdict::NotAlmostPrimitive
    );
}
