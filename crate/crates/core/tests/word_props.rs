use proptest::prelude::*;
use tecert::{parse_word, GeneratorSet, Word};

fn word(max_gen: u32, max_len: usize) -> impl Strategy<Value = Word> {
    prop::collection::vec((1..=max_gen, -3i64..=3), 0..max_len).prop_map(Word::from_syllables)
}

fn is_reduced(w: &Word) -> bool {
    let s = w.syllables();
    s.iter().all(|&(_, e)| e != 0) && s.windows(2).all(|p| p[0].0 != p[1].0)
}

proptest! {
    #[test]
    fn construction_is_reduced(w in word(4, 12)) {
        prop_assert!(is_reduced(&w));
    }

    #[test]
    fn inverse_cancels(w in word(4, 12)) {
        prop_assert!(w.concat(&w.inverse()).is_identity());
        prop_assert!(w.inverse().concat(&w).is_identity());
        prop_assert_eq!(w.inverse().inverse(), w);
    }

    #[test]
    fn concat_is_associative(a in word(3, 6), b in word(3, 6), c in word(3, 6)) {
        prop_assert_eq!(a.concat(&b).concat(&c), a.concat(&b.concat(&c)));
    }

    #[test]
    fn display_round_trips(w in word(5, 12)) {
        let text = w.to_string();
        let gens = GeneratorSet::new(5).unwrap();
        prop_assert_eq!(parse_word(&text, &gens).unwrap(), w);
    }

    #[test]
    fn exponent_sums_are_additive(a in word(4, 8), b in word(4, 8)) {
        let ab = a.concat(&b);
        for i in 1..=4 {
            prop_assert_eq!(ab.exponent_sum(i), a.exponent_sum(i) + b.exponent_sum(i));
        }
    }

    #[test]
    fn cyclic_reduce_conjugates_back(w in word(3, 10)) {
        let (core, c) = w.cyclic_reduce();
        prop_assert!(core.is_cyclically_reduced());
        prop_assert_eq!(c.concat(&core).concat(&c.inverse()), w);
    }

    #[test]
    fn max_root_reassembles(w in word(3, 6), k in 1i64..4) {
        prop_assume!(!w.is_identity());
        let u = w.pow(k);
        let d = u.max_root().unwrap();
        prop_assert!(d.multiplicity as i64 % k == 0);
        let back = d.conjugator.concat(&d.root.pow(d.multiplicity as i64)).concat(&d.conjugator.inverse());
        prop_assert_eq!(back, u);
        prop_assert_eq!(d.root.max_root().unwrap().multiplicity, 1);
    }

    #[test]
    fn substituting_generators_is_identity(w in word(4, 10)) {
        let gens: Vec<Word> = (1..=4).map(Word::generator).collect();
        prop_assert_eq!(w.substitute(&gens).unwrap(), w);
    }

    #[test]
    fn substitution_is_a_homomorphism(a in word(2, 6), b in word(2, 6), u in word(3, 4), v in word(3, 4)) {
        let images = [u, v];
        let lhs = a.concat(&b).substitute(&images).unwrap();
        let rhs = a.substitute(&images).unwrap().concat(&b.substitute(&images).unwrap());
        prop_assert_eq!(lhs, rhs);
    }
}

#[test]
fn strict_grammar() {
    let gens = GeneratorSet::new(4).unwrap();
    assert!(parse_word("[x1,x2]*[x3,x4]", &gens).is_ok());
    assert!(parse_word("[x1,x2][x3,x4]", &gens).is_err());
    assert!(parse_word("x5", &gens).is_err());
    assert_eq!(parse_word("1", &gens).unwrap(), Word::identity());
    assert_eq!(parse_word("x1^2*x1^-2", &gens).unwrap(), Word::identity());
}
