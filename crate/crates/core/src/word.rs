//! Freely reduced words in a free group of finite rank.
//!
//! A [`Word`] is a list of syllables `(generator, exponent)` with 1-based
//! generator indices, nonzero exponents, and distinct generators in adjacent
//! syllables. Every constructor reduces, so two words are equal as group
//! elements exactly when they are equal as values.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("generator x{index} out of range for rank {rank}")]
    GeneratorOutOfRange { index: u64, rank: usize },
    #[error("substitution needs {needed} images, got {given}")]
    Arity { needed: usize, given: usize },
    #[error("the identity has no root decomposition")]
    IdentityRoot,
    #[error("rank must be at least 1")]
    ZeroRank,
}

/// The basis `x1..xn` of a free group of rank `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GeneratorSet {
    rank: usize,
}

impl GeneratorSet {
    pub fn new(rank: usize) -> Result<Self, WordError> {
        if rank == 0 {
            return Err(WordError::ZeroRank);
        }
        Ok(Self { rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Checks that every generator of `w` lies in `x1..xn`.
    pub fn check(&self, w: &Word) -> Result<(), WordError> {
        match w.max_generator() {
            Some(g) if g as usize > self.rank => Err(WordError::GeneratorOutOfRange {
                index: g as u64,
                rank: self.rank,
            }),
            _ => Ok(()),
        }
    }

    /// Exponent sum of `x_i` in `w`, with range checking on `i`.
    pub fn sigma(&self, w: &Word, i: usize) -> Result<i64, WordError> {
        if i == 0 || i > self.rank {
            return Err(WordError::GeneratorOutOfRange {
                index: i as u64,
                rank: self.rank,
            });
        }
        Ok(w.exponent_sum(i as u32))
    }

    /// The full exponent-sum vector `(sigma_1(w), .., sigma_n(w))`.
    pub fn sigma_vector(&self, w: &Word) -> Vec<i64> {
        (1..=self.rank as u32).map(|i| w.exponent_sum(i)).collect()
    }
}

/// `conjugator * root^multiplicity * conjugator^-1 == word`, with `root` not a
/// proper power and cyclically reduced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootDecomposition {
    pub root: Word,
    pub multiplicity: u64,
    pub conjugator: Word,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word {
    syllables: Vec<(u32, i64)>,
}

fn checked_exp(a: i64, b: i64) -> i64 {
    a.checked_mul(b).expect("exponent overflow")
}

impl Word {
    pub fn identity() -> Self {
        Self::default()
    }

    /// The generator `x_i` (1-based).
    pub fn generator(i: u32) -> Self {
        assert!(i >= 1, "generators are numbered from 1");
        Self {
            syllables: vec![(i, 1)],
        }
    }

    pub fn generator_power(i: u32, e: i64) -> Self {
        Self::from_syllables([(i, e)])
    }

    /// Builds a word from raw syllables, freely reducing them.
    pub fn from_syllables<I: IntoIterator<Item = (u32, i64)>>(raw: I) -> Self {
        let mut out: Vec<(u32, i64)> = Vec::new();
        for (g, e) in raw {
            assert!(g >= 1, "generators are numbered from 1");
            push_syllable(&mut out, g, e);
        }
        Self { syllables: out }
    }

    pub fn syllables(&self) -> &[(u32, i64)] {
        &self.syllables
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    /// Number of syllables.
    pub fn syllable_len(&self) -> usize {
        self.syllables.len()
    }

    /// Length as a reduced word in the letters `x_i^{±1}`.
    pub fn letter_len(&self) -> u64 {
        self.syllables.iter().map(|&(_, e)| e.unsigned_abs()).sum()
    }

    pub fn max_generator(&self) -> Option<u32> {
        self.syllables.iter().map(|&(g, _)| g).max()
    }

    pub fn generators(&self) -> BTreeSet<u32> {
        self.syllables.iter().map(|&(g, _)| g).collect()
    }

    pub fn exponent_sum(&self, i: u32) -> i64 {
        self.syllables
            .iter()
            .filter(|&&(g, _)| g == i)
            .map(|&(_, e)| e)
            .sum()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut out = self.syllables.clone();
        for &(g, e) in &other.syllables {
            push_syllable(&mut out, g, e);
        }
        Word { syllables: out }
    }

    pub fn inverse(&self) -> Word {
        Word {
            syllables: self.syllables.iter().rev().map(|&(g, e)| (g, -e)).collect(),
        }
    }

    pub fn pow(&self, k: i64) -> Word {
        if k == 0 || self.is_identity() {
            return Word::identity();
        }
        if k < 0 {
            return self.inverse().pow(-k);
        }
        let (core, conj) = self.cyclic_reduce();
        let core_pow = if core.syllables.len() == 1 {
            let (g, e) = core.syllables[0];
            Word {
                syllables: vec![(g, checked_exp(e, k))],
            }
        } else {
            // A cyclically reduced word with at least two syllables has
            // distinct first and last generators, so repetition is reduced.
            let mut syl = Vec::with_capacity(core.syllables.len() * k as usize);
            for _ in 0..k {
                syl.extend_from_slice(&core.syllables);
            }
            Word { syllables: syl }
        };
        conj.concat(&core_pow).concat(&conj.inverse())
    }

    /// `[u, v] = u v u^-1 v^-1`.
    pub fn commutator(u: &Word, v: &Word) -> Word {
        u.concat(v).concat(&u.inverse()).concat(&v.inverse())
    }

    /// Returns `(core, conjugator)` with `self = conjugator * core * conjugator^-1`
    /// and `core` cyclically reduced.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let syl = &self.syllables;
        let mut lo = 0usize;
        let mut hi = syl.len();
        let mut conj: Vec<(u32, i64)> = Vec::new();
        let mut tail: Option<(u32, i64)> = None;
        while hi - lo >= 2 && syl[lo].0 == syl[hi - 1].0 {
            let (g, a) = syl[lo];
            let b = syl[hi - 1].1;
            conj.push((g, a));
            lo += 1;
            hi -= 1;
            if a + b != 0 {
                tail = Some((g, a + b));
                break;
            }
        }
        let mut core: Vec<(u32, i64)> = syl[lo..hi].to_vec();
        if let Some((g, e)) = tail {
            push_syllable(&mut core, g, e);
        }
        (Word { syllables: core }, Word { syllables: conj })
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        let s = &self.syllables;
        s.len() < 2 || s[0].0 != s[s.len() - 1].0
    }

    /// Maximal root decomposition by periodicity of the cyclic core.
    pub fn max_root(&self) -> Result<RootDecomposition, WordError> {
        if self.is_identity() {
            return Err(WordError::IdentityRoot);
        }
        let (core, conjugator) = self.cyclic_reduce();
        if core.syllables.len() == 1 {
            let (g, e) = core.syllables[0];
            return Ok(RootDecomposition {
                root: Word {
                    syllables: vec![(g, e.signum())],
                },
                multiplicity: e.unsigned_abs(),
                conjugator,
            });
        }
        let period = smallest_period(&core.syllables);
        let n = core.syllables.len();
        let (root, multiplicity) = if n % period == 0 {
            (
                Word {
                    syllables: core.syllables[..period].to_vec(),
                },
                (n / period) as u64,
            )
        } else {
            (core, 1)
        };
        Ok(RootDecomposition {
            root,
            multiplicity,
            conjugator,
        })
    }

    /// Homomorphic image under `x_i -> images[i-1]`.
    pub fn substitute(&self, images: &[Word]) -> Result<Word, WordError> {
        if let Some(g) = self.max_generator() {
            if g as usize > images.len() {
                return Err(WordError::Arity {
                    needed: g as usize,
                    given: images.len(),
                });
            }
        }
        let mut out = Word::identity();
        for &(g, e) in &self.syllables {
            out = out.concat(&images[g as usize - 1].pow(e));
        }
        Ok(out)
    }

    /// Renames `x_i` to `x_{i+offset}`.
    pub fn shift(&self, offset: u32) -> Word {
        Word {
            syllables: self.syllables.iter().map(|&(g, e)| (g + offset, e)).collect(),
        }
    }

    /// Renames generators through `map` (must be injective on the support).
    pub fn rename(&self, map: impl Fn(u32) -> u32) -> Word {
        Word::from_syllables(self.syllables.iter().map(|&(g, e)| (map(g), e)))
    }

    /// Cyclic rotation at a syllable boundary: moves the first `k` syllables
    /// to the end. Only meaningful on cyclically reduced words.
    pub fn rotate(&self, k: usize) -> Word {
        let n = self.syllables.len();
        if n == 0 {
            return Word::identity();
        }
        let k = k % n;
        let mut syl = self.syllables[k..].to_vec();
        syl.extend_from_slice(&self.syllables[..k]);
        Word::from_syllables(syl)
    }

    /// Sub-word made of syllables `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Word {
        Word {
            syllables: self.syllables[range].to_vec(),
        }
    }
}

fn push_syllable(out: &mut Vec<(u32, i64)>, g: u32, e: i64) {
    if e == 0 {
        return;
    }
    if let Some(last) = out.last_mut() {
        if last.0 == g {
            last.1 = last.1.checked_add(e).expect("exponent overflow");
            if last.1 == 0 {
                out.pop();
            }
            return;
        }
    }
    out.push((g, e));
}

/// Smallest period of a sequence, from the prefix-function.
fn smallest_period<T: PartialEq>(s: &[T]) -> usize {
    let n = s.len();
    let mut fail = vec![0usize; n];
    let mut k = 0usize;
    for i in 1..n {
        while k > 0 && s[i] != s[k] {
            k = fail[k - 1];
        }
        if s[i] == s[k] {
            k += 1;
        }
        fail[i] = k;
    }
    n - fail[n - 1]
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.syllables.is_empty() {
            return write!(f, "1");
        }
        for (i, &(g, e)) in self.syllables.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if e == 1 {
                write!(f, "x{g}")?;
            } else {
                write!(f, "x{g}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Parses `text` and checks that every generator lies in `gens`.
pub fn parse_word(text: &str, gens: &GeneratorSet) -> Result<Word, WordError> {
    let mut p = Parser::new(text);
    p.rank = Some(gens.rank());
    let w = p.top()?;
    Ok(w)
}

impl FromStr for Word {
    type Err = WordError;

    /// Parses without a rank bound.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Parser::new(s).top()
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    rank: Option<usize>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            src: text.as_bytes(),
            pos: 0,
            rank: None,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, WordError> {
        Err(WordError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), WordError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn top(&mut self) -> Result<Word, WordError> {
        let w = self.word()?;
        if self.peek().is_some() {
            return self.err("unexpected trailing input");
        }
        Ok(w)
    }

    fn word(&mut self) -> Result<Word, WordError> {
        if self.peek() == Some(b'1') {
            self.pos += 1;
            return Ok(Word::identity());
        }
        let mut w = self.term()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            w = w.concat(&self.term()?);
        }
        Ok(w)
    }

    fn term(&mut self) -> Result<Word, WordError> {
        let a = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.int()?;
            return Ok(a.pow(k));
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<Word, WordError> {
        match self.peek() {
            Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                let n = self.nat()?;
                if n == 0 {
                    self.pos = start;
                    return self.err("generators are numbered from 1");
                }
                if let Some(rank) = self.rank {
                    if n > rank as u64 {
                        return Err(WordError::GeneratorOutOfRange { index: n, rank });
                    }
                }
                let g = u32::try_from(n).map_err(|_| WordError::Syntax {
                    pos: start,
                    msg: "generator index too large".into(),
                })?;
                Ok(Word::generator(g))
            }
            Some(b'[') => {
                self.pos += 1;
                let u = self.word()?;
                self.expect(b',')?;
                let v = self.word()?;
                self.expect(b']')?;
                Ok(Word::commutator(&u, &v))
            }
            Some(b'(') => {
                self.pos += 1;
                let w = self.word()?;
                self.expect(b')')?;
                Ok(w)
            }
            Some(c) => self.err(format!("unexpected '{}'", c as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn int(&mut self) -> Result<i64, WordError> {
        let neg = if self.peek() == Some(b'-') {
            self.pos += 1;
            true
        } else {
            false
        };
        let start = self.pos;
        let n = self.nat()?;
        let v = i64::try_from(n).map_err(|_| WordError::Syntax {
            pos: start,
            msg: "exponent too large".into(),
        })?;
        Ok(if neg { -v } else { v })
    }

    // Digits must follow without intervening whitespace once started.
    fn nat(&mut self) -> Result<u64, WordError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected digits");
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        s.parse::<u64>().map_err(|_| WordError::Syntax {
            pos: start,
            msg: "number too large".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn syl(v: &[(u32, i64)]) -> Word {
        Word::from_syllables(v.iter().copied())
    }

    #[test]
    fn parse_examples() {
        let g2 = GeneratorSet::new(2).unwrap();
        assert!(parse_word("x1*x1^-1", &g2).unwrap().is_identity());
        assert_eq!(
            parse_word("[x1,x2]", &g2).unwrap().syllables(),
            &[(1, 1), (2, 1), (1, -1), (2, -1)]
        );
        assert_eq!(
            parse_word("x1^2*x2^3", &g2).unwrap().syllables(),
            &[(1, 2), (2, 3)]
        );
        assert!(parse_word(" ( x1 * x2 ) ^ -2 ", &g2).is_ok());
    }

    #[test]
    fn parse_errors() {
        let g2 = GeneratorSet::new(2).unwrap();
        assert!(matches!(
            parse_word("x3", &g2),
            Err(WordError::GeneratorOutOfRange { index: 3, rank: 2 })
        ));
        assert!(matches!(
            parse_word("x1*", &g2),
            Err(WordError::Syntax { pos: 3, .. })
        ));
        assert!(matches!(parse_word("x0", &g2), Err(WordError::Syntax { .. })));
        assert!(matches!(
            parse_word("[x1 x2]", &g2),
            Err(WordError::Syntax { .. })
        ));
        assert!(matches!(parse_word("x1 x2", &g2), Err(WordError::Syntax { .. })));
        assert!(matches!(
            parse_word("", &g2),
            Err(WordError::Syntax { pos: 0, .. })
        ));
    }

    #[test]
    fn concat_examples() {
        assert!(w("x1").concat(&w("x1^-1")).is_identity());
        assert_eq!(w("x1*x2").concat(&w("x2^-1*x3")), w("x1*x3"));
        assert_eq!(w("x1^2").concat(&w("x1^3")), w("x1^5"));
    }

    #[test]
    fn invert_examples() {
        assert!(Word::identity().inverse().is_identity());
        assert_eq!(w("x1*x2").inverse(), syl(&[(2, -1), (1, -1)]));
        assert_eq!(w("x1^3").inverse(), syl(&[(1, -3)]));
    }

    #[test]
    fn power_examples() {
        assert_eq!(w("x1*x2").pow(2), syl(&[(1, 1), (2, 1), (1, 1), (2, 1)]));
        assert!(w("[x1,x2]").pow(0).is_identity());
        assert_eq!(w("x1*x2*x1^-1").pow(3), syl(&[(1, 1), (2, 3), (1, -1)]));
        assert_eq!(w("x1*x2").pow(-2), w("x2^-1*x1^-1*x2^-1*x1^-1"));
    }

    #[test]
    fn commutator_examples() {
        assert!(Word::commutator(&w("x1"), &w("x1")).is_identity());
        assert_eq!(
            Word::commutator(&w("x1"), &w("x2")),
            syl(&[(1, 1), (2, 1), (1, -1), (2, -1)])
        );
        assert_eq!(
            Word::commutator(&w("x1^2"), &w("x2")),
            syl(&[(1, 2), (2, 1), (1, -2), (2, -1)])
        );
    }

    #[test]
    fn cyclic_reduce_examples() {
        let (core, conj) = w("x1*x2*x1^-1").cyclic_reduce();
        assert_eq!((core, conj), (w("x2"), w("x1")));
        let (core, conj) = w("[x1,x2]").cyclic_reduce();
        assert_eq!((core, conj), (w("[x1,x2]"), Word::identity()));
        let (core, conj) = Word::identity().cyclic_reduce();
        assert!(core.is_identity() && conj.is_identity());
        // partial cancellation at the ends
        let x = w("x1^2*x2*x1^3");
        let (core, conj) = x.cyclic_reduce();
        assert!(core.is_cyclically_reduced());
        assert_eq!(conj.concat(&core).concat(&conj.inverse()), x);
    }

    #[test]
    fn max_root_examples() {
        let r = w("x1^6").max_root().unwrap();
        assert_eq!((r.root, r.multiplicity), (w("x1"), 6));
        // [x1,x2] has cyclic core of length 4; none of its rotations by 1..3
        // syllables reproduce it, so its smallest period is 4.
        let c = w("[x1,x2]");
        for k in 1..4 {
            assert_ne!(c.rotate(k), c);
        }
        let r = c.max_root().unwrap();
        assert_eq!((r.root, r.multiplicity), (c, 1));
        let r = w("x1*x2*x1*x2").max_root().unwrap();
        assert_eq!((r.root, r.multiplicity), (w("x1*x2"), 2));
        let r = w("x1^-4").max_root().unwrap();
        assert_eq!((r.root, r.multiplicity), (w("x1^-1"), 4));
        assert_eq!(Word::identity().max_root(), Err(WordError::IdentityRoot));
    }

    #[test]
    fn sigma_examples() {
        let g = GeneratorSet::new(2).unwrap();
        assert_eq!(g.sigma(&w("[x1,x2]"), 1).unwrap(), 0);
        assert_eq!(g.sigma(&w("x1^2*x2^3"), 2).unwrap(), 3);
        assert_eq!(g.sigma(&w("x1*x2").pow(-2), 1).unwrap(), -2);
        assert!(g.sigma(&w("x1"), 3).is_err());
        assert!(g.sigma(&w("x1"), 0).is_err());
    }

    #[test]
    fn substitute_examples() {
        let c = w("[x1,x2]");
        assert!(c.substitute(&[w("x1"), w("x1")]).unwrap().is_identity());
        assert_eq!(
            w("x1*x2").substitute(&[w("x1^2"), w("x2^2")]).unwrap(),
            w("x1^2*x2^2")
        );
        assert_eq!(
            c.substitute(&[w("x1^3"), w("x2^3")]).unwrap(),
            Word::commutator(&w("x1^3"), &w("x2^3"))
        );
        assert_eq!(
            c.substitute(&[w("x1")]),
            Err(WordError::Arity { needed: 2, given: 1 })
        );
    }

    #[test]
    fn display_is_canonical() {
        assert_eq!(Word::identity().to_string(), "1");
        assert_eq!(w("[x1,x2^2]").to_string(), "x1*x2^2*x1^-1*x2^-2");
        assert_eq!(w(&w("x3^-2*x1").to_string()), w("x3^-2*x1"));
    }

    #[test]
    fn zero_rank_rejected() {
        assert_eq!(GeneratorSet::new(0), Err(WordError::ZeroRank));
    }
}
