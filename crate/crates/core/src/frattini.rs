//! Frattini calculus in free pro-p groups of finite rank: exponent sums mod p,
//! the maximal subgroups, their Schreier bases, and the almost-primitivity
//! decision.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{is_prime, mod_inverse, residue};
use crate::certificate::{group, Certificate, GroupContext, Reason, RuleId, Verdict, Witness};
use crate::word::{GeneratorSet, Word, WordError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrattiniError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("word lies in coset {coset} of the subgroup, not in the subgroup")]
    NotInSubgroup { coset: u64 },
    #[error("rank {rank} with p = {p} exceeds the scan bound (rank <= {max_rank}, p <= {max_prime})")]
    OutOfBounds {
        rank: usize,
        p: u64,
        max_rank: usize,
        max_prime: u64,
    },
    #[error(transparent)]
    Word(#[from] WordError),
}

fn require_prime(p: u64) -> Result<(), FrattiniError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(FrattiniError::NotPrime(p))
    }
}

/// Exponent sums of a word reduced mod p.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrattiniVector {
    pub p: u64,
    pub residues: Vec<u64>,
}

impl FrattiniVector {
    pub fn in_frattini(&self) -> bool {
        self.residues.iter().all(|&r| r == 0)
    }
}

pub fn frattini_vector(w: &Word, rank: usize, p: u64) -> Result<FrattiniVector, FrattiniError> {
    require_prime(p)?;
    let gens = GeneratorSet::new(rank)?;
    gens.check(w)?;
    Ok(FrattiniVector {
        p,
        residues: gens.sigma_vector(w).into_iter().map(|s| residue(s, p)).collect(),
    })
}

/// `w` is primitive in the free pro-p group iff it lies outside `Phi(F)`.
pub fn is_primitive(w: &Word, rank: usize, p: u64) -> Result<bool, FrattiniError> {
    Ok(!frattini_vector(w, rank, p)?.in_frattini())
}

/// The index-p subgroup `ker(lambda)`, where `lambda` is applied to exponent
/// sums mod p.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaximalSubgroup {
    pub p: u64,
    pub lambda: Vec<u64>,
    /// 1-based index of the first generator with nonzero `lambda`.
    pub pivot: u32,
}

impl MaximalSubgroup {
    /// Builds the subgroup from any nonzero functional, normalizing it.
    pub fn new(lambda: Vec<u64>, p: u64) -> Option<Self> {
        let i = lambda.iter().position(|&l| l % p != 0)?;
        let inv = mod_inverse(lambda[i] % p, p);
        let lambda = lambda.iter().map(|&l| l % p * inv % p).collect();
        Some(Self {
            p,
            lambda,
            pivot: i as u32 + 1,
        })
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    /// `lambda(w)`, the coset of `w` in `F / M`.
    pub fn coset(&self, w: &Word) -> u64 {
        let p = self.p as i128;
        let mut acc: i128 = 0;
        for &(g, e) in w.syllables() {
            let l = self.lambda.get(g as usize - 1).copied().unwrap_or(0) as i128;
            acc = (acc + l * (e as i128).rem_euclid(p)) % p;
        }
        acc as u64
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.coset(w) == 0
    }
}

/// All maximal subgroups of the free pro-p group of rank `n`, as normalized
/// functionals in lexicographic order.
pub fn enumerate_maximal(n: usize, p: u64) -> Result<Vec<MaximalSubgroup>, FrattiniError> {
    require_prime(p)?;
    GeneratorSet::new(n)?;
    let mut out = Vec::new();
    // Normalized vectors: leading zeros, a 1 at the pivot, anything after.
    // Listing by pivot from the last position down gives lexicographic order.
    for pivot in (0..n).rev() {
        let free = n - pivot - 1;
        let count = p.pow(free as u32);
        for code in 0..count {
            let mut lambda = vec![0u64; n];
            lambda[pivot] = 1;
            let mut c = code;
            for slot in (pivot + 1..n).rev() {
                lambda[slot] = c % p;
                c /= p;
            }
            out.push(MaximalSubgroup {
                p,
                lambda,
                pivot: pivot as u32 + 1,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchreierGenerator {
    /// Parent generator `x_i`.
    pub gen: u32,
    /// Coset index `j` of the representative it starts from.
    pub coset: u64,
    pub word: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchreierBasis {
    pub subgroup: MaximalSubgroup,
    /// `transversal[j]` represents the coset with `lambda = j`.
    pub transversal: Vec<Word>,
    pub generators: Vec<SchreierGenerator>,
    index: Vec<Option<u32>>,
}

impl SchreierBasis {
    pub fn new(m: &MaximalSubgroup) -> Self {
        let p = m.p;
        let n = m.rank();
        let pivot = m.pivot;
        let c_inv = mod_inverse(m.lambda[pivot as usize - 1], p);
        let transversal: Vec<Word> = (0..p)
            .map(|j| Word::generator_power(pivot, (j * c_inv % p) as i64))
            .collect();
        let mut generators = Vec::with_capacity(p as usize * (n - 1) + 1);
        let mut index = vec![None; n * p as usize];
        let mut push = |i: u32, j: u64, generators: &mut Vec<SchreierGenerator>| {
            let l = m.lambda[i as usize - 1];
            let target = (j + l) % p;
            let word = transversal[j as usize]
                .concat(&Word::generator(i))
                .concat(&transversal[target as usize].inverse());
            if word.is_identity() {
                return;
            }
            index[(i as usize - 1) * p as usize + j as usize] = Some(generators.len() as u32);
            generators.push(SchreierGenerator {
                gen: i,
                coset: j,
                word,
            });
        };
        for j in 0..p {
            push(pivot, j, &mut generators);
        }
        for i in 1..=n as u32 {
            if i != pivot {
                for j in 0..p {
                    push(i, j, &mut generators);
                }
            }
        }
        Self {
            subgroup: m.clone(),
            transversal,
            generators,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn words(&self) -> Vec<Word> {
        self.generators.iter().map(|g| g.word.clone()).collect()
    }

    fn lookup(&self, gen: u32, coset: u64) -> Option<u32> {
        self.index[(gen as usize - 1) * self.subgroup.p as usize + coset as usize]
    }

    /// Letters emitted by `steps` single steps of `x_gen^{sign}` from `coset`.
    fn walk(&self, gen: u32, sign: i64, coset: &mut u64, steps: u64, out: &mut Vec<(u32, i64)>) {
        let p = self.subgroup.p;
        let l = self.subgroup.lambda[gen as usize - 1];
        for _ in 0..steps {
            if sign > 0 {
                if let Some(k) = self.lookup(gen, *coset) {
                    out.push((k + 1, 1));
                }
                *coset = (*coset + l) % p;
            } else {
                *coset = (*coset + p - l) % p;
                if let Some(k) = self.lookup(gen, *coset) {
                    out.push((k + 1, -1));
                }
            }
        }
    }

    /// Rewrites `w` (which must lie in the subgroup) as a word in the Schreier
    /// generators, generator `k+1` standing for `generators[k]`.
    pub fn rewrite(&self, w: &Word) -> Result<Word, FrattiniError> {
        let n = self.subgroup.rank();
        GeneratorSet::new(n)?.check(w)?;
        let p = self.subgroup.p;
        let mut coset = 0u64;
        let mut out = Word::identity();
        for &(g, e) in w.syllables() {
            let l = self.subgroup.lambda[g as usize - 1];
            if l == 0 {
                let k = self
                    .lookup(g, coset)
                    .expect("generators off the pivot are never trivial when lambda vanishes");
                out = out.concat(&Word::generator_power(k + 1, e));
                continue;
            }
            let sign = e.signum();
            let steps = e.unsigned_abs();
            let (cycles, rest) = (steps / p, steps % p);
            if cycles > 0 {
                let mut start = coset;
                let mut letters = Vec::new();
                self.walk(g, sign, &mut start, p, &mut letters);
                debug_assert_eq!(start, coset);
                let cycle = Word::from_syllables(letters);
                out = out.concat(&cycle.pow(cycles as i64));
            }
            let mut letters = Vec::new();
            self.walk(g, sign, &mut coset, rest, &mut letters);
            out = out.concat(&Word::from_syllables(letters));
        }
        if coset != 0 {
            return Err(FrattiniError::NotInSubgroup { coset });
        }
        Ok(out)
    }

    /// Inverse of [`SchreierBasis::rewrite`]: substitutes generator words back.
    pub fn expand(&self, v: &Word) -> Result<Word, FrattiniError> {
        Ok(v.substitute(&self.words())?)
    }

    /// `w` lies in `Phi(M)` iff all exponent sums of its rewrite vanish mod p.
    pub fn in_frattini_of_subgroup(&self, w: &Word) -> Result<bool, FrattiniError> {
        let v = self.rewrite(w)?;
        let p = self.subgroup.p;
        Ok((1..=self.len() as u32).all(|k| residue(v.exponent_sum(k), p) == 0))
    }
}

pub fn schreier_basis(m: &MaximalSubgroup) -> SchreierBasis {
    SchreierBasis::new(m)
}

pub fn rewrite_in_maximal(w: &Word, basis: &SchreierBasis) -> Result<Word, FrattiniError> {
    basis.rewrite(w)
}

/// Limits on the `(p^n - 1)/(p - 1)` subgroup scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanBounds {
    pub max_rank: usize,
    pub max_prime: u64,
}

impl Default for ScanBounds {
    fn default() -> Self {
        Self {
            max_rank: 6,
            max_prime: 13,
        }
    }
}

impl ScanBounds {
    pub fn check(&self, rank: usize, p: u64) -> Result<(), FrattiniError> {
        if rank > self.max_rank || p > self.max_prime {
            return Err(FrattiniError::OutOfBounds {
                rank,
                p,
                max_rank: self.max_rank,
                max_prime: self.max_prime,
            });
        }
        Ok(())
    }
}

/// Outcome of testing `w` against one maximal subgroup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupCheck {
    pub index: usize,
    pub subgroup: MaximalSubgroup,
    pub rewritten: Word,
    pub sigma: Vec<i64>,
    pub outside_phi: bool,
}

pub fn check_subgroup(w: &Word, index: usize, m: &MaximalSubgroup) -> Result<SubgroupCheck, FrattiniError> {
    let basis = SchreierBasis::new(m);
    let rewritten = basis.rewrite(w)?;
    let sigma: Vec<i64> = (1..=basis.len() as u32)
        .map(|k| rewritten.exponent_sum(k))
        .collect();
    let outside_phi = sigma.iter().any(|&s| residue(s, m.p) != 0);
    Ok(SubgroupCheck {
        index,
        subgroup: m.clone(),
        rewritten,
        sigma,
        outside_phi,
    })
}

pub(crate) fn subgroup_reason(w: &Word, block: &[u32], c: &SubgroupCheck) -> Reason {
    Reason::step(
        RuleId::MaximalSubgroupCheck,
        w,
        block,
        group::PRO_P,
        Some(c.subgroup.p),
        if c.outside_phi {
            "OUTSIDE_PHI_M"
        } else {
            "INSIDE_PHI_M"
        },
    )
    .with("index", c.index)
    .with("lambda", &c.subgroup.lambda)
    .with("rewritten", &c.rewritten)
    .with("schreier_sigma", &c.sigma)
}

/// Runs every maximal-subgroup check concurrently, in subgroup order.
pub fn scan_subgroups(w: &Word, n: usize, p: u64) -> Result<Vec<SubgroupCheck>, FrattiniError> {
    let subgroups = enumerate_maximal(n, p)?;
    subgroups
        .par_iter()
        .enumerate()
        .map(|(i, m)| check_subgroup(w, i, m))
        .collect()
}

pub fn is_almost_primitive(w: &Word, n: usize, p: u64) -> Result<Certificate, FrattiniError> {
    is_almost_primitive_with(w, n, p, ScanBounds::default())
}

pub fn is_almost_primitive_with(
    w: &Word,
    n: usize,
    p: u64,
    bounds: ScanBounds,
) -> Result<Certificate, FrattiniError> {
    require_prime(p)?;
    bounds.check(n, p)?;
    let fv = frattini_vector(w, n, p)?;
    let block: Vec<u32> = (1..=n as u32).collect();
    let gens = GeneratorSet::new(n)?;
    let in_phi = fv.in_frattini();
    let mut reasons = vec![Reason::step(
        RuleId::FrattiniMembership,
        w,
        &block,
        group::PRO_P,
        Some(p),
        if in_phi { "IN_FRATTINI" } else { "PRIMITIVE" },
    )
    .with("sigma", gens.sigma_vector(w))
    .with("residues", &fv.residues)];
    let mut witness = None;
    let verdict = if !in_phi {
        Verdict::NotAlmostPrimitive
    } else {
        let checks = scan_subgroups(w, n, p)?;
        reasons.extend(checks.iter().map(|c| subgroup_reason(w, &block, c)));
        match checks.iter().find(|c| !c.outside_phi) {
            Some(c) => {
                witness = Some(Witness::MaximalSubgroup {
                    index: c.index,
                    lambda: c.subgroup.lambda.clone(),
                });
                Verdict::NotAlmostPrimitive
            }
            None => Verdict::AlmostPrimitive,
        }
    };
    let checked = reasons.len() - 1;
    reasons.push(
        Reason::step(
            RuleId::ApCharacterization,
            w,
            &block,
            group::PRO_P,
            Some(p),
            &verdict.to_string(),
        )
        .with("subgroups_checked", checked),
    );
    Ok(Certificate {
        input: w.clone(),
        context: GroupContext::free_pro_p(n, p),
        verdict,
        reasons,
        witness,
        attempted: vec![],
    })
}

/// `h` lies in every `Phi(M)`, i.e. in the second layer of the Frattini series
/// as seen by the maximal subgroups.
pub fn in_every_subgroup_frattini(h: &Word, n: usize, p: u64) -> Result<bool, FrattiniError> {
    if !frattini_vector(h, n, p)?.in_frattini() {
        return Ok(false);
    }
    Ok(scan_subgroups(h, n, p)?.iter().all(|c| !c.outside_phi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn vectors_and_primitivity() {
        assert_eq!(frattini_vector(&w("[x1,x2]"), 2, 2).unwrap().residues, vec![0, 0]);
        assert!(frattini_vector(&w("x1^2*x2^2"), 2, 2).unwrap().in_frattini());
        assert_eq!(frattini_vector(&w("x1*x2^2"), 2, 2).unwrap().residues, vec![1, 0]);
        assert!(is_primitive(&w("x1"), 2, 5).unwrap());
        assert!(!is_primitive(&w("[x1,x2]"), 2, 3).unwrap());
        assert!(is_primitive(&w("x1^3*x2"), 2, 3).unwrap());
        assert_eq!(frattini_vector(&w("x1"), 2, 4), Err(FrattiniError::NotPrime(4)));
    }

    #[test]
    fn maximal_subgroup_enumeration() {
        let ms = enumerate_maximal(2, 2).unwrap();
        let ls: Vec<Vec<u64>> = ms.iter().map(|m| m.lambda.clone()).collect();
        assert_eq!(ls, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(enumerate_maximal(1, 3).unwrap().len(), 1);
        assert_eq!(enumerate_maximal(3, 2).unwrap().len(), 7);
        let l3: Vec<Vec<u64>> = enumerate_maximal(2, 3)
            .unwrap()
            .into_iter()
            .map(|m| m.lambda)
            .collect();
        let mut sorted = l3.clone();
        sorted.sort();
        assert_eq!(l3, sorted);
    }

    #[test]
    fn schreier_bases() {
        let m = MaximalSubgroup::new(vec![1, 0], 2).unwrap();
        let b = SchreierBasis::new(&m);
        assert_eq!(b.words(), vec![w("x1^2"), w("x2"), w("x1*x2*x1^-1")]);
        let m = MaximalSubgroup::new(vec![0, 1], 2).unwrap();
        let b = SchreierBasis::new(&m);
        assert_eq!(b.words(), vec![w("x2^2"), w("x1"), w("x2*x1*x2^-1")]);
        for m in enumerate_maximal(2, 3).unwrap() {
            assert_eq!(SchreierBasis::new(&m).len(), 4);
        }
        // Normalization: 2*lambda defines the same subgroup.
        assert_eq!(MaximalSubgroup::new(vec![2, 4], 3).unwrap().lambda, vec![1, 2]);
    }

    #[test]
    fn rewriting() {
        let b = SchreierBasis::new(&MaximalSubgroup::new(vec![1, 0], 2).unwrap());
        // generators: 1 = x1^2, 2 = x2, 3 = x1 x2 x1^-1
        assert_eq!(b.rewrite(&w("[x1,x2]")).unwrap(), w("x3*x2^-1"));
        let b = SchreierBasis::new(&MaximalSubgroup::new(vec![0, 1], 2).unwrap());
        // generators: 1 = x2^2, 2 = x1, 3 = x2 x1 x2^-1
        assert_eq!(b.rewrite(&w("x1^2")).unwrap(), w("x2^2"));
        assert_eq!(b.rewrite(&w("x2^2")).unwrap(), w("x1"));
        assert_eq!(
            b.rewrite(&w("x2")),
            Err(FrattiniError::NotInSubgroup { coset: 1 })
        );
    }

    #[test]
    fn rewrite_expands_back() {
        for p in [2u64, 3, 5] {
            for m in enumerate_maximal(3, p).unwrap() {
                let b = SchreierBasis::new(&m);
                for s in [
                    "[x1,x2]*x3^7",
                    "x1^11*x2^-4*x1^3",
                    "[[x1,x2],x3]^2",
                    "x2^-13*x3^6",
                ] {
                    let mut x = w(s);
                    let c = m.coset(&x);
                    if c != 0 {
                        // multiply by a power of the pivot to land in M
                        let k = (p - c) * mod_inverse(m.lambda[m.pivot as usize - 1], p) % p;
                        x = x.concat(&Word::generator_power(m.pivot, k as i64));
                    }
                    let v = b.rewrite(&x).unwrap();
                    assert_eq!(b.expand(&v).unwrap(), x, "p={p} lambda={:?} w={s}", m.lambda);
                }
            }
        }
    }

    #[test]
    fn almost_primitive_examples() {
        for p in [2, 3, 5] {
            let c = is_almost_primitive(&w("[x1,x2]"), 2, p).unwrap();
            assert_eq!(c.verdict, Verdict::AlmostPrimitive);
            assert_eq!(c.reasons.len(), 1 + (p as usize + 1) + 1);
        }
        let c = is_almost_primitive(&w("x1^2*x2^2"), 2, 2).unwrap();
        assert_eq!(c.verdict, Verdict::AlmostPrimitive);
        let c = is_almost_primitive(&w("x1^2"), 2, 2).unwrap();
        assert_eq!(c.verdict, Verdict::NotAlmostPrimitive);
        assert_eq!(
            c.witness,
            Some(Witness::MaximalSubgroup {
                index: 0,
                lambda: vec![0, 1]
            })
        );
        let c = is_almost_primitive(&w("x1"), 2, 2).unwrap();
        assert_eq!(c.verdict, Verdict::NotAlmostPrimitive);
        assert!(c.witness.is_none());
    }

    #[test]
    fn scan_refuses_beyond_bounds() {
        assert!(matches!(
            is_almost_primitive(&w("[x1,x2]"), 7, 2),
            Err(FrattiniError::OutOfBounds { .. })
        ));
        assert!(matches!(
            is_almost_primitive(&w("[x1,x2]"), 2, 17),
            Err(FrattiniError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn large_exponents_use_cycles() {
        let b = SchreierBasis::new(&MaximalSubgroup::new(vec![1, 1], 3).unwrap());
        let x = w("x1^3000000*x2^-3000000");
        let v = b.rewrite(&x).unwrap();
        assert_eq!(b.expand(&v).unwrap(), x);
    }
}
