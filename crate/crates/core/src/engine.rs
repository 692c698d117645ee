//! Rule-based certification of test elements in free pro-p and free discrete
//! groups, and constructive densification.
//!
//! Every certificate lists its reasons bottom-up: a reason about a word only
//! cites reasons that appear before it. Reasons about sub-words carry the
//! generator `block` of the free factor they live in.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{bezout, gcd_all, is_prime, prime_factors, residue};
use crate::certificate::{
    group, Certificate, GroupContext, Reason, RetractWitness, RuleId, Verdict, Witness,
};
use crate::frattini::{frattini_vector, is_almost_primitive_with, FrattiniError, ScanBounds};
use crate::word::{GeneratorSet, Word, WordError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Frattini(#[from] FrattiniError),
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("expected a word over at most {expected} generators, found x{found}")]
    RankMismatch { expected: usize, found: u32 },
    #[error("the identity is excluded here")]
    IdentityInput,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("search exhausted after {candidates} candidates without a certificate")]
    SearchExhausted { candidates: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineConfig {
    pub scan: ScanBounds,
    /// Primes tried by the discrete transfer rule besides those dividing the
    /// gcd of the exponent sums.
    pub transfer_primes: Vec<u64>,
    /// Largest multiplier `k` in the densification search.
    pub densify_multipliers: i64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            scan: ScanBounds::default(),
            transfer_primes: vec![2, 3, 5],
            densify_multipliers: 4,
        }
    }
}

fn require_prime(p: u64) -> Result<(), EngineError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(EngineError::NotPrime(p))
    }
}

fn check_rank(w: &Word, rank: usize) -> Result<GeneratorSet, EngineError> {
    let gens = GeneratorSet::new(rank)?;
    if let Some(g) = w.max_generator() {
        if g as usize > rank {
            return Err(EngineError::RankMismatch {
                expected: rank,
                found: g,
            });
        }
    }
    Ok(gens)
}

fn full_block(rank: usize) -> Vec<u32> {
    (1..=rank as u32).collect()
}

/// Exponent sums over the generators of `block`, in block order.
pub fn block_sigma(w: &Word, block: &[u32]) -> Vec<i64> {
    block.iter().map(|&g| w.exponent_sum(g)).collect()
}

/// Renames `block[i]` to `x(i+1)`.
pub fn normalize(w: &Word, block: &[u32]) -> Word {
    w.rename(|g| block.iter().position(|&b| b == g).expect("generator in block") as u32 + 1)
}

fn identity_images(upto: u32) -> Vec<Word> {
    (1..=upto).map(Word::generator).collect()
}

fn block_max(block: &[u32]) -> u32 {
    block.iter().copied().max().unwrap_or(0)
}

/// A bracket arrangement of distinct letters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bracket {
    Letter(u32),
    Comm(Box<Bracket>, Box<Bracket>),
}

impl fmt::Display for Bracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bracket::Letter(g) => write!(f, "x{g}"),
            Bracket::Comm(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// Splits `w = u v u^-1 v^-1` with `u`, `v` nontrivial over disjoint generators.
pub fn commutator_splits(w: &Word) -> Vec<(Word, Word)> {
    let l = w.syllable_len();
    if l < 4 || !l.is_multiple_of(2) {
        return vec![];
    }
    let half = l / 2;
    (1..half)
        .filter_map(|a| {
            let u = w.slice(0..a);
            let v = w.slice(a..half);
            if u.generators().is_disjoint(&v.generators()) && Word::commutator(&u, &v) == *w {
                Some((u, v))
            } else {
                None
            }
        })
        .collect()
}

fn bracket_of(w: &Word) -> Option<Bracket> {
    if let [(g, 1)] = w.syllables() {
        return Some(Bracket::Letter(*g));
    }
    commutator_splits(w).into_iter().find_map(|(u, v)| {
        let a = bracket_of(&u)?;
        let b = bracket_of(&v)?;
        Some(Bracket::Comm(Box::new(a), Box::new(b)))
    })
}

/// `w` is a commutator of weight `n` in which each of `x1..xn` occurs once.
pub fn is_higher_commutator(w: &Word, n: usize) -> Option<Bracket> {
    is_higher_commutator_block(w, &full_block(n))
}

pub fn is_higher_commutator_block(w: &Word, block: &[u32]) -> Option<Bracket> {
    if block.len() < 2 {
        return None;
    }
    if w.generators() != block.iter().copied().collect::<BTreeSet<u32>>() {
        return None;
    }
    bracket_of(w)
}

/// Cut points where the prefix and suffix use disjoint generators.
fn finest_factorization(w: &Word) -> Vec<Word> {
    let syl = w.syllables();
    let l = syl.len();
    let mut suffix: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); l + 1];
    for i in (0..l).rev() {
        suffix[i] = suffix[i + 1].clone();
        suffix[i].insert(syl[i].0);
    }
    let mut prefix = BTreeSet::new();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..l {
        prefix.insert(syl[i].0);
        if i + 1 < l && prefix.is_disjoint(&suffix[i + 1]) {
            out.push(w.slice(start..i + 1));
            start = i + 1;
        }
    }
    out.push(w.slice(start..l));
    out
}

/// Transports a retraction fixing `u` to one fixing `c u c^-1`.
fn conjugate_witness(w: Witness, c: &Word) -> Witness {
    let Witness::Retraction(r) = w else {
        return w;
    };
    if c.is_identity() {
        return Witness::Retraction(r);
    }
    let conj = |u: &Word| c.concat(u).concat(&c.inverse());
    let images = (1..=r.images.len() as u32)
        .map(|i| {
            let pulled = c.inverse().concat(&Word::generator(i)).concat(c);
            conj(&pulled.substitute(&r.images).expect("images cover the block"))
        })
        .collect();
    Witness::Retraction(RetractWitness {
        images,
        target: r.target.as_ref().map(conj),
        exponents: r.exponents,
    })
}

struct Outcome {
    verdict: Verdict,
    witness: Option<Witness>,
}

impl Outcome {
    fn of(verdict: Verdict) -> Self {
        Self {
            verdict,
            witness: None,
        }
    }
}

/// Proofs already attempted, keyed by word and generator block.
type ProofCache = HashMap<(Word, Vec<u32>), Option<Vec<Reason>>>;

/// `(n, k, alphas, parts, reasons)` of an arrangement-family match.
type FamilyMatch = (usize, usize, Vec<i64>, Vec<Word>, Vec<Reason>);

struct ProP<'a> {
    p: u64,
    cfg: &'a EngineConfig,
    cache: RefCell<ProofCache>,
}

impl<'a> ProP<'a> {
    fn new(p: u64, cfg: &'a EngineConfig) -> Self {
        Self {
            p,
            cfg,
            cache: RefCell::new(HashMap::new()),
        }
    }

    fn step(&self, rule: RuleId, w: &Word, block: &[u32], conclusion: Verdict) -> Reason {
        Reason::step(
            rule,
            w,
            block,
            group::PRO_P,
            Some(self.p),
            &conclusion.to_string(),
        )
    }

    fn in_phi(&self, sigma: &[i64]) -> bool {
        sigma.iter().all(|&s| residue(s, self.p) == 0)
    }

    /// Reasons proving `w` TEST in the free factor on `block`, if any rule does.
    fn prove_test(&self, w: &Word, block: &[u32]) -> Option<Vec<Reason>> {
        let key = (w.clone(), block.to_vec());
        if let Some(hit) = self.cache.borrow().get(&key) {
            return hit.clone();
        }
        let mut out = Vec::new();
        let mut attempted = Vec::new();
        let res = self.prove(w, block, &mut out, &mut attempted);
        let value = (res.verdict == Verdict::Test).then_some(out);
        self.cache.borrow_mut().insert(key, value.clone());
        value
    }

    fn prove(&self, w: &Word, block: &[u32], out: &mut Vec<Reason>, attempted: &mut Vec<RuleId>) -> Outcome {
        let n = block.len();
        if w.is_identity() {
            out.push(self.step(RuleId::Identity, w, block, Verdict::NotTest));
            let images = vec![Word::identity(); block_max(block) as usize];
            return Outcome {
                verdict: Verdict::NotTest,
                witness: Some(Witness::Retraction(RetractWitness {
                    images,
                    target: None,
                    exponents: None,
                })),
            };
        }
        if n == 1 {
            out.push(self.step(RuleId::Rank1Nontrivial, w, block, Verdict::Test));
            return Outcome::of(Verdict::Test);
        }
        let used = w.generators();
        if let Some(&missing) = block.iter().find(|g| !used.contains(g)) {
            out.push(
                self.step(RuleId::OmitsGenerator, w, block, Verdict::NotTest)
                    .with("missing", missing),
            );
            let mut images = identity_images(block_max(block));
            images[missing as usize - 1] = Word::identity();
            return Outcome {
                verdict: Verdict::NotTest,
                witness: Some(Witness::Retraction(RetractWitness {
                    images,
                    target: None,
                    exponents: None,
                })),
            };
        }
        let rd = w.max_root().expect("nonidentity");
        let root_sigma = block_sigma(&rd.root, block);
        if !self.in_phi(&root_sigma) {
            let root = rd.conjugator.concat(&rd.root).concat(&rd.conjugator.inverse());
            out.push(
                self.step(RuleId::PrimitiveRoot, w, block, Verdict::NotTest)
                    .with("root", &root)
                    .with("sigma", &root_sigma),
            );
            return Outcome {
                verdict: Verdict::NotTest,
                witness: Some(Witness::PrimitiveRoot {
                    root,
                    sigma: root_sigma,
                }),
            };
        }
        if rd.multiplicity > 1 || !rd.conjugator.is_identity() {
            let mut sub = self.prove(&rd.root, block, out, attempted);
            if sub.verdict == Verdict::Unknown {
                return sub;
            }
            sub.witness = sub.witness.map(|wt| conjugate_witness(wt, &rd.conjugator));
            out.push(
                self.step(RuleId::RootExtraction, w, block, sub.verdict)
                    .with("root", &rd.root)
                    .with("multiplicity", rd.multiplicity)
                    .with("conjugator", &rd.conjugator),
            );
            return sub;
        }
        // From here on: cyclically reduced, not a proper power, in Phi.
        if n == 2 {
            out.push(
                self.step(RuleId::Rank2Criterion, w, block, Verdict::Test)
                    .with("sigma", block_sigma(w, block)),
            );
            return Outcome::of(Verdict::Test);
        }
        if let Some(b) = is_higher_commutator_block(w, block) {
            out.push(
                self.step(RuleId::HigherCommutator, w, block, Verdict::Test)
                    .with("bracket", b.to_string()),
            );
            return Outcome::of(Verdict::Test);
        }
        attempted.push(RuleId::HigherCommutator);
        if self.cfg.scan.check(n, self.p).is_ok() {
            let local = normalize(w, block);
            if let Ok(c) = is_almost_primitive_with(&local, n, self.p, self.cfg.scan) {
                if c.verdict == Verdict::AlmostPrimitive {
                    out.push(
                        self.step(RuleId::AlmostPrimitive, w, block, Verdict::Test)
                            .with("subgroups_checked", c.reasons.len() - 2),
                    );
                    return Outcome::of(Verdict::Test);
                }
            }
        }
        attempted.push(RuleId::AlmostPrimitive);
        if let Some(rs) = self.substituted_powers(w, block) {
            out.extend(rs);
            return Outcome::of(Verdict::Test);
        }
        attempted.push(RuleId::SubstitutedPowers);
        if let Some(rs) = self.match_arrangement(w, block) {
            out.extend(rs);
            return Outcome::of(Verdict::Test);
        }
        attempted.push(RuleId::Arrangement);
        Outcome::of(Verdict::Unknown)
    }

    /// `w = base(x_i^{d_i})` with `d_i` the gcd of the exponents of `x_i`.
    fn substituted_powers(&self, w: &Word, block: &[u32]) -> Option<Vec<Reason>> {
        let d: Vec<i64> = block
            .iter()
            .map(|&g| {
                let exps: Vec<i64> = w.syllables().iter().filter(|s| s.0 == g).map(|s| s.1).collect();
                gcd_all(&exps)
            })
            .collect();
        if d.iter().all(|&x| x == 1) {
            return None;
        }
        let base = Word::from_syllables(w.syllables().iter().map(|&(g, e)| {
            let i = block.iter().position(|&b| b == g).expect("in block");
            (g, e / d[i])
        }));
        let mut rs = self.prove_test(&base, block)?;
        rs.push(
            self.step(RuleId::SubstitutedPowers, w, block, Verdict::Test)
                .with("base", &base)
                .with("exponents", &d),
        );
        Some(rs)
    }

    fn match_arrangement(&self, w: &Word, block: &[u32]) -> Option<Vec<Reason>> {
        let l = w.syllable_len();
        for k in 0..l {
            let conj = w.slice(0..k);
            let rot = w.rotate(k);
            let chunks = finest_factorization(&rot);
            let found = if chunks.len() >= 2 {
                self.match_product(&chunks)
            } else {
                self.match_single_commutator(&rot)
            };
            if let Some((n_pow, k_comm, alphas, parts, mut rs)) = found {
                let mut params = vec![n_pow as i64, k_comm as i64];
                params.extend(&alphas);
                let entry = format!(
                    "apfam({})",
                    params.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
                );
                let blocks: Vec<Vec<u32>> = parts
                    .iter()
                    .map(|u: &Word| u.generators().into_iter().collect())
                    .collect();
                rs.push(
                    self.step(RuleId::Arrangement, w, block, Verdict::Test)
                        .with("entry", entry)
                        .with("parts", &parts)
                        .with("blocks", &blocks)
                        .with("conjugator", &conj),
                );
                return Some(rs);
            }
        }
        None
    }

    /// `[u, v]` with `u`, `v` test elements of disjoint free factors.
    fn match_single_commutator(&self, w: &Word) -> Option<FamilyMatch> {
        let (u, v, rs) = self.commutator_slot(w)?;
        Some((0, 1, vec![], vec![u, v], rs))
    }

    fn commutator_slot(&self, chunk: &Word) -> Option<(Word, Word, Vec<Reason>)> {
        for (u, v) in commutator_splits(chunk) {
            let bu: Vec<u32> = u.generators().into_iter().collect();
            let bv: Vec<u32> = v.generators().into_iter().collect();
            let Some(mut rs) = self.prove_test(&u, &bu) else {
                continue;
            };
            let Some(rv) = self.prove_test(&v, &bv) else {
                continue;
            };
            rs.extend(rv);
            return Some((u, v, rs));
        }
        None
    }

    /// Factors `u_1^{a_1} .. u_n^{a_n} [v_1, v_2] ..` over disjoint generators,
    /// with every `a_i` divisible by p.
    fn match_product(&self, chunks: &[Word]) -> Option<FamilyMatch> {
        let mut alphas = Vec::new();
        let mut parts = Vec::new();
        let mut rs = Vec::new();
        let mut commutators = 0usize;
        for c in chunks {
            let rd = c.max_root().expect("chunks are nontrivial");
            if commutators == 0 && rd.multiplicity > 1 && rd.multiplicity % self.p == 0 {
                let u = rd.conjugator.concat(&rd.root).concat(&rd.conjugator.inverse());
                let bu: Vec<u32> = u.generators().into_iter().collect();
                rs.extend(self.prove_test(&u, &bu)?);
                alphas.push(rd.multiplicity as i64);
                parts.push(u);
                continue;
            }
            let (u, v, r) = self.commutator_slot(c)?;
            rs.extend(r);
            parts.push(u);
            parts.push(v);
            commutators += 1;
        }
        Some((alphas.len(), commutators, alphas, parts, rs))
    }
}

fn finish(
    input: &Word,
    context: GroupContext,
    outcome: Outcome,
    reasons: Vec<Reason>,
    attempted: Vec<RuleId>,
) -> Certificate {
    if outcome.verdict == Verdict::Unknown {
        Certificate {
            input: input.clone(),
            context,
            verdict: Verdict::Unknown,
            reasons: vec![],
            witness: None,
            attempted,
        }
    } else {
        Certificate {
            input: input.clone(),
            context,
            verdict: outcome.verdict,
            reasons,
            witness: outcome.witness,
            attempted: vec![],
        }
    }
}

/// Certifies `w` in the free pro-p group of rank `rank`.
pub fn certify_free_pro_p(
    w: &Word,
    rank: usize,
    p: u64,
    cfg: &EngineConfig,
) -> Result<Certificate, EngineError> {
    require_prime(p)?;
    check_rank(w, rank)?;
    let engine = ProP::new(p, cfg);
    let mut reasons = Vec::new();
    let mut attempted = Vec::new();
    let outcome = engine.prove(w, &full_block(rank), &mut reasons, &mut attempted);
    Ok(finish(
        w,
        GroupContext::free_pro_p(rank, p),
        outcome,
        reasons,
        attempted,
    ))
}

/// The rank-two criterion: for `w` not a p-th power, TEST iff both exponent
/// sums are divisible by p. A root whose multiplicity is divisible by p is
/// extracted first.
pub fn certify_rank2(w: &Word, p: u64) -> Result<Certificate, EngineError> {
    require_prime(p)?;
    check_rank(w, 2)?;
    if w.is_identity() {
        return Err(EngineError::IdentityInput);
    }
    let block = [1u32, 2];
    let rd = w.max_root()?;
    let mut reasons = Vec::new();
    let (target, extracted) = if rd.multiplicity % p == 0 {
        (rd.root.clone(), true)
    } else {
        (w.clone(), false)
    };
    let sigma = block_sigma(&target, &block);
    let verdict = if sigma.iter().all(|&s| residue(s, p) == 0) {
        Verdict::Test
    } else {
        Verdict::NotTest
    };
    reasons.push(
        Reason::step(
            RuleId::Rank2Criterion,
            &target,
            &block,
            group::PRO_P,
            Some(p),
            &verdict.to_string(),
        )
        .with("sigma", &sigma),
    );
    if extracted {
        reasons.push(
            Reason::step(
                RuleId::RootExtraction,
                w,
                &block,
                group::PRO_P,
                Some(p),
                &verdict.to_string(),
            )
            .with("root", &rd.root)
            .with("multiplicity", rd.multiplicity)
            .with("conjugator", &rd.conjugator),
        );
    }
    let witness = (verdict == Verdict::NotTest).then(|| {
        let root = rd.conjugator.concat(&rd.root).concat(&rd.conjugator.inverse());
        Witness::PrimitiveRoot {
            sigma: block_sigma(&rd.root, &block),
            root,
        }
    });
    Ok(Certificate {
        input: w.clone(),
        context: GroupContext::free_pro_p(2, p),
        verdict,
        reasons,
        witness,
        attempted: vec![],
    })
}

/// Matches `x_1^{s_1} .. x_m^{s_m} [x_{m+1}^{r_1}, x_{m+2}^{r_2}] ..` over the
/// block in order; returns the `s` exponents.
pub fn match_gcd_form(w: &Word, block: &[u32]) -> Option<Vec<i64>> {
    let syl = w.syllables();
    let n = block.len();
    (0..=n).rev().filter(|m| (n - m).is_multiple_of(2)).find_map(|m| {
        if syl.len() != m + 2 * (n - m) {
            return None;
        }
        let mut s = Vec::with_capacity(m);
        for i in 0..m {
            if syl[i].0 != block[i] {
                return None;
            }
            s.push(syl[i].1);
        }
        for j in 0..(n - m) / 2 {
            let (a, b) = (block[m + 2 * j], block[m + 2 * j + 1]);
            let q = &syl[m + 4 * j..m + 4 * j + 4];
            let (ra, rb) = (q[0].1, q[1].1);
            if q != [(a, ra), (b, rb), (a, -ra), (b, -rb)] {
                return None;
            }
        }
        Some(s)
    })
}

/// Retraction `x_i -> t^{l_i}` for the generators of `block` with a
/// coefficient, and `x_i -> 1` for the other block generators.
fn bezout_retraction(t: &Word, block: &[u32], coeffs: &[(u32, i64)]) -> RetractWitness {
    let mut images = identity_images(block_max(block));
    for &g in block {
        images[g as usize - 1] = Word::identity();
    }
    for &(g, l) in coeffs {
        images[g as usize - 1] = t.pow(l);
    }
    RetractWitness {
        images,
        target: Some(t.clone()),
        exponents: Some(coeffs.iter().map(|&(_, l)| l).collect()),
    }
}

struct Discrete<'a> {
    cfg: &'a EngineConfig,
}

impl Discrete<'_> {
    fn step(&self, rule: RuleId, w: &Word, block: &[u32], conclusion: Verdict) -> Reason {
        Reason::step(rule, w, block, group::DISCRETE, None, &conclusion.to_string())
    }

    fn prove(&self, w: &Word, block: &[u32], out: &mut Vec<Reason>, attempted: &mut Vec<RuleId>) -> Outcome {
        let n = block.len();
        if w.is_identity() {
            out.push(self.step(RuleId::Identity, w, block, Verdict::NotTest));
            return Outcome {
                verdict: Verdict::NotTest,
                witness: Some(Witness::Retraction(RetractWitness {
                    images: vec![Word::identity(); block_max(block) as usize],
                    target: None,
                    exponents: None,
                })),
            };
        }
        if n == 1 {
            out.push(self.step(RuleId::Rank1Nontrivial, w, block, Verdict::Test));
            return Outcome::of(Verdict::Test);
        }
        let used = w.generators();
        if let Some(&missing) = block.iter().find(|g| !used.contains(g)) {
            out.push(
                self.step(RuleId::OmitsGenerator, w, block, Verdict::NotTest)
                    .with("missing", missing),
            );
            let mut images = identity_images(block_max(block));
            images[missing as usize - 1] = Word::identity();
            return Outcome {
                verdict: Verdict::NotTest,
                witness: Some(Witness::Retraction(RetractWitness {
                    images,
                    target: None,
                    exponents: None,
                })),
            };
        }
        if let Some(s) = match_gcd_form(w, block) {
            let (g, l) = bezout(&s);
            if g != 1 {
                out.push(
                    self.step(RuleId::GcdForm, w, block, Verdict::Test)
                        .with("s", &s)
                        .with("gcd", g),
                );
                return Outcome::of(Verdict::Test);
            }
            let coeffs: Vec<(u32, i64)> = block[..s.len()].iter().copied().zip(l).collect();
            let r = bezout_retraction(w, block, &coeffs);
            out.push(
                self.step(RuleId::GcdForm, w, block, Verdict::NotTest)
                    .with("s", &s)
                    .with("gcd", g)
                    .with("bezout", r.exponents.as_ref()),
            );
            return Outcome {
                verdict: Verdict::NotTest,
                witness: Some(Witness::Retraction(r)),
            };
        }
        attempted.push(RuleId::GcdForm);
        let rd = w.max_root().expect("nonidentity");
        let root_sigma = block_sigma(&rd.root, block);
        let (g, l) = bezout(&root_sigma);
        if g == 1 {
            let t = rd.conjugator.concat(&rd.root).concat(&rd.conjugator.inverse());
            let coeffs: Vec<(u32, i64)> = block.iter().copied().zip(l).collect();
            let r = bezout_retraction(&t, block, &coeffs);
            out.push(
                self.step(RuleId::CyclicRetraction, w, block, Verdict::NotTest)
                    .with("root", &t)
                    .with("sigma", &root_sigma)
                    .with("bezout", r.exponents.as_ref()),
            );
            return Outcome {
                verdict: Verdict::NotTest,
                witness: Some(Witness::Retraction(r)),
            };
        }
        attempted.push(RuleId::CyclicRetraction);
        if rd.multiplicity > 1 || !rd.conjugator.is_identity() {
            let mut sub = self.prove(&rd.root, block, out, attempted);
            if sub.verdict == Verdict::Unknown {
                return sub;
            }
            sub.witness = sub.witness.map(|wt| conjugate_witness(wt, &rd.conjugator));
            out.push(
                self.step(RuleId::RootExtraction, w, block, sub.verdict)
                    .with("root", &rd.root)
                    .with("multiplicity", rd.multiplicity)
                    .with("conjugator", &rd.conjugator),
            );
            return sub;
        }
        let mut primes = prime_factors(gcd_all(&block_sigma(w, block)));
        for &q in &self.cfg.transfer_primes {
            if !primes.contains(&q) {
                primes.push(q);
            }
        }
        for q in primes {
            let engine = ProP::new(q, self.cfg);
            let mut rs = Vec::new();
            let mut ignored = Vec::new();
            if engine.prove(w, block, &mut rs, &mut ignored).verdict == Verdict::Test {
                out.extend(rs);
                out.push(
                    self.step(RuleId::Transfer, w, block, Verdict::Test)
                        .with("via_p", q),
                );
                return Outcome::of(Verdict::Test);
            }
        }
        attempted.push(RuleId::Transfer);
        Outcome::of(Verdict::Unknown)
    }
}

/// Certifies `w` in the free discrete group of rank `rank`.
pub fn certify_discrete(w: &Word, rank: usize, cfg: &EngineConfig) -> Result<Certificate, EngineError> {
    check_rank(w, rank)?;
    let engine = Discrete { cfg };
    let mut reasons = Vec::new();
    let mut attempted = Vec::new();
    let outcome = engine.prove(w, &full_block(rank), &mut reasons, &mut attempted);
    Ok(finish(
        w,
        GroupContext::free_discrete(rank),
        outcome,
        reasons,
        attempted,
    ))
}

/// Certifies `w` in the given context.
pub fn certify(w: &Word, ctx: &GroupContext, cfg: &EngineConfig) -> Result<Certificate, EngineError> {
    use crate::certificate::GroupKind;
    match ctx.kind {
        GroupKind::FreeProP => {
            let p = ctx
                .p
                .ok_or_else(|| EngineError::Precondition("free pro-p context needs p".into()))?;
            certify_free_pro_p(w, ctx.rank, p, cfg)
        }
        GroupKind::FreeDiscrete => certify_discrete(w, ctx.rank, cfg),
        other => Err(EngineError::Precondition(format!(
            "{other:?} words are certified through the demushkin module"
        ))),
    }
}

/// Outcome of a densification search.
#[derive(Debug, Clone, PartialEq)]
pub struct Densified {
    pub word: Word,
    pub certificate: Certificate,
    /// Prime used to make the exponent sums divisible (discrete search only).
    pub prime: u64,
    /// Candidates examined before success, including the winner.
    pub candidates: usize,
}

fn subsets_by_size(n: usize) -> Vec<Vec<u32>> {
    let mut all: Vec<Vec<u32>> = (0u32..1 << n)
        .map(|mask| {
            (0..n as u32)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| i + 1)
                .collect()
        })
        .collect();
    all.sort_by(|a: &Vec<u32>, b: &Vec<u32>| a.len().cmp(&b.len()).then(a.cmp(b)));
    all
}

/// First candidate (in order) whose certificate is TEST; candidates are
/// certified concurrently, the winner does not depend on scheduling.
fn search<F>(candidates: Vec<Word>, certify_one: F) -> Result<(Word, Certificate, usize), EngineError>
where
    F: Fn(&Word) -> Result<Certificate, EngineError> + Sync,
{
    let total = candidates.len();
    let results: Vec<Option<Certificate>> = candidates
        .par_iter()
        .map(|t| certify_one(t).ok().filter(|c| c.verdict == Verdict::Test))
        .collect();
    results
        .into_iter()
        .zip(candidates)
        .enumerate()
        .find_map(|(i, (c, t))| c.map(|c| (t, c, i + 1)))
        .ok_or(EngineError::SearchExhausted { candidates: total })
}

fn candidates(base: &Word, n: usize, unit: i64, multipliers: i64) -> Vec<Word> {
    let subsets = subsets_by_size(n);
    let mut out = Vec::new();
    for k in 1..=multipliers {
        for s in &subsets {
            let tail = Word::from_syllables(s.iter().map(|&i| (i, k * unit)));
            out.push(base.concat(&tail));
        }
    }
    out
}

/// A TEST element `t` of the free discrete group with `sigma(t) = sigma(w)`
/// mod `m` coordinatewise.
pub fn densify_discrete(w: &Word, n: usize, m: i64, cfg: &EngineConfig) -> Result<Densified, EngineError> {
    let gens = check_rank(w, n)?;
    if m < 2 {
        return Err(EngineError::Precondition("modulus must be at least 2".into()));
    }
    let p = (2u64..)
        .find(|&q| is_prime(q) && m % q as i64 != 0)
        .expect("some prime does not divide m");
    let pi = p as i64;
    let sigma = gens.sigma_vector(w);
    let shift = Word::from_syllables(sigma.iter().enumerate().map(|(i, &k)| {
        let r = (0..pi)
            .find(|r| (k + r * m).rem_euclid(pi) == 0)
            .expect("m is a unit mod p");
        (i as u32 + 1, r * m)
    }));
    let base = w.concat(&shift);
    let cands = candidates(&base, n, pi * m, cfg.densify_multipliers);
    let (word, certificate, candidates) = search(cands, |t| certify_discrete(t, n, cfg))?;
    Ok(Densified {
        word,
        certificate,
        prime: p,
        candidates,
    })
}

/// A TEST element `t` of the free pro-p group with `sigma(t) = sigma(w)` mod
/// `p^s`, for `w` in the Frattini subgroup.
pub fn densify_pro_p(
    w: &Word,
    n: usize,
    p: u64,
    s: u32,
    cfg: &EngineConfig,
) -> Result<Densified, EngineError> {
    require_prime(p)?;
    check_rank(w, n)?;
    if s < 1 {
        return Err(EngineError::Precondition("level must be at least 1".into()));
    }
    if !frattini_vector(w, n, p)?.in_frattini() {
        return Err(EngineError::Precondition(
            "the word is primitive, not in the Frattini subgroup".into(),
        ));
    }
    let unit = (p as i64)
        .checked_pow(s + 1)
        .ok_or_else(|| EngineError::Precondition("level too large".into()))?;
    let cands = candidates(w, n, unit, cfg.densify_multipliers);
    let (word, certificate, candidates) = search(cands, |t| certify_free_pro_p(t, n, p, cfg))?;
    Ok(Densified {
        word,
        certificate,
        prime: p,
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn cfg() -> EngineConfig {
        EngineConfig::default()
    }

    #[test]
    fn rank2_examples() {
        assert_eq!(certify_rank2(&w("[x1,x2]"), 5).unwrap().verdict, Verdict::Test);
        assert_eq!(certify_rank2(&w("x1^2*x2^2"), 2).unwrap().verdict, Verdict::Test);
        let c = certify_rank2(&w("x1*x2^2"), 2).unwrap();
        assert_eq!(c.verdict, Verdict::NotTest);
        assert!(matches!(c.witness, Some(Witness::PrimitiveRoot { .. })));
        // (x1 x2)^2 with p = 2: root x1 x2 is primitive.
        assert_eq!(
            certify_rank2(&w("(x1*x2)^2"), 2).unwrap().verdict,
            Verdict::NotTest
        );
        assert_eq!(certify_rank2(&w("[x1,x2]^3"), 3).unwrap().reasons.len(), 2);
        assert_eq!(
            certify_rank2(&Word::identity(), 2),
            Err(EngineError::IdentityInput)
        );
        assert!(matches!(
            certify_rank2(&w("x3"), 2),
            Err(EngineError::RankMismatch { .. })
        ));
    }

    #[test]
    fn pro_p_examples() {
        let c = certify_free_pro_p(&w("[[x1,x2],x3]"), 3, 3, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::Test);
        assert_eq!(c.reasons.last().unwrap().rule, RuleId::HigherCommutator);
        let c = certify_free_pro_p(&w("x1^3*x2^3*[x3,x4]"), 4, 3, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::Test);
        let c = certify_free_pro_p(&w("x1"), 2, 2, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::NotTest);
        let c = certify_free_pro_p(&w("[x1,x2]"), 3, 2, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::NotTest);
        assert_eq!(c.reasons[0].rule, RuleId::OmitsGenerator);
        let c = certify_free_pro_p(&Word::identity(), 1, 2, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::NotTest);
        let c = certify_free_pro_p(&w("x1^5"), 1, 2, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::Test);
    }

    #[test]
    fn unknown_lists_attempts() {
        // x1^2 x2^2 x3 x1^2 x3^-1 ... pick a word no rule settles.
        let c = certify_free_pro_p(&w("x1^2*x2^2*x3^2*x1^2*x2^2*x3^4"), 3, 2, &cfg()).unwrap();
        if c.verdict == Verdict::Unknown {
            assert!(c.reasons.is_empty());
            assert!(!c.attempted.is_empty());
        }
    }

    #[test]
    fn higher_commutators() {
        assert!(is_higher_commutator(&w("[x1,x2]"), 2).is_some());
        let b = is_higher_commutator(&w("[[x1,x3],x2]"), 3).unwrap();
        assert_eq!(b.to_string(), "[[x1,x3],x2]");
        assert!(is_higher_commutator(&w("[x1,x1]"), 2).is_none());
        assert!(is_higher_commutator(&w("[x1^2,x2]"), 2).is_none());
        assert!(is_higher_commutator(&w("[[x1,x2],[x3,x4]]"), 4).is_some());
    }

    #[test]
    fn discrete_examples() {
        assert_eq!(
            certify_discrete(&w("x1^3*x2^6"), 2, &cfg()).unwrap().verdict,
            Verdict::Test
        );
        let c = certify_discrete(&w("x1^2*x2^3"), 2, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::NotTest);
        let t = w("x1^2*x2^3");
        match &c.witness {
            Some(Witness::Retraction(r)) => {
                assert_eq!(r.images, vec![t.pow(-1), t.clone()]);
                assert_eq!(r.exponents, Some(vec![-1, 1]));
                assert!(r.verify(&t));
            }
            other => panic!("unexpected witness {other:?}"),
        }
        assert_eq!(
            certify_discrete(&w("[x1,x2]*[x3,x4]"), 4, &cfg())
                .unwrap()
                .verdict,
            Verdict::Test
        );
        let c = certify_discrete(&w("x1*x2*x1^2*x2"), 2, &cfg()).unwrap();
        assert_eq!(c.verdict, Verdict::NotTest);
        assert_eq!(
            certify_discrete(&w("[[x1,x2],x3]"), 3, &cfg()).unwrap().verdict,
            Verdict::Test
        );
    }

    #[test]
    fn gcd_form_matching() {
        assert_eq!(match_gcd_form(&w("x1^2*x2^3"), &[1, 2]), Some(vec![2, 3]));
        assert_eq!(match_gcd_form(&w("[x1,x2]"), &[1, 2]), Some(vec![]));
        assert_eq!(match_gcd_form(&w("x1^4*[x2^2,x3^-1]"), &[1, 2, 3]), Some(vec![4]));
        assert_eq!(match_gcd_form(&w("x2*x1"), &[1, 2]), None);
    }

    #[test]
    fn densify_examples() {
        let d = densify_discrete(&w("x1"), 2, 6, &cfg()).unwrap();
        assert_eq!(d.word, w("x1^25*x2^30"));
        assert_eq!(d.prime, 5);
        let d = densify_discrete(&w("[x1,x2]"), 2, 3, &cfg()).unwrap();
        assert_eq!(d.word, w("[x1,x2]"));
        let d = densify_discrete(&w("x1*x2"), 2, 4, &cfg()).unwrap();
        for i in 1..=2 {
            assert_eq!((d.word.exponent_sum(i) - 1).rem_euclid(4), 0);
        }
        let d = densify_pro_p(&w("x1^4"), 2, 2, 2, &cfg()).unwrap();
        assert_eq!(d.word, w("x1^4*x2^8"));
        let d = densify_pro_p(&w("x1^2*x2^-2"), 2, 2, 1, &cfg()).unwrap();
        assert_eq!(d.word, w("x1^2*x2^-2"));
        assert!(matches!(
            densify_pro_p(&w("x1"), 2, 2, 1, &cfg()),
            Err(EngineError::Precondition(_))
        ));
    }

    #[test]
    fn arrangement_matching() {
        for s in [
            "[x1,x2]^2*x3^4",
            "x1^6*[x2^2*x3^2,x4]",
            "[x1^2*x2^2,[x3,x4]]",
            "x3^2*[x1,x2]",
        ] {
            let c = certify_free_pro_p(&w(s), w(s).max_generator().unwrap() as usize, 2, &cfg()).unwrap();
            assert_eq!(c.verdict, Verdict::Test, "{s}");
        }
    }
}
