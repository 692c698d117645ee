//! Independent re-verification of certificates.
//!
//! Every reason is re-checked from its recorded details. Premises are looked
//! up among the reasons listed before it.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::arith::{bezout, divisible, gcd_all, is_prime, residue};
use crate::arrangement::{parse_arrangement, Catalog};
use crate::certificate::{group, Certificate, GroupKind, Reason, RuleId, Verdict, Witness};
use crate::demushkin::{
    check_demushkin_test, check_demushkin_test_2, check_surface_test, nonorientable_relator,
    substitute_powers, surface_relator, DemushkinInvariants,
};
use crate::engine::{block_sigma, is_higher_commutator_block, match_gcd_form, normalize};
use crate::frattini::{
    check_subgroup, enumerate_maximal, frattini_vector, is_almost_primitive, MaximalSubgroup,
};
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("step {step}: {msg}")]
pub struct ReplayError {
    /// Index into `reasons`, or `reasons.len()` for whole-certificate checks.
    pub step: usize,
    pub msg: String,
}

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn detail<T: serde::de::DeserializeOwned>(r: &Reason, key: &str) -> Result<T, String> {
    r.get(key)
        .ok_or_else(|| format!("missing or malformed detail {key:?}"))
}

/// The fields every reason carries.
struct Head {
    word: Word,
    block: Vec<u32>,
    group: String,
    p: Option<u64>,
    conclusion: String,
}

fn head(r: &Reason) -> Result<Head, String> {
    Ok(Head {
        word: detail(r, "word")?,
        block: detail(r, "block")?,
        group: detail(r, "group")?,
        p: r.get("p"),
        conclusion: detail(r, "conclusion")?,
    })
}

fn test_str() -> String {
    Verdict::Test.to_string()
}

fn not_test_str() -> String {
    Verdict::NotTest.to_string()
}

struct Replayer<'a> {
    reasons: &'a [Reason],
    catalog: &'a Catalog,
}

impl Replayer<'_> {
    /// An earlier reason concluding `conclusion` for `word` on `block`.
    fn premise(
        &self,
        before: usize,
        word: &Word,
        block: &[u32],
        group: &str,
        p: Option<u64>,
        conclusion: &str,
    ) -> Check {
        let found = self.reasons[..before].iter().any(|r| {
            head(r).is_ok_and(|h| {
                h.word == *word
                    && h.block == block
                    && h.group == group
                    && h.p == p
                    && h.conclusion == conclusion
            })
        });
        ensure(found, || {
            format!("no earlier reason concludes {conclusion} for {word} on {block:?} ({group})")
        })
    }

    fn free_group(h: &Head) -> Check {
        match h.group.as_str() {
            group::PRO_P => ensure(h.p.is_some_and(is_prime), || "pro-p step needs a prime p".into()),
            group::DISCRETE => ensure(h.p.is_none(), || "discrete step carries no p".into()),
            other => Err(format!("rule applies to free groups, not {other}")),
        }
    }

    fn pro_p(h: &Head) -> Result<u64, String> {
        ensure(h.group == group::PRO_P, || {
            format!("expected group {}", group::PRO_P)
        })?;
        h.p.filter(|&p| is_prime(p))
            .ok_or_else(|| "pro-p step needs a prime p".into())
    }

    fn check(&self, i: usize) -> Check {
        let r = &self.reasons[i];
        ensure(r.statement == r.rule.statement(), || {
            "statement does not match the rule".into()
        })?;
        let h = head(r)?;
        let block_set: BTreeSet<u32> = h.block.iter().copied().collect();
        ensure(block_set.len() == h.block.len() && !h.block.contains(&0), || {
            "block must list distinct generators".into()
        })?;
        let within = h.word.generators().is_subset(&block_set);
        let conclude = |expected: String| {
            ensure(h.conclusion == expected, || {
                format!("conclusion {} should be {expected}", h.conclusion)
            })
        };
        match r.rule {
            RuleId::Identity => {
                ensure(h.word.is_identity(), || "word is not the identity".into())?;
                conclude(not_test_str())
            }
            RuleId::Rank1Nontrivial => {
                ensure(h.block.len() == 1 && within && !h.word.is_identity(), || {
                    "needs a nontrivial word in a rank-one factor".into()
                })?;
                conclude(test_str())
            }
            RuleId::OmitsGenerator => {
                let missing: u32 = detail(r, "missing")?;
                ensure(
                    within && block_set.contains(&missing) && !h.word.generators().contains(&missing),
                    || format!("x{missing} is not an omitted block generator"),
                )?;
                conclude(not_test_str())
            }
            RuleId::PrimitiveRoot => {
                let p = Self::pro_p(&h)?;
                let root: Word = detail(r, "root")?;
                let sigma: Vec<i64> = detail(r, "sigma")?;
                let rd = h.word.max_root().map_err(|e| e.to_string())?;
                let conj_root = rd.conjugator.concat(&rd.root).concat(&rd.conjugator.inverse());
                ensure(root == conj_root, || "root does not match the word".into())?;
                ensure(sigma == block_sigma(&rd.root, &h.block), || {
                    "sigma mismatch".into()
                })?;
                ensure(h.block.len() >= 2 && within, || "needs rank at least two".into())?;
                ensure(sigma.iter().any(|&s| residue(s, p) != 0), || {
                    "root lies in the Frattini subgroup".into()
                })?;
                conclude(not_test_str())
            }
            RuleId::RootExtraction => {
                Self::free_group(&h)?;
                let root: Word = detail(r, "root")?;
                let m: u64 = detail(r, "multiplicity")?;
                let c: Word = detail(r, "conjugator")?;
                ensure(m >= 1, || "multiplicity must be positive".into())?;
                let rebuilt = c.concat(&root.pow(m as i64)).concat(&c.inverse());
                ensure(rebuilt == h.word && within, || {
                    "word is not conjugator * root^m * conjugator^-1".into()
                })?;
                ensure(!root.is_identity(), || "root is trivial".into())?;
                self.premise(i, &root, &h.block, &h.group, h.p, &h.conclusion)
            }
            RuleId::Rank2Criterion => {
                let p = Self::pro_p(&h)?;
                ensure(h.block.len() == 2 && within && !h.word.is_identity(), || {
                    "needs a nontrivial word of rank two".into()
                })?;
                let rd = h.word.max_root().map_err(|e| e.to_string())?;
                ensure(rd.multiplicity % p != 0, || "word is a p-th power".into())?;
                let sigma = block_sigma(&h.word, &h.block);
                if let Some(recorded) = r.get::<Vec<i64>>("sigma") {
                    ensure(recorded == sigma, || "sigma mismatch".into())?;
                }
                let in_phi = sigma.iter().all(|&s| residue(s, p) == 0);
                conclude(if in_phi { test_str() } else { not_test_str() })
            }
            RuleId::HigherCommutator => {
                Self::free_group(&h)?;
                ensure(is_higher_commutator_block(&h.word, &h.block).is_some(), || {
                    "not a higher commutator of the block".into()
                })?;
                conclude(test_str())
            }
            RuleId::AlmostPrimitive => {
                let p = Self::pro_p(&h)?;
                ensure(within, || "word leaves the block".into())?;
                let local = normalize(&h.word, &h.block);
                let c = is_almost_primitive(&local, h.block.len(), p).map_err(|e| e.to_string())?;
                ensure(c.verdict == Verdict::AlmostPrimitive, || {
                    "word is not almost primitive".into()
                })?;
                conclude(test_str())
            }
            RuleId::SubstitutedPowers => {
                Self::free_group(&h)?;
                let base: Word = detail(r, "base")?;
                let d: Vec<i64> = detail(r, "exponents")?;
                ensure(d.len() == h.block.len() && d.iter().all(|&x| x != 0), || {
                    "exponents must be nonzero, one per block generator".into()
                })?;
                let images: Vec<Word> = (1..=*h.block.iter().max().unwrap_or(&0))
                    .map(|g| match h.block.iter().position(|&b| b == g) {
                        Some(k) => Word::generator_power(g, d[k]),
                        None => Word::generator(g),
                    })
                    .collect();
                ensure(base.generators().is_subset(&block_set), || {
                    "base leaves the block".into()
                })?;
                let sub = base.substitute(&images).map_err(|e| e.to_string())?;
                ensure(sub == h.word, || "word is not base(x_i^d_i)".into())?;
                self.premise(i, &base, &h.block, &h.group, h.p, &test_str())?;
                conclude(test_str())
            }
            RuleId::Arrangement => self.check_arrangement(i, r, &h),
            RuleId::GcdForm => {
                ensure(h.group == group::DISCRETE, || {
                    "gcd form is a discrete rule".into()
                })?;
                let s: Vec<i64> = detail(r, "s")?;
                let g: i64 = detail(r, "gcd")?;
                ensure(match_gcd_form(&h.word, &h.block) == Some(s.clone()), || {
                    "word is not in gcd form".into()
                })?;
                ensure(gcd_all(&s) == g, || "gcd mismatch".into())?;
                conclude(if g != 1 { test_str() } else { not_test_str() })
            }
            RuleId::CyclicRetraction => {
                ensure(h.group == group::DISCRETE, || {
                    "cyclic retraction is a discrete rule".into()
                })?;
                ensure(h.block.len() >= 2 && within, || "needs rank at least two".into())?;
                let rd = h.word.max_root().map_err(|e| e.to_string())?;
                let sigma = block_sigma(&rd.root, &h.block);
                ensure(bezout(&sigma).0 == 1, || {
                    "root exponent sums are not coprime".into()
                })?;
                conclude(not_test_str())
            }
            RuleId::Transfer => {
                ensure(h.group == group::DISCRETE && h.p.is_none(), || {
                    "transfer concludes in a discrete group".into()
                })?;
                let q: u64 = detail(r, "via_p")?;
                ensure(is_prime(q), || "via_p must be prime".into())?;
                self.premise(i, &h.word, &h.block, group::PRO_P, Some(q), &test_str())?;
                conclude(test_str())
            }
            RuleId::FrattiniMembership => {
                let p = Self::pro_p(&h)?;
                let fv = frattini_vector(&h.word, h.block.len(), p).map_err(|e| e.to_string())?;
                conclude(if fv.in_frattini() {
                    "IN_FRATTINI".into()
                } else {
                    "PRIMITIVE".into()
                })
            }
            RuleId::MaximalSubgroupCheck => {
                let p = Self::pro_p(&h)?;
                let index: usize = detail(r, "index")?;
                let lambda: Vec<u64> = detail(r, "lambda")?;
                let subs = enumerate_maximal(h.block.len(), p).map_err(|e| e.to_string())?;
                ensure(subs.get(index).is_some_and(|m| m.lambda == lambda), || {
                    "index does not match lambda".into()
                })?;
                let m = MaximalSubgroup::new(lambda, p).ok_or("invalid lambda")?;
                let c = check_subgroup(&h.word, index, &m).map_err(|e| e.to_string())?;
                let rewritten: Word = detail(r, "rewritten")?;
                ensure(rewritten == c.rewritten, || "Schreier rewrite mismatch".into())?;
                conclude(if c.outside_phi {
                    "OUTSIDE_PHI_M".into()
                } else {
                    "INSIDE_PHI_M".into()
                })
            }
            RuleId::ApCharacterization => {
                let p = Self::pro_p(&h)?;
                let n = h.block.len();
                let earlier: Vec<Head> = self.reasons[..i]
                    .iter()
                    .filter(|x| matches!(x.rule, RuleId::FrattiniMembership | RuleId::MaximalSubgroupCheck))
                    .filter_map(|x| head(x).ok())
                    .filter(|x| x.word == h.word && x.block == h.block && x.p == Some(p))
                    .collect();
                let phi = earlier.iter().any(|x| x.conclusion == "IN_FRATTINI");
                let primitive = earlier.iter().any(|x| x.conclusion == "PRIMITIVE");
                let outside: BTreeSet<usize> = self.reasons[..i]
                    .iter()
                    .filter(|x| x.rule == RuleId::MaximalSubgroupCheck)
                    .filter(|x| {
                        head(x).is_ok_and(|y| {
                            y.word == h.word && y.block == h.block && y.conclusion == "OUTSIDE_PHI_M"
                        })
                    })
                    .filter_map(|x| x.get::<usize>("index"))
                    .collect();
                let total = enumerate_maximal(n, p).map_err(|e| e.to_string())?.len();
                let inside = earlier.iter().any(|x| x.conclusion == "INSIDE_PHI_M");
                let verdict = if phi && outside.len() == total {
                    Verdict::AlmostPrimitive
                } else if primitive || inside {
                    Verdict::NotAlmostPrimitive
                } else {
                    return Err("premises neither prove nor refute almost primitivity".into());
                };
                conclude(verdict.to_string())
            }
            RuleId::ArrangementLeaf => {
                let p = Self::pro_p(&h)?;
                let entry: String = detail(r, "entry")?;
                let a = parse_arrangement(&entry, self.catalog).map_err(|e| e.to_string())?;
                ensure(a.is_leaf(), || "leaf entry has children".into())?;
                a.check_admissible(self.catalog, p).map_err(|e| e.to_string())?;
                let offset = *h.block.first().ok_or("empty block")? - 1;
                let contiguous: Vec<u32> = (offset + 1..=offset + a.weight() as u32).collect();
                ensure(h.block == contiguous, || "block does not fit the entry".into())?;
                ensure(a.expand().shift(offset) == h.word, || {
                    "word is not the shifted template".into()
                })?;
                conclude(test_str())
            }
            RuleId::ArrangementCompose => {
                let p = Self::pro_p(&h)?;
                let entry: String = detail(r, "entry")?;
                let parts: Vec<Word> = detail(r, "parts")?;
                let blocks: Vec<Vec<u32>> = detail(r, "blocks")?;
                let a = parse_arrangement(&entry, self.catalog).map_err(|e| e.to_string())?;
                ensure(a.is_leaf(), || "compose entry is given without children".into())?;
                a.check_admissible(self.catalog, p).map_err(|e| e.to_string())?;
                ensure(
                    parts.len() == a.entry.arity && blocks.len() == parts.len(),
                    || "arity mismatch".into(),
                )?;
                let joined: Vec<u32> = blocks.concat();
                ensure(joined == h.block, || {
                    "blocks do not partition the block in order".into()
                })?;
                for (u, b) in parts.iter().zip(&blocks) {
                    self.premise(i, u, b, group::PRO_P, Some(p), &test_str())?;
                }
                let w = a.expand().substitute(&parts).map_err(|e| e.to_string())?;
                ensure(w == h.word, || {
                    "word is not the template applied to the parts".into()
                })?;
                conclude(test_str())
            }
            RuleId::DemushkinTest | RuleId::DemushkinTest2 => self.check_demushkin(i, r, &h),
            RuleId::SurfaceTest | RuleId::SurfaceTest2 => self.check_surface(i, r, &h),
            RuleId::NonOrientable => self.check_nonorientable(i, r, &h),
        }
    }

    fn check_arrangement(&self, i: usize, r: &Reason, h: &Head) -> Check {
        let p = Self::pro_p(h)?;
        let entry: String = detail(r, "entry")?;
        let parts: Vec<Word> = detail(r, "parts")?;
        let blocks: Vec<Vec<u32>> = detail(r, "blocks")?;
        let conj: Word = detail(r, "conjugator")?;
        let params: Vec<i64> = entry
            .strip_prefix("apfam(")
            .and_then(|s| s.strip_suffix(')'))
            .ok_or("entry must be apfam(..)")?
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i64>()
                    .map_err(|_| "bad apfam parameter".to_string())
            })
            .collect::<Result<_, _>>()?;
        let (n, k) = match params[..] {
            [n, k, ..] if n >= 0 && k >= 0 => (n as usize, k as usize),
            _ => return Err("apfam needs n and k".into()),
        };
        let alphas = &params[2..];
        ensure(
            alphas.len() == n && parts.len() == n + 2 * k && blocks.len() == parts.len(),
            || "apfam arity mismatch".into(),
        )?;
        ensure(n + 2 * k >= 2, || "a single part is not an arrangement".into())?;
        ensure(alphas.iter().all(|&a| a != 0 && divisible(a, p)), || {
            "power exponents must be nonzero multiples of p".into()
        })?;
        let mut union = BTreeSet::new();
        for (u, b) in parts.iter().zip(&blocks) {
            for &g in b {
                ensure(union.insert(g), || "blocks overlap".into())?;
            }
            let bs: BTreeSet<u32> = b.iter().copied().collect();
            ensure(u.generators().is_subset(&bs), || "part leaves its block".into())?;
            self.premise(i, u, b, group::PRO_P, Some(p), &test_str())?;
        }
        let block_set: BTreeSet<u32> = h.block.iter().copied().collect();
        ensure(union == block_set, || "blocks do not cover the block".into())?;
        let mut body = Word::identity();
        for (u, &a) in parts.iter().zip(alphas) {
            body = body.concat(&u.pow(a));
        }
        for j in 0..k {
            body = body.concat(&Word::commutator(&parts[n + 2 * j], &parts[n + 2 * j + 1]));
        }
        let w = conj.concat(&body).concat(&conj.inverse());
        ensure(w == h.word, || "word does not match the arrangement".into())?;
        ensure(h.conclusion == test_str(), || "arrangement concludes TEST".into())
    }

    fn transported(&self, i: usize, h: &Head, w: &Word, k: usize, p: u64, expected: &Word) -> Check {
        let free: Vec<u32> = (1..=k as u32).collect();
        self.premise(i, w, &free, group::PRO_P, Some(p), &test_str())?;
        ensure(*expected == h.word, || {
            "word is not the substituted conclusion".into()
        })?;
        ensure(h.conclusion == test_str(), || "conclusion must be TEST".into())
    }

    fn check_demushkin(&self, i: usize, r: &Reason, h: &Head) -> Check {
        ensure(h.group == group::DEMUSHKIN, || "expected a Demushkin step".into())?;
        let p = h.p.ok_or("missing p")?;
        let w: Word = detail(r, "w")?;
        let alphas: Vec<i64> = detail(r, "alphas")?;
        let inv: DemushkinInvariants = detail(r, "invariants")?;
        inv.validate().map_err(|e| e.to_string())?;
        ensure(inv.p == p && h.block.len() == inv.d, || {
            "invariants do not match the step".into()
        })?;
        let check = if r.rule == RuleId::DemushkinTest {
            check_demushkin_test(inv.d, p, alphas.len(), &alphas)
        } else {
            ensure(p == 2, || "the pro-2 variant needs p = 2".into())?;
            check_demushkin_test_2(inv.d, &alphas)
        }
        .map_err(|e| e.to_string())?;
        ensure(check.decision.accepted(), || {
            format!("hypotheses fail: {}", check.decision)
        })?;
        let t = substitute_powers(&w, &alphas).map_err(|e| e.to_string())?;
        self.transported(i, h, &w, alphas.len(), p, &t)
    }

    fn check_surface(&self, i: usize, r: &Reason, h: &Head) -> Check {
        ensure(h.group == group::SURFACE, || {
            "expected an orientable surface step".into()
        })?;
        let p = h.p.ok_or("missing p")?;
        let w: Word = detail(r, "w")?;
        let s: Vec<i64> = detail(r, "s")?;
        let genus: usize = detail(r, "genus")?;
        let relator: Word = detail(r, "relator")?;
        ensure(
            relator == surface_relator(genus) && h.block.len() == 2 * genus,
            || "presentation mismatch".into(),
        )?;
        if r.rule == RuleId::SurfaceTest {
            let c = check_surface_test(genus, p, &s).map_err(|e| e.to_string())?;
            ensure(c.decision.accepted(), || {
                format!("hypotheses fail: {}", c.decision)
            })?;
        } else {
            ensure(
                genus == 2 && p == 2 && s.len() == 4 && s.iter().all(|&a| a != 0 && a % 2 == 0),
                || "needs genus 2, p = 2 and four even nonzero exponents".into(),
            )?;
        }
        let t = substitute_powers(&w, &s).map_err(|e| e.to_string())?;
        self.transported(i, h, &w, s.len(), p, &t)
    }

    fn check_nonorientable(&self, i: usize, r: &Reason, h: &Head) -> Check {
        ensure(h.group == group::NON_ORIENTABLE, || {
            "expected a non-orientable surface step".into()
        })?;
        let p = h.p.ok_or("missing p")?;
        let w: Word = detail(r, "w")?;
        let letters: Vec<u32> = detail(r, "letters")?;
        let genus: usize = detail(r, "genus")?;
        ensure(p >= 3 && is_prime(p) && genus >= 3, || {
            "needs p >= 3 and genus >= 3".into()
        })?;
        let distinct: BTreeSet<u32> = letters.iter().copied().collect();
        ensure(
            letters.len() == genus - 1
                && distinct.len() == letters.len()
                && letters.iter().all(|&l| l >= 1 && l as usize <= genus),
            || "letters must be n - 1 distinct generators".into(),
        )?;
        let relator = nonorientable_relator(genus);
        ensure(
            (1..=genus as u32).any(|g| residue(relator.exponent_sum(g), p) != 0),
            || "relator is not primitive".into(),
        )?;
        let images: Vec<Word> = letters.iter().map(|&l| Word::generator(l)).collect();
        let t = w.substitute(&images).map_err(|e| e.to_string())?;
        self.transported(i, h, &w, genus - 1, p, &t)
    }
}

fn context_group(kind: GroupKind) -> &'static str {
    match kind {
        GroupKind::FreeProP => group::PRO_P,
        GroupKind::FreeDiscrete => group::DISCRETE,
        GroupKind::OrientableSurface => group::SURFACE,
        GroupKind::NonOrientableSurface => group::NON_ORIENTABLE,
        GroupKind::Demushkin => group::DEMUSHKIN,
    }
}

fn check_witness(cert: &Certificate) -> Check {
    let Some(w) = &cert.witness else {
        return Ok(());
    };
    match w {
        Witness::Retraction(r) => ensure(r.verify(&cert.input), || {
            "retraction witness does not verify".into()
        }),
        Witness::PrimitiveRoot { root, sigma } => {
            let p = cert.context.p.ok_or("primitive-root witness needs p")?;
            let rd = cert.input.max_root().map_err(|e| e.to_string())?;
            let conj_root = rd.conjugator.concat(&rd.root).concat(&rd.conjugator.inverse());
            let block: Vec<u32> = (1..=cert.context.rank as u32).collect();
            ensure(
                *root == conj_root && *sigma == block_sigma(&rd.root, &block),
                || "root does not match the input".into(),
            )?;
            ensure(sigma.iter().any(|&s| residue(s, p) != 0), || {
                "root is not primitive".into()
            })
        }
        Witness::MaximalSubgroup { index, lambda } => {
            let p = cert.context.p.ok_or("maximal-subgroup witness needs p")?;
            let m = MaximalSubgroup::new(lambda.clone(), p).ok_or("invalid lambda")?;
            let c = check_subgroup(&cert.input, *index, &m).map_err(|e| e.to_string())?;
            ensure(!c.outside_phi, || "input lies outside Phi(M)".into())
        }
    }
}

/// Re-verifies `cert`, returning its verdict when every step checks out.
pub fn replay(cert: &Certificate, catalog: &Catalog) -> Result<Verdict, ReplayError> {
    let end = cert.reasons.len();
    let fail = |step: usize, msg: String| ReplayError { step, msg };
    if cert.verdict == Verdict::Unknown {
        if !cert.reasons.is_empty() || cert.attempted.is_empty() {
            return Err(fail(
                end,
                "UNKNOWN needs no reasons and a non-empty attempted list".into(),
            ));
        }
        return Ok(Verdict::Unknown);
    }
    let replayer = Replayer {
        reasons: &cert.reasons,
        catalog,
    };
    for i in 0..end {
        replayer.check(i).map_err(|m| fail(i, m))?;
    }
    let last = cert.conclusion().ok_or_else(|| fail(end, "no reasons".into()))?;
    let h = head(last).map_err(|m| fail(end - 1, m))?;
    ensure(h.word == cert.input, || {
        "last reason is not about the input".into()
    })
    .map_err(|m| fail(end - 1, m))?;
    let full: Vec<u32> = (1..=cert.context.rank as u32).collect();
    let block_ok = h.block == full || cert.verdict == Verdict::NotTest && h.block.len() <= full.len();
    ensure(
        block_ok && h.group == context_group(cert.context.kind) && h.p == cert.context.p,
        || "last reason does not match the certificate context".into(),
    )
    .map_err(|m| fail(end - 1, m))?;
    ensure(h.conclusion == cert.verdict.to_string(), || {
        format!(
            "last conclusion {} differs from verdict {}",
            h.conclusion, cert.verdict
        )
    })
    .map_err(|m| fail(end - 1, m))?;
    check_witness(cert).map_err(|m| fail(end, m))?;
    Ok(cert.verdict)
}
