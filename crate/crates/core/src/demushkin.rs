//! Demushkin and surface group presentations, and the hypothesis checkers
//! that transport free pro-p test elements into them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{divisible, is_prime, residue};
use crate::certificate::{group, Certificate, GroupContext, GroupKind, Reason, RuleId, Verdict};
use crate::engine::{certify_free_pro_p, EngineConfig, EngineError};
use crate::word::{Word, WordError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DemushkinError {
    #[error("invalid invariants: {0}")]
    Invariant(String),
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("k = {k} outside the range {lo}..={hi}")]
    KOutOfRange { k: usize, lo: usize, hi: usize },
    #[error("n = {0} outside the admissible range")]
    NOutOfRange(usize),
    #[error("exponent {index} is zero")]
    ZeroExponent { index: usize },
    #[error("expected {expected} exponents, got {given}")]
    Arity { expected: usize, given: usize },
    #[error("hypothesis not satisfied: {0}")]
    Rejected(String),
    #[error(
        "the word is not certified as a test element of the free pro-{p} group of rank {rank} ({verdict})"
    )]
    NotTestWord { p: u64, rank: usize, verdict: Verdict },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Word(#[from] WordError),
}

/// Which normal form of the classification a relator takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DemushkinCase {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II")]
    II,
    #[serde(rename = "III-a")]
    IIIa,
    #[serde(rename = "III-b")]
    IIIb,
}

impl fmt::Display for DemushkinCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DemushkinCase::I => "I",
            DemushkinCase::II => "II",
            DemushkinCase::IIIa => "III-a",
            DemushkinCase::IIIb => "III-b",
        })
    }
}

impl std::str::FromStr for DemushkinCase {
    type Err = DemushkinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "I" | "i" => Ok(DemushkinCase::I),
            "II" | "ii" => Ok(DemushkinCase::II),
            "III-a" | "iii-a" | "IIIa" => Ok(DemushkinCase::IIIa),
            "III-b" | "iii-b" | "IIIb" => Ok(DemushkinCase::IIIb),
            other => Err(DemushkinError::Invariant(format!("unknown case tag {other:?}"))),
        }
    }
}

/// `(p, d, q, f, case)`; `f = None` encodes `f = infinity`, where `2^f = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemushkinInvariants {
    pub p: u64,
    pub d: usize,
    pub q: u64,
    pub case: DemushkinCase,
    pub f: Option<u32>,
}

fn fail(clause: &str) -> DemushkinError {
    DemushkinError::Invariant(clause.to_string())
}

impl DemushkinInvariants {
    pub fn validate(&self) -> Result<(), DemushkinError> {
        if !is_prime(self.p) {
            return Err(DemushkinError::NotPrime(self.p));
        }
        if self.d < 2 {
            return Err(fail("d >= 2"));
        }
        match self.case {
            DemushkinCase::I => {
                if self.q == 2 {
                    return Err(fail("case I requires q != 2"));
                }
                if !self.d.is_multiple_of(2) {
                    return Err(fail("case I requires d even"));
                }
                match (self.q, self.f) {
                    (0, None) => Ok(()),
                    (0, Some(_)) => Err(fail("q = 0 requires f = infinity")),
                    (_, None) => Err(fail("q = p^f requires finite f")),
                    (q, Some(f)) => {
                        if f >= 1 && self.p.checked_pow(f) == Some(q) {
                            Ok(())
                        } else {
                            Err(fail("q must be 0 or p^f with f >= 1"))
                        }
                    }
                }
            }
            DemushkinCase::II | DemushkinCase::IIIa | DemushkinCase::IIIb => {
                if self.q != 2 || self.p != 2 {
                    return Err(fail("cases II and III require q = 2"));
                }
                if matches!(self.f, Some(f) if f < 2) {
                    return Err(fail("f must be 2, 3, .. or infinity"));
                }
                match self.case {
                    DemushkinCase::II if self.d.is_multiple_of(2) => Err(fail("case II requires d odd")),
                    DemushkinCase::IIIa | DemushkinCase::IIIb if !self.d.is_multiple_of(2) => {
                        Err(fail("case III requires d even"))
                    }
                    DemushkinCase::IIIb if self.d < 4 => Err(fail("case III-b requires d >= 4")),
                    _ => Ok(()),
                }
            }
        }
    }

    /// `2^f`, or 0 for `f = infinity`.
    fn two_pow_f(&self) -> Result<i64, DemushkinError> {
        match self.f {
            None => Ok(0),
            Some(f) => 2i64
                .checked_pow(f)
                .ok_or_else(|| fail("2^f overflows a 64-bit exponent")),
        }
    }
}

/// Relator factors: `(generator, exponent)` powers and commutators `[xa, xb]`.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Factor {
    Power(u32, i64),
    Comm(u32, u32),
}

fn commutator_tail(from: usize, d: usize) -> Vec<Factor> {
    (from..d)
        .step_by(2)
        .map(|i| Factor::Comm(i as u32, i as u32 + 1))
        .collect()
}

fn factors(inv: &DemushkinInvariants) -> Result<Vec<Factor>, DemushkinError> {
    inv.validate()?;
    let d = inv.d;
    let mut out = Vec::new();
    match inv.case {
        DemushkinCase::I => {
            if inv.q != 0 {
                out.push(Factor::Power(1, inv.q as i64));
            }
            out.extend(commutator_tail(1, d));
        }
        DemushkinCase::II => {
            out.push(Factor::Power(1, 2));
            let e = inv.two_pow_f()?;
            if e != 0 {
                out.push(Factor::Power(2, e));
            }
            out.extend(commutator_tail(2, d));
        }
        DemushkinCase::IIIa => {
            out.push(Factor::Power(1, inv.two_pow_f()? + 2));
            out.extend(commutator_tail(1, d));
        }
        DemushkinCase::IIIb => {
            out.push(Factor::Power(1, 2));
            out.push(Factor::Comm(1, 2));
            let e = inv.two_pow_f()?;
            if e != 0 {
                out.push(Factor::Power(3, e));
            }
            out.extend(commutator_tail(3, d));
        }
    }
    Ok(out)
}

/// The relator of the presentation with the given invariants.
pub fn build_relator(inv: &DemushkinInvariants) -> Result<Word, DemushkinError> {
    Ok(factors(inv)?.iter().fold(Word::identity(), |acc, f| {
        let piece = match *f {
            Factor::Power(g, e) => Word::generator_power(g, e),
            Factor::Comm(a, b) => Word::commutator(&Word::generator(a), &Word::generator(b)),
        };
        acc.concat(&piece)
    }))
}

/// The relator in factored form, e.g. `x1^9[x1,x2][x3,x4]`.
pub fn relator_text(inv: &DemushkinInvariants) -> Result<String, DemushkinError> {
    Ok(factors(inv)?
        .iter()
        .map(|f| match *f {
            Factor::Power(g, 1) => format!("x{g}"),
            Factor::Power(g, e) => format!("x{g}^{e}"),
            Factor::Comm(a, b) => format!("[x{a},x{b}]"),
        })
        .collect())
}

/// `⟨x1,…,xd | relator⟩`.
pub fn presentation(d: usize, relator: &str) -> String {
    let gens: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    format!("⟨{} | {}⟩", gens.join(","), relator)
}

/// Rank of an index-`index` subgroup of a Demushkin group with `d(G) = n`.
pub fn subgroup_rank_formula(n: u64, index: u64) -> u64 {
    2 + index * (n - 2)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Accept,
    Reject {
        clause: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        route: Option<String>,
    },
}

impl Decision {
    pub fn accepted(&self) -> bool {
        matches!(self, Decision::Accept)
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Accept => f.write_str("ACCEPT"),
            Decision::Reject { clause, .. } => write!(f, "REJECT ({clause})"),
        }
    }
}

/// Outcome of a counting-hypothesis check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub decision: Decision,
    pub divisible: usize,
    pub threshold: usize,
}

fn nonzero(alphas: &[i64]) -> Result<(), DemushkinError> {
    match alphas.iter().position(|&a| a == 0) {
        Some(i) => Err(DemushkinError::ZeroExponent { index: i + 1 }),
        None => Ok(()),
    }
}

/// Hypotheses for `w(x1^a1, .., xk^ak)` in a Demushkin group with `d(G) = n`.
pub fn check_demushkin_test(
    n: usize,
    p: u64,
    k: usize,
    alphas: &[i64],
) -> Result<HypothesisCheck, DemushkinError> {
    if !is_prime(p) {
        return Err(DemushkinError::NotPrime(p));
    }
    if n <= 2 {
        return Err(DemushkinError::NOutOfRange(n));
    }
    let lo = n / 2 + 1;
    if k < lo || k > n {
        return Err(DemushkinError::KOutOfRange { k, lo, hi: n });
    }
    if alphas.len() != k {
        return Err(DemushkinError::Arity {
            expected: k,
            given: alphas.len(),
        });
    }
    nonzero(alphas)?;
    let divisible = alphas.iter().filter(|&&a| divisible(a, p)).count();
    let threshold = k - n / 2 + 1;
    let decision = if divisible < threshold {
        Decision::Reject {
            clause: format!("at least {threshold} exponents divisible by {p} (found {divisible})"),
            route: None,
        }
    } else if p == 2 && n <= 4 && k >= n {
        Decision::Reject {
            clause: "p = 2 and n <= 4 requires k < n".into(),
            route: (n >= 3).then(|| RuleId::DemushkinTest2.to_string()),
        }
    } else {
        Decision::Accept
    };
    Ok(HypothesisCheck {
        decision,
        divisible,
        threshold,
    })
}

/// Hypotheses of the pro-2 variant with `3 <= n <= 4`: all exponents even, nonzero.
pub fn check_demushkin_test_2(n: usize, alphas: &[i64]) -> Result<HypothesisCheck, DemushkinError> {
    if !(3..=4).contains(&n) {
        return Err(DemushkinError::NOutOfRange(n));
    }
    if alphas.len() != n {
        return Err(DemushkinError::Arity {
            expected: n,
            given: alphas.len(),
        });
    }
    let divisible = alphas.iter().filter(|&&a| a != 0 && a % 2 == 0).count();
    let decision = match alphas.iter().position(|&a| a == 0 || a % 2 != 0) {
        None => Decision::Accept,
        Some(i) => Decision::Reject {
            clause: format!("exponent {} must be a nonzero even integer", i + 1),
            route: None,
        },
    };
    Ok(HypothesisCheck {
        decision,
        divisible,
        threshold: n,
    })
}

/// `w(x1^a1, .., xk^ak)`.
pub fn substitute_powers(w: &Word, alphas: &[i64]) -> Result<Word, DemushkinError> {
    let images: Vec<Word> = alphas
        .iter()
        .enumerate()
        .map(|(i, &a)| Word::generator_power(i as u32 + 1, a))
        .collect();
    Ok(w.substitute(&images)?)
}

/// Certifies `w` TEST in the free pro-p group of rank `k`; its reasons become
/// the premises of the transported conclusion.
fn free_premise(w: &Word, k: usize, p: u64, cfg: &EngineConfig) -> Result<Certificate, DemushkinError> {
    let c = certify_free_pro_p(w, k, p, cfg)?;
    if c.verdict != Verdict::Test {
        return Err(DemushkinError::NotTestWord {
            p,
            rank: k,
            verdict: c.verdict,
        });
    }
    Ok(c)
}

fn reject(check: &HypothesisCheck) -> Result<(), DemushkinError> {
    match &check.decision {
        Decision::Accept => Ok(()),
        Decision::Reject { clause, .. } => Err(DemushkinError::Rejected(clause.clone())),
    }
}

fn transported(t: Word, context: GroupContext, mut reasons: Vec<Reason>, conclusion: Reason) -> Certificate {
    reasons.push(conclusion);
    Certificate {
        input: t,
        context,
        verdict: Verdict::Test,
        reasons,
        witness: None,
        attempted: vec![],
    }
}

fn basis_note() -> &'static str {
    "generating set taken to be the presentation basis; minimality not verified"
}

/// TEST certificate for `w(x1^a1, .., xk^ak)` in the Demushkin group `inv`.
/// Routes to the pro-2 variant when the counting theorem excludes the case.
pub fn certify_demushkin(
    inv: &DemushkinInvariants,
    alphas: &[i64],
    w: &Word,
    cfg: &EngineConfig,
) -> Result<Certificate, DemushkinError> {
    inv.validate()?;
    let (n, p, k) = (inv.d, inv.p, alphas.len());
    let relator = build_relator(inv)?;
    let check = check_demushkin_test(n, p, k, alphas)?;
    let (rule, check) = match (&check.decision, p, k == n) {
        (Decision::Reject { route: Some(_), .. }, 2, true) => {
            (RuleId::DemushkinTest2, check_demushkin_test_2(n, alphas)?)
        }
        _ => (RuleId::DemushkinTest, check),
    };
    reject(&check)?;
    let premise = free_premise(w, k, p, cfg)?;
    let t = substitute_powers(w, alphas)?;
    let block: Vec<u32> = (1..=n as u32).collect();
    let conclusion = Reason::step(rule, &t, &block, group::DEMUSHKIN, Some(p), "TEST")
        .with("w", w)
        .with("alphas", alphas)
        .with("n", n)
        .with("k", k)
        .with("divisible", check.divisible)
        .with("threshold", check.threshold)
        .with("relator", &relator)
        .with("invariants", inv)
        .with("basis", basis_note());
    let context = GroupContext {
        kind: GroupKind::Demushkin,
        rank: n,
        p: Some(p),
    };
    Ok(transported(t, context, premise.reasons, conclusion))
}

/// `[x1,x2]..[x_{2n-1},x_{2n}]`.
pub fn surface_relator(genus: usize) -> Word {
    (1..=genus as u32).fold(Word::identity(), |acc, i| {
        acc.concat(&Word::commutator(
            &Word::generator(2 * i - 1),
            &Word::generator(2 * i),
        ))
    })
}

/// `x1^2..xn^2`.
pub fn nonorientable_relator(genus: usize) -> Word {
    Word::from_syllables((1..=genus as u32).map(|i| (i, 2)))
}

/// A surface group presentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceContext {
    pub orientable: bool,
    pub genus: usize,
    pub p: u64,
    pub relator: Word,
}

impl SurfaceContext {
    pub fn orientable(genus: usize, p: u64) -> Self {
        Self {
            orientable: true,
            genus,
            p,
            relator: surface_relator(genus),
        }
    }

    pub fn nonorientable(genus: usize, p: u64) -> Self {
        Self {
            orientable: false,
            genus,
            p,
            relator: nonorientable_relator(genus),
        }
    }

    pub fn rank(&self) -> usize {
        if self.orientable {
            2 * self.genus
        } else {
            self.genus
        }
    }
}

/// Hypotheses for `w(x1^s1, .., xk^sk)` in the orientable surface group of
/// genus `n`. The pro-p completion is Demushkin with `d = 2n`, so the
/// exclusion for `p = 2` applies when `2n <= 4`.
pub fn check_surface_test(n: usize, p: u64, s: &[i64]) -> Result<HypothesisCheck, DemushkinError> {
    if !is_prime(p) {
        return Err(DemushkinError::NotPrime(p));
    }
    if n < 2 {
        return Err(DemushkinError::NOutOfRange(n));
    }
    let k = s.len();
    if k < n + 1 || k > 2 * n {
        return Err(DemushkinError::KOutOfRange {
            k,
            lo: n + 1,
            hi: 2 * n,
        });
    }
    nonzero(s)?;
    let divisible = s.iter().filter(|&&a| divisible(a, p)).count();
    let threshold = k - n + 1;
    let decision = if divisible < threshold {
        Decision::Reject {
            clause: format!("at least {threshold} exponents divisible by {p} (found {divisible})"),
            route: None,
        }
    } else if p == 2 && n <= 2 && k >= 2 * n {
        Decision::Reject {
            clause: "p = 2 and genus 2 requires k < 2n".into(),
            route: Some(RuleId::SurfaceTest2.to_string()),
        }
    } else {
        Decision::Accept
    };
    Ok(HypothesisCheck {
        decision,
        divisible,
        threshold,
    })
}

/// TEST certificate for `t = w(x1^s1, .., xk^sk)` in the orientable surface
/// group of genus `n`, through its pro-p completion.
pub fn certify_surface(
    n: usize,
    p: u64,
    s: &[i64],
    w: &Word,
    cfg: &EngineConfig,
) -> Result<Certificate, DemushkinError> {
    let check = check_surface_test(n, p, s)?;
    let genus2_even = n == 2 && p == 2 && s.len() == 4 && s.iter().all(|&a| a != 0 && a % 2 == 0);
    let rule = if genus2_even && !check.decision.accepted() {
        RuleId::SurfaceTest2
    } else {
        reject(&check)?;
        RuleId::SurfaceTest
    };
    let k = s.len();
    let premise = free_premise(w, k, p, cfg)?;
    let t = substitute_powers(w, s)?;
    let ctx = SurfaceContext::orientable(n, p);
    let block: Vec<u32> = (1..=ctx.rank() as u32).collect();
    let (divisible, threshold) = if rule == RuleId::SurfaceTest2 {
        (4, 4)
    } else {
        (check.divisible, check.threshold)
    };
    let conclusion = Reason::step(rule, &t, &block, group::SURFACE, Some(p), "TEST")
        .with("w", w)
        .with("s", s)
        .with("genus", n)
        .with("k", k)
        .with("divisible", divisible)
        .with("threshold", threshold)
        .with("relator", &ctx.relator)
        .with("basis", basis_note());
    let context = GroupContext {
        kind: GroupKind::OrientableSurface,
        rank: ctx.rank(),
        p: Some(p),
    };
    Ok(transported(t, context, premise.reasons, conclusion))
}

/// TEST certificate for `w(x_{i1}, .., x_{i(n-1)})` in the non-orientable
/// surface group of genus `n`, whose pro-p completion is free of rank `n - 1`.
pub fn certify_nonorientable(
    n: usize,
    p: u64,
    letters: &[u32],
    w: &Word,
    cfg: &EngineConfig,
) -> Result<Certificate, DemushkinError> {
    if !is_prime(p) {
        return Err(DemushkinError::NotPrime(p));
    }
    if p == 2 {
        return Err(DemushkinError::Rejected("p >= 3 required".into()));
    }
    if n < 3 {
        return Err(DemushkinError::NOutOfRange(n));
    }
    if letters.len() != n - 1 {
        return Err(DemushkinError::Arity {
            expected: n - 1,
            given: letters.len(),
        });
    }
    if let Some(&bad) = letters.iter().find(|&&l| l == 0 || l as usize > n) {
        return Err(DemushkinError::Rejected(format!(
            "letter x{bad} is not a generator"
        )));
    }
    let mut sorted = letters.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != letters.len() {
        return Err(DemushkinError::Rejected("letters must be distinct".into()));
    }
    let ctx = SurfaceContext::nonorientable(n, p);
    let relator_sigma: Vec<i64> = (1..=n as u32).map(|i| ctx.relator.exponent_sum(i)).collect();
    if relator_sigma.iter().all(|&s| residue(s, p) == 0) {
        return Err(DemushkinError::Rejected("relator must be primitive".into()));
    }
    let premise = free_premise(w, n - 1, p, cfg)?;
    let images: Vec<Word> = letters.iter().map(|&l| Word::generator(l)).collect();
    let t = w.substitute(&images)?;
    let block: Vec<u32> = (1..=n as u32).collect();
    let conclusion = Reason::step(
        RuleId::NonOrientable,
        &t,
        &block,
        group::NON_ORIENTABLE,
        Some(p),
        "TEST",
    )
    .with("w", w)
    .with("letters", letters)
    .with("genus", n)
    .with("relator", &ctx.relator)
    .with("relator_sigma", &relator_sigma);
    let context = GroupContext {
        kind: GroupKind::NonOrientableSurface,
        rank: n,
        p: Some(p),
    };
    Ok(transported(t, context, premise.reasons, conclusion))
}
