//! Certificates: a verdict together with the ordered list of rule applications
//! that justify it.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::word::Word;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroupKind {
    FreeProP,
    FreeDiscrete,
    /// Pro-p completion of an orientable surface group (a Demushkin group).
    OrientableSurface,
    NonOrientableSurface,
    Demushkin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupContext {
    pub kind: GroupKind,
    pub rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
}

impl GroupContext {
    pub fn free_pro_p(rank: usize, p: u64) -> Self {
        Self {
            kind: GroupKind::FreeProP,
            rank,
            p: Some(p),
        }
    }

    pub fn free_discrete(rank: usize) -> Self {
        Self {
            kind: GroupKind::FreeDiscrete,
            rank,
            p: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Test,
    NotTest,
    Unknown,
    AlmostPrimitive,
    NotAlmostPrimitive,
}

impl Verdict {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Test | Verdict::AlmostPrimitive => 0,
            Verdict::NotTest | Verdict::NotAlmostPrimitive => 1,
            Verdict::Unknown => 2,
        }
    }

    pub fn is_conclusive(self) -> bool {
        self != Verdict::Unknown
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Test => "TEST",
            Verdict::NotTest => "NOT_TEST",
            Verdict::Unknown => "UNKNOWN",
            Verdict::AlmostPrimitive => "ALMOST_PRIMITIVE",
            Verdict::NotAlmostPrimitive => "NOT_ALMOST_PRIMITIVE",
        };
        f.write_str(s)
    }
}

/// Identifiers of every inference rule a certificate may cite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleId {
    Identity,
    Rank1Nontrivial,
    OmitsGenerator,
    PrimitiveRoot,
    RootExtraction,
    Rank2Criterion,
    HigherCommutator,
    AlmostPrimitive,
    SubstitutedPowers,
    Arrangement,
    GcdForm,
    CyclicRetraction,
    Transfer,
    FrattiniMembership,
    MaximalSubgroupCheck,
    ApCharacterization,
    ArrangementLeaf,
    ArrangementCompose,
    DemushkinTest,
    DemushkinTest2,
    SurfaceTest,
    SurfaceTest2,
    NonOrientable,
}

impl RuleId {
    /// Short statement of the result a rule applies.
    pub fn statement(self) -> &'static str {
        match self {
            RuleId::Identity => "the identity lies in every retract, including the trivial one",
            RuleId::Rank1Nontrivial => {
                "every nontrivial element of a free group of rank one is a test element"
            }
            RuleId::OmitsGenerator => {
                "a word avoiding a basis element lies in a proper free factor, hence a proper retract"
            }
            RuleId::PrimitiveRoot => {
                "a power of a primitive element lies in a proper free factor when the rank is at least two"
            }
            RuleId::RootExtraction => {
                "u^a (a != 0) is a test element iff u is; test elements are invariant under conjugation"
            }
            RuleId::Rank2Criterion => {
                "rank two, not a p-th power: test element iff both exponent sums lie in pZ_p"
            }
            RuleId::HigherCommutator => {
                "every higher commutator involving all letters once is a test element"
            }
            RuleId::AlmostPrimitive => {
                "every almost primitive element of a finitely generated pro-p group is a test element"
            }
            RuleId::SubstitutedPowers => {
                "if w is a test element then so is w(x1^a1, .., xn^an) for nonzero ai"
            }
            RuleId::Arrangement => {
                "an arrangement of known test elements over disjoint generator blocks is a test element"
            }
            RuleId::GcdForm => {
                "x1^s1..xm^sm[..]..[..] is a test element iff gcd(s) != 1 and all exponents are nonzero"
            }
            RuleId::CyclicRetraction => {
                "if gcd of the root's exponent sums is 1, a Bezout map retracts onto the cyclic subgroup"
            }
            RuleId::Transfer => {
                "a test element of the pro-p completion of a residually-p Turner group is a test element"
            }
            RuleId::FrattiniMembership => {
                "in a free pro-p group, w lies in the Frattini subgroup iff every exponent sum is 0 mod p"
            }
            RuleId::MaximalSubgroupCheck => {
                "w lies in Phi(M) iff every exponent sum of its Schreier rewrite in M is 0 mod p"
            }
            RuleId::ApCharacterization => {
                "almost primitive iff in the Frattini subgroup and outside Phi(M) for every maximal M"
            }
            RuleId::ArrangementLeaf => "catalog entry registered as a test element",
            RuleId::ArrangementCompose => {
                "substituting test elements of disjoint free factors into a test element gives a test element"
            }
            RuleId::DemushkinTest => {
                "Demushkin d(G)=n>2: w(x1^a1..xk^ak) is a test element when enough ai lie in pZ_p"
            }
            RuleId::DemushkinTest2 => {
                "Demushkin pro-2, 3<=d(G)<=4: w(x1^a1..xn^an) is a test element for even nonzero ai"
            }
            RuleId::SurfaceTest => {
                "surface genus n: w(a1^s1..ak^sk) is a test element when at least k-n+1 si are divisible by p"
            }
            RuleId::SurfaceTest2 => {
                "surface genus 2: w(a1^s1..a4^s4) is a test element for even nonzero si and w a pro-2 test element"
            }
            RuleId::NonOrientable => {
                "non-orientable genus n>=3, p>=3: w(x_i1..x_i(n-1)) is a test element for distinct letters"
            }
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("rule id serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

pub type Details = BTreeMap<String, Value>;

/// Values of the `group` detail recorded in every reason.
pub mod group {
    pub const PRO_P: &str = "free-pro-p";
    pub const DISCRETE: &str = "free-discrete";
    pub const SURFACE: &str = "orientable-surface";
    pub const NON_ORIENTABLE: &str = "non-orientable-surface";
    pub const DEMUSHKIN: &str = "demushkin";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reason {
    pub rule: RuleId,
    /// Statement of the applied result; the JSON name is part of the stable schema.
    #[serde(rename = "paper_ref")]
    pub statement: String,
    pub details: Details,
}

impl Reason {
    pub fn new(rule: RuleId) -> Self {
        Self {
            rule,
            statement: rule.statement().to_string(),
            details: Details::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).expect("detail serializes"),
        );
        self
    }

    /// A reason about `word` as an element of the free factor on `block`.
    pub fn step(
        rule: RuleId,
        word: &Word,
        block: &[u32],
        group: &str,
        p: Option<u64>,
        conclusion: &str,
    ) -> Self {
        let mut r = Reason::new(rule)
            .with("word", word)
            .with("block", block)
            .with("group", group)
            .with("conclusion", conclusion);
        if let Some(p) = p {
            r = r.with("p", p);
        }
        r
    }

    pub fn get<T: serde::de::DeserializeOwned>(&self, key: &str) -> Option<T> {
        self.details
            .get(key)
            .and_then(|v| serde_json::from_value(v.clone()).ok())
    }
}

/// A retraction `x_i -> images[i-1]` of a free group onto a proper subgroup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetractWitness {
    pub images: Vec<Word>,
    /// Generator of the cyclic image, when the retraction comes from Bézout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Word>,
    /// Bézout coefficients `l_i` with `r(x_i) = target^{l_i}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<i64>>,
}

impl RetractWitness {
    /// Machine check: `r` fixes `w`, is idempotent and is not the identity map,
    /// so its image is a proper retract containing `w`.
    pub fn verify(&self, w: &Word) -> bool {
        let Ok(image) = w.substitute(&self.images) else {
            return false;
        };
        if &image != w {
            return false;
        }
        let idempotent = self
            .images
            .iter()
            .all(|im| im.substitute(&self.images).as_ref() == Ok(im));
        let identity = self
            .images
            .iter()
            .enumerate()
            .all(|(i, im)| *im == Word::generator(i as u32 + 1));
        idempotent && !identity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    Retraction(RetractWitness),
    /// Maximal subgroup `ker(lambda)` with `w` in its Frattini subgroup.
    MaximalSubgroup {
        index: usize,
        lambda: Vec<u64>,
    },
    /// `w` is conjugate to a power of `root`, and `root` is primitive.
    PrimitiveRoot {
        root: Word,
        sigma: Vec<i64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub input: Word,
    pub context: GroupContext,
    pub verdict: Verdict,
    pub reasons: Vec<Reason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Rules tried without a conclusive outcome, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attempted: Vec<RuleId>,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// The last reason is the one concluding about the input itself.
    pub fn conclusion(&self) -> Option<&Reason> {
        self.reasons.last()
    }
}
