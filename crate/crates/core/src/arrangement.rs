//! Test arrangements: expressions built from a catalog of known test elements
//! by substituting arrangements into disjoint consecutive generator blocks.
//!
//! Surface syntax: `id(params..., children...)` with integer parameters first,
//! e.g. `pp(2,2,comm(),gen(3))`. Parentheses are always required.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::arith::divisible;
use crate::certificate::{group, Certificate, GroupContext, Reason, RuleId, Verdict};
use crate::engine::{certify_free_pro_p, EngineConfig};
use crate::word::Word;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArrangementError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),
    #[error("`{entry}` takes {expected} children, got {given}")]
    Arity {
        entry: String,
        expected: usize,
        given: usize,
    },
    #[error("bad parameters for `{entry}`: {msg}")]
    Params { entry: String, msg: String },
    #[error("`{entry}` is not admissible for p = {p}: {msg}")]
    Inadmissible { entry: String, p: u64, msg: String },
    #[error("cannot register `{id}`: {msg}")]
    Registration { id: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Registered {
    template: Word,
    arity: usize,
    p: u64,
}

/// Catalog of test elements usable as arrangement nodes.
///
/// Built-in entries:
/// * `gen(a)`: `x1^a`, `a != 0`, arity 1
/// * `comm()`: `[x1,x2]`, arity 2
/// * `pp(a1,a2)`: `x1^a1 x2^a2`, `ai` nonzero multiples of p, arity 2
/// * `apfam(n,k,a1..an)`: `x1^a1..xn^an [x(n+1),x(n+2)]..`, `ai` nonzero
///   multiples of p, arity `n + 2k`
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    registered: BTreeMap<String, Registered>,
}

const BUILTIN: [&str; 4] = ["gen", "comm", "pp", "apfam"];

impl Catalog {
    pub fn builtin() -> Self {
        Self::default()
    }

    /// Adds a fixed template under `id`. The template must be certified TEST
    /// in the free pro-p group of rank `max generator` by the engine.
    pub fn register(
        &mut self,
        id: &str,
        template: Word,
        p: u64,
        cfg: &EngineConfig,
    ) -> Result<(), ArrangementError> {
        let fail = |msg: String| ArrangementError::Registration {
            id: id.to_string(),
            msg,
        };
        if BUILTIN.contains(&id) || self.registered.contains_key(id) {
            return Err(fail("id already in use".into()));
        }
        if !is_identifier(id) {
            return Err(fail("not an identifier".into()));
        }
        let arity = template.max_generator().unwrap_or(0) as usize;
        if arity == 0 {
            return Err(fail("template is the identity".into()));
        }
        let cert = certify_free_pro_p(&template, arity, p, cfg).map_err(|e| fail(e.to_string()))?;
        if cert.verdict != Verdict::Test {
            return Err(fail(format!("engine verdict is {}", cert.verdict)));
        }
        self.registered
            .insert(id.to_string(), Registered { template, arity, p });
        Ok(())
    }

    pub fn entry(&self, id: &str, params: Vec<i64>) -> Result<Entry, ArrangementError> {
        let bad = |msg: &str| ArrangementError::Params {
            entry: id.to_string(),
            msg: msg.to_string(),
        };
        let (arity, template) = match id {
            "gen" => {
                if params.len() != 1 {
                    return Err(bad("expected one exponent"));
                }
                if params[0] == 0 {
                    return Err(bad("exponent must be nonzero"));
                }
                (1, Word::generator_power(1, params[0]))
            }
            "comm" => {
                if !params.is_empty() {
                    return Err(bad("takes no parameters"));
                }
                (2, Word::commutator(&Word::generator(1), &Word::generator(2)))
            }
            "pp" => {
                if params.len() != 2 {
                    return Err(bad("expected two exponents"));
                }
                if params.contains(&0) {
                    return Err(bad("exponents must be nonzero"));
                }
                (2, Word::from_syllables([(1, params[0]), (2, params[1])]))
            }
            "apfam" => {
                if params.len() < 2 || params[0] < 0 || params[1] < 0 {
                    return Err(bad("expected n >= 0, k >= 0 and n exponents"));
                }
                let (n, k) = (params[0] as usize, params[1] as usize);
                if params.len() != 2 + n {
                    return Err(bad("expected exactly n exponents after n and k"));
                }
                if n + 2 * k == 0 {
                    return Err(bad("n + 2k must be positive"));
                }
                if params[2..].contains(&0) {
                    return Err(bad("exponents must be nonzero"));
                }
                (n + 2 * k, apfam_template(&params[2..], k))
            }
            other => match self.registered.get(other) {
                Some(r) => {
                    if !params.is_empty() {
                        return Err(bad("registered entries take no parameters"));
                    }
                    (r.arity, r.template.clone())
                }
                None => return Err(ArrangementError::UnknownEntry(other.to_string())),
            },
        };
        Ok(Entry {
            id: id.to_string(),
            params,
            arity,
            template,
        })
    }

    /// Checks the p-dependent admissibility of an entry.
    pub fn admissible(&self, e: &Entry, p: u64) -> Result<(), ArrangementError> {
        let inadmissible = |msg: String| ArrangementError::Inadmissible {
            entry: e.to_string(),
            p,
            msg,
        };
        let exps: &[i64] = match e.id.as_str() {
            "pp" => &e.params,
            "apfam" => &e.params[2..],
            "gen" | "comm" => &[],
            other => {
                let r = &self.registered[other];
                if r.p != p {
                    return Err(inadmissible(format!("registered for p = {}", r.p)));
                }
                &[]
            }
        };
        match exps.iter().find(|&&a| !divisible(a, p)) {
            Some(a) => Err(inadmissible(format!("exponent {a} is not in pZ"))),
            None => Ok(()),
        }
    }
}

/// `x1^a1 .. xn^an [x(n+1),x(n+2)] .. [x(n+2k-1),x(n+2k)]`.
pub fn apfam_template(alphas: &[i64], k: usize) -> Word {
    let n = alphas.len() as u32;
    let mut w = Word::from_syllables(alphas.iter().enumerate().map(|(i, &a)| (i as u32 + 1, a)));
    for j in 0..k as u32 {
        let a = Word::generator(n + 2 * j + 1);
        let b = Word::generator(n + 2 * j + 2);
        w = w.concat(&Word::commutator(&a, &b));
    }
    w
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A resolved catalog entry with its parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub id: String,
    pub params: Vec<i64>,
    pub arity: usize,
    pub template: Word,
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.id)?;
        for (i, a) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrangement {
    pub entry: Entry,
    /// Empty for a leaf; otherwise exactly `entry.arity` children.
    pub children: Vec<Arrangement>,
}

impl Arrangement {
    pub fn leaf(entry: Entry) -> Self {
        Self {
            entry,
            children: vec![],
        }
    }

    pub fn compose(entry: Entry, children: Vec<Arrangement>) -> Result<Self, ArrangementError> {
        if children.len() != entry.arity {
            return Err(ArrangementError::Arity {
                entry: entry.id.clone(),
                expected: entry.arity,
                given: children.len(),
            });
        }
        Ok(Self { entry, children })
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn weight(&self) -> usize {
        if self.is_leaf() {
            self.entry.arity
        } else {
            self.children.iter().map(Arrangement::weight).sum()
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Arrangement::depth).max().unwrap_or(0)
    }

    /// Expanded word over `x1..x(weight)`.
    pub fn expand(&self) -> Word {
        if self.is_leaf() {
            return self.entry.template.clone();
        }
        let images = self.child_images();
        self.entry
            .template
            .substitute(&images)
            .expect("template arity matches child count")
    }

    /// Child expansions shifted into their consecutive blocks.
    pub fn child_images(&self) -> Vec<Word> {
        let mut offset = 0u32;
        self.children
            .iter()
            .map(|c| {
                let w = c.expand().shift(offset);
                offset += c.weight() as u32;
                w
            })
            .collect()
    }

    pub fn check_admissible(&self, catalog: &Catalog, p: u64) -> Result<(), ArrangementError> {
        catalog.admissible(&self.entry, p)?;
        self.children
            .iter()
            .try_for_each(|c| c.check_admissible(catalog, p))
    }
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.entry.id)?;
        let mut first = true;
        for a in &self.entry.params {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{a}")?;
        }
        for c in &self.children {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

pub fn parse_arrangement(text: &str, catalog: &Catalog) -> Result<Arrangement, ArrangementError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        catalog,
    };
    let a = parser.node()?;
    parser.skip_ws();
    if parser.pos != parser.src.len() {
        return Err(parser.error("trailing input"));
    }
    Ok(a)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    catalog: &'a Catalog,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> ArrangementError {
        ArrangementError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
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

    fn expect(&mut self, c: u8) -> Result<(), ArrangementError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected `{}`", c as char)))
        }
    }

    fn ident(&mut self) -> Result<String, ArrangementError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        if !is_identifier(s) {
            self.pos = start;
            return Err(self.error("expected a catalog identifier"));
        }
        Ok(s.to_string())
    }

    fn int(&mut self) -> Result<i64, ArrangementError> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits {
            self.pos = start;
            return Err(self.error("expected an integer"));
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        s.parse().map_err(|_| ArrangementError::Syntax {
            pos: start,
            msg: "integer out of range".into(),
        })
    }

    fn node(&mut self) -> Result<Arrangement, ArrangementError> {
        let id = self.ident()?;
        self.expect(b'(')?;
        let mut params = Vec::new();
        let mut children = Vec::new();
        if self.peek() != Some(b')') {
            loop {
                match self.peek() {
                    Some(c) if c == b'-' || c.is_ascii_digit() => {
                        if !children.is_empty() {
                            return Err(self.error("parameters must precede children"));
                        }
                        params.push(self.int()?);
                    }
                    _ => children.push(self.node()?),
                }
                if self.peek() == Some(b',') {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(b')')?;
        let entry = self.catalog.entry(&id, params)?;
        if children.is_empty() {
            Ok(Arrangement::leaf(entry))
        } else {
            Arrangement::compose(entry, children)
        }
    }
}

/// TEST certificate for the expansion of `a` in the free pro-p group of rank
/// `weight(a)`; reasons follow the arrangement bottom-up.
pub fn certify_arrangement(
    a: &Arrangement,
    p: u64,
    catalog: &Catalog,
) -> Result<Certificate, ArrangementError> {
    a.check_admissible(catalog, p)?;
    let mut reasons = Vec::new();
    derive(a, 0, p, &mut reasons);
    if let Some(last) = reasons.pop() {
        reasons.push(last.with("arrangement", a.to_string()));
    }
    Ok(Certificate {
        input: a.expand(),
        context: GroupContext::free_pro_p(a.weight(), p),
        verdict: Verdict::Test,
        reasons,
        witness: None,
        attempted: vec![],
    })
}

fn derive(a: &Arrangement, offset: u32, p: u64, out: &mut Vec<Reason>) -> Word {
    let weight = a.weight() as u32;
    let block: Vec<u32> = (offset + 1..=offset + weight).collect();
    let entry = Arrangement::leaf(a.entry.clone()).to_string();
    if a.is_leaf() {
        let w = a.entry.template.shift(offset);
        out.push(
            Reason::step(RuleId::ArrangementLeaf, &w, &block, group::PRO_P, Some(p), "TEST")
                .with("entry", entry),
        );
        return w;
    }
    let mut parts = Vec::new();
    let mut blocks = Vec::new();
    let mut o = offset;
    for c in &a.children {
        parts.push(derive(c, o, p, out));
        let cw = c.weight() as u32;
        blocks.push((o + 1..=o + cw).collect::<Vec<u32>>());
        o += cw;
    }
    let w = a.entry.template.substitute(&parts).expect("arity checked");
    out.push(
        Reason::step(
            RuleId::ArrangementCompose,
            &w,
            &block,
            group::PRO_P,
            Some(p),
            "TEST",
        )
        .with("entry", entry)
        .with("parts", &parts)
        .with("blocks", &blocks),
    );
    w
}

/// Random admissible arrangement with depth at most `max_depth` and weight at
/// most `max_weight`.
pub fn random_arrangement<R: Rng>(
    rng: &mut R,
    catalog: &Catalog,
    p: u64,
    max_depth: usize,
    max_weight: usize,
) -> Arrangement {
    assert!(max_depth >= 1 && max_weight >= 1);
    if max_depth == 1 || rng.gen_bool(0.3) {
        return random_leaf(rng, catalog, p, max_weight);
    }
    let arity = rng.gen_range(1..=max_weight.min(4));
    let entry = random_entry_of_arity(rng, catalog, p, arity);
    let mut remaining = max_weight;
    let mut children = Vec::with_capacity(arity);
    for i in 0..arity {
        let reserve = arity - i - 1;
        let budget = rng.gen_range(1..=remaining - reserve);
        let child = random_arrangement(rng, catalog, p, max_depth - 1, budget);
        remaining -= child.weight();
        children.push(child);
    }
    Arrangement::compose(entry, children).expect("arity matches")
}

fn multiple_of_p<R: Rng>(rng: &mut R, p: u64) -> i64 {
    let k = rng.gen_range(1..=2) as i64;
    if rng.gen_bool(0.5) {
        k * p as i64
    } else {
        -k * p as i64
    }
}

fn nonzero<R: Rng>(rng: &mut R) -> i64 {
    let a = rng.gen_range(1..=3);
    if rng.gen_bool(0.5) {
        a
    } else {
        -a
    }
}

fn random_entry_of_arity<R: Rng>(rng: &mut R, catalog: &Catalog, p: u64, arity: usize) -> Entry {
    let params = match arity {
        1 => ("gen", vec![nonzero(rng)]),
        2 => match rng.gen_range(0..3) {
            0 => ("comm", vec![]),
            1 => ("pp", vec![multiple_of_p(rng, p), multiple_of_p(rng, p)]),
            _ => ("apfam", vec![0, 1]),
        },
        _ => {
            let k = rng.gen_range(0..=arity / 2);
            let n = arity - 2 * k;
            let mut v = vec![n as i64, k as i64];
            v.extend((0..n).map(|_| multiple_of_p(rng, p)));
            ("apfam", v)
        }
    };
    catalog
        .entry(params.0, params.1)
        .expect("generated parameters are valid")
}

fn random_leaf<R: Rng>(rng: &mut R, catalog: &Catalog, p: u64, max_weight: usize) -> Arrangement {
    let arity = rng.gen_range(1..=max_weight.min(4));
    Arrangement::leaf(random_entry_of_arity(rng, catalog, p, arity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(s: &str) -> Result<Arrangement, ArrangementError> {
        parse_arrangement(s, &Catalog::builtin())
    }

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_weights() {
        let a = parse("comm(pp(2,2),apfam(1,1,3,gen(1),comm(),gen(2)))").unwrap();
        assert_eq!(a.weight(), 2 + 4);
        assert_eq!(parse("pp(2,2)").unwrap().weight(), 2);
        assert!(matches!(
            parse("comm(pp(2,2))"),
            Err(ArrangementError::Arity {
                expected: 2,
                given: 1,
                ..
            })
        ));
        assert_eq!(parse("comm()").unwrap().weight(), 2);
        assert_eq!(parse("pp(2,2,comm(),comm())").unwrap().weight(), 4);
        assert_eq!(parse("pp(2,2,pp(2,2),gen(2))").unwrap().weight(), 3);
        assert!(matches!(parse("nope()"), Err(ArrangementError::UnknownEntry(_))));
        assert!(matches!(parse("gen(0)"), Err(ArrangementError::Params { .. })));
        assert!(matches!(parse("comm"), Err(ArrangementError::Syntax { .. })));
        assert!(matches!(
            parse("pp(comm(),2,3)"),
            Err(ArrangementError::Syntax { .. })
        ));
    }

    #[test]
    fn canonical_printing() {
        let a = parse(" pp( 2 , -4 , comm( ) , gen(3) ) ").unwrap();
        assert_eq!(a.to_string(), "pp(2,-4,comm(),gen(3))");
        assert_eq!(parse(&a.to_string()).unwrap(), a);
    }

    #[test]
    fn expansion() {
        assert_eq!(parse("comm()").unwrap().expand(), w("[x1,x2]"));
        assert_eq!(
            parse("comm(comm(),comm())").unwrap().expand(),
            w("[[x1,x2],[x3,x4]]")
        );
        assert_eq!(
            parse("pp(2,2,comm(),gen(2))").unwrap().expand(),
            w("[x1,x2]^2*x3^4")
        );
        assert_eq!(
            parse("apfam(2,1,3,-3)").unwrap().expand(),
            w("x1^3*x2^-3*[x3,x4]")
        );
    }

    #[test]
    fn admissibility() {
        let a = parse("pp(2,2)").unwrap();
        assert!(certify_arrangement(&a, 2, &Catalog::builtin()).is_ok());
        assert!(matches!(
            certify_arrangement(&a, 3, &Catalog::builtin()),
            Err(ArrangementError::Inadmissible { .. })
        ));
    }

    #[test]
    fn certificate_shape() {
        let a = parse("pp(2,2,pp(2,2),pp(2,2))").unwrap();
        let c = certify_arrangement(&a, 2, &Catalog::builtin()).unwrap();
        assert_eq!(c.verdict, Verdict::Test);
        assert_eq!(c.input, w("(x1^2*x2^2)^2*(x3^2*x4^2)^2"));
        assert_eq!(c.reasons.len(), 3);
        assert_eq!(c.reasons[2].rule, RuleId::ArrangementCompose);
    }

    #[test]
    fn registration_requires_test_verdict() {
        let cfg = EngineConfig::default();
        let mut cat = Catalog::builtin();
        cat.register("hc3", w("[[x1,x2],x3]"), 3, &cfg).unwrap();
        let a = parse_arrangement("hc3(gen(2),comm(),gen(1))", &cat).unwrap();
        assert_eq!(a.weight(), 4);
        assert!(certify_arrangement(&a, 3, &cat).is_ok());
        assert!(cat.register("prim", w("x1*x2"), 3, &cfg).is_err());
        assert!(cat.register("comm", w("[x1,x2]"), 3, &cfg).is_err());
    }

    #[test]
    fn random_arrangements_respect_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cat = Catalog::builtin();
        for _ in 0..100 {
            let a = random_arrangement(&mut rng, &cat, 3, 3, 8);
            assert!(a.depth() <= 3 && a.weight() <= 8, "{a}");
            assert!(a.check_admissible(&cat, 3).is_ok());
            assert_eq!(parse(&a.to_string()).unwrap(), a);
        }
    }
}
