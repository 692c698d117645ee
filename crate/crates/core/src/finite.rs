//! Exhaustive checks on explicit finite p-groups given by multiplication tables.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::is_prime;
use crate::word::Word;

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FiniteError {
    #[error("{0} is not a prime")]
    NotPrime(u64),
    #[error("invalid group spec {spec:?}: {msg}")]
    Spec { spec: String, msg: String },
    #[error("the Heisenberg construction needs p >= 3")]
    DegenerateHeisenberg,
    #[error("table is not a group: {0}")]
    NotAGroup(String),
    #[error("{candidates} candidates exceed the budget of {budget}")]
    BudgetExceeded { candidates: u64, budget: u64 },
    #[error("word uses x{needed} but only {given} images were given")]
    Arity { needed: u32, given: usize },
    #[error("element {0} out of range")]
    Element(usize),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("unknown check {0:?}")]
    UnknownCheck(String),
}

/// A catalog entry: `ea:p,n`, `cp:p,k1.k2`, `heis:p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupSpec {
    ElementaryAbelian { p: u64, n: usize },
    CyclicProduct { p: u64, ks: Vec<u32> },
    Heisenberg { p: u64 },
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSpec::ElementaryAbelian { p, n } => write!(f, "ea:{p},{n}"),
            GroupSpec::CyclicProduct { p, ks } => {
                let ks: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                write!(f, "cp:{p},{}", ks.join("."))
            }
            GroupSpec::Heisenberg { p } => write!(f, "heis:{p}"),
        }
    }
}

impl FromStr for GroupSpec {
    type Err = FiniteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |msg: &str| FiniteError::Spec {
            spec: s.to_string(),
            msg: msg.to_string(),
        };
        let (kind, args) = s.split_once(':').ok_or_else(|| bad("expected KIND:ARGS"))?;
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad("expected a number"));
        match kind.trim() {
            "ea" => {
                let (p, n) = args.split_once(',').ok_or_else(|| bad("expected ea:p,n"))?;
                Ok(GroupSpec::ElementaryAbelian {
                    p: num(p)?,
                    n: num(n)? as usize,
                })
            }
            "cp" => {
                let (p, ks) = args.split_once(',').ok_or_else(|| bad("expected cp:p,k1.k2"))?;
                let ks = ks
                    .split('.')
                    .map(|k| num(k).map(|k| k as u32))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(GroupSpec::CyclicProduct { p: num(p)?, ks })
            }
            "heis" => Ok(GroupSpec::Heisenberg { p: num(args)? }),
            _ => Err(bad("unknown kind, expected ea, cp or heis")),
        }
    }
}

/// A finite group as a multiplication table on `0..order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    pub label: String,
    pub p: u64,
    order: usize,
    table: Vec<usize>,
    identity: usize,
    inverse: Vec<usize>,
    generators: Vec<usize>,
    /// `(parent, generator position)` with `g = parent * gens[pos]`, BFS order.
    tree: Vec<(usize, usize, usize)>,
}

fn mixed_radix(mut i: usize, radices: &[usize]) -> Vec<usize> {
    radices
        .iter()
        .map(|&r| {
            let d = i % r;
            i /= r;
            d
        })
        .collect()
}

fn from_radix(digits: &[usize], radices: &[usize]) -> usize {
    digits
        .iter()
        .zip(radices)
        .rev()
        .fold(0, |acc, (&d, &r)| acc * r + d)
}

pub fn build_group(spec: &GroupSpec) -> Result<FiniteGroup, FiniteError> {
    match spec {
        GroupSpec::ElementaryAbelian { p, n } => cyclic_product(*p, &vec![1; *n], spec.to_string()),
        GroupSpec::CyclicProduct { p, ks } => cyclic_product(*p, ks, spec.to_string()),
        GroupSpec::Heisenberg { p } => heisenberg(*p),
    }
}

pub fn elementary_abelian(p: u64, n: usize) -> Result<FiniteGroup, FiniteError> {
    build_group(&GroupSpec::ElementaryAbelian { p, n })
}

pub fn cyclic_product_group(p: u64, ks: &[u32]) -> Result<FiniteGroup, FiniteError> {
    build_group(&GroupSpec::CyclicProduct { p, ks: ks.to_vec() })
}

pub fn heisenberg_group(p: u64) -> Result<FiniteGroup, FiniteError> {
    build_group(&GroupSpec::Heisenberg { p })
}

fn cyclic_product(p: u64, ks: &[u32], label: String) -> Result<FiniteGroup, FiniteError> {
    if !is_prime(p) {
        return Err(FiniteError::NotPrime(p));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(FiniteError::Spec {
            spec: label,
            msg: "need at least one factor, each of exponent >= 1".into(),
        });
    }
    let radices: Vec<usize> = ks.iter().map(|&k| (p as usize).pow(k)).collect();
    let order: usize = radices.iter().product();
    let table = (0..order * order)
        .map(|ab| {
            let (x, y) = (
                mixed_radix(ab / order, &radices),
                mixed_radix(ab % order, &radices),
            );
            let s: Vec<usize> = (0..radices.len()).map(|i| (x[i] + y[i]) % radices[i]).collect();
            from_radix(&s, &radices)
        })
        .collect();
    let generators = (0..radices.len())
        .map(|i| {
            let mut e = vec![0; radices.len()];
            e[i] = 1;
            from_radix(&e, &radices)
        })
        .collect();
    FiniteGroup::from_table(label, p, order, table, generators)
}

fn heisenberg(p: u64) -> Result<FiniteGroup, FiniteError> {
    if !is_prime(p) {
        return Err(FiniteError::NotPrime(p));
    }
    if p == 2 {
        return Err(FiniteError::DegenerateHeisenberg);
    }
    let q = p as usize;
    let radices = [q, q, q];
    let order = q * q * q;
    let table = (0..order * order)
        .map(|ab| {
            let x = mixed_radix(ab / order, &radices);
            let y = mixed_radix(ab % order, &radices);
            let s = [
                (x[0] + y[0]) % q,
                (x[1] + y[1]) % q,
                (x[2] + y[2] + x[1] * y[0]) % q,
            ];
            from_radix(&s, &radices)
        })
        .collect();
    let generators = vec![from_radix(&[1, 0, 0], &radices), from_radix(&[0, 1, 0], &radices)];
    FiniteGroup::from_table(format!("heis:{p}"), p, order, table, generators)
}

impl FiniteGroup {
    /// Validates the table and builds the generator spanning tree.
    pub fn from_table(
        label: String,
        p: u64,
        order: usize,
        table: Vec<usize>,
        generators: Vec<usize>,
    ) -> Result<Self, FiniteError> {
        let bad = |m: String| Err(FiniteError::NotAGroup(m));
        if table.len() != order * order || table.iter().any(|&x| x >= order) {
            return bad("table shape".into());
        }
        let mut pow = 1usize;
        while pow < order {
            pow *= p as usize;
        }
        if pow != order {
            return bad(format!("order {order} is not a power of {p}"));
        }
        let m = |a: usize, b: usize| table[a * order + b];
        let Some(identity) = (0..order).find(|&e| (0..order).all(|a| m(e, a) == a && m(a, e) == a)) else {
            return bad("no identity".into());
        };
        let mut inverse = vec![usize::MAX; order];
        for (a, slot) in inverse.iter_mut().enumerate() {
            match (0..order).find(|&b| m(a, b) == identity) {
                Some(b) => *slot = b,
                None => return bad(format!("element {a} has no inverse")),
            }
        }
        let assoc_ok = if order <= 128 {
            (0..order)
                .into_par_iter()
                .all(|a| (0..order).all(|b| (0..order).all(|c| m(m(a, b), c) == m(a, m(b, c)))))
        } else {
            // Light's test: checking the generators in the middle slot suffices.
            generators
                .iter()
                .all(|&g| (0..order).all(|a| (0..order).all(|c| m(m(a, g), c) == m(a, m(g, c)))))
        };
        if !assoc_ok {
            return bad("not associative".into());
        }
        let mut g = FiniteGroup {
            label,
            p,
            order,
            table,
            identity,
            inverse,
            generators,
            tree: vec![],
        };
        g.tree = g.spanning_tree(&g.generators.clone());
        if g.tree.len() != order {
            return bad("generators do not generate".into());
        }
        Ok(g)
    }

    fn spanning_tree(&self, gens: &[usize]) -> Vec<(usize, usize, usize)> {
        let mut seen = vec![false; self.order];
        seen[self.identity] = true;
        let mut tree = vec![(self.identity, usize::MAX, usize::MAX)];
        let mut queue = VecDeque::from([self.identity]);
        while let Some(x) = queue.pop_front() {
            for (pos, &s) in gens.iter().enumerate() {
                let y = self.mul(x, s);
                if !seen[y] {
                    seen[y] = true;
                    tree.push((y, x, pos));
                    queue.push_back(y);
                }
            }
        }
        tree
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn pow(&self, a: usize, e: i64) -> usize {
        let mut base = if e < 0 { self.inv(a) } else { a };
        let mut k = e.unsigned_abs();
        let mut acc = self.identity;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            k >>= 1;
        }
        acc
    }

    pub fn commutator(&self, a: usize, b: usize) -> usize {
        self.mul(self.mul(a, b), self.mul(self.inv(a), self.inv(b)))
    }

    pub fn element_order(&self, a: usize) -> usize {
        let mut x = a;
        let mut k = 1;
        while x != self.identity {
            x = self.mul(x, a);
            k += 1;
        }
        k
    }

    pub fn exponent(&self) -> usize {
        (0..self.order).map(|a| self.element_order(a)).max().unwrap_or(1)
    }

    pub fn center(&self) -> Subgroup {
        Subgroup::from_elements(
            (0..self.order)
                .filter(|&z| (0..self.order).all(|a| self.mul(z, a) == self.mul(a, z)))
                .collect(),
        )
    }

    pub fn whole(&self) -> Subgroup {
        Subgroup::from_elements((0..self.order).collect())
    }

    pub fn trivial(&self) -> Subgroup {
        Subgroup::from_elements(vec![self.identity])
    }

    /// Closure of `gens` under multiplication.
    pub fn generate(&self, gens: &[usize]) -> Subgroup {
        let mut seen = BTreeSet::from([self.identity]);
        let mut queue = VecDeque::from([self.identity]);
        while let Some(x) = queue.pop_front() {
            for &s in gens {
                let y = self.mul(x, s);
                if seen.insert(y) {
                    queue.push_back(y);
                }
            }
        }
        Subgroup::from_elements(seen.into_iter().collect())
    }

    /// Defines `phi` on every element from generator images along the spanning tree.
    fn extend(&self, images: &[usize]) -> Vec<usize> {
        let mut map = vec![usize::MAX; self.order];
        for &(x, parent, pos) in &self.tree {
            map[x] = if pos == usize::MAX {
                self.identity
            } else {
                self.mul(map[parent], images[pos])
            };
        }
        map
    }

    fn is_hom(&self, map: &[usize]) -> bool {
        (0..self.order).all(|a| (0..self.order).all(|b| map[self.mul(a, b)] == self.mul(map[a], map[b])))
    }

    fn candidate_count(&self) -> u64 {
        (self.order as u64).saturating_pow(self.generators.len() as u32)
    }
}

/// Evaluates `w` with `x_i -> images[i-1]`.
pub fn eval_word(g: &FiniteGroup, w: &Word, images: &[usize]) -> Result<usize, FiniteError> {
    if let Some(m) = w.max_generator() {
        if m as usize > images.len() {
            return Err(FiniteError::Arity {
                needed: m,
                given: images.len(),
            });
        }
    }
    if let Some(&bad) = images.iter().find(|&&x| x >= g.order) {
        return Err(FiniteError::Element(bad));
    }
    Ok(w.syllables().iter().fold(g.identity, |acc, &(i, e)| {
        g.mul(acc, g.pow(images[i as usize - 1], e))
    }))
}

/// Sorted element set closed under the group operation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Subgroup {
    elements: Vec<usize>,
}

impl Subgroup {
    fn from_elements(mut elements: Vec<usize>) -> Self {
        elements.sort_unstable();
        elements.dedup();
        Self { elements }
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.elements.binary_search(&x).is_ok()
    }

    pub fn is_subset(&self, other: &Subgroup) -> bool {
        self.elements.iter().all(|&x| other.contains(x))
    }

    /// Closure witness: every product of members is a member.
    pub fn is_closed(&self, g: &FiniteGroup) -> bool {
        self.elements
            .iter()
            .all(|&a| self.elements.iter().all(|&b| self.contains(g.mul(a, b))))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Endomorphism {
    pub map: Vec<usize>,
}

impl Endomorphism {
    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![false; self.map.len()];
        self.map.iter().all(|&y| !std::mem::replace(&mut seen[y], true))
    }

    pub fn is_idempotent(&self) -> bool {
        self.map.iter().all(|&y| self.map[y] == y)
    }

    pub fn compose(&self, inner: &Endomorphism) -> Endomorphism {
        Endomorphism {
            map: inner.map.iter().map(|&y| self.map[y]).collect(),
        }
    }

    pub fn image_of(&self, s: &Subgroup) -> Subgroup {
        Subgroup::from_elements(s.elements.iter().map(|&x| self.map[x]).collect())
    }

    pub fn image(&self) -> Subgroup {
        Subgroup::from_elements(self.map.clone())
    }
}

/// All endomorphisms, in the order of their generator-image tuples.
pub fn endomorphisms(g: &FiniteGroup, budget: u64) -> Result<Vec<Endomorphism>, FiniteError> {
    let candidates = g.candidate_count();
    if candidates > budget {
        return Err(FiniteError::BudgetExceeded { candidates, budget });
    }
    let radices = vec![g.order; g.generators.len()];
    let found: Vec<Option<Endomorphism>> = (0..candidates as usize)
        .into_par_iter()
        .map(|i| {
            let images = mixed_radix(i, &radices);
            let map = g.extend(&images);
            g.is_hom(&map).then_some(Endomorphism { map })
        })
        .collect();
    Ok(found.into_iter().flatten().collect())
}

/// `phi^k(G)` for `k` large enough that the chain has stabilized.
pub fn stable_image(g: &FiniteGroup, phi: &Endomorphism) -> Subgroup {
    let mut s = g.whole();
    loop {
        let next = phi.image_of(&s);
        if next.order() == s.order() {
            return s;
        }
        s = next;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Retract {
    pub subgroup: Subgroup,
    pub retractions: Vec<Endomorphism>,
}

/// Images of idempotent endomorphisms, each listed once with its retractions.
pub fn retracts_from(endos: &[Endomorphism]) -> Vec<Retract> {
    let mut out: Vec<Retract> = Vec::new();
    let mut index: BTreeMap<Subgroup, usize> = BTreeMap::new();
    for e in endos.iter().filter(|e| e.is_idempotent()) {
        let img = e.image();
        match index.get(&img) {
            Some(&i) => out[i].retractions.push(e.clone()),
            None => {
                index.insert(img.clone(), out.len());
                out.push(Retract {
                    subgroup: img,
                    retractions: vec![e.clone()],
                });
            }
        }
    }
    out
}

pub fn retracts(g: &FiniteGroup, budget: u64) -> Result<Vec<Retract>, FiniteError> {
    Ok(retracts_from(&endomorphisms(g, budget)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestDecision {
    pub by_endos: bool,
    pub by_retracts: bool,
}

impl TestDecision {
    pub fn agree(&self) -> bool {
        self.by_endos == self.by_retracts
    }
}

fn decide_with(g: &FiniteGroup, endos: &[Endomorphism], rets: &[Retract], x: usize) -> TestDecision {
    TestDecision {
        by_endos: endos.iter().filter(|e| e.apply(x) == x).all(|e| e.is_bijective()),
        by_retracts: !rets
            .iter()
            .any(|r| r.subgroup.order() < g.order() && r.subgroup.contains(x)),
    }
}

/// Decides whether `x` is a test element by both characterizations.
pub fn test_element_decide(g: &FiniteGroup, x: usize, budget: u64) -> Result<TestDecision, FiniteError> {
    if x >= g.order {
        return Err(FiniteError::Element(x));
    }
    let endos = endomorphisms(g, budget)?;
    let rets = retracts_from(&endos);
    let d = decide_with(g, &endos, &rets, x);
    if !d.agree() {
        return Err(FiniteError::Assertion(format!(
            "element {x}: by_endos = {}, by_retracts = {}",
            d.by_endos, d.by_retracts
        )));
    }
    Ok(d)
}

/// Every subgroup, by joining cyclic subgroups until no new subgroup appears.
pub fn all_subgroups(g: &FiniteGroup) -> Vec<Subgroup> {
    let cyclic: BTreeSet<Subgroup> = (0..g.order).map(|x| g.generate(&[x])).collect();
    let mut all = cyclic.clone();
    let mut frontier: Vec<Subgroup> = cyclic.iter().cloned().collect();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for s in &frontier {
            for c in &cyclic {
                if c.is_subset(s) {
                    continue;
                }
                let mut gens = s.elements.clone();
                gens.extend(&c.elements);
                let j = g.generate(&gens);
                if all.insert(j.clone()) {
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    all.into_iter().collect()
}

fn greedy_generators(g: &FiniteGroup, s: &Subgroup) -> Vec<usize> {
    let mut gens = Vec::new();
    let mut span = g.trivial();
    // Elements of largest order first keeps generating sets short.
    let mut by_order: Vec<usize> = s.elements.clone();
    by_order.sort_by_key(|&x| std::cmp::Reverse(g.element_order(x)));
    for x in by_order {
        if !span.contains(x) {
            gens.push(x);
            span = g.generate(&gens);
        }
    }
    gens
}

/// Exhaustive search for an isomorphism between two subgroups of `g`.
pub fn isomorphic(g: &FiniteGroup, a: &Subgroup, b: &Subgroup) -> bool {
    if a.order() != b.order() {
        return false;
    }
    let profile = |s: &Subgroup| {
        let mut v: Vec<usize> = s.elements.iter().map(|&x| g.element_order(x)).collect();
        v.sort_unstable();
        v
    };
    if profile(a) != profile(b) {
        return false;
    }
    let gens = greedy_generators(g, a);
    let tree = g.spanning_tree(&gens);
    let radices = vec![b.order(); gens.len()];
    let total: usize = radices.iter().product();
    (0..total).into_par_iter().any(|i| {
        let images: Vec<usize> = mixed_radix(i, &radices)
            .into_iter()
            .map(|d| b.elements[d])
            .collect();
        let mut map = BTreeMap::new();
        for &(x, parent, pos) in &tree {
            let y = if pos == usize::MAX {
                g.identity
            } else {
                g.mul(map[&parent], images[pos])
            };
            map.insert(x, y);
        }
        let hom = a.elements.iter().all(|&x| {
            a.elements
                .iter()
                .all(|&y| map[&g.mul(x, y)] == g.mul(map[&x], map[&y]))
        });
        let onto: BTreeSet<usize> = map.values().copied().collect();
        hom && onto.len() == b.order()
    })
}

/// Retracts containing `h` that are minimal under inclusion among those.
pub fn minimal_retracts_over(
    g: &FiniteGroup,
    rets: &[Retract],
    h: &Subgroup,
) -> Result<Vec<Subgroup>, FiniteError> {
    let over: Vec<&Subgroup> = rets
        .iter()
        .map(|r| &r.subgroup)
        .filter(|s| h.is_subset(s))
        .collect();
    let minimal: Vec<Subgroup> = over
        .iter()
        .filter(|s| !over.iter().any(|t| t.order() < s.order() && t.is_subset(s)))
        .map(|s| (*s).clone())
        .collect();
    for pair in minimal.windows(2) {
        if !isomorphic(g, &pair[0], &pair[1]) {
            return Err(FiniteError::Assertion(format!(
                "minimal retracts of orders {} and {} are not isomorphic",
                pair[0].order(),
                pair[1].order()
            )));
        }
    }
    Ok(minimal)
}

/// The Frattini subgroup as `G^p [G,G]`, cross-checked against the
/// intersection of the kernels of all epimorphisms onto `Z/p`.
pub fn frattini_of_finite(g: &FiniteGroup) -> Result<Subgroup, FiniteError> {
    let mut gens: Vec<usize> = (0..g.order).map(|x| g.pow(x, g.p as i64)).collect();
    for a in 0..g.order {
        for b in 0..g.order {
            gens.push(g.commutator(a, b));
        }
    }
    gens.sort_unstable();
    gens.dedup();
    let phi = g.generate(&gens);
    let p = g.p as usize;
    let radices = vec![p; g.generators.len()];
    let mut meet: BTreeSet<usize> = (0..g.order).collect();
    for i in 1..radices.iter().product() {
        let images = mixed_radix(i, &radices);
        let mut val = vec![0usize; g.order];
        for &(x, parent, pos) in &g.tree {
            if pos != usize::MAX {
                val[x] = (val[parent] + images[pos]) % p;
            }
        }
        let hom = (0..g.order).all(|a| (0..g.order).all(|b| val[g.mul(a, b)] == (val[a] + val[b]) % p));
        if hom {
            meet.retain(|&x| val[x] == 0);
        }
    }
    if phi.elements != meet.into_iter().collect::<Vec<_>>() {
        return Err(FiniteError::Assertion(
            "G^p[G,G] differs from the intersection of maximal subgroups".into(),
        ));
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "NOT_APPLICABLE",
        })
    }
}

/// Orbit-theorem check for one element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub status: CheckStatus,
    pub transitive: bool,
    pub orbit_size: usize,
    pub preserving: usize,
    pub non_bijective: usize,
}

/// Cosets of `phi` labelled by their least element.
fn coset_labels(g: &FiniteGroup, phi: &Subgroup) -> Vec<usize> {
    (0..g.order)
        .map(|x| phi.elements.iter().map(|&f| g.mul(x, f)).min().expect("nonempty"))
        .collect()
}

/// Whether the automorphisms act transitively on the nonidentity cosets of `phi`.
pub fn transitive_on_frattini_quotient(g: &FiniteGroup, autos: &[&Endomorphism], phi: &Subgroup) -> bool {
    let labels = coset_labels(g, phi);
    let trivial = labels[g.identity];
    let nontrivial: BTreeSet<usize> = labels.iter().copied().filter(|&c| c != trivial).collect();
    let Some(&start) = nontrivial.iter().next() else {
        return true;
    };
    let reached: BTreeSet<usize> = autos.iter().map(|a| labels[a.apply(start)]).collect();
    reached == nontrivial
}

struct Context {
    endos: Vec<Endomorphism>,
    rets: Vec<Retract>,
    phi: Subgroup,
}

impl Context {
    fn new(g: &FiniteGroup, budget: u64) -> Result<Self, FiniteError> {
        let endos = endomorphisms(g, budget)?;
        let rets = retracts_from(&endos);
        Ok(Self {
            endos,
            rets,
            phi: frattini_of_finite(g)?,
        })
    }

    fn autos(&self) -> Vec<&Endomorphism> {
        self.endos.iter().filter(|e| e.is_bijective()).collect()
    }
}

fn orbit_with(g: &FiniteGroup, ctx: &Context, u: usize) -> OrbitReport {
    let autos = ctx.autos();
    let transitive = transitive_on_frattini_quotient(g, &autos, &ctx.phi);
    let orbit: BTreeSet<usize> = autos.iter().map(|a| a.apply(u)).collect();
    if !transitive || u == g.identity {
        return OrbitReport {
            status: CheckStatus::NotApplicable,
            transitive,
            orbit_size: orbit.len(),
            preserving: 0,
            non_bijective: 0,
        };
    }
    let preserving: Vec<&Endomorphism> = ctx
        .endos
        .iter()
        .filter(|e| orbit.iter().all(|&x| orbit.contains(&e.apply(x))))
        .collect();
    let non_bijective = preserving.iter().filter(|e| !e.is_bijective()).count();
    OrbitReport {
        status: if non_bijective == 0 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        transitive,
        orbit_size: orbit.len(),
        preserving: preserving.len(),
        non_bijective,
    }
}

/// Checks the orbit theorem for `u`; NOT_APPLICABLE when the automorphism
/// group is not transitive on the Frattini quotient or `u` is the identity.
pub fn orbit_check(g: &FiniteGroup, u: usize, budget: u64) -> Result<OrbitReport, FiniteError> {
    if u >= g.order {
        return Err(FiniteError::Element(u));
    }
    Ok(orbit_with(g, &Context::new(g, budget)?, u))
}

pub const CHECKS: [&str; 7] = [
    "test-retract",
    "stable-image",
    "orbit",
    "primitive-preservation",
    "minimal-retracts",
    "frattini",
    "no-test-elements",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub counts: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleReport {
    pub group: String,
    pub checks: Vec<CheckResult>,
}

impl OracleReport {
    pub fn status(&self) -> CheckStatus {
        if self.checks.iter().any(|c| c.status == CheckStatus::Fail) {
            CheckStatus::Fail
        } else if self.checks.iter().all(|c| c.status == CheckStatus::NotApplicable) {
            CheckStatus::NotApplicable
        } else {
            CheckStatus::Pass
        }
    }
}

fn pass_if(ok: bool) -> CheckStatus {
    if ok {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    }
}

fn counts<const N: usize>(pairs: [(&str, u64); N]) -> BTreeMap<String, u64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn run_one(g: &FiniteGroup, ctx: &Context, name: &str) -> Result<CheckResult, FiniteError> {
    let n = g.order as u64;
    let (status, counts) = match name {
        "test-retract" => {
            let ds: Vec<TestDecision> = (0..g.order)
                .map(|x| decide_with(g, &ctx.endos, &ctx.rets, x))
                .collect();
            let agree = ds.iter().filter(|d| d.agree()).count() as u64;
            let tests = ds.iter().filter(|d| d.by_endos).count() as u64;
            (
                pass_if(agree == n),
                counts([
                    ("elements", n),
                    ("agree", agree),
                    ("test_elements", tests),
                    ("endomorphisms", ctx.endos.len() as u64),
                    ("retracts", ctx.rets.len() as u64),
                ]),
            )
        }
        "stable-image" => {
            let images: BTreeSet<&Subgroup> = ctx.rets.iter().map(|r| &r.subgroup).collect();
            let mut is_retract = 0u64;
            let mut automorphic = 0u64;
            for e in &ctx.endos {
                let s = stable_image(g, e);
                if images.contains(&s) {
                    is_retract += 1;
                }
                let restricted: BTreeSet<usize> = s.elements.iter().map(|&x| e.apply(x)).collect();
                if restricted.len() == s.order() && restricted.iter().all(|&y| s.contains(y)) {
                    automorphic += 1;
                }
            }
            let total = ctx.endos.len() as u64;
            (
                pass_if(is_retract == total && automorphic == total),
                counts([
                    ("endomorphisms", total),
                    ("stable_image_is_retract", is_retract),
                    ("bijective_on_stable_image", automorphic),
                ]),
            )
        }
        "orbit" => {
            let reports: Vec<OrbitReport> = (0..g.order)
                .filter(|&u| u != g.identity)
                .map(|u| orbit_with(g, ctx, u))
                .collect();
            let applicable = reports
                .iter()
                .filter(|r| r.status != CheckStatus::NotApplicable)
                .count() as u64;
            let failed = reports.iter().filter(|r| r.status == CheckStatus::Fail).count() as u64;
            let preserving: u64 = reports.iter().map(|r| r.preserving as u64).sum();
            let status = if applicable == 0 {
                CheckStatus::NotApplicable
            } else {
                pass_if(failed == 0)
            };
            (
                status,
                counts([
                    ("elements", reports.len() as u64),
                    ("applicable", applicable),
                    ("failed", failed),
                    ("preserving_endomorphisms", preserving),
                ]),
            )
        }
        "primitive-preservation" => {
            let primitive: Vec<usize> = (0..g.order).filter(|&x| !ctx.phi.contains(x)).collect();
            let preserving: Vec<&Endomorphism> = ctx
                .endos
                .iter()
                .filter(|e| primitive.iter().all(|&x| !ctx.phi.contains(e.apply(x))))
                .collect();
            let bad = preserving.iter().filter(|e| !e.is_bijective()).count() as u64;
            (
                pass_if(bad == 0),
                counts([("preserving", preserving.len() as u64), ("non_bijective", bad)]),
            )
        }
        "minimal-retracts" => {
            let subs = all_subgroups(g);
            let mut failures = 0u64;
            let mut multiple = 0u64;
            for h in &subs {
                match minimal_retracts_over(g, &ctx.rets, h) {
                    Ok(m) if m.len() > 1 => multiple += 1,
                    Ok(_) => {}
                    Err(_) => failures += 1,
                }
            }
            (
                pass_if(failures == 0),
                counts([
                    ("subgroups", subs.len() as u64),
                    ("with_several_minimal", multiple),
                    ("non_isomorphic", failures),
                ]),
            )
        }
        "frattini" => {
            let closed = ctx.phi.is_closed(g);
            (
                pass_if(closed),
                counts([
                    ("order", ctx.phi.order() as u64),
                    ("index", n / ctx.phi.order() as u64),
                ]),
            )
        }
        "no-test-elements" => {
            let elementary = ctx.phi.order() == 1
                && (0..g.order).all(|a| (0..g.order).all(|b| g.mul(a, b) == g.mul(b, a)));
            if !elementary || g.generators.len() < 2 {
                (CheckStatus::NotApplicable, counts([("elements", n)]))
            } else {
                let tests = (0..g.order)
                    .filter(|&x| decide_with(g, &ctx.endos, &ctx.rets, x).by_endos)
                    .count() as u64;
                (
                    pass_if(tests == 0),
                    counts([("elements", n), ("test_elements", tests)]),
                )
            }
        }
        other => return Err(FiniteError::UnknownCheck(other.to_string())),
    };
    Ok(CheckResult {
        name: name.to_string(),
        status,
        counts,
    })
}

/// Runs the named checks (all of [`CHECKS`] when `names` is empty).
pub fn run_checks(g: &FiniteGroup, names: &[&str], budget: u64) -> Result<OracleReport, FiniteError> {
    if let Some(bad) = names.iter().find(|n| !CHECKS.contains(n)) {
        return Err(FiniteError::UnknownCheck(bad.to_string()));
    }
    let ctx = Context::new(g, budget)?;
    let names: Vec<&str> = if names.is_empty() {
        CHECKS.to_vec()
    } else {
        names.to_vec()
    };
    let checks = names
        .iter()
        .map(|n| run_one(g, &ctx, n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OracleReport {
        group: g.label.clone(),
        checks,
    })
}
