//! Intruder deduction: proof trees over the Dolev-Yao rules with xor, proof
//! checking and normalization, and the polynomial saturation procedure that
//! decides `X ⊢ t` and rebuilds a normal proof for it.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::gf2::{Basis, BitVec};
use crate::terms::{subterms_of, Shape, Term, TermSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Ax,
    /// First projection of a pair.
    Split1,
    /// Second projection of a pair.
    Split2,
    Sdec,
    Adec,
    Pk,
    Pair,
    Senc,
    Aenc,
    Xor,
}

impl Rule {
    /// Rule name as written in proof output. Both projections print as
    /// `split`.
    pub fn tag(self) -> &'static str {
        match self {
            Rule::Ax => "ax",
            Rule::Split1 | Rule::Split2 => "split",
            Rule::Sdec => "sdec",
            Rule::Adec => "adec",
            Rule::Pk => "pk",
            Rule::Pair => "pair",
            Rule::Senc => "senc",
            Rule::Aenc => "aenc",
            Rule::Xor => "xor",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A proof tree. Every node is labelled with a normalized term and the rule
/// that concludes it from its children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub conclusion: Term,
    pub rule: Rule,
    pub children: Vec<Derivation>,
}

impl Derivation {
    pub fn new(conclusion: Term, rule: Rule, children: Vec<Derivation>) -> Self {
        Derivation {
            conclusion,
            rule,
            children,
        }
    }

    pub fn axiom(t: Term) -> Self {
        Derivation::new(t, Rule::Ax, Vec::new())
    }

    /// Applies `rule` to the given subproofs, computing the conclusion.
    /// Returns `None` if the premises do not fit the rule.
    pub fn apply(rule: Rule, children: Vec<Derivation>) -> Option<Self> {
        let prem: Vec<&Term> = children.iter().map(|c| &c.conclusion).collect();
        let conclusion = conclude(rule, &prem)?;
        Some(Derivation::new(conclusion, rule, children))
    }

    /// Last rule is a constructor: `pk`, `pair`, `senc`, `aenc`, or an `xor`
    /// whose conclusion is non-standard. The premise-free `xor` concluding
    /// `0` also counts as a constructor.
    pub fn ends_in_constructor(&self) -> bool {
        match self.rule {
            Rule::Pk | Rule::Pair | Rule::Senc | Rule::Aenc => true,
            Rule::Xor => !self.conclusion.is_standard() || self.children.is_empty(),
            _ => false,
        }
    }

    pub fn ends_in_destructor(&self) -> bool {
        !self.ends_in_constructor()
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(Derivation::node_count)
            .sum::<usize>()
    }

    pub fn axioms(&self) -> TermSet {
        let mut out = TermSet::new();
        self.visit(&mut |d| {
            if d.rule == Rule::Ax {
                out.insert(d.conclusion.clone());
            }
        });
        out
    }

    /// All node labels.
    pub fn terms(&self) -> TermSet {
        let mut out = TermSet::new();
        self.visit(&mut |d| {
            out.insert(d.conclusion.clone());
        });
        out
    }

    /// Pre-order traversal of all subproofs.
    pub fn visit<'a, F: FnMut(&'a Derivation)>(&'a self, f: &mut F) {
        f(self);
        for c in &self.children {
            c.visit(f);
        }
    }

    pub fn subproofs(&self) -> Vec<&Derivation> {
        let mut out = Vec::new();
        self.visit(&mut |d| out.push(d));
        out
    }

    /// Maps every label through `f`, keeping shape and rules.
    pub fn map_terms<F: FnMut(&Term) -> Term>(&self, f: &mut F) -> Derivation {
        Derivation {
            conclusion: f(&self.conclusion),
            rule: self.rule,
            children: self.children.iter().map(|c| c.map_terms(f)).collect(),
        }
    }

    fn fmt_tree(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(
            f,
            "{:indent$}{}  [{}]",
            "",
            self.conclusion,
            self.rule,
            indent = 2 * depth
        )?;
        for c in &self.children {
            c.fmt_tree(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_tree(f, 0)
    }
}

/// Conclusion of `rule` over the premises, if they form an instance.
fn conclude(rule: Rule, prem: &[&Term]) -> Option<Term> {
    match (rule, prem) {
        (Rule::Ax, []) => None,
        (Rule::Split1, [p]) => match p.shape() {
            Shape::Pair(a, _) => Some(a.clone()),
            _ => None,
        },
        (Rule::Split2, [p]) => match p.shape() {
            Shape::Pair(_, b) => Some(b.clone()),
            _ => None,
        },
        (Rule::Sdec, [p, k]) => match p.shape() {
            Shape::Senc(u, v) if v == *k => Some(u.clone()),
            _ => None,
        },
        (Rule::Adec, [p, k]) => match p.shape() {
            Shape::Aenc(u, pk) if pk.children() == std::slice::from_ref(*k) => Some(u.clone()),
            _ => None,
        },
        (Rule::Pk, [k]) => Some(Term::pk((*k).clone())),
        (Rule::Pair, [a, b]) => Some(Term::pair((*a).clone(), (*b).clone())),
        (Rule::Senc, [a, b]) => Some(Term::senc((*a).clone(), (*b).clone())),
        (Rule::Aenc, [a, b]) => Term::try_aenc((*a).clone(), (*b).clone()),
        (Rule::Xor, ps) => Some(Term::xor(ps.iter().map(|t| (*t).clone()))),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckReason {
    #[error("{rule} node with {found} premise(s) is not an instance of the rule")]
    BadInstance { rule: Rule, found: usize },
    #[error("{rule} premises conclude {expected}, node says {found}")]
    WrongConclusion {
        rule: Rule,
        expected: Term,
        found: Term,
    },
    #[error("axiom {0} is not in the knowledge set")]
    AxiomOutsideKnowledge(Term),
    #[error("label `{0}` is not in normal form")]
    NotNormalized(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid proof at node {path:?}: {reason}")]
pub struct CheckError {
    /// Child indices from the root to the offending node.
    pub path: Vec<usize>,
    pub reason: CheckReason,
}

/// Accepts iff every node is a rule instance and every axiom is in
/// `knowledge`.
pub fn check_derivation(d: &Derivation, knowledge: &TermSet) -> Result<(), CheckError> {
    let mut path = Vec::new();
    check_node(d, knowledge, &mut path)
}

fn check_node(
    d: &Derivation,
    knowledge: &TermSet,
    path: &mut Vec<usize>,
) -> Result<(), CheckError> {
    let fail = |path: &Vec<usize>, reason| {
        Err(CheckError {
            path: path.clone(),
            reason,
        })
    };
    if d.rule == Rule::Ax {
        if !d.children.is_empty() {
            return fail(
                path,
                CheckReason::BadInstance {
                    rule: Rule::Ax,
                    found: d.children.len(),
                },
            );
        }
        if !knowledge.contains(&d.conclusion) {
            return fail(
                path,
                CheckReason::AxiomOutsideKnowledge(d.conclusion.clone()),
            );
        }
        return Ok(());
    }
    let prem: Vec<&Term> = d.children.iter().map(|c| &c.conclusion).collect();
    match conclude(d.rule, &prem) {
        None => {
            return fail(
                path,
                CheckReason::BadInstance {
                    rule: d.rule,
                    found: prem.len(),
                },
            )
        }
        Some(c) if c != d.conclusion => {
            return fail(
                path,
                CheckReason::WrongConclusion {
                    rule: d.rule,
                    expected: c,
                    found: d.conclusion.clone(),
                },
            )
        }
        Some(_) => {}
    }
    for (i, c) in d.children.iter().enumerate() {
        path.push(i);
        check_node(c, knowledge, path)?;
        path.pop();
    }
    Ok(())
}

/// A proof is normal if no `split`/`sdec`/`adec` has a constructor-concluded
/// leftmost premise, and every `xor` node has pairwise distinct premises,
/// none equal to its conclusion and none concluded by `xor`.
pub fn is_normal(d: &Derivation) -> bool {
    let local = match d.rule {
        Rule::Split1 | Rule::Split2 | Rule::Sdec | Rule::Adec => {
            d.children.first().is_none_or(|m| !m.ends_in_constructor())
        }
        Rule::Xor => {
            let mut seen = HashSet::new();
            d.children.iter().all(|c| {
                c.rule != Rule::Xor
                    && c.conclusion != d.conclusion
                    && seen.insert(c.conclusion.clone())
            })
        }
        _ => true,
    };
    local && d.children.iter().all(is_normal)
}

/// Rewrites a valid proof into a normal proof with the same conclusion,
/// never adding axioms and never adding nodes. Children are normalized
/// first, then the root is collapsed.
pub fn normalize_derivation(d: &Derivation) -> Derivation {
    let children = d.children.iter().map(normalize_derivation).collect();
    collapse_root(Derivation::new(d.conclusion.clone(), d.rule, children))
}

/// Normalizes the root of a proof whose immediate subproofs are already
/// normal.
pub(crate) fn collapse_root(mut d: Derivation) -> Derivation {
    match d.rule {
        Rule::Split1 | Rule::Split2 | Rule::Sdec | Rule::Adec => {
            if d.children
                .first()
                .is_some_and(Derivation::ends_in_constructor)
            {
                let pick = usize::from(d.rule == Rule::Split2);
                let mut major = d.children.swap_remove(0);
                return major.children.swap_remove(pick);
            }
            d
        }
        Rule::Xor => {
            let mut flat = Vec::with_capacity(d.children.len());
            for c in d.children {
                if c.rule == Rule::Xor {
                    flat.extend(c.children);
                } else {
                    flat.push(c);
                }
            }
            let mut kept: Vec<Derivation> = Vec::with_capacity(flat.len());
            for c in flat {
                match kept.iter().position(|k| k.conclusion == c.conclusion) {
                    Some(pos) => {
                        kept.remove(pos);
                    }
                    None => kept.push(c),
                }
            }
            if let Some(pos) = kept.iter().position(|k| k.conclusion == d.conclusion) {
                return kept.swap_remove(pos);
            }
            d.children = kept;
            d
        }
        _ => d,
    }
}

#[derive(Clone, Debug)]
enum Origin {
    Axiom,
    Rule(Rule, Vec<usize>),
}

/// Saturation state over the subterm universe `st(X ∪ {t})`.
struct Saturation {
    universe: Vec<Term>,
    index: HashMap<Term, usize>,
    vectors: Vec<BitVec>,
    origin: Vec<Option<Origin>>,
}

impl Saturation {
    fn run(knowledge: &TermSet, goal: &Term) -> Saturation {
        let mut st = subterms_of(knowledge);
        goal.collect_subterms(&mut st);
        let universe: Vec<Term> = st.into_iter().collect();
        let n = universe.len();
        let index: HashMap<Term, usize> = universe
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, t)| (t, i))
            .collect();

        // one coordinate per standard non-zero term
        let mut coord = vec![usize::MAX; n];
        let mut dim = 0;
        for (i, t) in universe.iter().enumerate() {
            if t.is_standard() && !t.is_zero() {
                coord[i] = dim;
                dim += 1;
            }
        }
        let vectors: Vec<BitVec> = universe
            .iter()
            .map(|t| {
                let mut v = BitVec::zeros(dim);
                if !t.is_zero() {
                    for f in t.factors() {
                        v.set(coord[index[f]]);
                    }
                }
                v
            })
            .collect();

        let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, t) in universe.iter().enumerate() {
            if t.is_standard() {
                for c in t.children() {
                    parents[index[c]].push(i);
                }
            }
        }

        let mut sat = Saturation {
            universe,
            index,
            vectors,
            origin: vec![None; n],
        };
        let mut basis = Basis::new(dim, n);
        let mut waiting: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut queue = VecDeque::new();

        for t in knowledge {
            sat.mark(sat.index[t], Origin::Axiom, &mut queue);
        }
        if let Some(&z) = sat.index.get(&Term::zero()) {
            sat.mark(z, Origin::Rule(Rule::Xor, Vec::new()), &mut queue);
        }

        loop {
            while let Some(i) = queue.pop_front() {
                basis.insert(i, &sat.vectors[i]);
                let t = sat.universe[i].clone();
                match t.shape() {
                    Shape::Pair(a, b) => {
                        sat.mark(
                            sat.index[a],
                            Origin::Rule(Rule::Split1, vec![i]),
                            &mut queue,
                        );
                        sat.mark(
                            sat.index[b],
                            Origin::Rule(Rule::Split2, vec![i]),
                            &mut queue,
                        );
                    }
                    Shape::Senc(_, k) => {
                        let k = sat.index[k];
                        if sat.known(k) {
                            sat.decrypt(i, k, &mut queue);
                        } else {
                            waiting[k].push(i);
                        }
                    }
                    Shape::Aenc(_, pk) => {
                        let k = sat.index[&pk.children()[0]];
                        if sat.known(k) {
                            sat.decrypt(i, k, &mut queue);
                        } else {
                            waiting[k].push(i);
                        }
                    }
                    _ => {}
                }
                for major in std::mem::take(&mut waiting[i]) {
                    sat.decrypt(major, i, &mut queue);
                }
                for &p in &parents[i] {
                    if sat.known(p) {
                        continue;
                    }
                    let kids: Vec<usize> = sat.universe[p]
                        .children()
                        .iter()
                        .map(|c| sat.index[c])
                        .collect();
                    if kids.iter().all(|&c| sat.known(c)) {
                        let rule = match sat.universe[p].shape() {
                            Shape::Pk(_) => Rule::Pk,
                            Shape::Pair(..) => Rule::Pair,
                            Shape::Senc(..) => Rule::Senc,
                            Shape::Aenc(..) => Rule::Aenc,
                            _ => unreachable!("atoms have no children"),
                        };
                        sat.mark(p, Origin::Rule(rule, kids), &mut queue);
                    }
                }
            }
            let mut added = false;
            for j in 0..n {
                if sat.known(j) {
                    continue;
                }
                if let Some(comb) = basis.solve(&sat.vectors[j]) {
                    sat.mark(j, Origin::Rule(Rule::Xor, comb), &mut queue);
                    added = true;
                }
            }
            if !added {
                break;
            }
        }
        sat
    }

    fn known(&self, i: usize) -> bool {
        self.origin[i].is_some()
    }

    fn mark(&mut self, i: usize, origin: Origin, queue: &mut VecDeque<usize>) {
        if self.origin[i].is_none() {
            self.origin[i] = Some(origin);
            queue.push_back(i);
        }
    }

    fn decrypt(&mut self, major: usize, key: usize, queue: &mut VecDeque<usize>) {
        let (payload, rule) = match self.universe[major].shape() {
            Shape::Senc(p, _) => (p, Rule::Sdec),
            Shape::Aenc(p, _) => (p, Rule::Adec),
            _ => unreachable!("only encryptions wait for keys"),
        };
        let p = self.index[payload];
        self.mark(p, Origin::Rule(rule, vec![major, key]), queue);
    }

    fn known_set(&self) -> TermSet {
        (0..self.universe.len())
            .filter(|&i| self.known(i))
            .map(|i| self.universe[i].clone())
            .collect()
    }

    fn proof(&self, i: usize, memo: &mut HashMap<usize, Derivation>) -> Derivation {
        if let Some(d) = memo.get(&i) {
            return d.clone();
        }
        let t = self.universe[i].clone();
        let d = match self.origin[i]
            .as_ref()
            .expect("proof requested for unknown term")
        {
            Origin::Axiom => Derivation::axiom(t),
            Origin::Rule(rule, prem) => {
                let children = prem.iter().map(|&p| self.proof(p, memo)).collect();
                Derivation::new(t, *rule, children)
            }
        };
        memo.insert(i, d.clone());
        d
    }
}

/// The least set `Y ⊇ X` inside `st(X ∪ {t})` closed under every rule.
/// `X ⊢ t` iff `t` is in the result.
pub fn saturate(knowledge: &TermSet, goal: &Term) -> TermSet {
    Saturation::run(knowledge, goal).known_set()
}

/// A subset `M ⊆ Y` with `u = nf(⊕M)`, found by Gaussian elimination over
/// the standard terms of `st(Y ∪ {u})`.
pub fn xor_combination(y: &TermSet, u: &Term) -> Option<TermSet> {
    let mut st = subterms_of(y);
    u.collect_subterms(&mut st);
    let coords: HashMap<Term, usize> = st
        .iter()
        .filter(|t| t.is_standard() && !t.is_zero())
        .cloned()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();
    let vector = |t: &Term| {
        let mut v = BitVec::zeros(coords.len());
        for f in t.factors() {
            if let Some(&c) = coords.get(f) {
                v.set(c);
            }
        }
        v
    };
    let members: Vec<&Term> = y.iter().collect();
    let mut basis = Basis::new(coords.len(), members.len());
    for (i, t) in members.iter().enumerate() {
        basis.insert(i, &vector(t));
    }
    basis
        .solve(&vector(u))
        .map(|ids| ids.into_iter().map(|i| members[i].clone()).collect())
}

#[derive(Clone, Debug)]
pub struct DeduceResult {
    pub derivable: bool,
    /// A normal proof, present iff `derivable`.
    pub witness: Option<Derivation>,
}

/// Decides `X ⊢ t` and, when it holds, returns a normal proof.
pub fn derive(knowledge: &TermSet, goal: &Term) -> DeduceResult {
    let sat = Saturation::run(knowledge, goal);
    let i = sat.index[goal];
    if !sat.known(i) {
        return DeduceResult {
            derivable: false,
            witness: None,
        };
    }
    let raw = sat.proof(i, &mut HashMap::new());
    DeduceResult {
        derivable: true,
        witness: Some(normalize_derivation(&raw)),
    }
}

/// Decision only.
pub fn derivable(knowledge: &TermSet, goal: &Term) -> bool {
    let sat = Saturation::run(knowledge, goal);
    sat.known(sat.index[goal])
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("universe of {0} terms is too large for brute-force closure")]
    UniverseTooLarge(usize),
    #[error("xor span exceeded {0} elements")]
    SpanTooLarge(usize),
}

const ORACLE_MAX_UNIVERSE: usize = 256;
const ORACLE_MAX_SPAN: usize = 1 << 16;

/// Brute-force closure of `X` inside `universe`: every rule is tried on every
/// premise tuple, and every xor of a subset of the current set is formed.
/// Shares nothing with [`saturate`] beyond the term algebra; meant as a test
/// oracle for small instances.
pub fn naive_closure(knowledge: &TermSet, universe: &TermSet) -> Result<TermSet, OracleError> {
    if universe.len() > ORACLE_MAX_UNIVERSE {
        return Err(OracleError::UniverseTooLarge(universe.len()));
    }
    let mut have: TermSet = knowledge.clone();
    loop {
        let mut new = TermSet::new();
        let current: Vec<Term> = have.iter().cloned().collect();
        let mut offer = |t: Term| {
            if universe.contains(&t) && !have.contains(&t) {
                new.insert(t);
            }
        };
        for y in &current {
            offer(Term::pk(y.clone()));
            if let Shape::Pair(a, b) = y.shape() {
                offer(a.clone());
                offer(b.clone());
            }
            for z in &current {
                offer(Term::pair(y.clone(), z.clone()));
                offer(Term::senc(y.clone(), z.clone()));
                if let Some(e) = Term::try_aenc(y.clone(), z.clone()) {
                    offer(e);
                }
                match y.shape() {
                    Shape::Senc(u, v) if v == z => offer(u.clone()),
                    Shape::Aenc(u, pk) if pk == &Term::pk(z.clone()) => offer(u.clone()),
                    _ => {}
                }
            }
        }
        // every subset sum, built one element at a time
        let mut span: HashSet<Term> = HashSet::from([Term::zero()]);
        for y in &current {
            let sums: Vec<Term> = span
                .iter()
                .map(|s| Term::xor([s.clone(), y.clone()]))
                .collect();
            span.extend(sums);
            if span.len() > ORACLE_MAX_SPAN {
                return Err(OracleError::SpanTooLarge(ORACLE_MAX_SPAN));
            }
        }
        for s in span {
            offer(s);
        }
        if new.is_empty() {
            return Ok(have);
        }
        have.extend(new);
    }
}

/// Checks the subterm property on every subproof `δ` of a normal proof:
/// `terms(δ) ⊆ st(X ∪ {conc δ})`, and `terms(δ) ⊆ st(X)` when `δ` ends in a
/// destructor.
pub fn check_subterm_property(d: &Derivation, knowledge: &TermSet) -> Result<(), String> {
    let st_x = subterms_of(knowledge);
    for sub in d.subproofs() {
        let terms = sub.terms();
        let mut bound = st_x.clone();
        sub.conclusion.collect_subterms(&mut bound);
        if let Some(t) = terms.iter().find(|t| !bound.contains(t)) {
            return Err(format!(
                "{t} in proof of {} is outside st(X ∪ {{t}})",
                sub.conclusion
            ));
        }
        if sub.ends_in_destructor() {
            if let Some(t) = terms.iter().find(|t| !st_x.contains(t)) {
                return Err(format!(
                    "{t} in destructor-ended proof of {} is outside st(X)",
                    sub.conclusion
                ));
            }
        }
    }
    Ok(())
}

/// Structural conditions every `xor` node of a normal proof satisfies:
/// non-standard premises are concluded by `ax`, `split`, `sdec` or `adec`;
/// standard premises are factors of the conclusion or of a non-standard
/// premise, and for `xor_d` the conclusion is a factor of a non-standard
/// premise.
pub fn check_xor_structure(d: &Derivation) -> Result<(), String> {
    for node in d.subproofs() {
        if node.rule != Rule::Xor || node.children.is_empty() {
            continue;
        }
        let t = &node.conclusion;
        let nonstd: Vec<&Term> = node
            .children
            .iter()
            .map(|c| &c.conclusion)
            .filter(|c| !c.is_standard())
            .collect();
        let factor_of_nonstd = |u: &Term| nonstd.iter().any(|n| n.factors().contains(u));
        for c in &node.children {
            let ti = &c.conclusion;
            if !ti.is_standard() {
                if !matches!(
                    c.rule,
                    Rule::Ax | Rule::Split1 | Rule::Split2 | Rule::Sdec | Rule::Adec
                ) {
                    return Err(format!(
                        "non-standard premise {ti} of xor concluded by {}",
                        c.rule
                    ));
                }
            } else if t.is_standard() {
                if !factor_of_nonstd(ti) {
                    return Err(format!(
                        "xor_d premise {ti} is not a factor of a non-standard premise"
                    ));
                }
            } else if !t.factors().contains(ti) && !factor_of_nonstd(ti) {
                return Err(format!(
                    "xor_c premise {ti} is neither a factor of {t} nor of a premise"
                ));
            }
        }
        if t.is_standard() && !factor_of_nonstd(t) {
            return Err(format!(
                "xor_d conclusion {t} is not a factor of a non-standard premise"
            ));
        }
    }
    Ok(())
}
