//! The term algebra: names, keys and variables combined with `pk`, `pair`,
//! `senc`, `aenc` and the associative, commutative, nilpotent `xor` with unit
//! `0`.
//!
//! Every [`Term`] is hash-consed and kept in normal form, so two terms are
//! equal modulo the xor theory exactly when they are the same pointer. Raw,
//! un-normalized trees live in [`RawTerm`] and only become terms through
//! [`normalize`].

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Arc, LazyLock, Mutex, Weak};

/// Label of the xor unit.
pub const ZERO: &str = "0";
/// Label of the goal name.
pub const SECRET: &str = "secret";
/// Label of the intruder's agent name.
pub const INTRUDER: &str = "I";

pub type TermSet = BTreeSet<Term>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AtomKind {
    Name,
    Key,
    Variable,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    kind: AtomKind,
    label: Arc<str>,
}

impl Atom {
    pub fn new(kind: AtomKind, label: &str) -> Self {
        Atom {
            kind,
            label: Arc::from(label),
        }
    }

    pub fn kind(&self) -> AtomKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_variable(&self) -> bool {
        self.kind == AtomKind::Variable
    }
}

impl PartialOrd for Atom {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Atom {
    fn cmp(&self, other: &Self) -> Ordering {
        self.kind
            .cmp(&other.kind)
            .then_with(|| self.label.cmp(&other.label))
    }
}

/// Top-level shape of a normalized term.
///
/// `Aenc` holds the `pk(..)` term itself in key position. `Xor` holds a
/// sorted, duplicate-free list of at least two standard terms, none of them
/// `0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Atom(Atom),
    Pk(Term),
    Pair(Term, Term),
    Senc(Term, Term),
    Aenc(Term, Term),
    Xor(Box<[Term]>),
}

impl Shape {
    fn tag(&self) -> u8 {
        match self {
            Shape::Atom(_) => 0,
            Shape::Pk(_) => 1,
            Shape::Pair(..) => 2,
            Shape::Senc(..) => 3,
            Shape::Aenc(..) => 4,
            Shape::Xor(_) => 5,
        }
    }
}

struct Node {
    shape: Shape,
    kids: Box<[Term]>,
    hash: u64,
    ground: bool,
}

/// A hash-consed, normalized term. Cloning is a reference-count bump and
/// equality is pointer equality.
#[derive(Clone)]
pub struct Term(Arc<Node>);

const SHARDS: usize = 32;

#[derive(Default)]
struct Shard {
    map: HashMap<u64, Vec<Weak<Node>>>,
    inserts: usize,
    purge_at: usize,
}

static INTERNER: LazyLock<Vec<Mutex<Shard>>> = LazyLock::new(|| {
    (0..SHARDS)
        .map(|_| {
            Mutex::new(Shard {
                purge_at: 4096,
                ..Shard::default()
            })
        })
        .collect()
});

fn shape_hash(shape: &Shape) -> u64 {
    let mut h = DefaultHasher::new();
    shape.hash(&mut h);
    h.finish()
}

fn intern(shape: Shape) -> Term {
    let hash = shape_hash(&shape);
    let mut shard = INTERNER[(hash % SHARDS as u64) as usize]
        .lock()
        .unwrap_or_else(|e| e.into_inner());
    if let Some(bucket) = shard.map.get(&hash) {
        for weak in bucket {
            if let Some(node) = weak.upgrade() {
                if node.shape == shape {
                    return Term(node);
                }
            }
        }
    }
    let kids: Box<[Term]> = match &shape {
        Shape::Atom(_) => Box::new([]),
        Shape::Pk(k) => Box::new([k.clone()]),
        Shape::Pair(a, b) | Shape::Senc(a, b) | Shape::Aenc(a, b) => {
            Box::new([a.clone(), b.clone()])
        }
        Shape::Xor(fs) => fs.clone(),
    };
    let ground = match &shape {
        Shape::Atom(a) => !a.is_variable(),
        _ => kids.iter().all(Term::is_ground),
    };
    let node = Arc::new(Node {
        shape,
        kids,
        hash,
        ground,
    });
    let bucket = shard.map.entry(hash).or_default();
    bucket.retain(|w| w.strong_count() > 0);
    bucket.push(Arc::downgrade(&node));
    shard.inserts += 1;
    if shard.inserts >= shard.purge_at {
        shard.map.retain(|_, b| {
            b.retain(|w| w.strong_count() > 0);
            !b.is_empty()
        });
        shard.inserts = 0;
        shard.purge_at = (2 * shard.map.len()).max(4096);
    }
    Term(node)
}

impl Term {
    pub fn atom(kind: AtomKind, label: &str) -> Term {
        intern(Shape::Atom(Atom::new(kind, label)))
    }

    pub fn from_atom(atom: Atom) -> Term {
        intern(Shape::Atom(atom))
    }

    pub fn name(label: &str) -> Term {
        Term::atom(AtomKind::Name, label)
    }

    pub fn key(label: &str) -> Term {
        Term::atom(AtomKind::Key, label)
    }

    pub fn var(label: &str) -> Term {
        Term::atom(AtomKind::Variable, label)
    }

    pub fn zero() -> Term {
        Term::name(ZERO)
    }

    pub fn secret() -> Term {
        Term::name(SECRET)
    }

    pub fn intruder() -> Term {
        Term::name(INTRUDER)
    }

    pub fn pk(key: Term) -> Term {
        intern(Shape::Pk(key))
    }

    pub fn pair(left: Term, right: Term) -> Term {
        intern(Shape::Pair(left, right))
    }

    pub fn senc(payload: Term, key: Term) -> Term {
        intern(Shape::Senc(payload, key))
    }

    /// `aenc(payload, public_key)`.
    ///
    /// # Panics
    ///
    /// Panics if `public_key` is not a `pk(..)` term; use [`Term::try_aenc`]
    /// for unchecked input.
    pub fn aenc(payload: Term, public_key: Term) -> Term {
        Term::try_aenc(payload, public_key).expect("aenc key position must be pk(..)")
    }

    pub fn try_aenc(payload: Term, public_key: Term) -> Option<Term> {
        matches!(public_key.shape(), Shape::Pk(_)).then(|| intern(Shape::Aenc(payload, public_key)))
    }

    /// Normal form of the xor of `items`: factors are flattened, counted
    /// modulo 2, `0` is dropped, and the survivors are sorted canonically.
    pub fn xor<I: IntoIterator<Item = Term>>(items: I) -> Term {
        let mut factors: Vec<Term> = Vec::new();
        for item in items {
            factors.extend_from_slice(item.factors());
        }
        factors.sort();
        let mut kept: Vec<Term> = Vec::with_capacity(factors.len());
        for f in factors {
            if kept.last() == Some(&f) {
                kept.pop();
            } else {
                kept.push(f);
            }
        }
        kept.retain(|f| !f.is_zero());
        match kept.len() {
            0 => Term::zero(),
            1 => kept.pop().unwrap(),
            _ => intern(Shape::Xor(kept.into_boxed_slice())),
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.0.shape
    }

    /// Immediate children: the constructor arguments, or the factors of an
    /// xor.
    pub fn children(&self) -> &[Term] {
        &self.0.kids
    }

    /// Opaque intern handle; equal for equal terms that are alive at the
    /// same time.
    pub fn id(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self.shape() {
            Shape::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_atom(&self) -> bool {
        self.as_atom().is_some()
    }

    pub fn is_variable(&self) -> bool {
        self.as_atom().is_some_and(Atom::is_variable)
    }

    pub fn is_key(&self) -> bool {
        self.as_atom().is_some_and(|a| a.kind() == AtomKind::Key)
    }

    pub fn is_zero(&self) -> bool {
        self.as_atom()
            .is_some_and(|a| a.kind() == AtomKind::Name && a.label() == ZERO)
    }

    /// A term is standard unless its head is xor.
    pub fn is_standard(&self) -> bool {
        !matches!(self.shape(), Shape::Xor(_))
    }

    pub fn is_ground(&self) -> bool {
        self.0.ground
    }

    /// The factors of a normalized term: itself if standard, its xor
    /// children otherwise. Never contains duplicates.
    pub fn factors(&self) -> &[Term] {
        match self.shape() {
            Shape::Xor(fs) => fs,
            _ => std::slice::from_ref(self),
        }
    }

    pub fn subterms(&self) -> TermSet {
        let mut out = TermSet::new();
        self.collect_subterms(&mut out);
        out
    }

    /// Adds `st(self)` to `out`, skipping shared subterms already present.
    pub fn collect_subterms(&self, out: &mut TermSet) {
        if out.insert(self.clone()) {
            for c in self.children() {
                c.collect_subterms(out);
            }
        }
    }

    pub fn is_subterm_of(&self, other: &Term) -> bool {
        if self == other {
            return true;
        }
        other.children().iter().any(|c| self.is_subterm_of(c))
    }

    pub fn vars(&self) -> TermSet {
        let mut out = TermSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn collect_vars(&self, out: &mut TermSet) {
        if self.is_ground() {
            return;
        }
        if self.is_variable() {
            out.insert(self.clone());
            return;
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }

    /// Dag-size: number of distinct subterms.
    pub fn size(&self) -> usize {
        self.subterms().len()
    }

    /// Rebuilds a term of the same head over new children, renormalizing.
    pub fn rebuild(&self, children: Vec<Term>) -> Term {
        let mut it = children.into_iter();
        let mut next = || it.next().expect("arity mismatch in rebuild");
        match self.shape() {
            Shape::Atom(_) => self.clone(),
            Shape::Pk(_) => Term::pk(next()),
            Shape::Pair(..) => Term::pair(next(), next()),
            Shape::Senc(..) => Term::senc(next(), next()),
            Shape::Aenc(..) => Term::aenc(next(), next()),
            Shape::Xor(fs) => Term::xor((0..fs.len()).map(|_| next())),
        }
    }

    pub fn to_raw(&self) -> RawTerm {
        match self.shape() {
            Shape::Atom(a) => RawTerm::Atom(a.clone()),
            Shape::Pk(k) => RawTerm::Pk(Box::new(k.to_raw())),
            Shape::Pair(a, b) => RawTerm::Pair(Box::new(a.to_raw()), Box::new(b.to_raw())),
            Shape::Senc(a, b) => RawTerm::Senc(Box::new(a.to_raw()), Box::new(b.to_raw())),
            Shape::Aenc(a, pk) => match pk.shape() {
                Shape::Pk(k) => RawTerm::Aenc(Box::new(a.to_raw()), Box::new(k.to_raw())),
                _ => unreachable!("aenc key is always pk(..)"),
            },
            Shape::Xor(fs) => RawTerm::Xor(fs.iter().map(Term::to_raw).collect()),
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical total order: atoms by (kind, label) before composites;
/// composites by head (pk, pair, senc, aenc, xor) and then children
/// lexicographically.
impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        let (a, b) = (self.shape(), other.shape());
        a.tag().cmp(&b.tag()).then_with(|| match (a, b) {
            (Shape::Atom(x), Shape::Atom(y)) => x.cmp(y),
            _ => self.children().iter().cmp(other.children().iter()),
        })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape() {
            Shape::Atom(a) => f.write_str(a.label()),
            Shape::Pk(k) => write!(f, "pk({k})"),
            Shape::Pair(a, b) => write!(f, "pair({a}, {b})"),
            Shape::Senc(a, b) => write!(f, "senc({a}, {b})"),
            Shape::Aenc(a, b) => write!(f, "aenc({a}, {b})"),
            Shape::Xor(fs) => {
                for (i, t) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" (+) ")?;
                    }
                    write!(f, "{t}")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Un-normalized term tree as produced by the parser and builders.
/// `Aenc(payload, key)` stands for `aenc(payload, pk(key))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawTerm {
    Atom(Atom),
    Pk(Box<RawTerm>),
    Pair(Box<RawTerm>, Box<RawTerm>),
    Senc(Box<RawTerm>, Box<RawTerm>),
    Aenc(Box<RawTerm>, Box<RawTerm>),
    Xor(Vec<RawTerm>),
}

impl RawTerm {
    pub fn xor(items: Vec<RawTerm>) -> RawTerm {
        RawTerm::Xor(items)
    }

    fn substitute(&self, subst: &Substitution) -> RawTerm {
        let b = |t: &RawTerm| Box::new(t.substitute(subst));
        match self {
            RawTerm::Atom(a) => {
                if a.is_variable() {
                    if let Some(v) = subst.get(&Term::from_atom(a.clone())) {
                        return v.to_raw();
                    }
                }
                self.clone()
            }
            RawTerm::Pk(k) => RawTerm::Pk(b(k)),
            RawTerm::Pair(x, y) => RawTerm::Pair(b(x), b(y)),
            RawTerm::Senc(x, y) => RawTerm::Senc(b(x), b(y)),
            RawTerm::Aenc(x, y) => RawTerm::Aenc(b(x), b(y)),
            RawTerm::Xor(items) => {
                RawTerm::Xor(items.iter().map(|t| t.substitute(subst)).collect())
            }
        }
    }
}

/// `nf(t)`.
pub fn normalize(raw: &RawTerm) -> Term {
    match raw {
        RawTerm::Atom(a) => Term::from_atom(a.clone()),
        RawTerm::Pk(k) => Term::pk(normalize(k)),
        RawTerm::Pair(a, b) => Term::pair(normalize(a), normalize(b)),
        RawTerm::Senc(a, b) => Term::senc(normalize(a), normalize(b)),
        RawTerm::Aenc(a, k) => Term::aenc(normalize(a), Term::pk(normalize(k))),
        RawTerm::Xor(items) => Term::xor(items.iter().map(normalize)),
    }
}

/// True if `raw` is literally the canonical representative of its class.
pub fn is_normal_form(raw: &RawTerm) -> bool {
    normalize(raw).to_raw() == *raw
}

/// Number of distinct subterms of a set of terms.
pub fn dag_size<'a, I: IntoIterator<Item = &'a Term>>(terms: I) -> usize {
    subterms_of(terms).len()
}

pub fn subterms_of<'a, I: IntoIterator<Item = &'a Term>>(terms: I) -> TermSet {
    let mut out = TermSet::new();
    for t in terms {
        t.collect_subterms(&mut out);
    }
    out
}

pub fn vars_of<'a, I: IntoIterator<Item = &'a Term>>(terms: I) -> TermSet {
    let mut out = TermSet::new();
    for t in terms {
        t.collect_vars(&mut out);
    }
    out
}

/// A finite map from variables to normalized terms, ordered canonically.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution(BTreeMap<Term, Term>);

impl Substitution {
    pub fn new() -> Self {
        Substitution(BTreeMap::new())
    }

    /// # Panics
    ///
    /// Panics if `var` is not a variable atom.
    pub fn insert(&mut self, var: Term, value: Term) -> Option<Term> {
        assert!(
            var.is_variable(),
            "substitution key {var} is not a variable"
        );
        self.0.insert(var, value)
    }

    pub fn remove(&mut self, var: &Term) -> Option<Term> {
        self.0.remove(var)
    }

    pub fn get(&self, var: &Term) -> Option<&Term> {
        self.0.get(var)
    }

    pub fn contains(&self, var: &Term) -> bool {
        self.0.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Term)> {
        self.0.iter()
    }

    pub fn domain(&self) -> TermSet {
        self.0.keys().cloned().collect()
    }

    pub fn values(&self) -> impl Iterator<Item = &Term> {
        self.0.values()
    }

    pub fn is_ground(&self) -> bool {
        self.0.values().all(Term::is_ground)
    }

    /// `|st({σ(x) | x ∈ dom σ})|`.
    pub fn size(&self) -> usize {
        dag_size(self.0.values())
    }

    /// `nf(tσ)`; unmapped variables stay put.
    pub fn apply(&self, t: &Term) -> Term {
        if t.is_ground() || self.0.is_empty() {
            return t.clone();
        }
        match t.shape() {
            Shape::Atom(_) => self.0.get(t).cloned().unwrap_or_else(|| t.clone()),
            _ => t.rebuild(t.children().iter().map(|c| self.apply(c)).collect()),
        }
    }

    /// Substitutes on the raw tree and normalizes once at the end.
    pub fn apply_raw(&self, raw: &RawTerm) -> Term {
        normalize(&raw.substitute(self))
    }

    pub fn apply_all<'a, I: IntoIterator<Item = &'a Term>>(&self, terms: I) -> TermSet {
        terms.into_iter().map(|t| self.apply(t)).collect()
    }

    /// True if applying `self` to `t` needs no renormalization: every xor
    /// node keeps pairwise distinct, standard, non-zero children.
    pub fn keeps_normal(&self, t: &Term) -> bool {
        match t.shape() {
            Shape::Atom(_) => true,
            Shape::Xor(fs) => {
                if !fs.iter().all(|f| self.keeps_normal(f)) {
                    return false;
                }
                let mut images: Vec<Term> = fs.iter().map(|f| self.apply(f)).collect();
                if images.iter().any(|i| !i.is_standard() || i.is_zero()) {
                    return false;
                }
                images.sort();
                images.windows(2).all(|w| w[0] != w[1])
            }
            _ => t.children().iter().all(|c| self.keeps_normal(c)),
        }
    }
}

impl FromIterator<(Term, Term)> for Substitution {
    fn from_iter<I: IntoIterator<Item = (Term, Term)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (k, v) in iter {
            s.insert(k, v);
        }
        s
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k} ↦ {v}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
