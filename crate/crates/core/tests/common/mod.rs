//! Generators, fixtures and a brute-force attack oracle shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xordy::deduction::{Derivation, Rule};
use xordy::protocol::{instantiate, is_attack, validate_run, Protocol, Session, StepRef};
use xordy::specfmt::parse_protocol;
use xordy::terms::{normalize, Atom, AtomKind, RawTerm, Substitution, Term, TermSet};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("protocols")
        .join(format!("{name}.xordy"))
}

pub fn fixture(name: &str) -> Protocol {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_protocol(&text).unwrap_or_else(|d| panic!("{name}: {d}"))
}

/// Random terms over a small vocabulary.
pub struct Gen {
    pub rng: ChaCha8Rng,
    pub names: Vec<Term>,
    pub keys: Vec<Term>,
    pub vars: Vec<Term>,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen::with_atoms(seed, 3, 2, 0)
    }

    pub fn with_atoms(seed: u64, names: usize, keys: usize, vars: usize) -> Self {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            names: (0..names).map(|i| Term::name(&format!("n{i}"))).collect(),
            keys: (0..keys).map(|i| Term::key(&format!("k{i}"))).collect(),
            vars: (0..vars).map(|i| Term::var(&format!("v{i}"))).collect(),
        }
    }

    /// A fresh vocabulary of at most `max_atoms` atoms, `0` sometimes among them.
    pub fn reshuffle(&mut self, max_atoms: usize) {
        let keys = self.rng.gen_range(1..=3.min(max_atoms - 1));
        let names = self.rng.gen_range(1..=max_atoms - keys);
        self.names = (0..names).map(|i| Term::name(&format!("n{i}"))).collect();
        if self.rng.gen_bool(0.3) {
            self.names[0] = Term::zero();
        }
        self.keys = (0..keys).map(|i| Term::key(&format!("k{i}"))).collect();
    }

    fn atom(&mut self) -> Term {
        let total = self.names.len() + self.keys.len() + self.vars.len();
        let i = self.rng.gen_range(0..total);
        if i < self.names.len() {
            self.names[i].clone()
        } else if i < self.names.len() + self.keys.len() {
            self.keys[i - self.names.len()].clone()
        } else {
            self.vars[i - self.names.len() - self.keys.len()].clone()
        }
    }

    fn raw_atom(&mut self) -> RawTerm {
        let a = self.atom();
        RawTerm::Atom(a.as_atom().expect("atom").clone())
    }

    /// A raw term of depth at most `depth`. Xor nodes may nest, repeat
    /// children and contain `0`.
    pub fn raw(&mut self, depth: usize) -> RawTerm {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return if self.rng.gen_bool(0.1) {
                RawTerm::Atom(Atom::new(AtomKind::Name, "0"))
            } else {
                self.raw_atom()
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..6) {
            0 => {
                let k = self.pk_arg();
                RawTerm::Pk(Box::new(k))
            }
            1 => RawTerm::Pair(Box::new(self.raw(d)), Box::new(self.raw(d))),
            2 => RawTerm::Senc(Box::new(self.raw(d)), Box::new(self.raw(d))),
            3 => {
                let p = self.raw(d);
                let k = self.pk_arg();
                RawTerm::Aenc(Box::new(p), Box::new(k))
            }
            _ => {
                let n = self.rng.gen_range(1..=4);
                let mut items: Vec<RawTerm> = (0..n).map(|_| self.raw(d)).collect();
                if self.rng.gen_bool(0.3) {
                    let dup = items[0].clone();
                    items.push(dup);
                }
                RawTerm::Xor(items)
            }
        }
    }

    fn pk_arg(&mut self) -> RawTerm {
        let pool: Vec<Term> = self.keys.iter().chain(&self.vars).cloned().collect();
        let k = pool.choose(&mut self.rng).expect("some key").clone();
        RawTerm::Atom(k.as_atom().expect("atom").clone())
    }

    pub fn term(&mut self, depth: usize) -> Term {
        let r = self.raw(depth);
        normalize(&r)
    }

    /// A standard normalized term (head is not xor).
    pub fn standard(&mut self, depth: usize) -> Term {
        loop {
            let t = self.term(depth);
            if t.is_standard() {
                return t;
            }
        }
    }

    pub fn ground_gen(&self, seed: u64) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            names: self.names.clone(),
            keys: self.keys.clone(),
            vars: Vec::new(),
        }
    }

    /// A ground substitution for every variable of the vocabulary.
    pub fn substitution(&mut self, depth: usize) -> Substitution {
        let seed = self.rng.gen();
        let mut g = self.ground_gen(seed);
        let mut s = Substitution::new();
        for v in self.vars.clone() {
            s.insert(v, g.term(depth));
        }
        s
    }

    /// A derivability instance: knowledge of up to `max_knowledge` ground
    /// terms of depth at most `depth`, and a goal that is often assembled
    /// from pieces of the knowledge.
    pub fn instance(&mut self, max_knowledge: usize, depth: usize) -> (TermSet, Term) {
        let n = self.rng.gen_range(1..=max_knowledge);
        let knowledge: TermSet = (0..n).map(|_| self.term(depth)).collect();
        let mut pieces: Vec<Term> = TermSet::from_iter(knowledge.iter().flat_map(|t| t.subterms()))
            .into_iter()
            .collect();
        pieces.retain(|t| t.size() <= 6);
        let goal = match self.rng.gen_range(0..4) {
            0 => self.term(depth),
            1 => pieces.choose(&mut self.rng).expect("nonempty").clone(),
            2 => {
                let a = pieces.choose(&mut self.rng).expect("nonempty").clone();
                let b = pieces.choose(&mut self.rng).expect("nonempty").clone();
                Term::xor([a, b])
            }
            _ => {
                let a = pieces.choose(&mut self.rng).expect("nonempty").clone();
                let b = self.atom();
                if self.rng.gen_bool(0.5) {
                    Term::pair(a, b)
                } else {
                    Term::senc(a, b)
                }
            }
        };
        (knowledge, goal)
    }

    /// A valid derivation from `knowledge` that applies rules blindly and so
    /// usually contains redexes, nested xors and repeated premises.
    pub fn derivation(&mut self, knowledge: &TermSet, steps: usize) -> Derivation {
        let mut pool: Vec<Derivation> = knowledge.iter().cloned().map(Derivation::axiom).collect();
        for _ in 0..steps {
            if let Some(d) = self.step(&pool) {
                if d.conclusion.size() <= 12 {
                    pool.push(d);
                }
            }
        }
        // prefer something built late, where redexes pile up
        let from = pool.len().saturating_sub(4);
        pool[self.rng.gen_range(from..pool.len())].clone()
    }

    fn step(&mut self, pool: &[Derivation]) -> Option<Derivation> {
        let pick = |rng: &mut ChaCha8Rng| pool.choose(rng).expect("nonempty").clone();
        let find = |rng: &mut ChaCha8Rng, f: &dyn Fn(&Term) -> bool| {
            let hits: Vec<&Derivation> = pool.iter().filter(|d| f(&d.conclusion)).collect();
            hits.choose(rng).map(|d| (*d).clone())
        };
        match self.rng.gen_range(0..9) {
            0 => Derivation::apply(Rule::Pair, vec![pick(&mut self.rng), pick(&mut self.rng)]),
            1 => Derivation::apply(Rule::Senc, vec![pick(&mut self.rng), pick(&mut self.rng)]),
            2 => {
                let k = find(&mut self.rng, &|t| t.is_key())?;
                Derivation::apply(Rule::Pk, vec![k])
            }
            3 => {
                let pk = find(&mut self.rng, &|t| {
                    matches!(t.shape(), xordy::terms::Shape::Pk(_))
                })?;
                Derivation::apply(Rule::Aenc, vec![pick(&mut self.rng), pk])
            }
            4 => {
                let p = find(&mut self.rng, &|t| {
                    matches!(t.shape(), xordy::terms::Shape::Pair(..))
                })?;
                let rule = if self.rng.gen_bool(0.5) {
                    Rule::Split1
                } else {
                    Rule::Split2
                };
                Derivation::apply(rule, vec![p])
            }
            5 => {
                let e = find(&mut self.rng, &|t| {
                    matches!(t.shape(), xordy::terms::Shape::Senc(..))
                })?;
                let xordy::terms::Shape::Senc(_, k) = e.conclusion.shape() else {
                    unreachable!()
                };
                let k = k.clone();
                let kd = find(&mut self.rng, &|t| *t == k)?;
                Derivation::apply(Rule::Sdec, vec![e, kd])
            }
            6 => {
                let e = find(&mut self.rng, &|t| {
                    matches!(t.shape(), xordy::terms::Shape::Aenc(..))
                })?;
                let xordy::terms::Shape::Aenc(_, pk) = e.conclusion.shape() else {
                    unreachable!()
                };
                let k = pk.children()[0].clone();
                let kd = find(&mut self.rng, &|t| *t == k)?;
                Derivation::apply(Rule::Adec, vec![e, kd])
            }
            _ => {
                let n = self.rng.gen_range(0..=4);
                let mut children: Vec<Derivation> = (0..n).map(|_| pick(&mut self.rng)).collect();
                if n > 0 && self.rng.gen_bool(0.3) {
                    children.push(children[0].clone());
                }
                Derivation::apply(Rule::Xor, children)
            }
        }
    }
}

/// All ground terms over `atoms` of dag-size at most `bound`, by closing
/// under the constructors and binary xor. `pk` is applied to keys only.
pub fn brute_values(atoms: &TermSet, bound: usize) -> Vec<Term> {
    let mut have: TermSet = atoms.iter().filter(|_| bound >= 1).cloned().collect();
    loop {
        let cur: Vec<Term> = have.iter().cloned().collect();
        let mut new = Vec::new();
        for a in &cur {
            if a.is_key() {
                new.push(Term::pk(a.clone()));
            }
            for b in &cur {
                new.push(Term::pair(a.clone(), b.clone()));
                new.push(Term::senc(a.clone(), b.clone()));
                new.push(Term::xor([a.clone(), b.clone()]));
                if b.is_key() {
                    new.push(Term::aenc(a.clone(), Term::pk(b.clone())));
                }
            }
        }
        let before = have.len();
        have.extend(new.into_iter().filter(|t| t.size() <= bound));
        if have.len() == before {
            return cur;
        }
    }
}

/// Every prefix of every interleaving, by filtering permutations of the
/// step multiset.
pub fn brute_prefixes(lens: &[usize]) -> BTreeSet<Vec<StepRef>> {
    let mut steps: Vec<usize> = Vec::new();
    for (s, &n) in lens.iter().enumerate() {
        steps.extend(std::iter::repeat_n(s, n));
    }
    let mut out = BTreeSet::new();
    permute(&mut steps, 0, &mut |perm| {
        let mut done = vec![0; lens.len()];
        let full: Vec<StepRef> = perm
            .iter()
            .map(|&s| {
                done[s] += 1;
                StepRef {
                    session: s,
                    step: done[s] - 1,
                }
            })
            .collect();
        for i in 0..=full.len() {
            out.insert(full[..i].to_vec());
        }
    });
    out
}

fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

/// Sessions for every sequence of at most `k` (role, agent map) choices.
pub fn brute_session_sets(protocol: &Protocol, k: usize) -> Vec<Vec<Session>> {
    let mut kinds = Vec::new();
    let pool = protocol.agent_pool();
    for (ri, role) in protocol.roles.iter().enumerate() {
        let agents: Vec<Term> = role.agent_vars().into_iter().collect();
        let mut maps = vec![Substitution::new()];
        for a in &agents {
            maps = maps
                .into_iter()
                .flat_map(|m| {
                    pool.iter().map(move |v| {
                        let mut m = m.clone();
                        m.insert(a.clone(), v.clone());
                        m
                    })
                })
                .collect();
        }
        kinds.extend(maps.into_iter().map(|m| (ri, m)));
    }
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for choice in &frontier {
            for i in 0..kinds.len() {
                let mut c = choice.clone();
                c.push(i);
                next.push(c);
            }
        }
        for c in &next {
            let sessions: Option<Vec<Session>> = c
                .iter()
                .enumerate()
                .map(|(j, &i)| {
                    let (ri, m) = &kinds[i];
                    instantiate(&protocol.roles[*ri], *ri, m, j + 1).ok()
                })
                .collect();
            if let Some(s) = sessions {
                out.push(s);
            }
        }
        frontier = next;
    }
    out
}

/// Is there an attack with at most `k` sessions whose substitution has
/// total dag-size at most `bound`, using values over `atoms`? Returns the
/// first one found and the number of candidates tried.
pub type BruteAttack = (Vec<Session>, Vec<StepRef>, Substitution);

pub fn brute_force_attack(
    protocol: &Protocol,
    k: usize,
    atoms: &TermSet,
    bound: usize,
) -> (Option<BruteAttack>, usize) {
    let values = brute_values(atoms, bound);
    let mut tried = 0;
    for sessions in brute_session_sets(protocol, k) {
        let lens: Vec<usize> = sessions.iter().map(|s| s.steps.len()).collect();
        for trace in brute_prefixes(&lens) {
            let mut vars = TermSet::new();
            for r in &trace {
                let st = &sessions[r.session].steps[r.step];
                st.recv.collect_vars(&mut vars);
                st.send.collect_vars(&mut vars);
            }
            let vars: Vec<Term> = vars.into_iter().collect();
            let mut found = None;
            tuples(&values, vars.len(), &mut Vec::new(), &mut |vals| {
                if found.is_some() || xordy::terms::dag_size(vals.iter()) > bound {
                    return;
                }
                tried += 1;
                let sigma: Substitution = vars.iter().cloned().zip(vals.iter().cloned()).collect();
                if let Ok(ctx) = validate_run(protocol, &sessions, &trace, &sigma) {
                    if is_attack(&ctx) {
                        found = Some(sigma);
                    }
                }
            });
            if let Some(sigma) = found {
                return (Some((sessions, trace, sigma)), tried);
            }
        }
    }
    (None, tried)
}

fn tuples(values: &[Term], n: usize, chosen: &mut Vec<Term>, f: &mut impl FnMut(&[Term])) {
    if chosen.len() == n {
        f(chosen);
        return;
    }
    for v in values {
        chosen.push(v.clone());
        tuples(values, n, chosen, f);
        chosen.pop();
    }
}

/// Atoms of a protocol plus `0`, `secret`, the agent pool, and one name
/// foreign to the protocol.
pub fn oracle_atoms(protocol: &Protocol) -> TermSet {
    let mut atoms = TermSet::new();
    let mut st = TermSet::new();
    for t in protocol.initial_knowledge.iter().chain(&protocol.declared) {
        t.collect_subterms(&mut st);
    }
    for r in &protocol.roles {
        for t in r
            .knowledge
            .iter()
            .chain(r.steps.iter().flat_map(|s| [&s.recv, &s.send]))
        {
            t.collect_subterms(&mut st);
        }
    }
    atoms.extend(st.into_iter().filter(|t| t.is_atom() && !t.is_variable()));
    atoms.insert(Term::zero());
    atoms.insert(Term::secret());
    atoms.extend(protocol.agent_pool());
    atoms.insert(Term::name("stranger"));
    atoms
}
