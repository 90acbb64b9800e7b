//! Bounded-session attack search. Substitution size is the outer loop;
//! within a size, session sets, then interleaving prefixes, then values.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::deduction::{derivable, Derivation};
use crate::protocol::{
    context_sets, instantiate, secret_proof, validate_run, well_formed, Protocol, RunContext,
    RunError, Session, StepRef, WellFormedReport,
};
use crate::terms::{dag_size, Shape, Substitution, Term, TermSet};
use crate::transforms::{minimize_attack, MinimizeError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchConfig {
    /// Maximum number of sessions.
    pub sessions: usize,
    /// Cap on the total dag-size of a candidate substitution. Defaults to
    /// `|C|` of each session set.
    pub size_bound: Option<usize>,
    pub timeout: Option<Duration>,
    /// Worker threads; 0 lets the thread pool decide.
    pub jobs: usize,
}

impl SearchConfig {
    pub fn new(sessions: usize) -> Self {
        SearchConfig {
            sessions,
            size_bound: None,
            timeout: None,
            jobs: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AttackWitness {
    pub protocol: String,
    pub sessions: Vec<Session>,
    pub trace: Vec<StepRef>,
    /// The substitution the search found.
    pub sigma: Substitution,
    /// Its zapped form; `run` is validated under it.
    pub sigma_star: Substitution,
    pub run: RunContext,
    pub secret_proof: Derivation,
    /// `|C|` of the run.
    pub c_size: usize,
}

impl AttackWitness {
    pub fn receive_proofs(&self) -> &[Derivation] {
        &self.run.receive_proofs
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("search timed out")]
    Timeout,
    #[error("role {role} is not well-formed: {}", .report.errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    IllFormed {
        role: String,
        report: WellFormedReport,
    },
    #[error("found run failed independent validation: {0}")]
    Unsound(RunError),
    #[error(transparent)]
    Minimize(#[from] MinimizeError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// All sets of at most `k` sessions, as multisets over (role, agent map)
/// kinds, smallest first. Session ids run from 1 in each set.
pub fn enumerate_session_sets(protocol: &Protocol, k: usize) -> Vec<Vec<Session>> {
    let kinds = session_kinds(protocol);
    let mut out = Vec::new();
    for size in 0..=k {
        let mut choice = Vec::with_capacity(size);
        multisets(kinds.len(), size, 0, &mut choice, &mut |c| {
            let set = c
                .iter()
                .enumerate()
                .map(|(i, &kind)| {
                    let (role, map) = &kinds[kind];
                    instantiate(&protocol.roles[*role], *role, map, i + 1)
                        .expect("kind instantiates")
                })
                .collect();
            out.push(set);
        });
    }
    out
}

fn multisets(
    n: usize,
    size: usize,
    from: usize,
    choice: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize]),
) {
    if choice.len() == size {
        f(choice);
        return;
    }
    for i in from..n {
        choice.push(i);
        multisets(n, size, i, choice, f);
        choice.pop();
    }
}

/// (role index, agent map) pairs that instantiate without collapsing.
fn session_kinds(protocol: &Protocol) -> Vec<(usize, Substitution)> {
    let pool = protocol.agent_pool();
    let mut kinds = Vec::new();
    for (r, role) in protocol.roles.iter().enumerate() {
        let agents: Vec<Term> = role.agent_vars().into_iter().collect();
        let count = pool.len().pow(agents.len() as u32);
        for n in 0..count {
            // digits of n in base |pool|, first variable most significant
            let mut rest = n;
            let mut picks = vec![0; agents.len()];
            for slot in picks.iter_mut().rev() {
                *slot = rest % pool.len();
                rest /= pool.len();
            }
            let map: Substitution = agents
                .iter()
                .cloned()
                .zip(picks.iter().map(|&i| pool[i].clone()))
                .collect();
            if instantiate(role, r, &map, 1).is_ok() {
                kinds.push((r, map));
            }
        }
    }
    kinds
}

/// Atoms candidate values are built from: every atom of the protocol, the
/// declared names and keys, `0`, and the agent pool when some role has agent
/// variables.
pub fn candidate_atoms(protocol: &Protocol) -> TermSet {
    let mut st = TermSet::new();
    for t in &protocol.initial_knowledge {
        t.collect_subterms(&mut st);
    }
    for role in &protocol.roles {
        for t in role
            .knowledge
            .iter()
            .chain(role.steps.iter().flat_map(|s| [&s.recv, &s.send]))
        {
            t.collect_subterms(&mut st);
        }
    }
    let mut atoms: TermSet = st
        .into_iter()
        .filter(|t| t.is_atom() && !t.is_variable())
        .collect();
    atoms.extend(protocol.declared.iter().cloned());
    atoms.insert(Term::zero());
    atoms.insert(Term::secret());
    if protocol.roles.iter().any(|r| !r.agent_vars().is_empty()) {
        atoms.extend(protocol.agent_pool());
    }
    atoms
}

/// Does `t` fit the shape of pattern `p`? Variables and non-ground xor
/// terms match anything, ground parts must be equal, and a non-ground
/// standard sub-pattern also admits `0`. Repeated variables must take the
/// same value.
fn fits(t: &Term, p: &Term, top: bool) -> bool {
    fits_in(t, p, top, &mut HashMap::new())
}

fn fits_in(t: &Term, p: &Term, top: bool, binds: &mut HashMap<Term, Term>) -> bool {
    if p.is_variable() {
        return binds.entry(p.clone()).or_insert_with(|| t.clone()) == t;
    }
    if !p.is_standard() && !p.is_ground() {
        return true;
    }
    if p.is_ground() {
        return t == p;
    }
    if !top && t.is_zero() {
        return true;
    }
    let same_head = matches!(
        (t.shape(), p.shape()),
        (Shape::Pk(_), Shape::Pk(_))
            | (Shape::Pair(..), Shape::Pair(..))
            | (Shape::Senc(..), Shape::Senc(..))
            | (Shape::Aenc(..), Shape::Aenc(..))
    );
    same_head
        && t.children()
            .iter()
            .zip(p.children())
            .all(|(c, q)| fits_in(c, q, false, binds))
}

/// Ground terms of dag-size at most `bound` over `atoms` whose non-atomic
/// standard subterms all fit one of `patterns`, in canonical order.
pub fn shaped_values(atoms: &TermSet, patterns: &[Term], bound: usize) -> Vec<Term> {
    shaped_values_until(atoms, patterns, bound, &mut || false).expect("never stopped")
}

/// [`shaped_values`], giving up with `None` once `stop` returns true.
fn shaped_values_until(
    atoms: &TermSet,
    patterns: &[Term],
    bound: usize,
    stop: &mut dyn FnMut() -> bool,
) -> Option<Vec<Term>> {
    let patterns: Vec<&Term> = patterns
        .iter()
        .filter(|p| p.is_standard() && !p.is_atom())
        .collect();
    let mut standard: TermSet = atoms
        .iter()
        .filter(|a| bound >= 1 && !a.is_variable())
        .cloned()
        .collect();
    loop {
        let values = with_xors(&standard, bound, stop)?;
        let mut new = Vec::new();
        for p in &patterns {
            let options: Vec<Vec<&Term>> = p
                .children()
                .iter()
                .map(|q| match q.shape() {
                    Shape::Pk(k) if matches!(p.shape(), Shape::Aenc(..)) => {
                        values.iter().filter(|v| fits(v, k, false)).collect()
                    }
                    _ => values.iter().filter(|v| fits(v, q, false)).collect(),
                })
                .collect();
            build_products(p, &options, bound, &mut |t| {
                if !standard.contains(&t) && fits(&t, p, true) {
                    new.push(t);
                }
            });
            if stop() {
                return None;
            }
        }
        if new.is_empty() {
            return Some(values.into_iter().collect());
        }
        standard.extend(new);
    }
}

fn build_products(p: &Term, options: &[Vec<&Term>], bound: usize, emit: &mut impl FnMut(Term)) {
    match (p.shape(), options) {
        (Shape::Pk(_), [a]) => {
            for &x in a {
                if x.size() < bound {
                    emit(Term::pk(x.clone()));
                }
            }
        }
        (Shape::Pair(..) | Shape::Senc(..) | Shape::Aenc(..), [a, b]) => {
            for &x in a {
                if x.size() >= bound {
                    continue;
                }
                for &y in b {
                    if y.size() >= bound {
                        continue;
                    }
                    let t = match p.shape() {
                        Shape::Pair(..) => Term::pair(x.clone(), y.clone()),
                        Shape::Senc(..) => Term::senc(x.clone(), y.clone()),
                        _ => Term::aenc(x.clone(), Term::pk(y.clone())),
                    };
                    if t.size() <= bound {
                        emit(t);
                    }
                }
            }
        }
        _ => {}
    }
}

/// `standard` plus every xor of two or more of its non-zero members within
/// the size bound.
fn with_xors(
    standard: &TermSet,
    bound: usize,
    stop: &mut dyn FnMut() -> bool,
) -> Option<BTreeSet<Term>> {
    let mut out: BTreeSet<Term> = standard
        .iter()
        .filter(|t| t.size() <= bound)
        .cloned()
        .collect();
    let items: Vec<(&Term, Vec<Term>)> = standard
        .iter()
        .filter(|t| !t.is_zero() && t.size() < bound)
        .map(|t| (t, t.subterms().into_iter().collect()))
        .collect();
    let mut chosen = Vec::new();
    let mut counts = HashMap::new();
    xor_subsets(&items, 0, bound, &mut chosen, &mut counts, &mut out, stop)?;
    Some(out)
}

fn xor_subsets<'a>(
    items: &[(&'a Term, Vec<Term>)],
    from: usize,
    bound: usize,
    chosen: &mut Vec<&'a Term>,
    counts: &mut HashMap<Term, u32>,
    out: &mut BTreeSet<Term>,
    stop: &mut dyn FnMut() -> bool,
) -> Option<()> {
    for (i, (t, subs)) in items.iter().enumerate().skip(from) {
        if stop() {
            return None;
        }
        // the xor node itself takes one more slot
        let fresh = subs.iter().filter(|s| !counts.contains_key(*s)).count();
        if counts.len() + fresh >= bound {
            continue;
        }
        for s in subs {
            *counts.entry(s.clone()).or_default() += 1;
        }
        chosen.push(t);
        if chosen.len() >= 2 {
            out.insert(Term::xor(chosen.iter().map(|t| (*t).clone())));
        }
        let r = xor_subsets(items, i + 1, bound, chosen, counts, out, stop);
        chosen.pop();
        for s in subs {
            let c = counts.get_mut(s).expect("counted above");
            *c -= 1;
            if *c == 0 {
                counts.remove(s);
            }
        }
        r?;
    }
    Some(())
}

/// Every ground normalized term over `atoms` with dag-size at most `bound`;
/// `pk` is applied to key atoms only.
pub fn all_values(atoms: &TermSet, bound: usize) -> Vec<Term> {
    let x = Term::var("_x");
    let y = Term::var("_y");
    let mut patterns = vec![
        Term::pair(x.clone(), y.clone()),
        Term::senc(x.clone(), y.clone()),
    ];
    for k in atoms.iter().filter(|a| a.is_key()) {
        patterns.push(Term::pk(k.clone()));
        patterns.push(Term::aenc(x.clone(), Term::pk(k.clone())));
    }
    shaped_values(atoms, &patterns, bound)
}

/// Substitutions over `vars` with values built from `atoms`, total dag-size
/// at most `bound`, ordered by total size and then canonically (variables
/// in canonical order, earlier variables varying slowest).
pub fn candidate_substitutions(
    vars: &TermSet,
    atoms: &TermSet,
    bound: usize,
) -> impl Iterator<Item = Substitution> {
    let vars: Vec<Term> = vars.iter().cloned().collect();
    let values = all_values(atoms, bound);
    let top = if vars.is_empty() { 0 } else { bound };
    (0..=top).flat_map(move |b| {
        let mut out = Vec::new();
        let mut chosen = Vec::new();
        exact_tuples(&values, vars.len(), b, &mut chosen, &mut |vals| {
            out.push(
                vars.iter()
                    .cloned()
                    .zip(vals.iter().cloned())
                    .collect::<Substitution>(),
            );
        });
        out
    })
}

fn exact_tuples(
    values: &[Term],
    n: usize,
    b: usize,
    chosen: &mut Vec<Term>,
    f: &mut impl FnMut(&[Term]),
) {
    let size = dag_size(chosen.iter());
    if size > b {
        return;
    }
    if chosen.len() == n {
        if size == b {
            f(chosen);
        }
        return;
    }
    for v in values {
        chosen.push(v.clone());
        exact_tuples(values, n, b, chosen, f);
        chosen.pop();
    }
}

/// Searches for an attack with at most `cfg.sessions` sessions. Returns the
/// first witness in (total size of the substitution, session set,
/// interleaving, substitution) order, re-validated and minimized.
pub fn find_attack(
    protocol: &Protocol,
    cfg: &SearchConfig,
) -> Result<Option<AttackWitness>, SearchError> {
    for role in &protocol.roles {
        let report = well_formed(role);
        if !report.is_ok() {
            return Err(SearchError::IllFormed {
                role: role.name.clone(),
                report,
            });
        }
    }
    let deadline = cfg.timeout.map(|t| Instant::now() + t);
    let atoms = candidate_atoms(protocol);
    let sets = enumerate_session_sets(protocol, cfg.sessions);
    let cancel = AtomicBool::new(false);

    let mut searches: Vec<SetSearch> = sets
        .iter()
        .map(|s| SetSearch::new(protocol, s, &atoms, cfg.size_bound, deadline, &cancel))
        .collect();
    let top = searches.iter().map(|s| s.bound).max().unwrap_or(0);

    let step = |b: usize,
                (i, s): (usize, &mut SetSearch)|
     -> Option<(usize, Result<Found, SearchError>)> {
        match s.level(b) {
            Ok(found) => found.map(|f| (i, Ok(f))),
            Err(e) => {
                cancel.store(true, Ordering::Relaxed);
                Some((i, Err(e)))
            }
        }
    };
    let pool = if cfg.jobs == 1 {
        None
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| SearchError::Pool(e.to_string()))?;
        Some(pool)
    };
    let mut hit = None;
    for b in 0..=top {
        hit = match &pool {
            None => searches.iter_mut().enumerate().find_map(|x| step(b, x)),
            Some(pool) => pool.install(|| {
                searches
                    .par_iter_mut()
                    .enumerate()
                    .find_map_first(|x| step(b, x))
            }),
        };
        if hit.is_some() {
            break;
        }
    }
    let Some((i, found)) = hit else {
        return Ok(None);
    };
    let (trace, sigma) = found?;
    let sessions = sets[i].clone();
    let ctx = validate_run(protocol, &sessions, &trace, &sigma).map_err(SearchError::Unsound)?;
    let (sigma_star, run) = minimize_attack(&ctx)?;
    let secret = secret_proof(&run).ok_or(SearchError::Minimize(MinimizeError::LostAttack))?;
    Ok(Some(AttackWitness {
        protocol: protocol.name.clone(),
        c_size: run.c.len(),
        sessions,
        trace,
        sigma,
        sigma_star,
        run,
        secret_proof: secret,
    }))
}

/// Search state for one session set.
/// An attacking interleaving prefix and its substitution.
type Found = (Vec<StepRef>, Substitution);

struct SetSearch<'a> {
    initial: &'a TermSet,
    sessions: &'a [Session],
    atoms: TermSet,
    patterns: Vec<Term>,
    /// prefixes that ran at an earlier level
    runnable: HashSet<Vec<StepRef>>,
    bound: usize,
    deadline: Option<Instant>,
    cancel: &'a AtomicBool,
    ticks: u64,
    /// (trace prefix, values of the variables it uses) -> derivable
    cache: HashMap<(Vec<StepRef>, Vec<Term>), bool>,
}

impl<'a> SetSearch<'a> {
    fn new(
        protocol: &'a Protocol,
        sessions: &'a [Session],
        atoms: &TermSet,
        size_bound: Option<usize>,
        deadline: Option<Instant>,
        cancel: &'a AtomicBool,
    ) -> Self {
        let all_steps: Vec<_> = sessions
            .iter()
            .flat_map(|s| s.steps.iter().cloned())
            .collect();
        let (c, d) = context_sets(&protocol.initial_knowledge, sessions, &all_steps);
        SetSearch {
            initial: &protocol.initial_knowledge,
            sessions,
            atoms: atoms.clone(),
            patterns: d.into_iter().collect(),
            runnable: HashSet::new(),
            bound: size_bound.unwrap_or(c.len()),
            deadline,
            cancel,
            ticks: 0,
            cache: HashMap::new(),
        }
    }

    /// Candidate values of dag-size at most `b`.
    fn values_at(&self, b: usize) -> Result<Level, SearchError> {
        let (deadline, cancel) = (self.deadline, self.cancel);
        let mut n = 0u32;
        let mut stop = || {
            n = n.wrapping_add(1);
            n.is_multiple_of(1024)
                && (cancel.load(Ordering::Relaxed) || deadline.is_some_and(|d| Instant::now() >= d))
        };
        let values = shaped_values_until(&self.atoms, &self.patterns, b, &mut stop)
            .ok_or(SearchError::Timeout)?;
        let values: Vec<(Term, Vec<Term>)> = values
            .into_iter()
            .map(|v| {
                let subs = v.subterms().into_iter().collect();
                (v, subs)
            })
            .collect();
        let max_size = values.iter().map(|(_, s)| s.len()).max().unwrap_or(0);
        let level = Level { values, max_size };
        Ok(level)
    }

    fn tick(&mut self) -> Result<(), SearchError> {
        self.ticks += 1;
        if self.ticks.is_multiple_of(256) {
            if self.cancel.load(Ordering::Relaxed) {
                return Err(SearchError::Timeout);
            }
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                return Err(SearchError::Timeout);
            }
        }
        Ok(())
    }

    /// Tries every prefix with substitutions of total size exactly `b`. A
    /// prefix is extended only once it has run with some substitution of
    /// size at most `b`; levels must be visited in increasing order.
    fn level(&mut self, b: usize) -> Result<Option<Found>, SearchError> {
        if b > self.bound {
            return Ok(None);
        }
        let level = self.values_at(b)?;
        let mut trace = Vec::new();
        let mut done = vec![0; self.sessions.len()];
        let mut runnable = std::mem::take(&mut self.runnable);
        let found = self.visit(&level, b, &mut trace, &mut done, &mut runnable);
        self.runnable = runnable;
        found
    }

    fn visit(
        &mut self,
        level: &Level,
        b: usize,
        trace: &mut Vec<StepRef>,
        done: &mut [usize],
        runnable: &mut HashSet<Vec<StepRef>>,
    ) -> Result<Option<Found>, SearchError> {
        let (attack, runs) = self.solve(level, b, trace)?;
        if let Some(sigma) = attack {
            return Ok(Some((trace.clone(), sigma)));
        }
        if runs {
            runnable.insert(trace.clone());
        } else if !runnable.contains(trace.as_slice()) {
            return Ok(None);
        }
        for s in 0..self.sessions.len() {
            if done[s] == self.sessions[s].steps.len() {
                continue;
            }
            trace.push(StepRef {
                session: s,
                step: done[s],
            });
            done[s] += 1;
            let found = self.visit(level, b, trace, done, runnable)?;
            done[s] -= 1;
            trace.pop();
            if found.is_some() {
                return Ok(found);
            }
        }
        Ok(None)
    }

    /// Substitutions of total size exactly `b` for `trace`: the first one
    /// that is an attack, and whether any makes it a run.
    fn solve(
        &mut self,
        level: &Level,
        b: usize,
        trace: &[StepRef],
    ) -> Result<(Option<Substitution>, bool), SearchError> {
        let steps: Vec<_> = trace
            .iter()
            .map(|r| &self.sessions[r.session].steps[r.step])
            .collect();
        let mut vars: Vec<Term> = Vec::new();
        // receives that become ground once the first `k` variables are set
        let mut ready: Vec<Vec<usize>> = vec![Vec::new()];
        for (i, s) in steps.iter().enumerate() {
            for v in first_use_vars(&s.recv) {
                if !vars.contains(&v) {
                    vars.push(v);
                    ready.push(Vec::new());
                }
            }
            ready[vars.len()].push(i);
        }
        let problem = Problem {
            trace,
            recvs: steps.iter().map(|s| s.recv.clone()).collect(),
            sends: steps.iter().map(|s| s.send.clone()).collect(),
            vars,
            ready,
        };
        let mut runs = false;
        let mut state = Assignment::default();
        let attack = self.assign(&problem, level, b, &mut state, &mut runs)?;
        Ok((attack, runs))
    }

    fn assign(
        &mut self,
        p: &Problem,
        level: &Level,
        b: usize,
        st: &mut Assignment,
        runnable: &mut bool,
    ) -> Result<Option<Substitution>, SearchError> {
        self.tick()?;
        let depth = st.values.len();
        let size = st.counts.len();
        if size > b || size + (p.vars.len() - depth) * level.max_size < b {
            return Ok(None);
        }
        let sigma: Substitution = p
            .vars
            .iter()
            .cloned()
            .zip(st.values.iter().cloned())
            .collect();
        for &i in &p.ready[depth] {
            if !self.receive_ok(p, i, &sigma, &st.values) {
                return Ok(None);
            }
        }
        if depth == p.vars.len() {
            if size != b {
                return Ok(None);
            }
            *runnable = true;
            return Ok(self.secret_ok(p, &sigma, &st.values).then_some(sigma));
        }
        for (v, subs) in &level.values {
            st.push(v.clone(), subs);
            let found = self.assign(p, level, b, st, runnable);
            st.pop(subs);
            if let Some(s) = found? {
                return Ok(Some(s));
            }
        }
        Ok(None)
    }

    fn knowledge(&self, p: &Problem, upto: usize, sigma: &Substitution) -> TermSet {
        let mut x = self.initial.clone();
        x.extend(p.sends[..upto].iter().map(|s| sigma.apply(s)));
        x
    }

    fn receive_ok(&mut self, p: &Problem, i: usize, sigma: &Substitution, values: &[Term]) -> bool {
        let used = p
            .ready
            .iter()
            .position(|r| r.contains(&i))
            .expect("every receive is scheduled");
        let key = (p.trace[..=i].to_vec(), values[..used].to_vec());
        if let Some(&ok) = self.cache.get(&key) {
            return ok;
        }
        let ok = derivable(&self.knowledge(p, i, sigma), &sigma.apply(&p.recvs[i]));
        self.cache.insert(key, ok);
        ok
    }

    fn secret_ok(&mut self, p: &Problem, sigma: &Substitution, values: &[Term]) -> bool {
        let mut trace = p.trace.to_vec();
        // distinguishes the secret check from the receive check on the same prefix
        trace.push(StepRef {
            session: usize::MAX,
            step: 0,
        });
        let key = (trace, values.to_vec());
        if let Some(&ok) = self.cache.get(&key) {
            return ok;
        }
        let ok = derivable(&self.knowledge(p, p.sends.len(), sigma), &Term::secret());
        self.cache.insert(key, ok);
        ok
    }
}

struct Level {
    /// values with their subterms
    values: Vec<(Term, Vec<Term>)>,
    max_size: usize,
}

struct Problem<'t> {
    trace: &'t [StepRef],
    recvs: Vec<Term>,
    sends: Vec<Term>,
    vars: Vec<Term>,
    ready: Vec<Vec<usize>>,
}

#[derive(Default)]
struct Assignment {
    values: Vec<Term>,
    /// subterm multiplicities across the chosen values
    counts: HashMap<Term, u32>,
}

impl Assignment {
    fn push(&mut self, v: Term, subs: &[Term]) {
        for s in subs {
            *self.counts.entry(s.clone()).or_default() += 1;
        }
        self.values.push(v);
    }

    fn pop(&mut self, subs: &[Term]) {
        for s in subs {
            let c = self.counts.get_mut(s).expect("pushed before");
            *c -= 1;
            if *c == 0 {
                self.counts.remove(s);
            }
        }
        self.values.pop();
    }
}

/// Variables of `t` in order of first occurrence, left to right.
fn first_use_vars(t: &Term) -> Vec<Term> {
    fn walk(t: &Term, out: &mut Vec<Term>) {
        if t.is_ground() {
            return;
        }
        if t.is_variable() {
            if !out.contains(t) {
                out.push(t.clone());
            }
            return;
        }
        for c in t.children() {
            walk(c, out);
        }
    }
    let mut out = Vec::new();
    walk(t, &mut out);
    out
}
