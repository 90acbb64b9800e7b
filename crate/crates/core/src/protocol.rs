//! Roles, protocols, sessions, interleavings and runs.

use std::fmt;

use thiserror::Error;

use crate::deduction::{derivable, derive, Derivation};
use crate::terms::{subterms_of, vars_of, Substitution, Term, TermSet};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub recv: Term,
    pub send: Term,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Role {
    pub name: String,
    /// Initial knowledge of the agent playing the role.
    pub knowledge: TermSet,
    pub steps: Vec<Step>,
}

impl Role {
    pub fn vars(&self) -> TermSet {
        let mut out = vars_of(&self.knowledge);
        for s in &self.steps {
            s.recv.collect_vars(&mut out);
            s.send.collect_vars(&mut out);
        }
        out
    }

    /// Variables whose first occurrence is in a send.
    pub fn agent_vars(&self) -> TermSet {
        let mut received = TermSet::new();
        let mut out = TermSet::new();
        for s in &self.steps {
            s.recv.collect_vars(&mut received);
            for v in s.send.vars() {
                if !received.contains(&v) {
                    out.insert(v);
                }
            }
        }
        out
    }

    pub fn intruder_vars(&self) -> TermSet {
        let agent = self.agent_vars();
        self.vars()
            .into_iter()
            .filter(|v| !agent.contains(v))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Protocol {
    pub name: String,
    /// Initial intruder knowledge; ground and normalized.
    pub initial_knowledge: TermSet,
    pub roles: Vec<Role>,
    /// Declared agent names, not including the intruder.
    pub agents: Vec<Term>,
    /// Declared names and keys.
    pub declared: TermSet,
}

impl Protocol {
    /// Names an agent variable may be instantiated with: the declared agents
    /// followed by `I`.
    pub fn agent_pool(&self) -> Vec<Term> {
        let mut pool: Vec<Term> = self.agents.clone();
        if !pool.contains(&Term::intruder()) {
            pool.push(Term::intruder());
        }
        pool
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WellFormedError {
    #[error("knowledge uses variables not bound by a send: {}", join(.0))]
    KnowledgeVars(TermSet),
    #[error("send at step {step} is not derivable from the role knowledge and earlier receives")]
    UnderivableSend { step: usize },
}

fn join(ts: &TermSet) -> String {
    ts.iter()
        .map(Term::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WellFormedReport {
    pub errors: Vec<WellFormedError>,
}

impl WellFormedReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    /// 1-based indices of steps whose send is underivable.
    pub fn failing_steps(&self) -> Vec<usize> {
        self.errors
            .iter()
            .filter_map(|e| match e {
                WellFormedError::UnderivableSend { step } => Some(*step),
                _ => None,
            })
            .collect()
    }
}

/// Checks that knowledge variables are agent variables and that every send
/// is derivable from the knowledge and the receives so far, with variables
/// read as opaque atoms.
pub fn well_formed(role: &Role) -> WellFormedReport {
    let mut errors = Vec::new();
    let agent = role.agent_vars();
    let stray: TermSet = vars_of(&role.knowledge)
        .into_iter()
        .filter(|v| !agent.contains(v))
        .collect();
    if !stray.is_empty() {
        errors.push(WellFormedError::KnowledgeVars(stray));
    }
    let mut known = role.knowledge.clone();
    for (i, s) in role.steps.iter().enumerate() {
        known.insert(s.recv.clone());
        if !derivable(&known, &s.send) {
            errors.push(WellFormedError::UnderivableSend { step: i + 1 });
        }
    }
    WellFormedReport { errors }
}

/// A role instance. Intruder variables are renamed apart per session id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    pub id: usize,
    /// Index of the role in its protocol.
    pub role: usize,
    pub role_name: String,
    pub tau: Substitution,
    /// `Xτ`
    pub knowledge: TermSet,
    /// `ρτ`
    pub steps: Vec<Step>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum InstantiateError {
    #[error("agent map must cover exactly the agent variables {}", join(.0))]
    AgentDomain(TermSet),
    #[error("agent variable {0} must be mapped to a name")]
    NotAName(Term),
    #[error("instantiation does not keep {0} normalized")]
    Collapses(Term),
}

pub fn fresh_variable(v: &Term, session_id: usize) -> Term {
    let label = v.as_atom().expect("variables are atoms").label();
    Term::var(&format!("{label}#{session_id}"))
}

/// Instantiates `role` (the `role_index`-th role of its protocol) with the
/// given agent assignment, renaming each intruder variable `v` to
/// `v#session_id`.
pub fn instantiate(
    role: &Role,
    role_index: usize,
    agent_map: &Substitution,
    session_id: usize,
) -> Result<Session, InstantiateError> {
    let agent = role.agent_vars();
    if agent_map.domain() != agent {
        return Err(InstantiateError::AgentDomain(agent));
    }
    let mut tau = Substitution::new();
    for (v, a) in agent_map.iter() {
        if !a.is_atom() || a.is_variable() || a.is_key() {
            return Err(InstantiateError::NotAName(v.clone()));
        }
        tau.insert(v.clone(), a.clone());
    }
    for v in role.intruder_vars() {
        let fresh = fresh_variable(&v, session_id);
        tau.insert(v, fresh);
    }
    let all = role
        .knowledge
        .iter()
        .chain(role.steps.iter().flat_map(|s| [&s.recv, &s.send]));
    for t in all {
        if !tau.keeps_normal(t) {
            return Err(InstantiateError::Collapses(t.clone()));
        }
    }
    Ok(Session {
        id: session_id,
        role: role_index,
        role_name: role.name.clone(),
        knowledge: tau.apply_all(&role.knowledge),
        steps: role
            .steps
            .iter()
            .map(|s| Step {
                recv: tau.apply(&s.recv),
                send: tau.apply(&s.send),
            })
            .collect(),
        tau,
    })
}

/// Position of a step: index into the session list and 0-based step index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepRef {
    pub session: usize,
    pub step: usize,
}

/// Prefixes of interleavings of sessions with the given step counts, in
/// lexicographic order of session indices (a prefix comes before its
/// extensions).
pub struct Interleavings {
    lens: Vec<usize>,
    done: Vec<usize>,
    current: Vec<StepRef>,
    started: bool,
}

impl Interleavings {
    pub fn new(lens: Vec<usize>) -> Self {
        let done = vec![0; lens.len()];
        Interleavings {
            lens,
            done,
            current: Vec::new(),
            started: false,
        }
    }

    fn push(&mut self, s: usize) {
        self.current.push(StepRef {
            session: s,
            step: self.done[s],
        });
        self.done[s] += 1;
    }

    fn next_open(&self, from: usize) -> Option<usize> {
        (from..self.lens.len()).find(|&s| self.done[s] < self.lens[s])
    }
}

impl Iterator for Interleavings {
    type Item = Vec<StepRef>;

    fn next(&mut self) -> Option<Vec<StepRef>> {
        if !self.started {
            self.started = true;
            return Some(Vec::new());
        }
        if let Some(s) = self.next_open(0) {
            self.push(s);
            return Some(self.current.clone());
        }
        while let Some(last) = self.current.pop() {
            self.done[last.session] -= 1;
            if let Some(s) = self.next_open(last.session + 1) {
                self.push(s);
                return Some(self.current.clone());
            }
        }
        None
    }
}

pub fn interleavings(sessions: &[Session]) -> Interleavings {
    Interleavings::new(sessions.iter().map(|s| s.steps.len()).collect())
}

/// A validated run and everything derived from it.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub protocol_name: String,
    pub initial_knowledge: TermSet,
    pub sessions: Vec<Session>,
    pub trace: Vec<StepRef>,
    /// `(r_i, s_i)` before substitution.
    pub steps: Vec<Step>,
    pub sigma: Substitution,
    /// `X_0 … X_n` before substitution.
    pub knowledge: Vec<TermSet>,
    /// `nf(X_i σ)`
    pub knowledge_sigma: Vec<TermSet>,
    /// Normal proof of `nf(X_{i-1}σ) ⊢ nf(r_i σ)` for each step.
    pub receive_proofs: Vec<Derivation>,
    pub c: TermSet,
    pub d: TermSet,
}

impl RunContext {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `nf(r_i σ)` for a 1-based step index.
    pub fn recv_sigma(&self, i: usize) -> Term {
        self.sigma.apply(&self.steps[i - 1].recv)
    }

    pub fn final_knowledge(&self) -> &TermSet {
        self.knowledge_sigma.last().expect("X_0 is always present")
    }
}

/// `C` and `D` for a session set and trace.
pub fn context_sets(initial: &TermSet, sessions: &[Session], steps: &[Step]) -> (TermSet, TermSet) {
    let mut c = subterms_of(initial);
    for s in sessions {
        for t in &s.knowledge {
            t.collect_subterms(&mut c);
        }
    }
    for s in steps {
        s.recv.collect_subterms(&mut c);
        s.send.collect_subterms(&mut c);
    }
    c.insert(Term::secret());
    let d = c
        .iter()
        .filter(|t| t.is_standard() && !t.is_variable())
        .cloned()
        .collect();
    (c, d)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("trace entry {0} does not name a step of the sessions in order")]
    NotAnInterleaving(usize),
    #[error("substitution must be ground and defined exactly on the trace variables")]
    BadSubstitution,
    #[error("receive at step {step} is not derivable")]
    Underivable { step: usize },
}

/// Checks that `trace` is a prefix of an interleaving of `sessions` and that
/// every receive is derivable under `sigma`, storing the proofs.
pub fn validate_run(
    protocol: &Protocol,
    sessions: &[Session],
    trace: &[StepRef],
    sigma: &Substitution,
) -> Result<RunContext, RunError> {
    validate_with(
        &protocol.name,
        &protocol.initial_knowledge,
        sessions,
        trace,
        sigma,
    )
}

pub(crate) fn validate_with(
    name: &str,
    initial: &TermSet,
    sessions: &[Session],
    trace: &[StepRef],
    sigma: &Substitution,
) -> Result<RunContext, RunError> {
    let mut next = vec![0; sessions.len()];
    let mut steps = Vec::with_capacity(trace.len());
    for (i, r) in trace.iter().enumerate() {
        let ok = r.session < sessions.len()
            && next[r.session] == r.step
            && r.step < sessions[r.session].steps.len();
        if !ok {
            return Err(RunError::NotAnInterleaving(i + 1));
        }
        next[r.session] += 1;
        steps.push(sessions[r.session].steps[r.step].clone());
    }
    let mut trace_vars = TermSet::new();
    for s in &steps {
        s.recv.collect_vars(&mut trace_vars);
        s.send.collect_vars(&mut trace_vars);
    }
    if !sigma.is_ground() || sigma.domain() != trace_vars {
        return Err(RunError::BadSubstitution);
    }

    let mut knowledge = vec![initial.clone()];
    let mut knowledge_sigma = vec![initial.clone()];
    let mut receive_proofs = Vec::with_capacity(steps.len());
    for (i, s) in steps.iter().enumerate() {
        let before = &knowledge_sigma[i];
        let r = derive(before, &sigma.apply(&s.recv));
        let Some(proof) = r.witness else {
            return Err(RunError::Underivable { step: i + 1 });
        };
        receive_proofs.push(proof);
        let mut x = knowledge[i].clone();
        x.insert(s.send.clone());
        let mut xs = before.clone();
        xs.insert(sigma.apply(&s.send));
        knowledge.push(x);
        knowledge_sigma.push(xs);
    }
    let (c, d) = context_sets(initial, sessions, &steps);
    Ok(RunContext {
        protocol_name: name.to_string(),
        initial_knowledge: initial.clone(),
        sessions: sessions.to_vec(),
        trace: trace.to_vec(),
        steps,
        sigma: sigma.clone(),
        knowledge,
        knowledge_sigma,
        receive_proofs,
        c,
        d,
    })
}

/// A proof of `secret` from the final knowledge, if the run is an attack.
pub fn secret_proof(ctx: &RunContext) -> Option<Derivation> {
    derive(ctx.final_knowledge(), &Term::secret()).witness
}

pub fn is_attack(ctx: &RunContext) -> bool {
    secret_proof(ctx).is_some()
}

impl fmt::Display for StepRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.session + 1, self.step + 1)
    }
}
