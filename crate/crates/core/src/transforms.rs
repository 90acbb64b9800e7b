//! Typed terms, zapping, the small substitution `σ*`, typed normal proofs,
//! and attack minimization.

use std::collections::HashMap;

use thiserror::Error;

use crate::deduction::{collapse_root, derive, Derivation};
use crate::protocol::{secret_proof, validate_with, RunError};
use crate::terms::{Shape, Substitution, Term, TermSet};

pub use crate::protocol::RunContext;

/// `nf(Dσ)` for a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedSet {
    pub terms: TermSet,
}

impl TypedSet {
    pub fn new(terms: TermSet) -> Self {
        TypedSet { terms }
    }

    pub fn contains(&self, t: &Term) -> bool {
        self.terms.contains(t)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

pub fn typed_set(ctx: &RunContext) -> TypedSet {
    TypedSet::new(ctx.sigma.apply_all(&ctx.d))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ZapError {
    #[error("cannot zap non-ground term {0}")]
    NotGround(Term),
}

/// Replaces every maximal untyped non-atomic standard subterm by `0` and
/// renormalizes.
pub fn zap(t: &Term, typed: &TypedSet) -> Result<Term, ZapError> {
    if !t.is_ground() {
        return Err(ZapError::NotGround(t.clone()));
    }
    Ok(zap_memo(t, typed, &mut HashMap::new()))
}

fn zap_memo(t: &Term, typed: &TypedSet, memo: &mut HashMap<Term, Term>) -> Term {
    if let Some(z) = memo.get(t) {
        return z.clone();
    }
    let z = match t.shape() {
        Shape::Atom(_) => t.clone(),
        Shape::Xor(fs) => Term::xor(fs.iter().map(|f| zap_memo(f, typed, memo))),
        _ if !typed.contains(t) => Term::zero(),
        // the key under pk is zapped in place so the result stays a term
        Shape::Aenc(u, pk) => {
            let k = zap_memo(&pk.children()[0], typed, memo);
            Term::aenc(zap_memo(u, typed, memo), Term::pk(k))
        }
        _ => t.rebuild(
            t.children()
                .iter()
                .map(|c| zap_memo(c, typed, memo))
                .collect(),
        ),
    };
    memo.insert(t.clone(), z.clone());
    z
}

/// `σ*(x) = zap(σ(x))` on the domain of `σ`.
pub fn sigma_star(sigma: &Substitution, typed: &TypedSet) -> Result<Substitution, ZapError> {
    let mut memo = HashMap::new();
    let mut out = Substitution::new();
    for (x, v) in sigma.iter() {
        if !v.is_ground() {
            return Err(ZapError::NotGround(v.clone()));
        }
        out.insert(x.clone(), zap_memo(v, typed, &mut memo));
    }
    Ok(out)
}

/// Relabels each node `s` as `nf(sσ)`, keeping shape and rules.
pub fn translate_derivation(d: &Derivation, sigma: &Substitution) -> Derivation {
    d.map_terms(&mut |t| sigma.apply(t))
}

/// Every subproof ends in a constructor, or concludes a typed or
/// non-standard term.
pub fn is_typed_derivation(d: &Derivation, typed: &TypedSet) -> bool {
    d.subproofs().iter().all(|p| {
        p.ends_in_constructor() || !p.conclusion.is_standard() || typed.contains(&p.conclusion)
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("step index {0} is past the end of the run")]
    BadIndex(usize),
    #[error("{0} is untyped but never occurs in a receive up to step {1}")]
    NoReceiveOrigin(Term, usize),
    #[error("minimal subproof for {0} in receive {1} concludes {2}")]
    BadEarlierProof(Term, usize, Term),
}

/// Turns a normal proof of `nf(X_i σ) ⊢ t` into a typed normal proof of the
/// same. Destructor-ended subproofs with an untyped standard conclusion are
/// replaced by a proof taken from the earliest receive whose term contains
/// that conclusion.
pub fn typed_normalize(
    d: &Derivation,
    ctx: &RunContext,
    i: usize,
) -> Result<Derivation, TransformError> {
    if i > ctx.len() {
        return Err(TransformError::BadIndex(i));
    }
    let typed = typed_set(ctx);
    let recvs: Vec<TermSet> = (1..=ctx.len())
        .map(|j| ctx.recv_sigma(j).subterms())
        .collect();
    TypedNormalizer {
        ctx,
        typed: &typed,
        recvs: &recvs,
    }
    .run(d, i)
}

struct TypedNormalizer<'a> {
    ctx: &'a RunContext,
    typed: &'a TypedSet,
    /// `st(nf(r_j σ))` for j = 1..n
    recvs: &'a [TermSet],
}

impl TypedNormalizer<'_> {
    fn run(&self, d: &Derivation, i: usize) -> Result<Derivation, TransformError> {
        let t = &d.conclusion;
        if d.ends_in_destructor() && t.is_standard() && !self.typed.contains(t) {
            let (proof, j) = self.earlier_proof(t, i)?;
            return self.run(proof, j);
        }
        let children = d
            .children
            .iter()
            .map(|c| self.run(c, i))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(collapse_root(Derivation::new(t.clone(), d.rule, children)))
    }

    /// A subproof of the receive proof at the earliest step `j ≤ i` whose
    /// receive contains `t`; it proves `t` from `nf(X_{j-1} σ)`.
    fn earlier_proof(&self, t: &Term, i: usize) -> Result<(&Derivation, usize), TransformError> {
        let j = (1..=i)
            .find(|&j| self.recvs[j - 1].contains(t))
            .ok_or_else(|| TransformError::NoReceiveOrigin(t.clone(), i))?;
        let mut chi = &self.ctx.receive_proofs[j - 1];
        while let Some(next) = chi.children.iter().find(|c| t.is_subterm_of(&c.conclusion)) {
            chi = next;
        }
        if &chi.conclusion != t {
            return Err(TransformError::BadEarlierProof(
                t.clone(),
                j,
                chi.conclusion.clone(),
            ));
        }
        Ok((chi, j - 1))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum MinimizeError {
    #[error(transparent)]
    Zap(#[from] ZapError),
    #[error("run under σ* failed to validate: {0}")]
    Revalidate(RunError),
    #[error("secret is not derivable under σ*")]
    LostAttack,
    #[error("σ* has size {size}, above |C| = {bound}")]
    TooLarge { size: usize, bound: usize },
}

/// Zaps the substitution of an attack run and re-validates the run under
/// `σ*` from scratch.
pub fn minimize_attack(ctx: &RunContext) -> Result<(Substitution, RunContext), MinimizeError> {
    let typed = typed_set(ctx);
    let star = sigma_star(&ctx.sigma, &typed)?;
    let small = validate_with(
        &ctx.protocol_name,
        &ctx.initial_knowledge,
        &ctx.sessions,
        &ctx.trace,
        &star,
    )
    .map_err(MinimizeError::Revalidate)?;
    if secret_proof(&small).is_none() {
        return Err(MinimizeError::LostAttack);
    }
    let (size, bound) = (star.size(), ctx.c.len());
    if size > bound {
        return Err(MinimizeError::TooLarge { size, bound });
    }
    Ok((star, small))
}

/// `nf(tσ*) = zap(nf(tσ))` for every `t ∈ C`.
pub fn check_zap_commutation(ctx: &RunContext, star: &Substitution) -> Result<(), String> {
    let typed = typed_set(ctx);
    for t in &ctx.c {
        let lhs = star.apply(t);
        let rhs = zap(&ctx.sigma.apply(t), &typed).map_err(|e| e.to_string())?;
        if lhs != rhs {
            return Err(format!("{t}: nf(tσ*) = {lhs} but zap(nf(tσ)) = {rhs}"));
        }
    }
    Ok(())
}

/// Every standard term in `st(nf(X_i σ))` is typed or occurs in
/// `st(nf(r_k σ))` for some `k ≤ i`.
pub fn check_receive_origin(ctx: &RunContext) -> Result<(), String> {
    let typed = typed_set(ctx);
    let mut seen = TermSet::new();
    for i in 0..=ctx.len() {
        if i > 0 {
            ctx.recv_sigma(i).collect_subterms(&mut seen);
        }
        let mut st = TermSet::new();
        for u in &ctx.knowledge_sigma[i] {
            u.collect_subterms(&mut st);
        }
        for t in st.iter().filter(|t| t.is_standard()) {
            if !typed.contains(t) && !seen.contains(t) {
                return Err(format!(
                    "{t} in st(X_{i}σ) is untyped and not received by step {i}"
                ));
            }
        }
    }
    Ok(())
}

/// Each send of the run is derivable from its session's knowledge and the
/// session's receives so far, and that knowledge lies in `D`.
pub fn check_honest_sends(ctx: &RunContext) -> Result<(), String> {
    for (m, r) in ctx.trace.iter().enumerate() {
        let session = &ctx.sessions[r.session];
        if !session.knowledge.is_subset(&ctx.d) {
            return Err(format!(
                "knowledge of session {} is not inside D",
                session.id
            ));
        }
        let mut known = session.knowledge.clone();
        known.extend(session.steps[..=r.step].iter().map(|s| s.recv.clone()));
        if !derive(&known, &session.steps[r.step].send).derivable {
            return Err(format!(
                "send at step {} is not derivable by its session",
                m + 1
            ));
        }
    }
    Ok(())
}

/// Subterms of every `σ*(x)` lie in `zap(nf(Cσ))`.
pub fn check_small_subterms(ctx: &RunContext, star: &Substitution) -> Result<(), String> {
    let typed = typed_set(ctx);
    let mut memo = HashMap::new();
    let image: TermSet = ctx
        .c
        .iter()
        .map(|t| zap_memo(&ctx.sigma.apply(t), &typed, &mut memo))
        .collect();
    for (x, v) in star.iter() {
        if let Some(u) = v.subterms().into_iter().find(|u| !image.contains(u)) {
            return Err(format!("subterm {u} of σ*({x}) is outside zap(nf(Cσ))"));
        }
    }
    Ok(())
}

/// Typed normal proofs for every receive and for the secret of an attack
/// run, each checked against the rule set by the caller.
pub fn typed_proofs(ctx: &RunContext) -> Result<Vec<Derivation>, TransformError> {
    let mut out = Vec::new();
    for (j, p) in ctx.receive_proofs.iter().enumerate() {
        out.push(typed_normalize(p, ctx, j)?);
    }
    if let Some(p) = secret_proof(ctx) {
        out.push(typed_normalize(&p, ctx, ctx.len())?);
    }
    Ok(out)
}
