//! Machine-readable output for witnesses and proofs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deduction::{check_derivation, CheckError, CheckReason, Derivation, Rule};
use crate::search::AttackWitness;
use crate::terms::{is_normal_form, normalize, Shape, Substitution, TermSet};

use super::parser::{parse_raw_term_in, Diagnostic, Scope};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofJson {
    pub term: String,
    pub rule: String,
    pub premises: Vec<ProofJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionJson {
    pub id: usize,
    pub role: String,
    pub tau: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceJson {
    /// Session id.
    pub session: usize,
    /// 1-based step of that session.
    pub step: usize,
    pub recv: String,
    pub send: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundsJson {
    pub c_size: usize,
    pub sigma_star_size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessJson {
    pub protocol: String,
    pub sessions: Vec<SessionJson>,
    pub trace: Vec<TraceJson>,
    pub sigma: BTreeMap<String, String>,
    pub sigma_star: BTreeMap<String, String>,
    /// Receive proofs of the run under `sigma_star`.
    pub proofs: Vec<ProofJson>,
    pub secret_proof: ProofJson,
    pub bounds: BoundsJson,
}

pub fn proof_to_json(d: &Derivation) -> ProofJson {
    ProofJson {
        term: d.conclusion.to_string(),
        rule: d.rule.tag().to_string(),
        premises: d.children.iter().map(proof_to_json).collect(),
    }
}

fn subst_map(s: &Substitution) -> BTreeMap<String, String> {
    s.iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

pub fn witness_to_json(w: &AttackWitness) -> WitnessJson {
    WitnessJson {
        protocol: w.protocol.clone(),
        sessions: w
            .sessions
            .iter()
            .map(|s| SessionJson {
                id: s.id,
                role: s.role_name.clone(),
                tau: subst_map(&s.tau),
            })
            .collect(),
        trace: w
            .trace
            .iter()
            .zip(&w.run.steps)
            .map(|(r, s)| TraceJson {
                session: w.sessions[r.session].id,
                step: r.step + 1,
                recv: s.recv.to_string(),
                send: s.send.to_string(),
            })
            .collect(),
        sigma: subst_map(&w.sigma),
        sigma_star: subst_map(&w.sigma_star),
        proofs: w.run.receive_proofs.iter().map(proof_to_json).collect(),
        secret_proof: proof_to_json(&w.secret_proof),
        bounds: BoundsJson {
            c_size: w.c_size,
            sigma_star_size: w.sigma_star.size(),
        },
    }
}

/// Pretty-printed JSON; identical for identical witnesses.
pub fn emit_witness_json(w: &AttackWitness) -> String {
    serde_json::to_string_pretty(&witness_to_json(w)).expect("witness serializes")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProofReadError {
    #[error("at node {path:?}: {diag}")]
    Syntax { path: Vec<usize>, diag: Diagnostic },
    #[error("at node {path:?}: unknown rule `{rule}`")]
    UnknownRule { path: Vec<usize>, rule: String },
    #[error(transparent)]
    Invalid(#[from] CheckError),
}

/// Reads a proof tree back. Labels must be written in normal form; a label
/// that is not is reported as [`CheckReason::NotNormalized`].
pub fn proof_from_json(p: &ProofJson, scope: &Scope) -> Result<Derivation, ProofReadError> {
    read_node(p, scope, &mut Vec::new())
}

fn read_node(
    p: &ProofJson,
    scope: &Scope,
    path: &mut Vec<usize>,
) -> Result<Derivation, ProofReadError> {
    let raw = parse_raw_term_in(&p.term, scope).map_err(|diag| ProofReadError::Syntax {
        path: path.clone(),
        diag,
    })?;
    if !is_normal_form(&raw) {
        return Err(CheckError {
            path: path.clone(),
            reason: CheckReason::NotNormalized(p.term.clone()),
        }
        .into());
    }
    let conclusion = normalize(&raw);
    let mut children = Vec::with_capacity(p.premises.len());
    for (i, c) in p.premises.iter().enumerate() {
        path.push(i);
        children.push(read_node(c, scope, path)?);
        path.pop();
    }
    let rule = match p.rule.as_str() {
        "ax" => Rule::Ax,
        "split" => match children.first().map(|c| c.conclusion.shape()) {
            Some(Shape::Pair(a, _)) if *a == conclusion => Rule::Split1,
            _ => Rule::Split2,
        },
        "sdec" => Rule::Sdec,
        "adec" => Rule::Adec,
        "pk" => Rule::Pk,
        "pair" => Rule::Pair,
        "senc" => Rule::Senc,
        "aenc" => Rule::Aenc,
        "xor" => Rule::Xor,
        other => {
            return Err(ProofReadError::UnknownRule {
                path: path.clone(),
                rule: other.to_string(),
            })
        }
    };
    Ok(Derivation::new(conclusion, rule, children))
}

/// Reads a proof and checks it against `knowledge`.
pub fn check_proof_json(
    p: &ProofJson,
    scope: &Scope,
    knowledge: &TermSet,
) -> Result<Derivation, ProofReadError> {
    let d = proof_from_json(p, scope)?;
    check_derivation(&d, knowledge)?;
    Ok(d)
}
