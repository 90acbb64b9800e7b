//! Protocol file syntax, term syntax, and JSON output.

pub mod json;
pub mod parser;

pub use json::{
    emit_witness_json, proof_from_json, proof_to_json, witness_to_json, ProofJson, WitnessJson,
};
pub use parser::{
    parse_protocol, parse_protocol_unchecked, parse_term, parse_term_in, parse_terms, Diagnostic,
    Diagnostics, Scope,
};
