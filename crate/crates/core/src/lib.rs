//! Symbolic verification of cryptographic protocols with exclusive or, for a
//! bounded number of sessions.

pub mod deduction;
pub mod gf2;
pub mod protocol;
pub mod search;
pub mod specfmt;
pub mod terms;
pub mod transforms;
