use std::fs;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use xordy::deduction::derive;
use xordy::protocol::well_formed;
use xordy::search::{find_attack, AttackWitness, SearchConfig, SearchError};
use xordy::specfmt::{
    emit_witness_json, parse_protocol, parse_protocol_unchecked, parse_term, parse_terms,
    proof_to_json,
};
use xordy::terms::TermSet;

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_ATTACK: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "xordy",
    version,
    about = "Bounded-session protocol verifier with exclusive or"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the normal form of a term.
    Nf { term: String },
    /// Decide whether a goal is derivable from a knowledge set.
    Derive {
        /// Comma-separated terms.
        #[arg(long)]
        knowledge: String,
        #[arg(long)]
        goal: String,
        /// Print a proof when derivable.
        #[arg(long)]
        proof: bool,
        /// Print the proof as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Parse a protocol file and report on each role.
    Check { file: String },
    /// Search for an attack with a bounded number of sessions.
    Verify {
        file: String,
        #[arg(long, short = 'k')]
        sessions: usize,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        size_bound: Option<u64>,
        /// Seconds.
        #[arg(long, env = "XORDY_TIMEOUT")]
        timeout: Option<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(match cli.command {
        Command::Nf { term } => nf(&term),
        Command::Derive {
            knowledge,
            goal,
            proof,
            json,
        } => derive_cmd(&knowledge, &goal, proof, json),
        Command::Check { file } => check(&file),
        Command::Verify {
            file,
            sessions,
            size_bound,
            timeout,
            jobs,
            json,
        } => verify(
            &file,
            sessions,
            size_bound.map(|b| b as usize),
            timeout,
            jobs,
            json,
        ),
    })
}

fn nf(text: &str) -> u8 {
    match parse_term(text) {
        Ok(t) => {
            println!("{t}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn derive_cmd(knowledge: &str, goal: &str, proof: bool, json: bool) -> u8 {
    let parsed = match parse_terms(&[knowledge, goal]) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let [knowledge, goal] = <[Vec<_>; 2]>::try_from(parsed).expect("two lists");
    if goal.len() != 1 {
        eprintln!("error: --goal takes exactly one term");
        return EXIT_ERROR;
    }
    let knowledge: TermSet = knowledge.into_iter().collect();
    let r = derive(&knowledge, &goal[0]);
    if json {
        let out = serde_json::json!({
            "derivable": r.derivable,
            "proof": r.witness.as_ref().map(proof_to_json),
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    } else {
        println!(
            "{}",
            if r.derivable {
                "derivable"
            } else {
                "not derivable"
            }
        );
        if let (true, Some(w)) = (proof, &r.witness) {
            print!("{w}");
        }
    }
    EXIT_OK
}

fn read(file: &str) -> Result<String, u8> {
    fs::read_to_string(file).map_err(|e| {
        eprintln!("error: cannot read {file}: {e}");
        EXIT_ERROR
    })
}

fn check(file: &str) -> u8 {
    let text = match read(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let parsed = match parse_protocol_unchecked(&text) {
        Ok(p) => p,
        Err(d) => {
            eprintln!("{file}:{d}");
            return EXIT_ERROR;
        }
    };
    let p = &parsed.protocol;
    println!("protocol {}: {} role(s)", p.name, p.roles.len());
    let mut ok = true;
    for (i, role) in p.roles.iter().enumerate() {
        let report = well_formed(role);
        let pos = parsed.role_positions[i];
        if report.is_ok() {
            println!(
                "  role {} ({}:{}): well-formed, {} step(s)",
                role.name,
                pos.line,
                pos.col,
                role.steps.len()
            );
        } else {
            ok = false;
            println!(
                "  role {} ({}:{}): not well-formed",
                role.name, pos.line, pos.col
            );
            for e in &report.errors {
                println!("    {e}");
            }
        }
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_ERROR
    }
}

fn verify(
    file: &str,
    sessions: usize,
    size_bound: Option<usize>,
    timeout: Option<f64>,
    jobs: usize,
    json: bool,
) -> u8 {
    let text = match read(file) {
        Ok(t) => t,
        Err(c) => return c,
    };
    let protocol = match parse_protocol(&text) {
        Ok(p) => p,
        Err(d) => {
            for line in d.0 {
                eprintln!("{file}:{line}");
            }
            return EXIT_ERROR;
        }
    };
    let timeout = match timeout {
        Some(s) if !(s.is_finite() && s > 0.0) => {
            eprintln!("error: timeout must be a positive number of seconds");
            return EXIT_ERROR;
        }
        t => t.map(Duration::from_secs_f64),
    };
    let cfg = SearchConfig {
        sessions,
        size_bound,
        timeout,
        jobs,
    };
    match find_attack(&protocol, &cfg) {
        Ok(Some(w)) => {
            if json {
                println!("{}", emit_witness_json(&w));
            } else {
                print_witness(&w);
            }
            EXIT_ATTACK
        }
        Ok(None) => {
            if json {
                println!(
                    "{}",
                    serde_json::json!({ "protocol": protocol.name, "attack": null })
                );
            } else {
                println!("no attack within bounds ({sessions} session(s))");
            }
            EXIT_OK
        }
        Err(SearchError::Timeout) => {
            eprintln!("timeout");
            EXIT_TIMEOUT
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn print_witness(w: &AttackWitness) {
    println!(
        "attack on {} with {} session(s)",
        w.protocol,
        w.sessions.len()
    );
    println!("sessions:");
    for s in &w.sessions {
        println!("  {}: role {}  τ = {}", s.id, s.role_name, s.tau);
    }
    println!("trace:");
    for (i, (r, s)) in w.trace.iter().zip(&w.run.steps).enumerate() {
        println!(
            "  {}. [{}.{}] recv {}  send {}",
            i + 1,
            w.sessions[r.session].id,
            r.step + 1,
            s.recv,
            s.send
        );
    }
    println!("σ  = {}", w.sigma);
    println!(
        "σ* = {}  (size {}, |C| = {})",
        w.sigma_star,
        w.sigma_star.size(),
        w.c_size
    );
    for (i, p) in w.run.receive_proofs.iter().enumerate() {
        println!("proof of receive {}:", i + 1);
        print!("{}", indent(&p.to_string()));
    }
    println!("proof of secret:");
    print!("{}", indent(&w.secret_proof.to_string()));
}

fn indent(s: &str) -> String {
    s.lines().map(|l| format!("  {l}\n")).collect()
}
