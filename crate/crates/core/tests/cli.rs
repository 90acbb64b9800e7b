mod common;

use std::io::Write;
use std::process::{Command, Output};

use xordy::deduction::check_derivation;
use xordy::specfmt::json::check_proof_json;
use xordy::specfmt::{parse_term_in, ProofJson, Scope, WitnessJson};
use xordy::terms::{Substitution, TermSet};

fn xordy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xordy"))
        .args(args)
        .env_remove("XORDY_TIMEOUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn fixture(name: &str) -> String {
    common::fixture_path(name)
        .to_str()
        .expect("utf-8 path")
        .to_string()
}

#[test]
fn nf_prints_canonical_form() {
    let o = xordy(&["nf", "a (+) b (+) a"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "b");
    let o = xordy(&["nf", "c xor (b (+) 0) xor a"]);
    assert_eq!(stdout(&o).trim(), "a (+) b (+) c");
}

#[test]
fn nf_rejects_bad_syntax() {
    let o = xordy(&["nf", "pair(a,"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!o.stderr.is_empty());
}

#[test]
fn derive_reports_and_proves() {
    let o = xordy(&[
        "derive",
        "--knowledge",
        "a (+) secret, a",
        "--goal",
        "secret",
        "--proof",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("derivable"), "{out}");
    assert!(out.contains("[xor]"));

    let o = xordy(&[
        "derive",
        "--knowledge",
        "senc(secret, k)",
        "--goal",
        "secret",
    ]);
    assert_eq!(stdout(&o).trim(), "not derivable");
}

#[test]
fn derive_json_proof_rechecks() {
    let o = xordy(&[
        "derive",
        "--knowledge",
        "senc(pair(s, n), k), k (+) m, m",
        "--goal",
        "s",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["derivable"], true);
    let proof: ProofJson = serde_json::from_value(v["proof"].clone()).unwrap();
    let scope = Scope::new(xordy::terms::AtomKind::Name);
    let x: TermSet = ["senc(pair(s, n), k)", "k (+) m", "m"]
        .iter()
        .map(|t| parse_term_in(t, &scope).unwrap())
        .collect();
    let d = check_proof_json(&proof, &scope, &x).unwrap();
    assert!(check_derivation(&d, &x).is_ok());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(xordy(&[]).status.code(), Some(1));
    assert_eq!(xordy(&["verify"]).status.code(), Some(1));
    assert_eq!(
        xordy(&[
            "verify",
            &fixture("p1"),
            "--sessions",
            "1",
            "--size-bound",
            "0"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        xordy(&["verify", "/nonexistent.xordy", "--sessions", "1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(xordy(&["--help"]).status.code(), Some(0));
}

#[test]
fn check_reports_roles() {
    let o = xordy(&["check", &fixture("p3")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("role R") && out.contains("role S"), "{out}");

    let mut f = tempfile("bad");
    writeln!(
        f.1,
        "protocol bad;\nrole A\n  knows: k;\n  recv x;\n  send senc(y, k);"
    )
    .unwrap();
    let o = xordy(&["check", &f.0]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("not well-formed"));
    let o = xordy(&["verify", &f.0, "-k", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr).to_string();
    assert!(
        err.contains(":5:"),
        "diagnostic should point at line 5: {err}"
    );
}

fn tempfile(name: &str) -> (String, std::fs::File) {
    let dir = std::env::temp_dir().join(format!("xordy-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(format!("{name}.xordy"));
    let f = std::fs::File::create(&path).unwrap();
    (path.to_str().unwrap().to_string(), f)
}

#[test]
fn verify_exit_codes() {
    assert_eq!(
        xordy(&["verify", &fixture("p1"), "--sessions", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        xordy(&["verify", &fixture("p2"), "--sessions", "2"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        xordy(&["verify", &fixture("p3"), "--sessions", "1"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        xordy(&["verify", &fixture("p3"), "--sessions", "2"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verify_times_out() {
    // safe, with a large space of shapes to rule out
    let mut f = tempfile("wrap");
    writeln!(
        f.1,
        "protocol wrap;\nkeys: k;\nknowledge: senc(a, k);\nrole W\n  knows: k;\n  recv senc(z, k);\n  send senc(pair(z, senc(z, k)), k);"
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_xordy"))
        .args(["verify", &f.0, "--sessions", "3", "--size-bound", "30"])
        .env("XORDY_TIMEOUT", "0.2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{o:?}");
    // the default bound is out of reach here, a small one is not
    assert_eq!(
        xordy(&["verify", &f.0, "--sessions", "1", "--size-bound", "5"])
            .status
            .code(),
        Some(0)
    );
    let o = xordy(&[
        "verify",
        &fixture("p2"),
        "--sessions",
        "2",
        "--timeout",
        "-1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn p1_json_witness_round_trips() {
    let o = xordy(&["verify", &fixture("p1"), "--sessions", "1", "--json"]);
    assert_eq!(o.status.code(), Some(2));
    let w: WitnessJson = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(w.protocol, "p1");
    assert!(w.bounds.sigma_star_size <= w.bounds.c_size);

    let protocol = common::fixture("p1");
    let scope = Scope::of(&protocol);
    let mut terms: Vec<&String> = w.sigma.values().chain(w.sigma_star.values()).collect();
    for step in &w.trace {
        terms.push(&step.recv);
        terms.push(&step.send);
    }
    for t in terms {
        let parsed = parse_term_in(t, &scope).unwrap();
        assert_eq!(&parsed.to_string(), t);
    }
    // the secret proof re-checks against the final knowledge under σ
    let mut sigma = Substitution::new();
    for (k, v) in &w.sigma {
        sigma.insert(
            parse_term_in(k, &scope).unwrap(),
            parse_term_in(v, &scope).unwrap(),
        );
    }
    let mut x: TermSet = protocol.initial_knowledge.clone();
    for step in &w.trace {
        x.insert(sigma.apply(&parse_term_in(&step.send, &scope).unwrap()));
    }
    check_proof_json(&w.secret_proof, &scope, &x).unwrap();
}

#[test]
fn json_output_is_stable_across_jobs() {
    for (name, k) in [("p3", "2"), ("p5", "3"), ("nspk_xor", "2")] {
        let one = xordy(&["verify", &fixture(name), "-k", k, "--json", "--jobs", "1"]);
        let four = xordy(&["verify", &fixture(name), "-k", k, "--json", "--jobs", "4"]);
        let again = xordy(&["verify", &fixture(name), "-k", k, "--json", "--jobs", "1"]);
        assert_eq!(one.stdout, four.stdout, "{name}");
        assert_eq!(one.stdout, again.stdout, "{name}");
    }
}
