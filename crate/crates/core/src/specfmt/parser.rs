//! Lexer and recursive-descent parser for protocol files and free-standing
//! terms.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use crate::protocol::{well_formed, Protocol, Role, Step};
use crate::terms::{normalize, Atom, AtomKind, RawTerm, Term, TermSet, INTRUDER, SECRET, ZERO};

/// A located message; line and column are 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for Diagnostics {}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Zero,
    XorOp,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Zero => f.write_str("`0`"),
            Tok::XorOp => f.write_str("`(+)`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

fn diag(pos: Pos, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let ident_start = |c: char| c.is_ascii_alphabetic() || c == '_';
    let ident_char = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '\'';
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let mut step = 1;
        match c {
            '\n' => {
                line += 1;
                col = 0;
            }
            c if c.is_whitespace() => {}
            '#' => {
                while i + step < chars.len() && chars[i + step] != '\n' {
                    step += 1;
                }
            }
            '(' if chars.get(i + 1) == Some(&'+') && chars.get(i + 2) == Some(&')') => {
                out.push((Tok::XorOp, pos));
                step = 3;
            }
            '(' => out.push((Tok::LParen, pos)),
            ')' => out.push((Tok::RParen, pos)),
            ',' => out.push((Tok::Comma, pos)),
            ';' => out.push((Tok::Semi, pos)),
            ':' => out.push((Tok::Colon, pos)),
            '0' if !chars.get(i + 1).is_some_and(|c| c.is_ascii_alphanumeric()) => {
                out.push((Tok::Zero, pos))
            }
            c if ident_start(c) => {
                while i + step < chars.len() && ident_char(chars[i + step]) {
                    step += 1;
                }
                // `x#3` names a renamed variable; a `#` not followed by a digit starts a comment
                if chars.get(i + step) == Some(&'#')
                    && chars.get(i + step + 1).is_some_and(|c| c.is_ascii_digit())
                {
                    step += 1;
                    while i + step < chars.len() && chars[i + step].is_ascii_digit() {
                        step += 1;
                    }
                }
                out.push((Tok::Ident(chars[i..i + step].iter().collect()), pos));
            }
            _ => return Err(diag(pos, format!("unexpected character `{c}`"))),
        }
        i += step;
        col += step;
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

const RESERVED: &[&str] = &[
    "protocol",
    "names",
    "keys",
    "agents",
    "knowledge",
    "role",
    "knows",
    "recv",
    "send",
    "xor",
    "pk",
    "pair",
    "senc",
    "aenc",
];

/// Term syntax before identifiers are resolved to atoms.
#[derive(Clone, Debug)]
enum Syn {
    Ident(String, Pos),
    Zero,
    Pk(Box<Syn>, Pos),
    Pair(Box<Syn>, Box<Syn>),
    Senc(Box<Syn>, Box<Syn>),
    Aenc(Box<Syn>, Box<Syn>, Pos),
    Xor(Vec<Syn>),
}

impl Syn {
    fn idents<'a>(&'a self, out: &mut Vec<(&'a str, Pos)>) {
        match self {
            Syn::Ident(s, p) => out.push((s, *p)),
            Syn::Zero => {}
            Syn::Pk(a, _) => a.idents(out),
            Syn::Pair(a, b) | Syn::Senc(a, b) | Syn::Aenc(a, b, _) => {
                a.idents(out);
                b.idents(out);
            }
            Syn::Xor(items) => items.iter().for_each(|t| t.idents(out)),
        }
    }

    /// Identifiers that occur directly under `pk`.
    fn pk_args<'a>(&'a self, out: &mut HashSet<&'a str>) {
        match self {
            Syn::Ident(..) | Syn::Zero => {}
            Syn::Pk(a, _) => {
                if let Syn::Ident(s, _) = &**a {
                    out.insert(s);
                }
                a.pk_args(out);
            }
            Syn::Pair(a, b) | Syn::Senc(a, b) | Syn::Aenc(a, b, _) => {
                a.pk_args(out);
                b.pk_args(out);
            }
            Syn::Xor(items) => items.iter().for_each(|t| t.pk_args(out)),
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self, Diagnostic> {
        Ok(Parser {
            toks: lex(text)?,
            at: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<Pos, Diagnostic> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(diag(
                self.pos(),
                format!("expected {what}, found {}", self.peek()),
            ))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Pos, Diagnostic> {
        if self.is_kw(kw) {
            Ok(self.bump().1)
        } else {
            Err(diag(
                self.pos(),
                format!("expected `{kw}`, found {}", self.peek()),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Pos), Diagnostic> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let p = self.bump().1;
                Ok((s, p))
            }
            t => Err(diag(self.pos(), format!("expected {what}, found {t}"))),
        }
    }

    fn opt_semi(&mut self) {
        if *self.peek() == Tok::Semi {
            self.bump();
        }
    }

    fn term(&mut self) -> Result<Syn, Diagnostic> {
        let first = self.primary()?;
        let mut items = vec![first];
        while *self.peek() == Tok::XorOp || self.is_kw("xor") {
            self.bump();
            items.push(self.primary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            Syn::Xor(items)
        })
    }

    fn args(&mut self, n: usize) -> Result<Vec<Syn>, Diagnostic> {
        self.expect(Tok::LParen, "`(`")?;
        let mut out = vec![self.term()?];
        while out.len() < n {
            self.expect(Tok::Comma, "`,`")?;
            out.push(self.term()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Syn, Diagnostic> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Zero => {
                self.bump();
                Ok(Syn::Zero)
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Ident(s) => match s.as_str() {
                "pk" => {
                    self.bump();
                    let mut a = self.args(1)?;
                    Ok(Syn::Pk(Box::new(a.remove(0)), pos))
                }
                "pair" | "senc" | "aenc" => {
                    self.bump();
                    let mut a = self.args(2)?;
                    let (x, y) = (Box::new(a.remove(0)), Box::new(a.remove(0)));
                    Ok(match s.as_str() {
                        "pair" => Syn::Pair(x, y),
                        "senc" => Syn::Senc(x, y),
                        _ => Syn::Aenc(x, y, pos),
                    })
                }
                "xor" if *self.peek2() == Tok::LParen => {
                    self.bump();
                    self.bump();
                    let mut items = vec![self.term()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        items.push(self.term()?);
                    }
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Syn::Xor(items))
                }
                _ if RESERVED.contains(&s.as_str()) => {
                    Err(diag(pos, format!("expected a term, found keyword `{s}`")))
                }
                _ => {
                    self.bump();
                    Ok(Syn::Ident(s, pos))
                }
            },
            t => Err(diag(pos, format!("expected a term, found {t}"))),
        }
    }

    /// Comma-separated terms; empty if the list is immediately closed.
    fn term_list(&mut self) -> Result<Vec<Syn>, Diagnostic> {
        if matches!(self.peek(), Tok::Semi | Tok::Eof) || self.at_clause_start() {
            return Ok(Vec::new());
        }
        let mut out = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.term()?);
        }
        Ok(out)
    }

    fn ident_list(&mut self) -> Result<Vec<(String, Pos)>, Diagnostic> {
        let mut out = vec![self.ident("an identifier")?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.ident("an identifier")?);
        }
        Ok(out)
    }

    fn at_clause_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => {
                matches!(
                    s.as_str(),
                    "names" | "keys" | "agents" | "knowledge" | "role" | "recv" | "send" | "knows"
                ) || (s == SECRET && *self.peek2() == Tok::Colon)
            }
            _ => false,
        }
    }
}

/// How identifiers resolve to atoms.
pub struct Scope {
    names: BTreeSet<String>,
    keys: BTreeSet<String>,
    /// Kind given to identifiers not listed above.
    pub otherwise: AtomKind,
    /// Identifier renamed to `secret`.
    secret_alias: Option<String>,
}

impl Scope {
    pub fn new(otherwise: AtomKind) -> Self {
        Scope {
            names: [ZERO, SECRET, INTRUDER]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            keys: BTreeSet::new(),
            otherwise,
            secret_alias: None,
        }
    }

    /// Scope in which the terms of `protocol` and of its runs read back
    /// exactly: declared atoms keep their kind, anything else is a variable.
    pub fn of(protocol: &Protocol) -> Self {
        let mut scope = Scope::new(AtomKind::Variable);
        let mut st = TermSet::new();
        for t in protocol
            .declared
            .iter()
            .chain(&protocol.agents)
            .chain(&protocol.initial_knowledge)
        {
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
        for t in st {
            if let Some(a) = t.as_atom() {
                scope.declare(a.kind(), a.label());
            }
        }
        scope
    }

    pub fn declare(&mut self, kind: AtomKind, label: &str) {
        match kind {
            AtomKind::Name => {
                self.names.insert(label.to_string());
            }
            AtomKind::Key => {
                self.keys.insert(label.to_string());
            }
            AtomKind::Variable => {}
        }
    }

    fn kind_of(&self, label: &str) -> AtomKind {
        if self.keys.contains(label) {
            AtomKind::Key
        } else if self.names.contains(label) {
            AtomKind::Name
        } else {
            self.otherwise
        }
    }

    fn resolve(&self, syn: &Syn) -> Result<RawTerm, Diagnostic> {
        Ok(match syn {
            Syn::Ident(s, _) => {
                if self.secret_alias.as_deref() == Some(s.as_str()) {
                    RawTerm::Atom(Atom::new(AtomKind::Name, SECRET))
                } else {
                    RawTerm::Atom(Atom::new(self.kind_of(s), s))
                }
            }
            Syn::Zero => RawTerm::Atom(Atom::new(AtomKind::Name, ZERO)),
            Syn::Pk(a, pos) => match &**a {
                Syn::Ident(s, _) if self.kind_of(s) != AtomKind::Name => {
                    RawTerm::Pk(Box::new(self.resolve(a)?))
                }
                _ => return Err(diag(*pos, "pk takes a key or a variable")),
            },
            Syn::Pair(a, b) => {
                RawTerm::Pair(Box::new(self.resolve(a)?), Box::new(self.resolve(b)?))
            }
            Syn::Senc(a, b) => {
                RawTerm::Senc(Box::new(self.resolve(a)?), Box::new(self.resolve(b)?))
            }
            Syn::Aenc(a, b, pos) => match &**b {
                Syn::Pk(..) => match self.resolve(b)? {
                    RawTerm::Pk(k) => RawTerm::Aenc(Box::new(self.resolve(a)?), k),
                    _ => unreachable!("pk resolves to pk"),
                },
                _ => return Err(diag(*pos, "the key of aenc must be written pk(..)")),
            },
            Syn::Xor(items) => RawTerm::Xor(
                items
                    .iter()
                    .map(|t| self.resolve(t))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

/// Parses a term in `scope` without normalizing it.
pub fn parse_raw_term_in(text: &str, scope: &Scope) -> Result<RawTerm, Diagnostic> {
    let mut p = Parser::new(text)?;
    let syn = p.term()?;
    p.expect(Tok::Eof, "end of term")?;
    scope.resolve(&syn)
}

pub fn parse_term_in(text: &str, scope: &Scope) -> Result<Term, Diagnostic> {
    parse_raw_term_in(text, scope).map(|r| normalize(&r))
}

/// Parses free-standing terms that share one vocabulary: identifiers are
/// names, except those used under `pk`, which are keys everywhere.
pub fn parse_terms(texts: &[&str]) -> Result<Vec<Vec<Term>>, Diagnostic> {
    let mut lists = Vec::new();
    for text in texts {
        let mut p = Parser::new(text)?;
        let items = p.term_list()?;
        p.expect(Tok::Eof, "`,` or end of input")?;
        lists.push(items);
    }
    let mut pk = HashSet::new();
    for s in lists.iter().flatten() {
        s.pk_args(&mut pk);
    }
    let mut scope = Scope::new(AtomKind::Name);
    for k in pk {
        scope.keys.insert(k.to_string());
    }
    lists
        .iter()
        .map(|l| {
            l.iter()
                .map(|s| scope.resolve(s).map(|r| normalize(&r)))
                .collect()
        })
        .collect()
}

/// Parses one free-standing term; see [`parse_terms`].
pub fn parse_term(text: &str) -> Result<Term, Diagnostic> {
    let mut p = Parser::new(text)?;
    let syn = p.term()?;
    p.expect(Tok::Eof, "end of term")?;
    let mut pk = HashSet::new();
    syn.pk_args(&mut pk);
    let mut scope = Scope::new(AtomKind::Name);
    scope.keys.extend(pk.into_iter().map(str::to_string));
    scope.resolve(&syn).map(|r| normalize(&r))
}

struct RoleSyn {
    name: String,
    pos: Pos,
    knows: Vec<Syn>,
    steps: Vec<(Syn, Syn, Pos)>,
}

/// A parsed protocol along with source positions for reporting.
pub struct ParsedProtocol {
    pub protocol: Protocol,
    /// Position of each role header.
    pub role_positions: Vec<Pos>,
    /// Position of each `send` keyword, per role.
    pub step_positions: Vec<Vec<Pos>>,
}

/// Parses a protocol file without checking role well-formedness.
pub fn parse_protocol_unchecked(text: &str) -> Result<ParsedProtocol, Diagnostics> {
    let mut p = Parser::new(text)?;
    p.expect_kw("protocol")?;
    let (name, _) = p.ident("a protocol name")?;
    p.opt_semi();

    let mut names: Vec<(String, Pos)> = Vec::new();
    let mut keys: Vec<(String, Pos)> = Vec::new();
    let mut agents: Vec<(String, Pos)> = Vec::new();
    let mut knowledge: Vec<Syn> = Vec::new();
    let mut secret: Option<(Syn, Pos)> = None;
    let mut roles: Vec<RoleSyn> = Vec::new();

    loop {
        let pos = p.pos();
        match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(s) if s == "names" || s == "keys" || s == "agents" => {
                p.bump();
                p.expect(Tok::Colon, "`:`")?;
                let list = p.ident_list()?;
                match s.as_str() {
                    "names" => names.extend(list),
                    "keys" => keys.extend(list),
                    _ => agents.extend(list),
                }
                p.opt_semi();
            }
            Tok::Ident(s) if s == "knowledge" => {
                p.bump();
                p.expect(Tok::Colon, "`:`")?;
                knowledge.extend(p.term_list()?);
                p.opt_semi();
            }
            Tok::Ident(s) if s == SECRET && *p.peek2() == Tok::Colon => {
                p.bump();
                p.bump();
                if secret.is_some() {
                    return Err(diag(pos, "duplicate secret clause").into());
                }
                secret = Some((p.term()?, pos));
                p.opt_semi();
            }
            Tok::Ident(s) if s == "role" => {
                p.bump();
                let (rname, _) = p.ident("a role name")?;
                p.opt_semi();
                let mut knows = Vec::new();
                if p.is_kw("knows") {
                    p.bump();
                    p.expect(Tok::Colon, "`:`")?;
                    knows = p.term_list()?;
                    p.opt_semi();
                }
                let mut steps = Vec::new();
                while p.is_kw("recv") {
                    p.bump();
                    let r = p.term()?;
                    p.opt_semi();
                    let spos = p.pos();
                    p.expect_kw("send")?;
                    let s = p.term()?;
                    p.opt_semi();
                    steps.push((r, s, spos));
                }
                if steps.is_empty() {
                    return Err(diag(
                        p.pos(),
                        format!("role {rname} needs at least one recv/send step"),
                    )
                    .into());
                }
                roles.push(RoleSyn {
                    name: rname,
                    pos,
                    knows,
                    steps,
                });
            }
            t => return Err(diag(pos, format!("expected a clause, found {t}")).into()),
        }
    }

    let mut scope = Scope::new(AtomKind::Variable);
    let mut seen: HashSet<&str> = HashSet::new();
    for (label, pos) in names.iter().chain(&keys).chain(&agents) {
        if !seen.insert(label) {
            return Err(diag(*pos, format!("`{label}` is declared twice")).into());
        }
    }
    for (n, _) in names.iter().chain(&agents) {
        scope.declare(AtomKind::Name, n);
    }
    for (k, _) in &keys {
        if [ZERO, SECRET, INTRUDER].contains(&k.as_str()) {
            return Err(diag(
                Pos { line: 1, col: 1 },
                format!("`{k}` is a name and cannot be a key"),
            )
            .into());
        }
        scope.declare(AtomKind::Key, k);
    }
    // undeclared identifiers in the intruder's knowledge are names
    let mut ids = Vec::new();
    knowledge.iter().for_each(|t| t.idents(&mut ids));
    for (label, _) in ids {
        if scope.kind_of(label) == AtomKind::Variable {
            scope.declare(AtomKind::Name, label);
        }
    }
    if let Some((syn, pos)) = &secret {
        match syn {
            Syn::Ident(label, _) if scope.kind_of(label) != AtomKind::Key => {
                scope.declare(AtomKind::Name, label);
                if label != SECRET {
                    scope.secret_alias = Some(label.clone());
                }
            }
            _ => return Err(diag(*pos, "the secret must be a name").into()),
        }
    }

    let initial: TermSet = knowledge
        .iter()
        .map(|s| scope.resolve(s).map(|r| normalize(&r)))
        .collect::<Result<_, _>>()?;
    if let Some(t) = initial.iter().find(|t| !t.is_ground()) {
        return Err(diag(
            Pos { line: 1, col: 1 },
            format!("intruder knowledge {t} is not ground"),
        )
        .into());
    }

    let mut out_roles = Vec::new();
    let mut role_positions = Vec::new();
    let mut step_positions = Vec::new();
    for r in &roles {
        let mut knows = TermSet::new();
        for s in &r.knows {
            let t = normalize(&scope.resolve(s)?);
            if !t.is_standard() {
                return Err(diag(
                    r.pos,
                    format!("role {} knows {t}, which is not a standard term", r.name),
                )
                .into());
            }
            knows.insert(t);
        }
        let steps = r
            .steps
            .iter()
            .map(|(recv, send, _)| {
                Ok(Step {
                    recv: normalize(&scope.resolve(recv)?),
                    send: normalize(&scope.resolve(send)?),
                })
            })
            .collect::<Result<Vec<_>, Diagnostic>>()?;
        out_roles.push(Role {
            name: r.name.clone(),
            knowledge: knows,
            steps,
        });
        role_positions.push(r.pos);
        step_positions.push(r.steps.iter().map(|s| s.2).collect());
    }

    let mut declared = TermSet::new();
    for label in &scope.names {
        declared.insert(Term::name(label));
    }
    for label in &scope.keys {
        declared.insert(Term::key(label));
    }
    Ok(ParsedProtocol {
        protocol: Protocol {
            name,
            initial_knowledge: initial,
            roles: out_roles,
            agents: agents.iter().map(|(a, _)| Term::name(a)).collect(),
            declared,
        },
        role_positions,
        step_positions,
    })
}

/// Parses a protocol file and checks that every role is well-formed.
pub fn parse_protocol(text: &str) -> Result<Protocol, Diagnostics> {
    let parsed = parse_protocol_unchecked(text)?;
    let mut errors = Vec::new();
    for (i, role) in parsed.protocol.roles.iter().enumerate() {
        for e in well_formed(role).errors {
            let pos = match &e {
                crate::protocol::WellFormedError::UnderivableSend { step } => {
                    parsed.step_positions[i][step - 1]
                }
                _ => parsed.role_positions[i],
            };
            errors.push(diag(pos, format!("role {}: {e}", role.name)));
        }
    }
    if errors.is_empty() {
        Ok(parsed.protocol)
    } else {
        Err(Diagnostics(errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P1: &str = "protocol p1;
knowledge: a;
secret: secret;
role R
  knows: secret;
  recv x;
  send x (+) secret;
";

    #[test]
    fn parses_p1() {
        let p = parse_protocol(P1).unwrap();
        assert_eq!(p.roles.len(), 1);
        let x = Term::var("x");
        assert_eq!(p.roles[0].steps[0].recv, x);
        assert_eq!(p.roles[0].steps[0].send, Term::xor([x, Term::secret()]));
        assert!(p.initial_knowledge.contains(&Term::name("a")));
    }

    #[test]
    fn nilpotent_send() {
        let src = "protocol q; role R recv x send x (+) x";
        let p = parse_protocol(src).unwrap();
        assert_eq!(p.roles[0].steps[0].send, Term::zero());
    }

    #[test]
    fn aenc_needs_pk() {
        let src = "protocol q; keys: k; role R recv aenc(m, k) send 0";
        let err = parse_protocol(src).unwrap_err();
        assert_eq!((err.0[0].line, err.0[0].col), (1, 34));
        assert!(parse_term("aenc(m, k)").is_err());
        assert!(parse_term("aenc(m, pk(k))").is_ok());
    }

    #[test]
    fn free_terms() {
        assert_eq!(parse_term("a (+) b (+) a").unwrap(), Term::name("b"));
        assert_eq!(
            parse_term("a xor b").unwrap(),
            parse_term("xor(b, a)").unwrap()
        );
        let t = parse_term("aenc(m, pk(k))").unwrap();
        assert_eq!(t, Term::aenc(Term::name("m"), Term::pk(Term::key("k"))));
        let lists = parse_terms(&["a, senc(s, k)", "pk(k)"]).unwrap();
        assert_eq!(lists[0][1], Term::senc(Term::name("s"), Term::key("k")));
    }

    #[test]
    fn hash_handling() {
        let src = "protocol q # comment\nrole R # another\n recv x#2 send x#2";
        let p = parse_protocol_unchecked(src).unwrap().protocol;
        assert_eq!(p.roles[0].steps[0].recv, Term::var("x#2"));
    }

    #[test]
    fn diagnostics_are_located() {
        let err = parse_protocol("protocol q;\nrole R\n  recv x;\n  send ;").unwrap_err();
        assert_eq!((err.0[0].line, err.0[0].col), (4, 8));
        let err =
            parse_protocol("protocol q;\nkeys: k;\nrole R\n  recv x;\n  send k;").unwrap_err();
        assert_eq!((err.0[0].line, err.0[0].col), (5, 3));
    }

    #[test]
    fn secret_alias() {
        let src = "protocol q; names: n; secret: n; role R knows: n; recv x send x (+) n";
        let p = parse_protocol(src).unwrap();
        assert_eq!(p.roles[0].knowledge.iter().next(), Some(&Term::secret()));
    }
}
