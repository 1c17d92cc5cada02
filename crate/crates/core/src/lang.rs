//! Text formats: the `.rbn` specification language and the `.rbq` query
//! language.
//!
//! `.rbn` grammar (see also `docs/formats.md`):
//!
//! ```text
//! spec    := { decl | assess | def }
//! decl    := "relation" IDENT "/" NAT "."
//! assess  := "prob" atom "=" RATIONAL "."
//! def     := "def" atom ":=" formula "."
//! formula := iff
//! iff     := imp  { "<->" imp }          (right associative)
//! imp     := or   { "->" or }            (right associative)
//! or      := and  { "|" and }            (collected n-ary)
//! and     := unary { "&" unary }         (collected n-ary)
//! unary   := "!" unary | "forall" VAR ":" formula | "exists" VAR ":" formula
//!          | "(" formula ")" | atom | term "=" term | "true" | "false"
//! ```
//!
//! Operator precedence, tightest first: `!`, `&`, `|`, `->`, `<->`; a
//! quantifier's body extends maximally to the right. `#` starts a comment
//! that runs to end of line. Probabilities are fractions `p/q`, integers, or
//! decimals converted exactly (`0.2` is 1/5).
//!
//! `.rbq` queries: comma-separated literals `atom=1` / `atom=0`, an optional
//! `|` separating the query assignments from the evidence, and an optional
//! `; gamma=RATIONAL` threshold, e.g. `friends(1,2)=1 | fan(1)=1; gamma=1/10`.

use std::collections::BTreeMap;
use std::fmt;

use crate::model::{
    parse_rational, render_rational, AxiomOrAssessment, Formula, GroundAtom, Query, Rational,
    Relation, RelationalSpec, Term,
};

/// Syntax diagnostic with 1-based position.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct LangError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

fn err<T>(line: u32, col: u32, msg: impl Into<String>) -> Result<T, LangError> {
    Err(LangError { line, col, msg: msg.into() })
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Nat(String),
    Decimal(String),
    KwRelation,
    KwProb,
    KwDef,
    KwForall,
    KwExists,
    KwTrue,
    KwFalse,
    Dot,
    Slash,
    Equal,
    Assign, // :=
    Colon,
    Comma,
    Semi,
    LParen,
    RParen,
    Bang,
    Amp,
    Pipe,
    Arrow,   // ->
    DArrow,  // <->
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier {s:?}"),
            Tok::Nat(s) => write!(f, "number {s}"),
            Tok::Decimal(s) => write!(f, "decimal {s}"),
            Tok::KwRelation => write!(f, "'relation'"),
            Tok::KwProb => write!(f, "'prob'"),
            Tok::KwDef => write!(f, "'def'"),
            Tok::KwForall => write!(f, "'forall'"),
            Tok::KwExists => write!(f, "'exists'"),
            Tok::KwTrue => write!(f, "'true'"),
            Tok::KwFalse => write!(f, "'false'"),
            Tok::Dot => write!(f, "'.'"),
            Tok::Slash => write!(f, "'/'"),
            Tok::Equal => write!(f, "'='"),
            Tok::Assign => write!(f, "':='"),
            Tok::Colon => write!(f, "':'"),
            Tok::Comma => write!(f, "','"),
            Tok::Semi => write!(f, "';'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Bang => write!(f, "'!'"),
            Tok::Amp => write!(f, "'&'"),
            Tok::Pipe => write!(f, "'|'"),
            Tok::Arrow => write!(f, "'->'"),
            Tok::DArrow => write!(f, "'<->'"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(text: &str) -> Result<Vec<Spanned>, LangError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! push {
        ($tok:expr, $l:expr, $c:expr) => {
            out.push(Spanned { tok: $tok, line: $l, col: $c })
        };
    }
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let advance = |i: &mut usize, line: &mut u32, col: &mut u32| {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col);
            }
            let tok = match s.as_str() {
                "relation" => Tok::KwRelation,
                "prob" => Tok::KwProb,
                "def" => Tok::KwDef,
                "forall" => Tok::KwForall,
                "exists" => Tok::KwExists,
                "true" => Tok::KwTrue,
                "false" => Tok::KwFalse,
                _ => Tok::Ident(s),
            };
            push!(tok, l0, c0);
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                advance(&mut i, &mut line, &mut col);
            }
            // A dot immediately followed by a digit continues a decimal;
            // otherwise it is the statement terminator.
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                s.push('.');
                advance(&mut i, &mut line, &mut col);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    advance(&mut i, &mut line, &mut col);
                }
                push!(Tok::Decimal(s), l0, c0);
            } else {
                push!(Tok::Nat(s), l0, c0);
            }
            continue;
        }
        match c {
            '.' => push!(Tok::Dot, l0, c0),
            '/' => push!(Tok::Slash, l0, c0),
            '=' => push!(Tok::Equal, l0, c0),
            ',' => push!(Tok::Comma, l0, c0),
            ';' => push!(Tok::Semi, l0, c0),
            '(' => push!(Tok::LParen, l0, c0),
            ')' => push!(Tok::RParen, l0, c0),
            '!' => push!(Tok::Bang, l0, c0),
            '&' => push!(Tok::Amp, l0, c0),
            '|' => push!(Tok::Pipe, l0, c0),
            ':' => {
                if i + 1 < chars.len() && chars[i + 1] == '=' {
                    advance(&mut i, &mut line, &mut col);
                    push!(Tok::Assign, l0, c0);
                } else {
                    push!(Tok::Colon, l0, c0);
                }
            }
            '-' => {
                if i + 1 < chars.len() && chars[i + 1] == '>' {
                    advance(&mut i, &mut line, &mut col);
                    push!(Tok::Arrow, l0, c0);
                } else {
                    return err(l0, c0, "expected '->' after '-'");
                }
            }
            '<' => {
                if i + 2 < chars.len() && chars[i + 1] == '-' && chars[i + 2] == '>' {
                    advance(&mut i, &mut line, &mut col);
                    advance(&mut i, &mut line, &mut col);
                    push!(Tok::DArrow, l0, c0);
                } else {
                    return err(l0, c0, "expected '<->' after '<'");
                }
            }
            other => return err(l0, c0, format!("unexpected character {other:?}")),
        }
        advance(&mut i, &mut line, &mut col);
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Spanned, LangError> {
        let t = self.next();
        if t.tok == tok {
            Ok(t)
        } else {
            err(t.line, t.col, format!("expected {tok}, found {}", t.tok))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, u32, u32), LangError> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok((s, t.line, t.col)),
            other => err(t.line, t.col, format!("expected {what}, found {other}")),
        }
    }

    fn nat<T: std::str::FromStr>(&mut self, what: &str) -> Result<T, LangError> {
        let t = self.next();
        match t.tok {
            Tok::Nat(s) => s
                .parse::<T>()
                .map_err(|_| LangError {
                    line: t.line,
                    col: t.col,
                    msg: format!("{what} out of range: {s}"),
                }),
            other => err(t.line, t.col, format!("expected {what}, found {other}")),
        }
    }

    /// RATIONAL := NAT [ "/" NAT ] | DECIMAL
    fn rational(&mut self) -> Result<Rational, LangError> {
        let t = self.next();
        match t.tok {
            Tok::Decimal(s) => parse_rational(&s).map_err(|m| LangError {
                line: t.line,
                col: t.col,
                msg: m,
            }),
            Tok::Nat(p) => {
                if self.eat(&Tok::Slash) {
                    let q = self.next();
                    match q.tok {
                        Tok::Nat(qs) => {
                            parse_rational(&format!("{p}/{qs}")).map_err(|m| LangError {
                                line: q.line,
                                col: q.col,
                                msg: m,
                            })
                        }
                        other => err(q.line, q.col, format!("expected denominator, found {other}")),
                    }
                } else {
                    parse_rational(&p).map_err(|m| LangError { line: t.line, col: t.col, msg: m })
                }
            }
            other => err(t.line, t.col, format!("expected a rational number, found {other}")),
        }
    }

    fn term(&mut self) -> Result<Term, LangError> {
        let t = self.next();
        match t.tok {
            Tok::Ident(s) => Ok(Term::Var(s)),
            Tok::Nat(s) => match s.parse::<u32>() {
                Ok(n) => Ok(Term::Ind(n)),
                Err(_) => err(t.line, t.col, format!("individual out of range: {s}")),
            },
            other => err(t.line, t.col, format!("expected a term, found {other}")),
        }
    }

    fn formula(&mut self) -> Result<Formula, LangError> {
        self.iff()
    }

    fn iff(&mut self) -> Result<Formula, LangError> {
        let mut parts = vec![self.imp()?];
        while self.eat(&Tok::DArrow) {
            parts.push(self.imp()?);
        }
        Ok(fold_right(parts, |a, b| Formula::Iff(Box::new(a), Box::new(b))))
    }

    fn imp(&mut self) -> Result<Formula, LangError> {
        let mut parts = vec![self.or()?];
        while self.eat(&Tok::Arrow) {
            parts.push(self.or()?);
        }
        Ok(fold_right(parts, |a, b| Formula::Implies(Box::new(a), Box::new(b))))
    }

    fn or(&mut self) -> Result<Formula, LangError> {
        let mut parts = vec![self.and()?];
        while self.eat(&Tok::Pipe) {
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn and(&mut self) -> Result<Formula, LangError> {
        let mut parts = vec![self.unary()?];
        while self.eat(&Tok::Amp) {
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn unary(&mut self) -> Result<Formula, LangError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Bang => {
                self.next();
                Ok(Formula::not(self.unary()?))
            }
            Tok::KwForall | Tok::KwExists => {
                self.next();
                let (v, _, _) = self.ident("a logvar")?;
                self.expect(Tok::Colon)?;
                let body = self.formula()?;
                Ok(match t.tok {
                    Tok::KwForall => Formula::ForAll(v, Box::new(body)),
                    _ => Formula::Exists(v, Box::new(body)),
                })
            }
            Tok::LParen => {
                self.next();
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::KwTrue => {
                self.next();
                Ok(Formula::True)
            }
            Tok::KwFalse => {
                self.next();
                Ok(Formula::False)
            }
            Tok::Ident(name) => {
                self.next();
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.term()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                        self.expect(Tok::RParen)?;
                    }
                    Ok(Formula::Atom(name, args))
                } else if self.eat(&Tok::Equal) {
                    let rhs = self.term()?;
                    Ok(Formula::Eq(Term::Var(name), rhs))
                } else {
                    Ok(Formula::Atom(name, Vec::new()))
                }
            }
            Tok::Nat(_) => {
                // An individual can open a formula only as the left side of
                // an equality.
                let lhs = self.term()?;
                self.expect(Tok::Equal)?;
                let rhs = self.term()?;
                Ok(Formula::Eq(lhs, rhs))
            }
            other => err(t.line, t.col, format!("expected a formula, found {other}")),
        }
    }

    /// Head of a definition or assessment: name plus optional logvar list.
    fn head(&mut self) -> Result<(String, Vec<String>), LangError> {
        let (name, _, _) = self.ident("a relation name")?;
        let mut vars = Vec::new();
        if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
            loop {
                let (v, _, _) = self.ident("a logvar")?;
                vars.push(v);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
        }
        Ok((name, vars))
    }
}

fn fold_right(mut parts: Vec<Formula>, mk: impl Fn(Formula, Formula) -> Formula) -> Formula {
    let mut acc = parts.pop().unwrap();
    while let Some(f) = parts.pop() {
        acc = mk(f, acc);
    }
    acc
}

/// Parse a `.rbn` specification. Syntax errors carry line/column; semantic
/// problems (undeclared relations, cycles, …) are left to
/// [`crate::model::validate_spec`].
pub fn parse_spec(text: &str) -> Result<RelationalSpec, LangError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let mut spec = RelationalSpec::default();
    loop {
        let t = p.next();
        match t.tok {
            Tok::Eof => break,
            Tok::KwRelation => {
                let (name, _, _) = p.ident("a relation name")?;
                p.expect(Tok::Slash)?;
                let arity: usize = p.nat("an arity")?;
                p.expect(Tok::Dot)?;
                spec.relations.push(Relation::new(name, arity));
            }
            Tok::KwProb => {
                // `prob fan = 1/5.` and `prob fan(x) = 1/5.` are both
                // accepted; the logvars are decorative since the assessment
                // is shared by all groundings.
                let (name, _vars) = p.head()?;
                p.expect(Tok::Equal)?;
                let prob = p.rational()?;
                p.expect(Tok::Dot)?;
                spec.entries.push(AxiomOrAssessment::Assessment { relation: name, prob });
            }
            Tok::KwDef => {
                let (name, vars) = p.head()?;
                p.expect(Tok::Assign)?;
                let body = p.formula()?;
                p.expect(Tok::Dot)?;
                spec.entries.push(AxiomOrAssessment::Definition {
                    head: name,
                    head_vars: vars,
                    body,
                });
            }
            other => {
                return err(
                    t.line,
                    t.col,
                    format!("expected 'relation', 'prob' or 'def', found {other}"),
                )
            }
        }
    }
    Ok(spec)
}

/// Parse a `.rbq` query: `lit {, lit} [ | lit {, lit} ] [ ; gamma=RATIONAL ]`
/// where `lit := atom "=" ("0"|"1")` over ground atoms.
pub fn parse_query(text: &str) -> Result<Query, LangError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let mut q: Vec<(GroundAtom, bool)> = Vec::new();
    let mut e: Vec<(GroundAtom, bool)> = Vec::new();
    let mut positions: BTreeMap<GroundAtom, (u32, u32)> = BTreeMap::new();

    fn literal(
        p: &mut Parser,
        positions: &mut BTreeMap<GroundAtom, (u32, u32)>,
    ) -> Result<(GroundAtom, bool), LangError> {
        let (name, line, col) = p.ident("a relation name")?;
        let mut args = Vec::new();
        if p.eat(&Tok::LParen) && !p.eat(&Tok::RParen) {
            loop {
                args.push(p.nat::<u32>("an individual")?);
                if !p.eat(&Tok::Comma) {
                    break;
                }
            }
            p.expect(Tok::RParen)?;
        }
        p.expect(Tok::Equal)?;
        let t = p.next();
        let value = match &t.tok {
            Tok::Nat(s) if s == "1" => true,
            Tok::Nat(s) if s == "0" => false,
            other => return err(t.line, t.col, format!("expected 0 or 1, found {other}")),
        };
        let atom = GroundAtom::new(name, args);
        positions.entry(atom.clone()).or_insert((line, col));
        Ok((atom, value))
    }

    loop {
        q.push(literal(&mut p, &mut positions)?);
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    if p.eat(&Tok::Pipe) {
        loop {
            e.push(literal(&mut p, &mut positions)?);
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
    }
    let mut gamma = None;
    if p.eat(&Tok::Semi) {
        let (kw, line, col) = p.ident("'gamma'")?;
        if kw != "gamma" {
            return err(line, col, format!("expected 'gamma', found identifier {kw:?}"));
        }
        p.expect(Tok::Equal)?;
        gamma = Some(p.rational()?);
    }
    let t = p.peek();
    if t.tok != Tok::Eof {
        return err(t.line, t.col, format!("expected end of query, found {}", t.tok));
    }
    Query::new(q, e, gamma).map_err(|c| {
        let (line, col) = positions.get(&c.atom).copied().unwrap_or((1, 1));
        LangError { line, col, msg: format!("conflicting assignments for {}", c.atom) }
    })
}

// Precedence levels used by the renderer. A child is parenthesized when its
// level is below the minimum its context requires; n-ary And/Or require
// strictly more than their own level from children so that nested same
// connectives keep their structure through a reparse.
fn level(f: &Formula) -> u8 {
    match f {
        Formula::ForAll(..) | Formula::Exists(..) => 0,
        Formula::Iff(..) => 1,
        Formula::Implies(..) => 2,
        Formula::Or(..) => 3,
        Formula::And(..) => 4,
        _ => 5,
    }
}

fn render_term(t: &Term) -> String {
    match t {
        Term::Var(v) => v.clone(),
        Term::Ind(i) => i.to_string(),
    }
}

fn render_formula(f: &Formula, min_level: u8, out: &mut String) {
    if level(f) < min_level {
        out.push('(');
        render_formula(f, 0, out);
        out.push(')');
        return;
    }
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Atom(name, args) => {
            out.push_str(name);
            if !args.is_empty() {
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&render_term(a));
                }
                out.push(')');
            }
        }
        Formula::Eq(a, b) => {
            out.push_str(&render_term(a));
            out.push_str(" = ");
            out.push_str(&render_term(b));
        }
        Formula::Not(inner) => {
            out.push('!');
            render_formula(inner, 5, out);
        }
        Formula::And(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" & ");
                }
                render_formula(c, 5, out);
            }
        }
        Formula::Or(cs) => {
            for (i, c) in cs.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                render_formula(c, 4, out);
            }
        }
        Formula::Implies(a, b) => {
            render_formula(a, 3, out);
            out.push_str(" -> ");
            // The right operand continues the right-associative chain, so an
            // Implies there needs no parentheses; anything looser does.
            render_formula(b, 2, out);
        }
        Formula::Iff(a, b) => {
            render_formula(a, 2, out);
            out.push_str(" <-> ");
            render_formula(b, 1, out);
        }
        Formula::ForAll(v, body) => {
            out.push_str("forall ");
            out.push_str(v);
            out.push_str(": ");
            render_formula(body, 0, out);
        }
        Formula::Exists(v, body) => {
            out.push_str("exists ");
            out.push_str(v);
            out.push_str(": ");
            render_formula(body, 0, out);
        }
    }
}

/// Render a single formula with minimal parenthesization (shared by the
/// `.gbn` ground-network export).
pub fn render_ground_formula(f: &Formula, out: &mut String) {
    render_formula(f, 0, out);
}

/// Render a specification in canonical `.rbn` form; `parse_spec` of the
/// result is structurally equal to the input.
pub fn render_spec(spec: &RelationalSpec) -> String {
    let mut out = String::new();
    for r in &spec.relations {
        out.push_str(&format!("relation {}/{}.\n", r.name, r.arity));
    }
    for entry in &spec.entries {
        match entry {
            AxiomOrAssessment::Assessment { relation, prob } => {
                out.push_str(&format!("prob {relation} = {}.\n", render_rational(prob)));
            }
            AxiomOrAssessment::Definition { head, head_vars, body } => {
                out.push_str("def ");
                out.push_str(head);
                if !head_vars.is_empty() {
                    out.push('(');
                    out.push_str(&head_vars.join(","));
                    out.push(')');
                }
                out.push_str(" := ");
                render_formula(body, 0, &mut out);
                out.push_str(".\n");
            }
        }
    }
    out
}
