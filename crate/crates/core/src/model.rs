//! Core domain types: relations, formulas, specifications, ground networks,
//! queries — plus structural validation and the fragment classifier.
//!
//! Individuals are the integers `1..=N`; the logical vocabulary has no named
//! constants. All probabilities and weights are exact rationals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// Exact arbitrary-precision rational. `BigRational` already maintains the
/// invariants this crate needs (reduced form, positive denominator), so the
/// crate uses it directly rather than wrapping it.
pub type Rational = BigRational;

/// `p/q` as a [`Rational`]. Panics on `q == 0`; intended for literals in
/// code and tests.
pub fn rat(p: i64, q: i64) -> Rational {
    assert!(q != 0, "rational with zero denominator");
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// True iff `0 <= r <= 1`.
pub fn is_probability(r: &Rational) -> bool {
    !r.is_negative() && *r <= Rational::one()
}

/// Parse `"p/q"`, `"p"` or an exact decimal like `"0.2"` (which becomes 1/5).
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let num: BigInt = p.trim().parse().map_err(|_| format!("bad numerator {p:?}"))?;
        let den: BigInt = q.trim().parse().map_err(|_| format!("bad denominator {q:?}"))?;
        if den.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(Rational::new(num, den))
    } else if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad decimal {s:?}"));
        }
        let int: BigInt = if int.is_empty() {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| format!("bad decimal {s:?}"))?
        };
        let digits: BigInt = frac.parse().unwrap();
        let scale = BigInt::from(10u8).pow(frac.len() as u32);
        Ok(Rational::new(int * &scale + digits, scale))
    } else {
        let num: BigInt = s.parse().map_err(|_| format!("bad rational {s:?}"))?;
        Ok(Rational::from_integer(num))
    }
}

/// Render as `p/q`, or just `p` for integers: the canonical spec-text form.
pub fn render_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Decimal rendering with `sig` significant digits, round-half-even.
///
/// Probabilities land in `[0,1]`, so the output is plain positional notation
/// (`17/125` with 12 digits renders `0.136000000000`); trailing zeros are kept
/// so the digit count is visible.
pub fn decimal_string(r: &Rational, sig: usize) -> String {
    assert!(sig > 0);
    if r.is_zero() {
        return format!("0.{}", "0".repeat(sig));
    }
    let neg = r.is_negative();
    let r = r.abs();
    // Find e with 10^e <= r < 10^(e+1), i.e. the exponent of the leading digit.
    let ten = BigInt::from(10u8);
    let ten_r = Rational::from_integer(ten.clone());
    let mut e: i64 = 0;
    let mut lo = Rational::one(); // 10^e
    if r >= Rational::one() {
        while lo.clone() * &ten_r <= r {
            lo *= &ten_r;
            e += 1;
        }
    } else {
        while r < lo {
            lo /= &ten_r;
            e -= 1;
        }
    }
    // Scale so the significant digits sit in the integer part, then round
    // half-even to an integer.
    let k = sig as i64 - 1 - e;
    let scaled = if k >= 0 {
        r.clone() * Rational::from_integer(ten.pow(k as u32))
    } else {
        r.clone() / Rational::from_integer(ten.pow((-k) as u32))
    };
    let mut digits = round_half_even(&scaled);
    // Rounding can carry over (e.g. 0.99995 -> 1000 with sig 4): renormalize.
    if digits >= ten.pow(sig as u32) {
        digits /= &ten;
        e += 1;
    }
    let ds = digits.to_string();
    debug_assert_eq!(ds.len(), sig);
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if e >= 0 {
        let int_len = (e + 1) as usize;
        if int_len >= sig {
            // All significant digits in the integer part (plus padding zeros).
            out.push_str(&ds);
            out.push_str(&"0".repeat(int_len - sig));
        } else {
            out.push_str(&ds[..int_len]);
            out.push('.');
            out.push_str(&ds[int_len..]);
        }
    } else {
        out.push_str("0.");
        out.push_str(&"0".repeat((-e - 1) as usize));
        out.push_str(&ds);
    }
    out
}

fn round_half_even(r: &Rational) -> BigInt {
    let floor = r.floor();
    let frac = r - &floor;
    let floor = floor.to_integer();
    let half = rat(1, 2);
    if frac < half {
        floor
    } else if frac > half {
        floor + 1
    } else if (&floor % BigInt::from(2)).is_zero() {
        floor
    } else {
        floor + 1
    }
}

/// A declared relation: a name and an arity. Arity 0 is a proposition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
}

impl Relation {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        Relation { name: name.into(), arity }
    }
}

/// A term is a logical variable or a domain individual (an integer in 1..=N).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Ind(u32),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Ind(i) => write!(f, "{i}"),
        }
    }
}

/// Body formulas. `And`/`Or` are n-ary; `Implies`/`Iff` associate to the
/// right when parsed from chains. Ground formulas reuse the same type with
/// every term an individual and no quantifiers.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(String, Vec<Term>),
    /// Equality between two terms; grounding folds it to True/False.
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    ForAll(String, Box<Formula>),
    Exists(String, Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>, args: Vec<Term>) -> Self {
        Formula::Atom(name.into(), args)
    }

    // An associated constructor, not a method — no clash with ops::Not.
    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    /// Walk all atoms in the formula.
    pub fn for_each_atom(&self, f: &mut impl FnMut(&str, &[Term])) {
        match self {
            Formula::Atom(name, args) => f(name, args),
            Formula::Not(inner) | Formula::ForAll(_, inner) | Formula::Exists(_, inner) => {
                inner.for_each_atom(f)
            }
            Formula::And(children) | Formula::Or(children) => {
                for c in children {
                    c.for_each_atom(f);
                }
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.for_each_atom(f);
                b.for_each_atom(f);
            }
            Formula::True | Formula::False | Formula::Eq(..) => {}
        }
    }

    /// Relation names mentioned anywhere in the formula.
    pub fn mentioned_relations(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each_atom(&mut |name, _| {
            out.insert(name.to_string());
        });
        out
    }

    /// True iff no quantifiers occur.
    pub fn quantifier_free(&self) -> bool {
        match self {
            Formula::ForAll(..) | Formula::Exists(..) => false,
            Formula::Not(inner) => inner.quantifier_free(),
            Formula::And(children) | Formula::Or(children) => {
                children.iter().all(|c| c.quantifier_free())
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.quantifier_free() && b.quantifier_free()
            }
            _ => true,
        }
    }

    /// Logvars occurring free in the formula.
    pub fn free_logvars(&self) -> BTreeSet<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            match f {
                Formula::Atom(_, args) => {
                    for t in args {
                        if let Term::Var(v) = t {
                            if !bound.iter().any(|b| b == v) {
                                out.insert(v.clone());
                            }
                        }
                    }
                }
                Formula::Eq(a, b) => {
                    for t in [a, b] {
                        if let Term::Var(v) = t {
                            if !bound.iter().any(|b| b == v) {
                                out.insert(v.clone());
                            }
                        }
                    }
                }
                Formula::Not(inner) => go(inner, bound, out),
                Formula::And(cs) | Formula::Or(cs) => {
                    for c in cs {
                        go(c, bound, out);
                    }
                }
                Formula::Implies(a, b) | Formula::Iff(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Formula::ForAll(v, inner) | Formula::Exists(v, inner) => {
                    bound.push(v.clone());
                    go(inner, bound, out);
                    bound.pop();
                }
                Formula::True | Formula::False => {}
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

/// One entry of a specification: a definition axiom `X(x⃗) ≡≡ body` or an
/// assessment `P(X(x⃗)=1) = α` shared by all groundings.
#[derive(Clone, Debug, PartialEq)]
pub enum AxiomOrAssessment {
    Definition {
        head: String,
        head_vars: Vec<String>,
        body: Formula,
    },
    Assessment {
        relation: String,
        prob: Rational,
    },
}

impl AxiomOrAssessment {
    pub fn relation(&self) -> &str {
        match self {
            AxiomOrAssessment::Definition { head, .. } => head,
            AxiomOrAssessment::Assessment { relation, .. } => relation,
        }
    }
}

/// A relational Bayesian network specification: declared relations, one
/// entry per relation.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RelationalSpec {
    pub relations: Vec<Relation>,
    pub entries: Vec<AxiomOrAssessment>,
}

impl RelationalSpec {
    pub fn arity_of(&self, name: &str) -> Option<usize> {
        self.relations.iter().find(|r| r.name == name).map(|r| r.arity)
    }

    pub fn entry_for(&self, name: &str) -> Option<&AxiomOrAssessment> {
        self.entries.iter().find(|e| e.relation() == name)
    }

    pub fn assessment(&self, name: &str) -> Option<&Rational> {
        match self.entry_for(name) {
            Some(AxiomOrAssessment::Assessment { prob, .. }) => Some(prob),
            _ => None,
        }
    }

    pub fn definition(&self, name: &str) -> Option<(&[String], &Formula)> {
        match self.entry_for(name) {
            Some(AxiomOrAssessment::Definition { head_vars, body, .. }) => {
                Some((head_vars.as_slice(), body))
            }
            _ => None,
        }
    }

    /// True iff `name` is declared and carries an assessment (a root).
    pub fn is_root(&self, name: &str) -> bool {
        matches!(
            self.entry_for(name),
            Some(AxiomOrAssessment::Assessment { .. })
        )
    }
}

/// A grounding of a relation: relation name plus individuals in 1..=N.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub relation: String,
    pub args: Vec<u32>,
}

impl GroundAtom {
    pub fn new(relation: impl Into<String>, args: Vec<u32>) -> Self {
        GroundAtom { relation: relation.into(), args }
    }

    pub fn prop(relation: impl Into<String>) -> Self {
        GroundAtom { relation: relation.into(), args: Vec::new() }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.relation)
        } else {
            write!(f, "{}(", self.relation)?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")
        }
    }
}

/// A node of a ground network: a root with a probability, or a deterministic
/// node defined by a quantifier-free ground body.
#[derive(Clone, Debug, PartialEq)]
pub enum GroundNode {
    Root(Rational),
    Defined(Formula),
}

/// A propositional Bayesian network over ground atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundNetwork {
    pub n: u32,
    pub nodes: BTreeMap<GroundAtom, GroundNode>,
}

impl GroundNetwork {
    /// Ground atoms a defined node's body mentions (its parents).
    pub fn parents_of(&self, atom: &GroundAtom) -> BTreeSet<GroundAtom> {
        let mut out = BTreeSet::new();
        if let Some(GroundNode::Defined(body)) = self.nodes.get(atom) {
            body.for_each_atom(&mut |name, args| {
                let args = args
                    .iter()
                    .map(|t| match t {
                        Term::Ind(i) => *i,
                        Term::Var(v) => panic!("ground body contains logvar {v}"),
                    })
                    .collect();
                out.insert(GroundAtom::new(name, args));
            });
        }
        out
    }

    pub fn roots(&self) -> impl Iterator<Item = (&GroundAtom, &Rational)> {
        self.nodes.iter().filter_map(|(a, n)| match n {
            GroundNode::Root(p) => Some((a, p)),
            GroundNode::Defined(_) => None,
        })
    }
}

/// Conflict found while assembling query assignments.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("conflicting assignments for {atom}")]
pub struct AssignmentConflict {
    pub atom: GroundAtom,
}

/// A query: assignments `Q` asked about, assignments `E` conditioned on, and
/// an optional decision threshold γ. Duplicate assignments with equal values
/// are merged at construction; conflicting values are an error.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Query {
    pub q: BTreeMap<GroundAtom, bool>,
    pub e: BTreeMap<GroundAtom, bool>,
    pub gamma: Option<Rational>,
}

impl Query {
    pub fn new(
        q: impl IntoIterator<Item = (GroundAtom, bool)>,
        e: impl IntoIterator<Item = (GroundAtom, bool)>,
        gamma: Option<Rational>,
    ) -> Result<Self, AssignmentConflict> {
        let mut qm: BTreeMap<GroundAtom, bool> = BTreeMap::new();
        let mut em: BTreeMap<GroundAtom, bool> = BTreeMap::new();
        for (atom, v) in q {
            if *qm.entry(atom.clone()).or_insert(v) != v {
                return Err(AssignmentConflict { atom });
            }
        }
        for (atom, v) in e {
            if *em.entry(atom.clone()).or_insert(v) != v {
                return Err(AssignmentConflict { atom });
            }
            if qm.get(&atom).is_some_and(|qv| *qv != v) {
                return Err(AssignmentConflict { atom });
            }
        }
        Ok(Query { q: qm, e: em, gamma })
    }

    /// Q ∪ E as one assignment map (construction guarantees consistency).
    pub fn combined(&self) -> BTreeMap<GroundAtom, bool> {
        let mut all = self.e.clone();
        for (a, v) in &self.q {
            all.insert(a.clone(), *v);
        }
        all
    }
}

/// Language fragments, most specific first. The classifier returns the first
/// label in this order that admits the specification:
/// `PropAnd < PropOr < PropAndNot < DLLiteNF < DLLiteNFWithPrimitiveNegation
/// < EL < ALC < QF < FFFOk < FFFO`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FragmentLabel {
    /// Propositional; every body a conjunction of literals (negation on
    /// assessed roots only).
    PropAnd,
    /// Propositional; every body a disjunction of literals (negation on
    /// assessed roots only).
    PropOr,
    /// Propositional with arbitrary conjunction/negation nesting.
    PropAndNot,
    /// Unary heads; bodies from unary atoms, ∧, ∃y r(x,y), ∃y r(y,x).
    DLLiteNF,
    /// DLLiteNF plus negation of assessed (primitive) unary atoms.
    DLLiteNFWithPrimitiveNegation,
    /// Unary heads; bodies from unary atoms, ∧ and the qualified
    /// ∃y (r(x,y) ∧ Y(y)).
    EL,
    /// EL plus arbitrary negation.
    ALC,
    /// Quantifier-free bodies whose logvars all appear in the head.
    QF,
    /// Function-free first-order with at most k distinct logvars per axiom.
    FFFOk(usize),
    /// Function-free first-order, unbounded logvar supply. The classifier
    /// always produces a finite count, so this label survives only as input
    /// from other tools.
    FFFO,
}

impl fmt::Display for FragmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FragmentLabel::PropAnd => write!(f, "Prop(and)"),
            FragmentLabel::PropOr => write!(f, "Prop(or)"),
            FragmentLabel::PropAndNot => write!(f, "Prop(and,not)"),
            FragmentLabel::DLLiteNF => write!(f, "DLLite-nf"),
            FragmentLabel::DLLiteNFWithPrimitiveNegation => write!(f, "DLLite-nf(+prim-neg)"),
            FragmentLabel::EL => write!(f, "EL"),
            FragmentLabel::ALC => write!(f, "ALC"),
            FragmentLabel::QF => write!(f, "QF"),
            FragmentLabel::FFFOk(k) => write!(f, "FFFO^{k}"),
            FragmentLabel::FFFO => write!(f, "FFFO"),
        }
    }
}

/// A single validation problem. Validation reports all of them rather than
/// stopping at the first.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateRelationDecl { name: String },
    UndeclaredRelation { relation: String, context: String },
    ArityMismatch { relation: String, expected: usize, found: usize, context: String },
    DuplicateEntry { relation: String },
    MissingEntry { relation: String },
    StrayLogvar { relation: String, var: String },
    ShadowedLogvar { relation: String, var: String },
    DuplicateHeadVar { relation: String, var: String },
    ProbabilityOutOfRange { relation: String },
    IndividualInSpec { relation: String },
    CyclicParvariableGraph { cycle: Vec<String> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateRelationDecl { name } => {
                write!(f, "relation {name} declared more than once")
            }
            Violation::UndeclaredRelation { relation, context } => {
                write!(f, "undeclared relation {relation} (in {context})")
            }
            Violation::ArityMismatch { relation, expected, found, context } => write!(
                f,
                "relation {relation} used with {found} arguments but declared with {expected} (in {context})"
            ),
            Violation::DuplicateEntry { relation } => {
                write!(f, "relation {relation} has more than one definition/assessment")
            }
            Violation::MissingEntry { relation } => {
                write!(f, "relation {relation} has neither a definition nor an assessment")
            }
            Violation::StrayLogvar { relation, var } => {
                write!(f, "logvar {var} in the body of {relation} is neither a head logvar nor quantified")
            }
            Violation::ShadowedLogvar { relation, var } => {
                write!(f, "logvar {var} is bound more than once in the definition of {relation}")
            }
            Violation::DuplicateHeadVar { relation, var } => {
                write!(f, "head logvar {var} repeats in the definition of {relation}")
            }
            Violation::ProbabilityOutOfRange { relation } => {
                write!(f, "assessment for {relation} is outside [0,1]")
            }
            Violation::IndividualInSpec { relation } => {
                write!(f, "definition of {relation} mentions a domain individual; specifications are constant-free")
            }
            Violation::CyclicParvariableGraph { cycle } => {
                write!(f, "parvariable graph has a cycle: {}", cycle.join(" -> "))
            }
        }
    }
}

/// Outcome of [`validate_spec`]: empty iff the specification is valid.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// Structural validation. Collects every violation: duplicate declarations,
/// undeclared relations, arity mismatches, duplicate/missing entries, stray
/// or shadowed logvars, out-of-range probabilities, individuals in bodies,
/// and parvariable-graph cycles.
pub fn validate_spec(spec: &RelationalSpec) -> ValidationReport {
    let mut violations = Vec::new();

    let mut seen = BTreeSet::new();
    for r in &spec.relations {
        if !seen.insert(r.name.clone()) {
            violations.push(Violation::DuplicateRelationDecl { name: r.name.clone() });
        }
    }
    let arity: BTreeMap<&str, usize> =
        spec.relations.iter().map(|r| (r.name.as_str(), r.arity)).collect();

    let mut entry_seen: BTreeSet<&str> = BTreeSet::new();
    for entry in &spec.entries {
        let rel = entry.relation();
        if !entry_seen.insert(rel) {
            violations.push(Violation::DuplicateEntry { relation: rel.to_string() });
        }
        match arity.get(rel) {
            None => violations.push(Violation::UndeclaredRelation {
                relation: rel.to_string(),
                context: format!("entry for {rel}"),
            }),
            Some(&a) => {
                if let AxiomOrAssessment::Definition { head_vars, .. } = entry {
                    if head_vars.len() != a {
                        violations.push(Violation::ArityMismatch {
                            relation: rel.to_string(),
                            expected: a,
                            found: head_vars.len(),
                            context: format!("head of {rel}"),
                        });
                    }
                }
            }
        }
        match entry {
            AxiomOrAssessment::Assessment { relation, prob } => {
                if !is_probability(prob) {
                    violations.push(Violation::ProbabilityOutOfRange {
                        relation: relation.clone(),
                    });
                }
            }
            AxiomOrAssessment::Definition { head, head_vars, body } => {
                let mut head_seen = BTreeSet::new();
                for v in head_vars {
                    if !head_seen.insert(v.clone()) {
                        violations.push(Violation::DuplicateHeadVar {
                            relation: head.clone(),
                            var: v.clone(),
                        });
                    }
                }
                check_body(head, body, head_vars, &arity, &mut violations);
            }
        }
    }

    for r in &spec.relations {
        if !entry_seen.contains(r.name.as_str()) {
            violations.push(Violation::MissingEntry { relation: r.name.clone() });
        }
    }

    // Cycle check is meaningful only once arities/declarations resolve; run
    // it regardless, over whatever edges do resolve.
    let graph = parvariable_graph(spec);
    violations.extend(
        find_cycles(&graph.parents)
            .into_iter()
            .map(|cycle| Violation::CyclicParvariableGraph { cycle }),
    );

    ValidationReport { violations }
}

fn check_body(
    head: &str,
    body: &Formula,
    head_vars: &[String],
    arity: &BTreeMap<&str, usize>,
    out: &mut Vec<Violation>,
) {
    fn go(
        head: &str,
        f: &Formula,
        scope: &mut Vec<String>,
        arity: &BTreeMap<&str, usize>,
        out: &mut Vec<Violation>,
    ) {
        match f {
            Formula::Atom(name, args) => {
                match arity.get(name.as_str()) {
                    None => out.push(Violation::UndeclaredRelation {
                        relation: name.clone(),
                        context: format!("body of {head}"),
                    }),
                    Some(&a) if a != args.len() => out.push(Violation::ArityMismatch {
                        relation: name.clone(),
                        expected: a,
                        found: args.len(),
                        context: format!("body of {head}"),
                    }),
                    _ => {}
                }
                for t in args {
                    check_term(head, t, scope, out);
                }
            }
            Formula::Eq(a, b) => {
                check_term(head, a, scope, out);
                check_term(head, b, scope, out);
            }
            Formula::Not(inner) => go(head, inner, scope, arity, out),
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    go(head, c, scope, arity, out);
                }
            }
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                go(head, a, scope, arity, out);
                go(head, b, scope, arity, out);
            }
            Formula::ForAll(v, inner) | Formula::Exists(v, inner) => {
                if scope.iter().any(|s| s == v) {
                    out.push(Violation::ShadowedLogvar {
                        relation: head.to_string(),
                        var: v.clone(),
                    });
                }
                scope.push(v.clone());
                go(head, inner, scope, arity, out);
                scope.pop();
            }
            Formula::True | Formula::False => {}
        }
    }
    fn check_term(head: &str, t: &Term, scope: &[String], out: &mut Vec<Violation>) {
        match t {
            Term::Var(v) => {
                if !scope.iter().any(|s| s == v) {
                    out.push(Violation::StrayLogvar {
                        relation: head.to_string(),
                        var: v.clone(),
                    });
                }
            }
            Term::Ind(_) => out.push(Violation::IndividualInSpec {
                relation: head.to_string(),
            }),
        }
    }
    let mut scope: Vec<String> = head_vars.to_vec();
    go(head, body, &mut scope, arity, out);
}

/// The directed graph over relations induced by body mentions: an edge
/// `Y -> X` iff `Y` occurs in the definition body of `X`. Roots are exactly
/// the assessed relations.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParvariableGraph {
    /// Child relation -> the set of relations its body mentions.
    pub parents: BTreeMap<String, BTreeSet<String>>,
    /// Assessed relations.
    pub roots: BTreeSet<String>,
}

impl ParvariableGraph {
    /// All edges as (parent, child) pairs.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (child, parents) in &self.parents {
            for p in parents {
                out.push((p.clone(), child.clone()));
            }
        }
        out
    }

    /// Relations in dependency order (parents before children). `None` if
    /// the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<String>> {
        let mut order = Vec::new();
        let mut state: BTreeMap<&str, u8> = BTreeMap::new(); // 0 new, 1 active, 2 done
        let mut names: BTreeSet<&str> = self.roots.iter().map(|s| s.as_str()).collect();
        names.extend(self.parents.keys().map(|s| s.as_str()));
        fn visit<'a>(
            name: &'a str,
            parents: &'a BTreeMap<String, BTreeSet<String>>,
            state: &mut BTreeMap<&'a str, u8>,
            order: &mut Vec<String>,
        ) -> bool {
            match state.get(name) {
                Some(1) => return false,
                Some(2) => return true,
                _ => {}
            }
            state.insert(name, 1);
            if let Some(ps) = parents.get(name) {
                for p in ps {
                    if !visit(p, parents, state, order) {
                        return false;
                    }
                }
            }
            state.insert(name, 2);
            order.push(name.to_string());
            true
        }
        for name in names {
            if !visit(name, &self.parents, &mut state, &mut order) {
                return None;
            }
        }
        Some(order)
    }
}

/// Build the parvariable graph of a specification. Relations whose bodies
/// mention undeclared names still contribute edges (validation reports the
/// problem separately).
pub fn parvariable_graph(spec: &RelationalSpec) -> ParvariableGraph {
    let mut parents: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut roots = BTreeSet::new();
    for entry in &spec.entries {
        match entry {
            AxiomOrAssessment::Assessment { relation, .. } => {
                roots.insert(relation.clone());
            }
            AxiomOrAssessment::Definition { head, body, .. } => {
                parents.insert(head.clone(), body.mentioned_relations());
            }
        }
    }
    ParvariableGraph { parents, roots }
}

/// Find cycles in the parent graph; returns one representative path per
/// back edge found (so `A ≡≡ A` yields exactly one violation).
fn find_cycles(parents: &BTreeMap<String, BTreeSet<String>>) -> Vec<Vec<String>> {
    let mut cycles = Vec::new();
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    let mut stack: Vec<&str> = Vec::new();
    fn visit<'a>(
        name: &'a str,
        parents: &'a BTreeMap<String, BTreeSet<String>>,
        state: &mut BTreeMap<&'a str, u8>,
        stack: &mut Vec<&'a str>,
        cycles: &mut Vec<Vec<String>>,
    ) {
        state.insert(name, 1);
        stack.push(name);
        if let Some(ps) = parents.get(name) {
            for p in ps {
                match state.get(p.as_str()) {
                    Some(1) => {
                        let start = stack.iter().position(|s| *s == p.as_str()).unwrap();
                        let mut cycle: Vec<String> =
                            stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(p.clone());
                        cycles.push(cycle);
                    }
                    Some(2) => {}
                    _ => visit(p, parents, state, stack, cycles),
                }
            }
        }
        stack.pop();
        state.insert(name, 2);
    }
    for name in parents.keys() {
        if !state.contains_key(name.as_str()) {
            visit(name, parents, &mut state, &mut stack, &mut cycles);
        }
    }
    cycles
}

/// Classify a valid specification into the most specific fragment label.
///
/// Priority (first match wins): PropAnd, PropOr, PropAndNot, DLLiteNF,
/// DLLiteNFWithPrimitiveNegation, EL, ALC, QF, FFFOk(k). Every valid
/// specification has finitely many logvars per axiom, so FFFOk(k) is the
/// final catch-all and the bare FFFO label is never produced here.
pub fn classify_fragment(spec: &RelationalSpec) -> FragmentLabel {
    if is_propositional(spec) {
        if all_defined_bodies(spec, |b| is_literal_tree(spec, b, LiteralShape::And)) {
            return FragmentLabel::PropAnd;
        }
        if all_defined_bodies(spec, |b| is_literal_tree(spec, b, LiteralShape::Or)) {
            return FragmentLabel::PropOr;
        }
        if all_defined_bodies(spec, is_and_not_tree) {
            return FragmentLabel::PropAndNot;
        }
    }
    if is_dl_shape(spec) {
        if all_dl_bodies(spec, false) {
            return FragmentLabel::DLLiteNF;
        }
        if all_dl_bodies(spec, true) {
            return FragmentLabel::DLLiteNFWithPrimitiveNegation;
        }
        if all_el_alc_bodies(spec, false) {
            return FragmentLabel::EL;
        }
        if all_el_alc_bodies(spec, true) {
            return FragmentLabel::ALC;
        }
    }
    if all_defined(spec, |head_vars, body| {
        body.quantifier_free() && body.free_logvars().iter().all(|v| head_vars.contains(v))
    }) {
        return FragmentLabel::QF;
    }
    let mut k = 0;
    for entry in &spec.entries {
        if let AxiomOrAssessment::Definition { head_vars, body, .. } = entry {
            let mut vars: BTreeSet<String> = head_vars.iter().cloned().collect();
            collect_quantified(body, &mut vars);
            k = k.max(vars.len());
        }
    }
    FragmentLabel::FFFOk(k)
}

fn collect_quantified(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::ForAll(v, inner) | Formula::Exists(v, inner) => {
            out.insert(v.clone());
            collect_quantified(inner, out);
        }
        Formula::Not(inner) => collect_quantified(inner, out),
        Formula::And(cs) | Formula::Or(cs) => {
            for c in cs {
                collect_quantified(c, out);
            }
        }
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            collect_quantified(a, out);
            collect_quantified(b, out);
        }
        _ => {}
    }
}

fn is_propositional(spec: &RelationalSpec) -> bool {
    spec.relations.iter().all(|r| r.arity == 0)
}

fn all_defined(
    spec: &RelationalSpec,
    mut pred: impl FnMut(&[String], &Formula) -> bool,
) -> bool {
    spec.entries.iter().all(|e| match e {
        AxiomOrAssessment::Definition { head_vars, body, .. } => pred(head_vars, body),
        AxiomOrAssessment::Assessment { .. } => true,
    })
}

fn all_defined_bodies(spec: &RelationalSpec, mut pred: impl FnMut(&Formula) -> bool) -> bool {
    all_defined(spec, |_, b| pred(b))
}

#[derive(Clone, Copy, PartialEq)]
enum LiteralShape {
    And,
    Or,
}

/// A (possibly nested) pure conjunction/disjunction of literals, where a
/// literal is an atom or the negation of an *assessed* atom. `True` is
/// admitted in conjunctions and `False` in disjunctions (empty cases).
fn is_literal_tree(spec: &RelationalSpec, f: &Formula, shape: LiteralShape) -> bool {
    match f {
        Formula::Atom(..) => true,
        Formula::Not(inner) => {
            matches!(&**inner, Formula::Atom(name, _) if spec.is_root(name))
        }
        Formula::And(cs) if shape == LiteralShape::And => {
            cs.iter().all(|c| is_literal_tree(spec, c, shape))
        }
        Formula::Or(cs) if shape == LiteralShape::Or => {
            cs.iter().all(|c| is_literal_tree(spec, c, shape))
        }
        Formula::True => shape == LiteralShape::And,
        Formula::False => shape == LiteralShape::Or,
        _ => false,
    }
}

/// Arbitrary nesting of conjunction and negation over atoms.
fn is_and_not_tree(f: &Formula) -> bool {
    match f {
        Formula::Atom(..) | Formula::True | Formula::False => true,
        Formula::Not(inner) => is_and_not_tree(inner),
        Formula::And(cs) => cs.iter().all(is_and_not_tree),
        _ => false,
    }
}

/// Shape shared by the description-logic fragments: relations have arity 1
/// or 2, every definition head is unary, and every binary relation is
/// assessed (a role; roles cannot be defined by the DL body grammars).
fn is_dl_shape(spec: &RelationalSpec) -> bool {
    spec.relations.iter().all(|r| r.arity == 1 || r.arity == 2)
        && spec.entries.iter().all(|e| match e {
            AxiomOrAssessment::Definition { head, .. } => spec.arity_of(head) == Some(1),
            AxiomOrAssessment::Assessment { .. } => true,
        })
}

fn all_dl_bodies(spec: &RelationalSpec, allow_prim_neg: bool) -> bool {
    all_defined(spec, |head_vars, body| {
        head_vars.len() == 1 && is_dllite_body(spec, body, &head_vars[0], allow_prim_neg)
    })
}

/// DLLite^nf bodies over head logvar x: unary atoms Y(x), conjunction, and
/// the unqualified ∃y r(x,y) / ∃y r(y,x). With `allow_prim_neg`, also
/// ¬Z(x) for assessed unary Z.
fn is_dllite_body(spec: &RelationalSpec, f: &Formula, x: &str, allow_prim_neg: bool) -> bool {
    match f {
        Formula::Atom(name, args) => {
            spec.arity_of(name) == Some(1) && args == &[Term::Var(x.to_string())]
        }
        Formula::Not(inner) if allow_prim_neg => match &**inner {
            Formula::Atom(name, args) => {
                spec.arity_of(name) == Some(1)
                    && spec.is_root(name)
                    && args == &[Term::Var(x.to_string())]
            }
            _ => false,
        },
        Formula::And(cs) => cs.iter().all(|c| is_dllite_body(spec, c, x, allow_prim_neg)),
        Formula::Exists(y, inner) => {
            y != x
                && match &**inner {
                    Formula::Atom(r, args) => {
                        spec.arity_of(r) == Some(2)
                            && (args == &[Term::Var(x.to_string()), Term::Var(y.clone())]
                                || args == &[Term::Var(y.clone()), Term::Var(x.to_string())])
                    }
                    _ => false,
                }
        }
        _ => false,
    }
}

fn all_el_alc_bodies(spec: &RelationalSpec, allow_negation: bool) -> bool {
    all_defined(spec, |head_vars, body| {
        head_vars.len() == 1 && is_el_alc_body(spec, body, &head_vars[0], allow_negation)
    })
}

/// EL bodies over head logvar x: unary atoms Y(x), conjunction, and the
/// qualified existential ∃y (r(x,y) ∧ Y(y)). ALC additionally closes the
/// grammar under negation.
fn is_el_alc_body(spec: &RelationalSpec, f: &Formula, x: &str, allow_negation: bool) -> bool {
    match f {
        Formula::Atom(name, args) => {
            spec.arity_of(name) == Some(1) && args == &[Term::Var(x.to_string())]
        }
        Formula::Not(inner) if allow_negation => is_el_alc_body(spec, inner, x, allow_negation),
        Formula::And(cs) => cs.iter().all(|c| is_el_alc_body(spec, c, x, allow_negation)),
        Formula::Exists(y, inner) => {
            if y == x {
                return false;
            }
            match &**inner {
                Formula::And(cs) if cs.len() == 2 => {
                    let role = |f: &Formula| match f {
                        Formula::Atom(r, args) => {
                            spec.arity_of(r) == Some(2)
                                && args == &[Term::Var(x.to_string()), Term::Var(y.clone())]
                        }
                        _ => false,
                    };
                    let concept = |f: &Formula| match f {
                        Formula::Atom(c, args) => {
                            spec.arity_of(c) == Some(1) && args == &[Term::Var(y.clone())]
                        }
                        _ => false,
                    };
                    (role(&cs[0]) && concept(&cs[1])) || (role(&cs[1]) && concept(&cs[0]))
                }
                _ => false,
            }
        }
        _ => false,
    }
}
