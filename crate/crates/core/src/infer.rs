//! Exact inference over ground networks.
//!
//! The general route enumerates root assignments and sums exact rational
//! joints; it clamps evidence roots, prunes to the ancestors of the fixed
//! atoms, and only then enumerates, so the guard applies to the roots that
//! actually matter. The fast route ([`positive_query_product`]) answers
//! positive queries on conjunctive propositional specifications as a plain
//! product of root probabilities, in polynomial time, via upward closure.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};

use crate::ground::{self, GroundError};
use crate::model::{
    classify_fragment, is_probability, validate_spec, AxiomOrAssessment, Formula, FragmentLabel,
    GroundAtom, GroundNetwork, GroundNode, Query, Rational, RelationalSpec, Term,
    ValidationReport,
};

/// Default ceiling on the number of free roots enumerated by
/// [`query_probability`] (2^24 joint terms).
pub const DEFAULT_ROOT_CAP: usize = 24;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum InferError {
    #[error("assignment is missing a value for {atom}")]
    PartialAssignment { atom: GroundAtom },
    #[error("formula is not ground (contains a logvar or an unfolded equality)")]
    NotGround,
    #[error("{atom} is not a node of the network")]
    UnknownAtom { atom: GroundAtom },
    #[error("evidence has probability zero; the conditional is undefined")]
    ZeroEvidence,
    #[error("{roots} free roots exceed the enumeration cap of {cap}")]
    RootCapExceeded { roots: usize, cap: usize },
    #[error("network contains a defined-node cycle")]
    CyclicNetwork,
    #[error("query carries no decision threshold")]
    MissingGamma,
    #[error("decision threshold must be in [0,1]")]
    GammaOutOfRange,
    #[error("invalid specification:\n{report}")]
    InvalidSpec { report: ValidationReport },
    #[error("specification is {found}, not a conjunctive/disjunctive propositional shape")]
    NotInFragment { found: FragmentLabel },
    #[error("the conjunctive fast path requires positive assignments; {atom} is assigned false")]
    NegativeAssignment { atom: GroundAtom },
    #[error("the disjunctive fast path requires negative assignments; {atom} is assigned true")]
    PositiveAssignment { atom: GroundAtom },
    #[error(transparent)]
    Ground(#[from] GroundError),
}

/// The [`GroundAtom`] a ground `Formula::Atom` denotes.
fn ground_atom_of(f: &Formula) -> Result<GroundAtom, InferError> {
    let Formula::Atom(name, args) = f else {
        return Err(InferError::NotGround);
    };
    let args = args
        .iter()
        .map(|t| match t {
            crate::model::Term::Ind(i) => Ok(*i),
            crate::model::Term::Var(_) => Err(InferError::NotGround),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GroundAtom::new(name.clone(), args))
}

/// Evaluate a ground formula under an atom assignment.
pub fn eval_ground(f: &Formula, values: &BTreeMap<GroundAtom, bool>) -> Result<bool, InferError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(..) => {
            let atom = ground_atom_of(f)?;
            *values
                .get(&atom)
                .ok_or(InferError::PartialAssignment { atom })?
        }
        Formula::Eq(a, b) => match (a, b) {
            (crate::model::Term::Ind(x), crate::model::Term::Ind(y)) => x == y,
            _ => return Err(InferError::NotGround),
        },
        Formula::Not(inner) => !eval_ground(inner, values)?,
        Formula::And(cs) => {
            let mut acc = true;
            for c in cs {
                acc &= eval_ground(c, values)?;
            }
            acc
        }
        Formula::Or(cs) => {
            let mut acc = false;
            for c in cs {
                acc |= eval_ground(c, values)?;
            }
            acc
        }
        Formula::Implies(a, b) => !eval_ground(a, values)? || eval_ground(b, values)?,
        Formula::Iff(a, b) => eval_ground(a, values)? == eval_ground(b, values)?,
        Formula::ForAll(..) | Formula::Exists(..) => return Err(InferError::NotGround),
    })
}

/// The joint probability of one full assignment: the product over roots of
/// α or 1−α, times 1 if every defined node's value equals its body's
/// evaluation and 0 otherwise.
pub fn joint_probability(
    net: &GroundNetwork,
    assignment: &BTreeMap<GroundAtom, bool>,
) -> Result<Rational, InferError> {
    // Totality first, so a partial assignment is always reported as such
    // and never masked by an early deterministic mismatch.
    for atom in net.nodes.keys() {
        if !assignment.contains_key(atom) {
            return Err(InferError::PartialAssignment { atom: atom.clone() });
        }
    }
    let mut p = Rational::one();
    for (atom, node) in &net.nodes {
        let value = assignment[atom];
        match node {
            GroundNode::Root(alpha) => {
                p *= if value { alpha.clone() } else { Rational::one() - alpha };
            }
            GroundNode::Defined(body) => {
                if eval_ground(body, assignment)? != value {
                    return Ok(Rational::zero());
                }
            }
        }
    }
    Ok(p)
}

/// Ground formula with atoms resolved to dense indices, so the enumeration
/// loop evaluates bodies without map lookups or allocations.
enum IxFormula {
    Const(bool),
    Atom(usize),
    Not(Box<IxFormula>),
    And(Vec<IxFormula>),
    Or(Vec<IxFormula>),
    Implies(Box<IxFormula>, Box<IxFormula>),
    Iff(Box<IxFormula>, Box<IxFormula>),
}

fn compile(
    f: &Formula,
    index: &BTreeMap<GroundAtom, usize>,
) -> Result<IxFormula, InferError> {
    Ok(match f {
        Formula::True => IxFormula::Const(true),
        Formula::False => IxFormula::Const(false),
        Formula::Atom(..) => {
            let atom = ground_atom_of(f)?;
            IxFormula::Atom(
                *index
                    .get(&atom)
                    .ok_or(InferError::UnknownAtom { atom })?,
            )
        }
        Formula::Eq(a, b) => match (a, b) {
            (crate::model::Term::Ind(x), crate::model::Term::Ind(y)) => IxFormula::Const(x == y),
            _ => return Err(InferError::NotGround),
        },
        Formula::Not(inner) => IxFormula::Not(Box::new(compile(inner, index)?)),
        Formula::And(cs) => IxFormula::And(
            cs.iter().map(|c| compile(c, index)).collect::<Result<_, _>>()?,
        ),
        Formula::Or(cs) => IxFormula::Or(
            cs.iter().map(|c| compile(c, index)).collect::<Result<_, _>>()?,
        ),
        Formula::Implies(a, b) => {
            IxFormula::Implies(Box::new(compile(a, index)?), Box::new(compile(b, index)?))
        }
        Formula::Iff(a, b) => {
            IxFormula::Iff(Box::new(compile(a, index)?), Box::new(compile(b, index)?))
        }
        Formula::ForAll(..) | Formula::Exists(..) => return Err(InferError::NotGround),
    })
}

fn eval_ix(f: &IxFormula, values: &[bool]) -> bool {
    match f {
        IxFormula::Const(b) => *b,
        IxFormula::Atom(i) => values[*i],
        IxFormula::Not(inner) => !eval_ix(inner, values),
        IxFormula::And(cs) => cs.iter().all(|c| eval_ix(c, values)),
        IxFormula::Or(cs) => cs.iter().any(|c| eval_ix(c, values)),
        IxFormula::Implies(a, b) => !eval_ix(a, values) || eval_ix(b, values),
        IxFormula::Iff(a, b) => eval_ix(a, values) == eval_ix(b, values),
    }
}

/// Fold constants and `known` atom values through a ground formula.
fn partial_eval(
    f: &Formula,
    known: &BTreeMap<GroundAtom, bool>,
) -> Result<Formula, InferError> {
    Ok(match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Atom(..) => {
            let atom = ground_atom_of(f)?;
            match known.get(&atom) {
                Some(true) => Formula::True,
                Some(false) => Formula::False,
                None => f.clone(),
            }
        }
        Formula::Eq(a, b) => match (a, b) {
            (Term::Ind(x), Term::Ind(y)) => {
                if x == y {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            _ => return Err(InferError::NotGround),
        },
        Formula::Not(inner) => match partial_eval(inner, known)? {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            other => Formula::not(other),
        },
        Formula::And(parts) => {
            let mut out = Vec::new();
            for p in parts {
                match partial_eval(p, known)? {
                    Formula::True => {}
                    Formula::False => return Ok(Formula::False),
                    other => out.push(other),
                }
            }
            match out.len() {
                0 => Formula::True,
                1 => out.pop().unwrap(),
                _ => Formula::And(out),
            }
        }
        Formula::Or(parts) => {
            let mut out = Vec::new();
            for p in parts {
                match partial_eval(p, known)? {
                    Formula::False => {}
                    Formula::True => return Ok(Formula::True),
                    other => out.push(other),
                }
            }
            match out.len() {
                0 => Formula::False,
                1 => out.pop().unwrap(),
                _ => Formula::Or(out),
            }
        }
        Formula::Implies(a, b) => {
            let a2 = partial_eval(a, known)?;
            let b2 = partial_eval(b, known)?;
            match (a2, b2) {
                (Formula::False, _) | (_, Formula::True) => Formula::True,
                (Formula::True, b2) => b2,
                (a2, Formula::False) => Formula::not(a2),
                (a2, b2) => Formula::Implies(Box::new(a2), Box::new(b2)),
            }
        }
        Formula::Iff(a, b) => {
            let a2 = partial_eval(a, known)?;
            let b2 = partial_eval(b, known)?;
            match (a2, b2) {
                (Formula::True, x) | (x, Formula::True) => x,
                (Formula::False, x) | (x, Formula::False) => match x {
                    Formula::True => Formula::False,
                    Formula::False => Formula::True,
                    other => Formula::not(other),
                },
                (a2, b2) => Formula::Iff(Box::new(a2), Box::new(b2)),
            }
        }
        Formula::ForAll(..) | Formula::Exists(..) => return Err(InferError::NotGround),
    })
}

/// All ground atoms mentioned by a ground formula.
fn ground_atoms_of(f: &Formula) -> Result<Vec<GroundAtom>, InferError> {
    let mut out = Vec::new();
    let mut grounded = true;
    f.for_each_atom(&mut |name, args| {
        let mut inds = Vec::with_capacity(args.len());
        for t in args {
            match t {
                Term::Ind(i) => inds.push(*i),
                Term::Var(_) => {
                    grounded = false;
                    return;
                }
            }
        }
        out.push(GroundAtom::new(name.to_string(), inds));
    });
    if grounded {
        Ok(out)
    } else {
        Err(InferError::NotGround)
    }
}

/// Dependency order (parents first) over the simplified defined nodes.
fn topo_simplified(
    simplified: &BTreeMap<GroundAtom, Formula>,
) -> Result<Vec<GroundAtom>, InferError> {
    fn visit(
        atom: &GroundAtom,
        simplified: &BTreeMap<GroundAtom, Formula>,
        state: &mut BTreeMap<GroundAtom, u8>, // 1 active, 2 done
        order: &mut Vec<GroundAtom>,
    ) -> Result<(), InferError> {
        match state.get(atom) {
            Some(1) => return Err(InferError::CyclicNetwork),
            Some(_) => return Ok(()),
            None => {}
        }
        state.insert(atom.clone(), 1);
        for parent in ground_atoms_of(&simplified[atom])? {
            if simplified.contains_key(&parent) {
                visit(&parent, simplified, state, order)?;
            }
        }
        order.push(atom.clone());
        state.insert(atom.clone(), 2);
        Ok(())
    }
    let mut order = Vec::new();
    let mut state = BTreeMap::new();
    for atom in simplified.keys() {
        visit(atom, simplified, &mut state, &mut order)?;
    }
    Ok(order)
}

/// Σ over assignments consistent with `fixed` of the joint probability,
/// i.e. P(fixed).
///
/// Fixed values are propagated as constants through the defined bodies to a
/// fixpoint before anything is enumerated: bodies fold to smaller formulas,
/// defined nodes whose bodies become constant are themselves propagated,
/// and only atoms still reachable through the simplified bodies matter.
/// Clamping evidence this way disconnects whole branches — a guarded
/// definition whose guard the evidence refutes contributes no free roots at
/// all. The remaining free roots are then enumerated exactly.
fn restricted_sum(
    net: &GroundNetwork,
    fixed: &BTreeMap<GroundAtom, bool>,
    cap: usize,
) -> Result<Rational, InferError> {
    if fixed.is_empty() {
        return Ok(Rational::one());
    }
    for atom in fixed.keys() {
        if !net.nodes.contains_key(atom) {
            return Err(InferError::UnknownAtom { atom: atom.clone() });
        }
    }

    // Constant propagation to fixpoint. `known` holds fixed values plus
    // defined values that follow from them; `simplified` the still-open
    // bodies of every reachable defined node.
    let mut known: BTreeMap<GroundAtom, bool> = fixed.clone();
    let (reached, simplified) = loop {
        let mut grew = false;
        let mut reached: BTreeSet<GroundAtom> = BTreeSet::new();
        let mut simplified: BTreeMap<GroundAtom, Formula> = BTreeMap::new();
        let mut stack: Vec<GroundAtom> = fixed.keys().cloned().collect();
        while let Some(atom) = stack.pop() {
            if !reached.insert(atom.clone()) {
                continue;
            }
            match net.nodes.get(&atom) {
                None => return Err(InferError::UnknownAtom { atom }),
                Some(GroundNode::Root(_)) => {}
                Some(GroundNode::Defined(body)) => {
                    let body2 = partial_eval(body, &known)?;
                    match body2 {
                        Formula::True | Formula::False => {
                            let value = matches!(body2, Formula::True);
                            match known.get(&atom) {
                                // A fixed value contradicted by a determined
                                // one: no consistent assignment exists.
                                Some(&v) if v != value => return Ok(Rational::zero()),
                                Some(_) => {}
                                None => {
                                    known.insert(atom.clone(), value);
                                    grew = true;
                                }
                            }
                        }
                        open => {
                            stack.extend(ground_atoms_of(&open)?);
                            simplified.insert(atom.clone(), open);
                        }
                    }
                }
            }
        }
        if !grew {
            break (reached, simplified);
        }
    };

    // Root factors: clamped roots multiply in directly, open ones are
    // enumerated.
    let mut const_factor = Rational::one();
    let mut free: Vec<(GroundAtom, Rational)> = Vec::new();
    for atom in &reached {
        if let Some(GroundNode::Root(alpha)) = net.nodes.get(atom) {
            match known.get(atom) {
                Some(&v) => {
                    const_factor *= if v { alpha.clone() } else { Rational::one() - alpha };
                }
                None => free.push((atom.clone(), alpha.clone())),
            }
        }
    }
    if free.len() > cap {
        return Err(InferError::RootCapExceeded { roots: free.len(), cap });
    }
    if const_factor.is_zero() {
        return Ok(Rational::zero());
    }

    // Dense indices over the open atoms only; known values were already
    // folded into the bodies.
    let mut index: BTreeMap<GroundAtom, usize> = BTreeMap::new();
    for (atom, _) in &free {
        let i = index.len();
        index.insert(atom.clone(), i);
    }
    for atom in simplified.keys() {
        let i = index.len();
        index.insert(atom.clone(), i);
    }
    let mut values = vec![false; index.len()];
    let free: Vec<(usize, Rational)> = free
        .into_iter()
        .map(|(atom, alpha)| (index[&atom], alpha))
        .collect();

    // Simplified defined nodes in dependency order, with their compiled
    // bodies and the fixed value to check, if any.
    let order = topo_simplified(&simplified)?;
    let mut defined: Vec<(usize, IxFormula, Option<bool>)> = Vec::with_capacity(order.len());
    for atom in &order {
        defined.push((
            index[atom],
            compile(&simplified[atom], &index)?,
            fixed.get(atom).copied(),
        ));
    }

    // Enumerate free-root assignments in Gray-code order (one bit flips per
    // step); each term is an exact product so the order is a traversal
    // choice, not an approximation.
    let k = free.len();
    let mut sum = Rational::zero();
    for i in 0u64..(1u64 << k) {
        let mask = i ^ (i >> 1);
        let mut term = const_factor.clone();
        for (bit, (ix, alpha)) in free.iter().enumerate() {
            let v = mask & (1 << bit) != 0;
            values[*ix] = v;
            term *= if v { alpha.clone() } else { Rational::one() - alpha };
        }
        let mut consistent = true;
        for (ix, body, required) in &defined {
            let v = eval_ix(body, &values);
            values[*ix] = v;
            if required.is_some_and(|r| r != v) {
                consistent = false;
                break;
            }
        }
        if consistent {
            sum += term;
        }
    }
    Ok(sum)
}

/// P(Q|E) = P(Q,E)/P(E) by exact enumeration (P(Q) when E is empty), with
/// the default free-root cap.
pub fn query_probability(net: &GroundNetwork, query: &Query) -> Result<Rational, InferError> {
    query_probability_capped(net, query, DEFAULT_ROOT_CAP)
}

/// As [`query_probability`] with an explicit cap on enumerated free roots.
pub fn query_probability_capped(
    net: &GroundNetwork,
    query: &Query,
    cap: usize,
) -> Result<Rational, InferError> {
    let p_qe = restricted_sum(net, &query.combined(), cap)?;
    if query.e.is_empty() {
        return Ok(p_qe);
    }
    let p_e = restricted_sum(net, &query.e, cap)?;
    if p_e.is_zero() {
        return Err(InferError::ZeroEvidence);
    }
    Ok(p_qe / p_e)
}

/// Ground the specification and decide P(Q|E) > γ, strictly, on exact
/// rationals.
pub fn decide_threshold(
    spec: &RelationalSpec,
    n: u32,
    query: &Query,
) -> Result<bool, InferError> {
    let gamma = query.gamma.as_ref().ok_or(InferError::MissingGamma)?;
    if !is_probability(gamma) {
        return Err(InferError::GammaOutOfRange);
    }
    let net = ground::ground_spec(spec, n)?;
    let p = query_probability(&net, query)?;
    Ok(p > *gamma)
}

/// P(Q|E) for positive queries on conjunctive propositional specifications
/// (and, by dualization, negative queries on disjunctive ones), computed as
/// a product of root probabilities — no enumeration.
pub fn positive_query_product(
    spec: &RelationalSpec,
    query: &Query,
) -> Result<Rational, InferError> {
    positive_query_product_with_work(spec, query).map(|(p, _)| p)
}

/// As [`positive_query_product`], also reporting the number of
/// (atom, body-literal) visits the closure performed — a machine-checkable
/// witness that the route does polynomial work.
pub fn positive_query_product_with_work(
    spec: &RelationalSpec,
    query: &Query,
) -> Result<(Rational, u64), InferError> {
    let report = validate_spec(spec);
    if !report.is_valid() {
        return Err(InferError::InvalidSpec { report });
    }
    match classify_fragment(spec) {
        FragmentLabel::PropAnd => conjunctive_product(spec, query, false),
        FragmentLabel::PropOr => {
            // Complementation: X ≡ ∨ℓᵢ is equivalent to ¬X ≡ ∧¬ℓᵢ. Reusing
            // each relation name for its own negation turns the spec into a
            // conjunctive one with complemented assessments, and turns
            // all-negative assignments into all-positive ones.
            let dual = RelationalSpec {
                relations: spec.relations.clone(),
                entries: spec
                    .entries
                    .iter()
                    .map(|e| match e {
                        AxiomOrAssessment::Assessment { relation, prob } => {
                            AxiomOrAssessment::Assessment {
                                relation: relation.clone(),
                                prob: Rational::one() - prob,
                            }
                        }
                        AxiomOrAssessment::Definition { head, head_vars, body } => {
                            AxiomOrAssessment::Definition {
                                head: head.clone(),
                                head_vars: head_vars.clone(),
                                body: dualize(body),
                            }
                        }
                    })
                    .collect(),
            };
            let flip = |m: &BTreeMap<GroundAtom, bool>| -> Result<Vec<(GroundAtom, bool)>, InferError> {
                m.iter()
                    .map(|(a, v)| {
                        if *v {
                            Err(InferError::PositiveAssignment { atom: a.clone() })
                        } else {
                            Ok((a.clone(), true))
                        }
                    })
                    .collect()
            };
            let flipped = Query::new(flip(&query.q)?, flip(&query.e)?, query.gamma.clone())
                .expect("flipping values cannot introduce conflicts");
            conjunctive_product(&dual, &flipped, true)
        }
        found => Err(InferError::NotInFragment { found }),
    }
}

/// Disjunction-of-literals body to its complement, a conjunction of the
/// same literal list read under complemented semantics.
fn dualize(f: &Formula) -> Formula {
    match f {
        Formula::Or(cs) => Formula::And(cs.iter().map(dualize).collect()),
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        other => other.clone(),
    }
}

fn conjunctive_product(
    spec: &RelationalSpec,
    query: &Query,
    dualized: bool,
) -> Result<(Rational, u64), InferError> {
    let mut work = 0u64;
    let p_qe = closure_product(spec, &query.combined(), dualized, &mut work)?;
    if query.e.is_empty() {
        return Ok((p_qe, work));
    }
    let p_e = closure_product(spec, &query.e, dualized, &mut work)?;
    if p_e.is_zero() {
        return Err(InferError::ZeroEvidence);
    }
    Ok((p_qe / p_e, work))
}

/// P(all atoms in `fixed` true) on a conjunctive propositional spec: force
/// every fixed atom true, propagate upward (a true defined atom forces each
/// of its conjuncts), and multiply the probabilities of the roots that end
/// up forced. A root forced both ways, or a `False` conjunct, makes the
/// probability zero.
fn closure_product(
    spec: &RelationalSpec,
    fixed: &BTreeMap<GroundAtom, bool>,
    dualized: bool,
    work: &mut u64,
) -> Result<Rational, InferError> {
    let mut forced_roots: BTreeMap<String, bool> = BTreeMap::new();
    let mut forced_defined: BTreeMap<String, bool> = BTreeMap::new();
    let mut stack: Vec<String> = Vec::new();

    for (atom, &v) in fixed {
        if spec.arity_of(&atom.relation) != Some(atom.args.len()) {
            return Err(InferError::UnknownAtom { atom: atom.clone() });
        }
        if !v {
            return Err(if dualized {
                // Callers flipped values before dualizing, so a false here
                // is a positive assignment in the caller's terms.
                InferError::PositiveAssignment { atom: atom.clone() }
            } else {
                InferError::NegativeAssignment { atom: atom.clone() }
            });
        }
        stack.push(atom.relation.clone());
    }

    while let Some(name) = stack.pop() {
        if spec.is_root(&name) {
            if forced_roots.insert(name.clone(), true) == Some(false) {
                return Ok(Rational::zero());
            }
            continue;
        }
        if forced_defined.insert(name.clone(), true).is_some() {
            continue;
        }
        let Some((_, body)) = spec.definition(&name) else {
            return Err(InferError::UnknownAtom { atom: GroundAtom::prop(name) });
        };
        // Walk the conjunction tree; each literal is one unit of work.
        let mut literals: Vec<&Formula> = vec![body];
        while let Some(f) = literals.pop() {
            match f {
                Formula::And(cs) => literals.extend(cs.iter()),
                Formula::True => *work += 1,
                Formula::False => return Ok(Rational::zero()),
                Formula::Atom(conjunct, _) => {
                    *work += 1;
                    stack.push(conjunct.clone());
                }
                Formula::Not(inner) => {
                    *work += 1;
                    let Formula::Atom(root, _) = &**inner else {
                        unreachable!("fragment check admits negation only on atoms")
                    };
                    if forced_roots.insert(root.clone(), false) == Some(true) {
                        return Ok(Rational::zero());
                    }
                }
                _ => unreachable!("fragment check admits only conjunctions of literals"),
            }
        }
    }

    let mut p = Rational::one();
    for (root, v) in &forced_roots {
        let alpha = spec.assessment(root).expect("forced roots are assessed");
        p *= if *v { alpha.clone() } else { Rational::one() - alpha };
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_query, parse_spec};
    use crate::model::rat;

    /// The two-layer CPT encoding of a single parent Y and child X with
    /// P(X=1|Y=0)=1/5, P(X=1|Y=1)=7/10, P(Y=1)=1/3.
    pub(crate) const FIG2: &str = "\
relation y/0.
relation z0/0.
relation z1/0.
relation x/0.
prob y = 1/3.
prob z0 = 1/5.
prob z1 = 7/10.
def x := !y & z0 | y & z1.
";

    fn net(text: &str, n: u32) -> GroundNetwork {
        ground::ground_spec(&parse_spec(text).unwrap(), n).unwrap()
    }

    fn assignment(pairs: &[(&str, bool)]) -> BTreeMap<GroundAtom, bool> {
        pairs
            .iter()
            .map(|(n, v)| (GroundAtom::prop(*n), *v))
            .collect()
    }

    #[test]
    fn joint_probability_multiplies_roots_and_checks_axioms() {
        let net = net(FIG2, 1);
        let a = assignment(&[("y", true), ("z0", false), ("z1", true), ("x", true)]);
        assert_eq!(joint_probability(&net, &a).unwrap(), rat(14, 75));
        let bad = assignment(&[("y", true), ("z0", false), ("z1", true), ("x", false)]);
        assert_eq!(joint_probability(&net, &bad).unwrap(), rat(0, 1));
        let partial = assignment(&[("y", true)]);
        assert!(matches!(
            joint_probability(&net, &partial),
            Err(InferError::PartialAssignment { .. })
        ));
        // Empty network, empty assignment.
        let empty = GroundNetwork { n: 1, nodes: BTreeMap::new() };
        assert_eq!(joint_probability(&empty, &BTreeMap::new()).unwrap(), rat(1, 1));
    }

    #[test]
    fn fig2_marginal() {
        let net = net(FIG2, 1);
        let q = parse_query("x=1").unwrap();
        assert_eq!(query_probability(&net, &q).unwrap(), rat(11, 30));
    }

    #[test]
    fn friends_queries() {
        let net = net(crate::ground::tests::FRIENDS, 2);
        let q = parse_query("friends(1,2)=1").unwrap();
        assert_eq!(query_probability(&net, &q).unwrap(), rat(17, 125));
        let q = parse_query("friends(1,1)=1").unwrap();
        assert_eq!(query_probability(&net, &q).unwrap(), rat(1, 1));
    }

    #[test]
    fn conditioning_and_zero_evidence() {
        let net = net(FIG2, 1);
        // P(x=1 | y=1) = P(z1) = 7/10.
        let q = parse_query("x=1 | y=1").unwrap();
        assert_eq!(query_probability(&net, &q).unwrap(), rat(7, 10));
        // Evidence with probability zero: x and !x simultaneously.
        let q = parse_query("y=1 | x=1, x=0").unwrap_err();
        // (conflicting evidence is already a parse-level conflict)
        assert!(q.msg.contains("conflicting"));
        // A structurally possible but zero-probability evidence: make z1
        // certain and require x=0 given y=1.
        let spec = parse_spec(&FIG2.replace("prob z1 = 7/10.", "prob z1 = 1.")).unwrap();
        let net = ground::ground_spec(&spec, 1).unwrap();
        let q = parse_query("z0=1 | x=0, y=1").unwrap();
        assert_eq!(query_probability(&net, &q), Err(InferError::ZeroEvidence));
    }

    #[test]
    fn threshold_decisions_are_strict() {
        let spec = parse_spec(FIG2).unwrap();
        let q = parse_query("x=1; gamma=1/3").unwrap();
        assert!(decide_threshold(&spec, 1, &q).unwrap());
        let spec2 = parse_spec(crate::ground::tests::FRIENDS).unwrap();
        let q = parse_query("friends(1,2)=1; gamma=17/125").unwrap();
        assert!(!decide_threshold(&spec2, 2, &q).unwrap());
        let q = parse_query("friends(1,1)=1; gamma=1").unwrap();
        assert!(!decide_threshold(&spec2, 2, &q).unwrap());
        let q = parse_query("friends(1,1)=1").unwrap();
        assert_eq!(decide_threshold(&spec2, 2, &q), Err(InferError::MissingGamma));
    }

    #[test]
    fn root_cap_is_enforced() {
        let mut text = String::new();
        for i in 0..6 {
            text.push_str(&format!("relation r{i}/0. prob r{i} = 1/2.\n"));
        }
        text.push_str("relation all/0.\ndef all := r0 & r1 & r2 & r3 & r4 & r5.\n");
        let net = net(&text, 1);
        let q = parse_query("all=1").unwrap();
        assert_eq!(
            query_probability_capped(&net, &q, 5),
            Err(InferError::RootCapExceeded { roots: 6, cap: 5 })
        );
        assert_eq!(query_probability_capped(&net, &q, 6).unwrap(), rat(1, 64));
    }

    #[test]
    fn pruning_keeps_enumeration_small() {
        // 30 independent coins would blow the cap; a query about one of
        // them prunes the rest away.
        let mut text = String::new();
        for i in 0..30 {
            text.push_str(&format!("relation c{i}/0. prob c{i} = 1/3.\n"));
        }
        let net = net(&text, 1);
        let q = parse_query("c17=1").unwrap();
        assert_eq!(query_probability(&net, &q).unwrap(), rat(1, 3));
    }

    #[test]
    fn clamped_evidence_releases_guarded_branches() {
        // x ≡ (g ∧ y1) ∨ (¬g ∧ y2): once g is clamped false, the y1 branch
        // folds away, so the enumeration sees a single free root even under
        // a cap of one.
        let text = "\
relation g/0.
relation y1/0.
relation y2/0.
relation x/0.
prob g = 1/2.
prob y1 = 1/3.
prob y2 = 1/4.
def x := g & y1 | !g & y2.
";
        let net = net(text, 1);
        let q = parse_query("x=1 | g=0").unwrap();
        assert_eq!(query_probability_capped(&net, &q, 1).unwrap(), rat(1, 4));
        let q = parse_query("x=1 | g=1").unwrap();
        assert_eq!(query_probability_capped(&net, &q, 1).unwrap(), rat(1, 3));
        // Clamping x itself determines nothing, so both branches stay open.
        let q = parse_query("x=1").unwrap();
        assert_eq!(
            query_probability_capped(&net, &q, 2),
            Err(InferError::RootCapExceeded { roots: 3, cap: 2 })
        );
        assert_eq!(query_probability_capped(&net, &q, 3).unwrap(), rat(7, 24));
    }

    #[test]
    fn determined_values_propagate_through_layers() {
        // top ≡ mid ∧ extra, mid ≡ ¬g: evidence on g determines mid, which
        // folds into top. Fixing top against the determined chain yields an
        // exact zero rather than an enumeration.
        let text = "\
relation g/0.
relation extra/0.
relation mid/0.
relation top/0.
prob g = 1/2.
prob extra = 1/5.
def mid := !g.
def top := mid & extra.
";
        let net = net(text, 1);
        // g=1 forces mid=0 forces top=0: the conditional is exactly zero,
        // and even a zero cap suffices (no free roots remain).
        let q = parse_query("top=1 | g=1").unwrap();
        assert_eq!(query_probability_capped(&net, &q, 0).unwrap(), rat(0, 1));
        // Evidence mid=0 has probability 1/2; top=1 is then impossible. The
        // numerator folds to zero with nothing to enumerate; the denominator
        // still enumerates g (values flow from parents to children only, so
        // mid=0 does not pin g backwards).
        let q = parse_query("top=1 | mid=0").unwrap();
        assert_eq!(query_probability_capped(&net, &q, 1).unwrap(), rat(0, 1));
        // Conflicting fixed values across layers: P(mid=1, g=1) = 0, so as
        // evidence it is rejected.
        let q = parse_query("extra=1 | mid=1, g=1").unwrap();
        assert_eq!(
            query_probability_capped(&net, &q, 4),
            Err(InferError::ZeroEvidence)
        );
    }

    const CHAIN: &str = "\
relation a/0.
relation b/0.
relation c/0.
relation d/0.
prob a = 1/2.
prob b = 1/3.
def c := a & b.
def d := c & a.
";

    #[test]
    fn conjunctive_fast_path_matches_enumeration() {
        let spec = parse_spec(CHAIN).unwrap();
        let q = parse_query("c=1").unwrap();
        assert_eq!(positive_query_product(&spec, &q).unwrap(), rat(1, 6));
        let q = parse_query("d=1").unwrap();
        assert_eq!(positive_query_product(&spec, &q).unwrap(), rat(1, 6));
        let q = parse_query("a=1").unwrap();
        assert_eq!(positive_query_product(&spec, &q).unwrap(), rat(1, 2));
        // Conditional: P(d=1 | c=1) = P(d,c)/P(c) = (1/6)/(1/6) = 1.
        let q = parse_query("d=1 | c=1").unwrap();
        assert_eq!(positive_query_product(&spec, &q).unwrap(), rat(1, 1));
        // Agreement with the enumerator.
        let gnet = net(CHAIN, 1);
        for text in ["c=1", "d=1", "c=1 | b=1", "d=1, c=1"] {
            let q = parse_query(text).unwrap();
            assert_eq!(
                positive_query_product(&spec, &q).unwrap(),
                query_probability(&gnet, &q).unwrap(),
                "query {text}"
            );
        }
    }

    #[test]
    fn negated_roots_in_conjunctions() {
        let spec = parse_spec(
            "relation a/0. relation b/0. relation c/0.\n\
             prob a = 1/2. prob b = 1/3.\n\
             def c := a & !b.",
        )
        .unwrap();
        let q = parse_query("c=1").unwrap();
        assert_eq!(positive_query_product(&spec, &q).unwrap(), rat(1, 3));
        // Contradiction: b forced true by evidence, false by the body.
        let q = parse_query("c=1 | b=1").unwrap();
        assert_eq!(positive_query_product(&spec, &q).unwrap(), rat(0, 1));
    }

    #[test]
    fn disjunctive_dual_route() {
        let spec = parse_spec(
            "relation a/0. relation b/0. relation c/0.\n\
             prob a = 1/2. prob b = 1/3.\n\
             def c := a | b.",
        )
        .unwrap();
        // P(c=0) = P(¬a)P(¬b) = (1/2)(2/3) = 1/3.
        let q = parse_query("c=0").unwrap();
        assert_eq!(positive_query_product(&spec, &q).unwrap(), rat(1, 3));
        let gnet = net(
            "relation a/0. relation b/0. relation c/0.\n\
             prob a = 1/2. prob b = 1/3.\n\
             def c := a | b.",
            1,
        );
        assert_eq!(
            positive_query_product(&spec, &q).unwrap(),
            query_probability(&gnet, &q).unwrap()
        );
        // Positive assignment on the disjunctive side is out of scope.
        let q = parse_query("c=1").unwrap();
        assert!(matches!(
            positive_query_product(&spec, &q),
            Err(InferError::PositiveAssignment { .. })
        ));
    }

    #[test]
    fn out_of_fragment_is_reported() {
        let spec = parse_spec(
            "relation a/0. relation b/0. relation c/0.\n\
             prob a = 1/2. prob b = 1/3.\n\
             def c := a & b | a.",
        )
        .unwrap();
        let q = parse_query("c=1").unwrap();
        assert!(matches!(
            positive_query_product(&spec, &q),
            Err(InferError::NotInFragment { .. })
        ));
    }

    #[test]
    fn negative_assignment_rejected_on_and_path() {
        let spec = parse_spec(CHAIN).unwrap();
        let q = parse_query("c=0").unwrap();
        assert!(matches!(
            positive_query_product(&spec, &q),
            Err(InferError::NegativeAssignment { .. })
        ));
    }

    #[test]
    fn work_counter_is_linear_in_chain_depth() {
        let mut sizes = Vec::new();
        for depth in [4usize, 8, 16, 32] {
            let mut text = String::from("relation p0/0. prob p0 = 1/2.\n");
            for i in 1..=depth {
                text.push_str(&format!("relation p{i}/0. def p{i} := p{}.\n", i - 1));
            }
            let spec = parse_spec(&text).unwrap();
            let q = parse_query(&format!("p{depth}=1")).unwrap();
            let (p, work) = positive_query_product_with_work(&spec, &q).unwrap();
            assert_eq!(p, rat(1, 2));
            sizes.push((depth as u64, work));
        }
        for (depth, work) in sizes {
            assert!(work <= 4 * depth, "work {work} for depth {depth}");
        }
    }
}
