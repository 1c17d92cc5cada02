//! Grounding: expand a relational specification over the finite domain
//! `{1..N}` into a propositional network, and prune ground networks to the
//! ancestors that a query actually depends on.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::model::{
    render_rational, AxiomOrAssessment, Formula, GroundAtom, GroundNetwork, GroundNode, Query,
    RelationalSpec, Term, ValidationReport,
};

/// Assignment of individuals to the logvars free in a formula being
/// grounded.
pub type Binding = BTreeMap<String, u32>;

/// Default ceiling on ground-network size. `N^arity` grows quickly; the cap
/// turns a runaway grounding into an error instead of an OOM.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GroundError {
    #[error("logvar {var} is not bound and not quantified")]
    UnboundLogvar { var: String },
    #[error("invalid specification:\n{report}")]
    InvalidSpec { report: ValidationReport },
    #[error("grounding would create {count} nodes, above the cap of {cap}")]
    TooManyNodes { count: u128, cap: usize },
    #[error("query atom {atom} is not a node of the network")]
    UnknownAtom { atom: GroundAtom },
}

/// Ground one body under a binding of its free logvars.
///
/// Quantifiers expand over `1..=N` (∃ to an `Or`, ∀ to an `And`) with
/// children ordered by individual index; at `N = 1` the single child is
/// produced directly, without a one-element connective. Ground equalities
/// fold to `True`/`False`; the constants are kept in place rather than
/// absorbed into the surrounding connective, so a definition like
/// `friends(x,y) ≡ (x=y) ∨ …` grounds at `x=y=1` to `True ∨ …` and the node
/// keeps its remaining parents.
pub fn ground_formula(
    body: &Formula,
    binding: &Binding,
    n: u32,
) -> Result<Formula, GroundError> {
    assert!(n >= 1, "domain must have at least one individual");
    let mut binding = binding.clone();
    go(body, &mut binding, n)
}

fn resolve(t: &Term, binding: &Binding) -> Result<u32, GroundError> {
    match t {
        Term::Ind(i) => Ok(*i),
        Term::Var(v) => binding
            .get(v)
            .copied()
            .ok_or_else(|| GroundError::UnboundLogvar { var: v.clone() }),
    }
}

fn go(f: &Formula, binding: &mut Binding, n: u32) -> Result<Formula, GroundError> {
    Ok(match f {
        Formula::True => Formula::True,
        Formula::False => Formula::False,
        Formula::Atom(name, args) => {
            let args = args
                .iter()
                .map(|t| resolve(t, binding).map(Term::Ind))
                .collect::<Result<Vec<_>, _>>()?;
            Formula::Atom(name.clone(), args)
        }
        Formula::Eq(a, b) => {
            if resolve(a, binding)? == resolve(b, binding)? {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Not(inner) => Formula::not(go(inner, binding, n)?),
        Formula::And(cs) => Formula::And(
            cs.iter().map(|c| go(c, binding, n)).collect::<Result<_, _>>()?,
        ),
        Formula::Or(cs) => Formula::Or(
            cs.iter().map(|c| go(c, binding, n)).collect::<Result<_, _>>()?,
        ),
        Formula::Implies(a, b) => Formula::Implies(
            Box::new(go(a, binding, n)?),
            Box::new(go(b, binding, n)?),
        ),
        Formula::Iff(a, b) => {
            Formula::Iff(Box::new(go(a, binding, n)?), Box::new(go(b, binding, n)?))
        }
        Formula::ForAll(v, inner) | Formula::Exists(v, inner) => {
            let saved = binding.get(v).copied();
            let mut children = Vec::with_capacity(n as usize);
            for i in 1..=n {
                binding.insert(v.clone(), i);
                children.push(go(inner, binding, n)?);
            }
            match saved {
                Some(old) => binding.insert(v.clone(), old),
                None => binding.remove(v),
            };
            if children.len() == 1 {
                children.pop().unwrap()
            } else if matches!(f, Formula::ForAll(..)) {
                Formula::And(children)
            } else {
                Formula::Or(children)
            }
        }
    })
}

/// All argument tuples over `1..=n` of the given arity, in ascending
/// lexicographic order (arity 0 yields the single empty tuple).
pub fn tuples(n: u32, arity: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        let mut next = Vec::with_capacity(out.len() * n as usize);
        for prefix in &out {
            for i in 1..=n {
                let mut t = prefix.clone();
                t.push(i);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Ground a specification over `{1..N}` with the default node cap.
pub fn ground_spec(spec: &RelationalSpec, n: u32) -> Result<GroundNetwork, GroundError> {
    ground_spec_capped(spec, n, DEFAULT_NODE_CAP)
}

/// Ground a specification over `{1..N}`: one node per grounding of each
/// relation. Assessed relations become roots sharing the assessed
/// probability; defined relations get their bodies grounded per tuple.
pub fn ground_spec_capped(
    spec: &RelationalSpec,
    n: u32,
    cap: usize,
) -> Result<GroundNetwork, GroundError> {
    assert!(n >= 1, "domain must have at least one individual");
    let report = crate::model::validate_spec(spec);
    if !report.is_valid() {
        return Err(GroundError::InvalidSpec { report });
    }
    let mut total: u128 = 0;
    for r in &spec.relations {
        total += (n as u128).checked_pow(r.arity as u32).unwrap_or(u128::MAX);
    }
    if total > cap as u128 {
        return Err(GroundError::TooManyNodes { count: total, cap });
    }
    let mut nodes = BTreeMap::new();
    for entry in &spec.entries {
        match entry {
            AxiomOrAssessment::Assessment { relation, prob } => {
                let arity = spec.arity_of(relation).unwrap();
                for args in tuples(n, arity) {
                    nodes.insert(
                        GroundAtom::new(relation.clone(), args),
                        GroundNode::Root(prob.clone()),
                    );
                }
            }
            AxiomOrAssessment::Definition { head, head_vars, body } => {
                for args in tuples(n, head_vars.len()) {
                    let binding: Binding = head_vars
                        .iter()
                        .cloned()
                        .zip(args.iter().copied())
                        .collect();
                    let ground_body = ground_formula(body, &binding, n)?;
                    nodes.insert(
                        GroundAtom::new(head.clone(), args),
                        GroundNode::Defined(ground_body),
                    );
                }
            }
        }
    }
    Ok(GroundNetwork { n, nodes })
}

/// The induced subnetwork on the ancestor closure of the query/evidence
/// atoms. Inference over the result equals inference over the full network:
/// every node outside the closure is barren (sums out to one).
pub fn relevant_subnetwork(
    net: &GroundNetwork,
    query: &Query,
) -> Result<GroundNetwork, GroundError> {
    let mut frontier: VecDeque<GroundAtom> = VecDeque::new();
    let mut seen: BTreeSet<GroundAtom> = BTreeSet::new();
    for atom in query.q.keys().chain(query.e.keys()) {
        if !net.nodes.contains_key(atom) {
            return Err(GroundError::UnknownAtom { atom: atom.clone() });
        }
        if seen.insert(atom.clone()) {
            frontier.push_back(atom.clone());
        }
    }
    while let Some(atom) = frontier.pop_front() {
        for parent in net.parents_of(&atom) {
            if !net.nodes.contains_key(&parent) {
                return Err(GroundError::UnknownAtom { atom: parent });
            }
            if seen.insert(parent.clone()) {
                frontier.push_back(parent);
            }
        }
    }
    let nodes = net
        .nodes
        .iter()
        .filter(|(a, _)| seen.contains(a))
        .map(|(a, n)| (a.clone(), n.clone()))
        .collect();
    Ok(GroundNetwork { n: net.n, nodes })
}

/// Render a ground network in the `.gbn` text format: one line per node,
/// `root atom p/q` or `def atom := ground-formula`.
pub fn render_gbn(net: &GroundNetwork) -> String {
    let mut out = String::new();
    for (atom, node) in &net.nodes {
        match node {
            GroundNode::Root(p) => {
                out.push_str(&format!("root {atom} {}\n", render_rational(p)));
            }
            GroundNode::Defined(body) => {
                let mut line = format!("def {atom} := ");
                crate::lang::render_ground_formula(body, &mut line);
                out.push_str(&line);
                out.push('\n');
            }
        }
    }
    out
}
