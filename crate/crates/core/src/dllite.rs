//! Lifted inference for description-logic-shaped specifications.
//!
//! The fragment handled here has unary defined concepts whose bodies are
//! conjunctions of unary atoms, negated *primitive* (assessed) unary atoms,
//! and unqualified existential role restrictions `exists y: r(x, y)` /
//! `exists y: r(y, x)`, over assessed binary relations (roles).
//!
//! Positive queries in this fragment never need the ground network:
//! normalization names each direction of each role's existential
//! (`e_r(x) ≡ ∃y r(x,y)` and its inverse), closing a query under the
//! definitions then yields per-individual *demands* — "row a must contain a
//! 1", "column b must contain a 1" — on each role's grounding matrix, and
//! the probability that a product measure on the matrix satisfies all
//! demands is a weighted edge-cover count on a four-layer graph
//! ([`crate::edgecover`]). Runtime is polynomial in the domain size.
//!
//! The same demand view solves most-probable-explanation queries: each
//! role's matrix is filled with a cheapest demand-satisfying pattern
//! (everything, when `α ≥ 1/2`; a minimum edge cover otherwise), and
//! unforced assessed atoms take their majority value.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Zero};

use crate::edgecover::{partition_function, ClassBGraph, EdgeCoverError};
use crate::model::{
    classify_fragment, rat, validate_spec, AxiomOrAssessment, Formula, FragmentLabel,
    GroundAtom, Query, Rational, Relation, RelationalSpec, Term, ValidationReport,
};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DlliteError {
    #[error("specification is not valid:\n{report}")]
    InvalidSpec { report: ValidationReport },
    #[error("specification is outside the supported fragment (classified as {found})")]
    NotInFragment { found: FragmentLabel },
    #[error("atom {atom} is not part of the ground network")]
    UnknownAtom { atom: GroundAtom },
    #[error("atom {atom} cannot be assigned false here; only assessed unary atoms admit negative values")]
    NegativeAssignment { atom: GroundAtom },
    #[error("the evidence has probability zero; conditioning is undefined")]
    ZeroEvidence,
    #[error(transparent)]
    EdgeCover(#[from] EdgeCoverError),
}

/// One role of a normalized specification and the names of the two aux
/// concepts standing for its existentials.
#[derive(Clone, Debug, PartialEq)]
pub struct RoleInfo {
    pub role: String,
    pub alpha: Rational,
    /// Name of the concept `∃y role(x, y)`.
    pub exists_fwd: String,
    /// Name of the concept `∃y role(y, x)`.
    pub exists_inv: String,
}

/// A specification in the fragment with every role existential named: for
/// each role `r` the relations `e_r(x) ≡ ∃y r(x,y)` and
/// `e_r_inv(x) ≡ ∃y r(y,x)` are declared and defined, and user bodies
/// mention them instead of quantifiers. The normalized spec grounds to a
/// network with the same distribution over the original atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedDlliteSpec {
    pub spec: RelationalSpec,
    pub roles: Vec<RoleInfo>,
}

impl NormalizedDlliteSpec {
    pub fn role_info(&self, role: &str) -> Option<&RoleInfo> {
        self.roles.iter().find(|r| r.role == role)
    }

    /// If `name` is an aux existential concept, the role it belongs to and
    /// whether it is the inverse direction.
    fn aux_of(&self, name: &str) -> Option<(&RoleInfo, bool)> {
        self.roles.iter().find_map(|r| {
            if r.exists_fwd == name {
                Some((r, false))
            } else if r.exists_inv == name {
                Some((r, true))
            } else {
                None
            }
        })
    }

    /// Whether `name` is an assessed unary relation (the only atoms that
    /// may be assigned false).
    fn is_primitive_unary(&self, name: &str) -> bool {
        self.spec.arity_of(name) == Some(1) && self.spec.is_root(name)
    }
}

fn fresh_name(base: String, taken: &BTreeSet<String>) -> String {
    let mut name = base;
    while taken.contains(&name) {
        name.push('_');
    }
    name
}

/// Replace `exists y: r(x,y)` / `exists y: r(y,x)` conjuncts by the aux
/// concept atoms. Only shapes the fragment admits are rewritten.
fn rewrite_body(f: &Formula, aux: &BTreeMap<String, (String, String)>) -> Formula {
    match f {
        Formula::And(parts) => Formula::And(parts.iter().map(|p| rewrite_body(p, aux)).collect()),
        Formula::Exists(v, inner) => {
            if let Formula::Atom(rel, args) = &**inner {
                if let Some((fwd, inv)) = aux.get(rel) {
                    if args.len() == 2 {
                        let bound = Term::Var(v.clone());
                        if args[1] == bound && args[0] != bound {
                            return Formula::Atom(fwd.clone(), vec![args[0].clone()]);
                        }
                        if args[0] == bound && args[1] != bound {
                            return Formula::Atom(inv.clone(), vec![args[1].clone()]);
                        }
                    }
                }
            }
            f.clone()
        }
        other => other.clone(),
    }
}

/// Validate, check the fragment, and name every role existential.
pub fn normalize(spec: &RelationalSpec) -> Result<NormalizedDlliteSpec, DlliteError> {
    let report = validate_spec(spec);
    if !report.is_valid() {
        return Err(DlliteError::InvalidSpec { report });
    }
    let label = classify_fragment(spec);
    if !matches!(
        label,
        FragmentLabel::DLLiteNF | FragmentLabel::DLLiteNFWithPrimitiveNegation
    ) {
        return Err(DlliteError::NotInFragment { found: label });
    }

    let mut taken: BTreeSet<String> = spec.relations.iter().map(|r| r.name.clone()).collect();
    let mut roles = Vec::new();
    let mut aux: BTreeMap<String, (String, String)> = BTreeMap::new();
    for rel in &spec.relations {
        if rel.arity != 2 {
            continue;
        }
        let alpha = spec
            .assessment(&rel.name)
            .expect("fragment check ensures roles are assessed")
            .clone();
        let fwd = fresh_name(format!("e_{}", rel.name), &taken);
        taken.insert(fwd.clone());
        let inv = fresh_name(format!("e_{}_inv", rel.name), &taken);
        taken.insert(inv.clone());
        aux.insert(rel.name.clone(), (fwd.clone(), inv.clone()));
        roles.push(RoleInfo {
            role: rel.name.clone(),
            alpha,
            exists_fwd: fwd,
            exists_inv: inv,
        });
    }

    let mut relations = spec.relations.clone();
    let mut entries: Vec<AxiomOrAssessment> = spec
        .entries
        .iter()
        .map(|e| match e {
            AxiomOrAssessment::Definition { head, head_vars, body } => {
                AxiomOrAssessment::Definition {
                    head: head.clone(),
                    head_vars: head_vars.clone(),
                    body: rewrite_body(body, &aux),
                }
            }
            assessment => assessment.clone(),
        })
        .collect();
    for info in &roles {
        let role_atom = |first: Term, second: Term| {
            Formula::Atom(info.role.clone(), vec![first, second])
        };
        relations.push(Relation::new(info.exists_fwd.clone(), 1));
        entries.push(AxiomOrAssessment::Definition {
            head: info.exists_fwd.clone(),
            head_vars: vec!["x".into()],
            body: Formula::Exists(
                "y".into(),
                Box::new(role_atom(Term::Var("x".into()), Term::Var("y".into()))),
            ),
        });
        relations.push(Relation::new(info.exists_inv.clone(), 1));
        entries.push(AxiomOrAssessment::Definition {
            head: info.exists_inv.clone(),
            head_vars: vec!["x".into()],
            body: Formula::Exists(
                "y".into(),
                Box::new(role_atom(Term::Var("y".into()), Term::Var("x".into()))),
            ),
        });
    }
    Ok(NormalizedDlliteSpec {
        spec: RelationalSpec { relations, entries },
        roles,
    })
}

/// Forced values and per-role demands after closing a set of assigned
/// atoms under the (conjunctive) definitions.
struct Closure {
    forced: BTreeMap<GroundAtom, bool>,
    /// Role → individuals whose row must contain a 1.
    demands_fwd: BTreeMap<String, BTreeSet<u32>>,
    /// Role → individuals whose column must contain a 1.
    demands_inv: BTreeMap<String, BTreeSet<u32>>,
    /// Role → groundings forced true by explicit atoms.
    forced_roles: BTreeMap<String, BTreeSet<(u32, u32)>>,
    /// Some atom was forced both ways: the assigned event is impossible.
    conflicted: bool,
}

fn close(
    nspec: &NormalizedDlliteSpec,
    n: u32,
    atoms: impl IntoIterator<Item = (GroundAtom, bool)>,
) -> Result<Closure, DlliteError> {
    let mut cl = Closure {
        forced: BTreeMap::new(),
        demands_fwd: BTreeMap::new(),
        demands_inv: BTreeMap::new(),
        forced_roles: BTreeMap::new(),
        conflicted: false,
    };
    let mut queue: VecDeque<(GroundAtom, bool)> = atoms.into_iter().collect();
    while let Some((atom, value)) = queue.pop_front() {
        let arity = nspec
            .spec
            .arity_of(&atom.relation)
            .ok_or_else(|| DlliteError::UnknownAtom { atom: atom.clone() })?;
        if atom.args.len() != arity || atom.args.iter().any(|&a| a == 0 || a > n) {
            return Err(DlliteError::UnknownAtom { atom });
        }
        if !value && !nspec.is_primitive_unary(&atom.relation) {
            return Err(DlliteError::NegativeAssignment { atom });
        }
        match cl.forced.get(&atom) {
            Some(&prev) => {
                if prev != value {
                    cl.conflicted = true;
                }
                continue;
            }
            None => {
                cl.forced.insert(atom.clone(), value);
            }
        }
        if arity == 2 {
            cl.forced_roles
                .entry(atom.relation.clone())
                .or_default()
                .insert((atom.args[0], atom.args[1]));
            continue;
        }
        if let Some((info, is_inv)) = nspec.aux_of(&atom.relation) {
            let side = if is_inv { &mut cl.demands_inv } else { &mut cl.demands_fwd };
            side.entry(info.role.clone()).or_default().insert(atom.args[0]);
            continue;
        }
        if let Some((head_vars, body)) = nspec.spec.definition(&atom.relation) {
            // A true defined concept forces every conjunct of its body.
            let var = &head_vars[0];
            let ind = atom.args[0];
            let mut conjuncts = vec![body];
            while let Some(f) = conjuncts.pop() {
                match f {
                    Formula::And(parts) => conjuncts.extend(parts.iter()),
                    Formula::Atom(name, args) => {
                        debug_assert_eq!(args.len(), 1);
                        debug_assert_eq!(args[0], Term::Var(var.clone()));
                        queue.push_back((GroundAtom::new(name.clone(), vec![ind]), true));
                    }
                    Formula::Not(inner) => {
                        if let Formula::Atom(name, _) = &**inner {
                            queue.push_back((GroundAtom::new(name.clone(), vec![ind]), false));
                        }
                    }
                    _ => unreachable!("fragment bodies are conjunctions of unary literals"),
                }
            }
        }
        // Assessed unary atoms carry no structure to propagate.
    }
    Ok(cl)
}

/// Probability that all demands on one role hold, given `forced` groundings
/// already hold: the demand structure is a four-layer edge-cover instance
/// with fugacity α/(1−α), scaled back by (1−α) per matrix cell the demands
/// touch.
fn role_demand_probability(
    alpha: &Rational,
    n: u32,
    demands_fwd: &BTreeSet<u32>,
    demands_inv: &BTreeSet<u32>,
    forced: &BTreeSet<(u32, u32)>,
) -> Result<Rational, DlliteError> {
    let mut d_fwd = demands_fwd.clone();
    let mut d_inv = demands_inv.clone();
    for &(a, b) in forced {
        d_fwd.remove(&a);
        d_inv.remove(&b);
    }
    let forced_factor = if forced.is_empty() {
        Rational::one()
    } else {
        num_traits::pow::pow(alpha.clone(), forced.len())
    };
    if forced_factor.is_zero() {
        return Ok(Rational::zero());
    }
    let gamma = if alpha.is_zero() {
        if d_fwd.is_empty() && d_inv.is_empty() {
            Rational::one()
        } else {
            Rational::zero()
        }
    } else if alpha.is_one() {
        Rational::one()
    } else {
        let one_minus = Rational::one() - alpha;
        let lambda = alpha / &one_minus;
        let cb = ClassBGraph::new(
            (n as usize) - d_inv.len(),
            d_fwd.len(),
            d_inv.len(),
            (n as usize) - d_fwd.len(),
        );
        let z = partition_function(&cb, &lambda)?;
        z * num_traits::pow::pow(one_minus, cb.layer_edge_count())
    };
    Ok(forced_factor * gamma)
}

/// Probability of the closed event: assessed unary factors times, per
/// role, the forced-grounding factor and the demand probability.
fn closure_probability(
    nspec: &NormalizedDlliteSpec,
    n: u32,
    cl: &Closure,
) -> Result<Rational, DlliteError> {
    if cl.conflicted {
        return Ok(Rational::zero());
    }
    let mut p = Rational::one();
    for (atom, &value) in &cl.forced {
        if nspec.is_primitive_unary(&atom.relation) {
            let alpha = nspec
                .spec
                .assessment(&atom.relation)
                .expect("primitive atoms are assessed");
            p *= if value { alpha.clone() } else { Rational::one() - alpha };
            if p.is_zero() {
                return Ok(p);
            }
        }
    }
    let empty_pairs = BTreeSet::new();
    let empty_inds = BTreeSet::new();
    for info in &nspec.roles {
        let fwd = cl.demands_fwd.get(&info.role).unwrap_or(&empty_inds);
        let inv = cl.demands_inv.get(&info.role).unwrap_or(&empty_inds);
        let forced = cl.forced_roles.get(&info.role).unwrap_or(&empty_pairs);
        if fwd.is_empty() && inv.is_empty() && forced.is_empty() {
            continue;
        }
        p *= role_demand_probability(&info.alpha, n, fwd, inv, forced)?;
        if p.is_zero() {
            return Ok(p);
        }
    }
    Ok(p)
}

/// Exact conditional probability `P(Q | E)` without grounding, for queries
/// whose negative assignments touch only assessed unary atoms.
pub fn infer_positive(
    nspec: &NormalizedDlliteSpec,
    n: u32,
    query: &Query,
) -> Result<Rational, DlliteError> {
    let p_e = if query.e.is_empty() {
        Rational::one()
    } else {
        let cl_e = close(nspec, n, query.e.iter().map(|(a, &v)| (a.clone(), v)))?;
        if cl_e.conflicted {
            return Err(DlliteError::ZeroEvidence);
        }
        closure_probability(nspec, n, &cl_e)?
    };
    if p_e.is_zero() {
        return Err(DlliteError::ZeroEvidence);
    }
    let cl_qe = close(
        nspec,
        n,
        query.combined().iter().map(|(a, &v)| (a.clone(), v)),
    )?;
    let p_qe = closure_probability(nspec, n, &cl_qe)?;
    Ok(p_qe / p_e)
}

/// A most probable explanation: a total assignment to the ground network.
#[derive(Clone, Debug, PartialEq)]
pub struct MpeResult {
    pub assignment: BTreeMap<GroundAtom, bool>,
    /// Joint probability of the assignment; 0 when the evidence is
    /// unsatisfiable.
    pub probability: Rational,
    /// False when the evidence closure was contradictory; the assignment
    /// then ignores the evidence and maximizes the unconditioned joint.
    pub evidence_consistent: bool,
}

/// Most probable total assignment consistent with the evidence, in time
/// polynomial in the domain size.
///
/// Assessed atoms not forced by the evidence closure take their majority
/// value. For a role with `α ≥ 1/2` every grounding is set true; otherwise
/// only evidence-forced groundings plus a minimum demand cover are true:
/// remaining row demands pair with remaining column demands in ascending
/// order, and leftovers take individual 1 as partner. Ties are broken
/// deterministically by this construction.
pub fn mpe(
    nspec: &NormalizedDlliteSpec,
    n: u32,
    evidence: &BTreeMap<GroundAtom, bool>,
) -> Result<MpeResult, DlliteError> {
    let mut cl = close(nspec, n, evidence.iter().map(|(a, &v)| (a.clone(), v)))?;
    let evidence_consistent = !cl.conflicted;
    if cl.conflicted {
        // Fall back to the unconditioned optimum, flagged.
        cl = close(nspec, n, std::iter::empty())?;
    }

    let mut assignment: BTreeMap<GroundAtom, bool> = BTreeMap::new();
    let half = rat(1, 2);

    // Roles first: everything else reads off them.
    let empty_pairs = BTreeSet::new();
    let empty_inds = BTreeSet::new();
    for info in &nspec.roles {
        let forced = cl.forced_roles.get(&info.role).unwrap_or(&empty_pairs);
        let mut truthy: BTreeSet<(u32, u32)> = forced.clone();
        if info.alpha >= half {
            for a in 1..=n {
                for b in 1..=n {
                    truthy.insert((a, b));
                }
            }
        } else {
            let mut d_fwd = cl.demands_fwd.get(&info.role).unwrap_or(&empty_inds).clone();
            let mut d_inv = cl.demands_inv.get(&info.role).unwrap_or(&empty_inds).clone();
            for &(a, b) in forced {
                d_fwd.remove(&a);
                d_inv.remove(&b);
            }
            let rows: Vec<u32> = d_fwd.into_iter().collect();
            let cols: Vec<u32> = d_inv.into_iter().collect();
            let paired = rows.len().min(cols.len());
            for i in 0..paired {
                truthy.insert((rows[i], cols[i]));
            }
            for &a in rows.iter().skip(paired) {
                truthy.insert((a, 1));
            }
            for &b in cols.iter().skip(paired) {
                truthy.insert((1, b));
            }
        }
        for a in 1..=n {
            for b in 1..=n {
                assignment.insert(
                    GroundAtom::new(info.role.clone(), vec![a, b]),
                    truthy.contains(&(a, b)),
                );
            }
        }
    }

    // Assessed unary atoms: forced value, else the majority value.
    for rel in &nspec.spec.relations {
        if rel.arity == 1 && nspec.spec.is_root(&rel.name) {
            let alpha = nspec.spec.assessment(&rel.name).unwrap();
            for a in 1..=n {
                let atom = GroundAtom::new(rel.name.clone(), vec![a]);
                let value = cl.forced.get(&atom).copied().unwrap_or(*alpha >= half);
                assignment.insert(atom, value);
            }
        }
    }

    // Defined concepts evaluate bottom-up from their (rewritten) bodies.
    fn value_of(
        nspec: &NormalizedDlliteSpec,
        n: u32,
        assignment: &mut BTreeMap<GroundAtom, bool>,
        atom: &GroundAtom,
    ) -> bool {
        if let Some(&v) = assignment.get(atom) {
            return v;
        }
        let v = if let Some((info, is_inv)) = nspec.aux_of(&atom.relation) {
            let x = atom.args[0];
            (1..=n).any(|y| {
                let pair = if is_inv { vec![y, x] } else { vec![x, y] };
                assignment[&GroundAtom::new(info.role.clone(), pair)]
            })
        } else {
            let (_, body) = nspec
                .spec
                .definition(&atom.relation)
                .expect("non-assessed atoms have definitions");
            let ind = atom.args[0];
            let mut stack = vec![body];
            let mut all = true;
            while let Some(f) = stack.pop() {
                match f {
                    Formula::And(parts) => stack.extend(parts.iter()),
                    Formula::Atom(name, _) => {
                        let sub = GroundAtom::new(name.clone(), vec![ind]);
                        if !value_of(nspec, n, assignment, &sub) {
                            all = false;
                        }
                    }
                    Formula::Not(inner) => {
                        if let Formula::Atom(name, _) = &**inner {
                            let sub = GroundAtom::new(name.clone(), vec![ind]);
                            if value_of(nspec, n, assignment, &sub) {
                                all = false;
                            }
                        }
                    }
                    _ => unreachable!("fragment bodies are conjunctions of unary literals"),
                }
            }
            all
        };
        assignment.insert(atom.clone(), v);
        v
    }

    let defined: Vec<String> = nspec
        .spec
        .relations
        .iter()
        .filter(|r| r.arity == 1 && !nspec.spec.is_root(&r.name))
        .map(|r| r.name.clone())
        .collect();
    for name in defined {
        for a in 1..=n {
            let atom = GroundAtom::new(name.clone(), vec![a]);
            value_of(nspec, n, &mut assignment, &atom);
        }
    }

    // Joint probability: the product over assessed atoms (the defined
    // factors are 1 by construction).
    let probability = if evidence_consistent {
        let mut p = Rational::one();
        for (atom, &value) in &assignment {
            if let Some(alpha) = nspec.spec.assessment(&atom.relation) {
                p *= if value { alpha.clone() } else { Rational::one() - alpha };
            }
        }
        debug_assert!(evidence
            .iter()
            .all(|(atom, &v)| assignment.get(atom) == Some(&v)));
        p
    } else {
        Rational::zero()
    };

    Ok(MpeResult {
        assignment,
        probability,
        evidence_consistent,
    })
}
