//! Encoders into the specification language: conditional probability
//! tables, noisy-or gates, plate models, relational models with skeletons,
//! plus the CNF gadget and the formula/matrix/graph conversions that tie
//! model counting to edge-cover counting.
//!
//! Every encoder is a pure function from a source-model description to a
//! [`RelationalSpec`] (or a [`SpecFragment`] to splice into one). Auxiliary
//! relations get deterministic names — `z_<child>_<bits>` for table rows,
//! `w_<child>_<i>` for inhibitors, `a_<child>_<k>` for lifted rows — and
//! collisions with user relations are reported, never silently repaired.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;

use crate::edgecover::ClassBGraph;
use crate::model::{
    is_probability, parse_rational, rat, render_rational, validate_spec, AxiomOrAssessment,
    Formula, GroundAtom, Rational, Relation, RelationalSpec, Term, ValidationReport,
};

/// Ceiling on the variable count accepted by the brute-force model counters
/// (2^25 assignments).
pub const MODEL_COUNT_VAR_CAP: u32 = 25;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EncodeError {
    #[error("table for {child} is missing the row for parent configuration {bits}")]
    MissingRow { child: String, bits: String },
    #[error("table for {child} has a row of width {got}, expected {want}")]
    RowWidth { child: String, got: usize, want: usize },
    #[error("{context}: {value} is not a probability in [0,1]")]
    NotAProbability { context: String, value: String },
    #[error("{causes} causes but {probs} inhibitor probabilities")]
    LengthMismatch { causes: usize, probs: usize },
    #[error("relation name {name} is declared twice")]
    NameCollision { name: String },
    #[error("parent {parent} of {child} ranges over a plate the child does not carry")]
    PlateNotContained { child: String, parent: String },
    #[error("invalid model: {msg}")]
    InvalidModel { msg: String },
    #[error("skeleton is inconsistent: {msg}")]
    InconsistentSkeleton { msg: String },
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("clause {clause} repeats a literal")]
    RepeatedLiteral { clause: usize },
    #[error("clause {clause} holds literal {lit}, outside the declared variables")]
    BadLiteral { clause: usize, lit: i64 },
    #[error("{vars} variables exceed the brute-force cap of {cap}")]
    TooLarge { vars: u32, cap: u32 },
    #[error("matrix bounds violated: {msg}")]
    BadDimensions { msg: String },
    #[error("not a linear monotone clause-bipartite complete formula: {reason}")]
    NotLinMonCbpc { reason: String },
    #[error("encoded specification failed validation:\n{report}")]
    InvalidSpec { report: ValidationReport },
}

/// Relations and entries produced by one encoder, to be spliced into a
/// larger specification.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpecFragment {
    pub relations: Vec<Relation>,
    pub entries: Vec<AxiomOrAssessment>,
}

impl SpecFragment {
    /// Append onto `spec`, rejecting duplicate relation declarations.
    pub fn merge_into(self, spec: &mut RelationalSpec) -> Result<(), EncodeError> {
        for r in &self.relations {
            if spec.relations.iter().any(|have| have.name == r.name) {
                return Err(EncodeError::NameCollision { name: r.name.clone() });
            }
        }
        spec.relations.extend(self.relations);
        spec.entries.extend(self.entries);
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Conditional probability tables and noisy-or gates
// ---------------------------------------------------------------------------

/// One conditional probability table: P(child=1 | parent configuration),
/// with one row per configuration and the first parent leftmost in the key.
#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub child: String,
    pub parents: Vec<String>,
    pub rows: BTreeMap<Vec<bool>, Rational>,
}

/// The `width`-bit configuration with index `r`, first position most
/// significant, so indices 0,1,2,… enumerate rows 00,01,10,11,… in order.
fn config_bits(r: usize, width: usize) -> Vec<bool> {
    (0..width).map(|j| (r >> (width - 1 - j)) & 1 == 1).collect()
}

fn bits_label(cfg: &[bool]) -> String {
    cfg.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Every configuration present, every key the right width, every entry a
/// probability.
fn check_rows(
    child: &str,
    parents: usize,
    rows: &BTreeMap<Vec<bool>, Rational>,
) -> Result<(), EncodeError> {
    if parents > 16 {
        return Err(EncodeError::InvalidModel {
            msg: format!("{child} has {parents} parents; tables cap at 16"),
        });
    }
    for key in rows.keys() {
        if key.len() != parents {
            return Err(EncodeError::RowWidth {
                child: child.into(),
                got: key.len(),
                want: parents,
            });
        }
    }
    for r in 0..(1usize << parents) {
        let cfg = config_bits(r, parents);
        match rows.get(&cfg) {
            None => {
                return Err(EncodeError::MissingRow {
                    child: child.into(),
                    bits: bits_label(&cfg),
                })
            }
            Some(p) if !is_probability(p) => {
                return Err(EncodeError::NotAProbability {
                    context: format!("row {} of {}", bits_label(&cfg), child),
                    value: render_rational(p),
                })
            }
            Some(_) => {}
        }
    }
    Ok(())
}

/// The row disjunction shared by every table encoding: one disjunct per
/// configuration, conjoining the signed parent literals with that row's
/// fresh root.
fn row_disjunction(parent_atoms: &[Formula], row_atoms: &[Formula]) -> Formula {
    let k = parent_atoms.len();
    let disjuncts: Vec<Formula> = row_atoms
        .iter()
        .enumerate()
        .map(|(r, row_atom)| {
            let cfg = config_bits(r, k);
            let mut lits: Vec<Formula> = parent_atoms
                .iter()
                .zip(&cfg)
                .map(|(p, &b)| if b { p.clone() } else { Formula::not(p.clone()) })
                .collect();
            lits.push(row_atom.clone());
            Formula::And(lits)
        })
        .collect();
    Formula::Or(disjuncts)
}

/// Encode one propositional CPT: a fresh root `z_<child>_<bits>` per parent
/// configuration, assessed with that row's probability, and a definition
/// axiom making the child hold exactly when the matching configuration's
/// root is on. A zero-parent table is a plain assessment.
pub fn cpt_to_axioms(cpt: &Cpt) -> Result<SpecFragment, EncodeError> {
    let k = cpt.parents.len();
    check_rows(&cpt.child, k, &cpt.rows)?;
    let mut taken: BTreeSet<&str> = BTreeSet::new();
    taken.insert(&cpt.child);
    for p in &cpt.parents {
        if !taken.insert(p) {
            return Err(EncodeError::NameCollision { name: p.clone() });
        }
    }
    if k == 0 {
        return Ok(SpecFragment {
            relations: vec![Relation::new(&cpt.child, 0)],
            entries: vec![AxiomOrAssessment::Assessment {
                relation: cpt.child.clone(),
                prob: cpt.rows[&Vec::new()].clone(),
            }],
        });
    }
    let mut relations = Vec::new();
    let mut entries = Vec::new();
    let mut row_atoms = Vec::with_capacity(1 << k);
    for r in 0..(1usize << k) {
        let cfg = config_bits(r, k);
        let z = format!("z_{}_{}", cpt.child, bits_label(&cfg));
        if taken.contains(z.as_str()) {
            return Err(EncodeError::NameCollision { name: z });
        }
        relations.push(Relation::new(&z, 0));
        entries.push(AxiomOrAssessment::Assessment {
            relation: z.clone(),
            prob: cpt.rows[&cfg].clone(),
        });
        row_atoms.push(Formula::atom(z, vec![]));
    }
    let parent_atoms: Vec<Formula> = cpt
        .parents
        .iter()
        .map(|p| Formula::atom(p.clone(), vec![]))
        .collect();
    relations.push(Relation::new(&cpt.child, 0));
    entries.push(AxiomOrAssessment::Definition {
        head: cpt.child.clone(),
        head_vars: vec![],
        body: row_disjunction(&parent_atoms, &row_atoms),
    });
    Ok(SpecFragment { relations, entries })
}

/// Assemble a propositional Bayesian network, one CPT per variable, into a
/// complete specification; parents must themselves have tables.
pub fn bayes_net_to_spec(cpts: &[Cpt]) -> Result<RelationalSpec, EncodeError> {
    let mut children: BTreeSet<&str> = BTreeSet::new();
    for cpt in cpts {
        if !children.insert(&cpt.child) {
            return Err(EncodeError::NameCollision { name: cpt.child.clone() });
        }
    }
    for cpt in cpts {
        for p in &cpt.parents {
            if !children.contains(p.as_str()) {
                return Err(EncodeError::InvalidModel {
                    msg: format!("parent {p} of {} has no table", cpt.child),
                });
            }
        }
    }
    let mut spec = RelationalSpec { relations: vec![], entries: vec![] };
    for cpt in cpts {
        cpt_to_axioms(cpt)?.merge_into(&mut spec)?;
    }
    let report = validate_spec(&spec);
    if !report.is_valid() {
        return Err(EncodeError::InvalidSpec { report });
    }
    Ok(spec)
}

/// Noisy-or gate: `child ≡ ∨ᵢ (causeᵢ ∧ wᵢ)` with fresh inhibitors
/// `w_<child>_<i>` assessed `pᵢ`. The child fires exactly when some active
/// cause is uninhibited, so P(child=0 | all causes on) = Π(1−pᵢ).
pub fn noisy_or(
    child: &str,
    causes: &[String],
    inhibitor_probs: &[Rational],
) -> Result<SpecFragment, EncodeError> {
    if causes.len() != inhibitor_probs.len() {
        return Err(EncodeError::LengthMismatch {
            causes: causes.len(),
            probs: inhibitor_probs.len(),
        });
    }
    let mut taken: BTreeSet<&str> = BTreeSet::new();
    taken.insert(child);
    for c in causes {
        if !taken.insert(c) {
            return Err(EncodeError::NameCollision { name: c.clone() });
        }
    }
    let mut relations = Vec::new();
    let mut entries = Vec::new();
    let mut disjuncts = Vec::new();
    for (i, (cause, p)) in causes.iter().zip(inhibitor_probs).enumerate() {
        if !is_probability(p) {
            return Err(EncodeError::NotAProbability {
                context: format!("inhibitor {} of {child}", i + 1),
                value: render_rational(p),
            });
        }
        let w = format!("w_{child}_{}", i + 1);
        if taken.contains(w.as_str()) {
            return Err(EncodeError::NameCollision { name: w });
        }
        relations.push(Relation::new(&w, 0));
        entries.push(AxiomOrAssessment::Assessment { relation: w.clone(), prob: p.clone() });
        disjuncts.push(Formula::And(vec![
            Formula::atom(cause.clone(), vec![]),
            Formula::atom(w, vec![]),
        ]));
    }
    let body = match disjuncts.len() {
        0 => Formula::False,
        1 => disjuncts.pop().unwrap(),
        _ => Formula::Or(disjuncts),
    };
    relations.push(Relation::new(child, 0));
    entries.push(AxiomOrAssessment::Definition {
        head: child.to_string(),
        head_vars: vec![],
        body,
    });
    Ok(SpecFragment { relations, entries })
}

// ---------------------------------------------------------------------------
// Plate models
// ---------------------------------------------------------------------------

/// One attribute of a plate model: a relation ranging over `plates` (one
/// logvar per plate, in order) with a template table over `parents`. Each
/// parent must be another attribute whose plates all occur among the
/// child's, so the parent's grounding is determined by the child's.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateAttribute {
    pub name: String,
    pub plates: Vec<String>,
    pub parents: Vec<String>,
    pub rows: BTreeMap<Vec<bool>, Rational>,
}

/// A plate model is a list of attributes; plate names double as logvars.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlateModel {
    pub attributes: Vec<PlateAttribute>,
}

/// Encode a plate model as a quantifier-free specification: each attribute
/// keeps its plates as head logvars, and its table becomes fresh lifted
/// roots `a_<name>_<k>` (k = 1.., row order) with the usual row
/// disjunction. Parents are mentioned with the child's logvars directly.
pub fn plate_to_spec(model: &PlateModel) -> Result<RelationalSpec, EncodeError> {
    let mut by_name: BTreeMap<&str, &PlateAttribute> = BTreeMap::new();
    for attr in &model.attributes {
        if by_name.insert(&attr.name, attr).is_some() {
            return Err(EncodeError::NameCollision { name: attr.name.clone() });
        }
        let mut seen = BTreeSet::new();
        for plate in &attr.plates {
            if !seen.insert(plate) {
                return Err(EncodeError::InvalidModel {
                    msg: format!("{} lists plate {plate} twice", attr.name),
                });
            }
        }
    }
    let mut spec = RelationalSpec { relations: vec![], entries: vec![] };
    for attr in &model.attributes {
        let k = attr.parents.len();
        check_rows(&attr.name, k, &attr.rows)?;
        let head_vars: Vec<String> = attr.plates.clone();
        let plate_set: BTreeSet<&str> = attr.plates.iter().map(String::as_str).collect();
        let mut parent_atoms = Vec::with_capacity(k);
        for parent in &attr.parents {
            let Some(p) = by_name.get(parent.as_str()) else {
                return Err(EncodeError::InvalidModel {
                    msg: format!("parent {parent} of {} is not an attribute", attr.name),
                });
            };
            if p.plates.iter().any(|pl| !plate_set.contains(pl.as_str())) {
                return Err(EncodeError::PlateNotContained {
                    child: attr.name.clone(),
                    parent: parent.clone(),
                });
            }
            let args = p.plates.iter().map(|pl| Term::Var(pl.clone())).collect();
            parent_atoms.push(Formula::atom(parent.clone(), args));
        }
        let mut fragment = SpecFragment::default();
        if k == 0 {
            fragment.relations.push(Relation::new(&attr.name, head_vars.len()));
            fragment.entries.push(AxiomOrAssessment::Assessment {
                relation: attr.name.clone(),
                prob: attr.rows[&Vec::new()].clone(),
            });
        } else {
            let head_args: Vec<Term> =
                head_vars.iter().map(|v| Term::Var(v.clone())).collect();
            let mut row_atoms = Vec::with_capacity(1 << k);
            for r in 0..(1usize << k) {
                let a = format!("a_{}_{}", attr.name, r + 1);
                if by_name.contains_key(a.as_str()) {
                    return Err(EncodeError::NameCollision { name: a });
                }
                fragment.relations.push(Relation::new(&a, head_vars.len()));
                fragment.entries.push(AxiomOrAssessment::Assessment {
                    relation: a.clone(),
                    prob: attr.rows[&config_bits(r, k)].clone(),
                });
                row_atoms.push(Formula::atom(a, head_args.clone()));
            }
            fragment.relations.push(Relation::new(&attr.name, head_vars.len()));
            fragment.entries.push(AxiomOrAssessment::Definition {
                head: attr.name.clone(),
                head_vars,
                body: row_disjunction(&parent_atoms, &row_atoms),
            });
        }
        fragment.merge_into(&mut spec)?;
    }
    let report = validate_spec(&spec);
    if !report.is_valid() {
        return Err(EncodeError::InvalidSpec { report });
    }
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Relational models with skeletons
// ---------------------------------------------------------------------------

/// Association between two classes: `slot(v, o)` holds when object `v` of
/// `value_class` fills this slot of object `o` of `owner_class`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrmSlot {
    pub name: String,
    pub value_class: String,
    pub owner_class: String,
}

/// A routed parent: the attribute of the slot's value class reached through
/// the slot.
#[derive(Clone, Debug, PartialEq)]
pub struct PrmParent {
    pub slot: String,
    pub attribute: String,
}

/// One attribute of a relational model: a unary relation over objects of
/// `class`, with a template table over slot-routed parents.
#[derive(Clone, Debug, PartialEq)]
pub struct PrmAttribute {
    pub name: String,
    pub class: String,
    pub parents: Vec<PrmParent>,
    pub rows: BTreeMap<Vec<bool>, Rational>,
}

/// A relational model: classes and associations (the guard relations) plus
/// attributes routed through them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Prm {
    pub classes: Vec<String>,
    pub slots: Vec<PrmSlot>,
    pub attributes: Vec<PrmAttribute>,
}

/// Explicit guard groundings: which individuals belong to each class, and
/// which pairs fill each slot. Everything absent is false (closed world).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Skeleton {
    pub objects: BTreeMap<String, BTreeSet<u32>>,
    pub slot_pairs: BTreeMap<String, BTreeSet<(u32, u32)>>,
}

/// Encode the template part of a relational model. Classes and slots
/// become root relations assessed 1/2 (any value in (0,1) works: guard
/// factors cancel once inference conditions on the skeleton evidence). An
/// attribute with parents routed through slots s₁..s_k becomes
///
/// ```text
/// attr(z) ≡ ∀x1: … ∀xk: (class₁(x1) ∧ … ∧ s₁(x1,z) ∧ …) -> row disjunction
/// ```
///
/// with fresh lifted roots `a_<attr>_<k>(x1..xk)`; groundings whose guards
/// never fire are vacuously true.
pub fn prm_template_spec(prm: &Prm) -> Result<RelationalSpec, EncodeError> {
    let mut taken: BTreeSet<&str> = BTreeSet::new();
    for name in prm
        .classes
        .iter()
        .chain(prm.slots.iter().map(|s| &s.name))
        .chain(prm.attributes.iter().map(|a| &a.name))
    {
        if !taken.insert(name) {
            return Err(EncodeError::NameCollision { name: name.clone() });
        }
    }
    let classes: BTreeSet<&str> = prm.classes.iter().map(String::as_str).collect();
    let slots: BTreeMap<&str, &PrmSlot> =
        prm.slots.iter().map(|s| (s.name.as_str(), s)).collect();
    let attrs: BTreeMap<&str, &PrmAttribute> =
        prm.attributes.iter().map(|a| (a.name.as_str(), a)).collect();
    for slot in &prm.slots {
        for class in [&slot.value_class, &slot.owner_class] {
            if !classes.contains(class.as_str()) {
                return Err(EncodeError::InvalidModel {
                    msg: format!("slot {} uses undeclared class {class}", slot.name),
                });
            }
        }
    }

    let mut spec = RelationalSpec { relations: vec![], entries: vec![] };
    let half = rat(1, 2);
    for class in &prm.classes {
        spec.relations.push(Relation::new(class, 1));
        spec.entries.push(AxiomOrAssessment::Assessment {
            relation: class.clone(),
            prob: half.clone(),
        });
    }
    for slot in &prm.slots {
        spec.relations.push(Relation::new(&slot.name, 2));
        spec.entries.push(AxiomOrAssessment::Assessment {
            relation: slot.name.clone(),
            prob: half.clone(),
        });
    }

    for attr in &prm.attributes {
        if !classes.contains(attr.class.as_str()) {
            return Err(EncodeError::InvalidModel {
                msg: format!("attribute {} sits on undeclared class {}", attr.name, attr.class),
            });
        }
        let k = attr.parents.len();
        check_rows(&attr.name, k, &attr.rows)?;
        if k == 0 {
            spec.relations.push(Relation::new(&attr.name, 1));
            spec.entries.push(AxiomOrAssessment::Assessment {
                relation: attr.name.clone(),
                prob: attr.rows[&Vec::new()].clone(),
            });
            continue;
        }

        // One logvar per routed parent, plus z for the owning object.
        let vars: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
        let mut guards = Vec::with_capacity(2 * k);
        let mut parent_atoms = Vec::with_capacity(k);
        for (parent, var) in attr.parents.iter().zip(&vars) {
            let Some(slot) = slots.get(parent.slot.as_str()) else {
                return Err(EncodeError::InvalidModel {
                    msg: format!("{} routes through undeclared slot {}", attr.name, parent.slot),
                });
            };
            if slot.owner_class != attr.class {
                return Err(EncodeError::InvalidModel {
                    msg: format!(
                        "slot {} belongs to {}, not to {} of {}",
                        slot.name, slot.owner_class, attr.name, attr.class
                    ),
                });
            }
            let Some(parent_attr) = attrs.get(parent.attribute.as_str()) else {
                return Err(EncodeError::InvalidModel {
                    msg: format!(
                        "{} routes to undeclared attribute {}",
                        attr.name, parent.attribute
                    ),
                });
            };
            if parent_attr.class != slot.value_class {
                return Err(EncodeError::InvalidModel {
                    msg: format!(
                        "attribute {} sits on {}, but slot {} delivers {}",
                        parent_attr.name, parent_attr.class, slot.name, slot.value_class
                    ),
                });
            }
            guards.push(Formula::atom(
                slot.value_class.clone(),
                vec![Term::Var(var.clone())],
            ));
            parent_atoms.push(Formula::atom(
                parent.attribute.clone(),
                vec![Term::Var(var.clone())],
            ));
        }
        for (parent, var) in attr.parents.iter().zip(&vars) {
            guards.push(Formula::atom(
                parent.slot.clone(),
                vec![Term::Var(var.clone()), Term::Var("z".into())],
            ));
        }

        let row_args: Vec<Term> = vars.iter().map(|v| Term::Var(v.clone())).collect();
        let mut row_atoms = Vec::with_capacity(1 << k);
        let mut fragment = SpecFragment::default();
        for r in 0..(1usize << k) {
            let a = format!("a_{}_{}", attr.name, r + 1);
            if taken.contains(a.as_str()) {
                return Err(EncodeError::NameCollision { name: a });
            }
            fragment.relations.push(Relation::new(&a, k));
            fragment.entries.push(AxiomOrAssessment::Assessment {
                relation: a.clone(),
                prob: attr.rows[&config_bits(r, k)].clone(),
            });
            row_atoms.push(Formula::atom(a, row_args.clone()));
        }
        let mut body = Formula::Implies(
            Box::new(Formula::And(guards)),
            Box::new(row_disjunction(&parent_atoms, &row_atoms)),
        );
        for var in vars.iter().rev() {
            body = Formula::ForAll(var.clone(), Box::new(body));
        }
        fragment.relations.push(Relation::new(&attr.name, 1));
        fragment.entries.push(AxiomOrAssessment::Definition {
            head: attr.name.clone(),
            head_vars: vec!["z".into()],
            body,
        });
        fragment.merge_into(&mut spec)?;
    }
    let report = validate_spec(&spec);
    if !report.is_valid() {
        return Err(EncodeError::InvalidSpec { report });
    }
    Ok(spec)
}

/// The closed-world evidence set for a skeleton over domain `{1..n}`: every
/// class grounding and every slot grounding, true exactly on the listed
/// objects and pairs.
pub fn skeleton_evidence(
    prm: &Prm,
    skeleton: &Skeleton,
    n: u32,
) -> Result<Vec<(GroundAtom, bool)>, EncodeError> {
    let classes: BTreeSet<&str> = prm.classes.iter().map(String::as_str).collect();
    let slots: BTreeMap<&str, &PrmSlot> =
        prm.slots.iter().map(|s| (s.name.as_str(), s)).collect();
    for (class, objects) in &skeleton.objects {
        if !classes.contains(class.as_str()) {
            return Err(EncodeError::InconsistentSkeleton {
                msg: format!("objects listed for undeclared class {class}"),
            });
        }
        if let Some(&i) = objects.iter().find(|&&i| i == 0 || i > n) {
            return Err(EncodeError::InconsistentSkeleton {
                msg: format!("object {i} of {class} is outside the domain 1..={n}"),
            });
        }
    }
    let empty = BTreeSet::new();
    for (slot, pairs) in &skeleton.slot_pairs {
        let Some(info) = slots.get(slot.as_str()) else {
            return Err(EncodeError::InconsistentSkeleton {
                msg: format!("pairs listed for undeclared slot {slot}"),
            });
        };
        let values = skeleton.objects.get(&info.value_class).unwrap_or(&empty);
        let owners = skeleton.objects.get(&info.owner_class).unwrap_or(&empty);
        for &(v, o) in pairs {
            if !values.contains(&v) {
                return Err(EncodeError::InconsistentSkeleton {
                    msg: format!("{slot}({v},{o}): {v} is not a listed {}", info.value_class),
                });
            }
            if !owners.contains(&o) {
                return Err(EncodeError::InconsistentSkeleton {
                    msg: format!("{slot}({v},{o}): {o} is not a listed {}", info.owner_class),
                });
            }
        }
    }

    let mut evidence = Vec::new();
    for class in &prm.classes {
        let members = skeleton.objects.get(class).unwrap_or(&empty);
        for i in 1..=n {
            evidence.push((GroundAtom::new(class.clone(), vec![i]), members.contains(&i)));
        }
    }
    let no_pairs = BTreeSet::new();
    for slot in &prm.slots {
        let pairs = skeleton.slot_pairs.get(&slot.name).unwrap_or(&no_pairs);
        for v in 1..=n {
            for o in 1..=n {
                evidence.push((
                    GroundAtom::new(slot.name.clone(), vec![v, o]),
                    pairs.contains(&(v, o)),
                ));
            }
        }
    }
    Ok(evidence)
}

/// Encode a relational model together with its skeleton: the template
/// specification plus the evidence set that inference must condition on.
pub fn prm_to_spec(
    prm: &Prm,
    skeleton: &Skeleton,
    n: u32,
) -> Result<(RelationalSpec, Vec<(GroundAtom, bool)>), EncodeError> {
    let spec = prm_template_spec(prm)?;
    let evidence = skeleton_evidence(prm, skeleton, n)?;
    Ok((spec, evidence))
}

// ---------------------------------------------------------------------------
// 3CNF, DIMACS, and the exactly-one gadget
// ---------------------------------------------------------------------------

/// 3CNF over propositions `1..=num_vars`; literals are signed indices and
/// no clause repeats a literal (a proposition may still appear twice with
/// opposite signs).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cnf3 {
    pub num_vars: u32,
    pub clauses: Vec<[i32; 3]>,
}

/// Literal bounds and the no-repeated-literal invariant.
pub fn validate_cnf3(cnf: &Cnf3) -> Result<(), EncodeError> {
    for (ci, clause) in cnf.clauses.iter().enumerate() {
        for &lit in clause {
            if lit == 0 || lit.unsigned_abs() > cnf.num_vars {
                return Err(EncodeError::BadLiteral { clause: ci, lit: lit.into() });
            }
        }
        if clause[0] == clause[1] || clause[0] == clause[2] || clause[1] == clause[2] {
            return Err(EncodeError::RepeatedLiteral { clause: ci });
        }
    }
    Ok(())
}

/// Parse DIMACS CNF: a `p cnf <vars> <clauses>` header, `c` comment lines,
/// then whitespace-separated literals with `0` terminating each clause.
/// Clauses must have exactly three distinct literals.
pub fn parse_dimacs(text: &str) -> Result<Cnf3, EncodeError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<[i32; 3]> = Vec::new();
    let mut pending: Vec<i32> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(EncodeError::Format {
                    line: line_no,
                    msg: "second problem line".into(),
                });
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(EncodeError::Format {
                    line: line_no,
                    msg: format!("malformed problem line {trimmed:?}"),
                });
            }
            let vars = parts[2].parse::<u32>().map_err(|_| EncodeError::Format {
                line: line_no,
                msg: format!("bad variable count {:?}", parts[2]),
            })?;
            let count = parts[3].parse::<usize>().map_err(|_| EncodeError::Format {
                line: line_no,
                msg: format!("bad clause count {:?}", parts[3]),
            })?;
            header = Some((vars, count));
            continue;
        }
        if header.is_none() {
            return Err(EncodeError::Format {
                line: line_no,
                msg: "clause before the problem line".into(),
            });
        }
        for word in trimmed.split_whitespace() {
            let lit = word.parse::<i32>().map_err(|_| EncodeError::Format {
                line: line_no,
                msg: format!("bad literal {word:?}"),
            })?;
            if lit == 0 {
                if pending.len() != 3 {
                    return Err(EncodeError::Format {
                        line: line_no,
                        msg: format!("clause has {} literals, expected 3", pending.len()),
                    });
                }
                clauses.push([pending[0], pending[1], pending[2]]);
                pending.clear();
            } else {
                pending.push(lit);
            }
        }
    }
    let Some((num_vars, count)) = header else {
        return Err(EncodeError::Format { line: 1, msg: "missing problem line".into() });
    };
    if !pending.is_empty() {
        return Err(EncodeError::Format {
            line: text.lines().count(),
            msg: "unterminated clause at end of input".into(),
        });
    }
    if clauses.len() != count {
        return Err(EncodeError::Format {
            line: text.lines().count(),
            msg: format!("header promises {count} clauses, found {}", clauses.len()),
        });
    }
    let cnf = Cnf3 { num_vars, clauses };
    validate_cnf3(&cnf)?;
    Ok(cnf)
}

/// Render to DIMACS, one clause per line.
pub fn render_dimacs(cnf: &Cnf3) -> String {
    let mut out = format!("p cnf {} {}\n", cnf.num_vars, cnf.clauses.len());
    for clause in &cnf.clauses {
        out.push_str(&format!("{} {} {} 0\n", clause[0], clause[1], clause[2]));
    }
    out
}

/// Map each clause `(L₁ ∨ L₂ ∨ L₃)` to four clauses over five fresh
/// propositions `b₁..b₅`:
///
/// ```text
/// (¬L₁ ∨ b₁ ∨ b₂)  (L₂ ∨ b₂ ∨ b₃)  (¬L₃ ∨ b₃ ∨ b₄)  (b₁ ∨ b₃ ∨ b₅)
/// ```
///
/// Under the exactly-one-literal-per-clause reading of the output, each
/// source assignment satisfying the clause extends in exactly one way and
/// unsatisfying ones not at all, so the exactly-one count of the output
/// equals the model count of the input.
pub fn one_in_three_gadget(phi: &Cnf3) -> Result<Cnf3, EncodeError> {
    validate_cnf3(phi)?;
    let n = phi.num_vars;
    let mut clauses = Vec::with_capacity(phi.clauses.len() * 4);
    for (k, &[l1, l2, l3]) in phi.clauses.iter().enumerate() {
        let b = |j: u32| (n + 5 * k as u32 + j) as i32;
        clauses.push([-l1, b(1), b(2)]);
        clauses.push([l2, b(2), b(3)]);
        clauses.push([-l3, b(3), b(4)]);
        clauses.push([b(1), b(3), b(5)]);
    }
    Ok(Cnf3 { num_vars: n + 5 * phi.clauses.len() as u32, clauses })
}

fn true_literals(clause: &[i32; 3], mask: u32) -> u32 {
    clause
        .iter()
        .filter(|&&lit| {
            let on = mask >> (lit.unsigned_abs() - 1) & 1 == 1;
            if lit > 0 {
                on
            } else {
                !on
            }
        })
        .count() as u32
}

fn check_count_cap(vars: u32) -> Result<(), EncodeError> {
    if vars > MODEL_COUNT_VAR_CAP {
        return Err(EncodeError::TooLarge { vars, cap: MODEL_COUNT_VAR_CAP });
    }
    Ok(())
}

/// Brute-force model count: assignments with at least one true literal per
/// clause.
pub fn count_models_cnf3(phi: &Cnf3) -> Result<BigUint, EncodeError> {
    validate_cnf3(phi)?;
    check_count_cap(phi.num_vars)?;
    let mut count = 0u64;
    for mask in 0..(1u64 << phi.num_vars) {
        if phi.clauses.iter().all(|c| true_literals(c, mask as u32) >= 1) {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

/// Brute-force exactly-one count: assignments with exactly one true literal
/// per clause.
pub fn count_one_in_three(phi: &Cnf3) -> Result<BigUint, EncodeError> {
    validate_cnf3(phi)?;
    check_count_cap(phi.num_vars)?;
    let mut count = 0u64;
    for mask in 0..(1u64 << phi.num_vars) {
        if phi.clauses.iter().all(|c| true_literals(c, mask as u32) == 1) {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

// ---------------------------------------------------------------------------
// Matrix counting, monotone CNF, and class-B graphs
// ---------------------------------------------------------------------------

/// How many `rows`×`cols` 0/1 matrices have at least one 1 in each of the
/// first `covered_rows` rows and each of the first `covered_cols` columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MatrixProblem {
    pub covered_rows: u32,
    pub covered_cols: u32,
    pub rows: u32,
    pub cols: u32,
}

impl MatrixProblem {
    pub fn new(
        covered_rows: u32,
        covered_cols: u32,
        rows: u32,
        cols: u32,
    ) -> Result<Self, EncodeError> {
        let p = MatrixProblem { covered_rows, covered_cols, rows, cols };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<(), EncodeError> {
        if !(self.cols > self.covered_cols && self.covered_cols > 0) {
            return Err(EncodeError::BadDimensions {
                msg: format!(
                    "need cols > covered cols > 0, got {} and {}",
                    self.cols, self.covered_cols
                ),
            });
        }
        if !(self.rows > self.covered_rows && self.covered_rows > 0) {
            return Err(EncodeError::BadDimensions {
                msg: format!(
                    "need rows > covered rows > 0, got {} and {}",
                    self.rows, self.covered_rows
                ),
            });
        }
        Ok(())
    }

    /// Variable index of cell (i, j), 1-based, row-major.
    pub fn cell(&self, i: u32, j: u32) -> u32 {
        (i - 1) * self.cols + j
    }
}

/// Monotone CNF over variables `1..=num_vars` (no negation representable).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MonotoneCnf {
    pub num_vars: u32,
    pub clauses: Vec<Vec<u32>>,
}

/// One clause per covered row (over that row's cells) and per covered
/// column (over that column's cells); the i-th row clause and j-th column
/// clause intersect exactly at cell (i, j), so the intersection graph is
/// complete bipartite.
pub fn matrix_problem_to_formula(p: &MatrixProblem) -> Result<MonotoneCnf, EncodeError> {
    p.validate()?;
    let mut clauses = Vec::with_capacity((p.covered_rows + p.covered_cols) as usize);
    for i in 1..=p.covered_rows {
        clauses.push((1..=p.cols).map(|j| p.cell(i, j)).collect());
    }
    for j in 1..=p.covered_cols {
        clauses.push((1..=p.rows).map(|i| p.cell(i, j)).collect());
    }
    Ok(MonotoneCnf { num_vars: p.rows * p.cols, clauses })
}

/// Brute-force matrix count, enumerating all 0/1 matrices directly.
pub fn count_matrices(p: &MatrixProblem) -> Result<BigUint, EncodeError> {
    p.validate()?;
    let cells = p.rows * p.cols;
    check_count_cap(cells)?;
    let bit = |mask: u32, i: u32, j: u32| mask >> (p.cell(i, j) - 1) & 1 == 1;
    let mut count = 0u64;
    for mask in 0..(1u64 << cells) {
        let mask = mask as u32;
        let rows_ok = (1..=p.covered_rows).all(|i| (1..=p.cols).any(|j| bit(mask, i, j)));
        let cols_ok = (1..=p.covered_cols).all(|j| (1..=p.rows).any(|i| bit(mask, i, j)));
        if rows_ok && cols_ok {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

fn validate_monotone(cnf: &MonotoneCnf) -> Result<(), EncodeError> {
    for (ci, clause) in cnf.clauses.iter().enumerate() {
        if clause.is_empty() {
            return Err(EncodeError::NotLinMonCbpc {
                reason: format!("clause {ci} is empty"),
            });
        }
        let mut seen = BTreeSet::new();
        for &v in clause {
            if v == 0 || v > cnf.num_vars {
                return Err(EncodeError::BadLiteral { clause: ci, lit: v.into() });
            }
            if !seen.insert(v) {
                return Err(EncodeError::NotLinMonCbpc {
                    reason: format!("clause {ci} repeats variable {v}"),
                });
            }
        }
    }
    Ok(())
}

/// Brute-force model count of a monotone CNF over its full variable
/// universe (variables in no clause are free and double the count).
pub fn count_models_monotone(cnf: &MonotoneCnf) -> Result<BigUint, EncodeError> {
    validate_monotone(cnf)?;
    check_count_cap(cnf.num_vars)?;
    let mut count = 0u64;
    for mask in 0..(1u64 << cnf.num_vars) {
        if cnf
            .clauses
            .iter()
            .all(|c| c.iter().any(|&v| mask >> (v - 1) & 1 == 1))
        {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

/// Check the linear monotone clause-bipartite complete structure and build
/// the corresponding class-B instance: the intersection graph's two parts
/// become the black layers (the part holding clause 0 on the left), each
/// part's private variables become a shared layer of white nodes, and
/// variables mentioned by no clause become extra free edges.
///
/// With part sizes |L|, |R| and uniform clause sizes s_L, s_R, the layers
/// are (s_L−|R|, |L|, |R|, s_R−|L|); edge covers of the result correspond
/// one-to-one with models of the formula.
pub fn linmoncbpc_to_bwgraph(cnf: &MonotoneCnf) -> Result<ClassBGraph, EncodeError> {
    validate_monotone(cnf)?;
    let mut occurrences: BTreeMap<u32, u32> = BTreeMap::new();
    for clause in &cnf.clauses {
        for &v in clause {
            *occurrences.entry(v).or_insert(0) += 1;
        }
    }
    if let Some((&v, &k)) = occurrences.iter().find(|&(_, &k)| k > 2) {
        return Err(EncodeError::NotLinMonCbpc {
            reason: format!("variable {v} appears in {k} clauses, at most 2 allowed"),
        });
    }
    let m = cnf.clauses.len();
    if m < 2 {
        return Err(EncodeError::NotLinMonCbpc {
            reason: "needs clauses in both parts of the intersection graph".into(),
        });
    }
    let sets: Vec<BTreeSet<u32>> = cnf
        .clauses
        .iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    let shared = |i: usize, j: usize| sets[i].intersection(&sets[j]).count();
    for i in 0..m {
        for j in i + 1..m {
            if shared(i, j) > 1 {
                return Err(EncodeError::NotLinMonCbpc {
                    reason: format!("clauses {i} and {j} intersect at more than one variable"),
                });
            }
        }
    }

    // Two-color the intersection graph from clause 0.
    let mut color: Vec<Option<bool>> = vec![None; m];
    color[0] = Some(false);
    let mut queue = vec![0usize];
    while let Some(i) = queue.pop() {
        let here = color[i].unwrap();
        for j in (0..m).filter(|&j| j != i && shared(i, j) > 0) {
            match color[j] {
                None => {
                    color[j] = Some(!here);
                    queue.push(j);
                }
                Some(c) if c == here => {
                    return Err(EncodeError::NotLinMonCbpc {
                        reason: "intersection graph is not bipartite".into(),
                    });
                }
                Some(_) => {}
            }
        }
    }
    if color.iter().any(Option::is_none) {
        return Err(EncodeError::NotLinMonCbpc {
            reason: "intersection graph is not connected".into(),
        });
    }
    let left: Vec<usize> = (0..m).filter(|&i| color[i] == Some(false)).collect();
    let right: Vec<usize> = (0..m).filter(|&i| color[i] == Some(true)).collect();

    // Completeness and uniform sizes per part.
    for &l in &left {
        for &r in &right {
            if shared(l, r) != 1 {
                return Err(EncodeError::NotLinMonCbpc {
                    reason: format!("clauses {l} and {r} do not intersect"),
                });
            }
        }
    }
    let part_size = |part: &[usize]| -> Result<usize, EncodeError> {
        let s = cnf.clauses[part[0]].len();
        for &i in part {
            if cnf.clauses[i].len() != s {
                return Err(EncodeError::NotLinMonCbpc {
                    reason: "clauses in the same part differ in size".into(),
                });
            }
        }
        Ok(s)
    };
    let s_l = part_size(&left)?;
    let s_r = part_size(&right)?;
    // Each left clause shares a distinct variable with each right clause
    // (a variable in three clauses was rejected above), so s_l ≥ |right|.
    let k_l = s_l - right.len();
    let k_r = s_r - left.len();
    let extra = cnf.num_vars as usize - occurrences.len();
    Ok(ClassBGraph::new(k_l, left.len(), right.len(), k_r).with_extra_free_edges(extra))
}

// ---------------------------------------------------------------------------
// Text formats for plate and relational models
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
enum MTok {
    Ident(String),
    Nat(String),
    Dot,
    Comma,
    Colon,
    Slash,
    Arrow,
    LBrace,
    RBrace,
}

impl fmt::Display for MTok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MTok::Ident(s) => write!(f, "identifier {s:?}"),
            MTok::Nat(s) => write!(f, "number {s}"),
            MTok::Dot => write!(f, "'.'"),
            MTok::Comma => write!(f, "','"),
            MTok::Colon => write!(f, "':'"),
            MTok::Slash => write!(f, "'/'"),
            MTok::Arrow => write!(f, "'->'"),
            MTok::LBrace => write!(f, "'{{'"),
            MTok::RBrace => write!(f, "'}}'"),
        }
    }
}

fn model_err<T>(line: usize, msg: impl Into<String>) -> Result<T, EncodeError> {
    Err(EncodeError::Format { line, msg: msg.into() })
}

fn lex_model(text: &str) -> Result<Vec<(MTok, usize)>, EncodeError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1usize;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                line += 1;
                i += 1;
            }
            _ if c.is_whitespace() => i += 1,
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '.' => {
                out.push((MTok::Dot, line));
                i += 1;
            }
            ',' => {
                out.push((MTok::Comma, line));
                i += 1;
            }
            ':' => {
                out.push((MTok::Colon, line));
                i += 1;
            }
            '/' => {
                out.push((MTok::Slash, line));
                i += 1;
            }
            '{' => {
                out.push((MTok::LBrace, line));
                i += 1;
            }
            '}' => {
                out.push((MTok::RBrace, line));
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push((MTok::Arrow, line));
                i += 2;
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((MTok::Nat(chars[start..i].iter().collect()), line));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                out.push((MTok::Ident(chars[start..i].iter().collect()), line));
            }
            other => return model_err(line, format!("unexpected character {other:?}")),
        }
    }
    Ok(out)
}

struct ModelParser {
    toks: Vec<(MTok, usize)>,
    pos: usize,
}

impl ModelParser {
    fn new(text: &str) -> Result<Self, EncodeError> {
        Ok(ModelParser { toks: lex_model(text)?, pos: 0 })
    }

    fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(1, |(_, l)| *l)
    }

    fn peek(&self) -> Option<&MTok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn next(&mut self) -> Option<MTok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: MTok) -> Result<(), EncodeError> {
        let line = self.line();
        match self.next() {
            Some(t) if t == want => Ok(()),
            Some(t) => model_err(line, format!("expected {want}, found {t}")),
            None => model_err(line, format!("expected {want}, found end of input")),
        }
    }

    fn ident(&mut self) -> Result<String, EncodeError> {
        let line = self.line();
        match self.next() {
            Some(MTok::Ident(s)) => Ok(s),
            Some(t) => model_err(line, format!("expected an identifier, found {t}")),
            None => model_err(line, "expected an identifier, found end of input"),
        }
    }

    fn nat(&mut self) -> Result<u32, EncodeError> {
        let line = self.line();
        match self.next() {
            Some(MTok::Nat(s)) => s
                .parse::<u32>()
                .map_err(|_| EncodeError::Format { line, msg: format!("number {s} too large") }),
            Some(t) => model_err(line, format!("expected a number, found {t}")),
            None => model_err(line, "expected a number, found end of input"),
        }
    }

    /// `p` or `p/q`, then the statement dot.
    fn rational_dot(&mut self) -> Result<Rational, EncodeError> {
        let line = self.line();
        let mut text = match self.next() {
            Some(MTok::Nat(s)) => s,
            Some(t) => return model_err(line, format!("expected a probability, found {t}")),
            None => return model_err(line, "expected a probability, found end of input"),
        };
        if self.peek() == Some(&MTok::Slash) {
            self.next();
            let denom = match self.next() {
                Some(MTok::Nat(s)) => s,
                _ => return model_err(line, "expected a denominator"),
            };
            text = format!("{text}/{denom}");
        }
        self.expect(MTok::Dot)?;
        parse_rational(&text).map_err(|msg| EncodeError::Format { line, msg })
    }

    fn ident_list(&mut self) -> Result<Vec<String>, EncodeError> {
        let mut out = vec![self.ident()?];
        while self.peek() == Some(&MTok::Comma) {
            self.next();
            out.push(self.ident()?);
        }
        Ok(out)
    }

    /// `row b1 … bk : RATIONAL.` lines between braces.
    fn row_block(
        &mut self,
        parents: usize,
        child: &str,
    ) -> Result<BTreeMap<Vec<bool>, Rational>, EncodeError> {
        self.expect(MTok::LBrace)?;
        let mut rows = BTreeMap::new();
        loop {
            let line = self.line();
            match self.next() {
                Some(MTok::RBrace) => break,
                Some(MTok::Ident(kw)) if kw == "row" => {
                    let mut cfg = Vec::new();
                    loop {
                        let line = self.line();
                        match self.next() {
                            Some(MTok::Colon) => break,
                            Some(MTok::Nat(b)) if b == "0" => cfg.push(false),
                            Some(MTok::Nat(b)) if b == "1" => cfg.push(true),
                            Some(t) => {
                                return model_err(line, format!("expected a bit or ':', found {t}"))
                            }
                            None => return model_err(line, "unterminated row"),
                        }
                    }
                    if cfg.len() != parents {
                        return model_err(
                            line,
                            format!("row of {child} has {} bits, expected {parents}", cfg.len()),
                        );
                    }
                    let prob = self.rational_dot()?;
                    if rows.insert(cfg.clone(), prob).is_some() {
                        return model_err(
                            line,
                            format!("row {} of {child} given twice", bits_label(&cfg)),
                        );
                    }
                }
                Some(t) => return model_err(line, format!("expected 'row' or '}}', found {t}")),
                None => return model_err(line, "unterminated row block"),
            }
        }
        Ok(rows)
    }
}

/// Parse the `.plate` text format:
///
/// ```text
/// plate course.
/// attr difficult over course { row : 3/10. }
/// attr failed over course, student deps difficult, committed {
///   row 0 0 : 2/5.  row 0 1 : 1/5.  row 1 0 : 9/10.  row 1 1 : 4/5.
/// }
/// ```
pub fn parse_plate(text: &str) -> Result<PlateModel, EncodeError> {
    let mut p = ModelParser::new(text)?;
    let mut plates: BTreeSet<String> = BTreeSet::new();
    let mut model = PlateModel::default();
    loop {
        let line = p.line();
        match p.next() {
            None => break,
            Some(MTok::Ident(kw)) if kw == "plate" => {
                let name = p.ident()?;
                p.expect(MTok::Dot)?;
                if !plates.insert(name.clone()) {
                    return model_err(line, format!("plate {name} declared twice"));
                }
            }
            Some(MTok::Ident(kw)) if kw == "attr" => {
                let name = p.ident()?;
                let over = p.ident()?;
                if over != "over" {
                    return model_err(line, format!("expected 'over', found {over:?}"));
                }
                let attr_plates = p.ident_list()?;
                for plate in &attr_plates {
                    if !plates.contains(plate) {
                        return model_err(line, format!("undeclared plate {plate}"));
                    }
                }
                let mut parents = Vec::new();
                if let Some(MTok::Ident(kw)) = p.peek() {
                    if kw == "deps" {
                        p.next();
                        parents = p.ident_list()?;
                    }
                }
                let rows = p.row_block(parents.len(), &name)?;
                model.attributes.push(PlateAttribute { name, plates: attr_plates, parents, rows });
            }
            Some(t) => return model_err(line, format!("expected 'plate' or 'attr', found {t}")),
        }
    }
    Ok(model)
}

/// Parse the `.prm` text format (model and skeleton in one file):
///
/// ```text
/// class course.
/// slot courseOf : course -> registration.
/// attr difficult on course { row : 3/10. }
/// attr failed on registration deps courseOf.difficult, studentOf.committed { … }
/// object course 1.
/// pair courseOf 1 3.
/// ```
pub fn parse_prm(text: &str) -> Result<(Prm, Skeleton), EncodeError> {
    let mut p = ModelParser::new(text)?;
    let mut prm = Prm::default();
    let mut skeleton = Skeleton::default();
    loop {
        let line = p.line();
        match p.next() {
            None => break,
            Some(MTok::Ident(kw)) if kw == "class" => {
                let name = p.ident()?;
                p.expect(MTok::Dot)?;
                if prm.classes.contains(&name) {
                    return model_err(line, format!("class {name} declared twice"));
                }
                prm.classes.push(name);
            }
            Some(MTok::Ident(kw)) if kw == "slot" => {
                let name = p.ident()?;
                p.expect(MTok::Colon)?;
                let value_class = p.ident()?;
                p.expect(MTok::Arrow)?;
                let owner_class = p.ident()?;
                p.expect(MTok::Dot)?;
                if prm.slots.iter().any(|s| s.name == name) {
                    return model_err(line, format!("slot {name} declared twice"));
                }
                prm.slots.push(PrmSlot { name, value_class, owner_class });
            }
            Some(MTok::Ident(kw)) if kw == "attr" => {
                let name = p.ident()?;
                let on = p.ident()?;
                if on != "on" {
                    return model_err(line, format!("expected 'on', found {on:?}"));
                }
                let class = p.ident()?;
                let mut parents = Vec::new();
                if let Some(MTok::Ident(kw)) = p.peek() {
                    if kw == "deps" {
                        p.next();
                        loop {
                            let slot = p.ident()?;
                            p.expect(MTok::Dot)?;
                            let attribute = p.ident()?;
                            parents.push(PrmParent { slot, attribute });
                            if p.peek() == Some(&MTok::Comma) {
                                p.next();
                            } else {
                                break;
                            }
                        }
                    }
                }
                let rows = p.row_block(parents.len(), &name)?;
                prm.attributes.push(PrmAttribute { name, class, parents, rows });
            }
            Some(MTok::Ident(kw)) if kw == "object" => {
                let class = p.ident()?;
                let ind = p.nat()?;
                p.expect(MTok::Dot)?;
                skeleton.objects.entry(class).or_default().insert(ind);
            }
            Some(MTok::Ident(kw)) if kw == "pair" => {
                let slot = p.ident()?;
                let value = p.nat()?;
                let owner = p.nat()?;
                p.expect(MTok::Dot)?;
                skeleton.slot_pairs.entry(slot).or_default().insert((value, owner));
            }
            Some(t) => {
                return model_err(
                    line,
                    format!("expected 'class', 'slot', 'attr', 'object' or 'pair', found {t}"),
                )
            }
        }
    }
    Ok((prm, skeleton))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edgecover::{count_covers, count_covers_class_b};
    use crate::ground::ground_spec;
    use crate::infer::{query_probability, InferError};
    use crate::lang::render_spec;
    use crate::model::{classify_fragment, FragmentLabel, Query};

    fn university_plate() -> PlateModel {
        PlateModel {
            attributes: vec![
                PlateAttribute {
                    name: "difficult".into(),
                    plates: vec!["course".into()],
                    parents: vec![],
                    rows: BTreeMap::from([(vec![], rat(3, 10))]),
                },
                PlateAttribute {
                    name: "committed".into(),
                    plates: vec!["student".into()],
                    parents: vec![],
                    rows: BTreeMap::from([(vec![], rat(7, 10))]),
                },
                PlateAttribute {
                    name: "failed".into(),
                    plates: vec!["course".into(), "student".into()],
                    parents: vec!["difficult".into(), "committed".into()],
                    rows: BTreeMap::from([
                        (vec![false, false], rat(2, 5)),
                        (vec![false, true], rat(1, 5)),
                        (vec![true, false], rat(9, 10)),
                        (vec![true, true], rat(4, 5)),
                    ]),
                },
            ],
        }
    }

    fn university_prm() -> (Prm, Skeleton) {
        let prm = Prm {
            classes: vec!["course".into(), "student".into(), "registration".into()],
            slots: vec![
                PrmSlot {
                    name: "courseOf".into(),
                    value_class: "course".into(),
                    owner_class: "registration".into(),
                },
                PrmSlot {
                    name: "studentOf".into(),
                    value_class: "student".into(),
                    owner_class: "registration".into(),
                },
            ],
            attributes: vec![
                PrmAttribute {
                    name: "difficult".into(),
                    class: "course".into(),
                    parents: vec![],
                    rows: BTreeMap::from([(vec![], rat(3, 10))]),
                },
                PrmAttribute {
                    name: "committed".into(),
                    class: "student".into(),
                    parents: vec![],
                    rows: BTreeMap::from([(vec![], rat(7, 10))]),
                },
                PrmAttribute {
                    name: "failed".into(),
                    class: "registration".into(),
                    parents: vec![
                        PrmParent { slot: "courseOf".into(), attribute: "difficult".into() },
                        PrmParent { slot: "studentOf".into(), attribute: "committed".into() },
                    ],
                    rows: BTreeMap::from([
                        (vec![false, false], rat(2, 5)),
                        (vec![false, true], rat(1, 5)),
                        (vec![true, false], rat(9, 10)),
                        (vec![true, true], rat(4, 5)),
                    ]),
                },
            ],
        };
        let skeleton = Skeleton {
            objects: BTreeMap::from([
                ("course".into(), BTreeSet::from([1])),
                ("student".into(), BTreeSet::from([2])),
                ("registration".into(), BTreeSet::from([3])),
            ]),
            slot_pairs: BTreeMap::from([
                ("courseOf".into(), BTreeSet::from([(1, 3)])),
                ("studentOf".into(), BTreeSet::from([(2, 3)])),
            ]),
        };
        (prm, skeleton)
    }

    #[test]
    fn single_parent_cpt_reproduces_the_two_root_encoding() {
        let net = bayes_net_to_spec(&[
            Cpt {
                child: "y".into(),
                parents: vec![],
                rows: BTreeMap::from([(vec![], rat(1, 3))]),
            },
            Cpt {
                child: "x".into(),
                parents: vec!["y".into()],
                rows: BTreeMap::from([(vec![false], rat(1, 5)), (vec![true], rat(7, 10))]),
            },
        ])
        .unwrap();
        let names: Vec<&str> = net.relations.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["y", "z_x_0", "z_x_1", "x"]);
        assert_eq!(net.assessment("z_x_0"), Some(&rat(1, 5)));
        assert_eq!(net.assessment("z_x_1"), Some(&rat(7, 10)));
        let rendered = render_spec(&net);
        assert!(rendered.contains("def x := !y & z_x_0 | y & z_x_1."), "{rendered}");
        // The marginal over the original variables is preserved:
        // P(x=1) = 2/3·1/5 + 1/3·7/10 = 11/30.
        let ground = ground_spec(&net, 1).unwrap();
        let q = Query::new([(GroundAtom::prop("x"), true)], [], None).unwrap();
        assert_eq!(query_probability(&ground, &q).unwrap(), rat(11, 30));
    }

    #[test]
    fn two_parent_cpt_rows_are_ordered_and_complete() {
        let rows = BTreeMap::from([
            (vec![false, false], rat(1, 10)),
            (vec![false, true], rat(3, 10)),
            (vec![true, false], rat(1, 2)),
            (vec![true, true], rat(9, 10)),
        ]);
        let fragment = cpt_to_axioms(&Cpt {
            child: "x".into(),
            parents: vec!["y1".into(), "y2".into()],
            rows: rows.clone(),
        })
        .unwrap();
        let names: Vec<&str> = fragment.relations.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["z_x_00", "z_x_01", "z_x_10", "z_x_11", "x"]);

        // Full network: independent parents, then check the marginal against
        // the law of total probability.
        let mut spec = bayes_net_to_spec(&[
            Cpt { child: "y1".into(), parents: vec![], rows: BTreeMap::from([(vec![], rat(1, 4))]) },
            Cpt { child: "y2".into(), parents: vec![], rows: BTreeMap::from([(vec![], rat(2, 3))]) },
        ])
        .unwrap();
        fragment.merge_into(&mut spec).unwrap();
        let ground = ground_spec(&spec, 1).unwrap();
        let q = Query::new([(GroundAtom::prop("x"), true)], [], None).unwrap();
        let expected = rat(3, 4) * rat(1, 3) * rat(1, 10)
            + rat(3, 4) * rat(2, 3) * rat(3, 10)
            + rat(1, 4) * rat(1, 3) * rat(1, 2)
            + rat(1, 4) * rat(2, 3) * rat(9, 10);
        assert_eq!(query_probability(&ground, &q).unwrap(), expected);
    }

    #[test]
    fn zero_parent_cpt_is_a_plain_assessment() {
        let fragment = cpt_to_axioms(&Cpt {
            child: "y".into(),
            parents: vec![],
            rows: BTreeMap::from([(vec![], rat(1, 3))]),
        })
        .unwrap();
        assert_eq!(fragment.relations, vec![Relation::new("y", 0)]);
        assert_eq!(
            fragment.entries,
            vec![AxiomOrAssessment::Assessment { relation: "y".into(), prob: rat(1, 3) }]
        );
    }

    #[test]
    fn cpt_validation_rejects_gaps_and_bad_probabilities() {
        let missing = cpt_to_axioms(&Cpt {
            child: "x".into(),
            parents: vec!["y".into()],
            rows: BTreeMap::from([(vec![false], rat(1, 5))]),
        });
        assert_eq!(
            missing,
            Err(EncodeError::MissingRow { child: "x".into(), bits: "1".into() })
        );
        let wide = cpt_to_axioms(&Cpt {
            child: "x".into(),
            parents: vec!["y".into()],
            rows: BTreeMap::from([(vec![false, true], rat(1, 5))]),
        });
        assert_eq!(wide, Err(EncodeError::RowWidth { child: "x".into(), got: 2, want: 1 }));
        let out_of_range = cpt_to_axioms(&Cpt {
            child: "x".into(),
            parents: vec![],
            rows: BTreeMap::from([(vec![], rat(3, 2))]),
        });
        assert!(matches!(out_of_range, Err(EncodeError::NotAProbability { .. })));
        // A fresh root name already taken by the user's relations.
        let collision = cpt_to_axioms(&Cpt {
            child: "x".into(),
            parents: vec!["z_x_0".into()],
            rows: BTreeMap::from([(vec![false], rat(1, 5)), (vec![true], rat(2, 5))]),
        });
        assert_eq!(collision, Err(EncodeError::NameCollision { name: "z_x_0".into() }));
    }

    #[test]
    fn noisy_or_gate_probabilities() {
        let mut spec = bayes_net_to_spec(&[
            Cpt { child: "y1".into(), parents: vec![], rows: BTreeMap::from([(vec![], rat(1, 2))]) },
            Cpt { child: "y2".into(), parents: vec![], rows: BTreeMap::from([(vec![], rat(1, 2))]) },
        ])
        .unwrap();
        noisy_or("x", &["y1".into(), "y2".into()], &[rat(1, 2), rat(1, 3)])
            .unwrap()
            .merge_into(&mut spec)
            .unwrap();
        let ground = ground_spec(&spec, 1).unwrap();
        // Both causes on: P(x=1) = 1 − (1−1/2)(1−1/3) = 2/3.
        let q = Query::new(
            [(GroundAtom::prop("x"), true)],
            [(GroundAtom::prop("y1"), true), (GroundAtom::prop("y2"), true)],
            None,
        )
        .unwrap();
        assert_eq!(query_probability(&ground, &q).unwrap(), rat(2, 3));
        // A leak-free gate: all causes off means the child is off.
        let q = Query::new(
            [(GroundAtom::prop("x"), true)],
            [(GroundAtom::prop("y1"), false), (GroundAtom::prop("y2"), false)],
            None,
        )
        .unwrap();
        assert_eq!(query_probability(&ground, &q).unwrap(), rat(0, 1));
    }

    #[test]
    fn noisy_or_single_cause_with_certain_inhibitor_copies_the_cause() {
        let mut spec = bayes_net_to_spec(&[Cpt {
            child: "y".into(),
            parents: vec![],
            rows: BTreeMap::from([(vec![], rat(2, 7))]),
        }])
        .unwrap();
        noisy_or("x", &["y".into()], &[rat(1, 1)]).unwrap().merge_into(&mut spec).unwrap();
        let ground = ground_spec(&spec, 1).unwrap();
        for (y, expect) in [(true, rat(1, 1)), (false, rat(0, 1))] {
            let q = Query::new(
                [(GroundAtom::prop("x"), true)],
                [(GroundAtom::prop("y"), y)],
                None,
            )
            .unwrap();
            assert_eq!(query_probability(&ground, &q).unwrap(), expect);
        }
        assert_eq!(
            noisy_or("x", &["y".into()], &[]),
            Err(EncodeError::LengthMismatch { causes: 1, probs: 0 })
        );
    }

    #[test]
    fn university_plate_encodes_to_qf_and_pins_the_marginal() {
        let spec = plate_to_spec(&university_plate()).unwrap();
        assert_eq!(classify_fragment(&spec), FragmentLabel::QF);
        assert_eq!(spec.assessment("a_failed_1"), Some(&rat(2, 5)));
        assert_eq!(spec.assessment("a_failed_2"), Some(&rat(1, 5)));
        assert_eq!(spec.assessment("a_failed_3"), Some(&rat(9, 10)));
        assert_eq!(spec.assessment("a_failed_4"), Some(&rat(4, 5)));
        // P(failed(1,1)) = 431/1000, independent of the domain size.
        for n in [1, 3] {
            let ground = ground_spec(&spec, n).unwrap();
            let q = Query::new(
                [(GroundAtom::new("failed", vec![1, 1]), true)],
                [],
                None,
            )
            .unwrap();
            assert_eq!(query_probability(&ground, &q).unwrap(), rat(431, 1000));
        }
    }

    #[test]
    fn plate_parents_must_stay_inside_the_childs_plates() {
        let mut model = university_plate();
        // Make `difficult` range over a plate `failed` does not carry.
        model.attributes[0].plates = vec!["term".into()];
        assert_eq!(
            plate_to_spec(&model),
            Err(EncodeError::PlateNotContained {
                child: "failed".into(),
                parent: "difficult".into()
            })
        );
    }

    #[test]
    fn university_prm_conditions_on_the_skeleton() {
        let (prm, skeleton) = university_prm();
        let (spec, evidence) = prm_to_spec(&prm, &skeleton, 3).unwrap();
        // 3 classes × 3 individuals + 2 slots × 9 pairs.
        assert_eq!(evidence.len(), 27);
        let ground = ground_spec(&spec, 3).unwrap();
        let q = Query::new(
            [(GroundAtom::new("failed", vec![3]), true)],
            evidence,
            None,
        )
        .unwrap();
        assert_eq!(query_probability(&ground, &q).unwrap(), rat(431, 1000));
    }

    #[test]
    fn registration_without_associations_is_vacuously_passed() {
        let (prm, mut skeleton) = university_prm();
        skeleton.slot_pairs.clear();
        let (spec, evidence) = prm_to_spec(&prm, &skeleton, 3).unwrap();
        let ground = ground_spec(&spec, 3).unwrap();
        let q = Query::new(
            [(GroundAtom::new("failed", vec![3]), true)],
            evidence,
            None,
        )
        .unwrap();
        assert_eq!(query_probability(&ground, &q).unwrap(), rat(1, 1));
    }

    #[test]
    fn skeletons_outside_the_declared_classes_are_rejected() {
        let (prm, mut skeleton) = university_prm();
        skeleton
            .slot_pairs
            .get_mut("courseOf")
            .unwrap()
            .insert((2, 3)); // 2 is a student, not a course
        assert!(matches!(
            prm_to_spec(&prm, &skeleton, 3),
            Err(EncodeError::InconsistentSkeleton { .. })
        ));
        let (prm, mut skeleton) = university_prm();
        skeleton.objects.get_mut("course").unwrap().insert(9);
        assert!(matches!(
            skeleton_evidence(&prm, &skeleton, 3),
            Err(EncodeError::InconsistentSkeleton { .. })
        ));
    }

    #[test]
    fn plate_text_format_round_trips_the_university_model() {
        let text = "\
# University World
plate course.
plate student.
attr difficult over course { row : 3/10. }
attr committed over student { row : 7/10. }
attr failed over course, student deps difficult, committed {
  row 0 0 : 2/5.
  row 0 1 : 1/5.
  row 1 0 : 9/10.
  row 1 1 : 4/5.
}
";
        let model = parse_plate(text).unwrap();
        assert_eq!(model, university_plate());
        assert!(matches!(
            parse_plate("plate p. attr a over q { row : 1/2. }"),
            Err(EncodeError::Format { .. })
        ));
        assert!(matches!(
            parse_plate("plate p. attr a over p { row 0 : 1/2. }"),
            Err(EncodeError::Format { .. })
        ));
    }

    #[test]
    fn prm_text_format_round_trips_the_university_model() {
        let text = "\
class course.
class student.
class registration.
slot courseOf : course -> registration.
slot studentOf : student -> registration.
attr difficult on course { row : 3/10. }
attr committed on student { row : 7/10. }
attr failed on registration deps courseOf.difficult, studentOf.committed {
  row 0 0 : 2/5.
  row 0 1 : 1/5.
  row 1 0 : 9/10.
  row 1 1 : 4/5.
}
object course 1.
object student 2.
object registration 3.
pair courseOf 1 3.
pair studentOf 2 3.
";
        let (prm, skeleton) = parse_prm(text).unwrap();
        let (expected_prm, expected_skeleton) = university_prm();
        assert_eq!(prm, expected_prm);
        assert_eq!(skeleton, expected_skeleton);
    }

    #[test]
    fn dimacs_round_trip_and_diagnostics() {
        let text = "\
c a comment
p cnf 4 2
1 -2 3 0
2 3
-4 0
";
        let cnf = parse_dimacs(text).unwrap();
        assert_eq!(cnf.num_vars, 4);
        assert_eq!(cnf.clauses, vec![[1, -2, 3], [2, 3, -4]]);
        assert_eq!(parse_dimacs(&render_dimacs(&cnf)).unwrap(), cnf);
        for bad in [
            "p cnf 2 1\n1 2 0\n",          // two-literal clause
            "1 2 3 0\n",                   // clause before header
            "p cnf 3 1\n1 2 5 0\n",        // literal out of range
            "p cnf 3 1\n1 2 3\n",          // unterminated clause
            "p cnf 3 2\n1 2 3 0\n",        // clause count mismatch
            "p cnf 3 1\n1 1 2 0\n",        // repeated literal
        ] {
            assert!(parse_dimacs(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn gadget_matches_the_pinned_single_clause_count() {
        let phi = Cnf3 { num_vars: 3, clauses: vec![[1, 2, 3]] };
        let gadget = one_in_three_gadget(&phi).unwrap();
        assert_eq!(gadget.num_vars, 8);
        assert_eq!(
            gadget.clauses,
            vec![[-1, 4, 5], [2, 5, 6], [-3, 6, 7], [4, 6, 8]]
        );
        // Seven satisfying assignments of the source clause, each with a
        // unique extension to the fresh propositions.
        assert_eq!(count_models_cnf3(&phi).unwrap(), BigUint::from(7u32));
        assert_eq!(count_one_in_three(&gadget).unwrap(), BigUint::from(7u32));
    }

    #[test]
    fn gadget_identity_on_a_two_clause_formula() {
        let phi = Cnf3 { num_vars: 3, clauses: vec![[1, 2, 3], [-1, 2, 3]] };
        let gadget = one_in_three_gadget(&phi).unwrap();
        assert_eq!(gadget.num_vars, 13);
        assert_eq!(
            count_one_in_three(&gadget).unwrap(),
            count_models_cnf3(&phi).unwrap()
        );
    }

    #[test]
    fn gadget_trivia_and_rejections() {
        let empty = one_in_three_gadget(&Cnf3::default()).unwrap();
        assert_eq!(empty, Cnf3::default());
        assert_eq!(count_models_cnf3(&empty).unwrap(), BigUint::from(1u32));
        let repeated = Cnf3 { num_vars: 2, clauses: vec![[1, 1, 2]] };
        assert_eq!(
            one_in_three_gadget(&repeated),
            Err(EncodeError::RepeatedLiteral { clause: 0 })
        );
        // A proposition and its negation in one clause is not a repeat.
        let opposed = Cnf3 { num_vars: 2, clauses: vec![[1, -1, 2]] };
        assert!(one_in_three_gadget(&opposed).is_ok());
        let big = Cnf3 { num_vars: 26, clauses: vec![] };
        assert_eq!(
            count_models_cnf3(&big),
            Err(EncodeError::TooLarge { vars: 26, cap: 25 })
        );
    }

    #[test]
    fn matrix_formula_matches_the_displayed_clause_family() {
        let p = MatrixProblem::new(3, 2, 5, 6).unwrap();
        let cnf = matrix_problem_to_formula(&p).unwrap();
        assert_eq!(cnf.num_vars, 30);
        assert_eq!(cnf.clauses.len(), 5);
        assert_eq!(cnf.clauses[0], vec![1, 2, 3, 4, 5, 6]);
        assert_eq!(cnf.clauses[1], vec![7, 8, 9, 10, 11, 12]);
        assert_eq!(cnf.clauses[2], vec![13, 14, 15, 16, 17, 18]);
        assert_eq!(cnf.clauses[3], vec![1, 7, 13, 19, 25]);
        assert_eq!(cnf.clauses[4], vec![2, 8, 14, 20, 26]);
        assert!(MatrixProblem::new(3, 2, 3, 6).is_err()); // rows == covered rows
        assert!(MatrixProblem::new(1, 0, 2, 2).is_err()); // no covered column
    }

    #[test]
    fn the_small_matrix_instance_counts_ten_by_every_route() {
        let p = MatrixProblem::new(1, 1, 2, 2).unwrap();
        assert_eq!(count_matrices(&p).unwrap(), BigUint::from(10u32));
        let cnf = matrix_problem_to_formula(&p).unwrap();
        assert_eq!(count_models_monotone(&cnf).unwrap(), BigUint::from(10u32));
        let cb = linmoncbpc_to_bwgraph(&cnf).unwrap();
        assert_eq!(cb, ClassBGraph::new(1, 1, 1, 1).with_extra_free_edges(1));
        assert_eq!(count_covers_class_b(&cb).unwrap(), BigUint::from(10u32));
        // And once more through the explicit materialized graph.
        let (count, _) = count_covers(&cb.to_bwgraph().unwrap()).unwrap();
        assert_eq!(count, BigUint::from(10u32));
    }

    #[test]
    fn layer_sizes_follow_the_clause_structure() {
        let p = MatrixProblem::new(3, 2, 5, 6).unwrap();
        let cb = linmoncbpc_to_bwgraph(&matrix_problem_to_formula(&p).unwrap()).unwrap();
        assert_eq!(cb, ClassBGraph::new(4, 3, 2, 2).with_extra_free_edges(8));
        let p = MatrixProblem::new(3, 2, 5, 5).unwrap();
        let cb = linmoncbpc_to_bwgraph(&matrix_problem_to_formula(&p).unwrap()).unwrap();
        assert_eq!(cb, ClassBGraph::new(3, 3, 2, 2).with_extra_free_edges(6));
    }

    #[test]
    fn structure_checks_reject_non_class_b_formulas() {
        // A variable in three clauses.
        let cnf = MonotoneCnf {
            num_vars: 3,
            clauses: vec![vec![1, 2], vec![1, 3], vec![1, 2, 3]],
        };
        assert!(matches!(
            linmoncbpc_to_bwgraph(&cnf),
            Err(EncodeError::NotLinMonCbpc { .. })
        ));
        // An odd intersection cycle.
        let cnf = MonotoneCnf {
            num_vars: 3,
            clauses: vec![vec![1, 2], vec![2, 3], vec![3, 1]],
        };
        assert!(matches!(
            linmoncbpc_to_bwgraph(&cnf),
            Err(EncodeError::NotLinMonCbpc { .. })
        ));
        // Disconnected intersection graph.
        let cnf = MonotoneCnf { num_vars: 4, clauses: vec![vec![1, 2], vec![3, 4]] };
        assert!(matches!(
            linmoncbpc_to_bwgraph(&cnf),
            Err(EncodeError::NotLinMonCbpc { .. })
        ));
        // Same part, different sizes: two rows of different lengths.
        let cnf = MonotoneCnf {
            num_vars: 6,
            clauses: vec![vec![1, 2], vec![3, 4, 5], vec![1, 3], vec![2, 4]],
        };
        assert!(matches!(
            linmoncbpc_to_bwgraph(&cnf),
            Err(EncodeError::NotLinMonCbpc { .. })
        ));
    }

    #[test]
    fn conversion_triangle_on_small_matrices() {
        for rows in 2..=3u32 {
            for cols in 2..=3u32 {
                for covered_rows in 1..rows {
                    for covered_cols in 1..cols {
                        let p =
                            MatrixProblem::new(covered_rows, covered_cols, rows, cols).unwrap();
                        let direct = count_matrices(&p).unwrap();
                        let cnf = matrix_problem_to_formula(&p).unwrap();
                        assert_eq!(count_models_monotone(&cnf).unwrap(), direct);
                        let cb = linmoncbpc_to_bwgraph(&cnf).unwrap();
                        assert_eq!(count_covers_class_b(&cb).unwrap(), direct, "{p:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn guarded_prm_groundings_stay_within_the_root_cap() {
        // The N=3 University grounding has 42 roots, but conditioning on the
        // skeleton must collapse the enumeration to the six that matter.
        let (prm, skeleton) = university_prm();
        let (spec, evidence) = prm_to_spec(&prm, &skeleton, 3).unwrap();
        let ground = ground_spec(&spec, 3).unwrap();
        let q = Query::new(
            [(GroundAtom::new("failed", vec![3]), true)],
            evidence,
            None,
        )
        .unwrap();
        let r = crate::infer::query_probability_capped(&ground, &q, 6);
        assert_eq!(r.unwrap(), rat(431, 1000));
        // Sanity: an unknown ground atom in the evidence is still an error.
        let q = Query::new(
            [(GroundAtom::new("failed", vec![3]), true)],
            [(GroundAtom::new("nonesuch", vec![1]), true)],
            None,
        )
        .unwrap();
        assert!(matches!(
            query_probability(&ground, &q),
            Err(InferError::UnknownAtom { .. })
        ));
    }
}
