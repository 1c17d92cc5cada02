//! Shared random-model generators for the integration tests. Everything is
//! seeded ChaCha, so failures reproduce exactly.
#![allow(dead_code)] // each test binary uses its own subset

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use relbn_core::model::{
    rat, AxiomOrAssessment, Formula, GroundAtom, GroundNetwork, GroundNode, Query, Rational,
    Relation, RelationalSpec, Term,
};

/// Formula evaluation written from scratch for the oracles: no code shared
/// with the inference engine.
pub fn naive_eval(f: &Formula, values: &BTreeMap<GroundAtom, bool>) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(name, args) => {
            let args = args
                .iter()
                .map(|t| match t {
                    Term::Ind(i) => *i,
                    Term::Var(v) => panic!("logvar {v} in ground formula"),
                })
                .collect();
            values[&GroundAtom::new(name.clone(), args)]
        }
        Formula::Eq(a, b) => a == b,
        Formula::Not(g) => !naive_eval(g, values),
        Formula::And(parts) => parts.iter().all(|p| naive_eval(p, values)),
        Formula::Or(parts) => parts.iter().any(|p| naive_eval(p, values)),
        Formula::Implies(a, b) => !naive_eval(a, values) || naive_eval(b, values),
        Formula::Iff(a, b) => naive_eval(a, values) == naive_eval(b, values),
        Formula::ForAll(..) | Formula::Exists(..) => panic!("quantifier in ground formula"),
    }
}

/// Extend a root assignment to all defined nodes by sweeping until every
/// body's atoms are determined (acyclicity guarantees termination).
pub fn extend_to_total(
    net: &GroundNetwork,
    mut values: BTreeMap<GroundAtom, bool>,
) -> BTreeMap<GroundAtom, bool> {
    loop {
        let mut progressed = false;
        for (atom, node) in &net.nodes {
            if values.contains_key(atom) {
                continue;
            }
            let GroundNode::Defined(body) = node else { continue };
            if net.parents_of(atom).iter().all(|p| values.contains_key(p)) {
                let v = naive_eval(body, &values);
                values.insert(atom.clone(), v);
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    assert_eq!(values.len(), net.nodes.len(), "network not acyclic?");
    values
}

/// The network's roots with their assessed probabilities.
pub fn root_list(net: &GroundNetwork) -> Vec<(GroundAtom, Rational)> {
    net.nodes
        .iter()
        .filter_map(|(a, n)| match n {
            GroundNode::Root(p) => Some((a.clone(), p.clone())),
            GroundNode::Defined(_) => None,
        })
        .collect()
}

/// Brute-force conditional probability: enumerate every root assignment,
/// extend, and accumulate the consistent mass. `Err(())` means the
/// evidence has probability zero.
pub fn oracle_probability(net: &GroundNetwork, query: &Query) -> Result<Rational, ()> {
    let roots = root_list(net);
    assert!(roots.len() <= 16, "oracle is exponential in the roots");
    let mut p_qe = Rational::zero();
    let mut p_e = Rational::zero();
    for mask in 0..(1u32 << roots.len()) {
        let mut weight = Rational::one();
        let mut values = BTreeMap::new();
        for (i, (atom, p)) in roots.iter().enumerate() {
            let on = mask >> i & 1 == 1;
            weight *= if on { p.clone() } else { Rational::one() - p };
            values.insert(atom.clone(), on);
        }
        if weight.is_zero() {
            continue;
        }
        let values = extend_to_total(net, values);
        if query.e.iter().all(|(a, &v)| values[a] == v) {
            p_e += &weight;
            if query.q.iter().all(|(a, &v)| values[a] == v) {
                p_qe += &weight;
            }
        }
    }
    if p_e.is_zero() {
        return Err(());
    }
    Ok(p_qe / p_e)
}

pub struct SpecGen {
    pub rng: ChaCha12Rng,
    /// Maximum relation arity (0 for purely propositional specs).
    pub max_arity: usize,
    pub allow_quantifiers: bool,
    pub allow_equality: bool,
    /// Keep assessed probabilities strictly inside (0,1).
    pub interior_probs: bool,
}

impl SpecGen {
    pub fn new(seed: u64) -> Self {
        SpecGen {
            rng: ChaCha12Rng::seed_from_u64(seed),
            max_arity: 2,
            allow_quantifiers: true,
            allow_equality: true,
            interior_probs: false,
        }
    }

    pub fn propositional(seed: u64) -> Self {
        SpecGen {
            max_arity: 0,
            allow_quantifiers: false,
            allow_equality: false,
            ..SpecGen::new(seed)
        }
    }

    fn probability(&mut self) -> relbn_core::model::Rational {
        if self.interior_probs {
            let den = self.rng.gen_range(2..=9i64);
            rat(self.rng.gen_range(1..den), den)
        } else {
            let den = self.rng.gen_range(1..=9i64);
            rat(self.rng.gen_range(0..=den), den)
        }
    }

    /// A valid acyclic spec: `roots` assessed relations `b0..`, then
    /// `defined` relations `d0..`, each defined over the relations before it.
    pub fn spec(&mut self, roots: usize, defined: usize) -> RelationalSpec {
        let mut relations = Vec::new();
        let mut entries = Vec::new();
        let mut available: Vec<(String, usize)> = Vec::new();
        for i in 0..roots {
            let name = format!("b{i}");
            let arity = self.rng.gen_range(0..=self.max_arity);
            relations.push(Relation::new(&name, arity));
            entries.push(AxiomOrAssessment::Assessment {
                relation: name.clone(),
                prob: self.probability(),
            });
            available.push((name, arity));
        }
        for i in 0..defined {
            let name = format!("d{i}");
            let arity = self.rng.gen_range(0..=self.max_arity);
            let head_vars: Vec<String> = ["x", "y"][..arity].iter().map(|v| v.to_string()).collect();
            let mut scope = head_vars.clone();
            let depth = self.rng.gen_range(1..=3);
            let body = self.formula(depth, &mut scope, &available);
            relations.push(Relation::new(&name, arity));
            entries.push(AxiomOrAssessment::Definition { head: name.clone(), head_vars, body });
            available.push((name, arity));
        }
        RelationalSpec { relations, entries }
    }

    fn atom(&mut self, scope: &[String], available: &[(String, usize)]) -> Formula {
        // Bodies may only mention logvars in scope, so relations of positive
        // arity are reachable only when the scope is non-empty.
        let usable: Vec<&(String, usize)> = available
            .iter()
            .filter(|(_, arity)| *arity == 0 || !scope.is_empty())
            .collect();
        match usable.choose(&mut self.rng) {
            None => {
                if self.rng.gen_bool(0.5) {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Some((name, arity)) => {
                let args = (0..*arity)
                    .map(|_| Term::Var(scope.choose(&mut self.rng).unwrap().clone()))
                    .collect();
                Formula::atom(name.clone(), args)
            }
        }
    }

    fn formula(
        &mut self,
        depth: usize,
        scope: &mut Vec<String>,
        available: &[(String, usize)],
    ) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.25) {
            let roll = self.rng.gen_range(0..10);
            return match roll {
                0 => Formula::True,
                1 => Formula::False,
                2 | 3 if self.allow_equality && scope.len() >= 2 => Formula::Eq(
                    Term::Var(scope.choose(&mut self.rng).unwrap().clone()),
                    Term::Var(scope.choose(&mut self.rng).unwrap().clone()),
                ),
                _ => self.atom(scope, available),
            };
        }
        let connectives = if self.allow_quantifiers { 6 } else { 5 };
        match self.rng.gen_range(0..connectives) {
            0 => Formula::not(self.formula(depth - 1, scope, available)),
            1 | 2 => {
                let n = self.rng.gen_range(2..=3);
                let parts = (0..n)
                    .map(|_| self.formula(depth - 1, scope, available))
                    .collect();
                if self.rng.gen_bool(0.5) {
                    Formula::And(parts)
                } else {
                    Formula::Or(parts)
                }
            }
            3 => Formula::Implies(
                Box::new(self.formula(depth - 1, scope, available)),
                Box::new(self.formula(depth - 1, scope, available)),
            ),
            4 => Formula::Iff(
                Box::new(self.formula(depth - 1, scope, available)),
                Box::new(self.formula(depth - 1, scope, available)),
            ),
            _ => {
                let var = format!("q{}", scope.len());
                scope.push(var.clone());
                let inner = self.formula(depth - 1, scope, available);
                scope.pop();
                if self.rng.gen_bool(0.5) {
                    Formula::ForAll(var, Box::new(inner))
                } else {
                    Formula::Exists(var, Box::new(inner))
                }
            }
        }
    }
}
