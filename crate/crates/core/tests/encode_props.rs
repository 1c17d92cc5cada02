//! Faithfulness of the encoders: encoded specifications reproduce the
//! source model's distribution exactly, the clause gadget preserves model
//! counts under the exactly-one reading, and the matrix/formula/graph
//! conversions count the same objects.

mod common;

use std::collections::BTreeMap;

use common::{extend_to_total, root_list};
use num_traits::{One, Zero};
use proptest::prelude::*;
use relbn_core::edgecover::count_covers_class_b;
use relbn_core::encode::{
    bayes_net_to_spec, count_matrices, count_models_cnf3, count_models_monotone,
    count_one_in_three, linmoncbpc_to_bwgraph, matrix_problem_to_formula, noisy_or,
    one_in_three_gadget, Cnf3, Cpt, MatrixProblem,
};
use relbn_core::ground::ground_spec;
use relbn_core::infer::query_probability;
use relbn_core::model::{rat, GroundAtom, Query, Rational};

/// A random chain-with-skips network over `vars` propositions: variable i
/// has 0–2 parents among the earlier ones, rows drawn from a small grid.
fn cpt_net_strategy() -> impl Strategy<Value = Vec<Cpt>> {
    (2usize..=4, any::<u64>()).prop_map(|(vars, bits)| {
        let mut take = bits;
        let mut next = |m: u64| {
            let v = take % m;
            take /= m;
            v
        };
        (0..vars)
            .map(|i| {
                let k = (next(3) as usize).min(i);
                let parents: Vec<String> =
                    (0..k).map(|j| format!("v{}", (next((i as u64).max(1)) as usize + j) % i)).collect();
                // Distinct parents: fall back to the prefix when the draw collides.
                let parents: Vec<String> = if parents.len() == 2 && parents[0] == parents[1] {
                    vec![parents[0].clone()]
                } else {
                    parents
                };
                let mut rows = BTreeMap::new();
                for r in 0..(1usize << parents.len()) {
                    let cfg: Vec<bool> =
                        (0..parents.len()).map(|j| (r >> (parents.len() - 1 - j)) & 1 == 1).collect();
                    rows.insert(cfg, rat(1 + next(9) as i64, 10));
                }
                Cpt { child: format!("v{i}"), parents, rows }
            })
            .collect()
    })
}

/// Marginal of each variable computed directly from the tables, with no
/// reference to the encoding: enumerate all variable assignments.
fn direct_marginals(cpts: &[Cpt]) -> BTreeMap<String, Rational> {
    let n = cpts.len();
    let index: BTreeMap<&str, usize> =
        cpts.iter().enumerate().map(|(i, c)| (c.child.as_str(), i)).collect();
    let mut marginals: BTreeMap<String, Rational> =
        cpts.iter().map(|c| (c.child.clone(), Rational::zero())).collect();
    for mask in 0..(1u32 << n) {
        let value = |name: &str| mask >> index[name] & 1 == 1;
        let mut weight = Rational::one();
        for cpt in cpts {
            let cfg: Vec<bool> = cpt.parents.iter().map(|p| value(p)).collect();
            let p = &cpt.rows[&cfg];
            weight *= if value(&cpt.child) { p.clone() } else { Rational::one() - p };
        }
        for cpt in cpts {
            if value(&cpt.child) {
                *marginals.get_mut(&cpt.child).unwrap() += &weight;
            }
        }
    }
    marginals
}

proptest! {
    /// The encoded network reproduces every variable's marginal exactly.
    #[test]
    fn cpt_encoding_is_faithful(cpts in cpt_net_strategy()) {
        let spec = bayes_net_to_spec(&cpts).unwrap();
        let net = ground_spec(&spec, 1).unwrap();
        prop_assert!(root_list(&net).len() <= 2 * (1 << 2) + 4);
        let expected = direct_marginals(&cpts);
        for (name, want) in expected {
            let q = Query::new([(GroundAtom::prop(&name), true)], [], None).unwrap();
            prop_assert_eq!(query_probability(&net, &q).unwrap(), want, "{}", name);
        }
    }

    /// Noisy-or closed form: with causes S active, the child fires with
    /// probability 1 − Π_{i∈S}(1 − pᵢ).
    #[test]
    fn noisy_or_matches_the_closed_form(
        probs in prop::collection::vec((1i64..6, 6i64..9), 1..4),
        active_bits in any::<u8>(),
    ) {
        let causes: Vec<String> = (0..probs.len()).map(|i| format!("y{i}")).collect();
        let inhibitors: Vec<Rational> = probs.iter().map(|&(n, d)| rat(n, d)).collect();
        let root_tables: Vec<Cpt> = causes
            .iter()
            .map(|c| Cpt {
                child: c.clone(),
                parents: vec![],
                rows: BTreeMap::from([(vec![], rat(1, 2))]),
            })
            .collect();
        let mut spec = bayes_net_to_spec(&root_tables).unwrap();
        noisy_or("x", &causes, &inhibitors).unwrap().merge_into(&mut spec).unwrap();
        let net = ground_spec(&spec, 1).unwrap();

        let active: Vec<bool> = (0..causes.len()).map(|i| active_bits >> i & 1 == 1).collect();
        let e: Vec<(GroundAtom, bool)> = causes
            .iter()
            .zip(&active)
            .map(|(c, &on)| (GroundAtom::prop(c), on))
            .collect();
        let q = Query::new([(GroundAtom::prop("x"), true)], e, None).unwrap();
        let got = query_probability(&net, &q).unwrap();
        let mut miss = Rational::one();
        for (p, &on) in inhibitors.iter().zip(&active) {
            if on {
                miss *= Rational::one() - p;
            }
        }
        prop_assert_eq!(got, Rational::one() - miss);
    }

    /// The exactly-one count of the gadget equals the plain model count of
    /// the source formula.
    #[test]
    fn gadget_preserves_model_counts(
        num_vars in 3u32..=5,
        raw in prop::collection::vec((any::<u16>(), any::<u16>(), any::<u16>(), any::<u8>()), 1..=3),
    ) {
        let clauses: Vec<[i32; 3]> = raw
            .iter()
            .map(|&(a, b, c, signs)| {
                // Three distinct propositions, random signs.
                let p = 1 + (a as u32 % num_vars) as i32;
                let mut q = 1 + (b as u32 % num_vars) as i32;
                if q == p { q = 1 + (q as u32 % num_vars) as i32; }
                let mut r = 1 + (c as u32 % num_vars) as i32;
                while r == p || r == q { r = 1 + (r as u32 % num_vars) as i32; }
                let s = |bit: u8, lit: i32| if signs >> bit & 1 == 1 { -lit } else { lit };
                [s(0, p), s(1, q), s(2, r)]
            })
            .collect();
        prop_assume!(clauses.iter().all(|c| c[0] != c[1] && c[0] != c[2] && c[1] != c[2]));
        let phi = Cnf3 { num_vars, clauses };
        let gadget = one_in_three_gadget(&phi).unwrap();
        prop_assert_eq!(gadget.num_vars, num_vars + 5 * phi.clauses.len() as u32);
        prop_assert_eq!(
            count_one_in_three(&gadget).unwrap(),
            count_models_cnf3(&phi).unwrap()
        );
    }

    /// Matrix count = monotone-formula count = class-B edge-cover count on
    /// every instance small enough to enumerate.
    #[test]
    fn conversion_triangle(rows in 2u32..=4, cols in 2u32..=4, cr in 1u32..=3, cc in 1u32..=3) {
        prop_assume!(cr < rows && cc < cols);
        let p = MatrixProblem::new(cr, cc, rows, cols).unwrap();
        let direct = count_matrices(&p).unwrap();
        let cnf = matrix_problem_to_formula(&p).unwrap();
        prop_assert_eq!(count_models_monotone(&cnf).unwrap(), direct.clone());
        let cb = linmoncbpc_to_bwgraph(&cnf).unwrap();
        prop_assert_eq!(count_covers_class_b(&cb).unwrap(), direct);
    }
}

/// The two-parent encoding keeps parent interactions: compare a full joint
/// query, not just marginals.
#[test]
fn cpt_encoding_preserves_joint_queries() {
    let cpts = vec![
        Cpt { child: "v0".into(), parents: vec![], rows: BTreeMap::from([(vec![], rat(1, 3))]) },
        Cpt { child: "v1".into(), parents: vec![], rows: BTreeMap::from([(vec![], rat(1, 4))]) },
        Cpt {
            child: "v2".into(),
            parents: vec!["v0".into(), "v1".into()],
            rows: BTreeMap::from([
                (vec![false, false], rat(1, 10)),
                (vec![false, true], rat(2, 10)),
                (vec![true, false], rat(3, 10)),
                (vec![true, true], rat(4, 10)),
            ]),
        },
    ];
    let spec = bayes_net_to_spec(&cpts).unwrap();
    let net = ground_spec(&spec, 1).unwrap();
    // P(v2=1, v0=1, v1=0) = 1/3 · 3/4 · 3/10 = 3/40.
    let q = Query::new(
        [
            (GroundAtom::prop("v2"), true),
            (GroundAtom::prop("v0"), true),
            (GroundAtom::prop("v1"), false),
        ],
        [],
        None,
    )
    .unwrap();
    assert_eq!(query_probability(&net, &q).unwrap(), rat(3, 40));
    // And conditioning works through the encoding: P(v2=1 | v0=1, v1=0) = 3/10.
    let q = Query::new(
        [(GroundAtom::prop("v2"), true)],
        [(GroundAtom::prop("v0"), true), (GroundAtom::prop("v1"), false)],
        None,
    )
    .unwrap();
    assert_eq!(query_probability(&net, &q).unwrap(), rat(3, 10));
    // The defined node tracks its table row deterministically.
    let values = extend_to_total(
        &net,
        net.nodes
            .iter()
            .filter_map(|(a, n)| match n {
                relbn_core::model::GroundNode::Root(_) => Some((a.clone(), a.relation == "z_v2_10")),
                _ => None,
            })
            .collect(),
    );
    assert!(!values[&GroundAtom::prop("v2")]); // v0 = v1 = 0 ⇒ row 00 decides, and z_v2_00 is off
}
