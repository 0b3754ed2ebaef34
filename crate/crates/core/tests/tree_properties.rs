use std::collections::BTreeSet;

use bhw_core::formulas::{negate, parse_formula, Formula};
use bhw_core::trees::{
    alpha_tree_height, alpha_tree_stages, eq_star, eval_truth, mem_star, relabel, shapes, subtree,
    Assignment, Budget, TreeSet, Truth,
};
use bhw_core::{OrdTerm, SetTerm};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn finite_nodes(t: &TreeSet) -> BTreeSet<Vec<u64>> {
    t.materialize().unwrap()
}

struct Tables {
    trees: Vec<TreeSet>,
    eq: Vec<Vec<bool>>,
    mem: Vec<Vec<bool>>,
}

fn tables(max_nodes: usize) -> Tables {
    let trees = shapes(max_nodes, max_nodes);
    let row = |f: &dyn Fn(&TreeSet, &TreeSet) -> bool| -> Vec<Vec<bool>> {
        trees
            .iter()
            .map(|s| trees.iter().map(|t| f(s, t)).collect())
            .collect()
    };
    let eq = row(&|s, t| eq_star(s, t).unwrap());
    let mem = row(&|s, t| mem_star(s, t).unwrap());
    Tables { trees, eq, mem }
}

#[test]
fn eq_star_is_an_equivalence_and_transports_membership() {
    let tb = tables(7);
    let n = tb.trees.len();
    assert_eq!(n, 85);
    for i in 0..n {
        assert!(tb.eq[i][i]);
        for j in 0..n {
            assert_eq!(tb.eq[i][j], tb.eq[j][i]);
            for k in 0..n {
                if tb.eq[i][j] && tb.eq[j][k] {
                    assert!(
                        tb.eq[i][k],
                        "{} {} {}",
                        tb.trees[i], tb.trees[j], tb.trees[k]
                    );
                }
                if tb.eq[i][j] && tb.mem[i][k] {
                    assert!(tb.mem[j][k]);
                }
                if tb.eq[i][j] && tb.mem[k][i] {
                    assert!(tb.mem[k][j]);
                }
            }
        }
    }
}

#[test]
fn membership_is_equality_with_an_immediate_subtree() {
    let tb = tables(7);
    for (i, s) in tb.trees.iter().enumerate() {
        for (j, t) in tb.trees.iter().enumerate() {
            let kids = t.child_labels().unwrap();
            let direct = kids
                .iter()
                .any(|&k| eq_star(s, &subtree(t, &[k]).unwrap()).unwrap());
            assert_eq!(tb.mem[i][j], direct, "{s} ∈* {t}");
        }
    }
}

fn big_tree() -> impl Strategy<Value = TreeSet> {
    let all = shapes(12, 4);
    (0..all.len(), any::<u64>()).prop_map(move |(i, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TreeSet::Finite(relabel(&finite_nodes(&all[i]), 9, &mut rng))
    })
}

fn pool() -> Vec<OrdTerm> {
    (1..=8)
        .map(OrdTerm::nat)
        .chain([OrdTerm::omega(), OrdTerm::omega().succ()])
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eq_star_on_twelve_node_trees(s in big_tree(), t in big_tree(), u in big_tree(), seed in any::<u64>()) {
        prop_assert!(eq_star(&s, &s).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s2 = TreeSet::Finite(relabel(&finite_nodes(&s), 11, &mut rng));
        prop_assert!(eq_star(&s, &s2).unwrap());
        prop_assert_eq!(eq_star(&s, &t).unwrap(), eq_star(&t, &s).unwrap());
        prop_assert_eq!(eq_star(&s, &t).unwrap(), eq_star(&s2, &t).unwrap());
        prop_assert_eq!(mem_star(&s, &u).unwrap(), mem_star(&s2, &u).unwrap());
        if eq_star(&s, &t).unwrap() && eq_star(&t, &u).unwrap() {
            prop_assert!(eq_star(&s, &u).unwrap());
        }
    }

    #[test]
    fn alpha_tree_algorithms_agree(t in big_tree(), k in 0usize..10) {
        let a = pool().swap_remove(k);
        prop_assert_eq!(alpha_tree_height(&t, &a).unwrap(), alpha_tree_stages(&t, &a).unwrap());
    }
}

fn b_formula() -> impl Strategy<Value = Formula> {
    let atoms = vec![
        "(in a b)",
        "(in b a)",
        "(nin a omega)",
        "(in empty a)",
        "(M 2 a)",
        "(nM 3 b)",
        "(M w b)",
        "(rel U a)",
        "(nrel U b)",
        "(in a empty)",
    ];
    let leaf = proptest::sample::select(atoms).prop_map(|s| parse_formula(s).unwrap());
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(g, h)| Formula::Or(Box::new(g), Box::new(h))),
            (inner.clone(), inner.clone())
                .prop_map(|(g, h)| Formula::And(Box::new(g), Box::new(h))),
            inner.clone().prop_map(|g| {
                let body = Formula::Or(
                    Box::new(Formula::In(SetTerm::var("x"), SetTerm::var("a"))),
                    Box::new(g),
                );
                Formula::BEx("x".into(), SetTerm::var("b"), Box::new(body))
            }),
            inner.prop_map(|g| {
                let body = Formula::Or(
                    Box::new(Formula::NotIn(SetTerm::var("y"), SetTerm::var("a"))),
                    Box::new(g),
                );
                Formula::RAll(OrdTerm::nat(2), "y".into(), Box::new(body))
            }),
        ]
    })
}

fn assignment() -> impl Strategy<Value = Assignment> {
    let small = shapes(5, 3);
    let t = (0..small.len() + 3).prop_map(move |i| match i.checked_sub(small.len()) {
        None => small[i].clone(),
        Some(k) => TreeSet::NStar(k as u64 + 1),
    });
    (
        t.clone(),
        t.clone(),
        prop_oneof![
            Just(TreeSet::leaf()),
            Just(TreeSet::NStar(2)),
            Just(TreeSet::NStar(3))
        ],
    )
        .prop_map(|(a, b, u)| {
            [
                ("a".to_string(), a),
                ("b".to_string(), b),
                ("U".to_string(), u),
            ]
            .into()
        })
}

fn quantifier_free(f: &Formula) -> bool {
    match f {
        Formula::Or(g, h) | Formula::And(g, h) => quantifier_free(g) && quantifier_free(h),
        Formula::In(..) | Formula::NotIn(..) | Formula::Rel(..) | Formula::NotRel(..) => true,
        Formula::M(..) | Formula::NotM(..) => true,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn truth_is_consistent_under_negation(f in b_formula(), env in assignment()) {
        let budget = Budget { tree_size_max: 5, witness_max: 16 };
        let v = eval_truth(&f, &env, &budget).unwrap();
        let w = eval_truth(&negate(&f), &env, &budget).unwrap();
        prop_assert!(!(v == Truth::True && w == Truth::True), "{}", f);
        prop_assert!(!(v == Truth::False && w == Truth::False), "{}", f);
        prop_assert!(v == Truth::Unknown || w == v.not());
    }

    #[test]
    fn quantifier_free_truth_is_two_valued(f in b_formula(), env in assignment()) {
        prop_assume!(quantifier_free(&f));
        let budget = Budget { tree_size_max: usize::MAX, witness_max: usize::MAX };
        prop_assert_ne!(eval_truth(&f, &env, &budget).unwrap(), Truth::Unknown);
    }
}
