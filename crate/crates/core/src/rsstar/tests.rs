use super::*;
use crate::formulas::{mem, parse_formula, parse_term};
use crate::ordinals::parse;

fn o(s: &str) -> OrdTerm {
    parse(s).unwrap()
}

fn f(s: &str) -> Formula {
    canon(&parse_formula(s).unwrap())
}

fn t(s: &str) -> SetTerm {
    parse_term(s).unwrap()
}

fn cfg(depth: usize, samples: usize) -> CheckConfig {
    CheckConfig {
        depth,
        samples,
        seed: 7,
    }
}

fn assert_checks(c: &Cert, depth: usize, samples: usize) {
    let rep = cert_check(c, cfg(depth, samples));
    assert!(rep.ok, "{:#?}", rep.violations);
}

#[test]
fn h_mem_examples() {
    assert!(h_mem(&big_omega(), &DOp::free()));
    assert!(h_mem(&big_omega(), &DOp::sigma(zero())));
    assert!(h_mem(&o("p(0)"), &DOp::sigma(zero())));
    assert!(!h_mem(&o("p(w^(W + 1))"), &DOp::sigma(zero())));
    assert!(!h_mem(&o("p(0)"), &DOp::free()));
    let m = DOp::free().with([&o("p(0)")]);
    assert!(h_mem(&o("w^(p(0)) + 3"), &m));
    assert!(!h_mem(&o("p(1)"), &m));
}

#[test]
fn h_mem_matches_in_c_for_empty_generators() {
    let sigmas = [zero(), o("1"), o("W"), o("w^(W + 1)")];
    for t in enumerate_upto(5) {
        for s in &sigmas {
            let op = DOp::sigma(s.clone());
            assert_eq!(h_mem(&t, &op), in_c(&t, &s.succ()), "{t} under σ={s}");
            // the saturation path agrees once a harmless generator is present
            let op2 = DOp::Sigma(s.clone(), [o("1")].into_iter().collect());
            assert_eq!(
                h_mem(&t, &op2),
                in_c(&t, &s.succ()),
                "{t} under σ={s} with generator"
            );
        }
    }
}

#[test]
fn operator_order() {
    let a = DOp::free().with([&o("p(0)")]);
    assert!(DOp::free().le(&a));
    assert!(!a.le(&DOp::free()));
    assert!(a.le(&DOp::sigma(zero())));
    assert!(!DOp::sigma(o("1")).le(&DOp::sigma(zero())));
    assert!(DOp::sigma(zero()).le(&DOp::sigma(o("1"))));
    assert!(!DOp::sigma(zero()).le(&DOp::free()));
}

#[test]
fn axiom_examples() {
    assert_eq!(
        rs_check_axiom(&seq([NotM(zero(), t("a"))])),
        Some(RsAxiom::NotM0)
    );
    assert_eq!(RsAxiom::NotM0.number(), 4);
    let s = seq([NotM(o("2"), t("a")), M(o("w"), t("a"))]);
    assert_eq!(rs_check_axiom(&s), Some(RsAxiom::MMono));
    assert_eq!(RsAxiom::MMono.number(), 10);
    let s = seq([NotM(o("w"), t("a")), M(o("2"), t("a"))]);
    assert_eq!(rs_check_axiom(&s), None);
    let g = f("(ex x (in x a))");
    assert_eq!(rs_check_axiom(&seq([g.clone(), negate(&g)])), None);
    let d = f("(in a b)");
    assert_eq!(
        rs_check_axiom(&seq([d.clone(), negate(&d)])),
        Some(RsAxiom::Tnd)
    );
    assert_eq!(
        rs_check_axiom(&seq([M(o("w + 1"), SetTerm::Omega)])),
        Some(RsAxiom::MOmega)
    );
    assert_eq!(
        rs_check_axiom(&seq([M(o("1"), SetTerm::Empty)])),
        Some(RsAxiom::MEmpty)
    );
    assert_eq!(
        rs_check_axiom(&seq([NotIn(t("b"), SetTerm::Empty)])),
        Some(RsAxiom::NotInEmpty)
    );
    let s = seq([
        NotM(o("3"), t("a")),
        NotIn(t("b"), t("a")),
        M(o("2"), t("b")),
    ]);
    assert_eq!(rs_check_axiom(&s), Some(RsAxiom::MPred));
    let s = seq([NotRel("U".into(), t("a")), mem(t("a"), SetTerm::Omega)]);
    assert_eq!(rs_check_axiom(&s), Some(RsAxiom::SubOmega));
    assert_eq!(
        rs_check_axiom(&seq([
            NotM(o("1"), t("a")),
            canon(&formulas::infinity(&t("a")))
        ])),
        Some(RsAxiom::Infinity)
    );
}

#[test]
fn structured_axioms() {
    let (a, b) = (t("a"), t("b"));
    let pair = rank_to(&canon(&taitkp::pair_instance(&a, &b)), &o("4"));
    let s = seq([
        NotM(o("1"), a.clone()),
        NotM(o("3"), b.clone()),
        pair.clone(),
    ]);
    assert_eq!(rs_check_axiom(&s), Some(RsAxiom::Pair));
    let s = seq([
        NotM(o("3"), a.clone()),
        NotM(o("1"), b.clone()),
        pair.clone(),
    ]);
    assert_eq!(rs_check_axiom(&s), Some(RsAxiom::Pair));
    let s = seq([NotM(o("2"), a.clone()), NotM(o("1"), b.clone()), pair]);
    assert_eq!(rs_check_axiom(&s), None);

    let s = seq([NotM(o("2"), a.clone()), union_formula(&o("2"), &a)]);
    assert_eq!(rs_check_axiom(&s), Some(RsAxiom::Union));

    let d = f("(in x b)");
    let sep = rank_to(&canon(&taitkp::sep_instance(&a, &d, "x")), &o("3"));
    assert_eq!(
        rs_check_axiom(&seq([NotM(o("2"), a.clone()), sep.clone()])),
        Some(RsAxiom::Sep)
    );
    assert_eq!(rs_check_axiom(&seq([NotM(o("1"), a.clone()), sep])), None);
    let nd = f("(ex y (in y x))");
    let bad = rank_to(&canon(&taitkp::sep_instance(&a, &nd, "x")), &o("3"));
    assert_eq!(rs_check_axiom(&seq([NotM(o("2"), a.clone()), bad])), None);

    let ca = canon(&taitkp::ca_instance(&f("(rel Y x)"), "x", "Y"));
    assert_eq!(rs_check_axiom(&seq([ca])), Some(RsAxiom::Ca));

    let eq = canon(&negate(&formulas::set_eq(&a, &b)));
    let s = seq([eq.clone(), negate(&f("(in a c)")), f("(in b c)")]);
    assert_eq!(rs_check_axiom(&s), Some(RsAxiom::Equality));
    let s = seq([eq, negate(&f("(in a c)")), f("(in c b)")]);
    assert_eq!(rs_check_axiom(&s), None);
}

#[test]
fn checker_accepts_axiom_leaf() {
    let c = leaf(
        seq([NotM(zero(), t("a"))]),
        zero(),
        zero(),
        DOp::free(),
        RsAxiom::NotM0,
    );
    let rep = cert_check(&c, cfg(3, 3));
    assert!(rep.ok && rep.complete);
    assert_eq!(rep.status(), "verified");
}

#[test]
fn checker_rejects_cut_rank() {
    let d = f("(in a b)");
    let ax0 = leaf(
        seq([d.clone(), negate(&d)]),
        zero(),
        zero(),
        DOp::free(),
        RsAxiom::Tnd,
    );
    let c = node(
        seq([d.clone(), negate(&d)]),
        o("1"),
        zero(),
        DOp::free(),
        RsRule::Cut { formula: d.clone() },
        list(vec![ax0.clone(), ax0]),
    );
    let rep = cert_check(&c, cfg(3, 3));
    assert!(!rep.ok);
    assert!(
        rep.violations[0].reason.contains("rank"),
        "{:?}",
        rep.violations
    );
    assert!(matches!(
        cert_verify(&c, cfg(3, 3)),
        Err(RsError::SideCondition { .. })
    ));
}

#[test]
fn checker_rejects_low_s0_reflection() {
    let a = f("(ball x a (ex y (in x y)))");
    let good = derive_s0_ref(&a, &[], &DOp::free()).unwrap();
    assert_checks(&good, 3, 3);
    let refl = good.premise(&Param::Index(0)).unwrap();
    let low = relabel(
        &refl,
        refl.conclusion.clone(),
        big_omega(),
        zero(),
        refl.op.clone(),
    );
    let rep = cert_check(&low, cfg(0, 1));
    assert!(
        rep.violations
            .iter()
            .any(|v| v.reason.contains("not above Ω")),
        "{:?}",
        rep.violations
    );
}

#[test]
fn checker_rejects_bad_premise_label_and_extra_formula() {
    let d = f("(in a b)");
    let ax = leaf(
        seq([d.clone(), negate(&d)]),
        o("5"),
        zero(),
        DOp::free(),
        RsAxiom::Tnd,
    );
    let or_f = canon(&or(d.clone(), negate(&d)));
    let c = node(
        seq([or_f.clone()]),
        o("3"),
        zero(),
        DOp::free(),
        RsRule::Or {
            principal: or_f.clone(),
        },
        list(vec![ax]),
    );
    let rep = cert_check(&c, cfg(2, 2));
    assert!(rep
        .violations
        .iter()
        .any(|v| v.reason.contains("premise label")));
    let stray = leaf(
        seq([d.clone(), negate(&d), f("(in c c)")]),
        zero(),
        zero(),
        DOp::free(),
        RsAxiom::Tnd,
    );
    let c = node(
        seq([or_f.clone()]),
        o("3"),
        zero(),
        DOp::free(),
        RsRule::Or { principal: or_f },
        list(vec![stray]),
    );
    let rep = cert_check(&c, cfg(2, 2));
    assert!(rep
        .violations
        .iter()
        .any(|v| v.reason.contains("neither in the conclusion")));
}

#[test]
fn checker_rejects_label_outside_operator() {
    let c = leaf(
        seq([NotM(zero(), t("a"))]),
        o("p(0)"),
        zero(),
        DOp::free(),
        RsAxiom::NotM0,
    );
    assert!(!cert_check(&c, cfg(1, 1)).ok);
    assert!(
        cert_check(
            &relabel(
                &c,
                c.conclusion.clone(),
                o("p(0)"),
                zero(),
                DOp::sigma(zero())
            ),
            cfg(1, 1)
        )
        .ok
    );
}

#[test]
fn tnd_labels_and_checks() {
    let d = f("(in a b)");
    let c = derive_tnd(&d, &DOp::free());
    assert!(matches!(c.rule, RsRule::Axiom(RsAxiom::Tnd)));
    for s in [
        "(ex x (in x a))",
        "(or (ex x (in x a)) (in a b))",
        "(bex x a (ex y (in y x)))",
        "(rex 3 x (in x a))",
        "(Rex X (ex x (rel X x)))",
    ] {
        let g = f(s);
        let c = derive_tnd(&g, &DOp::free());
        let r = rank(&g);
        assert_eq!(c.alpha, nsum(&r, &r), "{s}");
        assert_eq!(c.rho, zero());
        assert_eq!(c.conclusion, seq([g.clone(), negate(&g)]));
        assert_checks(&c, 3, 5);
    }
    let g = f("(ex x (in x a))");
    let c = derive_tnd(&g, &DOp::free());
    let prem = c.premise(&Param::Pair(o("2"), t("c"))).unwrap();
    let rb = rank(&canon(&and(M(o("2"), t("c")), inst(&g, &t("c")))));
    assert_eq!(prem.alpha, nsum(&rb, &rank(&g)));
}

#[test]
fn lifting_label() {
    let body = f("(in a z)");
    let c = derive_lifting(&o("w"), "z", &body, &DOp::free());
    let r = rank(&canon(&rex(o("w"), "z", body.clone())));
    assert_eq!(c.alpha, nsum(&r, &r));
    assert_eq!(c.rho, zero());
    assert_eq!(c.conclusion.len(), 2);
    assert!(c.conclusion.contains(&canon(&ex("z", body))));
    assert_checks(&c, 4, 5);
}

#[test]
fn eps_ind_label_and_limit_node() {
    let body = f("(in u b)");
    let c = derive_eps_ind("u", &body, &DOp::free());
    let e = canon(&taitkp::eps_ind_instance(&body, "u"));
    let Or(ng, _) = &e else { panic!() };
    let sigma = omega_pow(&rank(&negate(ng)));
    assert_eq!(c.alpha, nf_sum(&sigma, &big_omega().succ()));
    assert_eq!(c.rho, big_omega());
    assert_eq!(c.conclusion, seq([e]));
    let all = c.premise(&Param::Index(0)).unwrap();
    let st = all
        .premise(&Param::Pair(o("w"), t("a")))
        .unwrap()
        .premise(&Param::Index(0))
        .unwrap();
    assert!(matches!(st.rule, RsRule::NotM { .. }));
    assert_checks(&c, 9, 3);
}

#[test]
fn constants_and_comprehension_builders() {
    let op = DOp::free();
    let c = derive_pair(&t("a"), &o("2"), &t("b"), &o("w"), &op);
    assert_eq!(c.alpha, omega_pow(&o("w + 2")));
    assert_checks(&c, 5, 3);
    let c = derive_union(&t("a"), &o("3"), &op);
    assert_eq!(c.alpha, omega_pow(&o("5")));
    assert_checks(&c, 5, 3);
    let c = derive_sep(
        &t("a"),
        &o("1"),
        "x",
        &f("(in x b)"),
        &[(t("b"), o("4"))],
        &op,
    )
    .unwrap();
    assert_eq!(c.alpha, omega_pow(&o("6")));
    assert_checks(&c, 5, 3);
    let c = derive_ca(&f("(rel Y x)"), "x", "Y", &[], &op).unwrap();
    assert_eq!((c.alpha.clone(), c.rho.clone()), (zero(), zero()));
    assert_checks(&c, 2, 2);
    assert_checks(&derive_empty_set(&op), 3, 3);
    assert_checks(&derive_omega_level(&op), 1, 1);
    assert_checks(&derive_infinity_eq(&t("a"), &o("1"), &op), 1, 1);
    assert!(derive_sep(&t("a"), &o("1"), "x", &f("(ex y (in y x))"), &[], &op).is_err());
}

#[test]
fn s0_reflection_label() {
    let a = f("(ball x a (ex y (in x y)))");
    let c = derive_s0_ref(&a, &[(t("a"), o("1"))], &DOp::free()).unwrap();
    assert_eq!(c.alpha, omega_pow(&rank(&a).succ()));
    assert!(c.conclusion.contains(&NotM(o("1"), t("a"))));
    assert_checks(&c, 5, 3);
    assert!(derive_s0_ref(&f("(all x (in x a))"), &[], &DOp::free()).is_err());
}

#[test]
fn weaken_examples() {
    let c = derive_union(&t("a"), &o("1"), &DOp::free());
    let same = weaken(&c, &c.alpha, &c.rho, &Sequent::new()).unwrap();
    assert_eq!(
        (same.alpha.clone(), same.conclusion.clone()),
        (c.alpha.clone(), c.conclusion.clone())
    );
    let raised = weaken(&c, &c.alpha, &big_omega(), &Sequent::new()).unwrap();
    assert_eq!(raised.rho, big_omega());
    assert_checks(&raised, 4, 2);
    assert!(weaken(&c, &o("p(0)"), &c.rho, &Sequent::new()).is_err());
    assert!(weaken(&c, &zero(), &c.rho, &Sequent::new()).is_err());
}

#[test]
fn inversion_examples() {
    let g = f("(or (ex x (in x a)) (ex y (in y b)))");
    let c = derive_tnd(&g, &DOp::free());
    let i = invert(&c, &g, &Inversion::Or).unwrap();
    assert_eq!(i.alpha, c.alpha);
    assert!(i.conclusion.contains(&f("(ex x (in x a))")) && !i.conclusion.contains(&g));
    assert_checks(&i, 4, 3);
    let h = f("(Rall X (ex x (rel X x)))");
    let c = derive_tnd(&h, &DOp::free());
    let i = invert(&c, &h, &Inversion::All2("V".into())).unwrap();
    assert!(i.conclusion.contains(&f("(ex x (rel V x))")));
    assert_checks(&i, 4, 3);
    let low = f("(or (in a b) (in b a))");
    let c = derive_tnd(&low, &DOp::free());
    assert!(invert(&c, &low, &Inversion::Or).is_err());
    let al = f("(all x (in x a))");
    let c = derive_tnd(&al, &DOp::free());
    let i = invert(&c, &al, &Inversion::All(o("2"), t("c"))).unwrap();
    assert_checks(&i, 4, 3);
    let r = invert(&c, &al, &Inversion::AllRanked(o("3"))).unwrap();
    assert!(r.conclusion.contains(&f("(rall 3 x (in x a))")));
    assert_checks(&r, 4, 3);
}

#[test]
fn boundedness_examples() {
    let g = f("(ex x (in x a))");
    let c = derive_tnd(&g, &DOp::free());
    assert!(boundedness(&c, &g, &o("w^(W)")).is_err());
    let d = f("(in a b)");
    let c = derive_tnd(&d, &DOp::free());
    let same = boundedness(&c, &d, &o("3")).unwrap();
    assert_eq!(same.conclusion, c.conclusion);
    // (∃) over a TnD derivation, label below Ω
    let pr = f("(ex x (in x a))");
    let conj = canon(&and(M(o("1"), t("b")), f("(in b a)")));
    let base = derive_tnd(&conj, &DOp::free());
    let e = node(
        seq([negate(&conj), pr.clone()]),
        nsum(&base.alpha, &o("1")),
        zero(),
        DOp::free(),
        RsRule::Ex {
            principal: pr.clone(),
            level: o("1"),
            term: t("b"),
        },
        list(vec![base]),
    );
    assert_checks(&e, 3, 2);
    assert!(boundedness(&e, &pr, &o("1")).is_err());
    let bd = boundedness(&e, &pr, &o("w^(2)")).unwrap();
    assert!(bd.conclusion.contains(&f("(rex w^(2) x (in x a))")));
    assert!(matches!(bd.rule, RsRule::REx { .. }));
    assert_checks(&bd, 3, 2);
}

#[test]
fn cut_elim_bounds() {
    assert_eq!(bound_cut_elim(&o("w^(W + 1)"), 2), o("w^(w^(w^(W + 1)))"));
    assert_eq!(bound_cut_elim(&o("W + 3"), 0), o("W + 3"));
    let c = derive_union(&t("a"), &o("1"), &DOp::free());
    let e = cut_elim(&c).unwrap();
    assert_eq!(e.alpha, c.alpha);
    assert_eq!(e.rho, big_omega().succ());
}

#[test]
fn hat_examples() {
    assert_eq!(hat(&zero(), &zero()), o("w^(W)"));
    let (a1, a2) = (o("3"), o("w"));
    assert!(hat(&zero(), &a1) < hat(&zero(), &a2));
    assert!(psi(&hat(&zero(), &a1)).unwrap() < psi(&hat(&zero(), &a2)).unwrap());
    assert!(hat(&zero(), &a1) < hat(&o("w^(W + 5)"), &a1));
    assert_eq!(hat(&o("1"), &a1), hat(&zero(), &a1));
}

#[test]
fn collapse_axiom_leaf() {
    let d = f("(in a b)");
    let c = leaf(
        seq([d.clone(), negate(&d)]),
        o("4"),
        zero(),
        DOp::sigma(zero()),
        RsAxiom::Tnd,
    );
    let k = collapse(&c, &zero()).unwrap();
    assert!(matches!(k.rule, RsRule::Axiom(RsAxiom::Tnd)));
    assert_eq!(k.alpha, psi(&hat(&zero(), &o("4"))).unwrap());
    assert_eq!(k.conclusion, c.conclusion);
    assert_checks(&k, 1, 1);
    let g = f("(all x (in x a))");
    let c = leaf(
        seq([g.clone(), M(o("1"), SetTerm::Empty)]),
        o("1"),
        zero(),
        DOp::sigma(zero()),
        RsAxiom::MEmpty,
    );
    assert!(matches!(
        collapse(&c, &zero()),
        Err(RsError::Precondition(_))
    ));
}

#[test]
fn golden_corpus_embeds_and_checks() {
    for (name, p) in taitkp::golden_corpus() {
        let e = embed(&p).unwrap_or_else(|err| panic!("{name}: {err}"));
        assert_eq!(e.cert.alpha, label_of(e.m), "{name}");
        assert_eq!(e.cert.rho, rho_of(e.n), "{name}");
        assert_eq!(e.cert.p, Some(e.p_len));
        let rep = cert_check(&e.cert, cfg(6, 2));
        assert!(rep.ok, "{name}: {:#?}", rep.violations);
    }
}

#[test]
fn corrupt_proof_is_rejected() {
    let (_, mut p) = taitkp::golden_corpus()
        .into_iter()
        .find(|(n, _)| *n == "cut")
        .unwrap();
    p.steps.last_mut().unwrap().premises.clear();
    assert!(matches!(embed(&p), Err(RsError::Proof(_))));
}

#[test]
fn golden_corpus_pipeline() {
    for (name, p) in taitkp::golden_corpus() {
        let r = pipeline(&p, &zero(), cfg(5, 2)).unwrap_or_else(|err| panic!("{name}: {err}"));
        assert!(r.check.ok, "{name}: {:#?}", r.check.violations);
        let k = r.tower_index;
        let cap = psi(&omega_tower(k, &big_omega().succ())).unwrap();
        assert!(r.bound < cap, "{name}");
        assert!(r.bound < big_omega());
    }
}

#[test]
fn cut_elimination_removes_high_cuts() {
    for (name, p) in taitkp::golden_corpus() {
        let e = embed(&p).unwrap();
        if e.n < 2 {
            continue;
        }
        let c = cut_elim(&e.cert).unwrap();
        assert_eq!(
            c.alpha,
            bound_cut_elim(&e.cert.alpha, e.n as usize - 1),
            "{name}"
        );
        let rep = cert_check(&c, cfg(6, 2));
        assert!(rep.ok, "{name}: {:#?}", rep.violations);
    }
}

#[test]
fn collapsed_labels_stay_below_omega() {
    let (_, p) = taitkp::golden_corpus()
        .into_iter()
        .find(|(n, _)| *n == "cut")
        .unwrap();
    let r = pipeline(&p, &zero(), cfg(4, 2)).unwrap();
    assert!(r.collapsed);
}
