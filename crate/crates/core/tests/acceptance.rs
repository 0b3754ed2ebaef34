//! Acceptance criteria 1-11. Each criterion prints one PASS/FAIL line.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::{Duration, Instant};

use bhw_core::formulas::{
    and, class_of, ex, is_l2set, level, negate, rank, rel_ex, rex, size, substitute,
    substitute_rel, Formula,
};
use bhw_core::ordinals::{
    compare, enumerate_upto, in_c, natural_sum, nf_sum, omega_pow, omega_times, omega_tower, psi,
};
use bhw_core::rsstar::{
    cert_check, derive_ca, derive_eps_ind, derive_lifting, derive_s0_ref, derive_sep, derive_tnd,
    embed, pipeline, CheckConfig, DOp,
};
use bhw_core::taitkp::{
    self, check_proof, check_proof_with, golden_corpus, mutants, AxiomRegistry, StepInfo,
};
use bhw_core::trees::{
    alpha_tree, alpha_tree_height, alpha_tree_stages, check_ranking, eq_star, eval_truth, iso,
    mem_star, relabel, shapes, subtree, Assignment, Budget, TreeSet, Truth,
};
use bhw_core::{OrdTerm, SetTerm};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20_240_601;
const ORD_SIZE: usize = 7;
const ORD_SIZE_LARGE: usize = 12;
const ORD_EXPECTED_COUNT: usize = 10_000;
const ORD_TIME_LIMIT: Duration = Duration::from_secs(60);
const PSI_SIZE: usize = 6;
const IN_C_SIZE: usize = 5;
const FML_SIZE: usize = 6;
const GOLDEN_MIN: usize = 8;
const MUTANTS_MIN: usize = 50;
const EMBED_CFG: CheckConfig = CheckConfig {
    depth: 4,
    samples: 5,
    seed: SEED,
};
const PIPELINE_TIME_LIMIT: Duration = Duration::from_secs(30);
const TREE_NODES: usize = 12;
const TREE_LABELS: u64 = 4;
const TREE_CROSS_SAMPLES: usize = 20_000;
const TREE_EXACT_NODES: usize = 8;
const TRUTH_PAIRS: usize = 1_000;

/// Criteria whose literal statement cannot be met; they must still run and
/// their failure is reported, not hidden.
const KNOWN_UNATTAINABLE: &[u32] = &[];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. ordinal order laws

/// Violations of reflexivity, antisymmetry, trichotomy and transitivity.
/// Transitivity is checked through scores: a total antisymmetric relation is
/// transitive iff no two elements have the same number of predecessors.
fn order_violations(terms: &[OrdTerm]) -> usize {
    let n = terms.len();
    let mut bad = 0;
    let mut below = vec![0usize; n];
    for i in 0..n {
        if compare(&terms[i], &terms[i]) != Ordering::Equal {
            bad += 1;
        }
        for j in i + 1..n {
            let c = compare(&terms[i], &terms[j]);
            if c == Ordering::Equal || compare(&terms[j], &terms[i]) != c.reverse() {
                bad += 1;
            }
            match c {
                Ordering::Less => below[j] += 1,
                Ordering::Greater => below[i] += 1,
                Ordering::Equal => {}
            }
        }
    }
    let distinct: BTreeSet<usize> = below.iter().copied().collect();
    bad + (n - distinct.len())
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let small = enumerate_upto(ORD_SIZE);
    let v_small = order_violations(&small);
    let large = enumerate_upto(ORD_SIZE_LARGE);
    let v_large = order_violations(&large);
    let el = t0.elapsed();
    let pass =
        v_small == 0 && v_large == 0 && large.len() >= ORD_EXPECTED_COUNT && el < ORD_TIME_LIMIT;
    outcome(
        pass,
        format!(
            "size<={ORD_SIZE}: {} terms, {v_small} violations; size<={ORD_SIZE_LARGE}: {} terms, {v_large} violations; {:.1?}",
            small.len(),
            large.len(),
            el
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. psi monotonicity

fn criterion_2() -> Outcome {
    let args: Vec<(OrdTerm, OrdTerm)> = enumerate_upto(PSI_SIZE)
        .into_iter()
        .filter_map(|a| psi(&a).ok().map(|p| (a, p)))
        .collect();
    let (mut pairs, mut bad) = (0, 0);
    for (a, pa) in &args {
        for (b, pb) in &args {
            if a < b && in_c(a, b) {
                pairs += 1;
                if compare(pa, pb) != Ordering::Less {
                    bad += 1;
                }
            }
        }
    }
    outcome(
        bad == 0 && pairs > 0,
        format!("{pairs} pairs, {bad} violations"),
    )
}

// ---------------------------------------------------------------------------
// 3. in_C against saturation

/// C(a, 0) within `universe`: saturate {0, Ω} under +, ω^· and ψ below a.
fn c_closure(a: &OrdTerm, universe: &BTreeSet<OrdTerm>) -> BTreeSet<OrdTerm> {
    let mut set: BTreeSet<OrdTerm> = [OrdTerm::zero(), OrdTerm::big_omega()].into();
    loop {
        let before = set.len();
        let cur: Vec<OrdTerm> = set.iter().cloned().collect();
        for x in &cur {
            let mut new = vec![omega_pow(x)];
            if x < a {
                new.extend(psi(x).ok());
            }
            new.extend(cur.iter().map(|y| nf_sum(x, y)));
            set.extend(new.into_iter().filter(|t| universe.contains(t)));
        }
        if set.len() == before {
            return set;
        }
    }
}

fn criterion_3() -> Outcome {
    let terms = enumerate_upto(IN_C_SIZE);
    let universe: BTreeSet<OrdTerm> = terms.iter().cloned().collect();
    let mut bad = 0;
    for a in &terms {
        let cl = c_closure(a, &universe);
        bad += terms
            .iter()
            .filter(|t| in_c(t, a) != cl.contains(*t))
            .count();
    }
    outcome(
        bad == 0,
        format!("{} pairs, {bad} disagreements", terms.len() * terms.len()),
    )
}

// ---------------------------------------------------------------------------
// 4. rank facts

fn pool4() -> Vec<OrdTerm> {
    vec![
        OrdTerm::zero(),
        OrdTerm::one(),
        OrdTerm::omega(),
        OrdTerm::omega().succ(),
    ]
}

fn atoms() -> Vec<Formula> {
    let (x, a) = (SetTerm::var("x"), SetTerm::var("a"));
    let mut v = vec![
        Formula::In(x.clone(), a.clone()),
        Formula::NotIn(a.clone(), x.clone()),
        Formula::Rel("X".into(), x.clone()),
        Formula::NotRel("X".into(), a.clone()),
    ];
    for al in pool4() {
        v.push(Formula::M(al.clone(), x.clone()));
        v.push(Formula::NotM(al, a.clone()));
    }
    v
}

fn wrap(g: &Formula) -> Vec<Formula> {
    let b = || Box::new(g.clone());
    let a = SetTerm::var("a");
    let mut v = vec![
        Formula::BEx("x".into(), a.clone(), b()),
        Formula::BAll("x".into(), a, b()),
        Formula::Ex("x".into(), b()),
        Formula::All("x".into(), b()),
        Formula::RelEx("X".into(), b()),
        Formula::RelAll("X".into(), b()),
    ];
    for al in pool4() {
        v.push(Formula::REx(al.clone(), "x".into(), b()));
        v.push(Formula::RAll(al, "x".into(), b()));
    }
    v
}

fn formulas_of_size(n: usize, smaller: &[Vec<Formula>], f: &mut dyn FnMut(&Formula)) {
    if n == 1 {
        atoms().iter().for_each(f);
        return;
    }
    for g in &smaller[n - 1] {
        wrap(g).iter().for_each(&mut *f);
    }
    for l in 1..n - 1 {
        for g in &smaller[l] {
            for h in &smaller[n - 1 - l] {
                f(&Formula::Or(Box::new(g.clone()), Box::new(h.clone())));
                f(&Formula::And(Box::new(g.clone()), Box::new(h.clone())));
            }
        }
    }
}

#[derive(Default)]
struct RankTally {
    formulas: usize,
    bodies: usize,
    bad: [usize; 6],
}

/// Items (1) and (2) on F.
fn rank_items_12(f: &Formula, t: &mut RankTally) {
    let big = OrdTerm::big_omega();
    let r = rank(f);
    let cap = nf_sum(&omega_times(&level(f)), &OrdTerm::omega());
    if r != rank(&negate(f)) || r >= cap || cap > nf_sum(&big, &OrdTerm::omega()) {
        t.bad[0] += 1;
    }
    if (r < big) != class_of(f).is_b {
        t.bad[1] += 1;
    }
}

/// Items (3)-(6) with F as the matrix of a quantifier.
fn rank_items_36(f: &Formula, t: &mut RankTally) {
    let big = OrdTerm::big_omega();
    let s = SetTerm::var("s");
    let r_ex = rank(&ex("x", f.clone()));
    if r_ex == big && !(class_of(f).is_delta0 && is_l2set(f)) {
        t.bad[2] += 1;
    }
    let fs = substitute(f, "x", &s);
    for al in pool4() {
        let lo = rank(&and(Formula::M(al.clone(), s.clone()), fs.clone()));
        let mid = rank(&rex(al, "x", f.clone()));
        if !(lo < mid && mid < r_ex) {
            t.bad[3] += 1;
        }
    }
    let r = SetTerm::var("r");
    let lo = rank(&and(Formula::In(s.clone(), r.clone()), fs));
    let mid = rank(&Formula::BEx("x".into(), r, Box::new(f.clone())));
    if !(lo < mid && mid < r_ex) {
        t.bad[4] += 1;
    }
    let fp = substitute_rel(f, "X", "P");
    if rank(&fp) != rank(f) || rank(f) >= rank(&rel_ex("X", f.clone())) {
        t.bad[5] += 1;
    }
}

fn criterion_4() -> Outcome {
    let mut t = RankTally::default();
    let mut by_size: Vec<Vec<Formula>> = vec![vec![]];
    for n in 1..FML_SIZE {
        let mut cur = vec![];
        formulas_of_size(n, &by_size, &mut |f| cur.push(f.clone()));
        for f in &cur {
            rank_items_12(f, &mut t);
            rank_items_36(f, &mut t);
        }
        t.formulas += cur.len();
        t.bodies += cur.len();
        by_size.push(cur);
    }
    formulas_of_size(FML_SIZE, &by_size, &mut |f| {
        debug_assert_eq!(size(f), FML_SIZE);
        rank_items_12(f, &mut t);
        t.formulas += 1;
    });
    let total: usize = t.bad.iter().sum();
    outcome(
        total == 0,
        format!(
            "{} formulas, {} matrices, violations per item {:?}",
            t.formulas, t.bodies, t.bad
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Tait checker

fn criterion_5() -> Outcome {
    let corpus = golden_corpus();
    let accepted = corpus.iter().filter(|(_, p)| check_proof(p).ok).count();
    let (mut total, mut located) = (0, 0);
    for (_, p) in &corpus {
        for m in mutants(p) {
            total += 1;
            if check_proof(&m.proof)
                .failures
                .iter()
                .any(|f| f.step == m.step)
            {
                located += 1;
            }
        }
    }
    let pass = corpus.len() >= GOLDEN_MIN
        && accepted == corpus.len()
        && total >= MUTANTS_MIN
        && located == total;
    outcome(
        pass,
        format!(
            "{accepted}/{} golden accepted, {located}/{total} mutants rejected at their step",
            corpus.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. embedding labels

/// k when t = Ω + k.
fn omega_plus(t: &OrdTerm) -> Option<u32> {
    (0..64)
        .find(|&k| *t == nf_sum(&OrdTerm::big_omega(), &OrdTerm::nat(k)))
        .map(|k| k as u32)
}

/// Per-case increments: axioms start at the exponent of their own bound,
/// each inference adds one, and a cut on a formula of rank Ω+k needs rank
/// Ω+k+1.
fn expected_m_n(p: &taitkp::TaitProof) -> (u32, u32) {
    let (_, infos) = check_proof_with(&AxiomRegistry::default(), p);
    let mut ms: Vec<u32> = vec![];
    let mut ns: Vec<u32> = vec![];
    for info in infos.into_iter().map(Option::unwrap) {
        let (m, n) = match info {
            StepInfo::Axiom { id, instance, .. } => {
                let m = match id.as_str() {
                    // (∀x∈a)∃y D has rank Ω+2; its derivation is bounded by ω^{Ω+3}
                    "Delta0Col" => 3,
                    "EpsInd" => {
                        let f = instance
                            .iter()
                            .find(|f| matches!(f, Formula::Or(..)))
                            .unwrap();
                        let Formula::Or(ng, _) = f else {
                            unreachable!()
                        };
                        match omega_plus(&rank(&negate(ng))) {
                            Some(k) => k + 1,
                            None => 1,
                        }
                    }
                    _ => 0,
                };
                (m, 0)
            }
            StepInfo::Rule { premises, used } => {
                let m = premises.iter().map(|&j| ms[j]).max().unwrap_or(0) + 1;
                let n0 = premises.iter().map(|&j| ns[j]).max().unwrap_or(0);
                let n = match used.cut.as_ref().and_then(|c| omega_plus(&rank(c))) {
                    Some(k) => n0.max(k + 1),
                    None => n0,
                };
                (m, n)
            }
        };
        ms.push(m);
        ns.push(n);
    }
    (*ms.last().unwrap(), *ns.last().unwrap())
}

fn criterion_6() -> Outcome {
    let mut bad = vec![];
    let corpus = golden_corpus();
    for (name, p) in &corpus {
        let (m, n) = expected_m_n(p);
        let label = omega_pow(&nf_sum(&OrdTerm::big_omega(), &OrdTerm::nat(m as u64)));
        let rho = nf_sum(&OrdTerm::big_omega(), &OrdTerm::nat(n as u64));
        match embed(p) {
            Ok(e) => {
                let rep = cert_check(&e.cert, EMBED_CFG);
                if e.cert.alpha != label || e.cert.rho != rho || !rep.ok {
                    bad.push(format!(
                        "{name}: got ({}, {}) want ({label}, {rho}), check {}",
                        e.cert.alpha,
                        e.cert.rho,
                        rep.status()
                    ));
                }
            }
            Err(err) => bad.push(format!("{name}: {err}")),
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} proofs; {}",
            corpus.len(),
            if bad.is_empty() {
                "all exact".into()
            } else {
                bad.join("; ")
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. builder labels

fn criterion_7() -> Outcome {
    let op = DOp::free();
    let f = |s: &str| bhw_core::formulas::canon(&bhw_core::formulas::parse_formula(s).unwrap());
    let o = |s: &str| bhw_core::ordinals::parse(s).unwrap();
    let cfg = CheckConfig {
        depth: 4,
        samples: 3,
        seed: SEED,
    };
    let mut rows: Vec<(&str, OrdTerm, OrdTerm, bool)> = vec![];

    let g = f("(ex x (ball y x (in y a)))");
    let c = derive_tnd(&g, &op);
    rows.push((
        "tnd",
        c.alpha.clone(),
        natural_sum(&rank(&g), &rank(&g)),
        cert_check(&c, cfg).ok,
    ));

    let body = f("(ball y z (in y a))");
    let al = o("w");
    let c = derive_lifting(&al, "z", &body, &op);
    let r = rank(&rex(al, "z", body));
    rows.push((
        "lifting",
        c.alpha.clone(),
        natural_sum(&r, &r),
        cert_check(&c, cfg).ok,
    ));

    let a = f("(ex v (in u v))");
    let c = derive_eps_ind("u", &a, &op);
    let inst = bhw_core::formulas::canon(&taitkp::eps_ind_instance(&a, "u"));
    let Formula::Or(ng, _) = &inst else {
        unreachable!()
    };
    let sigma = omega_pow(&rank(&negate(ng)));
    let want = nf_sum(&sigma, &OrdTerm::big_omega()).succ();
    rows.push((
        "eps_ind",
        c.alpha.clone(),
        want,
        cert_check(&c, CheckConfig { depth: 9, ..cfg }).ok,
    ));

    let extra = [(SetTerm::var("b"), o("3"))];
    let c = derive_sep(
        &SetTerm::var("a"),
        &o("1"),
        "x",
        &f("(in x b)"),
        &extra,
        &op,
    )
    .unwrap();
    rows.push((
        "sep",
        c.alpha.clone(),
        omega_pow(&o("5")),
        cert_check(&c, cfg).ok,
    ));

    let c = derive_ca(&f("(nrel Y x)"), "x", "Y", &[], &op).unwrap();
    rows.push((
        "ca",
        c.alpha.clone(),
        OrdTerm::zero(),
        cert_check(&c, cfg).ok,
    ));

    let s0 = f("(ball x a (ex y (in x y)))");
    let c = derive_s0_ref(&s0, &[(SetTerm::var("a"), o("2"))], &op).unwrap();
    rows.push((
        "s0_ref",
        c.alpha.clone(),
        omega_pow(&rank(&s0).succ()),
        cert_check(&c, cfg).ok,
    ));

    let bad: Vec<String> = rows
        .iter()
        .filter(|(_, got, want, ok)| got != want || !ok)
        .map(|(n, got, want, ok)| format!("{n}: {got} vs {want} (check {ok})"))
        .collect();
    let names: Vec<&str> = rows.iter().map(|r| r.0).collect();
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            format!("exact: {}", names.join(", "))
        } else {
            bad.join("; ")
        },
    )
}

// ---------------------------------------------------------------------------
// 8. pipeline bound

fn criterion_8() -> Outcome {
    let big1 = OrdTerm::big_omega().succ();
    let mut bad = vec![];
    let mut slowest = Duration::ZERO;
    let corpus = golden_corpus();
    for (name, p) in &corpus {
        let t0 = Instant::now();
        let r = pipeline(
            p,
            &OrdTerm::zero(),
            CheckConfig {
                seed: SEED,
                ..CheckConfig::default()
            },
        );
        let el = t0.elapsed();
        slowest = slowest.max(el);
        match r {
            Ok(r) => {
                let cap = psi(&omega_tower(r.tower_index, &big1)).unwrap();
                if r.bound >= cap || el >= PIPELINE_TIME_LIMIT || !r.check.ok {
                    bad.push(format!("{name}: {} vs {cap}", r.bound));
                }
            }
            Err(e) => bad.push(format!("{name}: {e}")),
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} proofs, slowest {:.1?}{}",
            corpus.len(),
            slowest,
            if bad.is_empty() {
                String::new()
            } else {
                format!("; {}", bad.join("; "))
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. tree suite

/// All shapes as children ⟨i⟩ of one root, so that a single bisimulation
/// computation relates every pair.
fn universe_partition(trees: &[TreeSet]) -> (Vec<u32>, Vec<BTreeSet<u32>>) {
    let mut nodes: BTreeSet<Vec<u64>> = [vec![]].into();
    for (i, t) in trees.iter().enumerate() {
        for s in t.materialize().unwrap() {
            let mut v = vec![i as u64];
            v.extend(s);
            nodes.insert(v);
        }
    }
    let big = TreeSet::finite(nodes).unwrap();
    let b = iso(&big).unwrap();
    let class: Vec<u32> = (0..trees.len())
        .map(|i| b.class_of(&[i as u64]).unwrap())
        .collect();
    let kids: Vec<BTreeSet<u32>> = trees
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.child_labels()
                .unwrap()
                .into_iter()
                .map(|k| b.class_of(&[i as u64, k]).unwrap())
                .collect()
        })
        .collect();
    (class, kids)
}

fn criterion_9() -> Outcome {
    let trees = shapes(TREE_NODES, TREE_LABELS as usize);
    let (class, kids) = universe_partition(&trees);
    let n = trees.len();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut bad = 0usize;

    // extensionality on the universe: members of equal trees agree
    let mut by_class: BTreeMap<u32, &BTreeSet<u32>> = BTreeMap::new();
    for i in 0..n {
        if let Some(prev) = by_class.insert(class[i], &kids[i]) {
            if prev != &kids[i] {
                bad += 1;
            }
        }
    }

    // direct calls against the partition, on relabelled copies with labels < 4
    for _ in 0..TREE_CROSS_SAMPLES {
        let (i, j, k) = (
            rng.gen_range(0..n),
            rng.gen_range(0..n),
            rng.gen_range(0..n),
        );
        let lab = |t: &TreeSet, rng: &mut ChaCha8Rng| {
            TreeSet::Finite(relabel(&t.materialize().unwrap(), TREE_LABELS, rng))
        };
        let (s, t, u) = (
            lab(&trees[i], &mut rng),
            lab(&trees[j], &mut rng),
            lab(&trees[k], &mut rng),
        );
        let e_st = eq_star(&s, &t).unwrap();
        if e_st != (class[i] == class[j])
            || eq_star(&t, &s).unwrap() != e_st
            || !eq_star(&s, &s).unwrap()
        {
            bad += 1;
        }
        let m_su = mem_star(&s, &u).unwrap();
        if m_su != kids[k].contains(&class[i]) {
            bad += 1;
        }
        if e_st && m_su != mem_star(&t, &u).unwrap() {
            bad += 1;
        }
        let direct = u
            .child_labels()
            .unwrap()
            .iter()
            .any(|&l| eq_star(&s, &subtree(&u, &[l]).unwrap()).unwrap());
        if direct != m_su {
            bad += 1;
        }
    }

    // exhaustive direct calls on the smaller universe
    let small = shapes(TREE_EXACT_NODES, TREE_LABELS as usize);
    let eq: Vec<Vec<bool>> = small
        .iter()
        .map(|s| small.iter().map(|t| eq_star(s, t).unwrap()).collect())
        .collect();
    for (i, s) in small.iter().enumerate() {
        for (j, t) in small.iter().enumerate() {
            let m = mem_star(s, t).unwrap();
            let direct = t
                .child_labels()
                .unwrap()
                .iter()
                .any(|&l| eq_star(s, &subtree(t, &[l]).unwrap()).unwrap());
            if m != direct || eq[i][j] != eq[j][i] {
                bad += 1;
            }
        }
    }
    let sn = small.len();
    for i in 0..sn {
        for j in 0..sn {
            if !eq[i][j] {
                continue;
            }
            for k in 0..sn {
                if eq[j][k] && !eq[i][k] {
                    bad += 1;
                }
            }
        }
    }

    for m in 0..=5u64 {
        for k in 0..=5u64 {
            if mem_star(&TreeSet::NStar(m), &TreeSet::NStar(k)).unwrap() != (m < k) {
                bad += 1;
            }
        }
    }
    let classes: BTreeSet<u32> = class.iter().copied().collect();
    outcome(
        bad == 0,
        format!(
            "{n} shapes ({} classes), {TREE_CROSS_SAMPLES} relabelled triples, {sn} shapes exhaustive, {bad} violations",
            classes.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. alpha-tree duality

fn criterion_10() -> Outcome {
    let pool: Vec<OrdTerm> = (1..=6)
        .map(OrdTerm::nat)
        .chain([OrdTerm::omega(), OrdTerm::omega().succ()])
        .collect();
    let trees = shapes(TREE_NODES, TREE_LABELS as usize);
    let mut bad = 0;
    for t in &trees {
        for a in &pool {
            let x = alpha_tree_height(t, a).unwrap();
            let y = alpha_tree_stages(t, a).unwrap();
            if x.is_some() != y.is_some() || x.as_ref().is_some_and(|r| !check_ranking(t, r, a, 0))
            {
                bad += 1;
            }
        }
    }
    let w1 = OrdTerm::omega().succ();
    let omega_ok = alpha_tree(&TreeSet::OmegaStar, &w1)
        .unwrap()
        .is_some_and(|r| check_ranking(&TreeSet::OmegaStar, &r, &w1, 16));
    let omega_tight = alpha_tree(&TreeSet::OmegaStar, &OrdTerm::omega())
        .unwrap()
        .is_none();
    outcome(
        bad == 0 && omega_ok && omega_tight,
        format!(
            "{} trees x {} ordinals, {bad} disagreements; ω* is an (ω+1)-tree: {omega_ok}",
            trees.len(),
            pool.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 11. eval_truth coherence

fn random_formula(rng: &mut ChaCha8Rng, depth: u32) -> Formula {
    let p = |s: &str| bhw_core::formulas::parse_formula(s).unwrap();
    const ATOMS: &[&str] = &[
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
        "(in b omega)",
    ];
    if depth == 0 || rng.gen_bool(0.3) {
        return p(ATOMS.choose(rng).unwrap());
    }
    let g = random_formula(rng, depth - 1);
    match rng.gen_range(0..6) {
        0 => Formula::Or(Box::new(g), Box::new(random_formula(rng, depth - 1))),
        1 => Formula::And(Box::new(g), Box::new(random_formula(rng, depth - 1))),
        2 => Formula::BEx(
            "x".into(),
            SetTerm::var("b"),
            Box::new(Formula::Or(Box::new(p("(in x a)")), Box::new(g))),
        ),
        3 => Formula::BAll(
            "x".into(),
            SetTerm::var("a"),
            Box::new(Formula::And(Box::new(p("(in x b)")), Box::new(g))),
        ),
        4 => Formula::REx(
            OrdTerm::nat(2),
            "y".into(),
            Box::new(Formula::And(Box::new(p("(in y a)")), Box::new(g))),
        ),
        _ => Formula::RAll(
            OrdTerm::nat(3),
            "y".into(),
            Box::new(Formula::Or(Box::new(p("(nin y b)")), Box::new(g))),
        ),
    }
}

fn quantifier_free(f: &Formula) -> bool {
    match f {
        Formula::Or(g, h) | Formula::And(g, h) => quantifier_free(g) && quantifier_free(h),
        Formula::BEx(..) | Formula::BAll(..) | Formula::REx(..) | Formula::RAll(..) => false,
        Formula::Ex(..) | Formula::All(..) | Formula::RelEx(..) | Formula::RelAll(..) => false,
        _ => true,
    }
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let small = shapes(5, 3);
    let pick = |rng: &mut ChaCha8Rng| -> TreeSet {
        match rng.gen_range(0..4) {
            0 => TreeSet::NStar(rng.gen_range(0..4)),
            _ => small.choose(rng).unwrap().clone(),
        }
    };
    let budget = Budget {
        tree_size_max: 6,
        witness_max: 24,
    };
    let larger = Budget {
        tree_size_max: 9,
        witness_max: 96,
    };
    let (mut both, mut qf_bad, mut qf_n, mut unknown) = (0, 0, 0, 0);
    for _ in 0..TRUTH_PAIRS {
        let f = random_formula(&mut rng, 3);
        let env: Assignment = [
            ("a".to_string(), pick(&mut rng)),
            ("b".to_string(), pick(&mut rng)),
            ("U".to_string(), TreeSet::NStar(rng.gen_range(0..4))),
        ]
        .into();
        let v = eval_truth(&f, &env, &budget).unwrap();
        let w = eval_truth(&negate(&f), &env, &budget).unwrap();
        if v != Truth::Unknown && v == w {
            both += 1;
        }
        if v == Truth::Unknown {
            unknown += 1;
        }
        if quantifier_free(&f) {
            qf_n += 1;
            let v2 = eval_truth(&f, &env, &larger).unwrap();
            if v == Truth::Unknown || v2 != v {
                qf_bad += 1;
            }
        }
    }
    outcome(
        both == 0 && qf_bad == 0 && qf_n > 0,
        format!("{TRUTH_PAIRS} pairs ({unknown} unknown), {both} contradictions; {qf_n} quantifier-free, {qf_bad} unstable"),
    )
}

#[test]
fn acceptance() {
    let criteria: Vec<(u32, fn() -> Outcome)> = vec![
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut unexpected = vec![];
    for (id, run) in criteria {
        let t0 = Instant::now();
        let o = run();
        let _ = writeln!(
            std::io::stderr(),
            "criterion {id:>2}: {} ({:.1?}) {}",
            if o.pass { "PASS" } else { "FAIL" },
            t0.elapsed(),
            o.detail
        );
        if !o.pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    assert!(unexpected.is_empty(), "failing criteria: {unexpected:?}");
}
