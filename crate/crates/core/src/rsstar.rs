//! The ramified infinitary system RS*: operator-controlled derivations with
//! lazily generated premise families, a sampling checker, derivation
//! builders, the embedding of finite Tait proofs, and the inversion,
//! boundedness, cut-elimination and collapsing transformers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::formulas::{
    self, and, canon, classes, ex, free_rel_vars, free_vars, fresh_name, instantiate,
    instantiate_rel, length, negate, or, params, rank, rex, seq_free_rel_vars, seq_free_vars,
    Formula, Sequent, SetTerm, Subst,
};
use crate::ordinals::{
    classify, enumerate_upto, in_c, natural_sum, nf_sum, omega_pow, omega_times, omega_tower, psi,
    Kind, OrdError, OrdTerm, Principal,
};
use crate::taitkp::{self, RuleId, StepInfo, TaitProof};

use Formula::*;

fn big_omega() -> OrdTerm {
    OrdTerm::big_omega()
}

fn lt(a: &OrdTerm, b: &OrdTerm) -> bool {
    a < b
}

fn omax(a: &OrdTerm, b: &OrdTerm) -> OrdTerm {
    if a < b {
        b.clone()
    } else {
        a.clone()
    }
}

fn nsum(a: &OrdTerm, b: &OrdTerm) -> OrdTerm {
    natural_sum(a, b)
}

fn seq<I: IntoIterator<Item = Formula>>(fs: I) -> Sequent {
    formulas::sequent(fs)
}

fn union(a: &Sequent, b: &Sequent) -> Sequent {
    a.union(b).cloned().collect()
}

fn without(a: &Sequent, f: &Formula) -> Sequent {
    let mut s = a.clone();
    s.remove(f);
    s
}

fn seq_params_of<'a, I: IntoIterator<Item = &'a Formula>>(fs: I) -> BTreeSet<OrdTerm> {
    fs.into_iter().flat_map(params).collect()
}

fn in_sb(f: &Formula) -> bool {
    let c = classes(f);
    c.is_s || c.is_b
}

/// Ω + k for finite k, if `t` has that shape.
fn omega_plus_nat(t: &OrdTerm) -> Option<u64> {
    match t.principals() {
        [Principal::BigOmega, rest @ ..] => {
            if rest
                .iter()
                .all(|p| matches!(p, Principal::WPow(e) if e.is_zero()))
            {
                Some(rest.len() as u64)
            } else {
                None
            }
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// operators

/// Closure operators: `Free(m)` is H[m] for the plain closure under +, ω^·
/// and Ω; `Sigma(σ, m)` is H_σ[m], which also admits ψ(ξ) for ξ ≤ σ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DOp {
    Free(BTreeSet<OrdTerm>),
    Sigma(OrdTerm, BTreeSet<OrdTerm>),
}

impl DOp {
    pub fn free() -> Self {
        DOp::Free(BTreeSet::new())
    }

    pub fn sigma(s: OrdTerm) -> Self {
        DOp::Sigma(s, BTreeSet::new())
    }

    pub fn gens(&self) -> &BTreeSet<OrdTerm> {
        match self {
            DOp::Free(m) | DOp::Sigma(_, m) => m,
        }
    }

    fn gens_mut(&mut self) -> &mut BTreeSet<OrdTerm> {
        match self {
            DOp::Free(m) | DOp::Sigma(_, m) => m,
        }
    }

    pub fn sigma_bound(&self) -> Option<&OrdTerm> {
        match self {
            DOp::Free(_) => None,
            DOp::Sigma(s, _) => Some(s),
        }
    }

    pub fn contains(&self, t: &OrdTerm) -> bool {
        h_mem(t, self)
    }

    /// H[extra]: generators already in the closure are not recorded.
    pub fn with<'a, I: IntoIterator<Item = &'a OrdTerm>>(&self, extra: I) -> DOp {
        let mut out = self.clone();
        for t in extra {
            if !h_mem(t, &out) {
                out.gens_mut().insert(t.clone());
            }
        }
        out
    }

    /// A(∅) ⊆ B(∅).
    pub fn le(&self, other: &DOp) -> bool {
        let gens_ok = self.gens().iter().all(|t| h_mem(t, other));
        match (self, other) {
            (DOp::Free(_), _) => gens_ok,
            (DOp::Sigma(a, _), DOp::Sigma(b, _)) => a <= b && gens_ok,
            (DOp::Sigma(..), DOp::Free(_)) => false,
        }
    }

    pub fn equiv(&self, other: &DOp) -> bool {
        self.le(other) && other.le(self)
    }

    /// Smallest operator of these shapes above both.
    pub fn join(&self, other: &DOp) -> DOp {
        let base = match (self.sigma_bound(), other.sigma_bound()) {
            (None, None) => DOp::free(),
            (Some(s), None) | (None, Some(s)) => DOp::sigma(s.clone()),
            (Some(s), Some(t)) => DOp::sigma(omax(s, t)),
        };
        base.with(self.gens()).with(other.gens())
    }

    /// Replaces σ by max(σ, s); a free operator becomes H_s.
    pub fn raise(&self, s: &OrdTerm) -> DOp {
        match self {
            DOp::Free(m) => DOp::Sigma(s.clone(), m.clone()),
            DOp::Sigma(t, m) => DOp::Sigma(omax(t, s), m.clone()),
        }
    }
}

impl fmt::Display for DOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.gens().iter().map(|t| t.to_string()).collect();
        match self {
            DOp::Free(_) => write!(f, "H[{}]", gens.join(", ")),
            DOp::Sigma(s, _) => write!(f, "H_{{{s}}}[{}]", gens.join(", ")),
        }
    }
}

fn psi_atoms(m: &BTreeSet<OrdTerm>) -> BTreeSet<OrdTerm> {
    fn walk(t: &OrdTerm, out: &mut BTreeSet<OrdTerm>) {
        for p in t.principals() {
            match p {
                Principal::WPow(e) => walk(e, out),
                Principal::Psi(_) => {
                    out.insert(OrdTerm::from_principal(p.clone()));
                }
                Principal::BigOmega => {}
            }
        }
    }
    let mut out = BTreeSet::new();
    for t in m {
        walk(t, &mut out);
    }
    out
}

fn closure_mem(t: &OrdTerm, atoms: &BTreeSet<OrdTerm>, sigma: Option<&OrdTerm>) -> bool {
    t.principals().iter().all(|p| match p {
        Principal::BigOmega => true,
        Principal::WPow(e) => closure_mem(e, atoms, sigma),
        Principal::Psi(c) => {
            atoms.contains(&OrdTerm::from_principal(p.clone()))
                || sigma.is_some_and(|s| c <= s && closure_mem(c, atoms, sigma))
        }
    })
}

/// Membership t ∈ op(∅).
pub fn h_mem(t: &OrdTerm, op: &DOp) -> bool {
    match op {
        DOp::Sigma(s, m) if m.is_empty() => in_c(t, &s.succ()),
        _ => closure_mem(t, &psi_atoms(op.gens()), op.sigma_bound()),
    }
}

// ---------------------------------------------------------------------------
// axioms

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum RsAxiom {
    Tnd,
    Equality,
    SubOmega,
    NotM0,
    MEmpty,
    NotInEmpty,
    MOmega,
    Infinity,
    MMono,
    MPred,
    Pair,
    Union,
    Sep,
    Ca,
}

impl RsAxiom {
    pub const ALL: [RsAxiom; 14] = [
        RsAxiom::Tnd,
        RsAxiom::Equality,
        RsAxiom::SubOmega,
        RsAxiom::NotM0,
        RsAxiom::MEmpty,
        RsAxiom::NotInEmpty,
        RsAxiom::MOmega,
        RsAxiom::Infinity,
        RsAxiom::MMono,
        RsAxiom::MPred,
        RsAxiom::Pair,
        RsAxiom::Union,
        RsAxiom::Sep,
        RsAxiom::Ca,
    ];

    pub fn number(self) -> u8 {
        match self {
            RsAxiom::Tnd => 1,
            RsAxiom::Equality => 2,
            RsAxiom::SubOmega => 3,
            RsAxiom::NotM0 => 4,
            RsAxiom::MEmpty => 6,
            RsAxiom::NotInEmpty => 7,
            RsAxiom::MOmega => 8,
            RsAxiom::Infinity => 9,
            RsAxiom::MMono => 10,
            RsAxiom::MPred => 12,
            RsAxiom::Pair => 13,
            RsAxiom::Union => 14,
            RsAxiom::Sep => 15,
            RsAxiom::Ca => 16,
        }
    }

    pub fn from_number(n: u8) -> Option<RsAxiom> {
        RsAxiom::ALL.into_iter().find(|a| a.number() == n)
    }
}

impl fmt::Display for RsAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// The first axiom (by number) that `s` is an instance of.
pub fn rs_check_axiom(s: &Sequent) -> Option<RsAxiom> {
    RsAxiom::ALL.into_iter().find(|a| axiom_holds(s, *a))
}

pub fn axiom_holds(s: &Sequent, ax: RsAxiom) -> bool {
    match ax {
        RsAxiom::Tnd => s.iter().any(|f| classes(f).is_b && s.contains(&negate(f))),
        RsAxiom::Equality => ax_equality(s),
        RsAxiom::SubOmega => s
            .iter()
            .any(|f| matches!(f, NotRel(_, a) if s.contains(&In(a.clone(), SetTerm::Omega)))),
        RsAxiom::NotM0 => s.iter().any(|f| matches!(f, NotM(l, _) if l.is_zero())),
        RsAxiom::MEmpty => s.contains(&M(OrdTerm::one(), SetTerm::Empty)),
        RsAxiom::NotInEmpty => s.iter().any(|f| matches!(f, NotIn(_, SetTerm::Empty))),
        RsAxiom::MOmega => s.contains(&M(OrdTerm::omega().succ(), SetTerm::Omega)),
        RsAxiom::Infinity => s.iter().any(|f| match f {
            And(l, _) => match l.as_ref() {
                Or(g, _) => match g.as_ref() {
                    NotIn(a, SetTerm::Omega) => *f == canon(&formulas::infinity(a)),
                    _ => false,
                },
                _ => false,
            },
            _ => false,
        }),
        RsAxiom::MMono => s.iter().any(|f| match f {
            NotM(al, a) => s
                .iter()
                .any(|g| matches!(g, M(be, b) if b == a && al <= be)),
            _ => false,
        }),
        RsAxiom::MPred => s.iter().any(|f| {
            match f {
            NotM(g, a) => match g.pred() {
                Some(al) if classify(g) == Kind::Successor => s.iter().any(|h| {
                    matches!(h, NotIn(b, a2) if a2 == a && s.contains(&M(al.clone(), b.clone())))
                }),
                _ => false,
            },
            _ => false,
        }
        }),
        RsAxiom::Pair => ax_pair(s),
        RsAxiom::Union => s.iter().any(|f| match f {
            NotM(al, a) => s.contains(&union_formula(al, a)),
            _ => false,
        }),
        RsAxiom::Sep => ax_sep(s),
        RsAxiom::Ca => ax_ca(s),
    }
}

fn levels_of<'a>(s: &'a Sequent, t: &'a SetTerm) -> impl Iterator<Item = &'a OrdTerm> + 'a {
    s.iter().filter_map(move |f| match f {
        NotM(l, a) if a == t => Some(l),
        _ => None,
    })
}

fn ax_pair(s: &Sequent) -> bool {
    s.iter().any(|f| {
        let REx(g, z, body) = f else { return false };
        if classify(g) != Kind::Successor {
            return false;
        }
        let beta = g.pred().expect("successor");
        let And(l, r) = body.as_ref() else {
            return false;
        };
        let zt = SetTerm::Var(z.clone());
        let (In(t1, z1), In(t2, z2)) = (l.as_ref(), r.as_ref()) else {
            return false;
        };
        if *z1 != zt || *z2 != zt || *t1 == zt || *t2 == zt {
            return false;
        }
        let fits = |top: &SetTerm, other: &SetTerm| {
            levels_of(s, top).any(|l| *l == beta) && levels_of(s, other).any(|l| *l <= beta)
        };
        fits(t1, t2) || fits(t2, t1)
    })
}

fn union_formula(al: &OrdTerm, a: &SetTerm) -> Formula {
    match canon(&taitkp::union_instance(a)) {
        Ex(z, body) => REx(al.clone(), z, body),
        _ => unreachable!("union instance is existential"),
    }
}

/// ∃z^α B for the canonical ∃z B.
fn rank_to(f: &Formula, al: &OrdTerm) -> Formula {
    match f {
        Ex(z, body) => REx(al.clone(), z.clone(), body.clone()),
        other => other.clone(),
    }
}

fn ax_sep(s: &Sequent) -> bool {
    s.iter().any(|f| {
        let REx(g, z, body) = f else { return false };
        if classify(g) != Kind::Successor {
            return false;
        }
        let al = g.pred().expect("successor");
        let And(l, _) = body.as_ref() else {
            return false;
        };
        let BAll(y, zt, inner) = l.as_ref() else {
            return false;
        };
        if *zt != SetTerm::Var(z.clone()) {
            return false;
        }
        let And(mem_a, d) = inner.as_ref() else {
            return false;
        };
        let In(yv, a) = mem_a.as_ref() else {
            return false;
        };
        if *yv != SetTerm::Var(y.clone()) || !s.contains(&NotM(al.clone(), a.clone())) {
            return false;
        }
        classes(d).is_delta0 && *f == canon(&rex(g.clone(), z, formulas::sep_eq(zt, a, y, d)))
    })
}

fn ax_ca(s: &Sequent) -> bool {
    s.iter().any(|f| {
        let RelEx(zr, body) = f else { return false };
        let BAll(x, SetTerm::Omega, inner) = body.as_ref() else {
            return false;
        };
        let And(l, _) = inner.as_ref() else {
            return false;
        };
        let Or(nr, ra) = l.as_ref() else { return false };
        let (NotRel(z2, xv), RelAll(y, d)) = (nr.as_ref(), ra.as_ref()) else {
            return false;
        };
        z2 == zr
            && *xv == SetTerm::Var(x.clone())
            && classes(d).is_delta0
            && *f == canon(&taitkp::ca_instance(d, x, y))
    })
}

/// l and r agree except at term positions where l has `a` and r has `b`.
fn differ_by(l: &Formula, r: &Formula, a: &SetTerm, b: &SetTerm) -> bool {
    let t = |x: &SetTerm, y: &SetTerm| x == y || (x == a && y == b);
    let d = |g: &Formula, h: &Formula| differ_by(g, h, a, b);
    match (l, r) {
        (In(x1, y1), In(x2, y2)) | (NotIn(x1, y1), NotIn(x2, y2)) => t(x1, x2) && t(y1, y2),
        (Rel(u1, x1), Rel(u2, x2)) | (NotRel(u1, x1), NotRel(u2, x2)) => u1 == u2 && t(x1, x2),
        (M(l1, x1), M(l2, x2)) | (NotM(l1, x1), NotM(l2, x2)) => l1 == l2 && t(x1, x2),
        (Or(g1, h1), Or(g2, h2)) | (And(g1, h1), And(g2, h2)) => d(g1, g2) && d(h1, h2),
        (BEx(x1, c1, g1), BEx(x2, c2, g2)) | (BAll(x1, c1, g1), BAll(x2, c2, g2)) => {
            x1 == x2 && t(c1, c2) && d(g1, g2)
        }
        (REx(l1, x1, g1), REx(l2, x2, g2)) | (RAll(l1, x1, g1), RAll(l2, x2, g2)) => {
            l1 == l2 && x1 == x2 && d(g1, g2)
        }
        (Ex(x1, g1), Ex(x2, g2))
        | (All(x1, g1), All(x2, g2))
        | (RelEx(x1, g1), RelEx(x2, g2))
        | (RelAll(x1, g1), RelAll(x2, g2)) => x1 == x2 && d(g1, g2),
        _ => false,
    }
}

fn ax_equality(s: &Sequent) -> bool {
    s.iter().any(|f| {
        let Or(l, _) = f else { return false };
        let BEx(_, a, inner) = l.as_ref() else {
            return false;
        };
        let NotIn(_, b) = inner.as_ref() else {
            return false;
        };
        if *f != canon(&negate(&formulas::set_eq(a, b))) {
            return false;
        }
        s.iter().any(|g| {
            let fa = negate(g);
            s.iter().any(|h| classes(h).is_b && differ_by(&fa, h, a, b))
        })
    })
}

// ---------------------------------------------------------------------------
// rules and parameters

/// Selects one premise of a rule.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    Index(usize),
    Level(OrdTerm),
    Pair(OrdTerm, SetTerm),
    Term(SetTerm),
    Rel(String),
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Index(i) => write!(f, "{i}"),
            Param::Level(b) => write!(f, "[{b}]"),
            Param::Pair(b, a) => write!(f, "[{b},{a}]"),
            Param::Term(a) => write!(f, "[{a}]"),
            Param::Rel(u) => write!(f, "[{u}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RsRule {
    Axiom(RsAxiom),
    Or {
        principal: Formula,
    },
    And {
        principal: Formula,
    },
    NotM {
        principal: Formula,
    },
    Ex {
        principal: Formula,
        level: OrdTerm,
        term: SetTerm,
    },
    All {
        principal: Formula,
    },
    REx {
        principal: Formula,
        level: OrdTerm,
        term: SetTerm,
    },
    RAll {
        principal: Formula,
    },
    Bex {
        principal: Formula,
        term: SetTerm,
    },
    Ball {
        principal: Formula,
    },
    Ex2 {
        principal: Formula,
        rel: String,
    },
    All2 {
        principal: Formula,
    },
    Cut {
        formula: Formula,
    },
    S0Ref {
        principal: Formula,
        formula: Formula,
    },
    Bc {
        principal: Formula,
        formula: Formula,
        level: OrdTerm,
    },
}

/// ∃z F^{(z)} with z fresh for F.
pub fn s0_principal(f: &Formula) -> Formula {
    let z = fresh_name("z", &free_vars(f));
    canon(&ex(&z, formulas::relativize(f, &SetTerm::Var(z.clone()))))
}

/// ∃z^{β+ω} F^{(z)} with z fresh for F.
pub fn bc_principal(f: &Formula, beta: &OrdTerm) -> Formula {
    let z = fresh_name("z", &free_vars(f));
    let lvl = nf_sum(beta, &OrdTerm::omega());
    canon(&rex(
        lvl,
        &z,
        formulas::relativize(f, &SetTerm::Var(z.clone())),
    ))
}

fn bad_param(q: &Param, why: &str) -> RsError {
    RsError::BadParam(format!("{q}: {why}"))
}

impl RsRule {
    pub fn tag(&self) -> String {
        match self {
            RsRule::Axiom(a) => format!("axiom{}", a.number()),
            RsRule::Or { .. } => "or".into(),
            RsRule::And { .. } => "and".into(),
            RsRule::NotM { .. } => "notM".into(),
            RsRule::Ex { .. } => "ex".into(),
            RsRule::All { .. } => "all".into(),
            RsRule::REx { .. } => "rex".into(),
            RsRule::RAll { .. } => "rall".into(),
            RsRule::Bex { .. } => "bex".into(),
            RsRule::Ball { .. } => "ball".into(),
            RsRule::Ex2 { .. } => "ex2".into(),
            RsRule::All2 { .. } => "all2".into(),
            RsRule::Cut { .. } => "cut".into(),
            RsRule::S0Ref { .. } => "s0ref".into(),
            RsRule::Bc { .. } => "bc".into(),
        }
    }

    pub fn principal(&self) -> Option<&Formula> {
        match self {
            RsRule::Axiom(_) | RsRule::Cut { .. } => None,
            RsRule::Or { principal }
            | RsRule::And { principal }
            | RsRule::NotM { principal }
            | RsRule::Ex { principal, .. }
            | RsRule::All { principal }
            | RsRule::REx { principal, .. }
            | RsRule::RAll { principal }
            | RsRule::Bex { principal, .. }
            | RsRule::Ball { principal }
            | RsRule::Ex2 { principal, .. }
            | RsRule::All2 { principal }
            | RsRule::S0Ref { principal, .. }
            | RsRule::Bc { principal, .. } => Some(principal),
        }
    }

    /// Number of premises for finitary rules; None for premise families.
    pub fn arity(&self) -> Option<usize> {
        match self {
            RsRule::Axiom(_) => Some(0),
            RsRule::And { .. } | RsRule::Cut { .. } => Some(2),
            RsRule::NotM { .. } | RsRule::All { .. } | RsRule::RAll { .. } => None,
            RsRule::Ball { .. } | RsRule::All2 { .. } => None,
            _ => Some(1),
        }
    }

    fn shape_ok(&self) -> bool {
        match self {
            RsRule::Axiom(_) | RsRule::Cut { .. } => true,
            RsRule::Or { principal } => matches!(principal, Or(..)),
            RsRule::And { principal } => matches!(principal, And(..)),
            RsRule::NotM { principal } => matches!(principal, NotM(..)),
            RsRule::Ex { principal, .. } => matches!(principal, Ex(..)),
            RsRule::All { principal } => matches!(principal, All(..)),
            RsRule::REx { principal, .. } => matches!(principal, REx(..)),
            RsRule::RAll { principal } => matches!(principal, RAll(..)),
            RsRule::Bex { principal, .. } => matches!(principal, BEx(..)),
            RsRule::Ball { principal } => matches!(principal, BAll(..)),
            RsRule::Ex2 { principal, .. } => matches!(principal, RelEx(..)),
            RsRule::All2 { principal } => matches!(principal, RelAll(..)),
            RsRule::S0Ref { principal, formula } => *principal == s0_principal(formula),
            RsRule::Bc {
                principal,
                formula,
                level,
            } => *principal == bc_principal(formula, level),
        }
    }

    /// The minor formulas of the premise selected by `q`; rejects parameters
    /// outside the rule's range.
    pub fn minors(&self, q: &Param) -> Result<Vec<Formula>, RsError> {
        let finite = |n: usize| match q {
            Param::Index(i) if *i < n => Ok(*i),
            _ => Err(bad_param(q, "expected a premise index")),
        };
        let inst = |f: &Formula, t: &SetTerm| canon(&instantiate(f, t).expect("quantifier"));
        match self {
            RsRule::Axiom(_) => Err(bad_param(q, "axioms have no premises")),
            RsRule::Or { principal } => {
                finite(1)?;
                match principal {
                    Or(g, h) => Ok(vec![(**g).clone(), (**h).clone()]),
                    _ => Err(bad_param(q, "malformed principal")),
                }
            }
            RsRule::And { principal } => {
                let i = finite(2)?;
                match principal {
                    And(g, h) => Ok(vec![if i == 0 { (**g).clone() } else { (**h).clone() }]),
                    _ => Err(bad_param(q, "malformed principal")),
                }
            }
            RsRule::NotM { principal } => match (principal, q) {
                (NotM(lam, a), Param::Level(b)) if lt(b, lam) => {
                    Ok(vec![NotM(b.clone(), a.clone())])
                }
                _ => Err(bad_param(q, "expected a level below the principal's")),
            },
            RsRule::Ex {
                principal,
                level,
                term,
            }
            | RsRule::REx {
                principal,
                level,
                term,
            } => {
                finite(1)?;
                Ok(vec![canon(&and(
                    M(level.clone(), term.clone()),
                    inst(principal, term),
                ))])
            }
            RsRule::All { principal } => match q {
                Param::Pair(b, a) if lt(b, &big_omega()) => Ok(vec![canon(&or(
                    NotM(b.clone(), a.clone()),
                    inst(principal, a),
                ))]),
                _ => Err(bad_param(q, "expected (β < Ω, term)")),
            },
            RsRule::RAll { principal } => match (principal, q) {
                (RAll(al, ..), Param::Pair(b, a)) if b <= al => Ok(vec![canon(&or(
                    NotM(b.clone(), a.clone()),
                    inst(principal, a),
                ))]),
                _ => Err(bad_param(q, "expected (β ≤ α, term)")),
            },
            RsRule::Bex { principal, term } => {
                finite(1)?;
                match principal {
                    BEx(_, c, _) => Ok(vec![canon(&and(
                        In(term.clone(), c.clone()),
                        inst(principal, term),
                    ))]),
                    _ => Err(bad_param(q, "malformed principal")),
                }
            }
            RsRule::Ball { principal } => match (principal, q) {
                (BAll(_, c, _), Param::Term(b)) => Ok(vec![canon(&or(
                    NotIn(b.clone(), c.clone()),
                    inst(principal, b),
                ))]),
                _ => Err(bad_param(q, "expected a term")),
            },
            RsRule::Ex2 { principal, rel } => {
                finite(1)?;
                Ok(vec![canon(
                    &instantiate_rel(principal, rel).expect("relation quantifier"),
                )])
            }
            RsRule::All2 { principal } => match q {
                Param::Rel(u) => Ok(vec![canon(
                    &instantiate_rel(principal, u).expect("relation quantifier"),
                )]),
                _ => Err(bad_param(q, "expected a relation variable")),
            },
            RsRule::Cut { formula } => {
                let i = finite(2)?;
                Ok(vec![if i == 0 {
                    formula.clone()
                } else {
                    canon(&negate(formula))
                }])
            }
            RsRule::S0Ref { formula, .. } => {
                finite(1)?;
                Ok(vec![formula.clone()])
            }
            RsRule::Bc { formula, level, .. } => {
                finite(1)?;
                Ok(vec![canon(&formulas::bound_exists(formula, level))])
            }
        }
    }

    /// Level added to the operator for the selected premise.
    fn premise_level<'a>(&self, q: &'a Param) -> Option<&'a OrdTerm> {
        match (self, q) {
            (RsRule::NotM { .. }, Param::Level(b)) => Some(b),
            (RsRule::All { .. } | RsRule::RAll { .. }, Param::Pair(b, _)) => Some(b),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// certificates

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RsError {
    #[error("side condition violated at {path}: {reason}")]
    SideCondition { path: String, reason: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("bad premise parameter {0}")]
    BadParam(String),
    #[error("proof rejected: {0}")]
    Proof(String),
    #[error(transparent)]
    Ordinal(#[from] OrdError),
}

pub type PremFn = Arc<dyn Fn(&Param) -> Result<Cert, RsError> + Send + Sync>;

/// One node of a derivation: the conclusion, ordinal label, cut rank,
/// optional length bound and operator, with premises produced on demand.
pub struct Certificate {
    pub conclusion: Sequent,
    pub alpha: OrdTerm,
    pub rho: OrdTerm,
    pub p: Option<usize>,
    pub op: DOp,
    pub rule: RsRule,
    premises: PremFn,
    memo: Mutex<BTreeMap<Param, Cert>>,
}

pub type Cert = Arc<Certificate>;

impl fmt::Debug for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Certificate")
            .field(
                "conclusion",
                &self
                    .conclusion
                    .iter()
                    .map(|g| g.to_string())
                    .collect::<Vec<_>>(),
            )
            .field("alpha", &self.alpha.to_string())
            .field("rho", &self.rho.to_string())
            .field("p", &self.p)
            .field("op", &self.op.to_string())
            .field("rule", &self.rule.tag())
            .finish()
    }
}

impl Certificate {
    pub fn premise(&self, q: &Param) -> Result<Cert, RsError> {
        self.rule.minors(q)?;
        if let Some(c) = self.memo.lock().expect("memo lock").get(q) {
            return Ok(c.clone());
        }
        let c = (self.premises)(q)?;
        self.memo
            .lock()
            .expect("memo lock")
            .insert(q.clone(), c.clone());
        Ok(c)
    }
}

fn no_premises() -> PremFn {
    Arc::new(|q| Err(bad_param(q, "axioms have no premises")))
}

fn list(v: Vec<Cert>) -> PremFn {
    Arc::new(move |q| match q {
        Param::Index(i) if *i < v.len() => Ok(v[*i].clone()),
        _ => Err(bad_param(q, "index out of range")),
    })
}

fn family<F>(f: F) -> PremFn
where
    F: Fn(&Param) -> Result<Cert, RsError> + Send + Sync + 'static,
{
    Arc::new(f)
}

#[allow(clippy::too_many_arguments)]
fn mk(
    conclusion: Sequent,
    alpha: OrdTerm,
    rho: OrdTerm,
    p: Option<usize>,
    op: DOp,
    rule: RsRule,
    premises: PremFn,
) -> Cert {
    Arc::new(Certificate {
        conclusion,
        alpha,
        rho,
        p,
        op,
        rule,
        premises,
        memo: Mutex::new(BTreeMap::new()),
    })
}

fn node(
    conclusion: Sequent,
    alpha: OrdTerm,
    rho: OrdTerm,
    op: DOp,
    rule: RsRule,
    premises: PremFn,
) -> Cert {
    mk(conclusion, alpha, rho, None, op, rule, premises)
}

fn leaf(conclusion: Sequent, alpha: OrdTerm, rho: OrdTerm, op: DOp, ax: RsAxiom) -> Cert {
    mk(
        conclusion,
        alpha,
        rho,
        None,
        op,
        RsRule::Axiom(ax),
        no_premises(),
    )
}

/// Same rule and premises under a new conclusion, label, rank and operator.
fn relabel(c: &Cert, conclusion: Sequent, alpha: OrdTerm, rho: OrdTerm, op: DOp) -> Cert {
    mk(
        conclusion,
        alpha,
        rho,
        c.p,
        op,
        c.rule.clone(),
        c.premises.clone(),
    )
}

/// Premises of `c`, each passed through `f`.
fn mapped<F>(c: &Cert, f: F) -> PremFn
where
    F: Fn(Cert) -> Result<Cert, RsError> + Send + Sync + 'static,
{
    let c = c.clone();
    Arc::new(move |q| f(c.premise(q)?))
}

/// Sets the length bound on every node.
pub fn with_p(c: &Cert, p: Option<usize>) -> Cert {
    mk(
        c.conclusion.clone(),
        c.alpha.clone(),
        c.rho.clone(),
        p,
        c.op.clone(),
        c.rule.clone(),
        mapped(c, move |d| Ok(with_p(&d, p))),
    )
}

/// Raises the label and cut rank and adds formulas to the conclusion.
pub fn weaken(c: &Cert, alpha: &OrdTerm, rho: &OrdTerm, extra: &Sequent) -> Result<Cert, RsError> {
    if alpha < &c.alpha {
        return Err(RsError::Precondition(format!(
            "label {alpha} is below {}",
            c.alpha
        )));
    }
    if rho < &c.rho {
        return Err(RsError::Precondition(format!(
            "rank {rho} is below {}",
            c.rho
        )));
    }
    if !h_mem(alpha, &c.op) {
        return Err(RsError::Precondition(format!(
            "label {alpha} is not in {}",
            c.op
        )));
    }
    if let Some(t) = seq_params_of(extra).into_iter().find(|t| !h_mem(t, &c.op)) {
        return Err(RsError::Precondition(format!(
            "parameter {t} is not in {}",
            c.op
        )));
    }
    let extra: Sequent = extra.iter().map(canon).collect();
    Ok(relabel(
        c,
        union(&c.conclusion, &extra),
        alpha.clone(),
        rho.clone(),
        c.op.clone(),
    ))
}

// ---------------------------------------------------------------------------
// checking

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckConfig {
    /// Nodes deeper than this are checked locally but not expanded.
    pub depth: usize,
    /// Parameters drawn per premise family.
    pub samples: usize,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            depth: 6,
            samples: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CertReport {
    pub ok: bool,
    /// True when no family was sampled and no node was cut off.
    pub complete: bool,
    pub nodes: usize,
    pub sampled_families: usize,
    pub budget_exhausted: usize,
    pub violations: Vec<Violation>,
}

impl CertReport {
    pub fn status(&self) -> &'static str {
        match (self.ok, self.complete) {
            (false, _) => "rejected",
            (true, true) => "verified",
            (true, false) => "verified (sampled)",
        }
    }
}

fn ordinal_pool() -> &'static [OrdTerm] {
    static POOL: OnceLock<Vec<OrdTerm>> = OnceLock::new();
    POOL.get_or_init(|| {
        let om = big_omega();
        let mut v: Vec<OrdTerm> = enumerate_upto(5)
            .into_iter()
            .filter(|t| lt(t, &om))
            .collect();
        v.sort();
        v
    })
}

/// Local side conditions of a single node.
pub fn check_local(c: &Certificate) -> Vec<String> {
    let mut out = Vec::new();
    if !h_mem(&c.alpha, &c.op) {
        out.push(format!("label {} is not in {}", c.alpha, c.op));
    }
    for t in seq_params_of(&c.conclusion) {
        if !h_mem(&t, &c.op) {
            out.push(format!("parameter {t} is not in {}", c.op));
        }
    }
    for f in &c.conclusion {
        if formulas::check_levels(f).is_err() {
            out.push(format!("formula {f} has a level ≥ Ω"));
        }
    }
    if let Some(p) = c.p {
        if let Some(f) = c.conclusion.iter().find(|f| length(f) >= p) {
            out.push(format!("formula {f} has length ≥ {p}"));
        }
    }
    if !c.rule.shape_ok() {
        out.push(format!("malformed {} inference", c.rule.tag()));
        return out;
    }
    if let Some(pr) = c.rule.principal() {
        if !c.conclusion.contains(pr) {
            out.push(format!("principal {pr} is not in the conclusion"));
        }
    }
    match &c.rule {
        RsRule::Axiom(ax) => {
            if !axiom_holds(&c.conclusion, *ax) {
                out.push(format!(
                    "conclusion is not an instance of axiom {}",
                    ax.number()
                ));
            }
        }
        RsRule::NotM {
            principal: NotM(lam, _),
        } => {
            if classify(lam) != Kind::Limit {
                out.push(format!("level {lam} is not a limit"));
            }
        }
        RsRule::Ex { level, .. } => {
            if !lt(level, &c.alpha) {
                out.push(format!(
                    "witness level {level} is not below the label {}",
                    c.alpha
                ));
            }
            if !lt(level, &big_omega()) {
                out.push(format!("witness level {level} is not below Ω"));
            }
        }
        RsRule::REx {
            principal: REx(al, ..),
            level,
            ..
        } => {
            if level > al {
                out.push(format!("witness level {level} exceeds {al}"));
            }
        }
        RsRule::Cut { formula } => {
            if !lt(&rank(formula), &c.rho) {
                out.push(format!(
                    "cut formula {formula} has rank {} ≥ {}",
                    rank(formula),
                    c.rho
                ));
            }
            if let Some(p) = c.p {
                if length(formula) >= p {
                    out.push(format!("cut formula {formula} has length ≥ {p}"));
                }
            }
            if seq_params_of([formula]).iter().any(|t| !h_mem(t, &c.op)) {
                out.push(format!(
                    "cut formula {formula} has parameters outside {}",
                    c.op
                ));
            }
        }
        RsRule::S0Ref { formula, .. } => {
            if !lt(&big_omega(), &c.alpha) {
                out.push(format!("label {} is not above Ω", c.alpha));
            }
            if !classes(formula).is_s0 {
                out.push(format!("{formula} is not an S0 formula"));
            }
        }
        RsRule::Bc { formula, level, .. } => {
            if !classes(formula).is_s0 {
                out.push(format!("{formula} is not an S0 formula"));
            }
            if !lt(level, &big_omega()) {
                out.push(format!("level {level} is not below Ω"));
            }
        }
        _ => {}
    }
    out
}

/// Conditions linking a node with the premise selected by `q`.
pub fn check_edge(c: &Certificate, q: &Param, child: &Certificate) -> Vec<String> {
    let mut out = Vec::new();
    let minors = match c.rule.minors(q) {
        Ok(m) => m,
        Err(e) => return vec![e.to_string()],
    };
    for f in &child.conclusion {
        if !c.conclusion.contains(f) && !minors.contains(f) {
            out.push(format!(
                "premise formula {f} is neither in the conclusion nor a minor formula"
            ));
        }
    }
    if !lt(&child.alpha, &c.alpha) {
        out.push(format!(
            "premise label {} is not below {}",
            child.alpha, c.alpha
        ));
    }
    if let (RsRule::All { .. }, Param::Pair(b, _)) = (&c.rule, q) {
        if !lt(b, &child.alpha) {
            out.push(format!(
                "level {b} is not below the premise label {}",
                child.alpha
            ));
        }
    }
    if child.rho > c.rho {
        out.push(format!("premise rank {} exceeds {}", child.rho, c.rho));
    }
    let expected = match c.rule.premise_level(q) {
        Some(b) => c.op.with([b]),
        None => c.op.clone(),
    };
    if !child.op.le(&expected) {
        out.push(format!(
            "premise operator {} is not below {}",
            child.op, expected
        ));
    }
    if let Some(p) = c.p {
        match child.p {
            Some(k) if k <= p => {}
            other => out.push(format!("premise length bound {other:?} is not within {p}")),
        }
    }
    out
}

fn sample_params(c: &Certificate, cfg: &CheckConfig, rng: &mut ChaCha8Rng) -> Vec<Param> {
    let mut ords: Vec<OrdTerm> = ordinal_pool().to_vec();
    for t in seq_params_of(&c.conclusion) {
        if lt(&t, &big_omega()) && !ords.contains(&t) {
            ords.push(t);
        }
    }
    let fv = seq_free_vars(&c.conclusion);
    let mut terms: Vec<SetTerm> = fv.iter().map(|v| SetTerm::var(v)).collect();
    terms.push(SetTerm::Empty);
    terms.push(SetTerm::Omega);
    terms.push(SetTerm::var(&fresh_name("s", &fv)));
    let mut rels: Vec<String> = seq_free_rel_vars(&c.conclusion).into_iter().collect();
    rels.push(fresh_name("S", &seq_free_rel_vars(&c.conclusion)));
    let pairs = |bound: &dyn Fn(&OrdTerm) -> bool| -> Vec<Param> {
        ords.iter()
            .filter(|b| bound(b))
            .flat_map(|b| terms.iter().map(move |a| Param::Pair(b.clone(), a.clone())))
            .collect()
    };
    let cands: Vec<Param> = match &c.rule {
        RsRule::NotM {
            principal: NotM(lam, _),
        } => ords
            .iter()
            .filter(|b| lt(b, lam))
            .map(|b| Param::Level(b.clone()))
            .collect(),
        RsRule::All { .. } => pairs(&|_| true),
        RsRule::RAll {
            principal: RAll(al, ..),
        } => {
            let mut v = pairs(&|b| b <= al);
            v.extend(terms.iter().map(|a| Param::Pair(al.clone(), a.clone())));
            v
        }
        RsRule::Ball { .. } => terms.iter().map(|a| Param::Term(a.clone())).collect(),
        RsRule::All2 { .. } => rels.iter().map(|u| Param::Rel(u.clone())).collect(),
        _ => Vec::new(),
    };
    let mut v: Vec<Param> = cands.choose_multiple(rng, cfg.samples).cloned().collect();
    v.sort();
    v.dedup();
    v
}

/// Walks the derivation: finitary premises in full, premise families on a
/// seeded sample, down to `cfg.depth`.
pub fn cert_check(c: &Cert, cfg: CheckConfig) -> CertReport {
    let mut rep = CertReport {
        ok: true,
        complete: true,
        nodes: 0,
        sampled_families: 0,
        budget_exhausted: 0,
        violations: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    walk(c, "root", 0, &cfg, &mut rng, &mut rep, &mut |_, _| {});
    rep.ok = rep.violations.is_empty();
    rep
}

/// Calls `f` on every node `cert_check` would visit under the same config.
pub fn visit_sampled<F: FnMut(&str, &Certificate)>(c: &Cert, cfg: CheckConfig, mut f: F) {
    let mut rep = CertReport {
        ok: true,
        complete: true,
        nodes: 0,
        sampled_families: 0,
        budget_exhausted: 0,
        violations: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    walk(c, "root", 0, &cfg, &mut rng, &mut rep, &mut f);
}

fn walk(
    c: &Cert,
    path: &str,
    depth: usize,
    cfg: &CheckConfig,
    rng: &mut ChaCha8Rng,
    rep: &mut CertReport,
    visit: &mut dyn FnMut(&str, &Certificate),
) {
    rep.nodes += 1;
    visit(path, c);
    for reason in check_local(c) {
        rep.violations.push(Violation {
            path: path.to_string(),
            reason,
        });
    }
    let qs: Vec<Param> = match c.rule.arity() {
        Some(0) => return,
        Some(n) => (0..n).map(Param::Index).collect(),
        None => {
            rep.sampled_families += 1;
            rep.complete = false;
            sample_params(c, cfg, rng)
        }
    };
    if depth >= cfg.depth {
        rep.budget_exhausted += 1;
        rep.complete = false;
        return;
    }
    for q in qs {
        let sub = format!("{path}/{q}");
        match c.premise(&q) {
            Ok(child) => {
                for reason in check_edge(c, &q, &child) {
                    rep.violations.push(Violation {
                        path: sub.clone(),
                        reason,
                    });
                }
                walk(&child, &sub, depth + 1, cfg, rng, rep, visit);
            }
            Err(e) => rep.violations.push(Violation {
                path: sub,
                reason: e.to_string(),
            }),
        }
    }
}

/// Err with the first violation, if any.
pub fn cert_verify(c: &Cert, cfg: CheckConfig) -> Result<CertReport, RsError> {
    let rep = cert_check(c, cfg);
    match rep.violations.first() {
        Some(v) => Err(RsError::SideCondition {
            path: v.path.clone(),
            reason: v.reason.clone(),
        }),
        None => Ok(rep),
    }
}

// ---------------------------------------------------------------------------
// builders

fn zero() -> OrdTerm {
    OrdTerm::zero()
}

fn add_nat(t: &OrdTerm, k: u64) -> OrdTerm {
    nf_sum(t, &OrdTerm::nat(k))
}

fn inst(f: &Formula, t: &SetTerm) -> Formula {
    canon(&instantiate(f, t).expect("set quantifier"))
}

fn inst_rel(f: &Formula, u: &str) -> Formula {
    canon(&instantiate_rel(f, u).expect("relation quantifier"))
}

/// {¬F, F} with label rk(F)#rk(F) and cut rank 0.
pub fn derive_tnd(f: &Formula, op: &DOp) -> Cert {
    let f = canon(f);
    let op = op.with(&params(&f));
    tnd_go(f, op)
}

fn tnd_go(f: Formula, op: DOp) -> Cert {
    let nf = canon(&negate(&f));
    let r = rank(&f);
    let label = nsum(&r, &r);
    let concl = seq([f.clone(), nf.clone()]);
    if classes(&f).is_b {
        return leaf(concl, label, zero(), op, RsAxiom::Tnd);
    }
    match &f {
        All(..) | BAll(..) | RAll(..) | RelAll(..) | And(..) => tnd_go(nf, op),
        Or(g, h) => {
            let (g, h) = (canon(g), canon(h));
            let r1 = omax(&rank(&g), &rank(&h));
            let inner = node(
                seq([nf.clone(), g.clone(), h.clone()]),
                nsum(&r1, &r1).succ(),
                zero(),
                op.clone(),
                RsRule::And { principal: nf },
                list(vec![tnd_go(g, op.clone()), tnd_go(h, op.clone())]),
            );
            node(
                concl,
                label,
                zero(),
                op,
                RsRule::Or { principal: f },
                list(vec![inner]),
            )
        }
        Ex(..) => {
            let (ex_f, op2, rho) = (f.clone(), op.clone(), r.clone());
            let fam = family(move |q| {
                let Param::Pair(b, a) = q else {
                    return Err(bad_param(q, "expected a pair"));
                };
                let minor = canon(&and(M(b.clone(), a.clone()), inst(&ex_f, a)));
                let rb = rank(&minor);
                let opb = op2.with([b]);
                let sub = tnd_go(minor.clone(), opb.clone());
                Ok(node(
                    seq([negate(&minor), ex_f.clone()]),
                    nsum(&rb, &rho),
                    zero(),
                    opb,
                    RsRule::Ex {
                        principal: ex_f.clone(),
                        level: b.clone(),
                        term: a.clone(),
                    },
                    list(vec![sub]),
                ))
            });
            node(concl, label, zero(), op, RsRule::All { principal: nf }, fam)
        }
        BEx(_, c, _) => {
            let (ex_f, op2, c) = (f.clone(), op.clone(), c.clone());
            let fam = family(move |q| {
                let Param::Term(b) = q else {
                    return Err(bad_param(q, "expected a term"));
                };
                let minor = canon(&and(In(b.clone(), c.clone()), inst(&ex_f, b)));
                let rb = rank(&minor);
                let sub = tnd_go(minor.clone(), op2.clone());
                Ok(node(
                    seq([negate(&minor), ex_f.clone()]),
                    nsum(&rb, &rb).succ(),
                    zero(),
                    op2.clone(),
                    RsRule::Bex {
                        principal: ex_f.clone(),
                        term: b.clone(),
                    },
                    list(vec![sub]),
                ))
            });
            node(
                concl,
                label,
                zero(),
                op,
                RsRule::Ball { principal: nf },
                fam,
            )
        }
        REx(..) => {
            let (ex_f, op2) = (f.clone(), op.clone());
            let fam = family(move |q| {
                let Param::Pair(b, a) = q else {
                    return Err(bad_param(q, "expected a pair"));
                };
                let minor = canon(&and(M(b.clone(), a.clone()), inst(&ex_f, a)));
                let opb = op2.with([b]);
                let r1 = rank(&ex_f).pred().expect("successor rank");
                let sub = tnd_go(minor.clone(), opb.clone());
                Ok(node(
                    seq([negate(&minor), ex_f.clone()]),
                    nsum(&r1, &r1).succ(),
                    zero(),
                    opb,
                    RsRule::REx {
                        principal: ex_f.clone(),
                        level: b.clone(),
                        term: a.clone(),
                    },
                    list(vec![sub]),
                ))
            });
            node(
                concl,
                label,
                zero(),
                op,
                RsRule::RAll { principal: nf },
                fam,
            )
        }
        RelEx(..) => {
            let (ex_f, op2) = (f.clone(), op.clone());
            let fam = family(move |q| {
                let Param::Rel(u) = q else {
                    return Err(bad_param(q, "expected a relation variable"));
                };
                let minor = inst_rel(&ex_f, u);
                let rb = rank(&minor);
                let sub = tnd_go(minor.clone(), op2.clone());
                Ok(node(
                    seq([negate(&minor), ex_f.clone()]),
                    nsum(&rb, &rb).succ(),
                    zero(),
                    op2.clone(),
                    RsRule::Ex2 {
                        principal: ex_f.clone(),
                        rel: u.clone(),
                    },
                    list(vec![sub]),
                ))
            });
            node(
                concl,
                label,
                zero(),
                op,
                RsRule::All2 { principal: nf },
                fam,
            )
        }
        _ => unreachable!("atoms are bounded"),
    }
}

/// {¬∃x^α F, ∃x F}.
pub fn derive_lifting(alpha: &OrdTerm, x: &str, body: &Formula, op: &DOp) -> Cert {
    let rex_f = canon(&rex(alpha.clone(), x, body.clone()));
    let ex_f = canon(&ex(x, body.clone()));
    let neg = canon(&negate(&rex_f));
    let r = rank(&rex_f);
    let op = op.with(&params(&rex_f));
    let (ex2, op2) = (ex_f.clone(), op.clone());
    let fam = family(move |q| {
        let Param::Pair(b, a) = q else {
            return Err(bad_param(q, "expected a pair"));
        };
        let minor = canon(&and(M(b.clone(), a.clone()), inst(&ex2, a)));
        let rb = rank(&minor);
        let opb = op2.with([b]);
        let sub = tnd_go(minor.clone(), opb.clone());
        Ok(node(
            seq([negate(&minor), ex2.clone()]),
            nsum(&rb, &rb).succ(),
            zero(),
            opb,
            RsRule::Ex {
                principal: ex2.clone(),
                level: b.clone(),
                term: a.clone(),
            },
            list(vec![sub]),
        ))
    });
    node(
        seq([neg.clone(), ex_f]),
        nsum(&r, &r),
        zero(),
        op,
        RsRule::RAll { principal: neg },
        fam,
    )
}

struct EpsCtx {
    neg_g: Formula,
    all_f: Formula,
    sigma: OrdTerm,
    op: DOp,
}

/// ∈-induction for F[u]: {¬G ∨ ∀u F} with G = ∀u((∀y∈u)F[y] → F[u]).
pub fn derive_eps_ind(u: &str, f: &Formula, op: &DOp) -> Cert {
    let e = canon(&taitkp::eps_ind_instance(f, u));
    let Or(neg_g, all_f) = &e else {
        unreachable!("implication")
    };
    let g = canon(&negate(neg_g));
    let sigma = omega_pow(&rank(&g));
    let opf = op.with(&params(&e));
    let ctx = Arc::new(EpsCtx {
        neg_g: (**neg_g).clone(),
        all_f: (**all_f).clone(),
        sigma: sigma.clone(),
        op: opf.clone(),
    });
    let c2 = ctx.clone();
    let fam = family(move |q| {
        let Param::Pair(al, a) = q else {
            return Err(bad_param(q, "expected a pair"));
        };
        let st = star(&c2, al, a);
        let minor = canon(&or(NotM(al.clone(), a.clone()), inst(&c2.all_f, a)));
        Ok(node(
            seq([c2.neg_g.clone(), minor.clone()]),
            st.alpha.succ(),
            big_omega(),
            c2.op.with([al]),
            RsRule::Or { principal: minor },
            list(vec![st]),
        ))
    });
    let top = nf_sum(&sigma, &big_omega());
    let all_node = node(
        seq([ctx.neg_g.clone(), ctx.all_f.clone()]),
        top.clone(),
        big_omega(),
        opf.clone(),
        RsRule::All {
            principal: ctx.all_f.clone(),
        },
        fam,
    );
    node(
        seq([e.clone()]),
        top.succ(),
        big_omega(),
        opf,
        RsRule::Or { principal: e },
        list(vec![all_node]),
    )
}

/// ¬G, ¬M_α(a), F[a] with label σ#ω^α.
fn star(ctx: &Arc<EpsCtx>, al: &OrdTerm, a: &SetTerm) -> Cert {
    let fa = inst(&ctx.all_f, a);
    let nm = NotM(al.clone(), a.clone());
    let concl = seq([ctx.neg_g.clone(), nm.clone(), fa.clone()]);
    let gamma = |x: &OrdTerm| nsum(&ctx.sigma, &omega_pow(x));
    let op = ctx.op.with([al]);
    let rho = big_omega();
    match classify(al) {
        Kind::Zero => leaf(concl, gamma(al), rho, op, RsAxiom::NotM0),
        Kind::Limit => {
            let (c2, a2) = (ctx.clone(), a.clone());
            node(
                concl,
                gamma(al),
                rho,
                op,
                RsRule::NotM { principal: nm },
                family(move |q| match q {
                    Param::Level(b) => Ok(star(&c2, b, &a2)),
                    _ => Err(bad_param(q, "expected a level")),
                }),
            )
        }
        Kind::Successor => {
            let be = al.pred().expect("successor");
            let gb = gamma(&be);
            let body_a = inst(&ctx.neg_g, a);
            let And(ball_fa, _) = &body_a else {
                unreachable!("conjunction")
            };
            let ball_fa = (**ball_fa).clone();
            let (c2, a2, al2, be2, op2, bf, gb2) = (
                ctx.clone(),
                a.clone(),
                al.clone(),
                be.clone(),
                op.clone(),
                ball_fa.clone(),
                gb.clone(),
            );
            let fam = family(move |q| {
                let Param::Term(b) = q else {
                    return Err(bad_param(q, "expected a term"));
                };
                let fb = inst(&bf, b);
                let minor = canon(&or(NotIn(b.clone(), a2.clone()), fb.clone()));
                let nm = NotM(al2.clone(), a2.clone());
                let ax12 = leaf(
                    seq([
                        nm.clone(),
                        NotIn(b.clone(), a2.clone()),
                        M(be2.clone(), b.clone()),
                    ]),
                    zero(),
                    zero(),
                    op2.clone(),
                    RsAxiom::MPred,
                );
                let cut = node(
                    seq([
                        c2.neg_g.clone(),
                        nm.clone(),
                        NotIn(b.clone(), a2.clone()),
                        fb,
                    ]),
                    gb2.succ(),
                    big_omega(),
                    op2.clone(),
                    RsRule::Cut {
                        formula: M(be2.clone(), b.clone()),
                    },
                    list(vec![ax12, star(&c2, &be2, b)]),
                );
                Ok(node(
                    seq([c2.neg_g.clone(), nm, minor.clone()]),
                    add_nat(&gb2, 2),
                    big_omega(),
                    op2.clone(),
                    RsRule::Or { principal: minor },
                    list(vec![cut]),
                ))
            });
            let n_ball = node(
                seq([ctx.neg_g.clone(), nm.clone(), ball_fa.clone()]),
                add_nat(&gb, 3),
                rho.clone(),
                op.clone(),
                RsRule::Ball { principal: ball_fa },
                fam,
            );
            let and1 = node(
                seq([ctx.neg_g.clone(), nm.clone(), body_a.clone(), fa.clone()]),
                add_nat(&gb, 4),
                rho.clone(),
                op.clone(),
                RsRule::And {
                    principal: body_a.clone(),
                },
                list(vec![n_ball, derive_tnd(&fa, &ctx.op)]),
            );
            let mab = canon(&and(M(al.clone(), a.clone()), body_a));
            let ax1 = leaf(
                seq([nm.clone(), M(al.clone(), a.clone())]),
                zero(),
                zero(),
                op.clone(),
                RsAxiom::Tnd,
            );
            let and2 = node(
                seq([ctx.neg_g.clone(), nm.clone(), mab.clone(), fa]),
                add_nat(&gb, 5),
                rho.clone(),
                op.clone(),
                RsRule::And { principal: mab },
                list(vec![ax1, and1]),
            );
            node(
                concl,
                gamma(al),
                rho,
                op,
                RsRule::Ex {
                    principal: ctx.neg_g.clone(),
                    level: al.clone(),
                    term: a.clone(),
                },
                list(vec![and2]),
            )
        }
    }
}

fn split_ex(f: &Formula) -> (String, Formula) {
    match f {
        Ex(z, body) => (z.clone(), (**body).clone()),
        _ => unreachable!("existential instance"),
    }
}

/// ¬M_α(a), ¬M_β(b), ∃z(a∈z ∧ b∈z).
pub fn derive_pair(a: &SetTerm, al: &OrdTerm, b: &SetTerm, be: &OrdTerm, op: &DOp) -> Cert {
    let g = omax(al, be);
    let p = canon(&taitkp::pair_instance(a, b));
    let c = rank_to(&p, &g.succ());
    let opx = op.with([al, be]);
    let (z, body) = split_ex(&p);
    let negs = [NotM(al.clone(), a.clone()), NotM(be.clone(), b.clone())];
    let ax = leaf(
        seq(negs.iter().cloned().chain([c.clone()])),
        zero(),
        zero(),
        opx.clone(),
        RsAxiom::Pair,
    );
    let lift = derive_lifting(&g.succ(), &z, &body, &opx);
    let rho = nf_sum(
        &omega_times(&g),
        &nf_sum(&OrdTerm::omega(), &OrdTerm::omega()),
    );
    node(
        seq(negs.iter().cloned().chain([p])),
        omega_pow(&add_nat(&g, 2)),
        rho,
        opx,
        RsRule::Cut { formula: c },
        list(vec![ax, lift]),
    )
}

/// ¬M_α(a), ∃z(∀y∈a)(∀x∈y)(x∈z).
pub fn derive_union(a: &SetTerm, al: &OrdTerm, op: &DOp) -> Cert {
    let u = canon(&taitkp::union_instance(a));
    let c = rank_to(&u, al);
    let opx = op.with([al]);
    let (z, body) = split_ex(&u);
    let nm = NotM(al.clone(), a.clone());
    let ax = leaf(
        seq([nm.clone(), c.clone()]),
        zero(),
        zero(),
        opx.clone(),
        RsAxiom::Union,
    );
    let lift = derive_lifting(al, &z, &body, &opx);
    node(
        seq([nm, u]),
        omega_pow(&add_nat(al, 2)),
        nf_sum(&omega_times(al), &OrdTerm::omega()),
        opx,
        RsRule::Cut { formula: c },
        list(vec![ax, lift]),
    )
}

/// ¬M_α(a), infinity(a) as a single axiom.
pub fn derive_infinity_eq(a: &SetTerm, al: &OrdTerm, op: &DOp) -> Cert {
    let f = canon(&formulas::infinity(a));
    leaf(
        seq([NotM(al.clone(), a.clone()), f]),
        zero(),
        zero(),
        op.with([al]),
        RsAxiom::Infinity,
    )
}

/// (∀x∈∅)(x≠x) with label 2.
fn empty_ball(op: &DOp) -> Cert {
    let pr = canon(&taitkp::empty_set_instance());
    let (pr2, op2) = (pr.clone(), op.clone());
    let fam = family(move |q| {
        let Param::Term(b) = q else {
            return Err(bad_param(q, "expected a term"));
        };
        let fb = inst(&pr2, b);
        let minor = canon(&or(NotIn(b.clone(), SetTerm::Empty), fb.clone()));
        let ax = leaf(
            seq([NotIn(b.clone(), SetTerm::Empty), fb]),
            zero(),
            zero(),
            op2.clone(),
            RsAxiom::NotInEmpty,
        );
        Ok(node(
            seq([minor.clone()]),
            OrdTerm::one(),
            zero(),
            op2.clone(),
            RsRule::Or { principal: minor },
            list(vec![ax]),
        ))
    });
    node(
        seq([pr.clone()]),
        OrdTerm::nat(2),
        zero(),
        op.clone(),
        RsRule::Ball { principal: pr },
        fam,
    )
}

/// M_1(∅) ∧ (∀x∈∅)(x≠x) with label 3.
pub fn derive_empty_set(op: &DOp) -> Cert {
    let m1 = M(OrdTerm::one(), SetTerm::Empty);
    let f = canon(&and(m1.clone(), taitkp::empty_set_instance()));
    let ax = leaf(seq([m1]), zero(), zero(), op.clone(), RsAxiom::MEmpty);
    node(
        seq([f.clone()]),
        OrdTerm::nat(3),
        zero(),
        op.clone(),
        RsRule::And { principal: f },
        list(vec![ax, empty_ball(op)]),
    )
}

/// M_{ω+1}(ω).
pub fn derive_omega_level(op: &DOp) -> Cert {
    leaf(
        seq([M(OrdTerm::omega().succ(), SetTerm::Omega)]),
        zero(),
        zero(),
        op.clone(),
        RsAxiom::MOmega,
    )
}

/// ¬M_α(a), ¬M_β⃗(b⃗), ∃z(z = {x∈a : A[x]}).
pub fn derive_sep(
    a: &SetTerm,
    al: &OrdTerm,
    x: &str,
    d: &Formula,
    extra: &[(SetTerm, OrdTerm)],
    op: &DOp,
) -> Result<Cert, RsError> {
    if !classes(d).is_delta0 {
        return Err(RsError::Precondition(format!("{d} is not Δ0")));
    }
    let s = canon(&taitkp::sep_instance(a, d, x));
    let c = rank_to(&s, &al.succ());
    let mut negs = vec![NotM(al.clone(), a.clone())];
    negs.extend(extra.iter().map(|(t, l)| NotM(l.clone(), t.clone())));
    let mx = extra.iter().fold(al.clone(), |m, (_, l)| omax(&m, l));
    let opx = op.with([al]).with(extra.iter().map(|(_, l)| l));
    let (z, body) = split_ex(&s);
    let ax = leaf(
        seq(negs.iter().cloned().chain([c.clone()])),
        zero(),
        zero(),
        opx.clone(),
        RsAxiom::Sep,
    );
    let lift = derive_lifting(&al.succ(), &z, &body, &opx);
    Ok(node(
        seq(negs.into_iter().chain([s])),
        omega_pow(&add_nat(&mx, 2)),
        big_omega(),
        opx,
        RsRule::Cut { formula: c },
        list(vec![ax, lift]),
    ))
}

/// ¬M⃗, the comprehension instance for B, as a single axiom.
pub fn derive_ca(
    b: &Formula,
    x: &str,
    y_rel: &str,
    extra: &[(SetTerm, OrdTerm)],
    op: &DOp,
) -> Result<Cert, RsError> {
    if !classes(b).is_delta0 {
        return Err(RsError::Precondition(format!("{b} is not Δ0")));
    }
    let f = canon(&taitkp::ca_instance(b, x, y_rel));
    let negs = extra.iter().map(|(t, l)| NotM(l.clone(), t.clone()));
    let opx = op.with(extra.iter().map(|(_, l)| l));
    Ok(leaf(seq(negs.chain([f])), zero(), zero(), opx, RsAxiom::Ca))
}

/// ¬M⃗, A → ∃z A^{(z)} for A ∈ S0, with label ω^{rk(A)+1}.
pub fn derive_s0_ref(f: &Formula, extra: &[(SetTerm, OrdTerm)], op: &DOp) -> Result<Cert, RsError> {
    let f = canon(f);
    if !classes(&f).is_s0 {
        return Err(RsError::Precondition(format!("{f} is not an S0 formula")));
    }
    let pr = s0_principal(&f);
    let imp_f = canon(&or(negate(&f), pr.clone()));
    let negs: Vec<Formula> = extra
        .iter()
        .map(|(t, l)| NotM(l.clone(), t.clone()))
        .collect();
    let opx = op.with(extra.iter().map(|(_, l)| l)).with(&params(&f));
    let r = rank(&f);
    let t = tnd_go(f.clone(), opx.clone());
    let refl = node(
        seq(negs.iter().cloned().chain([negate(&f), pr.clone()])),
        nsum(&r, &r).succ(),
        zero(),
        opx.clone(),
        RsRule::S0Ref {
            principal: pr,
            formula: f,
        },
        list(vec![t]),
    );
    Ok(node(
        seq(negs.into_iter().chain([imp_f.clone()])),
        omega_pow(&r.succ()),
        zero(),
        opx,
        RsRule::Or { principal: imp_f },
        list(vec![refl]),
    ))
}

// ---------------------------------------------------------------------------
// embedding

fn const_level(t: &SetTerm) -> OrdTerm {
    match t {
        SetTerm::Omega => OrdTerm::omega().succ(),
        _ => OrdTerm::one(),
    }
}

fn const_axiom(t: &SetTerm) -> RsAxiom {
    match t {
        SetTerm::Omega => RsAxiom::MOmega,
        _ => RsAxiom::MEmpty,
    }
}

/// Cuts ¬M_L(c) for a constant c against its level axiom.
fn discharge(c: &Cert, t: &SetTerm) -> Cert {
    let m = M(const_level(t), t.clone());
    let ax = mk(
        seq([m.clone()]),
        zero(),
        zero(),
        c.p,
        c.op.clone(),
        RsRule::Axiom(const_axiom(t)),
        no_premises(),
    );
    mk(
        without(&c.conclusion, &NotM(const_level(t), t.clone())),
        c.alpha.succ(),
        c.rho.clone(),
        c.p,
        c.op.clone(),
        RsRule::Cut { formula: m },
        list(vec![ax, c.clone()]),
    )
}

fn label_of(m: u32) -> OrdTerm {
    omega_pow(&add_nat(&big_omega(), m as u64))
}

fn rho_of(n: u32) -> OrdTerm {
    add_nat(&big_omega(), n as u64)
}

fn least_m(label: &OrdTerm) -> u32 {
    (0..)
        .find(|m| *label <= label_of(*m))
        .expect("labels below ε_{Ω+1}")
}

/// Result of embedding a Tait proof: the root derivation of
/// ¬M_1(u⃗), Θ with label ω^{Ω+m}, cut rank Ω+n and length bound p_len.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub cert: Cert,
    pub m: u32,
    pub n: u32,
    pub p_len: usize,
}

#[derive(Debug, Clone, Default)]
struct Inst {
    sets: BTreeMap<String, (SetTerm, OrdTerm)>,
    rels: BTreeMap<String, String>,
}

impl Inst {
    fn subst(&self) -> Subst {
        Subst {
            sets: self
                .sets
                .iter()
                .map(|(k, (t, _))| (k.clone(), t.clone()))
                .collect(),
            rels: self.rels.clone(),
        }
    }

    fn restrict(&self, vars: &BTreeSet<String>) -> Inst {
        Inst {
            sets: self
                .sets
                .iter()
                .filter(|(k, _)| vars.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            rels: self.rels.clone(),
        }
    }

    fn names(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.sets.keys().cloned().collect();
        for (t, _) in self.sets.values() {
            if let SetTerm::Var(v) = t {
                out.insert(v.clone());
            }
        }
        out
    }

    fn term(&self, t: &SetTerm) -> SetTerm {
        match t {
            SetTerm::Var(x) => self
                .sets
                .get(x)
                .map(|(t, _)| t.clone())
                .unwrap_or(SetTerm::Empty),
            c => c.clone(),
        }
    }

    fn level(&self, t: &SetTerm) -> OrdTerm {
        match t {
            SetTerm::Var(x) => self
                .sets
                .get(x)
                .map(|(_, l)| l.clone())
                .unwrap_or_else(OrdTerm::one),
            c => const_level(c),
        }
    }
}

struct Emb {
    seqs: Vec<Sequent>,
    infos: Vec<StepInfo>,
    m: Vec<u32>,
    n: Vec<u32>,
    p: usize,
    base: DOp,
}

fn axiom_label(id: &str, w: &taitkp::Witness) -> Result<OrdTerm, RsError> {
    let perr = |e: taitkp::TaitError| RsError::Proof(e.to_string());
    Ok(match id {
        "Delta0Col" => {
            let f = formulas::ball(
                &taitkp::w_var(w, "x").map_err(perr)?,
                taitkp::w_term(w, "a").map_err(perr)?,
                ex(
                    &taitkp::w_var(w, "y").map_err(perr)?,
                    taitkp::w_delta0(w, "D").map_err(perr)?,
                ),
            );
            omega_pow(&rank(&f).succ())
        }
        "EpsInd" => {
            let e = canon(&taitkp::eps_ind_instance(
                &taitkp::w_formula(w, "A").map_err(perr)?,
                &taitkp::w_var(w, "var").map_err(perr)?,
            ));
            let Or(neg_g, _) = &e else {
                unreachable!("implication")
            };
            let sigma = omega_pow(&rank(&negate(neg_g)));
            nf_sum(&sigma, &big_omega()).succ()
        }
        _ => zero(),
    })
}

pub fn embed(p: &TaitProof) -> Result<Embedding, RsError> {
    embed_with(p, &DOp::free())
}

/// Embeds a checked proof; every free variable u of the end sequent is
/// read as itself at level 1.
pub fn embed_with(p: &TaitProof, base: &DOp) -> Result<Embedding, RsError> {
    let (rep, infos) = taitkp::check_proof_with(&taitkp::AxiomRegistry::default(), p);
    if !rep.ok {
        let why = rep
            .failures
            .first()
            .map(|f| format!("step {}: {}", f.step, f.reason))
            .unwrap_or_default();
        return Err(RsError::Proof(why));
    }
    let infos: Vec<StepInfo> = infos
        .into_iter()
        .map(|i| i.expect("checked step"))
        .collect();
    let seqs: Vec<Sequent> = p.steps.iter().map(|s| s.sequent()).collect();
    let (mut ms, mut ns) = (Vec::new(), Vec::new());
    for info in &infos {
        let (m, n) = match info {
            StepInfo::Axiom { id, witness, .. } => (least_m(&axiom_label(id, witness)?), 0),
            StepInfo::Rule { premises, used } => {
                let m = premises.iter().map(|&j| ms[j]).max().unwrap_or(0) + 1;
                let mut n = premises.iter().map(|&j| ns[j]).max().unwrap_or(0);
                if let Some(c) = &used.cut {
                    if let Some(k) = omega_plus_nat(&rank(c)) {
                        n = n.max(k as u32 + 1);
                    }
                }
                (m, n)
            }
        };
        ms.push(m);
        ns.push(n);
    }
    let p_len = seqs.iter().flatten().map(length).max().unwrap_or(0) + 1;
    let last = seqs
        .len()
        .checked_sub(1)
        .ok_or_else(|| RsError::Proof("empty proof".into()))?;
    let emb = Arc::new(Emb {
        seqs,
        infos,
        m: ms,
        n: ns,
        p: p_len,
        base: base.clone(),
    });
    let mut root = Inst::default();
    for u in seq_free_vars(&emb.seqs[last]) {
        root.sets
            .insert(u.clone(), (SetTerm::Var(u), OrdTerm::one()));
    }
    let cert = emb.cert(last, &root)?;
    Ok(Embedding {
        cert,
        m: emb.m[last],
        n: emb.n[last],
        p_len,
    })
}

impl Emb {
    fn conclusion(&self, i: usize, inst: &Inst) -> (Sequent, Inst) {
        let ri = inst.restrict(&seq_free_vars(&self.seqs[i]));
        let s = ri.subst();
        let mut out: Sequent = ri
            .sets
            .values()
            .map(|(t, l)| NotM(l.clone(), t.clone()))
            .collect();
        out.extend(self.seqs[i].iter().map(|f| canon(&s.apply(f))));
        (out, ri)
    }

    /// Step j under `inst`; variables it leaves open are sent to ∅ at level 1.
    fn ih(self: &Arc<Self>, j: usize, inst: &Inst) -> Result<Cert, RsError> {
        let mut inst = inst.clone();
        let mut fresh = false;
        for v in seq_free_vars(&self.seqs[j]) {
            if !inst.sets.contains_key(&v) {
                inst.sets.insert(v, (SetTerm::Empty, OrdTerm::one()));
                fresh = true;
            }
        }
        let c = self.cert(j, &inst)?;
        Ok(if fresh {
            discharge(&c, &SetTerm::Empty)
        } else {
            c
        })
    }

    fn lazy(self: &Arc<Self>, steps: Vec<(usize, Inst)>) -> PremFn {
        let me = self.clone();
        Arc::new(move |q| match q {
            Param::Index(i) if *i < steps.len() => me.ih(steps[*i].0, &steps[*i].1),
            _ => Err(bad_param(q, "index out of range")),
        })
    }

    fn cert(self: &Arc<Self>, i: usize, at: &Inst) -> Result<Cert, RsError> {
        let (concl, ri) = self.conclusion(i, at);
        let label = label_of(self.m[i]);
        let rho = rho_of(self.n[i]);
        let op = self.base.with(ri.sets.values().map(|(_, l)| l));
        let p = Some(self.p);
        let s = ri.subst();
        let (premises, used) = match &self.infos[i] {
            StepInfo::Axiom { id, witness, .. } => {
                return self.axiom_cert(id, witness, &ri, i, concl, label, rho, op)
            }
            StepInfo::Rule { premises, used } => (premises.clone(), used.clone()),
        };
        let pr = used.principal.as_ref().map(|f| canon(&s.apply(f)));
        let pr_or = |what: &str| {
            pr.clone()
                .ok_or_else(|| RsError::Proof(format!("{what} without a principal formula")))
        };
        let mk_here = |rule: RsRule, prem: PremFn| {
            mk(
                concl.clone(),
                label.clone(),
                rho.clone(),
                p,
                op.clone(),
                rule,
                prem,
            )
        };
        let one = |ri: &Inst| self.lazy(vec![(premises[0], ri.clone())]);
        Ok(match used.rule {
            RuleId::Or => mk_here(
                RsRule::Or {
                    principal: pr_or("or")?,
                },
                one(&ri),
            ),
            RuleId::And => mk_here(
                RsRule::And {
                    principal: pr_or("and")?,
                },
                self.lazy(vec![(premises[0], ri.clone()), (premises[1], ri.clone())]),
            ),
            RuleId::Bex => {
                let t = used
                    .term
                    .clone()
                    .ok_or_else(|| RsError::Proof("bex without a witness".into()))?;
                mk_here(
                    RsRule::Bex {
                        principal: pr_or("bex")?,
                        term: ri.term(&t),
                    },
                    one(&ri),
                )
            }
            RuleId::Ex2 => {
                let r = used
                    .rel
                    .clone()
                    .ok_or_else(|| RsError::Proof("ex2 without a witness".into()))?;
                let r2 = ri.rels.get(&r).cloned().unwrap_or(r);
                mk_here(
                    RsRule::Ex2 {
                        principal: pr_or("ex2")?,
                        rel: r2,
                    },
                    one(&ri),
                )
            }
            RuleId::Cut => {
                let c = used
                    .cut
                    .clone()
                    .ok_or_else(|| RsError::Proof("cut without a formula".into()))?;
                let mut full = ri.clone();
                for v in free_vars(&c) {
                    full.sets
                        .entry(v)
                        .or_insert((SetTerm::Empty, OrdTerm::one()));
                }
                let c2 = canon(&full.subst().apply(&c));
                mk_here(
                    RsRule::Cut { formula: c2 },
                    self.lazy(vec![(premises[0], ri.clone()), (premises[1], ri.clone())]),
                )
            }
            RuleId::All2 => {
                let u = used
                    .eigen
                    .clone()
                    .ok_or_else(|| RsError::Proof("all2 without an eigenvariable".into()))?;
                let (me, j, ri2) = (self.clone(), premises[0], ri.clone());
                mk_here(
                    RsRule::All2 {
                        principal: pr_or("all2")?,
                    },
                    family(move |q| {
                        let Param::Rel(u2) = q else {
                            return Err(bad_param(q, "expected a relation variable"));
                        };
                        let mut inst2 = ri2.clone();
                        inst2.rels.insert(u.clone(), u2.clone());
                        me.ih(j, &inst2)
                    }),
                )
            }
            RuleId::Ex => {
                let t = used
                    .term
                    .clone()
                    .ok_or_else(|| RsError::Proof("ex without a witness".into()))?;
                let pr = pr_or("ex")?;
                let known = matches!(&t, SetTerm::Var(x) if ri.sets.contains_key(x));
                let (t2, lvl) = (ri.term(&t), ri.level(&t));
                let (me, j, ri2) = (self.clone(), premises[0], ri.clone());
                let (pr2, concl2, rho2, op2) = (pr.clone(), concl.clone(), rho.clone(), op.clone());
                let (t3, l3) = (t2.clone(), lvl.clone());
                let prem = family(move |q| {
                    if *q != Param::Index(0) {
                        return Err(bad_param(q, "index out of range"));
                    }
                    let c0 = me.ih(j, &ri2)?;
                    let mt = M(l3.clone(), t3.clone());
                    let conj = canon(&and(mt.clone(), inst(&pr2, &t3)));
                    let left = if known {
                        mk(
                            seq([NotM(l3.clone(), t3.clone()), mt]),
                            zero(),
                            zero(),
                            p,
                            op2.clone(),
                            RsRule::Axiom(RsAxiom::Tnd),
                            no_premises(),
                        )
                    } else {
                        mk(
                            seq([mt]),
                            zero(),
                            zero(),
                            p,
                            op2.clone(),
                            RsRule::Axiom(const_axiom(&t3)),
                            no_premises(),
                        )
                    };
                    let mut cc = concl2.clone();
                    cc.insert(conj.clone());
                    Ok(mk(
                        cc,
                        c0.alpha.succ(),
                        rho2.clone(),
                        p,
                        op2.clone(),
                        RsRule::And { principal: conj },
                        list(vec![left, c0]),
                    ))
                });
                mk_here(
                    RsRule::Ex {
                        principal: pr,
                        level: lvl,
                        term: t2,
                    },
                    prem,
                )
            }
            RuleId::All => {
                let v = used
                    .eigen
                    .clone()
                    .ok_or_else(|| RsError::Proof("all without an eigenvariable".into()))?;
                let pr = pr_or("all")?;
                let (me, j, ri2, pr2, concl2, rho2, op2) = (
                    self.clone(),
                    premises[0],
                    ri.clone(),
                    pr.clone(),
                    concl.clone(),
                    rho.clone(),
                    op.clone(),
                );
                let prem = family(move |q| {
                    let Param::Pair(b, a) = q else {
                        return Err(bad_param(q, "expected a pair"));
                    };
                    let mut inst2 = ri2.clone();
                    inst2.sets.insert(v.clone(), (a.clone(), b.clone()));
                    let c = me.ih(j, &inst2)?;
                    let minor = canon(&or(NotM(b.clone(), a.clone()), inst(&pr2, a)));
                    let mut cc = concl2.clone();
                    cc.insert(minor.clone());
                    Ok(mk(
                        cc,
                        c.alpha.succ(),
                        rho2.clone(),
                        p,
                        op2.with([b]),
                        RsRule::Or { principal: minor },
                        list(vec![c]),
                    ))
                });
                mk_here(RsRule::All { principal: pr }, prem)
            }
            RuleId::Ball => {
                let v = used
                    .eigen
                    .clone()
                    .ok_or_else(|| RsError::Proof("ball without an eigenvariable".into()))?;
                let pr = pr_or("ball")?;
                let orig = match &used.principal {
                    Some(BAll(_, c, _)) => c.clone(),
                    _ => return Err(RsError::Proof("ball with a malformed principal".into())),
                };
                let (c2, gam, constant) = if orig.is_const() {
                    let g = if orig == SetTerm::Omega {
                        OrdTerm::omega()
                    } else {
                        zero()
                    };
                    (orig.clone(), g, true)
                } else {
                    (ri.term(&orig), ri.level(&orig), false)
                };
                let (me, j, ri2, pr2, concl2, rho2, op2) = (
                    self.clone(),
                    premises[0],
                    ri.clone(),
                    pr.clone(),
                    concl.clone(),
                    rho.clone(),
                    op.clone(),
                );
                let prem = family(move |q| {
                    let Param::Term(b) = q else {
                        return Err(bad_param(q, "expected a term"));
                    };
                    let leafp = |s: Sequent, ax: RsAxiom| {
                        mk(
                            s,
                            zero(),
                            zero(),
                            p,
                            op2.clone(),
                            RsRule::Axiom(ax),
                            no_premises(),
                        )
                    };
                    let nin = NotIn(b.clone(), c2.clone());
                    let mgb = M(gam.clone(), b.clone());
                    let x = if constant {
                        let l = const_level(&c2);
                        mk(
                            seq([nin.clone(), mgb.clone()]),
                            OrdTerm::one(),
                            rho2.clone(),
                            p,
                            op2.clone(),
                            RsRule::Cut {
                                formula: M(l.clone(), c2.clone()),
                            },
                            list(vec![
                                leafp(seq([M(l.clone(), c2.clone())]), const_axiom(&c2)),
                                leafp(
                                    seq([NotM(l, c2.clone()), nin.clone(), mgb.clone()]),
                                    RsAxiom::MPred,
                                ),
                            ]),
                        )
                    } else {
                        let up = M(gam.succ(), c2.clone());
                        mk(
                            seq([NotM(gam.clone(), c2.clone()), nin.clone(), mgb.clone()]),
                            OrdTerm::one(),
                            rho2.clone(),
                            p,
                            op2.clone(),
                            RsRule::Cut {
                                formula: up.clone(),
                            },
                            list(vec![
                                leafp(seq([NotM(gam.clone(), c2.clone()), up]), RsAxiom::MMono),
                                leafp(
                                    seq([NotM(gam.succ(), c2.clone()), nin.clone(), mgb.clone()]),
                                    RsAxiom::MPred,
                                ),
                            ]),
                        )
                    };
                    let mut inst2 = ri2.clone();
                    inst2.sets.insert(v.clone(), (b.clone(), gam.clone()));
                    let ci = me.ih(j, &inst2)?;
                    let fb = inst(&pr2, b);
                    let minor = canon(&or(nin.clone(), fb.clone()));
                    let mut yc = concl2.clone();
                    yc.insert(minor.clone());
                    let zc = yc.clone();
                    yc.insert(nin.clone());
                    let ylab = omax(&ci.alpha, &OrdTerm::one()).succ();
                    let y = mk(
                        yc,
                        ylab.clone(),
                        rho2.clone(),
                        p,
                        op2.clone(),
                        RsRule::Cut { formula: mgb },
                        list(vec![x, ci]),
                    );
                    let w_leaf = leafp(
                        seq([In(b.clone(), c2.clone()), nin.clone(), fb]),
                        RsAxiom::Tnd,
                    );
                    let w = mk(
                        seq([In(b.clone(), c2.clone()), minor.clone()]),
                        OrdTerm::one(),
                        rho2.clone(),
                        p,
                        op2.clone(),
                        RsRule::Or { principal: minor },
                        list(vec![w_leaf]),
                    );
                    Ok(mk(
                        zc,
                        ylab.succ(),
                        rho2.clone(),
                        p,
                        op2.clone(),
                        RsRule::Cut { formula: nin },
                        list(vec![y, w]),
                    ))
                });
                mk_here(RsRule::Ball { principal: pr }, prem)
            }
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn axiom_cert(
        &self,
        id: &str,
        w: &taitkp::Witness,
        ri: &Inst,
        i: usize,
        concl: Sequent,
        label: OrdTerm,
        rho: OrdTerm,
        op: DOp,
    ) -> Result<Cert, RsError> {
        let p = Some(self.p);
        let perr = |e: taitkp::TaitError| RsError::Proof(e.to_string());
        let s = ri.subst();
        let leaf_ax = |ax: RsAxiom| {
            Ok(mk(
                concl.clone(),
                label.clone(),
                rho.clone(),
                p,
                op.clone(),
                RsRule::Axiom(ax),
                no_premises(),
            ))
        };
        let mut avoid = ri.names();
        avoid.extend(seq_free_vars(&self.seqs[i]));
        let dis = |c: Cert, ts: &[&SetTerm]| {
            let mut done = BTreeSet::new();
            ts.iter().filter(|t| t.is_const()).fold(c, |c, t| {
                if done.insert((*t).clone()) {
                    discharge(&c, t)
                } else {
                    c
                }
            })
        };
        let built = match id {
            "TnD" => return leaf_ax(RsAxiom::Tnd),
            "Equality" => return leaf_ax(RsAxiom::Equality),
            "SubOmega" => return leaf_ax(RsAxiom::SubOmega),
            "Infinity" => return leaf_ax(RsAxiom::Infinity),
            "Pi11CAstar" => return leaf_ax(RsAxiom::Ca),
            "EmptySet" => empty_ball(&op),
            "Pair" => {
                let a = taitkp::w_term(w, "a").map_err(perr)?;
                let b = taitkp::w_term(w, "b").map_err(perr)?;
                let c = derive_pair(
                    &ri.term(&a),
                    &ri.level(&a),
                    &ri.term(&b),
                    &ri.level(&b),
                    &op,
                );
                dis(with_p(&c, p), &[&a, &b])
            }
            "Union" => {
                let a = taitkp::w_term(w, "a").map_err(perr)?;
                dis(
                    with_p(&derive_union(&ri.term(&a), &ri.level(&a), &op), p),
                    &[&a],
                )
            }
            "Delta0Sep" => {
                let a = taitkp::w_term(w, "a").map_err(perr)?;
                let d = taitkp::w_delta0(w, "D").map_err(perr)?;
                let x = taitkp::w_var(w, "x").map_err(perr)?;
                avoid.extend(free_vars(&d));
                let x2 = fresh_name("x", &avoid);
                let d2 = s.apply(&formulas::substitute(&d, &x, &SetTerm::var(&x2)));
                let extra: Vec<(SetTerm, OrdTerm)> = free_vars(&d)
                    .iter()
                    .filter(|v| **v != x)
                    .filter_map(|v| ri.sets.get(v).cloned())
                    .collect();
                let c = derive_sep(&ri.term(&a), &ri.level(&a), &x2, &d2, &extra, &op)?;
                dis(with_p(&c, p), &[&a])
            }
            "Delta0Col" => {
                let a = taitkp::w_term(w, "a").map_err(perr)?;
                let d = taitkp::w_delta0(w, "D").map_err(perr)?;
                let x = taitkp::w_var(w, "x").map_err(perr)?;
                let y = taitkp::w_var(w, "y").map_err(perr)?;
                let f = s.apply(&formulas::ball(&x, a, ex(&y, d)));
                with_p(&derive_s0_ref(&f, &[], &op)?, p)
            }
            "EpsInd" => {
                let f = taitkp::w_formula(w, "A").map_err(perr)?;
                let var = taitkp::w_var(w, "var").map_err(perr)?;
                avoid.extend(free_vars(&f));
                let v2 = fresh_name("u", &avoid);
                let f2 = s.apply(&formulas::substitute(&f, &var, &SetTerm::var(&v2)));
                with_p(&derive_eps_ind(&v2, &f2, &op), p)
            }
            other => return Err(RsError::Proof(format!("no embedding for axiom {other}"))),
        };
        if let Some(f) = built.conclusion.iter().find(|f| !concl.contains(f)) {
            return Err(RsError::Hypothesis(format!(
                "axiom {id} derivation concludes {f} outside the step"
            )));
        }
        if built.alpha > label || built.rho > rho {
            return Err(RsError::Hypothesis(format!(
                "axiom {id} derivation exceeds ({label}, {rho})"
            )));
        }
        Ok(with_p(
            &relabel(&built, concl, label, rho, built.op.join(&op)),
            p,
        ))
    }
}

// ---------------------------------------------------------------------------
// inversion

/// Which inversion to apply to a target formula.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inversion {
    /// F ∨ G ↦ F, G
    Or,
    /// F_0 ∧ F_1 ↦ F_i
    And(usize),
    /// ∀x F ↦ ¬M_β(a) ∨ F[a]
    All(OrdTerm, SetTerm),
    /// ∀x F ↦ ∀x^β F
    AllRanked(OrdTerm),
    /// (∀x∈a)F ↦ b∉a ∨ F[b]
    Ball(SetTerm),
    /// ∀X F ↦ F[U]
    All2(String),
    /// ∀x^α F ↦ ¬M_β(a) ∨ F[a] for β ≤ α
    RAll(OrdTerm, SetTerm),
}

fn inversion_result(f: &Formula, mode: &Inversion) -> Result<Vec<Formula>, RsError> {
    let bad = || RsError::Precondition(format!("{mode:?} does not apply to {f}"));
    Ok(match (mode, f) {
        (Inversion::Or, Or(g, h)) => vec![(**g).clone(), (**h).clone()],
        (Inversion::And(i), And(g, h)) if *i < 2 => vec![if *i == 0 {
            (**g).clone()
        } else {
            (**h).clone()
        }],
        (Inversion::All(b, a), All(..)) => vec![canon(&or(NotM(b.clone(), a.clone()), inst(f, a)))],
        (Inversion::AllRanked(b), All(x, g)) => vec![canon(&RAll(b.clone(), x.clone(), g.clone()))],
        (Inversion::Ball(b), BAll(_, c, _)) => {
            vec![canon(&or(NotIn(b.clone(), c.clone()), inst(f, b)))]
        }
        (Inversion::All2(u), RelAll(..)) => vec![inst_rel(f, u)],
        (Inversion::RAll(b, a), RAll(al, ..)) if b <= al => {
            vec![canon(&or(NotM(b.clone(), a.clone()), inst(f, a)))]
        }
        _ => return Err(bad()),
    })
}

fn inversion_param(mode: &Inversion) -> Option<Param> {
    match mode {
        Inversion::Or => Some(Param::Index(0)),
        Inversion::And(i) => Some(Param::Index(*i)),
        Inversion::All(b, a) | Inversion::RAll(b, a) => Some(Param::Pair(b.clone(), a.clone())),
        Inversion::Ball(b) => Some(Param::Term(b.clone())),
        Inversion::All2(u) => Some(Param::Rel(u.clone())),
        Inversion::AllRanked(_) => None,
    }
}

fn rule_fits(rule: &RsRule, mode: &Inversion) -> bool {
    matches!(
        (rule, mode),
        (RsRule::Or { .. }, Inversion::Or)
            | (RsRule::And { .. }, Inversion::And(_))
            | (
                RsRule::All { .. },
                Inversion::All(..) | Inversion::AllRanked(_)
            )
            | (RsRule::Ball { .. }, Inversion::Ball(_))
            | (RsRule::All2 { .. }, Inversion::All2(_))
            | (RsRule::RAll { .. }, Inversion::RAll(..))
    )
}

/// Inverts `f` in the conclusion of `c`, keeping label and cut rank.
pub fn invert(c: &Cert, f: &Formula, mode: &Inversion) -> Result<Cert, RsError> {
    let f = canon(f);
    if !c.conclusion.contains(&f) {
        return Err(RsError::Precondition(format!(
            "{f} is not in the conclusion"
        )));
    }
    let om = big_omega();
    let needs_rank = matches!(
        mode,
        Inversion::Or | Inversion::And(_) | Inversion::Ball(_) | Inversion::All2(_)
    );
    if needs_rank {
        let r = match (&f, mode) {
            (BAll(..), Inversion::Ball(b)) => rank(&inst(&f, b)),
            (RelAll(..), Inversion::All2(u)) => rank(&inst_rel(&f, u)),
            _ => rank(&f),
        };
        if r < om {
            return Err(RsError::Precondition(format!("rank {r} of {f} is below Ω")));
        }
    }
    if let Inversion::All(b, _) | Inversion::AllRanked(b) = mode {
        if !lt(b, &om) || !h_mem(b, &c.op) {
            return Err(RsError::Precondition(format!(
                "level {b} is not in {} below Ω",
                c.op
            )));
        }
    }
    let repl = inversion_result(&f, mode)?;
    inv_go(c, &f, mode, &repl)
}

fn inv_go(c: &Cert, f: &Formula, mode: &Inversion, repl: &[Formula]) -> Result<Cert, RsError> {
    if !c.conclusion.contains(f) {
        return Ok(c.clone());
    }
    let mut concl = without(&c.conclusion, f);
    concl.extend(repl.iter().cloned());
    let op = c.op.with(&seq_params_of(repl));
    let principal = c.rule.principal() == Some(f);
    if principal && rule_fits(&c.rule, mode) {
        if let Inversion::AllRanked(_) = mode {
            let (c2, f2, m2, r2) = (c.clone(), f.clone(), mode.clone(), repl.to_vec());
            return Ok(mk(
                concl,
                c.alpha.clone(),
                c.rho.clone(),
                c.p,
                op,
                RsRule::RAll {
                    principal: repl[0].clone(),
                },
                family(move |q| inv_go(&c2.premise(q)?, &f2, &m2, &r2)),
            ));
        }
        let q = inversion_param(mode).expect("premise selector");
        let t = inv_go(&c.premise(&q)?, f, mode, repl)?;
        let op = t.op.join(&c.op);
        return Ok(relabel(
            &t,
            t.conclusion.clone(),
            c.alpha.clone(),
            c.rho.clone(),
            op,
        ));
    }
    if principal && !matches!(c.rule, RsRule::Axiom(_)) {
        return Err(RsError::Hypothesis(format!(
            "{f} is principal in a {} inference",
            c.rule.tag()
        )));
    }
    if let RsRule::Axiom(ax) = &c.rule {
        return Ok(mk(
            concl,
            c.alpha.clone(),
            c.rho.clone(),
            c.p,
            op,
            RsRule::Axiom(*ax),
            no_premises(),
        ));
    }
    let (f2, m2, r2) = (f.clone(), mode.clone(), repl.to_vec());
    Ok(mk(
        concl,
        c.alpha.clone(),
        c.rho.clone(),
        c.p,
        op,
        c.rule.clone(),
        mapped(c, move |d| inv_go(&d, &f2, &m2, &r2)),
    ))
}

// ---------------------------------------------------------------------------
// boundedness

/// Replaces the S-formula `f` by F^β, for a derivation with label ≤ β < Ω.
pub fn boundedness(c: &Cert, f: &Formula, beta: &OrdTerm) -> Result<Cert, RsError> {
    let f = canon(f);
    if !c.conclusion.contains(&f) {
        return Err(RsError::Precondition(format!(
            "{f} is not in the conclusion"
        )));
    }
    if !classes(&f).is_s {
        return Err(RsError::Precondition(format!("{f} is not an S formula")));
    }
    if c.alpha > *beta || !lt(beta, &big_omega()) {
        return Err(RsError::Precondition(format!(
            "need {} ≤ {beta} < Ω",
            c.alpha
        )));
    }
    if !h_mem(beta, &c.op) {
        return Err(RsError::Precondition(format!("{beta} is not in {}", c.op)));
    }
    Ok(bnd_go(c, &seq([f]), beta))
}

fn bnd_go(c: &Cert, targets: &Sequent, beta: &OrdTerm) -> Cert {
    let t: Sequent = targets
        .iter()
        .filter(|f| c.conclusion.contains(*f) && formulas::bound_exists(f, beta) != **f)
        .cloned()
        .collect();
    if t.is_empty() {
        return c.clone();
    }
    let bound = |f: &Formula| canon(&formulas::bound_exists(f, beta));
    let concl: Sequent = c
        .conclusion
        .iter()
        .map(|f| if t.contains(f) { bound(f) } else { f.clone() })
        .collect();
    let op = c.op.with([beta]);
    if let RsRule::Axiom(ax) = &c.rule {
        return mk(
            concl,
            c.alpha.clone(),
            c.rho.clone(),
            c.p,
            op,
            RsRule::Axiom(*ax),
            no_premises(),
        );
    }
    let principal = c.rule.principal().filter(|f| t.contains(*f)).cloned();
    let rule = match (&c.rule, &principal) {
        (_, None) => c.rule.clone(),
        (RsRule::Ex { level, term, .. }, Some(pf)) => RsRule::REx {
            principal: bound(pf),
            level: level.clone(),
            term: term.clone(),
        },
        (r, Some(pf)) => retarget(r, bound(pf)),
    };
    let (c2, t2, b2) = (c.clone(), t.clone(), beta.clone());
    let has_principal = principal.is_some();
    mk(
        concl,
        c.alpha.clone(),
        c.rho.clone(),
        c.p,
        op,
        rule,
        family(move |q| {
            let d = c2.premise(q)?;
            let mut tq = t2.clone();
            if has_principal {
                tq.extend(c2.rule.minors(q)?);
            }
            Ok(bnd_go(&d, &tq, &b2))
        }),
    )
}

/// The same inference with a different principal formula.
fn retarget(r: &RsRule, principal: Formula) -> RsRule {
    match r {
        RsRule::Or { .. } => RsRule::Or { principal },
        RsRule::And { .. } => RsRule::And { principal },
        RsRule::NotM { .. } => RsRule::NotM { principal },
        RsRule::Ex { level, term, .. } => RsRule::Ex {
            principal,
            level: level.clone(),
            term: term.clone(),
        },
        RsRule::All { .. } => RsRule::All { principal },
        RsRule::REx { level, term, .. } => RsRule::REx {
            principal,
            level: level.clone(),
            term: term.clone(),
        },
        RsRule::RAll { .. } => RsRule::RAll { principal },
        RsRule::Bex { term, .. } => RsRule::Bex {
            principal,
            term: term.clone(),
        },
        RsRule::Ball { .. } => RsRule::Ball { principal },
        RsRule::Ex2 { rel, .. } => RsRule::Ex2 {
            principal,
            rel: rel.clone(),
        },
        RsRule::All2 { .. } => RsRule::All2 { principal },
        other => other.clone(),
    }
}

// ---------------------------------------------------------------------------
// cut elimination

/// ω_n(α).
pub fn bound_cut_elim(alpha: &OrdTerm, n: usize) -> OrdTerm {
    omega_tower(n, alpha)
}

fn is_exists_type(f: &Formula) -> bool {
    matches!(f, Or(..) | BEx(..) | REx(..) | Ex(..) | RelEx(..))
}

/// Lowers the cut rank from Ω+n+1 to Ω+1; the label α becomes ω_n(α).
pub fn cut_elim(c: &Cert) -> Result<Cert, RsError> {
    let om1 = big_omega().succ();
    if c.rho <= om1 {
        return Ok(relabel(
            c,
            c.conclusion.clone(),
            c.alpha.clone(),
            om1,
            c.op.clone(),
        ));
    }
    let k = omega_plus_nat(&c.rho)
        .ok_or_else(|| RsError::Precondition(format!("cut rank {} is not Ω+n+1", c.rho)))?;
    let mut d = c.clone();
    for j in (1..k).rev() {
        d = elim(&d, &rho_of(j as u32))?;
    }
    Ok(d)
}

/// One round: cuts of rank exactly `r` are removed, labels α ↦ ω^α.
fn elim(d: &Cert, r: &OrdTerm) -> Result<Cert, RsError> {
    let lab = omega_pow(&d.alpha);
    if let RsRule::Cut { formula } = &d.rule {
        if rank(formula) >= *r {
            let p0 = elim(&d.premise(&Param::Index(0))?, r)?;
            let p1 = elim(&d.premise(&Param::Index(1))?, r)?;
            let (f, pos, neg) = if is_exists_type(formula) {
                (formula.clone(), p0, p1)
            } else {
                (canon(&negate(formula)), p1, p0)
            };
            let red = reduce(&neg, &pos, &f, r)?;
            let op = red.op.join(&d.op);
            return Ok(relabel(&red, d.conclusion.clone(), lab, r.clone(), op));
        }
    }
    let r2 = r.clone();
    Ok(mk(
        d.conclusion.clone(),
        lab,
        r.clone(),
        d.p,
        d.op.clone(),
        d.rule.clone(),
        mapped(d, move |x| elim(&x, &r2)),
    ))
}

fn reduce_label(d1: &Cert, d2: &Cert) -> OrdTerm {
    nsum(&d1.alpha, &nsum(&d2.alpha, &d2.alpha))
}

/// From d1 ⊢ Γ,¬F and d2 ⊢ Θ,F (F of ∃/∨ type, rk F = r) derives Γ,Θ.
fn reduce(d1: &Cert, d2: &Cert, f: &Formula, r: &OrdTerm) -> Result<Cert, RsError> {
    if !d2.conclusion.contains(f) {
        return Ok(d2.clone());
    }
    let nf = canon(&negate(f));
    let gamma = without(&d1.conclusion, &nf);
    let concl = union(&gamma, &without(&d2.conclusion, f));
    let lab = reduce_label(d1, d2);
    let op = d1.op.join(&d2.op).with([&lab]);
    let p = d2.p;
    if let RsRule::Axiom(ax) = &d2.rule {
        return Ok(mk(
            concl,
            lab,
            r.clone(),
            p,
            op,
            RsRule::Axiom(*ax),
            no_premises(),
        ));
    }
    if d2.rule.principal() != Some(f) {
        let (a, f2, r2) = (d1.clone(), f.clone(), r.clone());
        return Ok(mk(
            concl,
            lab,
            r.clone(),
            p,
            op,
            d2.rule.clone(),
            mapped(d2, move |x| reduce(&a, &x, &f2, &r2)),
        ));
    }
    let q0 = Param::Index(0);
    let prem = d2.premise(&q0)?;
    let minors = d2.rule.minors(&q0)?;
    let xlab = reduce_label(d1, &prem);
    let (a, f2, r2, pr2) = (d1.clone(), f.clone(), r.clone(), prem.clone());
    let x_thunk = move || reduce(&a, &pr2, &f2, &r2);
    let inv = |mode: Inversion| -> Result<Cert, RsError> {
        let repl = inversion_result(&nf, &mode)?;
        inv_go(d1, &nf, &mode, &repl)
    };
    let cut = |concl: Sequent, lab: OrdTerm, formula: Formula, first: PremFn, second: Cert| {
        let second = second.clone();
        mk(
            concl,
            lab,
            r.clone(),
            p,
            op.clone(),
            RsRule::Cut { formula },
            family(move |q| match q {
                Param::Index(0) => first(&Param::Index(0)),
                Param::Index(1) => Ok(second.clone()),
                _ => Err(bad_param(q, "index out of range")),
            }),
        )
    };
    let x_fn: PremFn = Arc::new(move |_| x_thunk());
    match &d2.rule {
        RsRule::Or { .. } => {
            let (g1, g2) = (minors[0].clone(), minors[1].clone());
            let i1 = inv(Inversion::And(0))?;
            let i2 = inv(Inversion::And(1))?;
            let mut yc = concl.clone();
            yc.insert(g2.clone());
            let ylab = omax(&xlab, &d1.alpha).succ();
            let y = cut(yc, ylab, g1, x_fn, i1);
            let yf = list(vec![y]);
            Ok(cut(concl, lab, g2, yf, i2))
        }
        RsRule::Bex { term, .. } => Ok(cut(
            concl,
            lab,
            minors[0].clone(),
            x_fn,
            inv(Inversion::Ball(term.clone()))?,
        )),
        RsRule::REx { level, term, .. } => Ok(cut(
            concl,
            lab,
            minors[0].clone(),
            x_fn,
            inv(Inversion::RAll(level.clone(), term.clone()))?,
        )),
        RsRule::Ex { level, term, .. } => Ok(cut(
            concl,
            lab,
            minors[0].clone(),
            x_fn,
            inv(Inversion::All(level.clone(), term.clone()))?,
        )),
        RsRule::Ex2 { rel, .. } => Ok(cut(
            concl,
            lab,
            minors[0].clone(),
            x_fn,
            inv(Inversion::All2(rel.clone()))?,
        )),
        other => Err(RsError::Hypothesis(format!(
            "cut formula {f} is principal in a {} inference",
            other.tag()
        ))),
    }
}

// ---------------------------------------------------------------------------
// collapsing

/// σ + ω^{Ω+α}.
pub fn hat(sigma: &OrdTerm, alpha: &OrdTerm) -> OrdTerm {
    nf_sum(sigma, &omega_pow(&nf_sum(&big_omega(), alpha)))
}

/// Whether t lies in C(a, b): generated from ordinals below b, 0 and Ω by
/// +, ω^· and ψ restricted to arguments below a.
fn in_c_below(t: &OrdTerm, a: &OrdTerm, b: &OrdTerm) -> bool {
    if t < b {
        return true;
    }
    t.principals().iter().all(|p| {
        let pt = OrdTerm::from_principal(p.clone());
        pt < *b
            || match p {
                Principal::BigOmega => true,
                Principal::WPow(e) => in_c_below(e, a, b),
                Principal::Psi(c) => c < a && in_c_below(c, a, b),
            }
    })
}

/// From H_σ ⊢ Γ with cut rank ≤ Ω+1 and Γ ⊆ S ∪ B, derives Γ with label
/// and cut rank ψ(σ + ω^{Ω+α}).
pub fn collapse(c: &Cert, sigma: &OrdTerm) -> Result<Cert, RsError> {
    if let Some(f) = c.conclusion.iter().find(|f| !in_sb(f)) {
        return Err(RsError::Precondition(format!(
            "{f} is neither in S nor in B"
        )));
    }
    let bound = psi(&sigma.succ())?;
    let ps = seq_params_of(&c.conclusion);
    if let Some(t) = ps.iter().find(|t| !in_c_below(t, &sigma.succ(), &bound)) {
        return Err(RsError::Precondition(format!(
            "parameter {t} is not in C(σ+1, ψ(σ+1))"
        )));
    }
    let target = DOp::Sigma(sigma.clone(), ps.clone());
    if !h_mem(sigma, &target) {
        return Err(RsError::Precondition(format!("{sigma} is not in {target}")));
    }
    if c.rho > big_omega().succ() {
        return Err(RsError::Precondition(format!(
            "cut rank {} exceeds Ω+1",
            c.rho
        )));
    }
    if !c.op.equiv(&target) {
        return Err(RsError::Precondition(format!(
            "operator {} differs from {target}",
            c.op
        )));
    }
    col_go(&relabel(
        c,
        c.conclusion.clone(),
        c.alpha.clone(),
        c.rho.clone(),
        target,
    ))
}

fn sigma_of(d: &Certificate) -> Result<(OrdTerm, BTreeSet<OrdTerm>), RsError> {
    match &d.op {
        DOp::Sigma(s, m) => Ok((s.clone(), m.clone())),
        DOp::Free(_) => Err(RsError::Hypothesis("operator carries no σ".into())),
    }
}

/// Replaces every σ below by max(σ, s).
pub fn raise_sigma(d: &Cert, s: &OrdTerm) -> Cert {
    let s2 = s.clone();
    mk(
        d.conclusion.clone(),
        d.alpha.clone(),
        d.rho.clone(),
        d.p,
        d.op.raise(s),
        d.rule.clone(),
        mapped(d, move |x| Ok(raise_sigma(&x, &s2))),
    )
}

fn col_go(d: &Cert) -> Result<Cert, RsError> {
    if let Some(f) = d.conclusion.iter().find(|f| !in_sb(f)) {
        return Err(RsError::Hypothesis(format!("{f} is neither in S nor in B")));
    }
    let (s, m) = sigma_of(d)?;
    let a_hat = hat(&s, &d.alpha);
    let lab = psi(&a_hat)?;
    let op2 = DOp::Sigma(a_hat, m);
    let concl = d.conclusion.clone();
    let p = d.p;
    match &d.rule {
        RsRule::Axiom(ax) => Ok(mk(
            concl,
            lab.clone(),
            lab,
            p,
            op2,
            RsRule::Axiom(*ax),
            no_premises(),
        )),
        RsRule::All { principal } => {
            Err(RsError::Hypothesis(format!("(∀) inference on {principal}")))
        }
        RsRule::S0Ref { principal, formula } => {
            let p0 = d.premise(&Param::Index(0))?;
            let (s0, m0) = sigma_of(&p0)?;
            let a0 = hat(&s0, &p0.alpha);
            let beta = psi(&a0)?;
            let c = bc_principal(formula, &beta);
            let (p0c, f2, b2) = (p0.clone(), formula.clone(), beta.clone());
            let bc = mk(
                union(&concl, &seq([c.clone()])),
                beta.succ(),
                beta.clone(),
                p,
                DOp::Sigma(a0, m0),
                RsRule::Bc {
                    principal: c.clone(),
                    formula: formula.clone(),
                    level: beta.clone(),
                },
                family(move |q| {
                    if *q != Param::Index(0) {
                        return Err(bad_param(q, "index out of range"));
                    }
                    let c0 = col_go(&p0c)?;
                    Ok(bnd_go(&c0, &seq([f2.clone()]), &b2))
                }),
            );
            let z = fresh_name("z", &free_vars(formula));
            let zt = SetTerm::Var(z.clone());
            let lift = with_p(
                &derive_lifting(
                    &nf_sum(&beta, &OrdTerm::omega()),
                    &z,
                    &formulas::relativize(formula, &zt),
                    &op2,
                ),
                p,
            );
            debug_assert!(lift.conclusion.contains(principal));
            Ok(mk(
                concl,
                lab.clone(),
                lab,
                p,
                op2,
                RsRule::Cut { formula: c },
                list(vec![bc, lift]),
            ))
        }
        RsRule::Cut { formula } => {
            let r = rank(formula);
            let om = big_omega();
            if r < om {
                let d2 = d.clone();
                return Ok(mk(
                    concl,
                    lab.clone(),
                    lab,
                    p,
                    op2,
                    d.rule.clone(),
                    family(move |q| col_go(&d2.premise(q)?)),
                ));
            }
            if r != om {
                return Err(RsError::Hypothesis(format!("cut of rank {r} above Ω")));
            }
            let (ie, e) = if matches!(formula, Ex(..)) {
                (0, formula.clone())
            } else {
                (1, canon(&negate(formula)))
            };
            let Ex(x, g) = &e else {
                return Err(RsError::Hypothesis(format!("rank-Ω cut on {formula}")));
            };
            let pe = d.premise(&Param::Index(ie))?;
            let pa = d.premise(&Param::Index(1 - ie))?;
            let (se, _) = sigma_of(&pe)?;
            let a0 = hat(&se, &pe.alpha);
            let beta = psi(&a0)?;
            let eb = canon(&REx(beta.clone(), x.clone(), g.clone()));
            let a_f = canon(&negate(&e));
            let (pe2, e2, b2) = (pe.clone(), e.clone(), beta.clone());
            let (pa2, af2, a02) = (pa.clone(), a_f.clone(), a0.clone());
            Ok(mk(
                concl,
                lab.clone(),
                lab,
                p,
                op2,
                RsRule::Cut { formula: eb },
                family(move |q| match q {
                    Param::Index(0) => Ok(bnd_go(&col_go(&pe2)?, &seq([e2.clone()]), &b2)),
                    Param::Index(1) => {
                        let raised = raise_sigma(&pa2, &a02);
                        let mode = Inversion::AllRanked(b2.clone());
                        let inv = if raised.conclusion.contains(&af2) {
                            let repl = inversion_result(&af2, &mode)?;
                            inv_go(&raised, &af2, &mode, &repl)?
                        } else {
                            raised
                        };
                        col_go(&inv)
                    }
                    _ => Err(bad_param(q, "index out of range")),
                }),
            ))
        }
        _ => {
            let d2 = d.clone();
            Ok(mk(
                concl,
                lab.clone(),
                lab,
                p,
                op2,
                d.rule.clone(),
                family(move |q| col_go(&d2.premise(q)?)),
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// pipeline

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineResult {
    pub m: u32,
    pub n: u32,
    pub p_len: usize,
    pub embed_label: String,
    pub cut_elim_label: String,
    pub final_bound: String,
    pub final_rank: String,
    pub tower_index: usize,
    pub collapsed: bool,
    pub check: CertReport,
    #[serde(skip)]
    pub bound: OrdTerm,
}

/// ψ(σ + ω^{Ω+ω_{n'}(ω^{Ω+m})}) with n' = max(n−1, 0).
pub fn pipeline_bound(sigma: &OrdTerm, m: u32, n: u32) -> Result<OrdTerm, RsError> {
    let np = n.saturating_sub(1) as usize;
    Ok(psi(&hat(sigma, &bound_cut_elim(&label_of(m), np)))?)
}

/// Least k with b < ψ(ω_k(Ω+1)).
pub fn tower_index(b: &OrdTerm) -> Option<usize> {
    let om1 = big_omega().succ();
    (0..64).find(|&k| psi(&omega_tower(k, &om1)).is_ok_and(|t| *b < t))
}

/// Inverts outer ∀, ∀X and high-rank ∨ until the conclusion lies in S ∪ B.
fn prepare(c: &Cert) -> Result<(Cert, bool), RsError> {
    let mut c = c.clone();
    let om = big_omega();
    loop {
        let Some(f) = c.conclusion.iter().find(|f| !in_sb(f)).cloned() else {
            return Ok((c, true));
        };
        c = match &f {
            All(..) => {
                let mut avoid = seq_free_vars(&c.conclusion);
                avoid.extend(free_vars(&f));
                let a = SetTerm::var(&fresh_name("u", &avoid));
                let d = invert(&c, &f, &Inversion::All(OrdTerm::one(), a.clone()))?;
                let g = canon(&or(NotM(OrdTerm::one(), a.clone()), inst(&f, &a)));
                if rank(&g) >= om {
                    invert(&d, &g, &Inversion::Or)?
                } else {
                    d
                }
            }
            RelAll(..) => {
                let mut avoid = seq_free_rel_vars(&c.conclusion);
                avoid.extend(free_rel_vars(&f));
                invert(&c, &f, &Inversion::All2(fresh_name("U", &avoid)))?
            }
            Or(..) if rank(&f) >= om => invert(&c, &f, &Inversion::Or)?,
            _ => return Ok((c, false)),
        };
    }
}

/// Embedding, cut elimination and collapsing, with a sampled check of the
/// final derivation.
/// Intermediate certificates of the pipeline.
pub struct PipelineCerts {
    pub embedding: Embedding,
    pub cut_free: Cert,
    /// The collapsed certificate, or `cut_free` when collapsing does not apply.
    pub result: Cert,
    pub collapsed: bool,
    pub bound: OrdTerm,
}

pub fn pipeline_certs(p: &TaitProof, sigma: &OrdTerm) -> Result<PipelineCerts, RsError> {
    let emb = embed_with(p, &DOp::sigma(sigma.clone()))?;
    let ce = cut_elim(&emb.cert)?;
    let (prepared, ok) = prepare(&ce)?;
    let bound = pipeline_bound(sigma, emb.m, emb.n)?;
    let (result, collapsed) = if ok {
        (collapse(&prepared, sigma)?, true)
    } else {
        (ce.clone(), false)
    };
    if collapsed && result.alpha != bound {
        return Err(RsError::Hypothesis(format!(
            "collapsed label {} differs from {bound}",
            result.alpha
        )));
    }
    Ok(PipelineCerts {
        embedding: emb,
        cut_free: ce,
        result,
        collapsed,
        bound,
    })
}

pub fn pipeline(
    p: &TaitProof,
    sigma: &OrdTerm,
    cfg: CheckConfig,
) -> Result<PipelineResult, RsError> {
    let pc = pipeline_certs(p, sigma)?;
    let check = cert_check(&pc.result, cfg);
    let emb = &pc.embedding;
    Ok(PipelineResult {
        m: emb.m,
        n: emb.n,
        p_len: emb.p_len,
        embed_label: emb.cert.alpha.to_string(),
        cut_elim_label: pc.cut_free.alpha.to_string(),
        final_bound: pc.bound.to_string(),
        final_rank: pc.bound.to_string(),
        tower_index: tower_index(&pc.bound).unwrap_or(usize::MAX),
        collapsed: pc.collapsed,
        check,
        bound: pc.bound,
    })
}

#[cfg(test)]
mod tests;
