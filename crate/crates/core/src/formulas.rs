//! Formulas of the second-order set language and its ranked extension with
//! level predicates M_α and ranked quantifiers ∃x^α / ∀x^α.
//!
//! Formulas are kept in negation normal form. Two formulas are α-equivalent
//! iff their [`canon`] forms are structurally equal; sequents store canonical
//! forms only.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ordinals::{self, compare, natural_sum, nf_sum, omega_times, OrdError, OrdTerm};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("ordinal: {0}")]
    Ordinal(#[from] OrdError),
    #[error("level {0} is not below W")]
    LevelTooLarge(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SetTerm {
    Var(String),
    Empty,
    Omega,
}

impl SetTerm {
    pub fn var(name: &str) -> Self {
        SetTerm::Var(name.to_string())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            SetTerm::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_const(&self) -> bool {
        !matches!(self, SetTerm::Var(_))
    }
}

impl fmt::Display for SetTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetTerm::Var(v) => f.write_str(v),
            SetTerm::Empty => f.write_str("empty"),
            SetTerm::Omega => f.write_str("omega"),
        }
    }
}

type B = Box<Formula>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    In(SetTerm, SetTerm),
    NotIn(SetTerm, SetTerm),
    Rel(String, SetTerm),
    NotRel(String, SetTerm),
    M(OrdTerm, SetTerm),
    NotM(OrdTerm, SetTerm),
    Or(B, B),
    And(B, B),
    BEx(String, SetTerm, B),
    BAll(String, SetTerm, B),
    REx(OrdTerm, String, B),
    RAll(OrdTerm, String, B),
    Ex(String, B),
    All(String, B),
    RelEx(String, B),
    RelAll(String, B),
}

use Formula::*;

pub type Sequent = BTreeSet<Formula>;

/// Builds a sequent from formulas, storing canonical forms.
pub fn sequent<I: IntoIterator<Item = Formula>>(fs: I) -> Sequent {
    fs.into_iter().map(|f| canon(&f)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Classes {
    pub is_delta0: bool,
    pub is_d: bool,
    pub is_s: bool,
    pub is_s0: bool,
    pub is_b: bool,
    pub is_sigma_l2set: bool,
}

// ---------------------------------------------------------------------------
// constructors

pub fn or(a: Formula, b: Formula) -> Formula {
    Or(Box::new(a), Box::new(b))
}

pub fn and(a: Formula, b: Formula) -> Formula {
    And(Box::new(a), Box::new(b))
}

pub fn imp(a: Formula, b: Formula) -> Formula {
    or(negate(&a), b)
}

pub fn iff(a: Formula, b: Formula) -> Formula {
    and(imp(a.clone(), b.clone()), imp(b, a))
}

pub fn bex(x: &str, a: SetTerm, f: Formula) -> Formula {
    BEx(x.to_string(), a, Box::new(f))
}

pub fn ball(x: &str, a: SetTerm, f: Formula) -> Formula {
    BAll(x.to_string(), a, Box::new(f))
}

pub fn rex(alpha: OrdTerm, x: &str, f: Formula) -> Formula {
    REx(alpha, x.to_string(), Box::new(f))
}

pub fn rall(alpha: OrdTerm, x: &str, f: Formula) -> Formula {
    RAll(alpha, x.to_string(), Box::new(f))
}

pub fn ex(x: &str, f: Formula) -> Formula {
    Ex(x.to_string(), Box::new(f))
}

pub fn all(x: &str, f: Formula) -> Formula {
    All(x.to_string(), Box::new(f))
}

pub fn rel_ex(x: &str, f: Formula) -> Formula {
    RelEx(x.to_string(), Box::new(f))
}

pub fn rel_all(x: &str, f: Formula) -> Formula {
    RelAll(x.to_string(), Box::new(f))
}

pub fn mem(a: SetTerm, b: SetTerm) -> Formula {
    In(a, b)
}

pub fn nmem(a: SetTerm, b: SetTerm) -> Formula {
    NotIn(a, b)
}

fn v(name: &str) -> SetTerm {
    SetTerm::var(name)
}

// ---------------------------------------------------------------------------
// negation, variables, substitution

pub fn negate(f: &Formula) -> Formula {
    match f {
        In(a, b) => NotIn(a.clone(), b.clone()),
        NotIn(a, b) => In(a.clone(), b.clone()),
        Rel(u, a) => NotRel(u.clone(), a.clone()),
        NotRel(u, a) => Rel(u.clone(), a.clone()),
        M(al, a) => NotM(al.clone(), a.clone()),
        NotM(al, a) => M(al.clone(), a.clone()),
        Or(g, h) => And(Box::new(negate(g)), Box::new(negate(h))),
        And(g, h) => Or(Box::new(negate(g)), Box::new(negate(h))),
        BEx(x, a, g) => BAll(x.clone(), a.clone(), Box::new(negate(g))),
        BAll(x, a, g) => BEx(x.clone(), a.clone(), Box::new(negate(g))),
        REx(al, x, g) => RAll(al.clone(), x.clone(), Box::new(negate(g))),
        RAll(al, x, g) => REx(al.clone(), x.clone(), Box::new(negate(g))),
        Ex(x, g) => All(x.clone(), Box::new(negate(g))),
        All(x, g) => Ex(x.clone(), Box::new(negate(g))),
        RelEx(x, g) => RelAll(x.clone(), Box::new(negate(g))),
        RelAll(x, g) => RelEx(x.clone(), Box::new(negate(g))),
    }
}

fn term_vars(t: &SetTerm, out: &mut BTreeSet<String>) {
    if let SetTerm::Var(x) = t {
        out.insert(x.clone());
    }
}

/// Free set variables.
pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    fv_into(f, &mut out);
    out
}

fn fv_into(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        In(a, b) | NotIn(a, b) => {
            term_vars(a, out);
            term_vars(b, out);
        }
        Rel(_, a) | NotRel(_, a) | M(_, a) | NotM(_, a) => term_vars(a, out),
        Or(g, h) | And(g, h) => {
            fv_into(g, out);
            fv_into(h, out);
        }
        BEx(x, a, g) | BAll(x, a, g) => {
            term_vars(a, out);
            let mut inner = free_vars(g);
            inner.remove(x);
            out.extend(inner);
        }
        REx(_, x, g) | RAll(_, x, g) | Ex(x, g) | All(x, g) => {
            let mut inner = free_vars(g);
            inner.remove(x);
            out.extend(inner);
        }
        RelEx(_, g) | RelAll(_, g) => fv_into(g, out),
    }
}

/// Free relation variables.
pub fn free_rel_vars(f: &Formula) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    frv_into(f, &mut out);
    out
}

fn frv_into(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Rel(u, _) | NotRel(u, _) => {
            out.insert(u.clone());
        }
        In(..) | NotIn(..) | M(..) | NotM(..) => {}
        Or(g, h) | And(g, h) => {
            frv_into(g, out);
            frv_into(h, out);
        }
        BEx(_, _, g) | BAll(_, _, g) | REx(_, _, g) | RAll(_, _, g) | Ex(_, g) | All(_, g) => {
            frv_into(g, out)
        }
        RelEx(x, g) | RelAll(x, g) => {
            let mut inner = free_rel_vars(g);
            inner.remove(x);
            out.extend(inner);
        }
    }
}

pub fn seq_free_vars(s: &Sequent) -> BTreeSet<String> {
    s.iter().flat_map(free_vars).collect()
}

pub fn seq_free_rel_vars(s: &Sequent) -> BTreeSet<String> {
    s.iter().flat_map(free_rel_vars).collect()
}

/// Appends primes to `base` until it avoids every name in `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let mut name = base.to_string();
    while avoid.contains(&name) {
        name.push('\'');
    }
    name
}

/// Simultaneous substitution for free set and relation variables.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Subst {
    pub sets: BTreeMap<String, SetTerm>,
    pub rels: BTreeMap<String, String>,
}

impl Subst {
    pub fn set(x: &str, t: SetTerm) -> Self {
        let mut s = Subst::default();
        s.sets.insert(x.to_string(), t);
        s
    }

    pub fn rel(x: &str, u: &str) -> Self {
        let mut s = Subst::default();
        s.rels.insert(x.to_string(), u.to_string());
        s
    }

    fn is_empty(&self) -> bool {
        self.sets.is_empty() && self.rels.is_empty()
    }

    fn term(&self, t: &SetTerm) -> SetTerm {
        match t {
            SetTerm::Var(x) => self.sets.get(x).cloned().unwrap_or_else(|| t.clone()),
            _ => t.clone(),
        }
    }

    fn rel_name(&self, u: &str) -> String {
        self.rels.get(u).cloned().unwrap_or_else(|| u.to_string())
    }

    fn range_set_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for t in self.sets.values() {
            term_vars(t, &mut out);
        }
        out
    }

    pub fn apply(&self, f: &Formula) -> Formula {
        if self.is_empty() {
            return f.clone();
        }
        subst_go(f, self)
    }
}

fn set_binder(x: &str, body: &Formula, s: &Subst) -> (String, Subst) {
    let mut inner = s.clone();
    inner.sets.remove(x);
    let fv = free_vars(body);
    let relevant: BTreeMap<String, SetTerm> = inner
        .sets
        .iter()
        .filter(|(k, _)| fv.contains(*k))
        .map(|(k, t)| (k.clone(), t.clone()))
        .collect();
    let mut clash = BTreeSet::new();
    for t in relevant.values() {
        term_vars(t, &mut clash);
    }
    if clash.contains(x) {
        let mut avoid = fv;
        avoid.extend(clash);
        avoid.extend(inner.range_set_vars());
        let y = fresh_name(x, &avoid);
        inner.sets.insert(x.to_string(), SetTerm::Var(y.clone()));
        (y, inner)
    } else {
        (x.to_string(), inner)
    }
}

fn rel_binder(x: &str, body: &Formula, s: &Subst) -> (String, Subst) {
    let mut inner = s.clone();
    inner.rels.remove(x);
    let fv = free_rel_vars(body);
    let clash: BTreeSet<String> = inner
        .rels
        .iter()
        .filter(|(k, _)| fv.contains(*k))
        .map(|(_, u)| u.clone())
        .collect();
    if clash.contains(x) {
        let mut avoid = fv;
        avoid.extend(clash);
        avoid.extend(inner.rels.values().cloned());
        let y = fresh_name(x, &avoid);
        inner.rels.insert(x.to_string(), y.clone());
        (y, inner)
    } else {
        (x.to_string(), inner)
    }
}

fn subst_go(f: &Formula, s: &Subst) -> Formula {
    match f {
        In(a, b) => In(s.term(a), s.term(b)),
        NotIn(a, b) => NotIn(s.term(a), s.term(b)),
        Rel(u, a) => Rel(s.rel_name(u), s.term(a)),
        NotRel(u, a) => NotRel(s.rel_name(u), s.term(a)),
        M(al, a) => M(al.clone(), s.term(a)),
        NotM(al, a) => NotM(al.clone(), s.term(a)),
        Or(g, h) => or(subst_go(g, s), subst_go(h, s)),
        And(g, h) => and(subst_go(g, s), subst_go(h, s)),
        BEx(x, a, g) => {
            let (y, inner) = set_binder(x, g, s);
            BEx(y, s.term(a), Box::new(subst_go(g, &inner)))
        }
        BAll(x, a, g) => {
            let (y, inner) = set_binder(x, g, s);
            BAll(y, s.term(a), Box::new(subst_go(g, &inner)))
        }
        REx(al, x, g) => {
            let (y, inner) = set_binder(x, g, s);
            REx(al.clone(), y, Box::new(subst_go(g, &inner)))
        }
        RAll(al, x, g) => {
            let (y, inner) = set_binder(x, g, s);
            RAll(al.clone(), y, Box::new(subst_go(g, &inner)))
        }
        Ex(x, g) => {
            let (y, inner) = set_binder(x, g, s);
            Ex(y, Box::new(subst_go(g, &inner)))
        }
        All(x, g) => {
            let (y, inner) = set_binder(x, g, s);
            All(y, Box::new(subst_go(g, &inner)))
        }
        RelEx(x, g) => {
            let (y, inner) = rel_binder(x, g, s);
            RelEx(y, Box::new(subst_go(g, &inner)))
        }
        RelAll(x, g) => {
            let (y, inner) = rel_binder(x, g, s);
            RelAll(y, Box::new(subst_go(g, &inner)))
        }
    }
}

/// F[t/x], capture-avoiding.
pub fn substitute(f: &Formula, x: &str, t: &SetTerm) -> Formula {
    Subst::set(x, t.clone()).apply(f)
}

/// F[U/X] for relation variables, capture-avoiding.
pub fn substitute_rel(f: &Formula, x: &str, u: &str) -> Formula {
    Subst::rel(x, u).apply(f)
}

/// Renames every binder to `%k`, k being the number of enclosing binders.
pub fn canon(f: &Formula) -> Formula {
    canon_go(f, 0, &mut Vec::new(), &mut Vec::new())
}

fn lookup(env: &[(String, String)], x: &str) -> Option<String> {
    env.iter()
        .rev()
        .find(|(k, _)| k == x)
        .map(|(_, v)| v.clone())
}

fn canon_term(t: &SetTerm, env: &[(String, String)]) -> SetTerm {
    match t {
        SetTerm::Var(x) => lookup(env, x)
            .map(SetTerm::Var)
            .unwrap_or_else(|| t.clone()),
        _ => t.clone(),
    }
}

fn canon_go(
    f: &Formula,
    d: usize,
    sets: &mut Vec<(String, String)>,
    rels: &mut Vec<(String, String)>,
) -> Formula {
    let name = format!("%{d}");
    let under_set = |x: &str,
                     g: &Formula,
                     sets: &mut Vec<(String, String)>,
                     rels: &mut Vec<(String, String)>| {
        sets.push((x.to_string(), name.clone()));
        let r = canon_go(g, d + 1, sets, rels);
        sets.pop();
        r
    };
    match f {
        In(a, b) => In(canon_term(a, sets), canon_term(b, sets)),
        NotIn(a, b) => NotIn(canon_term(a, sets), canon_term(b, sets)),
        Rel(u, a) => Rel(
            lookup(rels, u).unwrap_or_else(|| u.clone()),
            canon_term(a, sets),
        ),
        NotRel(u, a) => NotRel(
            lookup(rels, u).unwrap_or_else(|| u.clone()),
            canon_term(a, sets),
        ),
        M(al, a) => M(al.clone(), canon_term(a, sets)),
        NotM(al, a) => NotM(al.clone(), canon_term(a, sets)),
        Or(g, h) => or(canon_go(g, d, sets, rels), canon_go(h, d, sets, rels)),
        And(g, h) => and(canon_go(g, d, sets, rels), canon_go(h, d, sets, rels)),
        BEx(x, a, g) => {
            let a = canon_term(a, sets);
            BEx(name.clone(), a, Box::new(under_set(x, g, sets, rels)))
        }
        BAll(x, a, g) => {
            let a = canon_term(a, sets);
            BAll(name.clone(), a, Box::new(under_set(x, g, sets, rels)))
        }
        REx(al, x, g) => REx(
            al.clone(),
            name.clone(),
            Box::new(under_set(x, g, sets, rels)),
        ),
        RAll(al, x, g) => RAll(
            al.clone(),
            name.clone(),
            Box::new(under_set(x, g, sets, rels)),
        ),
        Ex(x, g) => Ex(name.clone(), Box::new(under_set(x, g, sets, rels))),
        All(x, g) => All(name.clone(), Box::new(under_set(x, g, sets, rels))),
        RelEx(x, g) | RelAll(x, g) => {
            rels.push((x.clone(), name.clone()));
            let body = canon_go(g, d + 1, sets, rels);
            rels.pop();
            if matches!(f, RelEx(..)) {
                RelEx(name, Box::new(body))
            } else {
                RelAll(name, Box::new(body))
            }
        }
    }
}

pub fn alpha_eq(f: &Formula, g: &Formula) -> bool {
    canon(f) == canon(g)
}

/// Instantiates the body of a set quantifier: returns F[t] for `Qx F[x]`.
pub fn instantiate(f: &Formula, t: &SetTerm) -> Option<Formula> {
    match f {
        BEx(x, _, g) | BAll(x, _, g) | REx(_, x, g) | RAll(_, x, g) | Ex(x, g) | All(x, g) => {
            Some(substitute(g, x, t))
        }
        _ => None,
    }
}

/// Instantiates the body of a relation quantifier.
pub fn instantiate_rel(f: &Formula, u: &str) -> Option<Formula> {
    match f {
        RelEx(x, g) | RelAll(x, g) => Some(substitute_rel(g, x, u)),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// rank, parameters, level, length, classes

pub fn rank(f: &Formula) -> OrdTerm {
    let one = OrdTerm::one();
    match f {
        In(..) | NotIn(..) | Rel(..) | NotRel(..) => OrdTerm::zero(),
        M(al, _) | NotM(al, _) => omega_times(al),
        Or(g, h) | And(g, h) => ordinals::max_ord(&rank(g), &rank(h)).succ(),
        // rk(u∈a ∧ F[u]) + 1
        BEx(_, _, g) | BAll(_, _, g) => rank(g).succ().succ(),
        // rk(M_α(u) ∧ F[u]) + 1
        REx(al, _, g) | RAll(al, _, g) => {
            ordinals::max_ord(&omega_times(al), &rank(g)).succ().succ()
        }
        Ex(_, g) | All(_, g) => {
            if classes(g).is_delta0 {
                OrdTerm::big_omega()
            } else {
                let floor = OrdTerm::big_omega().succ();
                let r = nf_sum(&rank(g), &OrdTerm::nat(3));
                ordinals::max_ord(&floor, &r).clone()
            }
        }
        RelEx(_, g) | RelAll(_, g) => nf_sum(&rank(g), &one),
    }
}

pub fn params(f: &Formula) -> BTreeSet<OrdTerm> {
    let mut out = BTreeSet::new();
    params_into(f, &mut out);
    out
}

fn params_into(f: &Formula, out: &mut BTreeSet<OrdTerm>) {
    match f {
        In(..) | NotIn(..) | Rel(..) | NotRel(..) => {
            out.insert(OrdTerm::zero());
        }
        M(al, _) | NotM(al, _) => {
            out.insert(al.clone());
        }
        Or(g, h) | And(g, h) => {
            params_into(g, out);
            params_into(h, out);
        }
        BEx(_, _, g) | BAll(_, _, g) => {
            out.insert(OrdTerm::zero());
            params_into(g, out);
        }
        REx(al, _, g) | RAll(al, _, g) => {
            out.insert(al.clone());
            params_into(g, out);
        }
        Ex(_, g) | All(_, g) | RelEx(_, g) | RelAll(_, g) => params_into(g, out),
    }
}

pub fn seq_params(s: &Sequent) -> BTreeSet<OrdTerm> {
    s.iter().flat_map(params).collect()
}

pub fn level(f: &Formula) -> OrdTerm {
    if rank(f) < OrdTerm::big_omega() {
        params(f).into_iter().next_back().unwrap_or_default()
    } else {
        OrdTerm::big_omega()
    }
}

pub fn length(f: &Formula) -> usize {
    match f {
        In(..) | NotIn(..) | Rel(..) | NotRel(..) | M(..) | NotM(..) => 0,
        Or(g, h) | And(g, h) => length(g).max(length(h)) + 1,
        BEx(_, _, g)
        | BAll(_, _, g)
        | REx(_, _, g)
        | RAll(_, _, g)
        | Ex(_, g)
        | All(_, g)
        | RelEx(_, g)
        | RelAll(_, g) => length(g) + 1,
    }
}

/// Number of AST nodes; terms and ordinal annotations count as part of their node.
pub fn size(f: &Formula) -> usize {
    match f {
        In(..) | NotIn(..) | Rel(..) | NotRel(..) | M(..) | NotM(..) => 1,
        Or(g, h) | And(g, h) => size(g) + size(h) + 1,
        BEx(_, _, g)
        | BAll(_, _, g)
        | REx(_, _, g)
        | RAll(_, _, g)
        | Ex(_, g)
        | All(_, g)
        | RelEx(_, g)
        | RelAll(_, g) => size(g) + 1,
    }
}

struct Scan {
    l2set: bool,
    unbounded: bool,
    rel_quant: bool,
}

fn scan(f: &Formula) -> Scan {
    let mut s = Scan {
        l2set: true,
        unbounded: false,
        rel_quant: false,
    };
    fn go(f: &Formula, s: &mut Scan) {
        match f {
            In(..) | NotIn(..) | Rel(..) | NotRel(..) => {}
            M(..) | NotM(..) => s.l2set = false,
            Or(g, h) | And(g, h) => {
                go(g, s);
                go(h, s);
            }
            BEx(_, _, g) | BAll(_, _, g) => go(g, s),
            REx(_, _, g) | RAll(_, _, g) => {
                s.l2set = false;
                go(g, s)
            }
            Ex(_, g) | All(_, g) => {
                s.unbounded = true;
                go(g, s)
            }
            RelEx(_, g) | RelAll(_, g) => {
                s.rel_quant = true;
                go(g, s)
            }
        }
    }
    go(f, &mut s);
    s
}

fn is_s(f: &Formula) -> bool {
    let sc = scan(f);
    if !sc.unbounded && !sc.rel_quant {
        return true;
    }
    match f {
        Or(g, h) | And(g, h) => is_s(g) && is_s(h),
        BEx(_, _, g) | BAll(_, _, g) | REx(_, _, g) | RAll(_, _, g) | Ex(_, g) => is_s(g),
        _ => false,
    }
}

pub fn classes(f: &Formula) -> Classes {
    let sc = scan(f);
    let is_delta0 = sc.l2set && !sc.unbounded && !sc.rel_quant;
    let is_d = !sc.unbounded && !sc.rel_quant;
    let is_s = is_s(f);
    let is_sigma_l2set = sc.l2set && is_s;
    Classes {
        is_delta0,
        is_d,
        is_s,
        is_s0: is_sigma_l2set && !is_delta0,
        is_b: !sc.unbounded,
        is_sigma_l2set,
    }
}

pub fn class_of(f: &Formula) -> Classes {
    classes(f)
}

pub fn is_l2set(f: &Formula) -> bool {
    scan(f).l2set
}

/// F^β: every unbounded ∃x becomes ∃x^β.
pub fn bound_exists(f: &Formula, beta: &OrdTerm) -> Formula {
    let go = |g: &Formula| Box::new(bound_exists(g, beta));
    match f {
        Ex(x, g) => REx(beta.clone(), x.clone(), go(g)),
        Or(g, h) => Or(go(g), go(h)),
        And(g, h) => And(go(g), go(h)),
        BEx(x, a, g) => BEx(x.clone(), a.clone(), go(g)),
        BAll(x, a, g) => BAll(x.clone(), a.clone(), go(g)),
        REx(al, x, g) => REx(al.clone(), x.clone(), go(g)),
        RAll(al, x, g) => RAll(al.clone(), x.clone(), go(g)),
        All(x, g) => All(x.clone(), go(g)),
        RelEx(x, g) => RelEx(x.clone(), go(g)),
        RelAll(x, g) => RelAll(x.clone(), go(g)),
        atom => atom.clone(),
    }
}

/// F^{(a)}: unbounded set quantifiers are restricted to a; relation
/// quantifiers are left alone.
pub fn relativize(f: &Formula, a: &SetTerm) -> Formula {
    fn go(f: &Formula, a: &SetTerm) -> Formula {
        let r = |g: &Formula| Box::new(go(g, a));
        match f {
            Ex(x, g) => BEx(x.clone(), a.clone(), r(g)),
            All(x, g) => BAll(x.clone(), a.clone(), r(g)),
            Or(g, h) => Or(r(g), r(h)),
            And(g, h) => And(r(g), r(h)),
            BEx(x, b, g) => BEx(x.clone(), b.clone(), r(g)),
            BAll(x, b, g) => BAll(x.clone(), b.clone(), r(g)),
            REx(al, x, g) => REx(al.clone(), x.clone(), r(g)),
            RAll(al, x, g) => RAll(al.clone(), x.clone(), r(g)),
            RelEx(x, g) => RelEx(x.clone(), r(g)),
            RelAll(x, g) => RelAll(x.clone(), r(g)),
            atom => atom.clone(),
        }
    }
    // binders renamed first so that a's variables cannot be captured
    go(&canon(f), a)
}

/// Every ordinal annotation must lie below Ω.
pub fn check_levels(f: &Formula) -> Result<(), FormulaError> {
    let big = OrdTerm::big_omega();
    for p in params(f) {
        if compare(&p, &big) != std::cmp::Ordering::Less {
            return Err(FormulaError::LevelTooLarge(p.to_string()));
        }
    }
    Ok(())
}

/// rk(F) # rk(F)
pub fn double_rank(f: &Formula) -> OrdTerm {
    let r = rank(f);
    natural_sum(&r, &r)
}

// ---------------------------------------------------------------------------
// abbreviations

fn avoid_of(terms: &[&SetTerm]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for t in terms {
        term_vars(t, &mut out);
    }
    out
}

fn fresh2(avoid: &BTreeSet<String>) -> (String, String) {
    let x = fresh_name("x", avoid);
    let mut av = avoid.clone();
    av.insert(x.clone());
    let y = fresh_name("y", &av);
    (x, y)
}

/// (∀x∈a)(x∈b) ∧ (∀x∈b)(x∈a)
pub fn set_eq(a: &SetTerm, b: &SetTerm) -> Formula {
    let x = fresh_name("x", &avoid_of(&[a, b]));
    and(
        ball(&x, a.clone(), mem(v(&x), b.clone())),
        ball(&x, b.clone(), mem(v(&x), a.clone())),
    )
}

/// Tran[a] = (∀x∈a)(∀y∈x)(y∈a)
pub fn tran(a: &SetTerm) -> Formula {
    let (x, y) = fresh2(&avoid_of(&[a]));
    ball(&x, a.clone(), ball(&y, v(&x), mem(v(&y), a.clone())))
}

/// Ord[a] = Tran[a] ∧ (∀x∈a)Tran[x]
pub fn ord(a: &SetTerm) -> Formula {
    let x = fresh_name("x", &avoid_of(&[a]));
    and(tran(a), ball(&x, a.clone(), tran(&v(&x))))
}

/// a = x ∪ {x}, spelled out with bounded quantifiers.
pub fn is_successor_of(a: &SetTerm, x: &SetTerm) -> Formula {
    let y = fresh_name("y", &avoid_of(&[a, x]));
    and(
        ball(&y, a.clone(), or(mem(v(&y), x.clone()), set_eq(&v(&y), x))),
        and(
            ball(&y, x.clone(), mem(v(&y), a.clone())),
            mem(x.clone(), a.clone()),
        ),
    )
}

/// Succ[a] = Ord[a] ∧ (∃x∈a)(a = x ∪ {x})
pub fn succ(a: &SetTerm) -> Formula {
    let x = fresh_name("x", &avoid_of(&[a]));
    and(ord(a), bex(&x, a.clone(), is_successor_of(a, &v(&x))))
}

/// FinOrd[a] = Ord[a] ∧ (a = ∅ ∨ Succ[a]) ∧ (∀x∈a)(x = ∅ ∨ Succ[x])
pub fn fin_ord(a: &SetTerm) -> Formula {
    let x = fresh_name("x", &avoid_of(&[a]));
    let e = SetTerm::Empty;
    and(
        ord(a),
        and(
            or(set_eq(a, &e), succ(a)),
            ball(&x, a.clone(), or(set_eq(&v(&x), &e), succ(&v(&x)))),
        ),
    )
}

/// U = V, i.e. (∀x∈ω)(U(x) ↔ V(x))
pub fn rel_eq(u: &str, w: &str) -> Formula {
    let x = "x";
    ball(
        x,
        SetTerm::Omega,
        iff(Rel(u.to_string(), v(x)), Rel(w.to_string(), v(x))),
    )
}

/// z = {x ∈ a : D[x]} as (∀x∈z)(x∈a ∧ D[x]) ∧ (∀x∈a)(D[x] → x∈z), where
/// `d` has `x` free.
pub fn sep_eq(z: &SetTerm, a: &SetTerm, x: &str, d: &Formula) -> Formula {
    let mut avoid = avoid_of(&[z, a]);
    avoid.extend(free_vars(d));
    let y = fresh_name("x", &avoid);
    let dy = substitute(d, x, &v(&y));
    and(
        ball(&y, z.clone(), and(mem(v(&y), a.clone()), dy.clone())),
        ball(&y, a.clone(), imp(dy, mem(v(&y), z.clone()))),
    )
}

/// a ∈ ω ↔ FinOrd[a]
pub fn infinity(a: &SetTerm) -> Formula {
    iff(mem(a.clone(), SetTerm::Omega), fin_ord(a))
}

// ---------------------------------------------------------------------------
// s-expression syntax

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

impl<'a> Reader<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FormulaError> {
        Err(FormulaError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.ws();
        self.rest().chars().next()
    }

    fn expect(&mut self, c: char) -> Result<(), FormulaError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn ident(&mut self) -> Result<String, FormulaError> {
        self.ws();
        let rest = self.rest();
        let mut chars = rest.char_indices();
        match chars.next() {
            Some((_, c)) if is_ident_start(c) => {}
            _ => return self.err("expected identifier"),
        }
        let end = rest
            .char_indices()
            .find(|&(_, c)| !is_ident_char(c))
            .map_or(rest.len(), |(i, _)| i);
        self.pos += end;
        Ok(rest[..end].to_string())
    }

    fn term(&mut self) -> Result<SetTerm, FormulaError> {
        let name = self.ident()?;
        Ok(match name.as_str() {
            "empty" => SetTerm::Empty,
            "omega" => SetTerm::Omega,
            _ => SetTerm::Var(name),
        })
    }

    fn var(&mut self) -> Result<String, FormulaError> {
        let start = self.pos;
        let name = self.ident()?;
        if name == "empty" || name == "omega" {
            self.pos = start;
            return self.err("constant used as a variable");
        }
        Ok(name)
    }

    /// An ordinal written either in quotes or as one whitespace-free chunk
    /// whose parentheses balance.
    fn ordinal(&mut self) -> Result<OrdTerm, FormulaError> {
        self.ws();
        let rest = self.rest();
        let text;
        if let Some(stripped) = rest.strip_prefix('"') {
            let Some(end) = stripped.find('"') else {
                return self.err("unterminated ordinal literal");
            };
            text = &stripped[..end];
            self.pos += end + 2;
        } else {
            let mut depth = 0i32;
            let mut end = rest.len();
            for (i, c) in rest.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' if depth == 0 => {
                        end = i;
                        break;
                    }
                    ')' => depth -= 1,
                    c if c.is_whitespace() && depth == 0 => {
                        end = i;
                        break;
                    }
                    _ => {}
                }
            }
            if end == 0 {
                return self.err("expected ordinal");
            }
            text = &rest[..end];
            self.pos += end;
        }
        let t = ordinals::parse(text)?;
        if t >= OrdTerm::big_omega() {
            return Err(FormulaError::LevelTooLarge(t.to_string()));
        }
        Ok(t)
    }

    fn formula(&mut self) -> Result<Formula, FormulaError> {
        self.expect('(')?;
        let head = self.ident()?;
        let f = match head.as_str() {
            "in" => In(self.term()?, self.term()?),
            "nin" => NotIn(self.term()?, self.term()?),
            "rel" => Rel(self.var()?, self.term()?),
            "nrel" => NotRel(self.var()?, self.term()?),
            "M" => M(self.ordinal()?, self.term()?),
            "nM" => NotM(self.ordinal()?, self.term()?),
            "or" => or(self.formula()?, self.formula()?),
            "and" => and(self.formula()?, self.formula()?),
            "bex" => {
                let x = self.var()?;
                bex(&x, self.term()?, self.formula()?)
            }
            "ball" => {
                let x = self.var()?;
                ball(&x, self.term()?, self.formula()?)
            }
            "rex" => {
                let al = self.ordinal()?;
                let x = self.var()?;
                rex(al, &x, self.formula()?)
            }
            "rall" => {
                let al = self.ordinal()?;
                let x = self.var()?;
                rall(al, &x, self.formula()?)
            }
            "ex" => {
                let x = self.var()?;
                ex(&x, self.formula()?)
            }
            "all" => {
                let x = self.var()?;
                all(&x, self.formula()?)
            }
            "Rex" => {
                let x = self.var()?;
                rel_ex(&x, self.formula()?)
            }
            "Rall" => {
                let x = self.var()?;
                rel_all(&x, self.formula()?)
            }
            // sugar, expanded on the spot
            "not" => negate(&self.formula()?),
            "imp" => imp(self.formula()?, self.formula()?),
            "iff" => iff(self.formula()?, self.formula()?),
            "eq" => set_eq(&self.term()?, &self.term()?),
            "neq" => negate(&set_eq(&self.term()?, &self.term()?)),
            "Tran" => tran(&self.term()?),
            "Ord" => ord(&self.term()?),
            "Succ" => succ(&self.term()?),
            "FinOrd" => fin_ord(&self.term()?),
            "releq" => rel_eq(&self.var()?, &self.var()?),
            _ => return self.err(format!("unknown head '{head}'")),
        };
        self.expect(')')?;
        Ok(f)
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let mut r = Reader { src: text, pos: 0 };
    let f = r.formula()?;
    if r.peek().is_some() {
        return r.err("trailing input");
    }
    Ok(f)
}

pub fn parse_term(text: &str) -> Result<SetTerm, FormulaError> {
    let mut r = Reader { src: text, pos: 0 };
    let t = r.term()?;
    if r.peek().is_some() {
        return r.err("trailing input");
    }
    Ok(t)
}

impl std::str::FromStr for Formula {
    type Err = FormulaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_formula(s)
    }
}

fn ord_token(t: &OrdTerm) -> String {
    t.to_string().replace(' ', "")
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            In(a, b) => write!(f, "(in {a} {b})"),
            NotIn(a, b) => write!(f, "(nin {a} {b})"),
            Rel(u, a) => write!(f, "(rel {u} {a})"),
            NotRel(u, a) => write!(f, "(nrel {u} {a})"),
            M(al, a) => write!(f, "(M {} {a})", ord_token(al)),
            NotM(al, a) => write!(f, "(nM {} {a})", ord_token(al)),
            Or(g, h) => write!(f, "(or {g} {h})"),
            And(g, h) => write!(f, "(and {g} {h})"),
            BEx(x, a, g) => write!(f, "(bex {x} {a} {g})"),
            BAll(x, a, g) => write!(f, "(ball {x} {a} {g})"),
            REx(al, x, g) => write!(f, "(rex {} {x} {g})", ord_token(al)),
            RAll(al, x, g) => write!(f, "(rall {} {x} {g})", ord_token(al)),
            Ex(x, g) => write!(f, "(ex {x} {g})"),
            All(x, g) => write!(f, "(all {x} {g})"),
            RelEx(x, g) => write!(f, "(Rex {x} {g})"),
            RelAll(x, g) => write!(f, "(Rall {x} {g})"),
        }
    }
}

impl serde::Serialize for Formula {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_formula(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn o(s: &str) -> OrdTerm {
        ordinals::parse(s).unwrap()
    }

    #[test]
    fn negation_examples() {
        assert_eq!(negate(&p("(in a b)")), p("(nin a b)"));
        assert_eq!(
            negate(&p("(and (in a b) (rel U a))")),
            p("(or (nin a b) (nrel U a))")
        );
        assert_eq!(negate(&p("(rall 1 x (in x a))")), p("(rex 1 x (nin x a))"));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&p("(M w a)")), o("w^(2)"));
        assert_eq!(rank(&p("(ex x (in x a))")), OrdTerm::big_omega());
        assert_eq!(rank(&p("(bex x a (in x b))")), OrdTerm::nat(2));
        // matrix outside Δ₀: max(Ω+1, rk+3)
        assert_eq!(rank(&p("(ex x (M 1 x))")), o("W + 1"));
        assert_eq!(rank(&p("(ex x (ex y (in x y)))")), o("W + 3"));
    }

    #[test]
    fn params_and_level() {
        assert_eq!(params(&p("(in a b)")), [OrdTerm::zero()].into());
        assert_eq!(params(&p("(M w a)")), [OrdTerm::omega()].into());
        assert_eq!(
            params(&p("(and (M 1 a) (M 2 b))")),
            [OrdTerm::one(), OrdTerm::nat(2)].into()
        );
        assert_eq!(level(&p("(in a b)")), OrdTerm::zero());
        assert_eq!(level(&p("(ex x (in x a))")), OrdTerm::big_omega());
        assert_eq!(level(&p("(M w a)")), OrdTerm::omega());
    }

    #[test]
    fn length_examples() {
        assert_eq!(length(&p("(in a b)")), 0);
        assert_eq!(length(&p("(or (in a b) (rel U a))")), 1);
        assert_eq!(length(&p("(all x (or (in x a) (in x b)))")), 2);
    }

    #[test]
    fn class_examples() {
        let c = classes(&p("(in a b)"));
        assert!(c.is_delta0 && c.is_d && c.is_s && c.is_b);
        let c = classes(&p("(ex x (in x a))"));
        assert!(c.is_s && c.is_s0 && !c.is_b);
        let c = classes(&p("(Rall X (rel X a))"));
        assert!(c.is_b && !c.is_d);
        let c = classes(&p("(all x (in x a))"));
        assert!(!c.is_s && !c.is_b);
    }

    #[test]
    fn bound_and_relativize() {
        assert_eq!(
            bound_exists(&p("(ex x (in x a))"), &OrdTerm::nat(2)),
            p("(rex 2 x (in x a))")
        );
        let f = p("(and (in a b) (ball x a (in x b)))");
        assert_eq!(bound_exists(&f, &OrdTerm::one()), f);
        assert_eq!(
            bound_exists(&p("(ex x (ex y (in x y)))"), &OrdTerm::one()),
            p("(rex 1 x (rex 1 y (in x y)))")
        );
        assert!(alpha_eq(
            &relativize(&p("(all x (in x a))"), &SetTerm::var("z")),
            &p("(ball x z (in x a))")
        ));
        assert!(alpha_eq(
            &relativize(&p("(Rex X (ex x (rel X x)))"), &SetTerm::var("z")),
            &p("(Rex X (bex x z (rel X x)))")
        ));
        let q = p("(or (in a b) (nrel U a))");
        assert_eq!(relativize(&q, &SetTerm::var("z")), q);
        // the bounding variable is not captured by an inner binder of the same name
        let r = relativize(&p("(all z (ex x (in x z)))"), &SetTerm::var("z"));
        assert_eq!(free_vars(&r), ["z".to_string()].into());
    }

    #[test]
    fn substitution() {
        assert_eq!(
            substitute(&p("(in x a)"), "x", &SetTerm::var("b")),
            p("(in b a)")
        );
        let f = p("(ex x (in x a))");
        assert_eq!(substitute(&f, "x", &SetTerm::var("b")), f);
        let g = substitute(&p("(ex y (in x y))"), "x", &SetTerm::var("y"));
        assert_eq!(free_vars(&g), ["y".to_string()].into());
        assert!(alpha_eq(&g, &p("(ex z (in y z))")));
        let h = substitute_rel(&p("(Rex X (and (rel X a) (rel Y a)))"), "Y", "X");
        assert_eq!(free_rel_vars(&h), ["X".to_string()].into());
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(canon(&p("(ex x (in x a))")), canon(&p("(ex y (in y a))")));
        assert_ne!(canon(&p("(ex x (in x a))")), canon(&p("(ex x (in x b))")));
        assert_eq!(
            canon(&p("(bex x a (ball y x (in y a)))"))
                .to_string()
                .matches('%')
                .count(),
            4
        );
    }

    #[test]
    fn derived_constructors() {
        let a = SetTerm::var("a");
        assert!(alpha_eq(&tran(&a), &p("(ball x a (ball y x (in y a)))")));
        let e = set_eq(&a, &a);
        assert!(alpha_eq(
            &e,
            &p("(and (ball x a (in x a)) (ball x a (in x a)))")
        ));
        let fo = fin_ord(&SetTerm::Empty);
        assert!(free_vars(&fo).is_empty());
        assert!(classes(&fo).is_delta0);
        let fx = fin_ord(&SetTerm::var("x"));
        assert_eq!(free_vars(&fx), ["x".to_string()].into());
        assert!(classes(&infinity(&a)).is_delta0);
        assert!(classes(&rel_eq("U", "V")).is_delta0);
    }

    #[test]
    fn parse_render_round_trip() {
        for s in [
            "(in a b)",
            "(M w^(1)+1 a)",
            "(rex p(0) x (and (in x empty) (nrel U omega)))",
            "(Rall X (all y (or (rel X y) (nM 3 y))))",
        ] {
            let f = p(s);
            assert_eq!(p(&f.to_string()), f);
        }
        assert_eq!(p("(M \"w^(1) + 1\" a)"), p("(M w^(1)+1 a)"));
        assert!(parse_formula("(M W a)").is_err());
        assert!(parse_formula("(in %0 a)").is_err());
        assert!(parse_formula("(ex omega (in a b))").is_err());
    }
}
