//! Checker for the Tait-style sequent calculus of KP + (Π¹₁-CA*).
//!
//! Axiom steps name their schema and carry the witnesses that fix the
//! instance; the checker rebuilds the instance and looks it up in the step's
//! sequent. Rule steps name premises by index. Side formulas beyond the
//! instance are allowed everywhere (implicit weakening).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulas::{
    self, and, ball, bex, canon, classes, ex, free_rel_vars, free_vars, fresh_name, iff, imp,
    instantiate, instantiate_rel, length, mem, negate, or, parse_formula, parse_term, rel_all,
    rel_ex, sep_eq, set_eq, Formula, Sequent, SetTerm,
};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum TaitError {
    #[error("unknown axiom '{0}'")]
    UnknownAxiom(String),
    #[error("unknown rule '{0}'")]
    UnknownRule(String),
    #[error("witness {0} is not Δ₀")]
    NonDelta0Witness(String),
    #[error("eigenvariable {0} occurs free in the conclusion")]
    EigenvariableViolation(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no cut formula fits the premises")]
    CutFormulaMissing,
    #[error("premise {premise} is not an earlier step")]
    ForwardReference { premise: usize },
    #[error("missing witness '{0}'")]
    MissingWitness(String),
    #[error("bad witness '{key}': {msg}")]
    BadWitness { key: String, msg: String },
    #[error("not an L2set formula: {0}")]
    NotL2Set(String),
    #[error("sequent does not contain the {0} instance")]
    AxiomMismatch(String),
}

/// Witness map: keys name schema metavariables, values are formulas, terms
/// or variable names in surface syntax.
pub type Witness = BTreeMap<String, String>;

fn wget<'a>(w: &'a Witness, key: &str) -> Result<&'a str, TaitError> {
    w.get(key)
        .map(String::as_str)
        .ok_or_else(|| TaitError::MissingWitness(key.to_string()))
}

fn bad(key: &str, msg: impl fmt::Display) -> TaitError {
    TaitError::BadWitness {
        key: key.to_string(),
        msg: msg.to_string(),
    }
}

pub fn w_formula(w: &Witness, key: &str) -> Result<Formula, TaitError> {
    let f = parse_formula(wget(w, key)?).map_err(|e| bad(key, e))?;
    if !formulas::is_l2set(&f) {
        return Err(TaitError::NotL2Set(f.to_string()));
    }
    Ok(f)
}

pub fn w_delta0(w: &Witness, key: &str) -> Result<Formula, TaitError> {
    let f = w_formula(w, key)?;
    if !classes(&f).is_delta0 {
        return Err(TaitError::NonDelta0Witness(f.to_string()));
    }
    Ok(f)
}

pub fn w_term(w: &Witness, key: &str) -> Result<SetTerm, TaitError> {
    parse_term(wget(w, key)?).map_err(|e| bad(key, e))
}

pub fn w_var(w: &Witness, key: &str) -> Result<String, TaitError> {
    match w_term(w, key)? {
        SetTerm::Var(x) => Ok(x),
        _ => Err(bad(key, "expected a variable")),
    }
}

fn term_names(ts: &[&SetTerm]) -> BTreeSet<String> {
    ts.iter()
        .filter_map(|t| t.as_var().map(str::to_string))
        .collect()
}

fn v(x: &str) -> SetTerm {
    SetTerm::var(x)
}

/// Builds the formulas of a schema instance from its witnesses.
pub type SchemaFn = Arc<dyn Fn(&Witness) -> Result<Vec<Formula>, TaitError> + Send + Sync>;

#[derive(Clone)]
pub struct AxiomRegistry {
    schemas: BTreeMap<String, SchemaFn>,
}

impl fmt::Debug for AxiomRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.schemas.keys()).finish()
    }
}

pub const AXIOM_IDS: [&str; 11] = [
    "TnD",
    "Equality",
    "SubOmega",
    "Pair",
    "Union",
    "EmptySet",
    "Infinity",
    "Delta0Sep",
    "Delta0Col",
    "EpsInd",
    "Pi11CAstar",
];

pub fn tnd_instance(d: &Formula) -> Vec<Formula> {
    vec![negate(d), d.clone()]
}

pub fn equality_instance(d: &Formula, x: &str, a: &SetTerm, b: &SetTerm) -> Vec<Formula> {
    vec![
        negate(&set_eq(a, b)),
        negate(&formulas::substitute(d, x, a)),
        formulas::substitute(d, x, b),
    ]
}

pub fn pair_instance(a: &SetTerm, b: &SetTerm) -> Formula {
    let z = fresh_name("z", &term_names(&[a, b]));
    ex(&z, and(mem(a.clone(), v(&z)), mem(b.clone(), v(&z))))
}

pub fn union_instance(a: &SetTerm) -> Formula {
    let avoid = term_names(&[a]);
    let z = fresh_name("z", &avoid);
    let y = fresh_name("y", &avoid);
    let x = fresh_name("x", &avoid);
    ex(&z, ball(&y, a.clone(), ball(&x, v(&y), mem(v(&x), v(&z)))))
}

pub fn empty_set_instance() -> Formula {
    ball("x", SetTerm::Empty, negate(&set_eq(&v("x"), &v("x"))))
}

pub fn sep_instance(a: &SetTerm, d: &Formula, x: &str) -> Formula {
    let mut avoid = free_vars(d);
    avoid.extend(term_names(&[a]));
    avoid.insert(x.to_string());
    let z = fresh_name("z", &avoid);
    ex(&z, sep_eq(&v(&z), a, x, d))
}

pub fn col_instance(a: &SetTerm, d: &Formula, x: &str, y: &str) -> Formula {
    let mut avoid = free_vars(d);
    avoid.extend(term_names(&[a]));
    avoid.insert(x.to_string());
    avoid.insert(y.to_string());
    let z = fresh_name("z", &avoid);
    imp(
        ball(x, a.clone(), ex(y, d.clone())),
        ex(&z, ball(x, a.clone(), bex(y, v(&z), d.clone()))),
    )
}

pub fn eps_ind_instance(a: &Formula, x: &str) -> Formula {
    let mut avoid = free_vars(a);
    avoid.insert(x.to_string());
    let y = fresh_name("y", &avoid);
    let ay = formulas::substitute(a, x, &v(&y));
    imp(
        all_(x, imp(ball(&y, v(x), ay), a.clone())),
        all_(x, a.clone()),
    )
}

fn all_(x: &str, f: Formula) -> Formula {
    formulas::all(x, f)
}

pub fn ca_instance(d: &Formula, x: &str, y_rel: &str) -> Formula {
    let mut avoid = free_rel_vars(d);
    avoid.insert(y_rel.to_string());
    let z = fresh_name("Z", &avoid);
    rel_ex(
        &z,
        ball(
            x,
            SetTerm::Omega,
            iff(Formula::Rel(z.clone(), v(x)), rel_all(y_rel, d.clone())),
        ),
    )
}

impl Default for AxiomRegistry {
    fn default() -> Self {
        let mut r = AxiomRegistry {
            schemas: BTreeMap::new(),
        };
        r.register("TnD", |w| Ok(tnd_instance(&w_delta0(w, "D")?)));
        r.register("Equality", |w| {
            let d = w_delta0(w, "D")?;
            Ok(equality_instance(
                &d,
                &w_var(w, "var")?,
                &w_term(w, "a")?,
                &w_term(w, "b")?,
            ))
        });
        r.register("SubOmega", |w| {
            let a = w_term(w, "a")?;
            Ok(vec![
                Formula::NotRel(w_var(w, "U")?, a.clone()),
                mem(a, SetTerm::Omega),
            ])
        });
        r.register("Pair", |w| {
            Ok(vec![pair_instance(&w_term(w, "a")?, &w_term(w, "b")?)])
        });
        r.register("Union", |w| Ok(vec![union_instance(&w_term(w, "a")?)]));
        r.register("EmptySet", |_| Ok(vec![empty_set_instance()]));
        r.register("Infinity", |w| {
            Ok(vec![formulas::infinity(&w_term(w, "a")?)])
        });
        r.register("Delta0Sep", |w| {
            Ok(vec![sep_instance(
                &w_term(w, "a")?,
                &w_delta0(w, "D")?,
                &w_var(w, "x")?,
            )])
        });
        r.register("Delta0Col", |w| {
            let d = w_delta0(w, "D")?;
            Ok(vec![col_instance(
                &w_term(w, "a")?,
                &d,
                &w_var(w, "x")?,
                &w_var(w, "y")?,
            )])
        });
        r.register("EpsInd", |w| {
            Ok(vec![eps_ind_instance(
                &w_formula(w, "A")?,
                &w_var(w, "var")?,
            )])
        });
        r.register("Pi11CAstar", |w| {
            Ok(vec![ca_instance(
                &w_delta0(w, "D")?,
                &w_var(w, "x")?,
                &w_var(w, "Y")?,
            )])
        });
        r
    }
}

impl AxiomRegistry {
    pub fn register<F>(&mut self, name: &str, schema: F)
    where
        F: Fn(&Witness) -> Result<Vec<Formula>, TaitError> + Send + Sync + 'static,
    {
        self.schemas.insert(name.to_string(), Arc::new(schema));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.schemas.keys().map(String::as_str)
    }

    /// The canonical instance formulas for `ax` under `w`.
    pub fn instance(&self, ax: &str, w: &Witness) -> Result<Vec<Formula>, TaitError> {
        let schema = self
            .schemas
            .get(ax)
            .ok_or_else(|| TaitError::UnknownAxiom(ax.to_string()))?;
        Ok(schema(w)?.iter().map(canon).collect())
    }

    /// Ok(true) iff `s` contains the instance; witness problems are errors.
    pub fn check_axiom(&self, s: &Sequent, ax: &str, w: &Witness) -> Result<bool, TaitError> {
        Ok(self.instance(ax, w)?.iter().all(|f| s.contains(f)))
    }
}

pub fn check_axiom(s: &Sequent, ax: &str, w: &Witness) -> Result<bool, TaitError> {
    AxiomRegistry::default().check_axiom(s, ax, w)
}

// ---------------------------------------------------------------------------
// rules

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleId {
    Or,
    And,
    Ex,
    All,
    Bex,
    Ball,
    Ex2,
    All2,
    Cut,
}

impl RuleId {
    pub const ALL: [RuleId; 9] = [
        RuleId::Or,
        RuleId::And,
        RuleId::Ex,
        RuleId::All,
        RuleId::Bex,
        RuleId::Ball,
        RuleId::Ex2,
        RuleId::All2,
        RuleId::Cut,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::Or => "or",
            RuleId::And => "and",
            RuleId::Ex => "ex",
            RuleId::All => "all",
            RuleId::Bex => "bex",
            RuleId::Ball => "ball",
            RuleId::Ex2 => "ex2",
            RuleId::All2 => "all2",
            RuleId::Cut => "cut",
        }
    }

    pub fn from_name(s: &str) -> Option<RuleId> {
        RuleId::ALL.into_iter().find(|r| r.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            RuleId::And | RuleId::Cut => 2,
            _ => 1,
        }
    }
}

/// What a rule application resolved to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleUse {
    pub rule: RuleId,
    pub principal: Option<Formula>,
    /// Minor formulas, one list per premise.
    pub minors: Vec<Vec<Formula>>,
    pub term: Option<SetTerm>,
    pub rel: Option<String>,
    pub eigen: Option<String>,
    pub cut: Option<Formula>,
}

fn side_ok(premise: &Sequent, minors: &[Formula], concl: &Sequent) -> bool {
    premise
        .iter()
        .all(|f| minors.contains(f) || concl.contains(f))
}

fn principal_candidates(
    concl: &Sequent,
    hints: &Witness,
    shape: impl Fn(&Formula) -> bool,
) -> Result<Vec<Formula>, TaitError> {
    if let Some(text) = hints.get("principal") {
        let f = canon(&parse_formula(text).map_err(|e| bad("principal", e))?);
        if !concl.contains(&f) {
            return Err(TaitError::ShapeMismatch(format!(
                "principal {f} not in conclusion"
            )));
        }
        if !shape(&f) {
            return Err(TaitError::ShapeMismatch(format!(
                "principal {f} has the wrong connective"
            )));
        }
        return Ok(vec![f]);
    }
    let c: Vec<Formula> = concl.iter().filter(|f| shape(f)).cloned().collect();
    if c.is_empty() {
        return Err(TaitError::ShapeMismatch(
            "no principal formula of the right shape".into(),
        ));
    }
    Ok(c)
}

fn candidate_terms(
    premise: &Sequent,
    concl: &Sequent,
    hints: &Witness,
) -> Result<Vec<SetTerm>, TaitError> {
    if hints.contains_key("term") {
        return Ok(vec![w_term(hints, "term")?]);
    }
    let mut names: BTreeSet<String> = formulas::seq_free_vars(premise);
    names.extend(formulas::seq_free_vars(concl));
    let mut out: Vec<SetTerm> = names.into_iter().map(SetTerm::Var).collect();
    out.push(SetTerm::Empty);
    out.push(SetTerm::Omega);
    Ok(out)
}

fn check_eigen_set(concl: &Sequent, u: &str) -> Result<(), TaitError> {
    if formulas::seq_free_vars(concl).contains(u) {
        return Err(TaitError::EigenvariableViolation(u.to_string()));
    }
    Ok(())
}

/// Checks one rule application; returns how it was matched.
pub fn check_rule(
    concl: &Sequent,
    rule: RuleId,
    premises: &[&Sequent],
    eigen: Option<&str>,
    hints: &Witness,
) -> Result<RuleUse, TaitError> {
    if premises.len() != rule.arity() {
        return Err(TaitError::ShapeMismatch(format!(
            "rule {} takes {} premise(s), got {}",
            rule.name(),
            rule.arity(),
            premises.len()
        )));
    }
    let mut used = RuleUse {
        rule,
        principal: None,
        minors: vec![],
        term: None,
        rel: None,
        eigen: eigen.map(str::to_string),
        cut: None,
    };
    let need_eigen = || eigen.ok_or_else(|| TaitError::MissingWitness("eigen".into()));
    match rule {
        RuleId::Cut => {
            let (p1, p2) = (premises[0], premises[1]);
            let fits = |a: &Formula| {
                let na = canon(&negate(a));
                side_ok(p1, std::slice::from_ref(a), concl) && side_ok(p2, &[na], concl)
            };
            let found = if hints.contains_key("cut") {
                let a = canon(&w_formula(hints, "cut")?);
                if !fits(&a) {
                    return Err(TaitError::ShapeMismatch(format!(
                        "cut formula {a} does not fit"
                    )));
                }
                a
            } else {
                p1.iter()
                    .find(|a| fits(a))
                    .cloned()
                    .ok_or(TaitError::CutFormulaMissing)?
            };
            used.minors = vec![vec![found.clone()], vec![canon(&negate(&found))]];
            used.cut = Some(found);
            Ok(used)
        }
        RuleId::All | RuleId::Ball => {
            let u = need_eigen()?;
            check_eigen_set(concl, u)?;
            let want_bounded = rule == RuleId::Ball;
            let cands = principal_candidates(concl, hints, |f| match f {
                Formula::All(..) => !want_bounded,
                Formula::BAll(..) => want_bounded,
                _ => false,
            })?;
            for p in cands {
                let body = instantiate(&p, &SetTerm::var(u)).unwrap();
                let minor = match &p {
                    Formula::BAll(_, a, _) => {
                        canon(&or(formulas::nmem(SetTerm::var(u), a.clone()), body))
                    }
                    _ => canon(&body),
                };
                if side_ok(premises[0], std::slice::from_ref(&minor), concl) {
                    used.principal = Some(p);
                    used.minors = vec![vec![minor]];
                    return Ok(used);
                }
            }
            Err(TaitError::ShapeMismatch(
                "premise does not match any principal formula".into(),
            ))
        }
        RuleId::All2 => {
            let u = need_eigen()?;
            if formulas::seq_free_rel_vars(concl).contains(u) {
                return Err(TaitError::EigenvariableViolation(u.to_string()));
            }
            let cands = principal_candidates(concl, hints, |f| matches!(f, Formula::RelAll(..)))?;
            for p in cands {
                let minor = canon(&instantiate_rel(&p, u).unwrap());
                if side_ok(premises[0], std::slice::from_ref(&minor), concl) {
                    used.principal = Some(p);
                    used.minors = vec![vec![minor]];
                    return Ok(used);
                }
            }
            Err(TaitError::ShapeMismatch(
                "premise does not match any principal formula".into(),
            ))
        }
        RuleId::Ex | RuleId::Bex => {
            let bounded = rule == RuleId::Bex;
            let cands = principal_candidates(concl, hints, |f| match f {
                Formula::Ex(..) => !bounded,
                Formula::BEx(..) => bounded,
                _ => false,
            })?;
            let terms = candidate_terms(premises[0], concl, hints)?;
            for p in cands {
                for t in &terms {
                    let body = instantiate(&p, t).unwrap();
                    let minor = match &p {
                        Formula::BEx(_, a, _) => canon(&and(mem(t.clone(), a.clone()), body)),
                        _ => canon(&body),
                    };
                    // without a hint only accept a term whose instance really occurs
                    if !hints.contains_key("term") && !premises[0].contains(&minor) {
                        continue;
                    }
                    if side_ok(premises[0], std::slice::from_ref(&minor), concl) {
                        used.principal = Some(p);
                        used.minors = vec![vec![minor]];
                        used.term = Some(t.clone());
                        return Ok(used);
                    }
                }
            }
            Err(TaitError::ShapeMismatch(
                "no witness term matches the premise".into(),
            ))
        }
        RuleId::Ex2 => {
            let cands = principal_candidates(concl, hints, |f| matches!(f, Formula::RelEx(..)))?;
            let rels: Vec<String> = if hints.contains_key("rel") {
                vec![w_var(hints, "rel")?]
            } else {
                formulas::seq_free_rel_vars(premises[0])
                    .into_iter()
                    .collect()
            };
            for p in cands {
                for r in &rels {
                    let minor = canon(&instantiate_rel(&p, r).unwrap());
                    if !hints.contains_key("rel") && !premises[0].contains(&minor) {
                        continue;
                    }
                    if side_ok(premises[0], std::slice::from_ref(&minor), concl) {
                        used.principal = Some(p);
                        used.minors = vec![vec![minor]];
                        used.rel = Some(r.clone());
                        return Ok(used);
                    }
                }
            }
            Err(TaitError::ShapeMismatch(
                "no relation witness matches the premise".into(),
            ))
        }
        RuleId::Or => {
            let cands = principal_candidates(concl, hints, |f| matches!(f, Formula::Or(..)))?;
            for p in cands {
                let Formula::Or(a, b) = &p else {
                    unreachable!()
                };
                let minors = vec![(**a).clone(), (**b).clone()];
                if side_ok(premises[0], &minors, concl) {
                    used.principal = Some(p.clone());
                    used.minors = vec![minors];
                    return Ok(used);
                }
            }
            Err(TaitError::ShapeMismatch(
                "premise does not match any disjunction".into(),
            ))
        }
        RuleId::And => {
            let cands = principal_candidates(concl, hints, |f| matches!(f, Formula::And(..)))?;
            for p in cands {
                let Formula::And(a, b) = &p else {
                    unreachable!()
                };
                if side_ok(premises[0], std::slice::from_ref(a), concl)
                    && side_ok(premises[1], std::slice::from_ref(b), concl)
                {
                    used.principal = Some(p.clone());
                    used.minors = vec![vec![(**a).clone()], vec![(**b).clone()]];
                    return Ok(used);
                }
            }
            Err(TaitError::ShapeMismatch(
                "premises do not match any conjunction".into(),
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// proofs

/// One proof step as it appears in a proof file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaitStep {
    pub seq: Vec<Formula>,
    /// `axiom:<Id>` or `rule:<name>`.
    pub by: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub premises: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub witness: Witness,
}

impl TaitStep {
    pub fn sequent(&self) -> Sequent {
        formulas::sequent(self.seq.iter().cloned())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaitProof {
    pub steps: Vec<TaitStep>,
}

impl TaitProof {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("proof serializes")
    }

    pub fn end_sequent(&self) -> Sequent {
        self.steps.last().map(TaitStep::sequent).unwrap_or_default()
    }
}

/// How a checked step was justified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepInfo {
    Axiom {
        id: String,
        instance: Vec<Formula>,
        witness: Witness,
    },
    Rule {
        premises: Vec<usize>,
        used: RuleUse,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub step: usize,
    pub reason: String,
    pub error: TaitError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub ok: bool,
    pub length_k: usize,
    pub max_formula_length: usize,
    pub failures: Vec<Failure>,
}

pub fn check_step(
    reg: &AxiomRegistry,
    steps: &[Sequent],
    i: usize,
    step: &TaitStep,
) -> Result<StepInfo, TaitError> {
    let seq = &steps[i];
    for f in seq {
        if !formulas::is_l2set(f) {
            return Err(TaitError::NotL2Set(f.to_string()));
        }
    }
    if let Some(id) = step.by.strip_prefix("axiom:") {
        let instance = reg.instance(id, &step.witness)?;
        if instance.iter().all(|f| seq.contains(f)) {
            Ok(StepInfo::Axiom {
                id: id.to_string(),
                instance,
                witness: step.witness.clone(),
            })
        } else {
            Err(TaitError::AxiomMismatch(id.to_string()))
        }
    } else if let Some(name) = step.by.strip_prefix("rule:") {
        let rule =
            RuleId::from_name(name).ok_or_else(|| TaitError::UnknownRule(name.to_string()))?;
        if let Some(&p) = step.premises.iter().find(|&&p| p >= i) {
            return Err(TaitError::ForwardReference { premise: p });
        }
        let prem: Vec<&Sequent> = step.premises.iter().map(|&p| &steps[p]).collect();
        let used = check_rule(seq, rule, &prem, step.eigen.as_deref(), &step.witness)?;
        Ok(StepInfo::Rule {
            premises: step.premises.clone(),
            used,
        })
    } else {
        Err(TaitError::UnknownRule(step.by.clone()))
    }
}

/// Checks every step; failures are collected, not thrown.
pub fn check_proof_with(reg: &AxiomRegistry, p: &TaitProof) -> (Report, Vec<Option<StepInfo>>) {
    let seqs: Vec<Sequent> = p.steps.iter().map(TaitStep::sequent).collect();
    let mut failures = vec![];
    let mut infos = vec![];
    for (i, step) in p.steps.iter().enumerate() {
        match check_step(reg, &seqs, i, step) {
            Ok(info) => infos.push(Some(info)),
            Err(e) => {
                failures.push(Failure {
                    step: i,
                    reason: e.to_string(),
                    error: e,
                });
                infos.push(None);
            }
        }
    }
    let max_formula_length = seqs.iter().flatten().map(length).max().unwrap_or(0);
    if p.steps.is_empty() {
        failures.push(Failure {
            step: 0,
            reason: "empty proof".into(),
            error: TaitError::ShapeMismatch("empty proof".into()),
        });
    }
    let report = Report {
        ok: failures.is_empty(),
        length_k: p.steps.len(),
        max_formula_length,
        failures,
    };
    (report, infos)
}

pub fn check_proof(p: &TaitProof) -> Report {
    check_proof_with(&AxiomRegistry::default(), p).0
}

// ---------------------------------------------------------------------------
// golden corpus and mutants

const GOLDEN: [(&str, &str); 13] = [
    ("tnd", include_str!("../golden/tnd.json")),
    ("equality", include_str!("../golden/equality.json")),
    ("sub_omega", include_str!("../golden/sub_omega.json")),
    ("pair", include_str!("../golden/pair.json")),
    ("union", include_str!("../golden/union.json")),
    ("empty_set", include_str!("../golden/empty_set.json")),
    ("infinity", include_str!("../golden/infinity.json")),
    ("sep", include_str!("../golden/sep.json")),
    ("col", include_str!("../golden/col.json")),
    ("eps_ind", include_str!("../golden/eps_ind.json")),
    ("ca", include_str!("../golden/ca.json")),
    ("rules", include_str!("../golden/rules.json")),
    ("cut", include_str!("../golden/cut.json")),
];

/// The shipped corpus of valid proofs, by name.
pub fn golden_corpus() -> Vec<(&'static str, TaitProof)> {
    GOLDEN
        .iter()
        .map(|(name, text)| {
            (
                *name,
                TaitProof::from_json(text).expect("golden proof parses"),
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MutationKind {
    DropPremise,
    Retag,
    EigenIntoConclusion,
    NonDelta0Witness,
    ForwardReference,
    DropAxiomFormula,
}

#[derive(Debug, Clone)]
pub struct Mutant {
    pub kind: MutationKind,
    pub step: usize,
    pub proof: TaitProof,
}

/// Single-step corruptions of `p`, each of which must be rejected at `step`.
pub fn mutants(p: &TaitProof) -> Vec<Mutant> {
    let reg = AxiomRegistry::default();
    let mut out = vec![];
    let mut push = |kind, step, proof| out.push(Mutant { kind, step, proof });
    for (i, s) in p.steps.iter().enumerate() {
        if s.by.starts_with("rule:") {
            for j in 0..s.premises.len() {
                let mut q = p.clone();
                q.steps[i].premises.remove(j);
                push(MutationKind::DropPremise, i, q);
            }
            let rule = RuleId::from_name(&s.by[5..]).unwrap();
            let other = if rule.arity() == 2 {
                RuleId::Or
            } else {
                RuleId::Cut
            };
            let mut q = p.clone();
            q.steps[i].by = format!("rule:{}", other.name());
            push(MutationKind::Retag, i, q);
            if !s.premises.is_empty() {
                let mut q = p.clone();
                q.steps[i].premises[0] = i;
                push(MutationKind::ForwardReference, i, q);
            }
            if let (Some(u), RuleId::All | RuleId::Ball) = (&s.eigen, rule) {
                let mut q = p.clone();
                q.steps[i].seq.push(mem(SetTerm::var(u), SetTerm::var(u)));
                push(MutationKind::EigenIntoConclusion, i, q);
            }
            if let (Some(u), RuleId::All2) = (&s.eigen, rule) {
                let mut q = p.clone();
                q.steps[i].seq.push(Formula::Rel(u.clone(), SetTerm::Empty));
                push(MutationKind::EigenIntoConclusion, i, q);
            }
        } else if let Some(id) = s.by.strip_prefix("axiom:") {
            let Ok(instance) = reg.instance(id, &s.witness) else {
                continue;
            };
            for f in &instance {
                let mut q = p.clone();
                q.steps[i].seq.retain(|g| canon(g) != *f);
                push(MutationKind::DropAxiomFormula, i, q);
            }
            if s.witness.contains_key("D") {
                let d = w_formula(&s.witness, "D").unwrap();
                let z = fresh_name("z", &free_vars(&d));
                let bad_d = ex(&z, and(mem(SetTerm::var(&z), SetTerm::var(&z)), d));
                let mut q = p.clone();
                q.steps[i].witness.insert("D".into(), bad_d.to_string());
                push(MutationKind::NonDelta0Witness, i, q);
            }
            let mut q = p.clone();
            q.steps[i].by = "rule:or".into();
            push(MutationKind::Retag, i, q);
        }
    }
    out
}
