//! Normal-form ordinal notations below ε_{Ω+1}.
//!
//! A term is a non-increasing sum of principal terms, each of which is Ω,
//! ψ(a) or ω^e. Normal forms are unique, so structural equality is ordinal
//! equality.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrdError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("not in C: argument {0} of psi is outside its own C-set")]
    NotInC(String),
    #[error("not a normal form: {0}")]
    NotNormal(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Principal {
    BigOmega,
    Psi(OrdTerm),
    WPow(OrdTerm),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct OrdTerm(Vec<Principal>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Zero,
    Successor,
    Limit,
}

/// Depth/rank pair of a derivation, plus an optional formula-length bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrdBound {
    pub depth: OrdTerm,
    pub rank: OrdTerm,
    pub p: Option<usize>,
}

impl Principal {
    /// The exponent of the principal term when written as ω^x.
    fn log_cmp(&self, other: &Principal) -> Ordering {
        use Principal::*;
        match (self, other) {
            (WPow(e), WPow(f)) => compare(e, f),
            (Psi(a), Psi(b)) => compare(a, b),
            (Psi(_), BigOmega) => Ordering::Less,
            (BigOmega, Psi(_)) => Ordering::Greater,
            (BigOmega, BigOmega) => Ordering::Equal,
            (WPow(e), p) => cmp_seq(&e.0, std::slice::from_ref(p)),
            (p, WPow(f)) => cmp_seq(std::slice::from_ref(p), &f.0),
        }
    }

    fn size(&self) -> usize {
        match self {
            Principal::BigOmega => 1,
            Principal::Psi(a) | Principal::WPow(a) => 1 + a.size(),
        }
    }
}

fn cmp_seq(a: &[Principal], b: &[Principal]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.log_cmp(y) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

pub fn compare(a: &OrdTerm, b: &OrdTerm) -> Ordering {
    cmp_seq(&a.0, &b.0)
}

impl PartialOrd for OrdTerm {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdTerm {
    fn cmp(&self, other: &Self) -> Ordering {
        compare(self, other)
    }
}

impl OrdTerm {
    pub fn zero() -> Self {
        OrdTerm(Vec::new())
    }

    pub fn one() -> Self {
        Self::nat(1)
    }

    pub fn nat(n: u64) -> Self {
        OrdTerm((0..n).map(|_| Principal::WPow(OrdTerm::zero())).collect())
    }

    /// ω
    pub fn omega() -> Self {
        omega_pow(&Self::one())
    }

    /// Ω
    pub fn big_omega() -> Self {
        OrdTerm(vec![Principal::BigOmega])
    }

    pub fn principals(&self) -> &[Principal] {
        &self.0
    }

    pub fn from_principal(p: Principal) -> Self {
        OrdTerm(vec![p])
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_nat(&self) -> Option<u64> {
        self.0
            .iter()
            .all(|p| matches!(p, Principal::WPow(e) if e.is_zero()))
            .then_some(self.0.len() as u64)
    }

    pub fn succ(&self) -> Self {
        nf_sum(self, &Self::one())
    }

    /// Predecessor of a successor ordinal.
    pub fn pred(&self) -> Option<Self> {
        match classify(self) {
            Kind::Successor => Some(OrdTerm(self.0[..self.0.len() - 1].to_vec())),
            _ => None,
        }
    }

    pub fn size(&self) -> usize {
        if self.0.is_empty() {
            1
        } else {
            self.0.iter().map(Principal::size).sum::<usize>() + self.0.len() - 1
        }
    }

    pub fn is_principal(&self) -> bool {
        self.0.len() == 1
    }

    /// The ψ-argument of a single ψ-term.
    pub fn psi_arg(&self) -> Option<&OrdTerm> {
        match self.0.as_slice() {
            [Principal::Psi(a)] => Some(a),
            _ => None,
        }
    }

    /// Every ψ-argument occurring anywhere in the term.
    pub fn psi_subterms(&self) -> Vec<&OrdTerm> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a OrdTerm, out: &mut Vec<&'a OrdTerm>) {
            for p in &t.0 {
                match p {
                    Principal::BigOmega => {}
                    Principal::WPow(e) => walk(e, out),
                    Principal::Psi(a) => {
                        out.push(a);
                        walk(a, out);
                    }
                }
            }
        }
        walk(self, &mut out);
        out
    }

    /// Checks every normal-form invariant recursively.
    pub fn check_nf(&self) -> Result<(), OrdError> {
        for w in self.0.windows(2) {
            if w[0].log_cmp(&w[1]) == Ordering::Less {
                return Err(OrdError::NotNormal(format!("{self}: summands increase")));
            }
        }
        for p in &self.0 {
            match p {
                Principal::BigOmega => {}
                Principal::WPow(e) => {
                    if matches!(e.0.as_slice(), [Principal::BigOmega] | [Principal::Psi(_)]) {
                        return Err(OrdError::NotNormal(format!("w^({e}) is an epsilon number")));
                    }
                    e.check_nf()?;
                }
                Principal::Psi(a) => {
                    a.check_nf()?;
                    if !in_c(a, a) {
                        return Err(OrdError::NotInC(a.to_string()));
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn nf_sum(a: &OrdTerm, b: &OrdTerm) -> OrdTerm {
    let Some(lead) = b.0.first() else {
        return a.clone();
    };
    let mut out: Vec<Principal> =
        a.0.iter()
            .take_while(|p| p.log_cmp(lead) != Ordering::Less)
            .cloned()
            .collect();
    out.extend(b.0.iter().cloned());
    OrdTerm(out)
}

pub fn natural_sum(a: &OrdTerm, b: &OrdTerm) -> OrdTerm {
    let mut out = Vec::with_capacity(a.0.len() + b.0.len());
    let (mut i, mut j) = (0, 0);
    while i < a.0.len() && j < b.0.len() {
        if a.0[i].log_cmp(&b.0[j]) != Ordering::Less {
            out.push(a.0[i].clone());
            i += 1;
        } else {
            out.push(b.0[j].clone());
            j += 1;
        }
    }
    out.extend_from_slice(&a.0[i..]);
    out.extend_from_slice(&b.0[j..]);
    OrdTerm(out)
}

pub fn omega_pow(e: &OrdTerm) -> OrdTerm {
    match e.0.as_slice() {
        [Principal::BigOmega] | [Principal::Psi(_)] => e.clone(),
        _ => OrdTerm(vec![Principal::WPow(e.clone())]),
    }
}

/// ω·a, the only product the rank calculus needs.
pub fn omega_times(a: &OrdTerm) -> OrdTerm {
    let one = OrdTerm::one();
    let mut out = Vec::with_capacity(a.0.len());
    for p in &a.0 {
        let q = match p {
            Principal::WPow(e) => omega_pow(&nf_sum(&one, e)),
            _ => OrdTerm::from_principal(p.clone()),
        };
        out.extend(q.0);
    }
    OrdTerm(out)
}

pub fn psi(a: &OrdTerm) -> Result<OrdTerm, OrdError> {
    if in_c(a, a) {
        Ok(OrdTerm(vec![Principal::Psi(a.clone())]))
    } else {
        Err(OrdError::NotInC(a.to_string()))
    }
}

/// Membership of a normal-form term in C(a, 0).
pub fn in_c(t: &OrdTerm, a: &OrdTerm) -> bool {
    t.0.iter().all(|p| match p {
        Principal::BigOmega => true,
        Principal::WPow(e) => in_c(e, a),
        Principal::Psi(c) => compare(c, a) == Ordering::Less,
    })
}

pub fn classify(t: &OrdTerm) -> Kind {
    match t.0.last() {
        None => Kind::Zero,
        Some(Principal::WPow(e)) if e.is_zero() => Kind::Successor,
        Some(_) => Kind::Limit,
    }
}

pub fn omega_tower(n: usize, xi: &OrdTerm) -> OrdTerm {
    (0..n).fold(xi.clone(), |acc, _| omega_pow(&acc))
}

pub fn max_ord<'a>(a: &'a OrdTerm, b: &'a OrdTerm) -> &'a OrdTerm {
    if compare(a, b) == Ordering::Less {
        b
    } else {
        a
    }
}

/// All normal forms of size at most `budget`, grouped by increasing size.
pub fn enumerate_upto(budget: usize) -> Vec<OrdTerm> {
    Enumerator::new(budget).all()
}

/// Size-indexed tables of principal terms and nonzero terms.
pub struct Enumerator {
    principals: Vec<Vec<Principal>>,
    terms: Vec<Vec<OrdTerm>>,
}

impl Enumerator {
    pub fn new(budget: usize) -> Self {
        let mut en = Enumerator {
            principals: vec![Vec::new(); budget + 1],
            terms: vec![Vec::new(); budget + 1],
        };
        for s in 1..=budget {
            en.fill(s);
        }
        en
    }

    fn fill(&mut self, s: usize) {
        let mut ps = Vec::new();
        if s == 1 {
            ps.push(Principal::BigOmega);
        } else {
            let mut args = Vec::new();
            if s == 2 {
                args.push(OrdTerm::zero());
            }
            args.extend(self.terms[s - 1].iter().cloned());
            for a in &args {
                if in_c(a, a) {
                    ps.push(Principal::Psi(a.clone()));
                }
            }
            for e in args {
                if !matches!(e.0.as_slice(), [Principal::BigOmega] | [Principal::Psi(_)]) {
                    ps.push(Principal::WPow(e));
                }
            }
        }
        let mut ts: Vec<OrdTerm> = ps.iter().map(|p| OrdTerm(vec![p.clone()])).collect();
        // first summand of size s1, then '+', then a tail of size s - s1 - 1
        for s1 in 1..s.saturating_sub(1) {
            let rest = s - s1 - 1;
            for p in &self.principals[s1] {
                for tail in &self.terms[rest] {
                    if p.log_cmp(&tail.0[0]) != Ordering::Less {
                        let mut v = Vec::with_capacity(tail.0.len() + 1);
                        v.push(p.clone());
                        v.extend(tail.0.iter().cloned());
                        ts.push(OrdTerm(v));
                    }
                }
            }
        }
        self.principals[s] = ps;
        self.terms[s] = ts;
    }

    /// Nonzero terms of exactly size `s`.
    pub fn exact(&self, s: usize) -> &[OrdTerm] {
        &self.terms[s]
    }

    pub fn all(&self) -> Vec<OrdTerm> {
        let mut out = vec![OrdTerm::zero()];
        for ts in &self.terms {
            out.extend(ts.iter().cloned());
        }
        out
    }
}

// ---------------------------------------------------------------------------
// text syntax

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    calc: bool,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, OrdError> {
        Err(OrdError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), OrdError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn expr(&mut self) -> Result<OrdTerm, OrdError> {
        let mut acc = self.atom()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.atom()?;
                    acc = nf_sum(&acc, &rhs);
                }
                Some(b'#') if self.calc => {
                    self.pos += 1;
                    let rhs = self.atom()?;
                    acc = natural_sum(&acc, &rhs);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn atom(&mut self) -> Result<OrdTerm, OrdError> {
        match self.peek() {
            Some(b'W') => {
                self.pos += 1;
                Ok(OrdTerm::big_omega())
            }
            Some(b'w') => {
                self.pos += 1;
                if self.peek() != Some(b'^') {
                    return Ok(OrdTerm::omega());
                }
                self.pos += 1;
                self.expect(b'(')?;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(omega_pow(&e))
            }
            Some(b'p') => {
                self.pos += 1;
                self.expect(b'(')?;
                let a = self.expr()?;
                self.expect(b')')?;
                psi(&a)
            }
            Some(b'(') => {
                self.pos += 1;
                let t = self.expr()?;
                self.expect(b')')?;
                Ok(t)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match text.parse::<u64>() {
                    Ok(n) if n <= 1 << 16 => Ok(OrdTerm::nat(n)),
                    _ => {
                        self.pos = start;
                        self.err("numeral too large")
                    }
                }
            }
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of input"),
        }
    }
}

fn parse_with(text: &str, calc: bool) -> Result<OrdTerm, OrdError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        calc,
    };
    let t = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(t)
}

/// Parses `0`, `W`, `w^(t)`, `p(t)`, numerals and `t + t`, normalizing sums.
pub fn parse(text: &str) -> Result<OrdTerm, OrdError> {
    parse_with(text, false)
}

/// Like [`parse`], additionally accepting `#` for the natural sum.
pub fn parse_calc(text: &str) -> Result<OrdTerm, OrdError> {
    parse_with(text, true)
}

impl std::str::FromStr for OrdTerm {
    type Err = OrdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

pub fn render(t: &OrdTerm) -> String {
    t.to_string()
}

impl fmt::Display for OrdTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        let mut i = 0;
        while i < self.0.len() {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match &self.0[i] {
                Principal::WPow(e) if e.is_zero() => {
                    let run = self.0[i..]
                        .iter()
                        .take_while(|p| matches!(p, Principal::WPow(e) if e.is_zero()))
                        .count();
                    write!(f, "{run}")?;
                    i += run;
                    continue;
                }
                Principal::WPow(e) => write!(f, "w^({e})")?,
                Principal::Psi(a) => write!(f, "p({a})")?,
                Principal::BigOmega => f.write_str("W")?,
            }
            i += 1;
        }
        Ok(())
    }
}
