//! Suitable trees as codes for sets: bisimulation equality =*, membership
//! ∈*, the canonical trees n* and ω*, α-tree rankings, the merge
//! construction used for (BC), and a budgeted three-valued evaluator for
//! B-formulas under tree assignments.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::formulas::{classes, Formula, SetTerm};
use crate::ordinals::{nf_sum, OrdTerm};

pub type Seq = Vec<u64>;

/// n* is materialized only up to this n.
pub const MATERIALIZE_MAX: u64 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("not a suitable tree: {0}")]
    NotSuitable(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("formula outside class B: {0}")]
    NotInB(String),
    #[error("no tree assigned to {0}")]
    Unassigned(String),
    #[error("bad ranking: {0}")]
    BadRanking(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeSet {
    Finite(BTreeSet<Seq>),
    NStar(u64),
    OmegaStar,
}

impl fmt::Display for TreeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TreeSet::NStar(n) => write!(f, "n*:{n}"),
            TreeSet::OmegaStar => f.write_str("omega*"),
            TreeSet::Finite(nodes) => {
                let parts: Vec<String> = nodes
                    .iter()
                    .map(|s| {
                        format!(
                            "<{}>",
                            s.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
                        )
                    })
                    .collect();
                write!(f, "{{{}}}", parts.join(" "))
            }
        }
    }
}

pub fn concat(a: &[u64], b: &[u64]) -> Seq {
    let mut s = a.to_vec();
    s.extend_from_slice(b);
    s
}

/// σ ⊂ τ: σ is a proper initial segment of τ.
pub fn proper_prefix(s: &[u64], t: &[u64]) -> bool {
    s.len() < t.len() && t.starts_with(s)
}

fn strictly_descending(s: &[u64]) -> bool {
    s.windows(2).all(|w| w[0] > w[1])
}

impl TreeSet {
    pub fn leaf() -> Self {
        TreeSet::Finite([vec![]].into())
    }

    /// Builds a finite tree, checking nonemptiness and prefix closure.
    pub fn finite<I: IntoIterator<Item = Seq>>(nodes: I) -> Result<Self, TreeError> {
        let t = TreeSet::Finite(nodes.into_iter().collect());
        if is_suitable(&t) {
            Ok(t)
        } else {
            Err(TreeError::NotSuitable(t.to_string()))
        }
    }

    pub fn contains(&self, s: &[u64]) -> bool {
        match self {
            TreeSet::Finite(n) => n.contains(s),
            TreeSet::NStar(n) => strictly_descending(s) && s.first().map_or(true, |&h| h < *n),
            TreeSet::OmegaStar => strictly_descending(s),
        }
    }

    /// Labels n with ⟨n⟩ in the tree, if there are finitely many.
    pub fn child_labels(&self) -> Option<Vec<u64>> {
        match self {
            TreeSet::Finite(nodes) => Some(
                nodes
                    .iter()
                    .filter(|s| s.len() == 1)
                    .map(|s| s[0])
                    .collect(),
            ),
            TreeSet::NStar(n) => Some((0..*n).collect()),
            TreeSet::OmegaStar => None,
        }
    }

    /// Explicit node set; n* above [`MATERIALIZE_MAX`] and ω* are refused.
    pub fn materialize(&self) -> Result<BTreeSet<Seq>, TreeError> {
        match self {
            TreeSet::Finite(n) => Ok(n.clone()),
            TreeSet::NStar(n) if *n <= MATERIALIZE_MAX => {
                let mut out = BTreeSet::new();
                for mask in 0u64..(1 << n) {
                    out.insert((0..*n).rev().filter(|i| mask >> i & 1 == 1).collect());
                }
                Ok(out)
            }
            TreeSet::NStar(n) => Err(TreeError::Budget(format!("{n}* has 2^{n} nodes"))),
            TreeSet::OmegaStar => Err(TreeError::Budget("omega* is infinite".into())),
        }
    }

    pub fn node_count(&self) -> Option<usize> {
        match self {
            TreeSet::Finite(n) => Some(n.len()),
            TreeSet::NStar(n) if *n < 63 => Some(1usize << n),
            _ => None,
        }
    }

    pub fn to_finite(&self) -> Result<TreeSet, TreeError> {
        Ok(TreeSet::Finite(self.materialize()?))
    }
}

pub fn subtree(t: &TreeSet, s: &[u64]) -> Option<TreeSet> {
    if !t.contains(s) {
        return None;
    }
    Some(match t {
        TreeSet::Finite(nodes) => TreeSet::Finite(
            nodes
                .iter()
                .filter(|n| n.starts_with(s))
                .map(|n| n[s.len()..].to_vec())
                .collect(),
        ),
        TreeSet::NStar(n) => TreeSet::NStar(s.last().copied().unwrap_or(*n)),
        TreeSet::OmegaStar => match s.last() {
            None => TreeSet::OmegaStar,
            Some(&k) => TreeSet::NStar(k),
        },
    })
}

pub fn oplus(s: &TreeSet, t: &TreeSet) -> Result<TreeSet, TreeError> {
    let mut out: BTreeSet<Seq> = [vec![]].into();
    for n in s.materialize()? {
        out.insert(concat(&[0], &n));
    }
    for n in t.materialize()? {
        out.insert(concat(&[1], &n));
    }
    Ok(TreeSet::Finite(out))
}

pub fn is_suitable(t: &TreeSet) -> bool {
    match t {
        TreeSet::Finite(nodes) => {
            nodes.contains(&vec![])
                && nodes
                    .iter()
                    .all(|s| s.is_empty() || nodes.contains(&s[..s.len() - 1]))
        }
        TreeSet::NStar(_) | TreeSet::OmegaStar => true,
    }
}

// ---------------------------------------------------------------------------
// bisimulation

/// Child lists of a finite tree, root at index 0.
#[derive(Debug, Clone)]
struct Arena {
    kids: Vec<Vec<u32>>,
}

impl Arena {
    fn new() -> Self {
        Arena { kids: vec![vec![]] }
    }

    /// Grafts `nodes` (a prefix-closed set) below `parent`; returns the index of its root.
    fn graft(&mut self, parent: Option<u32>, nodes: &BTreeSet<Seq>) -> u32 {
        let mut index: HashMap<&[u64], u32> = HashMap::with_capacity(nodes.len());
        let mut root = 0;
        for s in nodes {
            let id = self.kids.len() as u32;
            self.kids.push(vec![]);
            if s.is_empty() {
                root = id;
                if let Some(p) = parent {
                    self.kids[p as usize].push(id);
                }
            } else {
                let up = index[&s[..s.len() - 1]];
                self.kids[up as usize].push(id);
            }
            index.insert(s.as_slice(), id);
        }
        root
    }

    fn from_nodes(nodes: &BTreeSet<Seq>) -> (Self, Vec<Seq>) {
        let mut a = Arena { kids: vec![] };
        a.graft(None, nodes);
        (a, nodes.iter().cloned().collect())
    }

    /// Coarsest partition stable under "same set of child blocks": the
    /// greatest relation satisfying both Iso clauses.
    fn refine(&self) -> Vec<u32> {
        let n = self.kids.len();
        let mut class = vec![0u32; n];
        let mut count = 1usize;
        let mut sig: Vec<u32> = Vec::new();
        loop {
            let mut ids: HashMap<Vec<u32>, u32> = HashMap::with_capacity(count * 2);
            let mut next = vec![0u32; n];
            for i in 0..n {
                sig.clear();
                sig.push(class[i]);
                let start = sig.len();
                sig.extend(self.kids[i].iter().map(|&c| class[c as usize]));
                sig[start..].sort_unstable();
                let mut w = start;
                for r in start..sig.len() {
                    if r == start || sig[r] != sig[w - 1] {
                        sig[w] = sig[r];
                        w += 1;
                    }
                }
                sig.truncate(w);
                let fresh = ids.len() as u32;
                next[i] = *ids.entry(sig.clone()).or_insert(fresh);
            }
            let new_count = ids.len();
            class = next;
            if new_count == count {
                return class;
            }
            count = new_count;
        }
    }
}

/// The relation X with Iso(X, T), as a partition of T's nodes.
#[derive(Debug, Clone)]
pub struct Bisim {
    nodes: Vec<Seq>,
    index: HashMap<Seq, usize>,
    class: Vec<u32>,
}

impl Bisim {
    pub fn related(&self, s: &[u64], t: &[u64]) -> bool {
        match (self.index.get(s), self.index.get(t)) {
            (Some(&i), Some(&j)) => self.class[i] == self.class[j],
            _ => false,
        }
    }

    pub fn class_of(&self, s: &[u64]) -> Option<u32> {
        self.index.get(s).map(|&i| self.class[i])
    }

    pub fn nodes(&self) -> &[Seq] {
        &self.nodes
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Seq, &Seq)> + '_ {
        let n = self.nodes.len();
        (0..n).flat_map(move |i| {
            (0..n)
                .filter(move |&j| self.class[i] == self.class[j])
                .map(move |j| (&self.nodes[i], &self.nodes[j]))
        })
    }

    pub fn pair_count(&self) -> usize {
        let mut sizes: HashMap<u32, usize> = HashMap::new();
        for &c in &self.class {
            *sizes.entry(c).or_default() += 1;
        }
        sizes.values().map(|k| k * k).sum()
    }
}

pub fn iso(t: &TreeSet) -> Result<Bisim, TreeError> {
    let nodes = t.materialize()?;
    let (arena, order) = Arena::from_nodes(&nodes);
    let class = arena.refine();
    let index = order
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(Bisim {
        nodes: order,
        index,
        class,
    })
}

/// Refinement on S ⊕ T; returns (class of ⟨0⟩, class of ⟨1⟩, classes of ⟨1,n⟩).
fn oplus_classes(s: &BTreeSet<Seq>, t: &BTreeSet<Seq>) -> (u32, u32, Vec<u32>) {
    let mut arena = Arena::new();
    let rs = arena.graft(Some(0), s);
    let rt = arena.graft(Some(0), t);
    let class = arena.refine();
    let kids = arena.kids[rt as usize]
        .iter()
        .map(|&k| class[k as usize])
        .collect();
    (class[rs as usize], class[rt as usize], kids)
}

/// Minimal node count of a tree coding the von Neumann numeral n.
fn numeral_min_nodes(n: u64) -> u128 {
    if n >= 127 {
        u128::MAX
    } else {
        1u128 << n
    }
}

fn height_finite(nodes: &BTreeSet<Seq>) -> u64 {
    let root_len = nodes.iter().next().map_or(0, Vec::len);
    nodes
        .iter()
        .map(|s| (s.len() - root_len) as u64)
        .max()
        .unwrap_or(0)
}

/// n with T =* n*, for finite T.
fn numeral_of(nodes: &BTreeSet<Seq>) -> Result<Option<u64>, TreeError> {
    let h = height_finite(nodes);
    if (nodes.len() as u128) < numeral_min_nodes(h) {
        return Ok(None);
    }
    let star = TreeSet::NStar(h).materialize()?;
    let (a, b, _) = oplus_classes(nodes, &star);
    Ok((a == b).then_some(h))
}

pub fn eq_star(s: &TreeSet, t: &TreeSet) -> Result<bool, TreeError> {
    use TreeSet::*;
    match (s, t) {
        (OmegaStar, OmegaStar) => Ok(true),
        (NStar(m), NStar(n)) => Ok(m == n),
        (Finite(a), Finite(b)) => {
            let (x, y, _) = oplus_classes(a, b);
            Ok(x == y)
        }
        (Finite(a), NStar(n)) | (NStar(n), Finite(a)) => {
            if (a.len() as u128) < numeral_min_nodes(*n) {
                return Ok(false);
            }
            let (x, y, _) = oplus_classes(a, &NStar(*n).materialize()?);
            Ok(x == y)
        }
        (Finite(a), OmegaStar) | (OmegaStar, Finite(a)) => {
            // ω*'s immediate subtrees are all n*; the finite side has finitely
            // many children, so some numeral up to their count is missed
            let kids = Finite(a.clone()).child_labels().unwrap_or_default();
            for n in 0..=kids.len() as u64 {
                let mut hit = false;
                for &k in &kids {
                    let sub = subtree(&Finite(a.clone()), &[k]).unwrap();
                    if eq_star(&sub, &NStar(n))? {
                        hit = true;
                        break;
                    }
                }
                if !hit {
                    return Ok(false);
                }
            }
            unreachable!(
                "a finite tree cannot cover {} numerals with {} children",
                kids.len() + 1,
                kids.len()
            )
        }
        (NStar(_), OmegaStar) | (OmegaStar, NStar(_)) => Ok(false),
    }
}

pub fn mem_star(s: &TreeSet, t: &TreeSet) -> Result<bool, TreeError> {
    use TreeSet::*;
    match (s, t) {
        (OmegaStar, _) => Ok(false),
        (NStar(m), NStar(n)) => Ok(m < n),
        (NStar(_), OmegaStar) => Ok(true),
        (Finite(a), OmegaStar) => Ok(numeral_of(a)?.is_some()),
        (Finite(a), NStar(n)) => Ok(numeral_of(a)?.is_some_and(|m| m < *n)),
        (Finite(a), Finite(b)) => {
            let (x, _, kids) = oplus_classes(a, b);
            Ok(kids.contains(&x))
        }
        (NStar(m), Finite(b)) => {
            if (b.len() as u128) <= numeral_min_nodes(*m) {
                return Ok(false);
            }
            let (x, _, kids) = oplus_classes(&NStar(*m).materialize()?, b);
            Ok(kids.contains(&x))
        }
    }
}

/// S ⊆* T: every immediate subtree of S is ∈* T.
pub fn subset_star(s: &TreeSet, t: &TreeSet) -> Result<bool, TreeError> {
    match s.child_labels() {
        Some(labels) => {
            for k in labels {
                if !mem_star(&subtree(s, &[k]).unwrap(), t)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        None => match t {
            TreeSet::OmegaStar => Ok(true),
            _ => Ok(false),
        },
    }
}

// ---------------------------------------------------------------------------
// α-trees

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ranking {
    Explicit(BTreeMap<Seq, OrdTerm>),
    /// f(⟨⟩) = ω, f(⟨n₁…n_r⟩) = n_r on ω*.
    OmegaStar,
}

impl Ranking {
    pub fn value(&self, s: &[u64]) -> Option<OrdTerm> {
        match self {
            Ranking::Explicit(m) => m.get(s).cloned(),
            Ranking::OmegaStar => match s.last() {
                None => Some(OrdTerm::omega()),
                Some(&k) => Some(OrdTerm::nat(k)),
            },
        }
    }

    pub fn root(&self) -> Option<OrdTerm> {
        self.value(&[])
    }
}

/// Checks that `f` maps T into ordinals below α and strictly decreases
/// along proper extensions. ω* is checked on its nodes with entries < `probe`.
pub fn check_ranking(t: &TreeSet, f: &Ranking, alpha: &OrdTerm, probe: u64) -> bool {
    let nodes: BTreeSet<Seq> = match t {
        TreeSet::OmegaStar => {
            let mut out: BTreeSet<Seq> = [vec![]].into();
            for k in 0..probe {
                for s in TreeSet::NStar(k.min(MATERIALIZE_MAX))
                    .materialize()
                    .unwrap()
                {
                    out.insert(concat(&[k], &s));
                }
            }
            out
        }
        _ => match t.materialize() {
            Ok(n) => n,
            Err(_) => return false,
        },
    };
    nodes.iter().all(|s| {
        let Some(v) = f.value(s) else { return false };
        if v >= *alpha {
            return false;
        }
        match s.split_last() {
            None => true,
            Some((_, up)) => f.value(up).is_some_and(|w| v < w),
        }
    })
}

/// Algorithm (a): rank every node by the height of its subtree.
pub fn alpha_tree_height(t: &TreeSet, alpha: &OrdTerm) -> Result<Option<Ranking>, TreeError> {
    if let TreeSet::OmegaStar = t {
        return Ok((OrdTerm::omega() < *alpha).then_some(Ranking::OmegaStar));
    }
    let nodes = t.materialize()?;
    let mut height: BTreeMap<Seq, u64> = BTreeMap::new();
    // reverse lexicographic order visits extensions before their prefixes
    for s in nodes.iter().rev() {
        let h = height.get(s).copied().unwrap_or(0);
        height.entry(s.clone()).or_insert(0);
        if let Some((_, up)) = s.split_last() {
            let e = height.entry(up.to_vec()).or_insert(0);
            *e = (*e).max(h + 1);
        }
    }
    let root = height[&vec![]];
    if OrdTerm::nat(root) >= *alpha {
        return Ok(None);
    }
    Ok(Some(Ranking::Explicit(
        height
            .into_iter()
            .map(|(s, h)| (s, OrdTerm::nat(h)))
            .collect(),
    )))
}

/// Algorithm (b): the stages g(β) = {σ : every proper extension of σ lies in
/// some earlier stage}, taken over β < α until they exhaust T; f(σ) is the
/// least β with σ ∈ g(β).
pub fn alpha_tree_stages(t: &TreeSet, alpha: &OrdTerm) -> Result<Option<Ranking>, TreeError> {
    if let TreeSet::OmegaStar = t {
        // g(k) holds the nodes whose last entry is ≤ k; the root first
        // appears at stage ω
        return Ok((OrdTerm::omega() < *alpha).then_some(Ranking::OmegaStar));
    }
    let nodes = t.materialize()?;
    let mut f: BTreeMap<Seq, OrdTerm> = BTreeMap::new();
    let mut beta = 0u64;
    while f.len() < nodes.len() {
        let b = OrdTerm::nat(beta);
        if b >= *alpha {
            return Ok(None);
        }
        let stage: Vec<Seq> = nodes
            .iter()
            .filter(|s| !f.contains_key(*s))
            .filter(|s| {
                nodes
                    .iter()
                    .filter(|u| proper_prefix(s, u))
                    .all(|u| f.contains_key(u))
            })
            .cloned()
            .collect();
        for s in stage {
            f.insert(s, b.clone());
        }
        beta += 1;
    }
    Ok(Some(Ranking::Explicit(f)))
}

pub fn alpha_tree(t: &TreeSet, alpha: &OrdTerm) -> Result<Option<Ranking>, TreeError> {
    let r = alpha_tree_height(t, alpha)?;
    debug_assert_eq!(
        r.is_some(),
        alpha_tree_stages(t, alpha)
            .map(|x| x.is_some())
            .unwrap_or(r.is_some())
    );
    Ok(r)
}

pub fn height(t: &TreeSet) -> Result<OrdTerm, TreeError> {
    match t {
        TreeSet::OmegaStar => Ok(OrdTerm::omega()),
        TreeSet::NStar(n) => Ok(OrdTerm::nat(*n)),
        TreeSet::Finite(nodes) => Ok(OrdTerm::nat(height_finite(nodes))),
    }
}

/// Builds {⟨⟩} ∪ {⟨2ⁿ3ᵏ⟩⋆σ : σ ∈ child(n,k)} ranked by α+ℓ₀ at the root and by
/// the child rankings below.
pub fn merge_family(
    children: &BTreeMap<(u32, u32), (TreeSet, Ranking)>,
    alpha: &OrdTerm,
    l0: u64,
) -> Result<(TreeSet, Ranking), TreeError> {
    let top = nf_sum(alpha, &OrdTerm::nat(l0));
    let mut nodes: BTreeSet<Seq> = [vec![]].into();
    let mut f: BTreeMap<Seq, OrdTerm> = [(vec![], top.clone())].into();
    for (&(n, k), (tree, rank)) in children {
        let label = 2u64
            .checked_pow(n)
            .and_then(|a| 3u64.checked_pow(k).and_then(|b| a.checked_mul(b)))
            .ok_or_else(|| TreeError::Budget(format!("label 2^{n}*3^{k} overflows")))?;
        for s in tree.materialize()? {
            let v = rank
                .value(&s)
                .ok_or_else(|| TreeError::BadRanking(format!("no value at {s:?}")))?;
            if v >= top {
                return Err(TreeError::BadRanking(format!(
                    "child value {v} is not below {top}"
                )));
            }
            let full = concat(&[label], &s);
            nodes.insert(full.clone());
            f.insert(full, v);
        }
    }
    Ok((TreeSet::Finite(nodes), Ranking::Explicit(f)))
}

// ---------------------------------------------------------------------------
// enumeration harness

/// All unordered rooted trees with at most `max_nodes` nodes and out-degree
/// at most `max_degree`, each labelled canonically (children 0, 1, … in a
/// fixed order of their shapes).
pub fn shapes(max_nodes: usize, max_degree: usize) -> Vec<TreeSet> {
    // trees by node count; a tree is a non-increasing list of child ids
    let mut by_size: Vec<Vec<Vec<usize>>> = vec![vec![]; max_nodes + 1];
    let mut all: Vec<(usize, Vec<usize>)> = vec![]; // (size, children ids)
    fn extend(
        budget: usize,
        max_id: usize,
        left: usize,
        all: &[(usize, Vec<usize>)],
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if budget == 0 {
            out.push(cur.clone());
            return;
        }
        if left == 0 {
            return;
        }
        for id in (0..=max_id.min(all.len().saturating_sub(1))).rev() {
            let sz = all[id].0;
            if sz <= budget {
                cur.push(id);
                extend(budget - sz, id, left - 1, all, cur, out);
                cur.pop();
            }
        }
    }
    for n in 1..=max_nodes {
        let mut out = vec![];
        if !all.is_empty() || n == 1 {
            extend(n - 1, usize::MAX, max_degree, &all, &mut vec![], &mut out);
        }
        for kids in &out {
            all.push((n, kids.clone()));
        }
        by_size[n] = out;
    }
    fn build(id: usize, all: &[(usize, Vec<usize>)], prefix: &mut Seq, out: &mut BTreeSet<Seq>) {
        out.insert(prefix.clone());
        for (label, &c) in all[id].1.iter().enumerate() {
            prefix.push(label as u64);
            build(c, all, prefix, out);
            prefix.pop();
        }
    }
    (0..all.len())
        .map(|id| {
            let mut nodes = BTreeSet::new();
            build(id, &all, &mut vec![], &mut nodes);
            TreeSet::Finite(nodes)
        })
        .collect()
}

/// Renames child labels level by level through injective maps into [0, bound).
pub fn relabel<R: rand::Rng>(t: &BTreeSet<Seq>, bound: u64, rng: &mut R) -> BTreeSet<Seq> {
    use rand::seq::SliceRandom;
    let mut map: HashMap<Seq, Seq> = HashMap::new();
    map.insert(vec![], vec![]);
    let mut out = BTreeSet::new();
    out.insert(vec![]);
    let mut pool: Vec<u64> = (0..bound).collect();
    // group children by parent, in order
    let mut parents: BTreeMap<Seq, Vec<u64>> = BTreeMap::new();
    for s in t.iter().filter(|s| !s.is_empty()) {
        parents
            .entry(s[..s.len() - 1].to_vec())
            .or_default()
            .push(s[s.len() - 1]);
    }
    for s in t.iter() {
        if let Some(kids) = parents.get(s) {
            pool.shuffle(rng);
            let base = map[s].clone();
            for (i, &k) in kids.iter().enumerate() {
                let mut child = s.clone();
                child.push(k);
                let img = concat(&base, &[pool[i]]);
                out.insert(img.clone());
                map.insert(child, img);
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// text formats

/// One node per line, entries separated by spaces; the root is the empty line.
pub fn parse_tree_file(text: &str) -> Result<TreeSet, TreeError> {
    let mut nodes = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let s: Result<Seq, _> = line.split_whitespace().map(str::parse::<u64>).collect();
        nodes.insert(s.map_err(|e| TreeError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    if text.is_empty() {
        nodes.insert(vec![]);
    }
    TreeSet::finite(nodes)
}

pub fn render_tree_file(t: &BTreeSet<Seq>) -> String {
    t.iter()
        .map(|s| s.iter().map(u64::to_string).collect::<Vec<_>>().join(" ") + "\n")
        .collect()
}

/// `n*:k`, `omega*`, or a tree file's contents.
pub fn parse_tree_literal(text: &str) -> Result<TreeSet, TreeError> {
    let t = text.trim();
    if t == "omega*" {
        return Ok(TreeSet::OmegaStar);
    }
    if let Some(k) = t.strip_prefix("n*:") {
        return k.parse().map(TreeSet::NStar).map_err(|e| TreeError::Parse {
            line: 1,
            msg: format!("{e}"),
        });
    }
    parse_tree_file(text)
}

// ---------------------------------------------------------------------------
// three-valued truth

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn from_bool(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }

    pub fn not(self) -> Self {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    pub fn and(self, o: Self) -> Self {
        match (self, o) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    pub fn or(self, o: Self) -> Self {
        self.not().and(o.not()).not()
    }
}

impl fmt::Display for Truth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Truth::True => "true",
            Truth::False => "false",
            Truth::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest candidate tree (in nodes) tried for ranked quantifiers.
    pub tree_size_max: usize,
    /// Most candidates tried per quantifier.
    pub witness_max: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            tree_size_max: 16,
            witness_max: 64,
        }
    }
}

pub type Assignment = BTreeMap<String, TreeSet>;

/// Canonical trees of the hereditarily finite sets of rank < k (one child
/// per element), within the budget; the flag says whether all were produced.
fn hf_sets(k: u64, budget: &Budget) -> (Vec<TreeSet>, bool) {
    // each set is a sorted list of element ids; sizes in nodes
    let mut sets: Vec<(Vec<usize>, usize)> = vec![];
    let mut complete = true;
    let mut level: Vec<usize> = vec![]; // ids of V_j
    for _ in 0..k {
        // V_{j+1} = P(V_j)
        let n = level.len();
        if n >= 20 {
            complete = false;
            break;
        }
        let mut next = vec![];
        for mask in 0u64..(1 << n) {
            let elems: Vec<usize> = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| level[i])
                .collect();
            let size = 1 + elems.iter().map(|&e| sets[e].1).sum::<usize>();
            if size > budget.tree_size_max || next.len() >= budget.witness_max {
                complete = false;
                continue;
            }
            let id = sets.iter().position(|s| s.0 == elems).unwrap_or_else(|| {
                sets.push((elems, size));
                sets.len() - 1
            });
            next.push(id);
        }
        level = next;
    }
    fn build(id: usize, sets: &[(Vec<usize>, usize)], prefix: &mut Seq, out: &mut BTreeSet<Seq>) {
        out.insert(prefix.clone());
        for (i, &e) in sets[id].0.iter().enumerate() {
            prefix.push(i as u64);
            build(e, sets, prefix, out);
            prefix.pop();
        }
    }
    let trees = level
        .iter()
        .map(|&id| {
            let mut nodes = BTreeSet::new();
            build(id, &sets, &mut vec![], &mut nodes);
            TreeSet::Finite(nodes)
        })
        .collect();
    (trees, complete)
}

/// Finite subsets of ω as trees, smallest first.
fn relation_candidates(budget: &Budget) -> Vec<TreeSet> {
    let mut w = 0u32;
    while w < 6 && (1usize << (w + 1)) <= budget.witness_max.max(1) {
        w += 1;
    }
    (0u64..(1 << w))
        .map(|mask| {
            let mut nodes: BTreeSet<Seq> = [vec![]].into();
            for (slot, i) in (0..w as u64).filter(|i| mask >> i & 1 == 1).enumerate() {
                for s in TreeSet::NStar(i).materialize().unwrap() {
                    nodes.insert(concat(&[slot as u64], &s));
                }
            }
            TreeSet::Finite(nodes)
        })
        .collect()
}

fn lookup(env: &Assignment, t: &SetTerm) -> Result<TreeSet, TreeError> {
    match t {
        SetTerm::Empty => Ok(TreeSet::leaf()),
        SetTerm::Omega => Ok(TreeSet::OmegaStar),
        SetTerm::Var(x) => env
            .get(x)
            .cloned()
            .ok_or_else(|| TreeError::Unassigned(x.clone())),
    }
}

fn budgeted(r: Result<bool, TreeError>) -> Result<Truth, TreeError> {
    match r {
        Ok(b) => Ok(Truth::from_bool(b)),
        Err(TreeError::Budget(_)) => Ok(Truth::Unknown),
        Err(e) => Err(e),
    }
}

/// Kleene combination over a candidate domain; `complete` says whether the
/// domain was exhausted.
fn quantify(
    exists: bool,
    candidates: impl IntoIterator<Item = TreeSet>,
    complete: bool,
    mut body: impl FnMut(TreeSet) -> Result<Truth, TreeError>,
) -> Result<Truth, TreeError> {
    let (hit, miss) = if exists {
        (Truth::True, Truth::False)
    } else {
        (Truth::False, Truth::True)
    };
    let mut unknown = !complete;
    for c in candidates {
        match body(c)? {
            v if v == hit => return Ok(hit),
            Truth::Unknown => unknown = true,
            _ => {}
        }
    }
    Ok(if unknown { Truth::Unknown } else { miss })
}

fn eval(f: &Formula, env: &Assignment, budget: &Budget) -> Result<Truth, TreeError> {
    use Formula::*;
    match f {
        In(a, b) | NotIn(a, b) => {
            let v = if let SetTerm::Empty = b {
                Truth::False
            } else {
                budgeted(mem_star(&lookup(env, a)?, &lookup(env, b)?))?
            };
            Ok(if matches!(f, In(..)) { v } else { v.not() })
        }
        Rel(u, a) | NotRel(u, a) => {
            let tu = env.get(u).ok_or_else(|| TreeError::Unassigned(u.clone()))?;
            let v = budgeted(mem_star(&lookup(env, a)?, tu))?
                .and(budgeted(subset_star(tu, &TreeSet::OmegaStar))?);
            Ok(if matches!(f, Rel(..)) { v } else { v.not() })
        }
        M(al, a) | NotM(al, a) => {
            let v = match alpha_tree(&lookup(env, a)?, al) {
                Ok(r) => Truth::from_bool(r.is_some()),
                Err(TreeError::Budget(_)) => Truth::Unknown,
                Err(e) => return Err(e),
            };
            Ok(if matches!(f, M(..)) { v } else { v.not() })
        }
        Or(g, h) => Ok(eval(g, env, budget)?.or(eval(h, env, budget)?)),
        And(g, h) => Ok(eval(g, env, budget)?.and(eval(h, env, budget)?)),
        BEx(x, a, g) | BAll(x, a, g) => {
            let ta = lookup(env, a)?;
            let (labels, complete): (Vec<u64>, bool) = match ta.child_labels() {
                Some(l) => (l, true),
                None => ((0..budget.witness_max as u64).collect(), false),
            };
            let cands = labels.into_iter().map(|k| subtree(&ta, &[k]).unwrap());
            quantify(matches!(f, BEx(..)), cands, complete, |c| {
                let mut e = env.clone();
                e.insert(x.clone(), c);
                eval(g, &e, budget)
            })
        }
        REx(al, x, g) | RAll(al, x, g) => {
            let (cands, complete) = match al.as_nat() {
                Some(k) => hf_sets(k, budget),
                None => {
                    let (c, _) = hf_sets(8, budget);
                    (c, false)
                }
            };
            quantify(matches!(f, REx(..)), cands, complete, |c| {
                let mut e = env.clone();
                e.insert(x.clone(), c);
                eval(g, &e, budget)
            })
        }
        RelEx(x, g) | RelAll(x, g) => quantify(
            matches!(f, RelEx(..)),
            relation_candidates(budget),
            false,
            |c| {
                let mut e = env.clone();
                e.insert(x.clone(), c);
                eval(g, &e, budget)
            },
        ),
        Ex(..) | All(..) => Err(TreeError::NotInB(f.to_string())),
    }
}

/// Truth of a B-formula under a tree assignment for its free set and
/// relation variables.
pub fn eval_truth(f: &Formula, assign: &Assignment, budget: &Budget) -> Result<Truth, TreeError> {
    if !classes(f).is_b {
        return Err(TreeError::NotInB(f.to_string()));
    }
    eval(f, assign, budget)
}
