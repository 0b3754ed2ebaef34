//! Shared inputs for the criterion benches.

use bhw_core::formulas::{parse_formula, Formula};
use bhw_core::ordinals::{enumerate_upto, OrdTerm};
use bhw_core::trees::{shapes, TreeSet};

/// Normal forms used by the ordinal benches.
pub fn ordinal_sample(size: usize) -> Vec<OrdTerm> {
    enumerate_upto(size)
}

pub fn formula_sample() -> Vec<Formula> {
    [
        "(ex x (in x a))",
        "(ball x a (or (in x b) (rex w y (and (in y x) (M 2 y)))))",
        "(Rall X (or (nrel X a) (ex y (and (rel X y) (rall 3 z (nin z y))))))",
    ]
    .iter()
    .map(|s| parse_formula(s).expect("bench formula"))
    .collect()
}

/// Shapes with at most `n` nodes and degree at most 4.
pub fn tree_sample(n: usize) -> Vec<TreeSet> {
    shapes(n, 4)
}
