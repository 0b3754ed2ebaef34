//! Proof-theory workbench: ordinal notations, ranked formulas, a Tait-style
//! checker for KP + (Π¹₁-CA*), infinitary derivation certificates and
//! suitable trees.

pub mod formulas;
pub mod ordinals;
pub mod rsstar;
pub mod taitkp;
pub mod trees;

pub use formulas::{Formula, FormulaError, Sequent, SetTerm};
pub use ordinals::{OrdBound, OrdError, OrdTerm, Principal};
