//! Symbolic expressions over the jet-multimomentum chart.

pub mod calculus;
pub mod canon;
pub mod node;
pub mod symbol;

pub use calculus::{partial, substitute, total_derivative, Bindings};
pub use canon::{canonicalize, is_zero_structural};
pub use node::{DepSet, Expr, FnName, FnNode, Kind, Rational, ScalarFn};
pub use symbol::{lv, n_factor, Index, JetSymbol, Label, Pos, PAIRS};
