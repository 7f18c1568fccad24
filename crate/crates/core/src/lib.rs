//! Symbolic-numeric fractional exterior calculus.
//!
//! The crate computes Riemann-Liouville fractional derivatives of sums of
//! generalized power products, builds fractional differential forms with the
//! fractional exterior derivative, tests closedness and exactness of
//! fractional one-forms, and computes fractional Jacobians and metrics for
//! coordinate changes. A Grünwald-Letnikov oracle evaluates the same
//! operators numerically on black-box functions.

#![allow(clippy::excessive_precision, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod coords;
pub mod error;
pub mod expr;
pub mod forms;
pub mod oracle;
pub mod par;
pub mod parse;
pub mod rl;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{Context, Expr, PowerTerm};
pub use forms::{DiffFactor, Form, WedgeWord};
pub use parse::parse_expr;
