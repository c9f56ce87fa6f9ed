//! Bilevel optimization through the value-function reformulation.
//!
//! The inner argmin constraint is replaced by `g(x,y) − g̃*(x) − δ ≤ 0`, where
//! `g̃*(x)` is the optimal value of `g(x,·) + α/2‖·‖²`. [`pdbo::run_pdbo`] solves the
//! result with a primal-dual method; [`proximal::run_proximal_pdbo`] wraps it in a
//! proximal-point loop for nonconvex objectives. [`baselines`] holds ITD/AID
//! hypergradient methods for comparison.

// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod baselines;
pub mod checks;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod inner;
pub mod metrics;
pub mod oracle;
pub mod pair;
pub mod pdbo;
pub mod problem;
pub mod problems;
pub mod proximal;
pub mod schedule;
pub mod sets;

pub use error::{Error, Result};
pub use exec::Execution;
pub use pair::{Vector, VectorPair};
pub use problem::{CallCounts, ProblemConstants, ProblemSpec, SmoothingParams};
pub use sets::FeasibleSet;
