//! Joint optimization of the integer matrix `A` and power scaling `D` for
//! integer-forcing MIMO precoding.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod linalg;
pub mod optimizer;
pub mod rate;

pub use channel::{Channel, CsiModel, PrecoderKind};
pub use error::{Error, Result};
pub use lattice::{IntegerMatrix, LatticeBasis};
pub use optimizer::{ConvergenceFlag, PowerVector, Problem, SolveOutcome};
