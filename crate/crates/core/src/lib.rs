//! Black-box reductions (AdaptReg, AdaptSmooth, JointAdaptRegSmooth) for composite convex
//! finite-sum problems `F(x) = (1/n) Σ f_i(⟨a_i, x⟩) + ψ(x)`, with the inner solvers they call.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod harness;
pub mod losses;
pub mod objectives;
pub mod reductions;
pub mod regularizers;
pub mod solvers;
pub mod verify;

pub use data::{parse_libsvm, parse_libsvm_str, Dataset, RowView};
pub use error::{Error, Result};
pub use harness::{ConvergenceTrace, ExperimentConfig, TraceRow};
pub use losses::{LossKind, ScalarLoss, SmoothedLoss};
pub use objectives::{Case, CompositeObjective, SparseVector};
pub use reductions::{
    adapt_reg, adapt_smooth, classical_reg, classical_smooth, default_params, joint_adapt,
    ClassicalParams, EpochRecord, ReductionObserver, ReductionParams,
};
pub use regularizers::{Regularizer, Shift};
pub use solvers::{
    reference_minimize, reference_solution, Apg, ExactOracle, HoodOracle, OracleReport, ProxGd,
    Reference, Sdca, StopRule, Svrg, TerminationPolicy,
};
