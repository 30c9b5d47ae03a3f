//! Exact information-theoretic quantities over enumerated chain-of-thought
//! distributions, and numeric certificates for the bounds built on them.

mod certify;
mod dist;
mod ensemble;
mod model;
mod oracle;
mod transfer;

pub use certify::{
    check_corollary3, check_theorem1, reasoning_uncertainty_gain, reasoning_uncertainty_gain_in, Gap,
    TheoremReport,
};
pub use dist::{kl_divergence, Axis, FiniteJointDistribution, StableMap, MASS_TOLERANCE};
pub use ensemble::{
    corollary_ensemble, kl_ensemble, mi_ensemble, transfer_ensemble, EnsembleReport, InstanceOutcome,
};
pub use model::{ConditionalTable, FactoredCoTModel, Perturbation};
pub use oracle::{
    maze_oracle, Actionable, CoTJoint, CoTLayout, KernelContext, OracleCoTProcess, OracleLimits,
    ReasoningKernel, Source,
};
pub use transfer::{check_transfer_bounds, random_transfer_problem, Norm, TransferProblem};

use thiserror::Error;

use crate::momdp::MomdpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TheoryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("absolute continuity violated at atom {atom}")]
    AbsoluteContinuity { atom: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Momdp(#[from] MomdpError),
}

pub type Result<T> = std::result::Result<T, TheoryError>;
