use thiserror::Error;

use crate::expr::ParseError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("evaluation failed: {0}")]
    Eval(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("variable lists differ: {0}")]
    VariableMismatch(String),

    #[error("subspaces are not complementary (rank {rank} of {dim})")]
    NotComplementary { rank: usize, dim: usize },

    #[error("base system is not regular at this point (rank {rank} of {dim})")]
    BaseNotRegular { rank: usize, dim: usize },

    #[error("constraint-force frame is degenerate (rank {rank} of {count})")]
    FrameDegenerate { rank: usize, count: usize },

    #[error("no solution through this point (residual {residual:e})")]
    Inconsistent { residual: f64 },

    #[error("point is not on the constraint submanifold (|phi|_inf = {violation:e})")]
    NotOnManifold { violation: f64 },

    #[error("velocity Jacobian of the constraints does not have maximal rank at {point:?}")]
    MaxRankViolated { point: Vec<f64> },

    #[error("projection onto the constraint submanifold diverged at step {step}")]
    ProjectionDiverged { step: usize },

    #[error("constraint algorithm did not stabilize within {levels} levels")]
    NoConvergence { levels: usize },

    #[error("map is not invertible at {point:?}")]
    NotInvertible { point: Vec<f64> },

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
