//! Stability diagnostics: Lyapunov potentials, 2x2 transfer matrices with
//! their transformed-norm bounds, and the AGD initial-value instability
//! construction.
//!
//! The transfer-matrix analysis is done for a scalar curvature `H`. The
//! d-dimensional blocks are polynomials in the Hessian, so they diagonalize
//! simultaneously and every norm question reduces to the scalar case.

mod instability;
mod potentials;
mod transfer;

pub use instability::{
    construct_instability_objective, instability_experiment, Bump, InstabilityConstruction,
    InstabilityReport, PiecewiseCurvature1D,
};
pub use potentials::{
    discrepancy, potential_phi, potential_psi, potential_report, PotentialReport,
};
pub use transfer::{
    fedac1_norm_bound, fedac2_norm_bound, norm_bound_sweep, transfer_matrix_fedac1,
    transfer_matrix_fedac2, transfer_matrix_general, transformed_norm, NormBoundReport,
    NormBoundRow, TransferMatrix, NORM_BOUND_SLACK,
};

use thiserror::Error;

use crate::algorithms::AlgoError;
use crate::objectives::ObjectiveError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("curvature {h} outside the admissible range [{lo}, {hi}]")]
    CurvatureOutOfRange { h: f64, lo: f64, hi: f64 },
    #[error("could not separate query points for block {block} after {attempts} shrink steps")]
    ConstructionFailed { block: usize, attempts: usize },
    #[error("perturbed trajectory left its curvature region at step {step}")]
    LeftNeighborhood { step: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Algo(#[from] AlgoError),
}
