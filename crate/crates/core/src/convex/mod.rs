//! Dense LP (revised simplex) and SDP (primal-dual interior point) solvers.

pub mod lp;
pub mod sdp;
pub(crate) mod simplex;

use serde::{Deserialize, Serialize};

pub use lp::{solve_lp, Constraint, ConstraintSense, LinearProgram, OptSense, VarBounds};
pub use sdp::{embed_hermitian, solve_sdp, unembed_hermitian, SemidefiniteProgram};

/// All solver tolerances in one place.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub lp: f64,
    pub sdp: f64,
    pub lp_max_iterations: usize,
    pub sdp_max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { lp: 1e-9, sdp: 1e-7, lp_max_iterations: 50_000, sdp_max_iterations: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub value: f64,
    pub primal: Vec<f64>,
    /// LP: one multiplier per constraint (d value / d rhs). SDP: the dual
    /// matrix blocks, each flattened row-major, concatenated.
    pub dual: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    /// SDP only: most negative eigenvalue of the mapped matrix (0 for LPs).
    pub psd_violation: f64,
    pub iterations: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}
