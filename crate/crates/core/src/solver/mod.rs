//! Total-variation recovery through the dual program.

mod dual;
mod fit;
mod recover;
mod support;

pub(crate) use dual::next_smooth;
pub use dual::{solve_dual, DualSolution};
pub use fit::{fit_amplitudes, AmplitudeFit};
pub use recover::{recover, recover_fourier, RecoveryDiagnostics, RecoveryResult};
pub use support::{extract_support, SupportEstimate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning knobs for [`solve_dual`] and the recovery pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Constraint-grid points per unit of `2M+1`.
    pub grid_oversampling: usize,
    pub max_iterations: usize,
    /// Fixed `(τ, σ)` ratio hint for the splitting; `None` derives it from the data.
    pub primal_dual_step_sizes: Option<(f64, f64)>,
    /// Relative KKT residual at which a subproblem is considered solved.
    pub convergence_tolerance: f64,
    /// A peak of `|p|` is selected when it reaches `1 - selection_threshold`.
    pub selection_threshold: f64,
    pub newton_max_steps: usize,
    /// Maximum number of constraint-exchange rounds after the uniform-grid solve.
    pub exchange_rounds: usize,
    /// Overshoot of `|p|` above one that triggers an exchange point.
    pub exchange_tolerance: f64,
    /// Refinement factor of the supremum-estimation grid over the constraint grid.
    pub sup_refinement: usize,
    /// Weight `ε` of the `ε/2 ‖x‖²` term that makes the dual strongly concave,
    /// relative to moments normalized to unit peak modulus.
    pub dual_regularization: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid_oversampling: 16,
            max_iterations: 200_000,
            primal_dual_step_sizes: None,
            convergence_tolerance: 1e-4,
            selection_threshold: 1e-3,
            newton_max_steps: 50,
            exchange_rounds: 4,
            exchange_tolerance: 2e-4,
            sup_refinement: 8,
            dual_regularization: 0.1,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid_oversampling < 4 {
            return Err(Error::InvalidParameter("grid oversampling must be >= 4".into()));
        }
        if !(self.convergence_tolerance > 0.0
            && self.selection_threshold > 0.0
            && self.exchange_tolerance > 0.0
            && self.dual_regularization > 0.0)
        {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if self.selection_threshold >= 1.0 {
            return Err(Error::InvalidParameter("selection threshold must be below 1".into()));
        }
        if let Some((tau, sigma)) = self.primal_dual_step_sizes {
            if !(tau > 0.0 && sigma > 0.0) {
                return Err(Error::InvalidParameter("step sizes must be positive".into()));
            }
        }
        if self.sup_refinement == 0 {
            return Err(Error::InvalidParameter("sup refinement must be >= 1".into()));
        }
        Ok(())
    }
}
