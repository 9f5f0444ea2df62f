//! One backward-Euler step of the weak-form level-set transport equation.
//!
//! For test functions `w` the step solves
//!
//! ```text
//!   int (phi' - phi)/dt w  +  int mu grad(w) . D grad(phi')
//!                          +  int (c . grad(phi')) w  = 0,   c = mu div(D)
//! ```
//!
//! with the diffusion tensor `D` and its recovered divergence frozen at the
//! current state (explicit linearization), no boundary integral (natural
//! condition), and SUPG stabilization `w -> w + tau_e c.grad(w)` applied to
//! the time and convective terms with `tau_e = h_e / (2 |c|_e)`.

mod assemble;
mod solver;
mod sparse;

pub use assemble::assemble_step;
pub use solver::{solve, solve_with_stats, SolveStats};
pub use sparse::CsrMatrix;

use crate::energy::{check_positive_definite, evaluate_d_field, DVariant, EnergyModel, EnergyError};
use crate::levelset::{normals, reinitialize, LevelSet, LevelSetError};
use crate::mesh::{divergence_of_tensor, MeshError, TriMesh};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("solver failed to converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("model is not admissible for the anisotropic variant (worst eigenvalue {worst_eigenvalue:.4} at angle {worst_angle:.4})")]
    InadmissibleModel {
        worst_eigenvalue: f64,
        worst_angle: f64,
    },
    #[error("invalid step parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    LevelSet(#[from] LevelSetError),
}

/// Time-step and solver configuration for one advance.
#[derive(Debug, Clone, Copy)]
pub struct StepParams {
    pub dt: f64,
    pub mu: f64,
    pub solver_rel_tol: f64,
    pub solver_max_iter: usize,
    pub supg_enabled: bool,
}

impl StepParams {
    pub fn new(dt: f64, mu: f64) -> Self {
        Self {
            dt,
            mu,
            solver_rel_tol: 1e-8,
            solver_max_iter: 2000,
            supg_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<(), FemError> {
        if !(self.dt > 0.0) {
            return Err(FemError::InvalidParams(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.mu >= 0.0) {
            return Err(FemError::InvalidParams(format!("mu must be >= 0, got {}", self.mu)));
        }
        if !(self.solver_rel_tol > 0.0 && self.solver_rel_tol < 1.0) {
            return Err(FemError::InvalidParams(format!(
                "solver_rel_tol must lie in (0, 1), got {}",
                self.solver_rel_tol
            )));
        }
        if self.solver_max_iter == 0 {
            return Err(FemError::InvalidParams("solver_max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// Assembled linear system for one step: matrix, right-hand side and the
/// initial iterate (the current field, which warm-starts the Krylov solve).
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub guess: Vec<f64>,
}

/// One full step: normals, energy/diffusion fields, assembly, solve,
/// reinitialization. Errors from a vanished interface (uniform sign) or a
/// failed solve are propagated.
pub fn advance(
    mesh: &TriMesh,
    phi: &LevelSet,
    model: &EnergyModel,
    variant: DVariant,
    params: &StepParams,
    allow_inadmissible: bool,
) -> Result<LevelSet, FemError> {
    params.validate()?;
    if matches!(variant, DVariant::Aniso) && !allow_inadmissible {
        let report = check_positive_definite(model, 3600);
        if !report.admissible {
            return Err(FemError::InadmissibleModel {
                worst_eigenvalue: report.worst_eigenvalue,
                worst_angle: report.worst_angle,
            });
        }
    }
    let nrm = normals(mesh, phi);
    let d = evaluate_d_field(model, &nrm, variant)?;
    let div_d = divergence_of_tensor(mesh, &d)?;
    let system = assemble_step(mesh, phi, &d, &div_d, params)?;
    let solution = solve(&system, params)?;
    let advected = LevelSet::from_values(solution, phi.band_width());
    Ok(reinitialize(mesh, &advected)?)
}
