//! A semidefinite-programming solver built around a squared smoothing
//! Newton method with Huber smoothing of the PSD projector.
//!
//! The crate solves standard-form SDPs
//!
//! ```text
//! min <C, X>   s.t.   <A_i, X> = b_i  (i = 1..m),   X PSD,
//! ```
//!
//! by reformulating the KKT conditions as one nonsmooth equation, smoothing
//! the projector with the Huber function, and driving the smoothed residual
//! to zero with an inexact Newton method: an m-by-m SPD Schur system per
//! iteration (matrix-free PCG), a merit-function line search, and a
//! first-order ADMM warm start. Solutions are certified by relative KKT
//! residuals.
//!
//! Modules:
//! - [`sym`]: dense symmetric matrices, spectral decompositions, the exact
//!   PSD projector.
//! - [`huber`]: the Huber smoother, its matrix lift and derivative algebra.
//! - [`model`]: problem data, constraint operators, KKT residuals.
//! - [`sdpa`]: single-block SDPA sparse file I/O.
//! - [`generators`]: MaxCut / theta / BIQ / clustering problem builders.
//! - [`pcg`]: matrix-free preconditioned conjugate gradient.
//! - [`warmstart`]: semi-proximal ADMM pre-solve.
//! - [`solver`]: the smoothing Newton loop.
//! - [`report`]: benchmark records (JSON / CSV).
//!
//! ```
//! use ssnsdp::generators::{maxcut_sdp, Graph};
//! use ssnsdp::solver::Preset;
//!
//! let triangle = Graph::new(3, vec![(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)])?;
//! let problem = maxcut_sdp(&triangle);
//! let report = ssnsdp::solve_warmstarted(
//!     &problem,
//!     &Preset::Maxcut.solver_config(),
//!     &Preset::Maxcut.warmstart_config(),
//! )?;
//! assert_eq!(report.status, ssnsdp::SolveStatus::Optimal);
//! assert!((report.residuals.obj_primal + 2.25).abs() < 1e-5);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod generators;
pub mod huber;
pub mod model;
pub mod pcg;
pub mod report;
pub mod sdpa;
pub mod solver;
pub mod sym;
pub mod warmstart;

pub use model::{KktResiduals, SdpProblem, SparseSym};
pub use report::RunRecord;
pub use solver::{
    solve, Preset, SolveReport, SolveStatus, SolverConfig, StartingPoint,
};
pub use sym::SymMat;
pub use warmstart::{admm_warmstart, WarmstartConfig};

/// Convenience pipeline: ADMM warm start followed by the Newton solve.
pub fn solve_warmstarted(
    p: &SdpProblem,
    cfg: &SolverConfig,
    wc: &WarmstartConfig,
) -> Result<SolveReport, SolveAnyError> {
    let ws = admm_warmstart(p, wc)?;
    Ok(solve(p, cfg, Some(ws.into_starting_point()))?)
}

/// Union error for the combined pipeline.
#[derive(Debug, thiserror::Error)]
pub enum SolveAnyError {
    #[error(transparent)]
    Warmstart(#[from] warmstart::WarmstartError),
    #[error(transparent)]
    Solve(#[from] solver::SolveError),
}
