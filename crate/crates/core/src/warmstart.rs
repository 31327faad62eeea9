//! Semi-proximal ADMM warm start.
//!
//! A first-order pre-solve that hands the Newton loop a starting triple.
//! It runs the classic dual-ascent cycle on the dual SDP: a `y`-update
//! through a cached Cholesky factorization of the Gram matrix `A A*`, a
//! `Z`-update by PSD projection, and a multiplier update on `X` with an
//! over-relaxation step. Iteration counts are reported as `it0` and are
//! not comparable with any external first-order package.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::model::{ModelError, SdpProblem};
use crate::solver::StartingPoint;
use crate::sym::{SymError, SymMat};

#[derive(Debug, Error)]
pub enum WarmstartError {
    #[error("invalid warm-start config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// Warm-start controls.
#[derive(Clone, Debug)]
pub struct WarmstartConfig {
    /// Relative KKT tolerance at which the pre-solve stops.
    pub tol0: f64,
    /// Iteration cap.
    pub maxiter0: usize,
    /// Augmented-Lagrangian penalty.
    pub penalty: f64,
    /// Over-relaxation factor, in (0, (1 + sqrt 5)/2).
    pub step: f64,
}

impl Default for WarmstartConfig {
    fn default() -> Self {
        WarmstartConfig {
            tol0: 0.5,
            maxiter0: 2000,
            penalty: 1.0,
            step: 1.618,
        }
    }
}

impl WarmstartConfig {
    pub fn validate(&self) -> Result<(), WarmstartError> {
        if self.tol0 <= 0.0 || self.tol0.is_nan() {
            return Err(WarmstartError::Config("tol0 must be positive".into()));
        }
        if self.maxiter0 < 1 {
            return Err(WarmstartError::Config("maxiter0 must be at least 1".into()));
        }
        if !(self.penalty.is_finite() && self.penalty > 0.0) {
            return Err(WarmstartError::Config("penalty must be positive".into()));
        }
        let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
        if self.step <= 0.0 || self.step >= golden || self.step.is_nan() {
            return Err(WarmstartError::Config(format!(
                "step must lie in (0, {golden})"
            )));
        }
        Ok(())
    }
}

/// Result of the pre-solve.
#[derive(Clone, Debug)]
pub struct WarmstartOutcome {
    pub x: SymMat,
    pub y: DVector<f64>,
    pub z: SymMat,
    pub iterations: usize,
    /// Final relative KKT residual of the triple.
    pub eta_kkt: f64,
    /// Set when the Gram factorization failed and the cold-start triple was
    /// returned unchanged.
    pub gram_fallback: bool,
}

impl WarmstartOutcome {
    pub fn into_starting_point(self) -> StartingPoint {
        StartingPoint {
            x: self.x,
            y: self.y,
            z: self.z,
            warm_iters: self.iterations,
        }
    }
}

fn gram_cholesky(p: &SdpProblem) -> Result<Option<Cholesky<f64, Dyn>>, WarmstartError> {
    let m = p.m();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = p.constraints()[i].inner_sparse(&p.constraints()[j])?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(Cholesky::new(g))
}

/// Runs the ADMM cycle until `eta_kkt <= tol0` or the iteration cap.
pub fn admm_warmstart(
    p: &SdpProblem,
    wc: &WarmstartConfig,
) -> Result<WarmstartOutcome, WarmstartError> {
    wc.validate()?;
    let n = p.n();
    let mut x = SymMat::identity(n);
    let mut y = DVector::zeros(p.m());
    let mut z = SymMat::identity(n);

    let chol = match gram_cholesky(p)? {
        Some(c) => c,
        None => {
            let eta_kkt = p.kkt_residuals(&x, &y, &z)?.eta_kkt;
            return Ok(WarmstartOutcome {
                x,
                y,
                z,
                iterations: 0,
                eta_kkt,
                gram_fallback: true,
            });
        }
    };

    let c_dense = p.cost().to_symmat();
    let sigma = wc.penalty;
    let mut iterations = 0;
    let mut eta_kkt = p.kkt_residuals(&x, &y, &z)?.eta_kkt;

    while eta_kkt > wc.tol0 && iterations < wc.maxiter0 {
        // y-update: A A* y = (b - A X)/sigma + A (C - Z)
        let rhs = (p.b() - p.apply_a(&x)?) / sigma + p.apply_a(&(&c_dense - &z))?;
        y = chol.solve(&rhs);

        // Z-update: project C - A* y - X/sigma onto the cone
        let slack = p.dual_slack(&y)?;
        let w = slack.add_scaled(&x, -1.0 / sigma)?;
        z = w.psd_project()?;

        // multiplier update with over-relaxation
        let infeas = &z - &slack; // A* y + Z - C
        x = x.add_scaled(&infeas, wc.step * sigma)?;

        iterations += 1;
        eta_kkt = p.kkt_residuals(&x, &y, &z)?.eta_kkt;
    }

    Ok(WarmstartOutcome {
        x,
        y,
        z,
        iterations,
        eta_kkt,
        gram_fallback: false,
    })
}
