//! Matrix-free preconditioned conjugate gradient for the m-by-m symmetric
//! positive definite Schur systems.
//!
//! The operator is a closure; positive definiteness is the caller's
//! contract. Convergence is declared against an absolute tolerance and only
//! after recomputing the residual explicitly — the recurrence value drifts
//! on ill-conditioned systems.

use nalgebra::DVector;
use thiserror::Error;

/// PCG failures. Hitting the iteration cap is not an error: the outcome
/// returns `converged = false` and the caller decides.
#[derive(Debug, Error)]
pub enum PcgError {
    #[error("non-finite value encountered at iteration {0}")]
    NonFinite(usize),
    #[error("breakdown at iteration {0}: p'Ap = {1:.6e} <= 0, operator not positive definite")]
    Breakdown(usize, f64),
}

/// Preconditioner choices: identity, or a fixed diagonal.
#[derive(Clone, Debug)]
pub enum Precond {
    Identity,
    Jacobi(DVector<f64>),
}

impl Precond {
    fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            Precond::Identity => r.clone(),
            Precond::Jacobi(d) => r.component_div(d),
        }
    }
}

/// Result of a PCG run. `residual_norm` is always the explicitly
/// recomputed `||op(solution) - rhs||`.
#[derive(Clone, Debug)]
pub struct PcgOutcome {
    pub solution: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Explicit residual norms sampled every 10 iterations, as
    /// `(iteration, norm)` pairs.
    pub checkpoints: Vec<(usize, f64)>,
}

/// Solves `op(x) = rhs` from a zero initial guess.
pub fn pcg<F>(
    op: F,
    rhs: &DVector<f64>,
    tol_abs: f64,
    max_iter: usize,
    precond: &Precond,
) -> Result<PcgOutcome, PcgError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let m = rhs.len();
    let mut x = DVector::zeros(m);
    let mut r = rhs.clone();
    let explicit = |x: &DVector<f64>| (op(x) - rhs).norm();

    if r.norm() <= tol_abs {
        return Ok(PcgOutcome {
            residual_norm: r.norm(),
            solution: x,
            iterations: 0,
            converged: true,
            checkpoints: Vec::new(),
        });
    }

    let mut z = precond.apply(&r);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut checkpoints = Vec::new();

    for it in 1..=max_iter {
        let ap = op(&p);
        let pap = p.dot(&ap);
        if !pap.is_finite() {
            return Err(PcgError::NonFinite(it));
        }
        if pap <= 0.0 {
            return Err(PcgError::Breakdown(it, pap));
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if !(x.iter().all(|v| v.is_finite()) && r.iter().all(|v| v.is_finite())) {
            return Err(PcgError::NonFinite(it));
        }

        if it % 10 == 0 {
            checkpoints.push((it, explicit(&x)));
        }

        if r.norm() <= tol_abs {
            let res = explicit(&x);
            if res <= tol_abs {
                return Ok(PcgOutcome {
                    solution: x,
                    residual_norm: res,
                    iterations: it,
                    converged: true,
                    checkpoints,
                });
            }
            // Recurrence drifted below the true residual: restart from the
            // explicit one and keep iterating.
            r = rhs - op(&x);
        }

        z = precond.apply(&r);
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        p = &z + &p * beta;
    }

    let res = explicit(&x);
    Ok(PcgOutcome {
        converged: res <= tol_abs,
        solution: x,
        residual_norm: res,
        iterations: max_iter,
        checkpoints,
    })
}
