//! The squared smoothing Newton loop.
//!
//! The KKT system is solved as one nonlinear equation in `(eps, X, y, Z)`:
//!
//! ```text
//! E(eps, X, y, Z) = ( A X + kp*eps*y - b,
//!                     -A* y - Z + C,
//!                     (1 + kc*eps) X - Phi(eps, X - nu Z) )
//! ```
//!
//! augmented with the smoothing parameter itself, `Ehat = (eps; E)`, and the
//! merit `psi = ||Ehat||^2`. Each iteration solves the linearization
//! inexactly: the eps-row pins `d_eps = -eps + zeta * eps_hat`, the three
//! remaining blocks reduce by back-substitution to an m-by-m SPD Schur
//! system for `dy` solved with PCG, and an Armijo-style backtracking line
//! search on `psi` accepts the step. The rescaling `nu` balances the norms
//! of `X` and `Z`; the perturbations `kp*eps` and `kc*eps` keep the Schur
//! operator positive definite at every positive `eps`.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::huber::{phi, resolvent_apply, smooth_decompose, HuberError, SmoothDecomp};
use crate::model::{KktResiduals, ModelError, SdpProblem};
use crate::pcg::{pcg, PcgError, Precond};
use crate::sym::{SymError, SymMat};
use crate::warmstart::WarmstartConfig;

/// Invalid algorithmic constants.
#[derive(Debug, Error)]
#[error("invalid solver config: {0}")]
pub struct ConfigError(pub String);

/// Hard failures of the solve machinery. Algorithmic outcomes (line search
/// or Schur-solve giving up) are reported as [`SolveStatus`] instead.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Huber(#[from] HuberError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sym(#[from] SymError),
    #[error(transparent)]
    Pcg(#[from] PcgError),
    #[error("Schur solve missed the inexactness tolerance: achieved {achieved:.6e}, required {required:.6e}")]
    SchurTolerance { achieved: f64, required: f64 },
    #[error("line search exhausted after {0} backtracks")]
    LineSearchExhausted(usize, Vec<(f64, f64)>),
    #[error("affine projection factorization failed")]
    ProjectionFactorization,
    #[error("starting point does not match problem dimensions")]
    BadStart,
}

/// All algorithmic constants of the Newton loop.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Initial smoothing parameter.
    pub eps_hat: f64,
    /// Smoothing-floor coefficient, in (0, 1).
    pub r: f64,
    /// Inexactness coefficient for the eta control, positive.
    pub r_hat: f64,
    /// Hard cap on the relative Schur residual, in (0, 1).
    pub eta_hat: f64,
    /// Backtracking ratio, in (0, 1).
    pub rho: f64,
    /// Armijo constant, in (0, 1/2).
    pub sigma: f64,
    /// Convergence-order exponent, in (0, 1].
    pub tau: f64,
    /// Primal perturbation coefficient.
    pub kappa_p: f64,
    /// Complementarity perturbation coefficient.
    pub kappa_c: f64,
    /// Rescaling of Z inside the smoothed complementarity block.
    pub nu: f64,
    /// Relative KKT tolerance; infinity is allowed and returns immediately.
    pub tol: f64,
    /// Newton iteration cap.
    pub max_newton: usize,
    /// Backtracking cap per line search.
    pub max_linesearch: usize,
    /// PCG iteration cap; `None` picks `max(100, 2m)`.
    pub pcg_max_iter: Option<usize>,
    /// Safety factor multiplying the inexactness tolerance of the Schur
    /// solve, in (0, 1]. Solving tighter than the acceptance bounds demand
    /// costs PCG iterations but saves line-search eigendecompositions.
    pub pcg_tighten: f64,
    /// Estimate the Schur diagonal for a Jacobi preconditioner. Costs m
    /// operator applications per Newton step, so it is gated to m <= 500.
    pub pcg_jacobi: bool,
    /// Project the primal iterate back onto the affine constraints when the
    /// dual residuals stall.
    pub affine_projection: bool,
    /// Seed for the SPD probe vectors.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_hat: 0.5,
            r: 0.6,
            r_hat: 0.6,
            eta_hat: 0.2,
            rho: 0.5,
            sigma: 1e-8,
            tau: 0.2,
            kappa_p: 1e-10,
            kappa_c: 1.0,
            nu: 1e4,
            tol: 1e-6,
            max_newton: 50,
            max_linesearch: 60,
            pcg_max_iter: None,
            pcg_tighten: 0.1,
            pcg_jacobi: false,
            affine_projection: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    /// `delta = sqrt(2) * max(r * eps_hat, eta_hat)`; must stay below one
    /// for the line search to be well posed.
    pub fn delta(&self) -> f64 {
        std::f64::consts::SQRT_2 * (self.r * self.eps_hat).max(self.eta_hat)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError(msg.to_string()))
            }
        };
        check(self.eps_hat.is_finite() && self.eps_hat > 0.0, "eps_hat must be positive")?;
        check(self.r > 0.0 && self.r < 1.0, "r must lie in (0, 1)")?;
        check(self.r_hat > 0.0 && self.r_hat.is_finite(), "r_hat must be positive")?;
        check(self.eta_hat > 0.0 && self.eta_hat < 1.0, "eta_hat must lie in (0, 1)")?;
        check(self.rho > 0.0 && self.rho < 1.0, "rho must lie in (0, 1)")?;
        check(self.sigma > 0.0 && self.sigma < 0.5, "sigma must lie in (0, 1/2)")?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau must lie in (0, 1]")?;
        check(self.kappa_p > 0.0, "kappa_p must be positive")?;
        check(self.kappa_c > 0.0, "kappa_c must be positive")?;
        check(self.nu > 0.0 && self.nu.is_finite(), "nu must be positive")?;
        check(!self.tol.is_nan() && self.tol >= 0.0, "tol must be nonnegative")?;
        check(self.max_linesearch >= 1, "max_linesearch must be at least 1")?;
        check(
            self.pcg_tighten > 0.0 && self.pcg_tighten <= 1.0,
            "pcg_tighten must lie in (0, 1]",
        )?;
        check(
            self.delta() < 1.0,
            "delta = sqrt(2) max(r*eps_hat, eta_hat) must stay below 1",
        )?;
        Ok(())
    }

    fn pcg_cap(&self, m: usize) -> usize {
        self.pcg_max_iter.unwrap_or_else(|| 100.max(2 * m))
    }
}

/// Per-family parameter presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Maxcut,
    Theta,
    Biq,
    Clustering,
}

impl Preset {
    pub fn parse(s: &str) -> Option<Preset> {
        match s {
            "maxcut" => Some(Preset::Maxcut),
            "theta" => Some(Preset::Theta),
            "biq" => Some(Preset::Biq),
            "clustering" => Some(Preset::Clustering),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Maxcut => "maxcut",
            Preset::Theta => "theta",
            Preset::Biq => "biq",
            Preset::Clustering => "clustering",
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        match self {
            // Theta instances run on the maxcut constants.
            Preset::Maxcut | Preset::Theta => {}
            Preset::Biq => {
                cfg.eps_hat = 1e-2;
                cfg.nu = 1e3;
                cfg.kappa_c = 10.0;
            }
            Preset::Clustering => {
                cfg.eps_hat = 1e-3;
                cfg.nu = 1e3;
                cfg.kappa_c = 1e3;
            }
        }
        cfg
    }

    pub fn warmstart_config(&self) -> WarmstartConfig {
        let mut wc = WarmstartConfig::default();
        match self {
            Preset::Maxcut | Preset::Theta => wc.tol0 = 0.5,
            Preset::Biq => wc.tol0 = 5e-2,
            Preset::Clustering => wc.tol0 = 0.9,
        }
        wc
    }
}

/// Starting triple handed to [`solve`], typically from the ADMM warm start.
#[derive(Clone, Debug)]
pub struct StartingPoint {
    pub x: SymMat,
    pub y: DVector<f64>,
    pub z: SymMat,
    /// First-order iterations spent producing the triple; reported as it0.
    pub warm_iters: usize,
}

/// The residual blocks of the smoothed map `E` at `(eps, X, y, Z)`.
pub fn e_map(
    cfg: &SolverConfig,
    p: &SdpProblem,
    eps: f64,
    x: &SymMat,
    y: &DVector<f64>,
    z: &SymMat,
) -> Result<(DVector<f64>, SymMat, SymMat), SolveError> {
    let a = eps.abs();
    let r_p = p.apply_a(x)? + y * (cfg.kappa_p * a) - p.b();
    let r_d = &p.dual_slack(y)? - z;
    let w = x.add_scaled(z, -cfg.nu)?;
    let r_c = x
        .scale(1.0 + cfg.kappa_c * a)
        .add_scaled(&phi(eps, &w)?, -1.0)?;
    Ok((r_p, r_d, r_c))
}

/// Merit value `psi = eps^2 + ||E||^2` recomputed from scratch.
pub fn merit(
    cfg: &SolverConfig,
    p: &SdpProblem,
    eps: f64,
    x: &SymMat,
    y: &DVector<f64>,
    z: &SymMat,
) -> Result<f64, SolveError> {
    let (r_p, r_d, r_c) = e_map(cfg, p, eps, x, y, z)?;
    Ok(eps * eps + r_p.norm_squared() + r_d.frob_norm().powi(2) + r_c.frob_norm().powi(2))
}

/// The two loop controls evaluated at a merit value:
/// `zeta = r * min(1, psi^((1+tau)/2))` and
/// `eta = min(1, r_hat * psi^(tau/2))`.
pub fn zeta_eta(cfg: &SolverConfig, psi_value: f64) -> (f64, f64) {
    let norm = psi_value.sqrt();
    let zeta = cfg.r * norm.powf(1.0 + cfg.tau).min(1.0);
    let eta = (cfg.r_hat * norm.powf(cfg.tau)).min(1.0);
    (zeta, eta)
}

/// One Newton iterate: the current point, its cached decomposition of
/// `X - nu Z`, the residual blocks and the merit value.
#[derive(Clone, Debug)]
pub struct IterateState {
    eps: f64,
    x: SymMat,
    y: DVector<f64>,
    z: SymMat,
    sd: SmoothDecomp,
    r_p: DVector<f64>,
    r_d: SymMat,
    r_c: SymMat,
    psi: f64,
}

impl IterateState {
    /// Assembles the state at `eps > 0`, reusing a single spectral
    /// decomposition of `X - nu Z` for both the residual and the
    /// derivative data.
    pub fn build(
        cfg: &SolverConfig,
        p: &SdpProblem,
        eps: f64,
        x: SymMat,
        y: DVector<f64>,
        z: SymMat,
    ) -> Result<Self, SolveError> {
        if x.n() != p.n() || z.n() != p.n() || y.len() != p.m() {
            return Err(SolveError::BadStart);
        }
        let w = x.add_scaled(&z, -cfg.nu)?;
        let sd = smooth_decompose(eps, &w)?;
        let r_p = p.apply_a(&x)? + &y * (cfg.kappa_p * eps) - p.b();
        let r_d = &p.dual_slack(&y)? - &z;
        let r_c = x
            .scale(1.0 + cfg.kappa_c * eps)
            .add_scaled(&sd.phi_value()?, -1.0)?;
        let psi =
            eps * eps + r_p.norm_squared() + r_d.frob_norm().powi(2) + r_c.frob_norm().powi(2);
        Ok(IterateState {
            eps,
            x,
            y,
            z,
            sd,
            r_p,
            r_d,
            r_c,
            psi,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn x(&self) -> &SymMat {
        &self.x
    }
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
    pub fn z(&self) -> &SymMat {
        &self.z
    }
    pub fn smooth_decomp(&self) -> &SmoothDecomp {
        &self.sd
    }
    pub fn psi(&self) -> f64 {
        self.psi
    }
    /// `||Ehat|| = sqrt(psi)`.
    pub fn e_norm(&self) -> f64 {
        self.psi.sqrt()
    }
    /// Residual blocks `(E_1, E_2, E_3)`.
    pub fn residual_blocks(&self) -> (&DVector<f64>, &SymMat, &SymMat) {
        (&self.r_p, &self.r_d, &self.r_c)
    }
}

/// A computed Newton direction plus the solve diagnostics the loop
/// invariants are checked against.
#[derive(Clone, Debug)]
pub struct NewtonDirection {
    pub d_eps: f64,
    pub dx: SymMat,
    pub dy: DVector<f64>,
    pub dz: SymMat,
    pub pcg_iterations: usize,
    /// Achieved residual of the reduced system, `||R_k||` up to rounding.
    pub residual_norm: f64,
    /// `min(eta_k * ||rhs||, eta_hat * ||Ehat||)`; the PCG tolerance.
    pub inexact_bound: f64,
    /// Norm of the assembled right-hand side `(R1, R2, R3)`.
    pub rhs_norm: f64,
    pub zeta: f64,
    pub eta: f64,
    /// Minimum of `<v, S v> - mu_p ||v||^2` over the SPD probes.
    pub probe_margin: f64,
}

/// Solves the linearized system at `s` to the inexactness tolerance.
pub fn newton_direction(
    cfg: &SolverConfig,
    p: &SdpProblem,
    s: &IterateState,
) -> Result<NewtonDirection, SolveError> {
    let e_norm = s.e_norm();
    let (zeta, eta) = zeta_eta(cfg, s.psi);
    let d_eps = -s.eps + zeta * cfg.eps_hat;
    let mu_p = cfg.kappa_p * s.eps;
    let mu_c = cfg.kappa_c * s.eps;
    let m = p.m();

    // Right-hand side (R1, R2, R3) = -E - dE/deps * d_eps, with
    // dE/deps = (kp*y, 0, kc*X - Phi'_eps).
    let r1 = -&s.r_p - &s.y * (cfg.kappa_p * d_eps);
    let r2 = -&s.r_d;
    let e_eps_c = s.x.scale(cfg.kappa_c).add_scaled(&s.sd.phi_deps()?, -1.0)?;
    let r3 = (-&s.r_c).add_scaled(&e_eps_c, -d_eps)?;
    let rhs_norm =
        (r1.norm_squared() + r2.frob_norm().powi(2) + r3.frob_norm().powi(2)).sqrt();

    let tol = ((eta * rhs_norm).min(cfg.eta_hat * e_norm) * cfg.pcg_tighten)
        .max(f64::MIN_POSITIVE);

    // Schur reduction: [(1+mu_c) I - V]^{-1} H = (H + Res(H)) / (1 + mu_c)
    // with Res = [(1+mu_c) I - V]^{-1} V, so the whole reduction runs on
    // resolvent applications.
    let res_r2 = resolvent_apply(&s.sd, mu_c, &r2)?;
    let inv_r3 = r3
        .add_scaled(&resolvent_apply(&s.sd, mu_c, &r3)?, 1.0)?
        .scale(1.0 / (1.0 + mu_c));
    let t = res_r2.scale(cfg.nu).add_scaled(&inv_r3, 1.0)?;
    let schur_rhs = &r1 - &p.apply_a(&t)?;

    let op = |v: &DVector<f64>| -> DVector<f64> {
        let av = p.apply_astar(v).expect("dimensions fixed by problem");
        let res = resolvent_apply(&s.sd, mu_c, &av).expect("eps > 0 in state");
        p.apply_a(&res).expect("dimensions fixed by problem") * cfg.nu + v * mu_p
    };

    let precond = if cfg.pcg_jacobi && m <= 500 {
        let mut diag = DVector::zeros(m);
        let mut unit = DVector::zeros(m);
        for j in 0..m {
            unit[j] = 1.0;
            diag[j] = op(&unit)[j].max(f64::MIN_POSITIVE);
            unit[j] = 0.0;
        }
        Precond::Jacobi(diag)
    } else {
        Precond::Identity
    };

    let out = pcg(op, &schur_rhs, tol, cfg.pcg_cap(m), &precond)?;
    if !out.converged {
        return Err(SolveError::SchurTolerance {
            achieved: out.residual_norm,
            required: tol,
        });
    }
    let dy = out.solution;

    // Back substitution: dZ = -A* dy - R2; dX = [(1+mu_c) I - V]^{-1} (R3 - nu V dZ).
    let dz = (-&p.apply_astar(&dy)?).add_scaled(&r2, -1.0)?;
    let dx = inv_r3.add_scaled(&resolvent_apply(&s.sd, mu_c, &dz)?, -cfg.nu)?;

    // SPD probes of the Schur operator (Lemma-level positivity witness).
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ s.psi.to_bits());
    let mut probe_margin = f64::INFINITY;
    for _ in 0..3 {
        let mut v = DVector::from_fn(m, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let norm = v.norm();
        if norm > 0.0 {
            v /= norm;
        }
        let margin = v.dot(&op(&v)) - mu_p;
        probe_margin = probe_margin.min(margin);
    }

    Ok(NewtonDirection {
        d_eps,
        dx,
        dy,
        dz,
        pcg_iterations: out.iterations,
        residual_norm: out.residual_norm,
        inexact_bound: tol,
        rhs_norm,
        zeta,
        eta,
        probe_margin,
    })
}

/// An accepted line-search step.
#[derive(Debug)]
pub struct LineSearchStep {
    pub step: f64,
    pub ell: usize,
    pub state: IterateState,
}

/// Finds the smallest backtracking exponent whose trial point drops the
/// merit below `[1 - 2 sigma (1 - delta) rho^l] psi`.
pub fn line_search(
    cfg: &SolverConfig,
    p: &SdpProblem,
    s: &IterateState,
    dir: &NewtonDirection,
) -> Result<LineSearchStep, SolveError> {
    let delta = cfg.delta();
    let mut history = Vec::new();
    for ell in 0..=cfg.max_linesearch {
        let step = cfg.rho.powi(ell as i32);
        let eps_t = s.eps + step * dir.d_eps;
        let x_t = s.x.add_scaled(&dir.dx, step)?;
        let y_t = &s.y + &dir.dy * step;
        let z_t = s.z.add_scaled(&dir.dz, step)?;
        let trial = IterateState::build(cfg, p, eps_t, x_t, y_t, z_t)?;
        let bound = (1.0 - 2.0 * cfg.sigma * (1.0 - delta) * step) * s.psi;
        // The strict comparison matters: at very small steps the Armijo
        // bound rounds back to psi itself, which must not pass a
        // zero-progress trial.
        if trial.psi <= bound && trial.psi < s.psi {
            return Ok(LineSearchStep {
                step,
                ell,
                state: trial,
            });
        }
        history.push((step, trial.psi));
    }
    Err(SolveError::LineSearchExhausted(history.len(), history))
}

/// Cached Cholesky factorization of the Gram operator of the augmented
/// constraint map `[A; <C, .>]`, used to project the primal iterate onto
/// `{X : A X = b, <C, X> = <b, y>}`.
pub struct ProjectionCache {
    include_cost: bool,
    chol: Cholesky<f64, Dyn>,
}

impl ProjectionCache {
    /// Builds the Gram matrix and factorizes it once. Fails when the rows
    /// are linearly dependent; callers then disable the feature.
    pub fn new(p: &SdpProblem, include_cost: bool) -> Result<Self, SolveError> {
        let m = p.m();
        let rows = m + usize::from(include_cost);
        let mut g = DMatrix::zeros(rows, rows);
        let row = |k: usize| {
            if k < m {
                &p.constraints()[k]
            } else {
                p.cost()
            }
        };
        for i in 0..rows {
            for j in i..rows {
                let v = row(i).inner_sparse(row(j))?;
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        let chol = Cholesky::new(g).ok_or(SolveError::ProjectionFactorization)?;
        Ok(ProjectionCache { include_cost, chol })
    }

    /// Nearest point (Frobenius) to `x` satisfying the cached rows.
    pub fn project(
        &self,
        p: &SdpProblem,
        x: &SymMat,
        y: &DVector<f64>,
    ) -> Result<SymMat, SolveError> {
        let m = p.m();
        let rows = m + usize::from(self.include_cost);
        let mut resid = DVector::zeros(rows);
        let ax = p.apply_a(x)?;
        for k in 0..m {
            resid[k] = ax[k] - p.b()[k];
        }
        if self.include_cost {
            resid[m] = p.cost().inner_dense(x)? - p.b().dot(y);
        }
        let w = self.chol.solve(&resid);
        let mut out = x.matrix().clone();
        for (k, a) in p.constraints().iter().enumerate() {
            a.add_scaled_into(-w[k], &mut out);
        }
        if self.include_cost {
            p.cost().add_scaled_into(-w[m], &mut out);
        }
        Ok(SymMat::from_dense(out)?)
    }
}

/// Terminal state of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    LinesearchFail,
    LinearSolverFail,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::LinesearchFail => "linesearch_fail",
            SolveStatus::LinearSolverFail => "linear_solver_fail",
        }
    }
}

/// One line of the per-iteration trace (the JSON-lines schema the CLI
/// emits).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub psi: f64,
    pub eps: f64,
    pub step: f64,
    pub pcg: usize,
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
}

/// Extended per-iteration diagnostics for invariant checks.
#[derive(Clone, Copy, Debug)]
pub struct IterStats {
    pub psi_before: f64,
    pub psi_after: f64,
    pub eps_after: f64,
    /// zeta evaluated at the accepted state; the loop keeps
    /// `eps_after >= zeta_after * eps_hat`.
    pub zeta_after: f64,
    pub step: f64,
    pub ell: usize,
    pub pcg_iterations: usize,
    pub pcg_residual: f64,
    pub inexact_bound: f64,
    pub probe_margin: f64,
    /// Whether an affine projection was applied before this step.
    pub projected: bool,
}

/// Outcome of [`solve`], including the final iterate.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub it0: usize,
    pub it1: usize,
    pub it2: usize,
    pub cpu_seconds: f64,
    pub residuals: KktResiduals,
    pub x: SymMat,
    pub y: DVector<f64>,
    pub z: SymMat,
    pub trace: Vec<TraceRecord>,
    pub stats: Vec<IterStats>,
    /// Human-readable detail for non-optimal statuses.
    pub failure: Option<String>,
}

/// Runs the smoothing Newton loop from `start` (or the cold start
/// `X = Z = I`, `y = 0`) until the relative KKT residual drops below
/// `cfg.tol` or an iteration budget is hit.
pub fn solve(
    p: &SdpProblem,
    cfg: &SolverConfig,
    start: Option<StartingPoint>,
) -> Result<SolveReport, SolveError> {
    cfg.validate()?;
    let t0 = Instant::now();
    let (x0, y0, z0, it0) = match start {
        Some(sp) => (sp.x, sp.y, sp.z, sp.warm_iters),
        None => (
            SymMat::identity(p.n()),
            DVector::zeros(p.m()),
            SymMat::identity(p.n()),
            0,
        ),
    };

    let mut state = IterateState::build(cfg, p, cfg.eps_hat, x0, y0, z0)?;
    let mut residuals = p.kkt_residuals(&state.x, &state.y, &state.z)?;

    let proj_cache = if cfg.affine_projection && p.m() <= 20_000 {
        ProjectionCache::new(p, true).ok()
    } else {
        None
    };

    let mut trace = Vec::new();
    let mut stats = Vec::new();
    let mut it1 = 0usize;
    let mut it2 = 0usize;
    let mut failure = None;
    let mut stall: Vec<f64> = vec![residuals.eta_d.max(residuals.eta_c)];

    let status = loop {
        if residuals.eta_kkt <= cfg.tol || state.psi == 0.0 {
            break SolveStatus::Optimal;
        }
        if it1 >= cfg.max_newton {
            break SolveStatus::MaxIter;
        }

        // Projection trigger: the dual-side residuals improved by < 10%
        // over the last three iterations. Accepted only when it does not
        // grow the merit or leave the eps floor.
        let mut projected = false;
        if let Some(cache) = &proj_cache {
            let k = stall.len();
            if k >= 4 && stall[k - 1] >= 0.9 * stall[k - 4] {
                let x_proj = cache.project(p, &state.x, &state.y)?;
                let cand = IterateState::build(
                    cfg,
                    p,
                    state.eps,
                    x_proj,
                    state.y.clone(),
                    state.z.clone(),
                )?;
                let (zeta_cand, _) = zeta_eta(cfg, cand.psi);
                if cand.psi <= state.psi && cand.eps >= zeta_cand * cfg.eps_hat {
                    state = cand;
                    residuals = p.kkt_residuals(&state.x, &state.y, &state.z)?;
                    projected = true;
                }
            }
        }

        let dir = match newton_direction(cfg, p, &state) {
            Ok(d) => d,
            Err(SolveError::SchurTolerance { achieved, required }) => {
                failure = Some(format!(
                    "PCG stalled at residual {achieved:.6e} (needed {required:.6e})"
                ));
                break SolveStatus::LinearSolverFail;
            }
            Err(e) => return Err(e),
        };

        let ls = match line_search(cfg, p, &state, &dir) {
            Ok(s) => s,
            Err(SolveError::LineSearchExhausted(trials, history)) => {
                let tail: Vec<String> = history
                    .iter()
                    .rev()
                    .take(3)
                    .map(|(s, v)| format!("step {s:.3e} -> psi {v:.6e}"))
                    .collect();
                failure = Some(format!(
                    "line search exhausted after {trials} trials ({})",
                    tail.join(", ")
                ));
                break SolveStatus::LinesearchFail;
            }
            Err(e) => return Err(e),
        };

        let psi_before = state.psi;
        state = ls.state;
        residuals = p.kkt_residuals(&state.x, &state.y, &state.z)?;
        it1 += 1;
        it2 += dir.pcg_iterations;
        let (zeta_after, _) = zeta_eta(cfg, state.psi);
        trace.push(TraceRecord {
            k: it1,
            psi: state.psi,
            eps: state.eps,
            step: ls.step,
            pcg: dir.pcg_iterations,
            eta_p: residuals.eta_p,
            eta_d: residuals.eta_d,
            eta_c: residuals.eta_c,
        });
        stats.push(IterStats {
            psi_before,
            psi_after: state.psi,
            eps_after: state.eps,
            zeta_after,
            step: ls.step,
            ell: ls.ell,
            pcg_iterations: dir.pcg_iterations,
            pcg_residual: dir.residual_norm,
            inexact_bound: dir.inexact_bound,
            probe_margin: dir.probe_margin,
            projected,
        });
        stall.push(residuals.eta_d.max(residuals.eta_c));
    };

    Ok(SolveReport {
        status,
        it0,
        it1,
        it2,
        cpu_seconds: t0.elapsed().as_secs_f64(),
        residuals,
        x: state.x,
        y: state.y,
        z: state.z,
        trace,
        stats,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{maxcut_sdp, Graph};
    use crate::huber::phi_deriv_apply;
    use crate::model::SparseSym;

    fn k3_problem() -> SdpProblem {
        maxcut_sdp(&Graph::new(3, vec![(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap())
    }

    fn scalar_problem() -> SdpProblem {
        // min x s.t. x = 1, x >= 0
        let a = SparseSym::new(1, vec![(0, 0, 1.0)]).unwrap();
        let c = SparseSym::new(1, vec![(0, 0, 1.0)]).unwrap();
        SdpProblem::new(1, vec![a], DVector::from_element(1, 1.0), c, "scalar").unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            eps_hat: 2.0, // sqrt(2) * 0.6 * 2.0 > 1
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            r: 1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            sigma: 0.5,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zeta_eta_formulas() {
        let cfg = SolverConfig::default();
        // psi >= 1 clamps zeta at r; eta = 0.6 * 2^0.2 here.
        let (z, e) = zeta_eta(&cfg, 4.0);
        assert_eq!(z, 0.6);
        assert!((e - 0.6 * 2f64.powf(0.2)).abs() < 1e-15);
        // large psi clamps eta too
        let (_, e) = zeta_eta(&cfg, 1e6);
        assert_eq!(e, 1.0);
        let (z, e) = zeta_eta(&cfg, 0.0);
        assert_eq!((z, e), (0.0, 0.0));
        // psi = 0.25, r = rhat = 0.6, tau = 0.2: frozen from an independent
        // high-precision evaluation.
        let (z, e) = zeta_eta(&cfg, 0.25);
        assert!((z - 0.26116516898883724).abs() < 1e-15);
        assert!((e - 0.5223303379776745).abs() < 1e-15);
    }

    #[test]
    fn e_map_zero_at_kkt_point() {
        let cfg = SolverConfig::default();
        let p = scalar_problem();
        let x = SymMat::from_diagonal(&[1.0]).unwrap();
        let y = DVector::from_element(1, 1.0);
        let z = SymMat::zeros(1);
        let (rp, rd, rc) = e_map(&cfg, &p, 0.0, &x, &y, &z).unwrap();
        assert!(rp.norm() <= 1e-15);
        assert!(rd.frob_norm() <= 1e-15);
        assert!(rc.frob_norm() <= 1e-15);
    }

    #[test]
    fn e_map_zero_point() {
        let cfg = SolverConfig::default();
        let p = k3_problem();
        let x = SymMat::zeros(3);
        let y = DVector::zeros(3);
        let z = SymMat::zeros(3);
        let (rp, rd, rc) = e_map(&cfg, &p, 0.0, &x, &y, &z).unwrap();
        assert!((&rp + p.b()).norm() <= 1e-15); // A0 - b = -b
        let c = p.cost().to_symmat();
        assert!((&rd - &c).frob_norm() <= 1e-15);
        assert!(rc.frob_norm() <= 1e-15);
    }

    #[test]
    fn state_blocks_match_direct_phi() {
        let cfg = SolverConfig::default();
        let p = k3_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(607);
        let x = SymMat::from_fn(3, |_, _| rng.random::<f64>()).unwrap();
        let z = SymMat::from_fn(3, |_, _| rng.random::<f64>()).unwrap();
        let y = DVector::from_fn(3, |_, _| rng.random::<f64>());
        let eps = 0.3;
        let st = IterateState::build(&cfg, &p, eps, x.clone(), y.clone(), z.clone()).unwrap();
        let w = x.add_scaled(&z, -cfg.nu).unwrap();
        let direct = x
            .scale(1.0 + cfg.kappa_c * eps)
            .add_scaled(&phi(eps, &w).unwrap(), -1.0)
            .unwrap();
        assert!((&direct - st.residual_blocks().2).frob_norm() <= 1e-12);
        // psi equals the explicit recomputation
        let m = merit(&cfg, &p, eps, &x, &y, &z).unwrap();
        assert!((st.psi() - m).abs() <= 1e-12 * (1.0 + m));
    }

    #[test]
    fn direction_zero_rhs_at_solution() {
        let cfg = SolverConfig::default();
        let p = scalar_problem();
        let x = SymMat::from_diagonal(&[1.0]).unwrap();
        let y = DVector::from_element(1, 1.0);
        let z = SymMat::zeros(1);
        // At the exact solution with eps tiny, the rhs is dominated by the
        // eps-perturbation terms; with eps -> 0 the direction collapses.
        let st = IterateState::build(&cfg, &p, 1e-14, x, y, z).unwrap();
        let dir = newton_direction(&cfg, &p, &st).unwrap();
        assert!(dir.dx.frob_norm() <= 1e-9);
        assert!(dir.dy.norm() <= 1e-9);
        assert!(dir.dz.frob_norm() <= 1e-9);
    }

    #[test]
    fn direction_matches_scalar_closed_form() {
        // n = m = 1: every operator is scalar, so dy has a closed form.
        let cfg = SolverConfig {
            nu: 2.0,
            eps_hat: 0.3,
            ..SolverConfig::default()
        };
        let p = scalar_problem();
        let x = SymMat::from_diagonal(&[2.0]).unwrap();
        let y = DVector::from_element(1, 0.5);
        let z = SymMat::from_diagonal(&[0.4]).unwrap();
        let eps = 0.25;
        let st = IterateState::build(&cfg, &p, eps, x, y, z).unwrap();
        let dir = newton_direction(&cfg, &p, &st).unwrap();

        let w = 2.0 - cfg.nu * 0.4; // X - nu Z = 1.2
        let omega = crate::huber::huber_partials(eps, w).unwrap().1; // = 1 (w > eps)
        let mu_p = cfg.kappa_p * eps;
        let mu_c = cfg.kappa_c * eps;
        let (zeta, _) = zeta_eta(&cfg, st.psi());
        let d_eps = -eps + zeta * cfg.eps_hat;
        let (h_eps, _) = crate::huber::huber_partials(eps, w).unwrap();
        let e1 = 2.0 + cfg.kappa_p * eps * 0.5 - 1.0;
        let e2 = 1.0 - 0.5 - 0.4;
        let e3 = (1.0 + mu_c) * 2.0 - crate::huber::huber_scalar(eps, w);
        let r1 = -e1 - cfg.kappa_p * 0.5 * d_eps;
        let r2 = -e2;
        let r3 = -e3 - (cfg.kappa_c * 2.0 - h_eps) * d_eps;
        let hat = omega / (1.0 + mu_c - omega);
        let schur = mu_p + cfg.nu * hat;
        let rhs = r1 - (cfg.nu * hat * r2 + (r3 + hat * r3) / (1.0 + mu_c));
        let dy_expect = rhs / schur;
        assert!(
            (dir.dy[0] - dy_expect).abs() <= 1e-9 * (1.0 + dy_expect.abs()),
            "dy {} vs closed form {}",
            dir.dy[0],
            dy_expect
        );
    }

    #[test]
    fn direction_back_substitution_is_exact() {
        let cfg = SolverConfig::default();
        let p = k3_problem();
        let mut rng = ChaCha8Rng::seed_from_u64(613);
        // Mixed spectrum in X - nu Z (one eigenvalue per index set at
        // eps = 0.2) keeps the Schur operator representative of a real
        // mid-solve iterate.
        let x = SymMat::from_fn(3, |i, j| if i == j { 1.2 } else { rng.random::<f64>() * 0.1 })
            .unwrap();
        // random rotation so the eigenbasis does not align with the
        // constraint pattern
        let g = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        let q = g.qr().q();
        let w_target = SymMat::from_dense(
            &q * DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.1, -0.4])) * q.transpose(),
        )
        .unwrap();
        let z = x.add_scaled(&w_target, -1.0).unwrap().scale(1.0 / cfg.nu);
        let y = DVector::from_fn(3, |_, _| rng.random::<f64>() * 0.1);
        let st = IterateState::build(&cfg, &p, 0.2, x, y, z).unwrap();
        assert_eq!(st.smooth_decomp().split().counts(), (1, 1, 1));
        let dir = newton_direction(&cfg, &p, &st).unwrap();

        let mu_p = cfg.kappa_p * st.eps();
        let mu_c = cfg.kappa_c * st.eps();
        let (zeta, _) = zeta_eta(&cfg, st.psi());
        let d_eps = -st.eps() + zeta * cfg.eps_hat;
        assert_eq!(dir.d_eps, d_eps);

        let r1 = -&st.r_p - &st.y * (cfg.kappa_p * d_eps);
        let r2 = -&st.r_d;
        let e_eps_c = st
            .x
            .scale(cfg.kappa_c)
            .add_scaled(&st.sd.phi_deps().unwrap(), -1.0)
            .unwrap();
        let r3 = (-&st.r_c).add_scaled(&e_eps_c, -d_eps).unwrap();
        let rhs_norm =
            (r1.norm_squared() + r2.frob_norm().powi(2) + r3.frob_norm().powi(2)).sqrt();

        // Block 2: -A* dy - dz = r2 exactly.
        let blk2 = (-&p.apply_astar(&dir.dy).unwrap())
            .add_scaled(&dir.dz, -1.0)
            .unwrap()
            .add_scaled(&r2, -1.0)
            .unwrap();
        assert!(blk2.frob_norm() <= 1e-11 * (1.0 + rhs_norm));

        // Block 3: (1+mu_c) dx - V dx + nu V dz = r3 exactly.
        let v_dx = phi_deriv_apply(&st.sd, 0.0, &dir.dx).unwrap();
        let v_dz = phi_deriv_apply(&st.sd, 0.0, &dir.dz).unwrap();
        let blk3 = dir
            .dx
            .scale(1.0 + mu_c)
            .add_scaled(&v_dx, -1.0)
            .unwrap()
            .add_scaled(&v_dz, cfg.nu)
            .unwrap()
            .add_scaled(&r3, -1.0)
            .unwrap();
        assert!(blk3.frob_norm() <= 1e-11 * (1.0 + rhs_norm));

        // Block 1 residual equals the reported Schur residual.
        let blk1 = p.apply_a(&dir.dx).unwrap() + &dir.dy * mu_p - r1;
        assert!((blk1.norm() - dir.residual_norm).abs() <= 1e-9 * (1.0 + rhs_norm));
        // and satisfies both inexactness bounds
        assert!(dir.residual_norm <= dir.inexact_bound + 1e-14);
    }

    #[test]
    fn line_search_rejects_zero_direction() {
        let cfg = SolverConfig::default();
        let p = k3_problem();
        let st = IterateState::build(
            &cfg,
            &p,
            cfg.eps_hat,
            SymMat::identity(3),
            DVector::zeros(3),
            SymMat::identity(3),
        )
        .unwrap();
        let dir = NewtonDirection {
            d_eps: 0.0,
            dx: SymMat::zeros(3),
            dy: DVector::zeros(3),
            dz: SymMat::zeros(3),
            pcg_iterations: 0,
            residual_norm: 0.0,
            inexact_bound: 1.0,
            rhs_norm: 0.0,
            zeta: 0.0,
            eta: 0.0,
            probe_margin: 0.0,
        };
        match line_search(&cfg, &p, &st, &dir) {
            Err(SolveError::LineSearchExhausted(trials, history)) => {
                assert_eq!(trials, cfg.max_linesearch + 1);
                assert_eq!(history.len(), trials);
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn projection_closed_form_single_constraint() {
        // Rank-1 projection without the cost row:
        // X - A1 (<A1, X> - b1) / <A1, A1>.
        let p = scalar_problem();
        let cache = ProjectionCache::new(&p, false).unwrap();
        let x = SymMat::from_diagonal(&[3.0]).unwrap();
        let y = DVector::zeros(1);
        let got = cache.project(&p, &x, &y).unwrap();
        assert!((got.get(0, 0) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn projection_fixes_feasibility() {
        let p = k3_problem();
        let cache = ProjectionCache::new(&p, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(617);
        let x = SymMat::from_fn(3, |_, _| rng.random::<f64>()).unwrap();
        let y = DVector::from_fn(3, |_, _| rng.random::<f64>() - 0.5);
        let proj = cache.project(&p, &x, &y).unwrap();
        let feas = (&p.apply_a(&proj).unwrap() - p.b()).norm();
        assert!(feas <= 1e-10, "primal residual {feas}");
        let cost_gap = (p.cost().inner_dense(&proj).unwrap() - p.b().dot(&y)).abs();
        assert!(cost_gap <= 1e-10, "cost-row residual {cost_gap}");
        // idempotence: projecting a point already in the subspace is a no-op
        let again = cache.project(&p, &proj, &y).unwrap();
        assert!((&again - &proj).frob_norm() <= 1e-12);
    }

    #[test]
    fn solve_vacuous_tolerance_returns_immediately() {
        let p = k3_problem();
        let cfg = SolverConfig {
            tol: f64::INFINITY,
            ..SolverConfig::default()
        };
        let rep = solve(&p, &cfg, None).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert_eq!(rep.it1, 0);
        assert!(rep.trace.is_empty());
    }

    #[test]
    fn solve_k3_maxcut_cold() {
        let p = k3_problem();
        let cfg = SolverConfig::default();
        let rep = solve(&p, &cfg, None).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!(rep.residuals.eta_kkt <= 1e-6);
        assert!(
            (rep.residuals.obj_primal + 2.25).abs() <= 1e-5,
            "objective {}",
            rep.residuals.obj_primal
        );
        assert_eq!(rep.trace.len(), rep.it1);
    }

    #[test]
    fn solve_scalar_problem() {
        let p = scalar_problem();
        let cfg = SolverConfig::default();
        let rep = solve(&p, &cfg, None).unwrap();
        assert_eq!(rep.status, SolveStatus::Optimal);
        assert!((rep.residuals.obj_primal - 1.0).abs() <= 1e-5);
    }

    #[test]
    fn solve_invariants_hold() {
        let p = k3_problem();
        let cfg = SolverConfig::default();
        let rep = solve(&p, &cfg, None).unwrap();
        assert!(rep.it1 > 0);
        for s in &rep.stats {
            assert!(s.psi_after < s.psi_before, "merit not strictly decreasing");
            assert!(s.eps_after > 0.0);
            assert!(s.eps_after >= s.zeta_after * cfg.eps_hat - 1e-15);
            assert!(s.probe_margin >= -1e-10);
            assert!(s.pcg_residual <= s.inexact_bound + 1e-14);
        }
    }
}
