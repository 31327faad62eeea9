//! Huber smoothing of the plus function and its spectral lift.
//!
//! The scalar smoother
//!
//! ```text
//! h(e, t) = t - |e|/2       for t > |e|
//!         = t^2 / (2|e|)    for 0 <= t <= |e|
//!         = 0               for t < 0
//! ```
//!
//! (with `h(0, t) = max(t, 0)`) maps nonpositive arguments to exactly zero,
//! so the derivative matrices below inherit the sparsity pattern of the exact
//! projector. Lifting `h` through a spectral decomposition gives the smoothed
//! projector `Phi(e, W) = P diag(h(e, d_i)) P^T`; its derivative is governed
//! by the divided-difference matrix `Omega` and the diagonal of partial
//! derivatives in the smoothing parameter.
//!
//! [`SmoothDecomp`] bundles one decomposition of `W` with everything the
//! Newton solver needs per iteration: the index split at the smoothing
//! threshold, `Omega`, and the `e`-partials. [`resolvent_apply`] evaluates
//! `[(1+mu) I - V]^{-1} V` for `V = Phi'_W`, with two algebraically
//! equivalent evaluation schemes that exploit the zero blocks of `Omega`.
//!
//! Derivative data exists only for positive smoothing: the solver keeps
//! `eps > 0` until termination and never differentiates at the kink.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::sym::{SpectralDecomp, SymError, SymMat};

/// Errors from the smoothing layer.
#[derive(Debug, Error)]
pub enum HuberError {
    #[error("smoothing parameter must be nonzero")]
    ZeroEps,
    #[error("smoothing parameter must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("resolvent shift must be positive, got {0}")]
    NonPositiveShift(f64),
    #[error("eigenvalues must be sorted descending")]
    NotDescending,
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// The scalar Huber smoother `h(eps, t)`; even in `eps`, and the plus
/// function at `eps = 0`.
pub fn huber_scalar(eps: f64, t: f64) -> f64 {
    let a = eps.abs();
    if a == 0.0 {
        return t.max(0.0);
    }
    if t > a {
        t - 0.5 * a
    } else if t >= 0.0 {
        t * t / (2.0 * a)
    } else {
        0.0
    }
}

/// Partial derivatives `(dh/deps, dh/dt)` at `eps != 0`.
pub fn huber_partials(eps: f64, t: f64) -> Result<(f64, f64), HuberError> {
    if eps == 0.0 {
        return Err(HuberError::ZeroEps);
    }
    let a = eps.abs();
    let (d_a, d_t) = if t > a {
        (-0.5, 1.0)
    } else if t >= 0.0 {
        (-t * t / (2.0 * a * a), t / a)
    } else {
        (0.0, 0.0)
    };
    // h depends on eps through |eps| only.
    Ok((d_a * eps.signum(), d_t))
}

/// First divided differences of the plus function at the eigenvalue pairs,
/// with the convention `0/0 := 1`.
pub fn omega0_matrix(d: &[f64]) -> DMatrix<f64> {
    let n = d.len();
    DMatrix::from_fn(n, n, |i, j| {
        let num = d[i].max(0.0) + d[j].max(0.0);
        let den = d[i].abs() + d[j].abs();
        if den == 0.0 {
            1.0
        } else {
            num / den
        }
    })
}

fn huber_dt(eps: f64, t: f64) -> f64 {
    let a = eps.abs();
    if t > a {
        1.0
    } else if t >= 0.0 {
        t / a
    } else {
        0.0
    }
}

/// First divided differences of the Huber smoother at the eigenvalue pairs:
/// `(h(e,d_i) - h(e,d_j)) / (d_i - d_j)` off the eigenvalue diagonal and
/// `h'_t(e, d_i)` on it. Entries lie in `[0, 1]`.
pub fn omega_matrix(eps: f64, d: &[f64]) -> Result<DMatrix<f64>, HuberError> {
    if eps == 0.0 {
        return Err(HuberError::ZeroEps);
    }
    if d.windows(2).any(|w| w[0] < w[1]) {
        return Err(HuberError::NotDescending);
    }
    let n = d.len();
    let h: Vec<f64> = d.iter().map(|&t| huber_scalar(eps, t)).collect();
    let mut omega = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let gap = d[i] - d[j];
            // Guard against catastrophic cancellation: once the eigenvalues
            // coincide to working precision the divided difference must
            // degenerate to the t-derivative to stay inside [0, 1].
            let v = if gap.abs() <= 1e-12 * d[i].abs().max(d[j].abs()).max(1.0) {
                huber_dt(eps, d[i])
            } else {
                // The exact value lies in [0, 1]; the clamp strips the
                // rounding noise of near-tied eigenvalues past the guard.
                ((h[i] - h[j]) / gap).clamp(0.0, 1.0)
            };
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }
    Ok(omega)
}

/// Spectral indices split at the smoothing threshold: `alpha` holds
/// `d_i >= eps`, `beta` holds `0 < d_i < eps`, `gamma` holds `d_i <= 0`.
/// With eigenvalues descending the three sets are contiguous ranges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSplit {
    alpha: Vec<usize>,
    beta: Vec<usize>,
    gamma: Vec<usize>,
}

impl IndexSplit {
    /// Splits a descending eigenvalue vector at threshold `eps > 0`.
    pub fn new(eps: f64, d: &[f64]) -> Result<Self, HuberError> {
        if eps <= 0.0 || eps.is_nan() {
            return Err(HuberError::NonPositiveEps(eps));
        }
        if d.windows(2).any(|w| w[0] < w[1]) {
            return Err(HuberError::NotDescending);
        }
        let a = d.iter().take_while(|&&t| t >= eps).count();
        let ab = d.iter().take_while(|&&t| t > 0.0).count();
        Ok(IndexSplit {
            alpha: (0..a).collect(),
            beta: (a..ab).collect(),
            gamma: (ab..d.len()).collect(),
        })
    }

    pub fn alpha(&self) -> &[usize] {
        &self.alpha
    }

    pub fn beta(&self) -> &[usize] {
        &self.beta
    }

    pub fn gamma(&self) -> &[usize] {
        &self.gamma
    }

    /// `(|alpha|, |beta|, |gamma|)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.alpha.len(), self.beta.len(), self.gamma.len())
    }
}

/// One spectral decomposition of `W` together with the derivative data of
/// the smoothed projector at `(eps, W)`.
#[derive(Clone, Debug)]
pub struct SmoothDecomp {
    decomp: SpectralDecomp,
    eps: f64,
    split: IndexSplit,
    omega: DMatrix<f64>,
    dpart: DVector<f64>,
}

/// Decomposes `W` and assembles the smoothing data at `eps > 0`.
pub fn smooth_decompose(eps: f64, w: &SymMat) -> Result<SmoothDecomp, HuberError> {
    if eps <= 0.0 || eps.is_nan() {
        return Err(HuberError::NonPositiveEps(eps));
    }
    let decomp = w.spectral_decompose()?;
    let d: Vec<f64> = decomp.eigenvalues().iter().copied().collect();
    let split = IndexSplit::new(eps, &d)?;
    let omega = omega_matrix(eps, &d)?;
    let dpart = DVector::from_iterator(
        d.len(),
        d.iter().map(|&t| {
            huber_partials(eps, t)
                .expect("eps > 0 by construction")
                .0
        }),
    );
    Ok(SmoothDecomp {
        decomp,
        eps,
        split,
        omega,
        dpart,
    })
}

impl SmoothDecomp {
    pub fn n(&self) -> usize {
        self.decomp.n()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn decomp(&self) -> &SpectralDecomp {
        &self.decomp
    }

    pub fn split(&self) -> &IndexSplit {
        &self.split
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// `h'_eps(eps, d_i)` per eigenvalue; all entries in `[-1/2, 0]`.
    pub fn dpart(&self) -> &DVector<f64> {
        &self.dpart
    }

    /// `Phi(eps, W)` evaluated from this decomposition.
    pub fn phi_value(&self) -> Result<SymMat, HuberError> {
        Ok(self.decomp.lift(|t| huber_scalar(self.eps, t))?)
    }

    /// `Phi'_eps(eps, W) = P diag(h'_eps(eps, d_i)) P^T`.
    pub fn phi_deps(&self) -> Result<SymMat, HuberError> {
        Ok(self.decomp.lift_values(self.dpart.as_slice())?)
    }
}

/// The smoothed projector `Phi(eps, W) = P diag(h(eps, d_i)) P^T`.
/// At `eps = 0` this is the exact PSD projection.
pub fn phi(eps: f64, w: &SymMat) -> Result<SymMat, HuberError> {
    let decomp = w.spectral_decompose()?;
    Ok(decomp.lift(|t| huber_scalar(eps, t))?)
}

/// Derivative of `Phi` at `(eps, W)` applied to a direction `(tau, H)`:
/// `P [ Omega o (P^T H P) + tau diag(h'_eps) ] P^T`.
pub fn phi_deriv_apply(sd: &SmoothDecomp, tau: f64, h: &SymMat) -> Result<SymMat, HuberError> {
    if h.n() != sd.n() {
        return Err(HuberError::DimensionMismatch {
            left: h.n(),
            right: sd.n(),
        });
    }
    let p = sd.decomp.basis();
    let mut mid = p.transpose() * h.matrix() * p;
    mid.component_mul_assign(&sd.omega);
    for i in 0..sd.n() {
        mid[(i, i)] += tau * sd.dpart[i];
    }
    Ok(SymMat::from_dense(p * mid * p.transpose())?)
}

/// Which evaluation scheme [`resolvent_apply`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResolventScheme {
    /// Pick based on the index split: low-rank when `|alpha| + |beta| <= n/2`.
    Auto,
    /// Block form over `P_alpha`, `P_beta`, `P_gamma`; cheap when the
    /// positive part of the spectrum is small.
    LowRank,
    /// `H/mu - P [ OmegaTilde o (P^T H P) ] P^T`; cheap when `alpha`
    /// dominates.
    Complement,
}

fn omega_hat_entry(omega: f64, mu: f64) -> f64 {
    omega / (1.0 + mu - omega)
}

/// Applies `[(1 + mu) I - V]^{-1} V` to `H`, where `V` is the derivative of
/// `Phi` in its matrix argument at the decomposition `sd`.
pub fn resolvent_apply(sd: &SmoothDecomp, mu: f64, h: &SymMat) -> Result<SymMat, HuberError> {
    resolvent_apply_scheme(sd, mu, h, ResolventScheme::Auto)
}

/// Same as [`resolvent_apply`] with the evaluation scheme forced.
pub fn resolvent_apply_scheme(
    sd: &SmoothDecomp,
    mu: f64,
    h: &SymMat,
    scheme: ResolventScheme,
) -> Result<SymMat, HuberError> {
    if mu <= 0.0 || mu.is_nan() {
        return Err(HuberError::NonPositiveShift(mu));
    }
    if h.n() != sd.n() {
        return Err(HuberError::DimensionMismatch {
            left: h.n(),
            right: sd.n(),
        });
    }
    let n = sd.n();
    let (na, nb, _) = sd.split.counts();
    let scheme = match scheme {
        ResolventScheme::Auto => {
            if 2 * (na + nb) <= n {
                ResolventScheme::LowRank
            } else {
                ResolventScheme::Complement
            }
        }
        s => s,
    };
    match scheme {
        ResolventScheme::LowRank => resolvent_low_rank(sd, mu, h),
        ResolventScheme::Complement => resolvent_complement(sd, mu, h),
        ResolventScheme::Auto => unreachable!(),
    }
}

fn resolvent_low_rank(sd: &SmoothDecomp, mu: f64, h: &SymMat) -> Result<SymMat, HuberError> {
    let n = sd.n();
    let (na, nb, ng) = sd.split.counts();
    let p = sd.decomp.basis();
    let pa = p.columns(0, na);
    let pb = p.columns(na, nb);
    let pg = p.columns(na + nb, ng);
    let mut out = DMatrix::<f64>::zeros(n, n);

    if na > 0 {
        let hpa = h.matrix() * pa; // n x a
        let aa = pa.transpose() * &hpa; // a x a
        out += pa * (aa / mu) * pa.transpose();
        if nb > 0 {
            let mut ab = pb.transpose() * &hpa; // b x a, entry (j,i) ~ block (alpha_i, beta_j)
            for j in 0..nb {
                for i in 0..na {
                    ab[(j, i)] *= omega_hat_entry(sd.omega[(i, na + j)], mu);
                }
            }
            let cross = pa * ab.transpose() * pb.transpose();
            out += &cross;
            out += cross.transpose();
        }
        if ng > 0 {
            let mut ag = pg.transpose() * &hpa; // g x a
            for j in 0..ng {
                for i in 0..na {
                    ag[(j, i)] *= omega_hat_entry(sd.omega[(i, na + nb + j)], mu);
                }
            }
            let cross = pa * ag.transpose() * pg.transpose();
            out += &cross;
            out += cross.transpose();
        }
    }
    if nb > 0 {
        let hpb = h.matrix() * pb;
        let mut bb = pb.transpose() * &hpb;
        for i in 0..nb {
            for j in 0..nb {
                bb[(i, j)] *= omega_hat_entry(sd.omega[(na + i, na + j)], mu);
            }
        }
        out += pb * bb * pb.transpose();
        if ng > 0 {
            // The Huber smoother is positive on (0, eps), so the beta-gamma
            // block of Omega does not vanish and needs its own cross term;
            // only the gamma-gamma block is structurally zero.
            let mut bg = pg.transpose() * &hpb; // g x b
            for j in 0..ng {
                for i in 0..nb {
                    bg[(j, i)] *= omega_hat_entry(sd.omega[(na + i, na + nb + j)], mu);
                }
            }
            let cross = pb * bg.transpose() * pg.transpose();
            out += &cross;
            out += cross.transpose();
        }
    }
    Ok(SymMat::from_dense(out)?)
}

fn resolvent_complement(sd: &SmoothDecomp, mu: f64, h: &SymMat) -> Result<SymMat, HuberError> {
    let n = sd.n();
    let p = sd.decomp.basis();
    let mut mid = p.transpose() * h.matrix() * p;
    for i in 0..n {
        for j in 0..n {
            let tilde = 1.0 / mu - omega_hat_entry(sd.omega[(i, j)], mu);
            mid[(i, j)] *= tilde;
        }
    }
    let out = h.matrix() / mu - p * mid * p.transpose();
    Ok(SymMat::from_dense(out)?)
}
