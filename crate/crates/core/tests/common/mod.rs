//! Shared helpers for the integration suites.
#![allow(dead_code)] // not every suite uses every helper

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ssnsdp::generators::Graph;
use ssnsdp::solver::{SolveReport, SolveStatus, SolverConfig};
use ssnsdp::SymMat;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with standard-normal entries (off-diagonal entries are
/// shared across the mirror, as sampled on the upper triangle).
pub fn gauss_sym(n: usize, rng: &mut impl Rng) -> SymMat {
    SymMat::from_fn(n, |_, _| rng.sample(StandardNormal)).unwrap()
}

pub fn random_vec(m: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(m, |_, _| rng.sample(StandardNormal))
}

pub fn k3() -> Graph {
    Graph::new(3, vec![(1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap()
}

pub fn c5() -> Graph {
    Graph::new(
        5,
        vec![(1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 5, 1.0), (1, 5, 1.0)],
    )
    .unwrap()
}

/// Asserts the per-iteration loop invariants on a finished report.
pub fn assert_loop_invariants(rep: &SolveReport, cfg: &SolverConfig, label: &str) {
    assert_eq!(rep.trace.len(), rep.it1, "{label}: trace length != it1");
    for (i, s) in rep.stats.iter().enumerate() {
        assert!(
            s.psi_after < s.psi_before,
            "{label}: merit not strictly decreasing at iteration {i}"
        );
        assert!(s.eps_after > 0.0, "{label}: eps not positive at iteration {i}");
        assert!(
            s.eps_after >= s.zeta_after * cfg.eps_hat - 1e-15,
            "{label}: eps floor violated at iteration {i}"
        );
        assert!(
            s.probe_margin >= -1e-10,
            "{label}: Schur SPD probe failed at iteration {i}: margin {}",
            s.probe_margin
        );
        assert!(
            s.pcg_residual <= s.inexact_bound + 1e-14,
            "{label}: inexactness bound violated at iteration {i}"
        );
    }
}

pub fn assert_optimal(rep: &SolveReport, label: &str) {
    assert_eq!(
        rep.status,
        SolveStatus::Optimal,
        "{label}: status {:?} ({:?})",
        rep.status,
        rep.failure
    );
}
