//! SDP problem data in standard primal form
//! `min <C, X>  s.t.  <A_i, X> = b_i (i = 1..m),  X PSD`,
//! the constraint operator and its adjoint, and relative KKT residuals.
//!
//! Constraint matrices are stored sparse (upper-triangle triplets with
//! implicit mirroring) while iterates stay dense: the Schur-complement
//! algebra applies the sparse operator to dense matrices throughout.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::sym::{SymError, SymMat};

/// Errors from problem construction and operator application.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("triplet ({i}, {j}) out of range for order {n} (need i <= j < n)")]
    TripletOutOfRange { i: usize, j: usize, n: usize },
    #[error("triplet ({i}, {j}) has non-finite value")]
    TripletNonFinite { i: usize, j: usize },
    #[error("problem must have at least one constraint and a positive dimension")]
    EmptyProblem,
    #[error(transparent)]
    Sym(#[from] SymError),
}

/// Sparse symmetric matrix: upper-triangle triplets `(i, j, v)` with
/// `i <= j`, zero-based, sorted row-major, duplicates merged.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    /// Validates, sorts and merges the triplets. Entries with `i > j` are
    /// rejected; exact zeros (after merging) are dropped.
    pub fn new(n: usize, triplets: Vec<(usize, usize, f64)>) -> Result<Self, ModelError> {
        let mut entries = triplets;
        for &(i, j, v) in &entries {
            if i > j || j >= n {
                return Err(ModelError::TripletOutOfRange { i, j, n });
            }
            if !v.is_finite() {
                return Err(ModelError::TripletNonFinite { i, j });
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != 0.0);
        Ok(SparseSym { n, entries: merged })
    }

    /// The zero matrix of order `n`.
    pub fn zeros(n: usize) -> Self {
        SparseSym {
            n,
            entries: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Stored upper-triangle triplets.
    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// `<A, X>` against a dense symmetric matrix; off-diagonal triplets
    /// count twice through the implicit mirror.
    pub fn inner_dense(&self, x: &SymMat) -> Result<f64, ModelError> {
        if x.n() != self.n {
            return Err(ModelError::DimensionMismatch {
                expected: self.n,
                got: x.n(),
            });
        }
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            let w = if i == j { 1.0 } else { 2.0 };
            acc += w * v * x.get(i, j);
        }
        Ok(acc)
    }

    /// `acc += coef * A` into dense storage, mirroring the upper triangle.
    pub fn add_scaled_into(&self, coef: f64, acc: &mut DMatrix<f64>) {
        for &(i, j, v) in &self.entries {
            acc[(i, j)] += coef * v;
            if i != j {
                acc[(j, i)] += coef * v;
            }
        }
    }

    /// Densify.
    pub fn to_symmat(&self) -> SymMat {
        let mut m = DMatrix::zeros(self.n, self.n);
        self.add_scaled_into(1.0, &mut m);
        SymMat::from_dense(m).expect("sparse entries are finite")
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
            .sum::<f64>()
            .sqrt()
    }

    /// `<A, B>` of two sparse matrices (merge join over sorted triplets).
    pub fn inner_sparse(&self, other: &SparseSym) -> Result<f64, ModelError> {
        if other.n != self.n {
            return Err(ModelError::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.entries.len() && b < other.entries.len() {
            let ka = (self.entries[a].0, self.entries[a].1);
            let kb = (other.entries[b].0, other.entries[b].1);
            match ka.cmp(&kb) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    let w = if ka.0 == ka.1 { 1.0 } else { 2.0 };
                    acc += w * self.entries[a].2 * other.entries[b].2;
                    a += 1;
                    b += 1;
                }
            }
        }
        Ok(acc)
    }
}

/// An SDP instance in standard primal form.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    n: usize,
    constraints: Vec<SparseSym>,
    b: DVector<f64>,
    c: SparseSym,
    name: String,
}

impl SdpProblem {
    pub fn new(
        n: usize,
        constraints: Vec<SparseSym>,
        b: DVector<f64>,
        c: SparseSym,
        name: impl Into<String>,
    ) -> Result<Self, ModelError> {
        if n == 0 || constraints.is_empty() {
            return Err(ModelError::EmptyProblem);
        }
        if b.len() != constraints.len() {
            return Err(ModelError::DimensionMismatch {
                expected: constraints.len(),
                got: b.len(),
            });
        }
        for a in &constraints {
            if a.n() != n {
                return Err(ModelError::DimensionMismatch {
                    expected: n,
                    got: a.n(),
                });
            }
        }
        if c.n() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                got: c.n(),
            });
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::TripletNonFinite { i: 0, j: 0 });
        }
        Ok(SdpProblem {
            n,
            constraints,
            b,
            c,
            name: name.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of equality constraints.
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn constraints(&self) -> &[SparseSym] {
        &self.constraints
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn cost(&self) -> &SparseSym {
        &self.c
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// The constraint map `A X = (<A_1, X>, ..., <A_m, X>)`.
    pub fn apply_a(&self, x: &SymMat) -> Result<DVector<f64>, ModelError> {
        if x.n() != self.n {
            return Err(ModelError::DimensionMismatch {
                expected: self.n,
                got: x.n(),
            });
        }
        let mut out = DVector::zeros(self.m());
        for (k, a) in self.constraints.iter().enumerate() {
            out[k] = a.inner_dense(x)?;
        }
        Ok(out)
    }

    /// The adjoint `A* y = sum_i y_i A_i`, densified.
    pub fn apply_astar(&self, y: &DVector<f64>) -> Result<SymMat, ModelError> {
        if y.len() != self.m() {
            return Err(ModelError::DimensionMismatch {
                expected: self.m(),
                got: y.len(),
            });
        }
        let mut acc = DMatrix::zeros(self.n, self.n);
        for (k, a) in self.constraints.iter().enumerate() {
            a.add_scaled_into(y[k], &mut acc);
        }
        Ok(SymMat::from_dense(acc)?)
    }

    /// Dual slack `C - A* y`.
    pub fn dual_slack(&self, y: &DVector<f64>) -> Result<SymMat, ModelError> {
        let mut acc = DMatrix::zeros(self.n, self.n);
        self.c.add_scaled_into(1.0, &mut acc);
        if y.len() != self.m() {
            return Err(ModelError::DimensionMismatch {
                expected: self.m(),
                got: y.len(),
            });
        }
        for (k, a) in self.constraints.iter().enumerate() {
            a.add_scaled_into(-y[k], &mut acc);
        }
        Ok(SymMat::from_dense(acc)?)
    }

    /// Relative KKT residuals of the triple `(X, y, Z)`.
    pub fn kkt_residuals(
        &self,
        x: &SymMat,
        y: &DVector<f64>,
        z: &SymMat,
    ) -> Result<KktResiduals, ModelError> {
        let ax = self.apply_a(x)?;
        let eta_p = (&ax - &self.b).norm() / (1.0 + self.b.norm());

        let astar_y = self.apply_astar(y)?;
        let c_dense = self.c.to_symmat();
        let dual_gap = &(&astar_y + z) - &c_dense;
        let eta_d = dual_gap.frob_norm() / (1.0 + self.c.frob_norm());

        let proj = (x - z).psd_project()?;
        let eta_c = (x - &proj).frob_norm() / (1.0 + x.frob_norm() + z.frob_norm());

        Ok(KktResiduals::new(
            eta_p,
            eta_d,
            eta_c,
            self.c.inner_dense(x)?,
            self.b.dot(y),
        ))
    }
}

/// The three relative KKT residuals and the two objective values.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct KktResiduals {
    pub eta_p: f64,
    pub eta_d: f64,
    pub eta_c: f64,
    pub eta_kkt: f64,
    pub obj_primal: f64,
    pub obj_dual: f64,
}

impl KktResiduals {
    pub fn new(eta_p: f64, eta_d: f64, eta_c: f64, obj_primal: f64, obj_dual: f64) -> Self {
        KktResiduals {
            eta_p,
            eta_d,
            eta_c,
            eta_kkt: eta_p.max(eta_d).max(eta_c),
            obj_primal,
            obj_dual,
        }
    }
}
