//! Dense symmetric matrices, the trace inner product, full spectral
//! decompositions and the exact projection onto the PSD cone.
//!
//! Everything downstream (the Huber smoothing, the Newton solver) is phrased
//! in terms of a spectral decomposition `W = P diag(d) P^T` with eigenvalues
//! sorted in descending order, so [`SpectralDecomp`] pins that convention
//! here once and the index-set logic elsewhere can rely on it.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Errors from symmetric-matrix construction and factorization.
#[derive(Debug, Error)]
pub enum SymError {
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("symmetric eigensolver failed to converge (matrix Frobenius norm {norm:.6e})")]
    EigenFailed { norm: f64 },
}

/// A dense real symmetric matrix.
///
/// Symmetry is enforced on construction: builders either read only the upper
/// triangle and mirror it, or average `(M + M^T)/2`, which is exactly
/// symmetric in IEEE arithmetic. Constructors reject NaN and infinities.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat {
    data: DMatrix<f64>,
}

impl SymMat {
    /// The zero matrix of order `n`.
    pub fn zeros(n: usize) -> Self {
        SymMat {
            data: DMatrix::zeros(n, n),
        }
    }

    /// The identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        SymMat {
            data: DMatrix::identity(n, n),
        }
    }

    /// Diagonal matrix from the given entries.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self, SymError> {
        let n = diag.len();
        let mut data = DMatrix::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            if !v.is_finite() {
                return Err(SymError::NonFinite);
            }
            data[(i, i)] = v;
        }
        Ok(SymMat { data })
    }

    /// Builds an `n x n` symmetric matrix by evaluating `f(i, j)` on the
    /// upper triangle (`i <= j`) and mirroring.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Result<Self, SymError> {
        let mut data = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(SymError::NonFinite);
                }
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Ok(SymMat { data })
    }

    /// Symmetrizes an arbitrary square matrix as `(M + M^T)/2` and validates
    /// finiteness. This is the entry point for results of products such as
    /// `P f(D) P^T` whose floating-point evaluation is only symmetric up to
    /// rounding.
    pub fn from_dense(m: DMatrix<f64>) -> Result<Self, SymError> {
        if m.nrows() != m.ncols() {
            return Err(SymError::DimensionMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let mut data = m;
        for i in 0..data.nrows() {
            for j in (i + 1)..data.ncols() {
                let v = 0.5 * (data[(i, j)] + data[(j, i)]);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(SymError::NonFinite);
        }
        Ok(SymMat { data })
    }

    /// Matrix order.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Entry accessor.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    /// Borrow the dense storage.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Consume into the dense storage.
    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Trace inner product `<A, B> = sum_ij A_ij B_ij`.
    pub fn inner(&self, other: &SymMat) -> Result<f64, SymError> {
        if self.n() != other.n() {
            return Err(SymError::DimensionMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        Ok(self.data.dot(&other.data))
    }

    /// Frobenius norm, `sqrt(<A, A>)`.
    pub fn frob_norm(&self) -> f64 {
        self.data.norm()
    }

    /// `self + t * other`.
    pub fn add_scaled(&self, other: &SymMat, t: f64) -> Result<SymMat, SymError> {
        if self.n() != other.n() {
            return Err(SymError::DimensionMismatch {
                left: self.n(),
                right: other.n(),
            });
        }
        Ok(SymMat {
            data: &self.data + &other.data * t,
        })
    }

    /// `t * self`.
    pub fn scale(&self, t: f64) -> SymMat {
        SymMat {
            data: &self.data * t,
        }
    }

    /// Full spectral decomposition with eigenvalues sorted descending.
    pub fn spectral_decompose(&self) -> Result<SpectralDecomp, SymError> {
        let n = self.n();
        if n == 0 {
            return Ok(SpectralDecomp {
                p: DMatrix::zeros(0, 0),
                d: DVector::zeros(0),
            });
        }
        let cap = 500 * n.max(4);
        let eig = nalgebra::SymmetricEigen::try_new(self.data.clone(), f64::EPSILON, cap)
            .ok_or(SymError::EigenFailed {
                norm: self.frob_norm(),
            })?;
        // The backend returns eigenvalues in no particular order; re-sort
        // descending and permute the basis columns to match.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .expect("eigenvalues are finite")
        });
        let p = eig.eigenvectors.select_columns(order.iter());
        let d = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        Ok(SpectralDecomp { p, d })
    }

    /// Projection onto the PSD cone: clip negative eigenvalues to zero.
    pub fn psd_project(&self) -> Result<SymMat, SymError> {
        self.spectral_decompose()?.lift(|t| t.max(0.0))
    }
}

impl std::ops::Add<&SymMat> for &SymMat {
    type Output = SymMat;
    fn add(self, rhs: &SymMat) -> SymMat {
        SymMat {
            data: &self.data + &rhs.data,
        }
    }
}

impl std::ops::Sub<&SymMat> for &SymMat {
    type Output = SymMat;
    fn sub(self, rhs: &SymMat) -> SymMat {
        SymMat {
            data: &self.data - &rhs.data,
        }
    }
}

impl std::ops::Neg for &SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        SymMat { data: -&self.data }
    }
}

/// Spectral factorization `W = P diag(d) P^T`, eigenvalues descending.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    p: DMatrix<f64>,
    d: DVector<f64>,
}

impl SpectralDecomp {
    /// The orthogonal factor.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.d
    }

    /// Matrix order.
    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Spectral lift `P diag(f(d_i)) P^T` of a scalar function.
    pub fn lift<F: Fn(f64) -> f64>(&self, f: F) -> Result<SymMat, SymError> {
        let vals: Vec<f64> = self.d.iter().map(|&t| f(t)).collect();
        self.lift_values(&vals)
    }

    /// `P diag(vals) P^T` for explicit per-eigenvalue values.
    pub fn lift_values(&self, vals: &[f64]) -> Result<SymMat, SymError> {
        if vals.len() != self.n() {
            return Err(SymError::DimensionMismatch {
                left: self.n(),
                right: vals.len(),
            });
        }
        let mut scaled = self.p.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= vals[j];
        }
        SymMat::from_dense(scaled * self.p.transpose())
    }

    /// Reassembles the source matrix.
    pub fn reconstruct(&self) -> Result<SymMat, SymError> {
        self.lift(|t| t)
    }
}
