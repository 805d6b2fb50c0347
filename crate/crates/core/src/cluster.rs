//! Weighted-graph resource description and cluster-state construction.
//!
//! A cluster state is fixed by a symmetric weighted adjacency matrix `A`.
//! The generating Gaussian unitary is the normalized Bogoliubov matrix
//! `U = (I + iA)(I + A^2)^{-1/2}`; in the auxiliary r-basis defined by
//! `r = (I + A^2)^{-1/2} s` the cluster modes take the simple form
//! `X_j = x_rj - sum_k A_jk y_rk`, `Y_j = y_rj + sum_k A_jk x_rk`, and the
//! r-quadrature covariance of equally squeezed oscillators is
//! `(I + A^2)^{-1}` times the s-quadrature variance.

use nalgebra::DMatrix;
use num_complex::Complex;
use thiserror::Error;

use crate::quad_algebra::{BasisLabel, LinForm, QuadMode};
use crate::VACUUM_VARIANCE;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("adjacency matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency matrix is not symmetric at ({i},{j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("adjacency matrix has nonzero diagonal at ({0},{0}): {1}")]
    NonzeroDiagonal(usize, f64),
    #[error("adjacency matrix has non-finite entry at ({i},{j})")]
    NonFinite { i: usize, j: usize },
    #[error("a protocol graph needs at least 2 nodes, got {0}")]
    TooSmall(usize),
    #[error("squeezed y-variance must lie in (0, {max}], got {got}")]
    BadYVariance { got: f64, max: f64 },
    #[error("variance product {0} violates the minimum uncertainty bound 1/16")]
    BelowMinimumUncertainty(f64),
}

/// Symmetric weighted adjacency of the cluster resource.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    weights: DMatrix<f64>,
}

impl WeightedGraph {
    /// Validates symmetry, zero diagonal and finiteness.
    pub fn new(weights: DMatrix<f64>) -> Result<Self, ClusterError> {
        validate_adjacency(&weights)?;
        if weights.nrows() < 2 {
            return Err(ClusterError::TooSmall(weights.nrows()));
        }
        Ok(WeightedGraph { weights })
    }

    /// Builds an n-node graph from an upper-triangle edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, ClusterError> {
        let mut w = DMatrix::zeros(n, n);
        for &(i, j, g) in edges {
            w[(i, j)] = g;
            w[(j, i)] = g;
        }
        Self::new(w)
    }

    pub fn node_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// Edges with nonzero weight, upper triangle only.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.weights[(i, j)] != 0.0 {
                    out.push((i, j, self.weights[(i, j)]));
                }
            }
        }
        out
    }
}

/// Confirms symmetry, zero diagonal and finite entries.
pub fn validate_adjacency(a: &DMatrix<f64>) -> Result<(), ClusterError> {
    if a.nrows() != a.ncols() {
        return Err(ClusterError::NotSquare { rows: a.nrows(), cols: a.ncols() });
    }
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            if !a[(i, j)].is_finite() {
                return Err(ClusterError::NonFinite { i, j });
            }
        }
    }
    for i in 0..n {
        if a[(i, i)].abs() > SYMMETRY_TOL {
            return Err(ClusterError::NonzeroDiagonal(i, a[(i, i)]));
        }
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(ClusterError::NotSymmetric { i, j, a: a[(i, j)], b: a[(j, i)] });
            }
        }
    }
    Ok(())
}

/// Per-oscillator variances of the squeezed resource states.
///
/// All oscillators are squeezed in y; `y_variance` is their common
/// y-quadrature variance and `x_variance` the anti-squeezed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingSpec {
    pub x_variance: f64,
    pub y_variance: f64,
}

impl SqueezingSpec {
    /// Validates `0 < y_variance <= 1/4` (vacuum allowed as the 0 dB limit)
    /// and the minimum uncertainty bound `x_variance * y_variance >= 1/16`.
    pub fn new(x_variance: f64, y_variance: f64) -> Result<Self, ClusterError> {
        if !(y_variance > 0.0 && y_variance <= VACUUM_VARIANCE) || !y_variance.is_finite() {
            return Err(ClusterError::BadYVariance { got: y_variance, max: VACUUM_VARIANCE });
        }
        let product = x_variance * y_variance;
        if product < 1.0 / 16.0 - 1e-12 || !x_variance.is_finite() {
            return Err(ClusterError::BelowMinimumUncertainty(product));
        }
        Ok(SqueezingSpec { x_variance, y_variance })
    }

    /// Pure (minimum-uncertainty) state: `x_variance = 1/(16 y_variance)`.
    pub fn pure(y_variance: f64) -> Result<Self, ClusterError> {
        Self::new(1.0 / (16.0 * y_variance), y_variance)
    }

    /// Pure state at the given squeezing degree in dB.
    pub fn from_db(db: f64) -> Result<Self, ClusterError> {
        Self::pure(crate::protocol::db_to_variance(db))
    }

    /// True when strictly below the vacuum variance.
    pub fn is_genuinely_squeezed(&self) -> bool {
        self.y_variance < VACUUM_VARIANCE
    }
}

/// Normalized Bogoliubov matrix `(I + iA)(I + A^2)^{-1/2}` of a symmetric
/// adjacency matrix. The result is unitary because
/// `(I + iA)^dagger (I + iA) = I + A^2`.
pub fn bogoliubov_matrix(a: &DMatrix<f64>) -> Result<DMatrix<Complex<f64>>, ClusterError> {
    validate_adjacency(a)?;
    let n = a.nrows();
    let inv_sqrt = inv_sqrt_i_plus_a2(a);
    let mut u = DMatrix::from_element(n, n, Complex::new(0.0, 0.0));
    for i in 0..n {
        for j in 0..n {
            let mut re = 0.0;
            let mut im = 0.0;
            for k in 0..n {
                re += if i == k { inv_sqrt[(k, j)] } else { 0.0 };
                im += a[(i, k)] * inv_sqrt[(k, j)];
            }
            u[(i, j)] = Complex::new(re, im);
        }
    }
    Ok(u)
}

/// `(I + A^2)^{-1/2}` via symmetric eigendecomposition. All eigenvalues of
/// `I + A^2` are >= 1 because `A^2` is positive semidefinite.
fn inv_sqrt_i_plus_a2(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = DMatrix::identity(n, n) + a * a;
    let eig = m.symmetric_eigen();
    debug_assert!(eig.eigenvalues.iter().all(|&l| l >= 1.0 - 1e-9));
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// `(I + A^2)^{-1}` via symmetric eigendecomposition.
fn inv_i_plus_a2(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let m = DMatrix::identity(n, n) + a * a;
    let eig = m.symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Cluster modes in the r-basis: mode `j` is
/// `(x_rj - sum_k A_jk y_rk, y_rj + sum_k A_jk x_rk)`, i.e. the image of the
/// elementary r-modes under `I + iA`.
pub fn cluster_modes(a: &DMatrix<f64>) -> Result<Vec<QuadMode>, ClusterError> {
    validate_adjacency(a)?;
    let n = a.nrows();
    let mut modes = Vec::with_capacity(n);
    for j in 0..n {
        let mut x = LinForm::symbol(BasisLabel::RX(j));
        let mut y = LinForm::symbol(BasisLabel::RY(j));
        for k in 0..n {
            if a[(j, k)] != 0.0 {
                x = crate::quad_algebra::combine(&x, 1.0, &LinForm::symbol(BasisLabel::RY(k)), -a[(j, k)]);
                y = crate::quad_algebra::combine(&y, 1.0, &LinForm::symbol(BasisLabel::RX(k)), a[(j, k)]);
            }
        }
        modes.push(QuadMode { x, y });
    }
    Ok(modes)
}

/// Covariance blocks of the r-basis quadratures for independent, equally
/// squeezed oscillators: `Cov(x_r) = (I + A^2)^{-1} x_variance` and
/// `Cov(y_r) = (I + A^2)^{-1} y_variance`. The cross block is zero.
pub fn r_covariance(
    a: &DMatrix<f64>,
    spec: &SqueezingSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>), ClusterError> {
    validate_adjacency(a)?;
    let inv = inv_i_plus_a2(a);
    Ok((&inv * spec.x_variance, inv * spec.y_variance))
}
