//! Continuous-variable bidirectional quantum teleportation (BQT) on weighted
//! cluster states.
//!
//! The crate has two independent computational routes to the same physics and
//! a search/optimization layer on top:
//!
//! * [`quad_algebra`] — exact Heisenberg-picture engine: optical modes as
//!   linear forms over labelled quadrature symbols, complex-linear mode
//!   transforms, homodyne photocurrents, and elimination of measured
//!   quadratures by linear solving.
//! * [`cluster`] — weighted-graph resource description: Bogoliubov matrix,
//!   cluster modes in the auxiliary r-basis, and the r-basis covariance.
//! * [`protocol`] — the five-node BQT pipeline: beam-splitter coupling of
//!   the two inputs, five homodyne measurements, feedforward gains, the
//!   residual error matrix, and a generalized feasibility search over
//!   weights and phases.
//! * [`gaussian`] — numeric Gaussian-state simulation (means + covariances)
//!   with sampled homodyne outcomes, used as an independent cross-check of
//!   the symbolic route, both analytically and by Monte Carlo.
//! * [`optimizer`] — minimization of the total added noise over the free
//!   cluster weights, with sparsity-family classification of the minima.

pub mod cluster;
pub mod gaussian;
pub mod optimizer;
pub mod protocol;
pub mod quad_algebra;

/// Coefficients with absolute value below this are pruned from linear forms.
pub const ZERO_PRUNE_TOL: f64 = 1e-12;

/// Absolute tolerance for exact-identity assertions throughout the crate.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Vacuum variance of a quadrature, fixed by the commutator [x, y] = i/2.
pub const VACUUM_VARIANCE: f64 = 0.25;

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
pub(crate) fn random_symmetric(
    n: usize,
    scale: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> nalgebra::DMatrix<f64> {
    use rand::Rng;
    let mut a = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.random_range(-scale..scale);
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    a
}
