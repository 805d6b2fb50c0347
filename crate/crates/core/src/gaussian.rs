//! Numeric Gaussian-state simulation: means and covariances over the
//! quadratures, symplectic unitaries, sampled homodyne measurements with
//! conditional updates, and a Monte-Carlo driver for the teleportation
//! pipeline.
//!
//! Quadratures are ordered x-block-then-y-block; the vacuum variance is 1/4
//! throughout, fixed by the commutator [x, y] = i/2.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use thiserror::Error;

use crate::cluster::{bogoliubov_matrix, ClusterError, SqueezingSpec};
use crate::protocol::{
    added_noise_fidelity, error_variances, run_bqt, ProtocolConfig, ProtocolError, RoleAssignment,
    TeleportReport,
};
use crate::VACUUM_VARIANCE;

const SYMMETRY_TOL: f64 = 1e-12;
const UNITARITY_TOL: f64 = 1e-9;
/// Marginal variances below this make a homodyne outcome deterministic and
/// the conditional update singular.
const DEGENERATE_MARGINAL: f64 = 1e-15;
/// Samples per independently seeded work chunk; fixed so that results do
/// not depend on the number of worker threads.
const CHUNK: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("mean has length {mean}, covariance is {rows}x{cols}; expected 2n, 2n x 2n")]
    ShapeMismatch { mean: usize, rows: usize, cols: usize },
    #[error("covariance is not symmetric at ({i},{j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("non-finite entry in state data")]
    NonFinite,
    #[error("mode index {mode} out of range for {n} modes")]
    BadMode { mode: usize, n: usize },
    #[error("transform is not unitary: max |U^dag U - I| = {0:.3e}")]
    NotUnitary(f64),
    #[error("degenerate measurement: marginal variance {0:.3e} below {DEGENERATE_MARGINAL:.0e}")]
    DegenerateMeasurement(f64),
    #[error("Monte-Carlo run needs at least 1000 samples, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// A Gaussian state over `n` modes: mean vector of length `2n` and
/// symmetric covariance, ordered x-block-then-y-block.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, GaussianError> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d || d % 2 != 0 {
            return Err(GaussianError::ShapeMismatch { mean: d, rows: cov.nrows(), cols: cov.ncols() });
        }
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(GaussianError::NonFinite);
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(GaussianError::NotSymmetric { i, j });
                }
            }
        }
        Ok(GaussianState { mean, cov })
    }

    pub fn vacuum(n_modes: usize) -> Self {
        GaussianState {
            mean: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes) * VACUUM_VARIANCE,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// (x, y) mean of one mode.
    pub fn mode_mean(&self, mode: usize) -> (f64, f64) {
        let n = self.n_modes();
        (self.mean[mode], self.mean[n + mode])
    }

    /// Symplectic eigenvalue test of the uncertainty relation
    /// `cov + (i/4) Omega >= 0`: every eigenvalue magnitude of
    /// `Omega cov` must reach the vacuum variance.
    pub fn satisfies_uncertainty(&self, tol: f64) -> bool {
        let omega = symplectic_form(self.n_modes());
        let eigs = (omega * &self.cov).complex_eigenvalues();
        eigs.iter().all(|l| l.norm() >= VACUUM_VARIANCE - tol)
    }

    /// `det(4 cov)`: equals 1 exactly for pure states and is preserved by
    /// symplectic transforms.
    pub fn purity_det(&self) -> f64 {
        (self.cov.clone() * 4.0).determinant()
    }
}

/// The canonical symplectic form `[[0, I], [-I, 0]]` in the block ordering
/// of [`GaussianState`]; the physical commutator is i/2 times it.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for j in 0..n_modes {
        omega[(j, n_modes + j)] = 1.0;
        omega[(n_modes + j, j)] = -1.0;
    }
    omega
}

/// Product state: squeezed modes carry `(x_variance, y_variance)` on the
/// diagonal, all other modes are vacuum; `coherent_means` displaces the
/// listed modes.
pub fn make_input_state(
    n_modes: usize,
    squeezed: &[usize],
    spec: &SqueezingSpec,
    coherent_means: &[(usize, (f64, f64))],
) -> Result<GaussianState, GaussianError> {
    let mut state = GaussianState::vacuum(n_modes);
    for &j in squeezed {
        if j >= n_modes {
            return Err(GaussianError::BadMode { mode: j, n: n_modes });
        }
        state.cov[(j, j)] = spec.x_variance;
        state.cov[(n_modes + j, n_modes + j)] = spec.y_variance;
    }
    for &(j, (mx, my)) in coherent_means {
        if j >= n_modes {
            return Err(GaussianError::BadMode { mode: j, n: n_modes });
        }
        state.mean[j] = mx;
        state.mean[n_modes + j] = my;
    }
    Ok(state)
}

/// Real symplectic embedding `[[Re U, -Im U], [Im U, Re U]]` of a complex
/// unitary acting on the given mode subset, as a full `2n x 2n` matrix.
pub fn symplectic_embedding(
    u: &DMatrix<Complex<f64>>,
    n_modes: usize,
    modes: &[usize],
) -> Result<DMatrix<f64>, GaussianError> {
    let k = modes.len();
    if u.nrows() != k || u.ncols() != k {
        return Err(GaussianError::ShapeMismatch { mean: 2 * k, rows: u.nrows(), cols: u.ncols() });
    }
    for (i, &m) in modes.iter().enumerate() {
        if m >= n_modes || modes[..i].contains(&m) {
            return Err(GaussianError::BadMode { mode: m, n: n_modes });
        }
    }
    let gram_dev = (u.adjoint() * u - DMatrix::identity(k, k))
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    if gram_dev > UNITARITY_TOL {
        return Err(GaussianError::NotUnitary(gram_dev));
    }
    let mut s = DMatrix::identity(2 * n_modes, 2 * n_modes);
    for (a, &ma) in modes.iter().enumerate() {
        for (b, &mb) in modes.iter().enumerate() {
            s[(ma, mb)] = u[(a, b)].re;
            s[(ma, n_modes + mb)] = -u[(a, b)].im;
            s[(n_modes + ma, mb)] = u[(a, b)].im;
            s[(n_modes + ma, n_modes + mb)] = u[(a, b)].re;
        }
    }
    Ok(s)
}

/// Applies a unitary to a subset of modes: `mean <- S mean`,
/// `cov <- S cov S^T` with the symplectic embedding of `u`.
pub fn apply_unitary(
    state: &GaussianState,
    u: &DMatrix<Complex<f64>>,
    modes: &[usize],
) -> Result<GaussianState, GaussianError> {
    let s = symplectic_embedding(u, state.n_modes(), modes)?;
    Ok(GaussianState {
        mean: &s * &state.mean,
        cov: &s * &state.cov * s.transpose(),
    })
}

/// Shifts one mode's mean by (dx, dy); the covariance is unchanged.
pub fn displace(
    state: &GaussianState,
    mode: usize,
    dx: f64,
    dy: f64,
) -> Result<GaussianState, GaussianError> {
    let n = state.n_modes();
    if mode >= n {
        return Err(GaussianError::BadMode { mode, n });
    }
    let mut out = state.clone();
    out.mean[mode] += dx;
    out.mean[n + mode] += dy;
    Ok(out)
}

/// A sampled homodyne measurement and the conditioned remainder.
#[derive(Debug, Clone)]
pub struct MeasurementRecord {
    pub mode: usize,
    pub theta: f64,
    /// Realized value of `cos(theta) x + sin(theta) y`; the photocurrent is
    /// beta0 times this.
    pub outcome: f64,
    /// Remaining modes after conditioning, with the measured mode removed.
    pub post_state: GaussianState,
}

/// Samples the homodyne outcome of `cos(theta) x + sin(theta) y` on one
/// mode, conditions the remaining modes with the rank-one Schur update, and
/// removes the measured mode.
pub fn homodyne_measure(
    state: &GaussianState,
    mode: usize,
    theta: f64,
    rng: &mut impl rand::Rng,
) -> Result<MeasurementRecord, GaussianError> {
    let n = state.n_modes();
    if mode >= n {
        return Err(GaussianError::BadMode { mode, n });
    }
    let mut direction = DVector::zeros(2 * n);
    direction[mode] = theta.cos();
    direction[n + mode] = theta.sin();

    let cov_dir = &state.cov * &direction;
    let marginal_var = direction.dot(&cov_dir);
    if marginal_var < DEGENERATE_MARGINAL {
        return Err(GaussianError::DegenerateMeasurement(marginal_var));
    }
    let marginal_mean = direction.dot(&state.mean);
    let outcome = Normal::new(marginal_mean, marginal_var.sqrt())
        .expect("positive standard deviation")
        .sample(rng);

    let gain = &cov_dir / marginal_var;
    let mean = &state.mean + &gain * (outcome - marginal_mean);
    let cov = &state.cov - &cov_dir * (cov_dir.transpose() / marginal_var);

    // Drop the measured mode's x and y rows and columns, keeping block order.
    let xs: Vec<usize> = (0..n).filter(|&j| j != mode).collect();
    let order: Vec<usize> = xs.iter().copied().chain(xs.iter().map(|&j| n + j)).collect();

    let red_mean = DVector::from_fn(order.len(), |r, _| mean[order[r]]);
    let red_cov = DMatrix::from_fn(order.len(), order.len(), |r, c| cov[(order[r], order[c])]);

    Ok(MeasurementRecord {
        mode,
        theta,
        outcome,
        post_state: GaussianState { mean: red_mean, cov: red_cov },
    })
}

/// Monte-Carlo estimate of the teleportation residuals.
#[derive(Debug, Clone)]
pub struct McReport {
    pub n_samples: usize,
    /// Mean of the conditional-mean residuals; zero when the feedforward
    /// cancels every classical term.
    pub residual_mean: Vector4<f64>,
    pub residual_mean_se: Vector4<f64>,
    /// Shot-to-shot covariance of the conditional-mean residuals.
    pub residual_cov: Matrix4<f64>,
    /// Post-measurement covariance of the output quadratures; the same in
    /// every shot for Gaussian states.
    pub conditional_cov: Matrix4<f64>,
    /// Added-noise covariance estimate:
    /// `residual_cov + conditional_cov - vacuum`. By the law of total
    /// variance its expectation equals the analytic error covariance.
    pub added_cov: Matrix4<f64>,
    /// Standard error of the sampled part of the added-noise diagonal.
    pub added_diag_se: Vector4<f64>,
    /// Analytic error-variance diagonal for comparison.
    pub analytic_diag: Vector4<f64>,
    pub fidelity_a: f64,
    pub fidelity_b: f64,
}

struct ShotSetup {
    /// Fully coupled state with zero means; the covariance never changes
    /// between shots.
    base: GaussianState,
    /// Image of the input amplitudes (x_a, y_a, x_b, y_b) under the total
    /// symplectic map; inputs are displaced before the optics, so their
    /// means propagate through cluster and beam splitters.
    mean_map: DMatrix<f64>,
    gains: nalgebra::SMatrix<f64, 4, 5>,
    beta0: f64,
    /// (original mode id, phase) in photocurrent order.
    measured: Vec<(usize, f64)>,
    output_nodes: [usize; 2],
    fixed_means: Option<[(f64, f64); 2]>,
}

/// Output quadrature rows (X_B, X_A, Y_B, Y_A) of the reduced two-mode
/// state left after the five measurements.
fn output_rows(live: &[usize], outputs: [usize; 2]) -> [usize; 4] {
    let n = live.len();
    let pos = |orig: usize| live.iter().position(|&m| m == orig).expect("output mode remains");
    let (p1, p2) = (pos(outputs[0]), pos(outputs[1]));
    [p1, p2, n + p1, n + p2]
}

fn build_shot_setup(
    config: &ProtocolConfig,
    roles: &RoleAssignment,
    report: &TeleportReport,
) -> Result<ShotSetup, GaussianError> {
    let graph = config.graph();
    let n = graph.node_count();
    let total = n + 2;
    let spec = config.squeezing()?;
    let squeezed: Vec<usize> = (0..n).collect();
    let state = make_input_state(total, &squeezed, &spec, &[])?;

    let u_cluster = bogoliubov_matrix(graph.adjacency())?;
    let s_cluster = symplectic_embedding(&u_cluster, total, &squeezed)?;

    // Symmetric beam splitter; the first subset mode becomes the sum port.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u_bs = DMatrix::from_row_slice(2, 2, &[s, s, s, -s]).map(|v| Complex::new(v, 0.0));
    let a_node = roles.input_attach[0].1;
    let b_node = roles.input_attach[1].1;
    let a_in = n;
    let b_in = n + 1;
    let s_total = symplectic_embedding(&u_bs, total, &[b_in, b_node])?
        * symplectic_embedding(&u_bs, total, &[a_in, a_node])?
        * s_cluster;
    let state = GaussianState {
        mean: DVector::zeros(2 * total),
        cov: &s_total * &state.cov * s_total.transpose(),
    };

    // Columns of the total map that carry the input amplitudes,
    // ordered (x_a, y_a, x_b, y_b).
    let input_cols = [a_in, total + a_in, b_in, total + b_in];
    let mean_map = DMatrix::from_fn(2 * total, 4, |r, c| s_total[(r, input_cols[c])]);

    let mut measured = vec![
        (a_in, config.phases[0]),
        (a_node, config.phases[1]),
        (b_in, config.phases[2]),
        (b_node, config.phases[3]),
    ];
    for (k, &node) in roles.measured_nodes.iter().enumerate() {
        measured.push((node, config.phases[4 + k]));
    }

    Ok(ShotSetup {
        base: state,
        mean_map,
        gains: report.gains,
        beta0: config.beta0,
        measured,
        output_nodes: [roles.output_nodes[0], roles.output_nodes[1]],
        fixed_means: config.input_means.map(|m| [m.a, m.b]),
    })
}

/// One shot: displace the inputs to their drawn means, run the five
/// homodynes, apply the feedforward displacement, and return the
/// conditional-mean residuals together with the post-measurement
/// covariance of the outputs.
fn run_shot(
    setup: &ShotSetup,
    rng: &mut ChaCha8Rng,
) -> Result<(Vector4<f64>, Matrix4<f64>), GaussianError> {
    let amplitude = Uniform::new_inclusive(-5.0, 5.0).expect("static range");
    let means: [(f64, f64); 2] = match setup.fixed_means {
        Some(m) => m,
        None => {
            let mut draw = || (amplitude.sample(rng), amplitude.sample(rng));
            [draw(), draw()]
        }
    };

    let mut state = setup.base.clone();
    let amplitudes =
        DVector::from_column_slice(&[means[0].0, means[0].1, means[1].0, means[1].1]);
    state.mean = &setup.mean_map * amplitudes;

    let mut live: Vec<usize> = (0..state.n_modes()).collect();
    let mut photocurrents = [0.0; 5];
    for (k, &(orig, theta)) in setup.measured.iter().enumerate() {
        let mode = live.iter().position(|&m| m == orig).expect("mode not yet measured");
        let record = homodyne_measure(&state, mode, theta, rng)?;
        photocurrents[k] = setup.beta0 * record.outcome;
        state = record.post_state;
        live.remove(mode);
    }

    // Feedforward: rows of the gain matrix are (X_B, X_A, Y_B, Y_A).
    let d = setup.gains * nalgebra::SVector::<f64, 5>::from_row_slice(&photocurrents);
    let rows = output_rows(&live, setup.output_nodes);
    let out_pos_1 = rows[0];
    let out_pos_2 = rows[1];
    state = displace(&state, out_pos_1, d[0], d[2])?;
    state = displace(&state, out_pos_2, d[1], d[3])?;

    let residual = Vector4::new(
        state.mean[rows[0]] - means[0].0,
        state.mean[rows[1]] - means[1].0,
        state.mean[rows[2]] - means[0].1,
        state.mean[rows[3]] - means[1].1,
    );
    let cond = Matrix4::from_fn(|r, c| state.cov[(rows[r], rows[c])]);
    Ok((residual, cond))
}

#[derive(Clone, Copy)]
struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn new() -> Self {
        Kahan { sum: 0.0, c: 0.0 }
    }
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

struct ChunkMoments {
    count: usize,
    sum: [Kahan; 4],
    sum_sq: [[Kahan; 4]; 4],
}

impl ChunkMoments {
    fn new() -> Self {
        ChunkMoments { count: 0, sum: [Kahan::new(); 4], sum_sq: [[Kahan::new(); 4]; 4] }
    }
    fn push(&mut self, r: &Vector4<f64>) {
        self.count += 1;
        for i in 0..4 {
            self.sum[i].add(r[i]);
            for j in 0..4 {
                self.sum_sq[i][j].add(r[i] * r[j]);
            }
        }
    }
}

/// Runs the Monte-Carlo oracle: per sample, fresh coherent inputs with
/// means drawn uniformly in [-5, 5] (unless the config pins them), the full
/// optical pipeline, five sampled homodynes, feedforward displacement, and
/// the residual of the output means against the teleported input means.
///
/// Samples are partitioned into fixed-size chunks, each with its own
/// deterministic RNG substream, and the chunk moments are merged in index
/// order with compensated summation, so the result is reproducible for a
/// fixed seed regardless of thread count.
pub fn run_protocol_mc(
    config: &ProtocolConfig,
    roles: &RoleAssignment,
    n_samples: usize,
    seed: u64,
) -> Result<McReport, GaussianError> {
    if n_samples < 1000 {
        return Err(GaussianError::TooFewSamples(n_samples));
    }
    let report = run_bqt(config, roles)?;
    let setup = build_shot_setup(config, roles, &report)?;
    let spec = config.squeezing()?;
    let (analytic_diag, _) = error_variances(&report, &config.graph(), &spec)?;

    let n_chunks = n_samples.div_ceil(CHUNK);
    let chunk_results: Vec<Result<(ChunkMoments, Matrix4<f64>), GaussianError>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n_samples);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64 + 1);
            let mut moments = ChunkMoments::new();
            let mut cond = Matrix4::zeros();
            for _ in lo..hi {
                let (residual, c) = run_shot(&setup, &mut rng)?;
                moments.push(&residual);
                cond = c;
            }
            Ok((moments, cond))
        })
        .collect();

    let mut total = ChunkMoments::new();
    let mut conditional_cov = Matrix4::zeros();
    for res in chunk_results {
        let (m, cond) = res?;
        total.count += m.count;
        for i in 0..4 {
            total.sum[i].add(m.sum[i].sum);
            for j in 0..4 {
                total.sum_sq[i][j].add(m.sum_sq[i][j].sum);
            }
        }
        conditional_cov = cond;
    }

    let n = total.count as f64;
    let mean = Vector4::from_fn(|i, _| total.sum[i].sum / n);
    let residual_cov = Matrix4::from_fn(|i, j| {
        (total.sum_sq[i][j].sum - n * mean[i] * mean[j]) / (n - 1.0)
    });
    let added_cov = residual_cov + conditional_cov - Matrix4::identity() * VACUUM_VARIANCE;
    let residual_mean_se = Vector4::from_fn(|i, _| (residual_cov[(i, i)] / n).sqrt());
    let added_diag_se =
        Vector4::from_fn(|i, _| residual_cov[(i, i)] * (2.0 / (n - 1.0)).sqrt());

    Ok(McReport {
        n_samples,
        residual_mean: mean,
        residual_mean_se,
        residual_cov,
        conditional_cov,
        added_cov,
        added_diag_se,
        analytic_diag,
        fidelity_a: added_noise_fidelity(added_cov[(1, 1)], added_cov[(3, 3)]),
        fidelity_b: added_noise_fidelity(added_cov[(0, 0)], added_cov[(2, 2)]),
    })
}

/// Added-noise covariance by pure covariance algebra, without sampling:
/// the covariance of the displaced output rows minus the vacuum input
/// noise. An independent numeric route to the same quantity as
/// [`error_variances`].
pub fn analytic_added_noise(
    config: &ProtocolConfig,
    roles: &RoleAssignment,
) -> Result<Matrix4<f64>, GaussianError> {
    let report = run_bqt(config, roles)?;
    let setup = build_shot_setup(config, roles, &report)?;
    let state = &setup.base;
    let n = state.n_modes();

    // Measured-direction rows (photocurrent / beta0) and output rows.
    let mut m_rows = DMatrix::zeros(5, 2 * n);
    for (k, &(mode, theta)) in setup.measured.iter().enumerate() {
        m_rows[(k, mode)] = theta.cos();
        m_rows[(k, n + mode)] = theta.sin();
    }
    let mut o_rows = DMatrix::zeros(4, 2 * n);
    let [o1, o2] = setup.output_nodes;
    o_rows[(0, o1)] = 1.0;
    o_rows[(1, o2)] = 1.0;
    o_rows[(2, n + o1)] = 1.0;
    o_rows[(3, n + o2)] = 1.0;

    let gains = DMatrix::from_fn(4, 5, |r, c| setup.gains[(r, c)]);
    let displaced = o_rows + gains * m_rows * setup.beta0;
    let total = &displaced * state.cov() * displaced.transpose();
    Ok(Matrix4::from_fn(|r, c| total[(r, c)]) - Matrix4::identity() * VACUUM_VARIANCE)
}
