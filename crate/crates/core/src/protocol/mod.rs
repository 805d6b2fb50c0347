//! The five-node bidirectional teleportation pipeline.
//!
//! Alice and Bob couple their input modes to cluster nodes 1 and 5 with
//! symmetric beam splitters, five homodyne detectors measure everything
//! except nodes 2 and 3, the measured x_r quadratures are eliminated from
//! the output quadratures, and feedforward displacements cancel the
//! photocurrent terms. What remains is the teleported input plus a residual
//! noise term linear in the y_r quadratures.

mod search;

pub use search::{
    feasibility_search, FeasibleConfig, ModeRef, SearchOutcome, SearchSettings, TeleportLayout,
};

use nalgebra::{DMatrix, Matrix4, SMatrix, Vector4};
use thiserror::Error;

use crate::cluster::{cluster_modes, r_covariance, ClusterError, SqueezingSpec, WeightedGraph};
use crate::quad_algebra::{
    beamsplitter_pair, eliminate, homodyne_form, BasisLabel, LinForm, Owner, QuadAlgebraError,
    QuadMode,
};
use crate::VACUUM_VARIANCE;

/// Homodyne phases of the canonical protocol:
/// theta_2 = theta_4 = -theta_1 = -theta_3 = pi/4 and theta_5 = 0.
pub const CANONICAL_PHASES: [f64; 5] = [
    -std::f64::consts::FRAC_PI_4,
    std::f64::consts::FRAC_PI_4,
    -std::f64::consts::FRAC_PI_4,
    std::f64::consts::FRAC_PI_4,
    0.0,
];

/// Gain matrix over the photocurrents, ordered (i_a_in, i_A1, i_b_in, i_B2, i_C).
pub type GainMatrix = SMatrix<f64, 4, 5>;
/// Error-matrix rows over (y_r1..y_r5).
pub type ErrorMatrix = SMatrix<f64, 4, 5>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Quad(#[from] QuadAlgebraError),
    #[error("attach node {node} out of range for {n} cluster nodes")]
    AttachOutOfRange { node: usize, n: usize },
    #[error("invalid role assignment: {0}")]
    BadRoles(String),
    #[error("invalid layout: {0}")]
    BadLayout(String),
    #[error("invalid protocol config: {0}")]
    BadConfig(String),
}

/// The four adjustable weights left free by the canonical constraints.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FreeWeights {
    pub g14: f64,
    pub g24: f64,
    pub g34: f64,
    pub g45: f64,
}

impl FreeWeights {
    pub fn new(g14: f64, g24: f64, g34: f64, g45: f64) -> Self {
        FreeWeights { g14, g24, g34, g45 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.g14, self.g24, self.g34, self.g45]
    }

    /// Five-node graph with g12 = g35 = 1 and the remaining edges zero.
    pub fn to_graph(&self) -> WeightedGraph {
        WeightedGraph::from_edges(
            5,
            &[
                (0, 1, 1.0),
                (2, 4, 1.0),
                (0, 3, self.g14),
                (1, 3, self.g24),
                (2, 3, self.g34),
                (3, 4, self.g45),
            ],
        )
        .expect("free-weight graph is symmetric by construction")
    }
}

/// Coherent amplitudes of the two teleported inputs, as (x, y) means.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputMeans {
    pub a: (f64, f64),
    pub b: (f64, f64),
}

/// Full configuration of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub free_weights: FreeWeights,
    /// Optional full 5x5 adjacency override; replaces the free-weight graph.
    pub full_graph: Option<WeightedGraph>,
    pub phases: [f64; 5],
    pub beta0: f64,
    pub squeezing_db: f64,
    /// Fixed input amplitudes; `None` lets the Monte-Carlo driver randomize.
    pub input_means: Option<InputMeans>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            free_weights: FreeWeights::default(),
            full_graph: None,
            phases: CANONICAL_PHASES,
            beta0: 1.0,
            squeezing_db: 10.0,
            input_means: None,
        }
    }
}

impl ProtocolConfig {
    pub fn with_weights(weights: FreeWeights) -> Self {
        ProtocolConfig { free_weights: weights, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !(self.beta0 > 0.0) || !self.beta0.is_finite() {
            return Err(ProtocolError::BadConfig(format!(
                "beta0 must be positive and finite, got {}",
                self.beta0
            )));
        }
        if !self.squeezing_db.is_finite() || self.squeezing_db < 0.0 {
            return Err(ProtocolError::BadConfig(format!(
                "squeezing_db must be finite and >= 0, got {}",
                self.squeezing_db
            )));
        }
        if let Some(g) = &self.full_graph {
            if g.node_count() != 5 {
                return Err(ProtocolError::BadConfig(format!(
                    "full graph must have 5 nodes, got {}",
                    g.node_count()
                )));
            }
        }
        if self.phases.iter().any(|p| !p.is_finite()) {
            return Err(ProtocolError::BadConfig("phases must be finite".into()));
        }
        Ok(())
    }

    /// The resource graph: the explicit override if present, otherwise the
    /// free-weight graph with g12 = g35 = 1.
    pub fn graph(&self) -> WeightedGraph {
        self.full_graph
            .clone()
            .unwrap_or_else(|| self.free_weights.to_graph())
    }

    pub fn squeezing(&self) -> Result<SqueezingSpec, ClusterError> {
        SqueezingSpec::from_db(self.squeezing_db)
    }
}

/// Who holds which cluster node.
///
/// The standard protocol attaches Alice to node 1 and Bob to node 5,
/// outputs at nodes 2 (Bob's) and 3 (Alice's), and measures node 4.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleAssignment {
    pub input_attach: Vec<(Owner, usize)>,
    pub output_nodes: Vec<usize>,
    pub measured_nodes: Vec<usize>,
}

impl RoleAssignment {
    /// Attach {(A,1), (B,5)}, outputs {2, 3}, measured {4} (one-based labels).
    pub fn canonical() -> Self {
        RoleAssignment {
            input_attach: vec![(Owner::A, 0), (Owner::B, 4)],
            output_nodes: vec![1, 2],
            measured_nodes: vec![3],
        }
    }

    /// Checks that attach, output and measured nodes are disjoint and cover
    /// all `n` nodes.
    pub fn validate(&self, n: usize) -> Result<(), ProtocolError> {
        let mut seen = vec![false; n];
        let mut mark = |node: usize| -> Result<(), ProtocolError> {
            if node >= n {
                return Err(ProtocolError::AttachOutOfRange { node, n });
            }
            if seen[node] {
                return Err(ProtocolError::BadRoles(format!("node {node} assigned twice")));
            }
            seen[node] = true;
            Ok(())
        };
        for &(_, node) in &self.input_attach {
            mark(node)?;
        }
        for &node in &self.output_nodes {
            mark(node)?;
        }
        for &node in &self.measured_nodes {
            mark(node)?;
        }
        if !seen.iter().all(|&s| s) {
            return Err(ProtocolError::BadRoles("roles do not cover all nodes".into()));
        }
        Ok(())
    }
}

/// Pre-measurement mode set after cluster construction and beam-splitter
/// coupling.
#[derive(Debug, Clone)]
pub struct AssembledModes {
    /// Per input: (input-side port, node-side port) of its beam splitter.
    pub ports: Vec<(QuadMode, QuadMode)>,
    /// Cluster modes not coupled to an input, with their node indices.
    pub untouched: Vec<(usize, QuadMode)>,
}

/// Builds the cluster modes and couples each input to its attach node.
pub fn assemble_protocol(
    config: &ProtocolConfig,
    roles: &RoleAssignment,
) -> Result<AssembledModes, ProtocolError> {
    config.validate()?;
    let graph = config.graph();
    let n = graph.node_count();
    roles.validate(n)?;
    let modes = cluster_modes(graph.adjacency())?;
    let mut ports = Vec::with_capacity(roles.input_attach.len());
    for &(owner, node) in &roles.input_attach {
        let input = QuadMode::input(owner);
        let (port_in, port_node) = beamsplitter_pair(&input, &modes[node]);
        ports.push((port_in, port_node));
    }
    let attach_nodes: Vec<usize> = roles.input_attach.iter().map(|&(_, j)| j).collect();
    let untouched = modes
        .into_iter()
        .enumerate()
        .filter(|(j, _)| !attach_nodes.contains(j))
        .collect();
    Ok(AssembledModes { ports, untouched })
}

/// Outcome of the measurement-elimination step: the decomposition of the
/// four output quadratures, rows ordered (X_out,B; X_out,A; Y_out,B;
/// Y_out,A) = (X_2, X_3, Y_2, Y_3).
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportReport {
    /// Coefficients of (x_a, x_b, y_a, y_b) in each output row.
    pub input_coeff: Matrix4<f64>,
    /// Feedforward displacement gains: the exact negation of each row's
    /// photocurrent coefficients, so displaced outputs carry no classical
    /// terms.
    pub gains: GainMatrix,
    /// Residual-noise coefficients over (y_r1..y_r5).
    pub error_matrix: ErrorMatrix,
    /// Leftover (x_r1..x_r5) coefficients; zero after elimination.
    pub residual_x: SMatrix<f64, 4, 5>,
}

/// Runs the full pipeline: homodyne forms, elimination of x_r1..x_r5, and
/// decomposition of the output quadratures.
pub fn run_bqt(
    config: &ProtocolConfig,
    roles: &RoleAssignment,
) -> Result<TeleportReport, ProtocolError> {
    let graph = config.graph();
    let n = graph.node_count();
    if roles.input_attach.len() != 2 || roles.output_nodes.len() != 2 || n != 5 {
        return Err(ProtocolError::BadRoles(
            "the teleport report is defined for the 5-node protocol with two inputs and two outputs"
                .into(),
        ));
    }
    let assembled = assemble_protocol(config, roles)?;

    // Measurement order fixed as (a'_in, A'_1, b'_in, B'_2, node-4 detector):
    // both beam-splitter ports of each input, then the measured nodes.
    let mut measured_modes: Vec<&QuadMode> = Vec::with_capacity(5);
    for (port_in, port_node) in &assembled.ports {
        measured_modes.push(port_in);
        measured_modes.push(port_node);
    }
    for &node in &roles.measured_nodes {
        let (_, mode) = assembled
            .untouched
            .iter()
            .find(|(j, _)| *j == node)
            .expect("validated roles contain the measured node");
        measured_modes.push(mode);
    }

    let measured: Vec<(LinForm, BasisLabel)> = measured_modes
        .iter()
        .enumerate()
        .map(|(k, m)| {
            homodyne_form(m, config.phases[k], config.beta0)
                .map(|f| (f, BasisLabel::Photocurrent(k)))
        })
        .collect::<Result<_, _>>()?;

    let out_modes: Vec<&QuadMode> = roles
        .output_nodes
        .iter()
        .map(|&node| {
            &assembled
                .untouched
                .iter()
                .find(|(j, _)| *j == node)
                .expect("validated roles contain the output node")
                .1
        })
        .collect();
    // Rows (X_2, X_3, Y_2, Y_3).
    let targets = vec![
        out_modes[0].x.clone(),
        out_modes[1].x.clone(),
        out_modes[0].y.clone(),
        out_modes[1].y.clone(),
    ];

    let xr_labels: Vec<BasisLabel> = (0..n).map(BasisLabel::RX).collect();
    let solved = eliminate(&measured, &targets, &xr_labels)?;

    let input_cols = [
        BasisLabel::InputX(Owner::A),
        BasisLabel::InputX(Owner::B),
        BasisLabel::InputY(Owner::A),
        BasisLabel::InputY(Owner::B),
    ];
    let mut input_coeff = Matrix4::zeros();
    let mut gains = GainMatrix::zeros();
    let mut error_matrix = ErrorMatrix::zeros();
    let mut residual_x = SMatrix::<f64, 4, 5>::zeros();
    for (r, form) in solved.iter().enumerate() {
        for (c, &label) in input_cols.iter().enumerate() {
            input_coeff[(r, c)] = form.coeff(label);
        }
        for k in 0..5 {
            gains[(r, k)] = -form.coeff(BasisLabel::Photocurrent(k));
            error_matrix[(r, k)] = form.coeff(BasisLabel::RY(k));
            residual_x[(r, k)] = form.coeff(BasisLabel::RX(k));
        }
    }
    Ok(TeleportReport { input_coeff, gains, error_matrix, residual_x })
}

/// True when the outputs carry exactly the swapped inputs: the input
/// coefficient matrix is the identity in the (X_B, X_A, Y_B, Y_A) row
/// ordering and no x_r content survives.
pub fn check_bqt_condition(report: &TeleportReport, tol: f64) -> bool {
    let dev = (report.input_coeff - Matrix4::identity()).abs().max();
    dev <= tol && report.residual_x.abs().max() <= tol
}

/// True when the weight and phase constraints of the canonical protocol
/// hold: g15 = g25 = g13 = g23 = 0, g12 = g35 = 1,
/// theta_2 = theta_4 = -theta_1 = -theta_3 = pi/4, theta_5 = 0.
pub fn canonical_constraints(graph: &WeightedGraph, phases: &[f64; 5], tol: f64) -> bool {
    if graph.node_count() != 5 {
        return false;
    }
    let w = |i, j| graph.weight(i, j);
    let q = std::f64::consts::FRAC_PI_4;
    let weight_ok = (w(0, 4)).abs() <= tol
        && w(1, 4).abs() <= tol
        && w(0, 2).abs() <= tol
        && w(1, 2).abs() <= tol
        && (w(0, 1) - 1.0).abs() <= tol
        && (w(2, 4) - 1.0).abs() <= tol;
    let phase_ok = (phases[0] + q).abs() <= tol
        && (phases[1] - q).abs() <= tol
        && (phases[2] + q).abs() <= tol
        && (phases[3] - q).abs() <= tol
        && phases[4].abs() <= tol;
    weight_ok && phase_ok
}

/// Diagonal and full matrix of the residual-noise covariance
/// `E Cov(y_r) E^T`, in units where `spec.y_variance` is the squeezed
/// variance.
pub fn error_variances(
    report: &TeleportReport,
    graph: &WeightedGraph,
    spec: &SqueezingSpec,
) -> Result<(Vector4<f64>, Matrix4<f64>), ProtocolError> {
    let (_, cov_y) = r_covariance(graph.adjacency(), spec)?;
    let e = DMatrix::from_fn(4, 5, |r, c| report.error_matrix[(r, c)]);
    let full = &e * cov_y * e.transpose();
    let mut cov = Matrix4::zeros();
    for r in 0..4 {
        for c in 0..4 {
            cov[(r, c)] = full[(r, c)];
        }
    }
    Ok((cov.diagonal(), cov))
}

/// Squeezed y-variance at the given squeezing degree:
/// `0.25 * 10^(-db/10)`. 0 dB is the vacuum.
pub fn db_to_variance(db: f64) -> f64 {
    VACUUM_VARIANCE * 10f64.powf(-db / 10.0)
}

/// Overlap fidelity of a coherent input with the same state carrying added
/// Gaussian noise of variances (dx, dy): `1 / (2 sqrt((1/2+dx)(1/2+dy)))`.
pub fn added_noise_fidelity(dx: f64, dy: f64) -> f64 {
    1.0 / (2.0 * ((0.5 + dx) * (0.5 + dy)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_weights(rng: &mut rand_chacha::ChaCha8Rng, lo: f64, hi: f64) -> FreeWeights {
        FreeWeights::new(
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
            rng.random_range(lo..hi),
        )
    }

    /// Residual-noise rows over (y_r1..y_r5) as derived from the canonical
    /// constraints by hand.
    pub(crate) fn expected_error_matrix(w: &FreeWeights) -> ErrorMatrix {
        let FreeWeights { g14, g24, g34, g45 } = *w;
        ErrorMatrix::from_row_slice(&[
            -2.0 - g14 * g14, -g14 * g24, -g14 * g34, -g24, -g14 * g45,
            -g14 * g45, -g24 * g45, -g34 * g45, -g34, -2.0 - g45 * g45,
            g14 * g24, 2.0 + g24 * g24, g24 * g34, g14, g24 * g45,
            g14 * g34, g24 * g34, 2.0 + g34 * g34, g45, g34 * g45,
        ])
    }

    /// Feedforward gains of the canonical protocol over
    /// (i_a_in, i_A1, i_b_in, i_B2, i_C), carrying the 1/beta0 prefactor.
    pub(crate) fn expected_gains(w: &FreeWeights, beta0: f64) -> GainMatrix {
        let FreeWeights { g14, g24, g34, g45 } = *w;
        GainMatrix::from_row_slice(&[
            1.0, 1.0, 0.0, 0.0, g14,
            0.0, 0.0, 1.0, 1.0, g45,
            -1.0, 1.0, 0.0, 0.0, -g24,
            0.0, 0.0, -1.0, 1.0, -g34,
        ]) / beta0
    }

    #[test]
    fn canonical_roles_are_valid() {
        RoleAssignment::canonical().validate(5).unwrap();
        assert!(RoleAssignment::canonical().validate(4).is_err());
    }

    #[test]
    fn assemble_matches_beam_splitter_rows() {
        let config = ProtocolConfig::with_weights(FreeWeights::new(0.3, -0.9, 1.2, 0.7));
        let roles = RoleAssignment::canonical();
        let assembled = assemble_protocol(&config, &roles).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;

        // a'_in.x = (x_a + x_r1 - g12 y_r2 - g14 y_r4)/sqrt2
        let a_in = &assembled.ports[0].0;
        assert!((a_in.x.coeff(BasisLabel::InputX(Owner::A)) - s).abs() < 1e-12);
        assert!((a_in.x.coeff(BasisLabel::RX(0)) - s).abs() < 1e-12);
        assert!((a_in.x.coeff(BasisLabel::RY(1)) + s).abs() < 1e-12);
        assert!((a_in.x.coeff(BasisLabel::RY(3)) + 0.3 * s).abs() < 1e-12);

        // B'_2.x carries +g45/sqrt2 on y_r4
        let b2 = &assembled.ports[1].1;
        assert!((b2.x.coeff(BasisLabel::RY(3)) - 0.7 * s).abs() < 1e-12);

        // untouched nodes are 2, 3, 4 (zero-based 1, 2, 3)
        let nodes: Vec<usize> = assembled.untouched.iter().map(|(j, _)| *j).collect();
        assert_eq!(nodes, vec![1, 2, 3]);
    }

    #[test]
    fn disconnected_graph_keeps_inputs_apart() {
        let mut config = ProtocolConfig::default();
        config.full_graph = Some(WeightedGraph::new(DMatrix::zeros(5, 5)).unwrap());
        let assembled = assemble_protocol(&config, &RoleAssignment::canonical()).unwrap();
        let b_in = &assembled.ports[1].0;
        assert_eq!(b_in.x.coeff(BasisLabel::RX(0)), 0.0);
        assert_eq!(b_in.x.coeff(BasisLabel::RY(0)), 0.0);
    }

    #[test]
    fn bqt_identity_and_closed_forms() {
        let mut rng = crate::test_rng(31);
        let roles = RoleAssignment::canonical();
        for _ in 0..100 {
            let w = random_weights(&mut rng, -2.0, 2.0);
            let beta0 = rng.random_range(0.5..3.0);
            let config = ProtocolConfig { beta0, ..ProtocolConfig::with_weights(w) };
            let report = run_bqt(&config, &roles).unwrap();
            assert!((report.input_coeff - Matrix4::identity()).abs().max() < 1e-9);
            assert!((report.gains - expected_gains(&w, beta0)).abs().max() < 1e-9);
            assert!((report.error_matrix - expected_error_matrix(&w)).abs().max() < 1e-9);
            assert!(report.residual_x.abs().max() < 1e-9);
            assert!(check_bqt_condition(&report, 1e-9));
        }
    }

    #[test]
    fn weight_constraint_violation_breaks_the_swap() {
        let mut config = ProtocolConfig::with_weights(FreeWeights::new(0.4, 0.8, -0.6, 1.1));
        let mut graph = config.graph().adjacency().clone();
        graph[(0, 2)] = 0.5; // g13, forbidden by the constraints
        graph[(2, 0)] = 0.5;
        config.full_graph = Some(WeightedGraph::new(graph).unwrap());
        let report = run_bqt(&config, &RoleAssignment::canonical()).unwrap();
        assert!(!check_bqt_condition(&report, 1e-6));
    }

    #[test]
    fn phase_constraint_violation_breaks_the_swap() {
        let mut config = ProtocolConfig::with_weights(FreeWeights::new(0.4, 0.8, -0.6, 1.1));
        config.phases[4] = std::f64::consts::FRAC_PI_4;
        let report = run_bqt(&config, &RoleAssignment::canonical()).unwrap();
        assert!(!check_bqt_condition(&report, 1e-6));
    }

    #[test]
    fn canonical_constraint_checks() {
        let config = ProtocolConfig::default();
        assert!(canonical_constraints(&config.graph(), &config.phases, 1e-12));

        let mut bad = config.graph().adjacency().clone();
        bad[(0, 1)] = 0.9;
        bad[(1, 0)] = 0.9;
        assert!(!canonical_constraints(
            &WeightedGraph::new(bad).unwrap(),
            &config.phases,
            1e-12
        ));

        let mut phases = CANONICAL_PHASES;
        phases[0] = std::f64::consts::FRAC_PI_4;
        assert!(!canonical_constraints(&config.graph(), &phases, 1e-12));
    }

    #[test]
    fn variance_vectors_of_the_three_families() {
        let mut rng = crate::test_rng(37);
        let roles = RoleAssignment::canonical();
        let spec = SqueezingSpec::from_db(10.0).unwrap();
        let v = spec.y_variance;
        for _ in 0..30 {
            let g24 = rng.random_range(-2.0..2.0);
            let g34 = rng.random_range(-2.0..2.0);
            let config = ProtocolConfig::with_weights(FreeWeights::new(0.0, g24, g34, 0.0));
            let report = run_bqt(&config, &roles).unwrap();
            let (diag, _) = error_variances(&report, &config.graph(), &spec).unwrap();
            let expect = Vector4::new(2.0, 2.0, 2.0 + g24 * g24, 2.0 + g34 * g34) * v;
            assert!((diag - expect).abs().max() < 1e-9, "{diag:?} vs {expect:?}");

            let g14 = rng.random_range(-2.0..2.0);
            let g45 = rng.random_range(-2.0..2.0);
            let config = ProtocolConfig::with_weights(FreeWeights::new(g14, 0.0, 0.0, g45));
            let report = run_bqt(&config, &roles).unwrap();
            let (diag, _) = error_variances(&report, &config.graph(), &spec).unwrap();
            let expect = Vector4::new(2.0 + g14 * g14, 2.0 + g45 * g45, 2.0, 2.0) * v;
            assert!((diag - expect).abs().max() < 1e-9);
        }
        let config = ProtocolConfig::default();
        let report = run_bqt(&config, &roles).unwrap();
        let (diag, _) = error_variances(&report, &config.graph(), &spec).unwrap();
        assert!((diag - Vector4::from_element(2.0 * v)).abs().max() < 1e-9);
    }

    #[test]
    fn variance_diag_is_even_in_each_weight() {
        let mut rng = crate::test_rng(41);
        let roles = RoleAssignment::canonical();
        let spec = SqueezingSpec::from_db(10.0).unwrap();
        for _ in 0..20 {
            let w = random_weights(&mut rng, -2.0, 2.0);
            let config = ProtocolConfig::with_weights(w);
            let report = run_bqt(&config, &roles).unwrap();
            let (diag, _) = error_variances(&report, &config.graph(), &spec).unwrap();

            let mut flipped = w.as_array();
            let k = rng.random_range(0..4usize);
            flipped[k] = -flipped[k];
            let wf = FreeWeights::new(flipped[0], flipped[1], flipped[2], flipped[3]);
            let config = ProtocolConfig::with_weights(wf);
            let report = run_bqt(&config, &roles).unwrap();
            let (diag_f, _) = error_variances(&report, &config.graph(), &spec).unwrap();
            assert!((diag - diag_f).abs().max() < 1e-9);
        }
    }

    #[test]
    fn output_noise_ignores_antisqueezing() {
        let roles = RoleAssignment::canonical();
        let config = ProtocolConfig::with_weights(FreeWeights::new(0.7, -1.2, 0.4, 1.5));
        let report = run_bqt(&config, &roles).unwrap();
        assert!(report.residual_x.abs().max() < 1e-12);
        let s1 = SqueezingSpec::new(2.5, 0.025).unwrap();
        let s2 = SqueezingSpec::new(40.0, 0.025).unwrap();
        let (d1, _) = error_variances(&report, &config.graph(), &s1).unwrap();
        let (d2, _) = error_variances(&report, &config.graph(), &s2).unwrap();
        assert_eq!(d1, d2);
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_variance(0.0) - 0.25).abs() < 1e-15);
        assert!((db_to_variance(10.0) - 0.025).abs() < 1e-15);
        assert!((db_to_variance(15.5) - 7.045957328161134e-3).abs() < 1e-15);
    }

    #[test]
    fn fidelity_formula() {
        assert!((added_noise_fidelity(0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((added_noise_fidelity(0.5, 0.5) - 0.5).abs() < 1e-15);
        let d = 2.0 * db_to_variance(15.5);
        assert!((added_noise_fidelity(d, d) - 0.9725887253726934).abs() < 1e-12);
    }

    #[test]
    fn degenerate_phase_set_is_reported() {
        // With an empty graph and all detectors at pi/2 the measured forms
        // contain no x_r content at all.
        let mut config = ProtocolConfig::default();
        config.full_graph = Some(WeightedGraph::new(DMatrix::zeros(5, 5)).unwrap());
        config.phases = [std::f64::consts::FRAC_PI_2; 5];
        let err = run_bqt(&config, &RoleAssignment::canonical()).unwrap_err();
        assert!(matches!(
            err,
            ProtocolError::Quad(QuadAlgebraError::DegenerateMeasurementSet { .. })
        ));
    }

    use nalgebra::DMatrix;
}
