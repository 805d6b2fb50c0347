//! Feasibility search over cluster weights and homodyne phases.
//!
//! A teleport layout fixes which nodes the inputs couple to and which of the
//! post-coupling modes are left unmeasured as outputs; every other mode is
//! homodyned. The search asks whether weights and phases exist that make
//! each output carry exactly its assigned input quadratures, and answers by
//! random-restart least squares. Absence of a solution is always reported
//! as "not found under budget", never as a nonexistence proof.
//!
//! The hot path evaluates the pipeline on dense coefficient vectors rather
//! than symbolic forms; an equivalence test against the symbolic route
//! keeps the two in lock step.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cluster::WeightedGraph;
use crate::protocol::{ProtocolError, RoleAssignment};

/// One mode of the post-coupling optical system.
///
/// `PortIn`/`PortNode` are the two outputs of input `i`'s beam splitter
/// (the sum and difference ports); `Node` is an uncoupled cluster node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeRef {
    PortIn(usize),
    PortNode(usize),
    Node(usize),
}

/// Which modes carry the teleported outputs.
///
/// Output `k` is required to carry input `k`; one output per input keeps
/// the measurement system square (`2k + (n - k) - k = n` detectors for `n`
/// eliminated x_r quadratures).
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportLayout {
    n_nodes: usize,
    attach: Vec<usize>,
    outputs: Vec<ModeRef>,
}

impl TeleportLayout {
    pub fn new(
        n_nodes: usize,
        attach: Vec<usize>,
        outputs: Vec<ModeRef>,
    ) -> Result<Self, ProtocolError> {
        if n_nodes < 2 {
            return Err(ProtocolError::BadLayout(format!("need at least 2 nodes, got {n_nodes}")));
        }
        if attach.is_empty() || attach.len() > 2 {
            return Err(ProtocolError::BadLayout(format!(
                "supported input counts are 1 and 2, got {}",
                attach.len()
            )));
        }
        for (i, &node) in attach.iter().enumerate() {
            if node >= n_nodes {
                return Err(ProtocolError::AttachOutOfRange { node, n: n_nodes });
            }
            if attach[..i].contains(&node) {
                return Err(ProtocolError::BadLayout(format!("node {node} attached twice")));
            }
        }
        if outputs.len() != attach.len() {
            return Err(ProtocolError::BadLayout(format!(
                "{} outputs for {} inputs; teleportation needs one output per input",
                outputs.len(),
                attach.len()
            )));
        }
        for (i, out) in outputs.iter().enumerate() {
            match *out {
                ModeRef::PortIn(k) | ModeRef::PortNode(k) if k >= attach.len() => {
                    return Err(ProtocolError::BadLayout(format!("port index {k} out of range")));
                }
                ModeRef::Node(j) => {
                    if j >= n_nodes {
                        return Err(ProtocolError::BadLayout(format!("output node {j} out of range")));
                    }
                    if attach.contains(&j) {
                        return Err(ProtocolError::BadLayout(format!(
                            "node {j} is both attached and an output"
                        )));
                    }
                }
                _ => {}
            }
            if outputs[..i].contains(out) {
                return Err(ProtocolError::BadLayout("duplicate output mode".into()));
            }
        }
        Ok(TeleportLayout { n_nodes, attach, outputs })
    }

    /// The five-node protocol: inputs at nodes 1 and 5, outputs at nodes
    /// 2 and 3 (one-based).
    pub fn standard_bqt() -> Self {
        TeleportLayout {
            n_nodes: 5,
            attach: vec![0, 4],
            outputs: vec![ModeRef::Node(1), ModeRef::Node(2)],
        }
    }

    /// Layout of a role assignment whose outputs are plain cluster nodes.
    pub fn from_roles(roles: &RoleAssignment, n_nodes: usize) -> Result<Self, ProtocolError> {
        roles.validate(n_nodes)?;
        Self::new(
            n_nodes,
            roles.input_attach.iter().map(|&(_, j)| j).collect(),
            roles.output_nodes.iter().map(|&j| ModeRef::Node(j)).collect(),
        )
    }

    /// All two-output layouts for two inputs attached at the given nodes:
    /// every unordered pair drawn from the beam-splitter ports and the
    /// remaining cluster nodes.
    pub fn enumerate_bqt_layouts(n_nodes: usize, attach: [usize; 2]) -> Vec<TeleportLayout> {
        let mut refs = vec![
            ModeRef::PortIn(0),
            ModeRef::PortNode(0),
            ModeRef::PortIn(1),
            ModeRef::PortNode(1),
        ];
        for j in 0..n_nodes {
            if !attach.contains(&j) {
                refs.push(ModeRef::Node(j));
            }
        }
        let mut layouts = Vec::new();
        for i in 0..refs.len() {
            for j in (i + 1)..refs.len() {
                if let Ok(l) = TeleportLayout::new(n_nodes, attach.to_vec(), vec![refs[i], refs[j]]) {
                    layouts.push(l);
                }
            }
        }
        layouts
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_inputs(&self) -> usize {
        self.attach.len()
    }

    /// Number of homodyne detectors, equal to the node count.
    pub fn measured_count(&self) -> usize {
        self.n_nodes
    }

    pub fn weight_count(&self) -> usize {
        self.n_nodes * (self.n_nodes - 1) / 2
    }

    /// Post-coupling modes in the fixed order: both ports of each input,
    /// then the uncoupled nodes ascending.
    fn mode_table(&self) -> Vec<ModeRef> {
        let mut table = Vec::with_capacity(self.n_nodes + self.attach.len());
        for i in 0..self.attach.len() {
            table.push(ModeRef::PortIn(i));
            table.push(ModeRef::PortNode(i));
        }
        for j in 0..self.n_nodes {
            if !self.attach.contains(&j) {
                table.push(ModeRef::Node(j));
            }
        }
        table
    }

    fn measured_refs(&self) -> Vec<ModeRef> {
        self.mode_table()
            .into_iter()
            .filter(|m| !self.outputs.contains(m))
            .collect()
    }
}

/// Dense coefficient layout: input x block, input y block, x_r block, y_r
/// block, photocurrent block.
struct DenseIndex {
    k: usize,
    n: usize,
}

impl DenseIndex {
    fn width(&self) -> usize {
        2 * self.k + 2 * self.n + self.n
    }
    fn input_x(&self, i: usize) -> usize {
        i
    }
    fn input_y(&self, i: usize) -> usize {
        self.k + i
    }
    fn xr(&self, j: usize) -> usize {
        2 * self.k + j
    }
    fn yr(&self, j: usize) -> usize {
        2 * self.k + self.n + j
    }
    fn photo(&self, m: usize) -> usize {
        2 * self.k + 2 * self.n + m
    }
}

/// Post-elimination output forms of a layout, on dense vectors.
pub(crate) struct DenseOutputs {
    /// Per output: (x form, y form) over the dense index.
    pub forms: Vec<(Vec<f64>, Vec<f64>)>,
    pub idx: DenseIndexView,
}

pub(crate) struct DenseIndexView {
    k: usize,
    n: usize,
}

impl DenseIndexView {
    pub fn input_x(&self, i: usize) -> usize {
        DenseIndex { k: self.k, n: self.n }.input_x(i)
    }
    pub fn input_y(&self, i: usize) -> usize {
        DenseIndex { k: self.k, n: self.n }.input_y(i)
    }
    pub fn yr(&self, j: usize) -> usize {
        DenseIndex { k: self.k, n: self.n }.yr(j)
    }
    pub fn xr(&self, j: usize) -> usize {
        DenseIndex { k: self.k, n: self.n }.xr(j)
    }
    pub fn photo(&self, m: usize) -> usize {
        DenseIndex { k: self.k, n: self.n }.photo(m)
    }
}

const SEARCH_CONDITION_LIMIT: f64 = 1e10;

/// Runs the layout's pipeline for the given adjacency and phases with
/// beta0 = 1. Returns `None` when the measurement system is degenerate.
pub(crate) fn evaluate_layout(
    layout: &TeleportLayout,
    adjacency: &DMatrix<f64>,
    phases: &[f64],
) -> Option<DenseOutputs> {
    let n = layout.n_nodes;
    let k = layout.attach.len();
    let idx = DenseIndex { k, n };
    let w = idx.width();
    debug_assert_eq!(phases.len(), layout.measured_count());

    // Cluster modes in the r-basis.
    let mut node_x = vec![vec![0.0; w]; n];
    let mut node_y = vec![vec![0.0; w]; n];
    for j in 0..n {
        node_x[j][idx.xr(j)] = 1.0;
        node_y[j][idx.yr(j)] = 1.0;
        for m in 0..n {
            let g = adjacency[(j, m)];
            if g != 0.0 {
                node_x[j][idx.yr(m)] -= g;
                node_y[j][idx.xr(m)] += g;
            }
        }
    }

    // Beam-splitter coupling of each input to its node.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut table: Vec<(ModeRef, Vec<f64>, Vec<f64>)> = Vec::with_capacity(n + k);
    for (i, &node) in layout.attach.iter().enumerate() {
        let mut in_x = vec![0.0; w];
        let mut in_y = vec![0.0; w];
        in_x[idx.input_x(i)] = 1.0;
        in_y[idx.input_y(i)] = 1.0;
        let combine = |a: &[f64], b: &[f64], sign: f64| -> Vec<f64> {
            a.iter().zip(b).map(|(&u, &v)| s * (u + sign * v)).collect()
        };
        table.push((
            ModeRef::PortIn(i),
            combine(&in_x, &node_x[node], 1.0),
            combine(&in_y, &node_y[node], 1.0),
        ));
        table.push((
            ModeRef::PortNode(i),
            combine(&in_x, &node_x[node], -1.0),
            combine(&in_y, &node_y[node], -1.0),
        ));
    }
    for j in 0..n {
        if !layout.attach.contains(&j) {
            table.push((ModeRef::Node(j), node_x[j].clone(), node_y[j].clone()));
        }
    }

    let fetch = |r: ModeRef| table.iter().find(|(m, _, _)| *m == r).map(|(_, x, y)| (x, y));

    // Homodyne rows of the measured modes, in table order.
    let measured_refs = layout.measured_refs();
    let mut meas: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (r, &mref) in measured_refs.iter().enumerate() {
        let (x, y) = fetch(mref)?;
        let (c, sn) = (phases[r].cos(), phases[r].sin());
        meas.push(x.iter().zip(y).map(|(&u, &v)| c * u + sn * v).collect());
    }

    // Solve the measurement system for the x_r quadratures.
    let m = DMatrix::from_fn(n, n, |r, c| meas[r][idx.xr(c)]);
    let m_inv = m.clone().try_inverse()?;
    let norm = |mat: &DMatrix<f64>| {
        (0..mat.nrows())
            .map(|r| (0..mat.ncols()).map(|c| mat[(r, c)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    if norm(&m) * norm(&m_inv) > SEARCH_CONDITION_LIMIT {
        return None;
    }

    // solution_c = sum_r m_inv[c,r] (photocurrent_r - rest_r)
    let mut solutions = vec![vec![0.0; w]; n];
    for c in 0..n {
        for r in 0..n {
            let wgt = m_inv[(c, r)];
            if wgt == 0.0 {
                continue;
            }
            solutions[c][idx.photo(r)] += wgt;
            for col in 0..w {
                let coeff = meas[r][col];
                if coeff != 0.0 && !(2 * k..2 * k + n).contains(&col) {
                    solutions[c][col] -= wgt * coeff;
                }
            }
        }
    }

    let substitute = |form: &[f64]| -> Vec<f64> {
        let mut out = form.to_vec();
        for c in 0..n {
            let coeff = out[idx.xr(c)];
            if coeff != 0.0 {
                out[idx.xr(c)] = 0.0;
                for col in 0..w {
                    out[col] += coeff * solutions[c][col];
                }
            }
        }
        out
    };

    let mut forms = Vec::with_capacity(layout.outputs.len());
    for &out in &layout.outputs {
        let (x, y) = fetch(out)?;
        forms.push((substitute(x), substitute(y)));
    }
    Some(DenseOutputs { forms, idx: DenseIndexView { k, n } })
}

/// Sum of squared deviations of the output input-coefficients from the
/// teleportation target (output `k` carries input `k` exactly).
pub(crate) fn layout_objective(
    layout: &TeleportLayout,
    adjacency: &DMatrix<f64>,
    phases: &[f64],
) -> Option<f64> {
    residuals(layout, adjacency, phases).map(|r| r.iter().map(|v| v * v).sum())
}

fn residuals(layout: &TeleportLayout, adjacency: &DMatrix<f64>, phases: &[f64]) -> Option<Vec<f64>> {
    let out = evaluate_layout(layout, adjacency, phases)?;
    let k = layout.attach.len();
    let mut res = Vec::with_capacity(4 * k * layout.outputs.len());
    for (o, (x, y)) in out.forms.iter().enumerate() {
        for i in 0..k {
            let tx = if i == o { 1.0 } else { 0.0 };
            res.push(x[out.idx.input_x(i)] - tx);
            res.push(x[out.idx.input_y(i)]);
            res.push(y[out.idx.input_x(i)]);
            res.push(y[out.idx.input_y(i)] - tx);
        }
    }
    Some(res)
}

/// Settings of the random-restart least-squares search.
#[derive(Debug, Clone)]
pub struct SearchSettings {
    pub budget: usize,
    pub seed: u64,
    /// Weights are drawn and kept inside [-weight_bound, weight_bound].
    pub weight_bound: f64,
    /// A restart counts as a solution below this objective.
    pub objective_threshold: f64,
    pub max_lm_iterations: usize,
}

impl SearchSettings {
    pub fn new(budget: usize, seed: u64) -> Self {
        SearchSettings {
            budget,
            seed,
            weight_bound: 3.0,
            objective_threshold: 1e-6,
            max_lm_iterations: 40,
        }
    }
}

/// A weight/phase configuration found by the search.
#[derive(Debug, Clone)]
pub struct FeasibleConfig {
    pub graph: WeightedGraph,
    pub phases: Vec<f64>,
    pub objective: f64,
}

/// Search result: the first solution in restart order, if any, plus the
/// best objective seen across the whole budget.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub found: Option<FeasibleConfig>,
    pub best_objective: f64,
    pub restarts: usize,
}

/// Random-restart Levenberg-Marquardt search for weights and phases that
/// realize the layout's teleportation target.
///
/// Restarts run concurrently, each on an independent deterministic
/// substream of `settings.seed`; the merge keeps the lowest-index solution
/// and the best objective, so the outcome is deterministic for a fixed
/// seed and budget.
pub fn feasibility_search(
    layout: &TeleportLayout,
    settings: &SearchSettings,
) -> Result<SearchOutcome, ProtocolError> {
    let nw = layout.weight_count();
    let np = layout.measured_count();

    let results: Vec<(f64, Option<Vec<f64>>)> = (0..settings.budget)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(restart as u64 + 1);
            let mut start = Vec::with_capacity(nw + np);
            for _ in 0..nw {
                start.push(rng.random_range(-settings.weight_bound..settings.weight_bound));
            }
            for _ in 0..np {
                start.push(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
            }
            let (cost, params) = lm_minimize(layout, start, settings);
            let sol = (cost < settings.objective_threshold).then_some(params);
            (cost, sol)
        })
        .collect();

    let mut best_objective = f64::INFINITY;
    let mut found = None;
    for (cost, sol) in &results {
        if *cost < best_objective {
            best_objective = *cost;
        }
        if found.is_none() {
            if let Some(params) = sol {
                found = Some(to_config(layout, params, *cost));
            }
        }
    }
    Ok(SearchOutcome { found, best_objective, restarts: settings.budget })
}

fn to_config(layout: &TeleportLayout, params: &[f64], objective: f64) -> FeasibleConfig {
    let n = layout.n_nodes;
    let nw = layout.weight_count();
    let mut a = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = params[idx];
            a[(j, i)] = params[idx];
            idx += 1;
        }
    }
    FeasibleConfig {
        graph: WeightedGraph::new(a).expect("search weights form a symmetric matrix"),
        phases: params[nw..].to_vec(),
        objective,
    }
}

fn params_to_adjacency(layout: &TeleportLayout, params: &[f64]) -> DMatrix<f64> {
    let n = layout.n_nodes;
    let mut a = DMatrix::zeros(n, n);
    let mut idx = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = params[idx];
            a[(j, i)] = params[idx];
            idx += 1;
        }
    }
    a
}

fn wrap_phase(p: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = (p + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI { w + tau } else { w }
}

fn project(layout: &TeleportLayout, params: &mut [f64], bound: f64) {
    let nw = layout.weight_count();
    for p in params[..nw].iter_mut() {
        *p = p.clamp(-bound, bound);
    }
    for p in params[nw..].iter_mut() {
        *p = wrap_phase(*p);
    }
}

fn eval_cost(layout: &TeleportLayout, params: &[f64]) -> Option<(Vec<f64>, f64)> {
    let nw = layout.weight_count();
    let a = params_to_adjacency(layout, params);
    let r = residuals(layout, &a, &params[nw..])?;
    let cost = r.iter().map(|v| v * v).sum();
    Some((r, cost))
}

/// Bounded Levenberg-Marquardt with a forward-difference Jacobian.
fn lm_minimize(
    layout: &TeleportLayout,
    mut params: Vec<f64>,
    settings: &SearchSettings,
) -> (f64, Vec<f64>) {
    let np = params.len();
    let Some((mut resid, mut cost)) = eval_cost(layout, &params) else {
        return (f64::INFINITY, params);
    };
    let nr = resid.len();
    let mut lambda = 1e-3;
    let mut stalls = 0;

    for _ in 0..settings.max_lm_iterations {
        if cost < 1e-16 {
            break;
        }
        // Forward-difference Jacobian at the current point.
        let mut jac = DMatrix::zeros(nr, np);
        let mut degenerate = false;
        for c in 0..np {
            let h = 1e-7 * params[c].abs().max(1.0);
            let mut shifted = params.clone();
            shifted[c] += h;
            match eval_cost(layout, &shifted) {
                Some((r_h, _)) => {
                    for r in 0..nr {
                        jac[(r, c)] = (r_h[r] - resid[r]) / h;
                    }
                }
                None => {
                    degenerate = true;
                    break;
                }
            }
        }
        if degenerate {
            break;
        }

        let jt = jac.transpose();
        let hess = &jt * &jac;
        let grad = &jt * DMatrix::from_column_slice(nr, 1, &resid);

        let mut accepted = false;
        for _ in 0..12 {
            let mut damped = hess.clone();
            for d in 0..np {
                damped[(d, d)] += lambda * hess[(d, d)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = params
                .iter()
                .zip(step.column(0).iter())
                .map(|(p, s)| p + s)
                .collect();
            project(layout, &mut trial, settings.weight_bound);
            if let Some((r_t, c_t)) = eval_cost(layout, &trial) {
                if c_t < cost {
                    let improvement = cost - c_t;
                    params = trial;
                    resid = r_t;
                    cost = c_t;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if improvement < 1e-15 + 1e-12 * cost {
                        stalls += 1;
                    } else {
                        stalls = 0;
                    }
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e9 {
                break;
            }
        }
        if !accepted || stalls >= 2 {
            break;
        }
    }
    (cost, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{run_bqt, FreeWeights, ProtocolConfig, CANONICAL_PHASES};
    use rand::Rng;

    #[test]
    fn layout_validation() {
        assert!(TeleportLayout::standard_bqt().n_nodes() == 5);
        assert!(TeleportLayout::new(3, vec![0, 1], vec![ModeRef::Node(2), ModeRef::PortNode(0)]).is_ok());
        // too few nodes, bad attach, output on an attached node, wrong output count
        assert!(TeleportLayout::new(1, vec![0], vec![ModeRef::Node(0)]).is_err());
        assert!(TeleportLayout::new(3, vec![0, 0], vec![ModeRef::Node(1), ModeRef::Node(2)]).is_err());
        assert!(TeleportLayout::new(3, vec![0, 1], vec![ModeRef::Node(0), ModeRef::Node(2)]).is_err());
        assert!(TeleportLayout::new(3, vec![0, 1], vec![ModeRef::Node(2)]).is_err());
    }

    #[test]
    fn three_node_enumeration_has_ten_layouts() {
        let layouts = TeleportLayout::enumerate_bqt_layouts(3, [0, 1]);
        assert_eq!(layouts.len(), 10);
    }

    #[test]
    fn dense_engine_matches_symbolic_pipeline() {
        let mut rng = crate::test_rng(101);
        let layout = TeleportLayout::standard_bqt();
        let roles = crate::protocol::RoleAssignment::canonical();
        for _ in 0..25 {
            let w = FreeWeights::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            );
            let mut phases = CANONICAL_PHASES;
            for p in phases.iter_mut() {
                *p += rng.random_range(-0.3..0.3);
            }
            let config = ProtocolConfig { phases, ..ProtocolConfig::with_weights(w) };
            let report = run_bqt(&config, &roles).unwrap();

            let out = evaluate_layout(&layout, config.graph().adjacency(), &phases).unwrap();
            // Row order of the report is (X2, X3, Y2, Y3); dense outputs are
            // per-output (x, y) pairs. Input columns: (x_a, x_b, y_a, y_b).
            let rows = [
                &out.forms[0].0,
                &out.forms[1].0,
                &out.forms[0].1,
                &out.forms[1].1,
            ];
            for (r, form) in rows.iter().enumerate() {
                let cols = [
                    out.idx.input_x(0),
                    out.idx.input_x(1),
                    out.idx.input_y(0),
                    out.idx.input_y(1),
                ];
                for (c, &col) in cols.iter().enumerate() {
                    assert!(
                        (report.input_coeff[(r, c)] - form[col]).abs() < 1e-12,
                        "input coeff mismatch at ({r},{c})"
                    );
                }
                for k in 0..5 {
                    assert!((report.error_matrix[(r, k)] - form[out.idx.yr(k)]).abs() < 1e-12);
                    assert!((-report.gains[(r, k)] - form[out.idx.photo(k)]).abs() < 1e-12);
                    assert!(form[out.idx.xr(k)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn canonical_config_has_zero_objective() {
        let layout = TeleportLayout::standard_bqt();
        let config = ProtocolConfig::with_weights(FreeWeights::new(0.7, -1.1, 0.3, 1.9));
        let obj = layout_objective(&layout, config.graph().adjacency(), &CANONICAL_PHASES).unwrap();
        assert!(obj < 1e-20, "objective {obj}");
    }

    #[test]
    fn search_finds_two_node_teleportation() {
        let layout = TeleportLayout::new(2, vec![0], vec![ModeRef::Node(1)]).unwrap();
        let outcome = feasibility_search(&layout, &SearchSettings::new(50, 7)).unwrap();
        let found = outcome.found.expect("two-node teleportation is realizable");
        assert!(found.objective < 1e-6);
    }

    #[test]
    fn search_finds_five_node_bqt() {
        let layout = TeleportLayout::standard_bqt();
        let outcome = feasibility_search(&layout, &SearchSettings::new(60, 11)).unwrap();
        let found = outcome.found.expect("five-node BQT is realizable");
        assert!(found.objective < 1e-6);

        // The found weights and phases must drive the full symbolic pipeline
        // to the exact swap.
        let config = ProtocolConfig {
            full_graph: Some(found.graph.clone()),
            phases: found.phases.clone().try_into().unwrap(),
            ..ProtocolConfig::default()
        };
        let report = run_bqt(&config, &crate::protocol::RoleAssignment::canonical()).unwrap();
        assert!(crate::protocol::check_bqt_condition(&report, 1e-5));
    }

    #[test]
    fn search_is_deterministic() {
        let layout = TeleportLayout::new(2, vec![0], vec![ModeRef::Node(1)]).unwrap();
        let a = feasibility_search(&layout, &SearchSettings::new(20, 3)).unwrap();
        let b = feasibility_search(&layout, &SearchSettings::new(20, 3)).unwrap();
        assert_eq!(a.best_objective.to_bits(), b.best_objective.to_bits());
        match (&a.found, &b.found) {
            (Some(x), Some(y)) => {
                assert_eq!(x.objective.to_bits(), y.objective.to_bits());
                assert_eq!(x.phases, y.phases);
            }
            (None, None) => {}
            _ => panic!("nondeterministic outcome"),
        }
    }

    #[test]
    fn phase_wrapping_stays_in_range() {
        for p in [-10.0, -std::f64::consts::PI, 0.0, 3.2, 12.9] {
            let w = wrap_phase(p);
            assert!(w > -std::f64::consts::PI - 1e-12 && w <= std::f64::consts::PI + 1e-12);
        }
    }
}
