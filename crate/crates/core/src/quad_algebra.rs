//! Exact Heisenberg-picture engine.
//!
//! An optical mode is tracked as a pair of linear forms over labelled
//! quadrature symbols. All transformations of the teleportation pipeline
//! (Bogoliubov, beam splitters, homodyne detection, elimination of measured
//! quadratures) are linear, so every output quadrature stays an exact linear
//! combination of the input symbols plus measured photocurrents.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use thiserror::Error;

use crate::ZERO_PRUNE_TOL;

/// Condition numbers above this make a measurement set degenerate.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Which party an input mode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    A,
    B,
}

impl fmt::Display for Owner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Owner::A => write!(f, "a"),
            Owner::B => write!(f, "b"),
        }
    }
}

/// A quadrature symbol. Equality is structural; indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BasisLabel {
    /// x-quadrature of a teleported input mode.
    InputX(Owner),
    /// y-quadrature of a teleported input mode.
    InputY(Owner),
    /// x-quadrature of squeezed oscillator `j` (s-basis).
    SqX(usize),
    /// y-quadrature of squeezed oscillator `j` (s-basis).
    SqY(usize),
    /// x-quadrature of auxiliary oscillator `j` (r-basis).
    RX(usize),
    /// y-quadrature of auxiliary oscillator `j` (r-basis).
    RY(usize),
    /// Measured photocurrent, by detector index.
    Photocurrent(usize),
}

impl BasisLabel {
    /// The conjugate partner under the canonical pairing, with the sign of
    /// the bracket: `[x, y] = +1` in pairing units. Photocurrents are
    /// classical records and have no partner.
    fn conjugate(&self) -> Option<(BasisLabel, f64)> {
        match *self {
            BasisLabel::InputX(o) => Some((BasisLabel::InputY(o), 1.0)),
            BasisLabel::InputY(o) => Some((BasisLabel::InputX(o), -1.0)),
            BasisLabel::SqX(j) => Some((BasisLabel::SqY(j), 1.0)),
            BasisLabel::SqY(j) => Some((BasisLabel::SqX(j), -1.0)),
            BasisLabel::RX(j) => Some((BasisLabel::RY(j), 1.0)),
            BasisLabel::RY(j) => Some((BasisLabel::RX(j), -1.0)),
            BasisLabel::Photocurrent(_) => None,
        }
    }

    pub fn is_photocurrent(&self) -> bool {
        matches!(self, BasisLabel::Photocurrent(_))
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // One-based indices in display to match the usual physics notation.
        match *self {
            BasisLabel::InputX(o) => write!(f, "x_{o}"),
            BasisLabel::InputY(o) => write!(f, "y_{o}"),
            BasisLabel::SqX(j) => write!(f, "x_s{}", j + 1),
            BasisLabel::SqY(j) => write!(f, "y_s{}", j + 1),
            BasisLabel::RX(j) => write!(f, "x_r{}", j + 1),
            BasisLabel::RY(j) => write!(f, "y_r{}", j + 1),
            BasisLabel::Photocurrent(k) => write!(f, "i{}", k + 1),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadAlgebraError {
    #[error("transform is {rows}x{cols} but acts on {modes} modes")]
    DimensionMismatch { rows: usize, cols: usize, modes: usize },
    #[error("{measured} measured forms for {labels} eliminated labels")]
    CountMismatch { measured: usize, labels: usize },
    #[error("degenerate measurement set (condition number {cond:.3e}) for labels [{labels}]")]
    DegenerateMeasurementSet { cond: f64, labels: String },
    #[error("no variance entry for label {0}")]
    MissingVariance(String),
    #[error("form contains photocurrent label {0}; variances are defined only for quadratures")]
    PhotocurrentInVariance(String),
    #[error("local-oscillator amplitude must be positive, got {0}")]
    NonPositiveBeta(f64),
}

/// An exact real-linear combination of quadrature symbols plus a constant.
///
/// Coefficients with `|c| < ZERO_PRUNE_TOL` are never stored, so an absent
/// label means coefficient zero. Values are immutable after construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinForm {
    terms: BTreeMap<BasisLabel, f64>,
    constant: f64,
}

impl LinForm {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn symbol(label: BasisLabel) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(label, 1.0);
        LinForm { terms, constant: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        LinForm { terms: BTreeMap::new(), constant: value }
    }

    pub fn coeff(&self, label: BasisLabel) -> f64 {
        self.terms.get(&label).copied().unwrap_or(0.0)
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> impl Iterator<Item = (BasisLabel, f64)> + '_ {
        self.terms.iter().map(|(&l, &c)| (l, c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn labels(&self) -> impl Iterator<Item = BasisLabel> + '_ {
        self.terms.keys().copied()
    }

    pub fn contains(&self, label: BasisLabel) -> bool {
        self.terms.contains_key(&label)
    }

    pub fn scale(&self, factor: f64) -> Self {
        combine(self, factor, &LinForm::zero(), 0.0)
    }

    /// Largest absolute coefficient, constant included.
    pub fn max_abs(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.abs())
            .fold(self.constant.abs(), f64::max)
    }

    fn insert_pruned(&mut self, label: BasisLabel, value: f64) {
        if value.abs() >= ZERO_PRUNE_TOL {
            self.terms.insert(label, value);
        }
    }
}

impl fmt::Display for LinForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (label, c) in &self.terms {
            if first {
                write!(f, "{c:+.6}*{label}")?;
                first = false;
            } else {
                write!(f, " {c:+.6}*{label}")?;
            }
        }
        if self.constant != 0.0 {
            write!(f, " {:+.6}", self.constant)?;
        }
        Ok(())
    }
}

impl std::ops::Add<&LinForm> for &LinForm {
    type Output = LinForm;
    fn add(self, rhs: &LinForm) -> LinForm {
        combine(self, 1.0, rhs, 1.0)
    }
}

impl std::ops::Sub<&LinForm> for &LinForm {
    type Output = LinForm;
    fn sub(self, rhs: &LinForm) -> LinForm {
        combine(self, 1.0, rhs, -1.0)
    }
}

/// Returns `ca*a + cb*b`, pruning coefficients below the zero tolerance.
pub fn combine(a: &LinForm, ca: f64, b: &LinForm, cb: f64) -> LinForm {
    let mut out = LinForm {
        terms: BTreeMap::new(),
        constant: ca * a.constant + cb * b.constant,
    };
    if out.constant.abs() < ZERO_PRUNE_TOL {
        out.constant = 0.0;
    }
    for (&label, &c) in &a.terms {
        out.insert_pruned(label, ca * c + cb * b.coeff(label));
    }
    for (&label, &c) in &b.terms {
        if !a.terms.contains_key(&label) {
            out.insert_pruned(label, cb * c);
        }
    }
    out
}

/// An optical mode in the Heisenberg picture: the pair (x-form, y-form).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadMode {
    pub x: LinForm,
    pub y: LinForm,
}

impl QuadMode {
    /// Fresh elementary mode over an (X-type, Y-type) label pair.
    pub fn elementary(x_label: BasisLabel, y_label: BasisLabel) -> Self {
        QuadMode {
            x: LinForm::symbol(x_label),
            y: LinForm::symbol(y_label),
        }
    }

    /// Elementary r-basis mode `(x_ridx, y_ridx)`.
    pub fn elementary_r(idx: usize) -> Self {
        Self::elementary(BasisLabel::RX(idx), BasisLabel::RY(idx))
    }

    /// Teleported-input mode of one party.
    pub fn input(owner: Owner) -> Self {
        Self::elementary(BasisLabel::InputX(owner), BasisLabel::InputY(owner))
    }

    pub fn zero() -> Self {
        QuadMode { x: LinForm::zero(), y: LinForm::zero() }
    }
}

/// Applies a complex matrix `U` to a list of modes via
/// `x'_j + i y'_j = sum_k U_jk (x_k + i y_k)`.
pub fn apply_complex_linear(
    u: &DMatrix<Complex<f64>>,
    modes: &[QuadMode],
) -> Result<Vec<QuadMode>, QuadAlgebraError> {
    let n = modes.len();
    if u.nrows() != n || u.ncols() != n {
        return Err(QuadAlgebraError::DimensionMismatch {
            rows: u.nrows(),
            cols: u.ncols(),
            modes: n,
        });
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut x = LinForm::zero();
        let mut y = LinForm::zero();
        for k in 0..n {
            let re = u[(j, k)].re;
            let im = u[(j, k)].im;
            // x' = Re(U) x - Im(U) y ; y' = Im(U) x + Re(U) y
            x = combine(&x, 1.0, &combine(&modes[k].x, re, &modes[k].y, -im), 1.0);
            y = combine(&y, 1.0, &combine(&modes[k].x, im, &modes[k].y, re), 1.0);
        }
        out.push(QuadMode { x, y });
    }
    Ok(out)
}

/// Symmetric beam splitter: `((m1+m2)/sqrt(2), (m1-m2)/sqrt(2))`,
/// component-wise in x and y. Applying it twice restores the inputs.
pub fn beamsplitter_pair(m1: &QuadMode, m2: &QuadMode) -> (QuadMode, QuadMode) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (
        QuadMode {
            x: combine(&m1.x, s, &m2.x, s),
            y: combine(&m1.y, s, &m2.y, s),
        },
        QuadMode {
            x: combine(&m1.x, s, &m2.x, -s),
            y: combine(&m1.y, s, &m2.y, -s),
        },
    )
}

/// Photocurrent form of a homodyne detector with local-oscillator phase
/// `theta` and amplitude `beta0`: `beta0 (cos(theta) x + sin(theta) y)`.
pub fn homodyne_form(m: &QuadMode, theta: f64, beta0: f64) -> Result<LinForm, QuadAlgebraError> {
    if beta0 <= 0.0 {
        return Err(QuadAlgebraError::NonPositiveBeta(beta0));
    }
    Ok(combine(&m.x, beta0 * theta.cos(), &m.y, beta0 * theta.sin()))
}

/// Sets each measured form equal to its photocurrent symbol, solves the
/// square system for `eliminate_labels`, and substitutes the solutions into
/// every target.
///
/// The returned forms contain no eliminated labels; photocurrent symbols
/// enter carrying the inverse of whatever scale the measured forms had
/// (for homodyne forms, the 1/beta0 normalization).
pub fn eliminate(
    measured: &[(LinForm, BasisLabel)],
    targets: &[LinForm],
    eliminate_labels: &[BasisLabel],
) -> Result<Vec<LinForm>, QuadAlgebraError> {
    let k = eliminate_labels.len();
    if measured.len() != k {
        return Err(QuadAlgebraError::CountMismatch {
            measured: measured.len(),
            labels: k,
        });
    }
    if k == 0 {
        return Ok(targets.to_vec());
    }

    let m = DMatrix::from_fn(k, k, |r, c| measured[r].0.coeff(eliminate_labels[c]));

    let svd = m.clone().svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        let labels = eliminate_labels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        return Err(QuadAlgebraError::DegenerateMeasurementSet { cond, labels });
    }
    let m_inv = m.try_inverse().ok_or_else(|| {
        let labels = eliminate_labels
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        QuadAlgebraError::DegenerateMeasurementSet { cond, labels }
    })?;

    // rest_r = measured_r with the eliminated labels removed, so that the
    // solution reads label_c = sum_r m_inv[c,r] * (photocurrent_r - rest_r).
    let rests: Vec<LinForm> = measured
        .iter()
        .map(|(f, _)| {
            let mut rest = f.clone();
            for &l in eliminate_labels {
                rest.terms.remove(&l);
            }
            rest
        })
        .collect();

    let solutions: Vec<LinForm> = (0..k)
        .map(|c| {
            let mut sol = LinForm::zero();
            for r in 0..k {
                let w = m_inv[(c, r)];
                sol = combine(&sol, 1.0, &LinForm::symbol(measured[r].1), w);
                sol = combine(&sol, 1.0, &rests[r], -w);
            }
            sol
        })
        .collect();

    let out = targets
        .iter()
        .map(|t| {
            let mut acc = t.clone();
            for (c, &l) in eliminate_labels.iter().enumerate() {
                let coeff = acc.coeff(l);
                if coeff != 0.0 {
                    // Substitution removes the label identically.
                    acc.terms.remove(&l);
                    acc = combine(&acc, 1.0, &solutions[c], coeff);
                }
            }
            for &l in eliminate_labels {
                acc.terms.remove(&l);
            }
            acc
        })
        .collect();
    Ok(out)
}

/// Variance of a linear form under the given per-label variances and
/// optional cross-covariances: `sum_jk c_j c_k Cov(j, k)`.
pub fn variance_of(
    f: &LinForm,
    var: &BTreeMap<BasisLabel, f64>,
    cov: Option<&BTreeMap<(BasisLabel, BasisLabel), f64>>,
) -> Result<f64, QuadAlgebraError> {
    let entries: Vec<(BasisLabel, f64)> = f.terms().collect();
    for (label, _) in &entries {
        if label.is_photocurrent() {
            return Err(QuadAlgebraError::PhotocurrentInVariance(label.to_string()));
        }
        if !var.contains_key(label) {
            return Err(QuadAlgebraError::MissingVariance(label.to_string()));
        }
    }
    let mut total = 0.0;
    for (j, &(lj, cj)) in entries.iter().enumerate() {
        total += cj * cj * var[&lj];
        for &(lk, ck) in entries.iter().skip(j + 1) {
            if let Some(covs) = cov {
                let cross = covs
                    .get(&(lj, lk))
                    .or_else(|| covs.get(&(lk, lj)))
                    .copied()
                    .unwrap_or(0.0);
                total += 2.0 * cj * ck * cross;
            }
        }
    }
    Ok(total)
}

/// Formal commutator bracket of two forms in units of the canonical
/// `[x, y] = +1` pairing; the physical commutator is i/2 times this.
///
/// For a canonical mode set, `pairing(x_j, y_k) = delta_jk` and the pairing
/// of two x-forms or two y-forms vanishes. Unitary transforms applied via
/// [`apply_complex_linear`] preserve it.
pub fn commutator_pairing(f: &LinForm, g: &LinForm) -> f64 {
    let mut total = 0.0;
    for (label, c) in f.terms() {
        if let Some((partner, sign)) = label.conjugate() {
            total += sign * c * g.coeff(partner);
        }
    }
    total
}

/// Solves `m x = rhs` for small well-conditioned systems.
pub fn solve_linear(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use num_complex::Complex64;

    fn x1() -> LinForm {
        LinForm::symbol(BasisLabel::RX(0))
    }
    fn y1() -> LinForm {
        LinForm::symbol(BasisLabel::RY(0))
    }

    #[test]
    fn combine_cancellation_gives_zero() {
        let z = combine(&x1(), 1.0, &x1(), -1.0);
        assert!(z.is_zero());
    }

    #[test]
    fn combine_is_linear() {
        let f = combine(&x1(), 2.0, &y1(), 3.0);
        assert_eq!(f.coeff(BasisLabel::RX(0)), 2.0);
        assert_eq!(f.coeff(BasisLabel::RY(0)), 3.0);
    }

    #[test]
    fn combine_rescales() {
        let two_x = x1().scale(2.0);
        let f = combine(&two_x, 0.5, &LinForm::zero(), 0.0);
        assert_eq!(f, x1());
    }

    #[test]
    fn identity_transform_keeps_modes() {
        let modes = vec![QuadMode::elementary_r(0), QuadMode::elementary_r(1)];
        let u = DMatrix::<Complex64>::identity(2, 2);
        let out = apply_complex_linear(&u, &modes).unwrap();
        assert_eq!(out, modes);
    }

    #[test]
    fn phase_rotation_by_half_pi() {
        let modes = vec![QuadMode::elementary_r(0)];
        let u = dmatrix![Complex64::new(0.0, 1.0)];
        let out = apply_complex_linear(&u, &modes).unwrap();
        // (x, y) -> (-y, x)
        assert_eq!(out[0].x, y1().scale(-1.0));
        assert_eq!(out[0].y, x1());
    }

    #[test]
    fn two_mode_bogoliubov_row() {
        // U = (1/sqrt2) [[1, i], [i, 1]] sends x'_1 to (x_1 - y_2)/sqrt2.
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let u = dmatrix![
            Complex64::new(s, 0.0), Complex64::new(0.0, s);
            Complex64::new(0.0, s), Complex64::new(s, 0.0)
        ];
        let modes = vec![QuadMode::elementary_r(0), QuadMode::elementary_r(1)];
        let out = apply_complex_linear(&u, &modes).unwrap();
        assert!((out[0].x.coeff(BasisLabel::RX(0)) - s).abs() < 1e-15);
        assert!((out[0].x.coeff(BasisLabel::RY(1)) + s).abs() < 1e-15);
        assert_eq!(out[0].x.coeff(BasisLabel::RY(0)), 0.0);
    }

    #[test]
    fn transform_dimension_mismatch() {
        let modes = vec![QuadMode::elementary_r(0)];
        let u = DMatrix::<Complex64>::identity(2, 2);
        assert!(matches!(
            apply_complex_linear(&u, &modes),
            Err(QuadAlgebraError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transforms_compose() {
        let mut rng = crate::test_rng(17);
        let n = 4;
        let modes: Vec<QuadMode> = (0..n).map(QuadMode::elementary_r).collect();
        let rand_c = |rng: &mut rand_chacha::ChaCha8Rng| {
            Complex64::new(rand::Rng::random_range(rng, -1.0..1.0), rand::Rng::random_range(rng, -1.0..1.0))
        };
        let u1 = DMatrix::from_fn(n, n, |_, _| rand_c(&mut rng));
        let u2 = DMatrix::from_fn(n, n, |_, _| rand_c(&mut rng));
        let chained = apply_complex_linear(&u2, &apply_complex_linear(&u1, &modes).unwrap()).unwrap();
        let direct = apply_complex_linear(&(&u2 * &u1), &modes).unwrap();
        for (a, b) in chained.iter().zip(&direct) {
            let dx = combine(&a.x, 1.0, &b.x, -1.0).max_abs();
            let dy = combine(&a.y, 1.0, &b.y, -1.0).max_abs();
            assert!(dx < 1e-9 && dy < 1e-9, "dx={dx} dy={dy}");
        }
    }

    #[test]
    fn unitary_preserves_commutator_pairing() {
        // (I + iA)(I + A^2)^{-1/2} for a random symmetric A is unitary.
        let mut rng = crate::test_rng(3);
        let n = 4;
        let a = crate::random_symmetric(n, 2.0, &mut rng);
        let u = crate::cluster::bogoliubov_matrix(&a).unwrap();
        let modes: Vec<QuadMode> = (0..n).map(QuadMode::elementary_r).collect();
        let out = apply_complex_linear(&u, &modes).unwrap();
        for j in 0..n {
            for k in 0..n {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((commutator_pairing(&out[j].x, &out[k].y) - expect).abs() < 1e-9);
                assert!(commutator_pairing(&out[j].x, &out[k].x).abs() < 1e-9);
                assert!(commutator_pairing(&out[j].y, &out[k].y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn beamsplitter_split_and_cancel() {
        let a = QuadMode::input(Owner::A);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (o1, o2) = beamsplitter_pair(&a, &QuadMode::zero());
        assert!((o1.x.coeff(BasisLabel::InputX(Owner::A)) - s).abs() < 1e-15);
        assert_eq!(o1.x, o2.x);
        assert_eq!(o1.y, o2.y);

        let (_, diff) = beamsplitter_pair(&a, &a);
        assert!(diff.x.is_zero() && diff.y.is_zero());
    }

    #[test]
    fn beamsplitter_is_involutive() {
        let m1 = QuadMode::input(Owner::A);
        let m2 = QuadMode::elementary_r(0);
        let (o1, o2) = beamsplitter_pair(&m1, &m2);
        let (b1, b2) = beamsplitter_pair(&o1, &o2);
        assert!(combine(&b1.x, 1.0, &m1.x, -1.0).max_abs() < 1e-12);
        assert!(combine(&b2.y, 1.0, &m2.y, -1.0).max_abs() < 1e-12);
    }

    #[test]
    fn homodyne_quadrature_selection() {
        let m = QuadMode::input(Owner::A);
        let fx = homodyne_form(&m, 0.0, 1.0).unwrap();
        assert_eq!(fx, m.x);
        let fy = homodyne_form(&m, std::f64::consts::FRAC_PI_2, 1.0).unwrap();
        assert_eq!(fy, m.y);
        let f45 = homodyne_form(&m, std::f64::consts::FRAC_PI_4, 2.0).unwrap();
        let expect = combine(&m.x, std::f64::consts::SQRT_2, &m.y, std::f64::consts::SQRT_2);
        assert!(combine(&f45, 1.0, &expect, -1.0).max_abs() < 1e-12);
    }

    #[test]
    fn homodyne_rejects_nonpositive_amplitude() {
        let m = QuadMode::input(Owner::A);
        assert!(homodyne_form(&m, 0.0, 0.0).is_err());
    }

    #[test]
    fn eliminate_single_equation() {
        let xa = LinForm::symbol(BasisLabel::InputX(Owner::A));
        let measured = vec![(&x1() + &xa, BasisLabel::Photocurrent(0))];
        let out = eliminate(&measured, &[x1()], &[BasisLabel::RX(0)]).unwrap();
        // x_r1 = i1 - x_a
        assert_eq!(out[0].coeff(BasisLabel::Photocurrent(0)), 1.0);
        assert_eq!(out[0].coeff(BasisLabel::InputX(Owner::A)), -1.0);
        assert!(!out[0].contains(BasisLabel::RX(0)));
    }

    #[test]
    fn eliminate_two_by_two() {
        let x2 = LinForm::symbol(BasisLabel::RX(1));
        let measured = vec![
            (&x1() + &x2, BasisLabel::Photocurrent(0)),
            (&x1() - &x2, BasisLabel::Photocurrent(1)),
        ];
        let out = eliminate(&measured, &[x1()], &[BasisLabel::RX(0), BasisLabel::RX(1)]).unwrap();
        assert!((out[0].coeff(BasisLabel::Photocurrent(0)) - 0.5).abs() < 1e-15);
        assert!((out[0].coeff(BasisLabel::Photocurrent(1)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eliminate_detects_rank_deficiency() {
        let measured = vec![
            (x1(), BasisLabel::Photocurrent(0)),
            (x1().scale(2.0), BasisLabel::Photocurrent(1)),
        ];
        let err = eliminate(&measured, &[x1()], &[BasisLabel::RX(0), BasisLabel::RX(1)]).unwrap_err();
        match err {
            QuadAlgebraError::DegenerateMeasurementSet { labels, .. } => {
                assert!(labels.contains("x_r1") && labels.contains("x_r2"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn eliminate_is_exact_on_consistent_systems() {
        // Substituting the solutions back into the measured forms must
        // reproduce the photocurrent symbols identically.
        let mut rng = crate::test_rng(23);
        let labels: Vec<BasisLabel> = (0..4).map(BasisLabel::RX).collect();
        let extras: Vec<BasisLabel> = (0..4).map(BasisLabel::RY).collect();
        let mut measured = Vec::new();
        for k in 0..4 {
            let mut f = LinForm::zero();
            for &l in labels.iter().chain(&extras) {
                f = combine(&f, 1.0, &LinForm::symbol(l), rand::Rng::random_range(&mut rng, -2.0..2.0));
            }
            measured.push((f, BasisLabel::Photocurrent(k)));
        }
        let targets: Vec<LinForm> = measured.iter().map(|(f, _)| f.clone()).collect();
        let out = eliminate(&measured, &targets, &labels).unwrap();
        for (k, form) in out.iter().enumerate() {
            let mut expect = LinForm::symbol(BasisLabel::Photocurrent(k));
            expect = combine(&expect, 1.0, form, -1.0);
            assert!(expect.max_abs() < 1e-9, "row {k}: {expect}");
        }
    }

    #[test]
    fn variance_examples() {
        let ys1 = LinForm::symbol(BasisLabel::SqY(0));
        let mut var = BTreeMap::new();
        var.insert(BasisLabel::SqY(0), 0.25);
        assert!((variance_of(&ys1, &var, None).unwrap() - 0.25).abs() < 1e-15);
        assert!((variance_of(&ys1.scale(2.0), &var, None).unwrap() - 1.0).abs() < 1e-15);

        let ys2 = LinForm::symbol(BasisLabel::SqY(1));
        let sum = &ys1 + &ys2;
        var.insert(BasisLabel::SqY(0), 0.1);
        var.insert(BasisLabel::SqY(1), 0.1);
        assert!((variance_of(&sum, &var, None).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn variance_with_cross_covariance() {
        let f = &LinForm::symbol(BasisLabel::SqY(0)) + &LinForm::symbol(BasisLabel::SqY(1));
        let mut var = BTreeMap::new();
        var.insert(BasisLabel::SqY(0), 0.5);
        var.insert(BasisLabel::SqY(1), 0.5);
        let mut cov = BTreeMap::new();
        cov.insert((BasisLabel::SqY(0), BasisLabel::SqY(1)), -0.25);
        let v = variance_of(&f, &var, Some(&cov)).unwrap();
        assert!((v - 0.5).abs() < 1e-15); // 0.5 + 0.5 + 2*(-0.25)
    }

    #[test]
    fn variance_error_paths() {
        let f = LinForm::symbol(BasisLabel::SqY(0));
        let var = BTreeMap::new();
        assert!(matches!(
            variance_of(&f, &var, None),
            Err(QuadAlgebraError::MissingVariance(_))
        ));
        let g = LinForm::symbol(BasisLabel::Photocurrent(0));
        assert!(matches!(
            variance_of(&g, &var, None),
            Err(QuadAlgebraError::PhotocurrentInVariance(_))
        ));
    }
}
