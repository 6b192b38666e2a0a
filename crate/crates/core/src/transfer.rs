//! Transfer matrices of the Fibonacci Hamiltonian.
//!
//! For the eigenvalue equation `u(n+1) + u(n−1) + λ v_θ(n) u(n) = E u(n)`
//! the one-step matrix is
//!
//! ```text
//! T(m) = | E − λ v_θ(m)   −1 |
//!        |      1          0 |
//! ```
//!
//! and `M(n) = T(n)⋯T(1)` for `n ≥ 1`, `M(n) = T(n+1)^{-1}⋯T(0)^{-1}` for
//! `n ≤ −1`. The traces over Fibonacci lengths are `x_k = tr M(F_k)` and
//! `y_k = tr M(−F_k)`.
//!
//! Products are accumulated with a shared power-of-two scale so that
//! hyperbolic growth off the spectrum never overflows; scaling by powers of
//! two is exact, so results do not depend on when rescaling happens.

use std::ops::Mul;

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;
use thiserror::Error;

use crate::ext::{DualScalar, ExtReal};
use crate::phase::{GoldenConstant, PhasePoint};
use crate::words::{fib_len, rotation_block, ParityEntry, ParityReport, Side};

/// Relative tolerance for phase-θ versus phase-0 trace agreement, measured
/// against `max(1, |x_k(E, λ, 0)|)`.
pub const TRACE_MATCH_TOL: f64 = 1e-9;

/// Relative slack allowed below zero for the norm–derivative margin.
pub const MARGIN_SLACK: f64 = 1e-8;

/// Entries are rescaled once they exceed `2^RESCALE_BITS`.
const RESCALE_BITS: i64 = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error("M(0) is not defined: the product length must be nonzero")]
    ZeroLength,
    #[error("coupling {0} must be finite and nonnegative")]
    InvalidCoupling(f64),
    #[error("energy grid is empty")]
    EmptyGrid,
    #[error("no parity class of {side}-side traces matches phase 0 at phase {theta}")]
    TraceParityViolation { side: Side, theta: String },
    #[error("norm–derivative margin {margin} < 0 at k={k}, E={energy}, phase {theta}")]
    NegativeMargin { k: usize, energy: f64, theta: String, margin: String },
}

/// Potential strength `λ ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Coupling(f64);

impl Coupling {
    pub fn new(lambda: f64) -> Result<Self, TransferError> {
        if lambda.is_finite() && lambda >= 0.0 {
            Ok(Coupling(lambda))
        } else {
            Err(TransferError::InvalidCoupling(lambda))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Large-coupling regime `λ > 8` in which the dynamical upper bound is
    /// established.
    pub fn in_theorem_regime(self) -> bool {
        self.0 > 8.0
    }
}

impl TryFrom<f64> for Coupling {
    type Error = TransferError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Coupling::new(v)
    }
}

impl From<Coupling> for f64 {
    fn from(c: Coupling) -> f64 {
        c.0
    }
}

/// A real 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferMatrix {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl TransferMatrix {
    pub const IDENTITY: TransferMatrix = TransferMatrix { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0 };
    const ZERO: TransferMatrix = TransferMatrix { a11: 0.0, a12: 0.0, a21: 0.0, a22: 0.0 };

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        TransferMatrix { a11, a12, a21, a22 }
    }

    /// `[[a, −1], [1, 0]]`.
    pub fn one_step(a: f64) -> Self {
        TransferMatrix::new(a, -1.0, 1.0, 0.0)
    }

    /// Closed-form inverse of `[[a, −1], [1, 0]]`: `[[0, 1], [−1, a]]`.
    pub fn one_step_inverse(a: f64) -> Self {
        TransferMatrix::new(0.0, 1.0, -1.0, a)
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn max_abs(&self) -> f64 {
        self.a11.abs().max(self.a12.abs()).max(self.a21.abs()).max(self.a22.abs())
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a11 * self.a11 + self.a12 * self.a12 + self.a21 * self.a21 + self.a22 * self.a22
    }

    /// Largest singular value squared,
    /// `(tr AᵀA + √((tr AᵀA)² − 4 det²)) / 2`, evaluated on `A / max|a_ij|`
    /// so the fourth powers cannot overflow.
    pub fn spectral_norm_sq(&self) -> f64 {
        let s = self.max_abs();
        if s == 0.0 || !s.is_finite() {
            return s * s;
        }
        let a = self.scaled(1.0 / s);
        let t = a.frobenius_sq();
        let d = a.det();
        let disc = (t * t - 4.0 * d * d).max(0.0);
        0.5 * (t + disc.sqrt()) * s * s
    }

    fn scaled(&self, s: f64) -> Self {
        TransferMatrix::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    fn add(&self, o: &TransferMatrix) -> Self {
        TransferMatrix::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;
    fn mul(self, b: TransferMatrix) -> TransferMatrix {
        TransferMatrix::new(
            self.a11 * b.a11 + self.a12 * b.a21,
            self.a11 * b.a12 + self.a12 * b.a22,
            self.a21 * b.a11 + self.a22 * b.a21,
            self.a21 * b.a12 + self.a22 * b.a22,
        )
    }
}

/// `mat · 2^log2_scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledMatrix {
    pub mat: TransferMatrix,
    pub log2_scale: i64,
}

impl ScaledMatrix {
    pub const IDENTITY: ScaledMatrix = ScaledMatrix { mat: TransferMatrix::IDENTITY, log2_scale: 0 };

    fn rescale(&mut self) {
        let m = self.mat.max_abs();
        if m > 0.0 && m.is_finite() {
            let e = m.log2().floor() as i64;
            if e > RESCALE_BITS {
                self.mat = self.mat.scaled(crate::ext::ldexp(1.0, -e));
                self.log2_scale += e;
            }
        }
    }

    fn left_mul(&mut self, step: TransferMatrix) {
        self.mat = step * self.mat;
        self.rescale();
    }

    pub fn trace(&self) -> ExtReal {
        ExtReal::new(self.mat.trace(), self.log2_scale)
    }

    pub fn det(&self) -> ExtReal {
        ExtReal::new(self.mat.det(), 2 * self.log2_scale)
    }

    pub fn spectral_norm_sq(&self) -> ExtReal {
        ExtReal::new(self.mat.spectral_norm_sq(), 2 * self.log2_scale)
    }

    /// The plain matrix; entries saturate to ±∞ outside the `f64` range.
    pub fn to_matrix(&self) -> TransferMatrix {
        self.mat.scaled(crate::ext::ldexp(1.0, self.log2_scale))
    }
}

/// A product and its energy derivative, sharing one scale.
#[derive(Clone, Copy, Debug)]
struct DualProduct {
    value: TransferMatrix,
    deriv: TransferMatrix,
    log2_scale: i64,
}

/// `∂T/∂E = [[1, 0], [0, 0]]`.
const STEP_DERIV: TransferMatrix = TransferMatrix { a11: 1.0, a12: 0.0, a21: 0.0, a22: 0.0 };
/// `∂T^{-1}/∂E = [[0, 0], [0, 1]]`.
const STEP_INVERSE_DERIV: TransferMatrix = TransferMatrix { a11: 0.0, a12: 0.0, a21: 0.0, a22: 1.0 };

impl DualProduct {
    fn identity() -> Self {
        DualProduct { value: TransferMatrix::IDENTITY, deriv: TransferMatrix::ZERO, log2_scale: 0 }
    }

    fn left_mul(&mut self, step: TransferMatrix, step_deriv: TransferMatrix) {
        self.deriv = (step_deriv * self.value).add(&(step * self.deriv));
        self.value = step * self.value;
        let m = self.value.max_abs().max(self.deriv.max_abs());
        if m > 0.0 && m.is_finite() {
            let e = m.log2().floor() as i64;
            if e > RESCALE_BITS {
                let s = crate::ext::ldexp(1.0, -e);
                self.value = self.value.scaled(s);
                self.deriv = self.deriv.scaled(s);
                self.log2_scale += e;
            }
        }
    }

    fn trace(&self) -> DualTrace {
        DualTrace {
            x: ExtReal::new(self.value.trace(), self.log2_scale),
            dx: ExtReal::new(self.deriv.trace(), self.log2_scale),
        }
    }
}

/// A trace with its energy derivative, both in extended range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualTrace {
    pub x: ExtReal,
    pub dx: ExtReal,
}

impl DualTrace {
    pub fn to_dual(self) -> DualScalar {
        DualScalar::new(self.x.to_f64(), self.dx.to_f64())
    }
}

/// One row of `traces.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSample {
    pub k: usize,
    pub energy: f64,
    pub lambda: f64,
    pub theta: PhasePoint,
    pub x: ExtReal,
    pub dx: ExtReal,
}

impl TraceSample {
    pub fn compute(k: usize, energy: f64, lambda: f64, theta: PhasePoint) -> Self {
        let t = trace_derivative(k, energy, lambda, theta);
        TraceSample { k, energy, lambda, theta, x: t.x, dx: t.dx }
    }
}

/// Potential symbols in the order the one-step matrices are applied:
/// `v(1), v(2), …` on the right, `v(0), v(−1), …` on the left.
fn site_potential(side: Side, len: usize, theta: PhasePoint) -> Vec<bool> {
    if len == 0 {
        return Vec::new();
    }
    let len = len as i64;
    match side {
        Side::Right => rotation_block(1, len, theta).expect("nonempty range").iter().map(|s| s.is_one()).collect(),
        Side::Left => {
            let w = rotation_block(1 - len, 0, theta).expect("nonempty range");
            (0..w.len()).rev().map(|i| w.get(i).is_one()).collect()
        }
    }
}

fn step_matrix(side: Side, energy: f64, lambda: f64, v: bool) -> TransferMatrix {
    let a = energy - if v { lambda } else { 0.0 };
    match side {
        Side::Right => TransferMatrix::one_step(a),
        Side::Left => TransferMatrix::one_step_inverse(a),
    }
}

/// `T(m, E, λ, θ)`.
pub fn local_matrix(m: i64, energy: f64, lambda: f64, theta: PhasePoint) -> TransferMatrix {
    let golden = GoldenConstant::get();
    let v = golden.orbit(m, theta) >= golden.threshold();
    step_matrix(Side::Right, energy, lambda, v)
}

/// `M(n, E, λ, θ)` for `n ≠ 0`.
pub fn transfer_product(n: i64, energy: f64, lambda: f64, theta: PhasePoint) -> Result<ScaledMatrix, TransferError> {
    if n == 0 {
        return Err(TransferError::ZeroLength);
    }
    let side = if n > 0 { Side::Right } else { Side::Left };
    let mut m = ScaledMatrix::IDENTITY;
    for v in site_potential(side, n.unsigned_abs() as usize, theta) {
        m.left_mul(step_matrix(side, energy, lambda, v));
    }
    Ok(m)
}

/// Traces and derivatives of `M(±F_k)` for `k = 0..=k_max`, in one pass.
pub fn half_line_traces(side: Side, k_max: usize, energy: f64, lambda: f64, theta: PhasePoint) -> Vec<DualTrace> {
    let total = fib_len(k_max as i64);
    let mut out = Vec::with_capacity(k_max + 1);
    let mut next_k = 0;
    let mut p = DualProduct::identity();
    let step_deriv = match side {
        Side::Right => STEP_DERIV,
        Side::Left => STEP_INVERSE_DERIV,
    };
    for (i, v) in site_potential(side, total, theta).into_iter().enumerate() {
        p.left_mul(step_matrix(side, energy, lambda, v), step_deriv);
        while next_k <= k_max && fib_len(next_k as i64) == i + 1 {
            out.push(p.trace());
            next_k += 1;
        }
    }
    out
}

/// Traces of `M(±F_k)` for `k = 0..=k_max` with the product accumulated in
/// double-double arithmetic and rescaled by powers of two. Inside the
/// spectrum the entries of `M(F_k)` grow while its trace stays bounded, so
/// the f64 product loses the trace to cancellation at moderate `k`.
pub fn half_line_traces_fine(side: Side, k_max: usize, energy: f64, lambda: f64, theta: PhasePoint) -> Vec<ExtReal> {
    const RESCALE_BITS: i32 = 256;
    let limit = 2f64.powi(RESCALE_BITS);
    let shrink = 2f64.powi(-RESCALE_BITS);
    let total = fib_len(k_max as i64);
    let e = TwoFloat::from(energy);
    let (mut m, mut exp) = ([TwoFloat::from(1.0), TwoFloat::from(0.0), TwoFloat::from(0.0), TwoFloat::from(1.0)], 0i64);
    let mut out = Vec::with_capacity(k_max + 1);
    let mut next_k = 0;
    for (i, v) in site_potential(side, total, theta).into_iter().enumerate() {
        let a = if v { e - lambda } else { e };
        let [m11, m12, m21, m22] = m;
        m = match side {
            Side::Right => [a * m11 - m21, a * m12 - m22, m11, m12],
            Side::Left => [m21, m22, a * m21 - m11, a * m22 - m12],
        };
        if m.iter().any(|x| x.hi().abs() > limit) {
            m = m.map(|x| x * shrink);
            exp += RESCALE_BITS as i64;
        }
        while next_k <= k_max && fib_len(next_k as i64) == i + 1 {
            out.push(ExtReal::new((m[0] + m[3]).hi(), exp));
            next_k += 1;
        }
    }
    out
}

/// `x_k(E, λ, θ) = tr M(F_k)`.
pub fn trace_x(k: usize, energy: f64, lambda: f64, theta: PhasePoint) -> ExtReal {
    transfer_product(fib_len(k as i64) as i64, energy, lambda, theta).expect("F_k ≥ 1").trace()
}

/// `y_k(E, λ, θ) = tr M(−F_k)`.
pub fn trace_y(k: usize, energy: f64, lambda: f64, theta: PhasePoint) -> ExtReal {
    transfer_product(-(fib_len(k as i64) as i64), energy, lambda, theta).expect("F_k ≥ 1").trace()
}

/// `(x_k, ∂x_k/∂E)` by forward-mode propagation through the product.
pub fn trace_derivative(k: usize, energy: f64, lambda: f64, theta: PhasePoint) -> DualTrace {
    half_line_traces(Side::Right, k, energy, lambda, theta)[k]
}

/// `(y_k, ∂y_k/∂E)`.
pub fn trace_derivative_left(k: usize, energy: f64, lambda: f64, theta: PhasePoint) -> DualTrace {
    half_line_traces(Side::Left, k, energy, lambda, theta)[k]
}

/// `x_0 … x_{k_max}` at phase 0 via `x_{k+1} = x_k x_{k−1} − x_{k−2}`,
/// seeded with `x_0, x_1, x_2` from direct products.
pub fn trace_sequence_recursive(k_max: usize, energy: f64, lambda: f64) -> Vec<ExtReal> {
    let seeds: Vec<ExtReal> = half_line_traces(Side::Right, k_max.min(2), energy, lambda, PhasePoint::ZERO)
        .into_iter()
        .map(|t| t.x)
        .collect();
    let mut xs = seeds;
    while xs.len() <= k_max {
        let n = xs.len();
        xs.push(xs[n - 1] * xs[n - 2] - xs[n - 3]);
    }
    xs
}

/// Dual-number version of the trace recursion, seeded in closed form from
/// `x_{−1} = E`, `x_0 = E − λ`, `x_1 = E(E − λ) − 2`.
///
/// Plain `f64`: intended for energies on or near the spectrum where the
/// orbit stays bounded; off the spectrum values overflow to ±∞.
pub fn trace_sequence_dual(k_max: usize, energy: f64, lambda: f64) -> Vec<DualScalar> {
    let e = DualScalar::variable(energy);
    let lam = DualScalar::constant(lambda);
    let two = DualScalar::constant(2.0);
    let mut xs = vec![e, e - lam, e * (e - lam) - two];
    while xs.len() < k_max + 2 {
        let n = xs.len();
        xs.push(xs[n - 1] * xs[n - 2] - xs[n - 3]);
    }
    xs.truncate(k_max + 2);
    xs.remove(0);
    xs
}

/// Extended-range trace recursion from the same closed-form seeds, with
/// `x_{-1}` returned first. Used for sign and magnitude tests far off the
/// spectrum.
pub(crate) fn trace_sequence_ext(k_max: usize, energy: f64, lambda: f64) -> Vec<ExtReal> {
    let e = ExtReal::from_f64(energy);
    let x0 = ExtReal::from_f64(energy - lambda);
    let x1 = e * x0 - ExtReal::from_f64(2.0);
    let mut xs = vec![e, x0, x1];
    while xs.len() < k_max + 2 {
        let n = xs.len();
        xs.push(xs[n - 1] * xs[n - 2] - xs[n - 3]);
    }
    xs.truncate(k_max + 2);
    xs
}

/// `x_{k+1}² + x_k² + x_{k−1}² − x_{k+1} x_k x_{k−1} − 4`; equals `λ²` along
/// every trace orbit.
pub fn fricke_invariant(next: ExtReal, cur: ExtReal, prev: ExtReal) -> ExtReal {
    next * next + cur * cur + prev * prev - next * cur * prev - ExtReal::from_f64(4.0)
}

fn window_side(l: f64) -> Side {
    if l < 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

/// `‖M‖²_L` for several windows on one half-line, in a single pass.
///
/// For `L > 0`: `Σ_{n=1}^{⌊L⌋} ‖M(n)‖² + (L − ⌊L⌋)‖M(⌊L⌋+1)‖²`. Negative
/// `L` uses the left half-line, `n = −1, …, −⌊|L|⌋`, with the same
/// fractional term at `n = −⌊|L|⌋ − 1`. All `L` must share a sign.
pub fn cumulative_norms(ls: &[f64], energy: f64, lambda: f64, theta: PhasePoint) -> Vec<ExtReal> {
    if ls.is_empty() {
        return Vec::new();
    }
    let side = window_side(ls[0]);
    assert!(ls.iter().all(|&l| window_side(l) == side), "windows must lie on one half-line");
    let max_floor = ls.iter().map(|l| l.abs().floor() as usize).max().unwrap_or(0);
    // partial[n] = Σ_{m ≤ n} ‖M(±m)‖², norms[n] = ‖M(±n)‖²
    let mut partial = Vec::with_capacity(max_floor + 2);
    let mut norms = Vec::with_capacity(max_floor + 2);
    partial.push(ExtReal::ZERO);
    norms.push(ExtReal::ONE);
    let mut m = ScaledMatrix::IDENTITY;
    for v in site_potential(side, max_floor + 1, theta) {
        m.left_mul(step_matrix(side, energy, lambda, v));
        let n2 = m.spectral_norm_sq();
        norms.push(n2);
        partial.push(*partial.last().expect("seeded") + n2);
    }
    ls.iter()
        .map(|&l| {
            let a = l.abs();
            let fl = a.floor() as usize;
            let frac = a - fl as f64;
            if frac > 0.0 {
                partial[fl] + norms[fl + 1] * frac
            } else {
                partial[fl]
            }
        })
        .collect()
}

/// `‖M(E, λ, θ)‖²_L`.
pub fn cumulative_norm(l: f64, energy: f64, lambda: f64, theta: PhasePoint) -> ExtReal {
    cumulative_norms(&[l], energy, lambda, theta)[0]
}

/// Both sides of `4‖M‖³_{F_k} ≥ |∂x_k/∂E|`, where `‖M‖³_{F_k}` is read as
/// `(‖M‖²_{F_k})^{3/2}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormTraceMargin {
    pub k: usize,
    pub lhs: ExtReal,
    pub rhs: ExtReal,
    pub margin: ExtReal,
}

impl NormTraceMargin {
    /// Margin relative to the left-hand side.
    pub fn relative_margin(&self) -> f64 {
        if self.lhs.is_zero() {
            return self.margin.to_f64();
        }
        (self.margin / self.lhs).to_f64()
    }
}

/// Both sides of the norm–derivative inequality at one point, without
/// judging the sign.
pub fn norm_trace_margin(k: usize, energy: f64, lambda: f64, theta: PhasePoint) -> NormTraceMargin {
    let f = fib_len(k as i64) as f64;
    let norm_sq = cumulative_norm(f, energy, lambda, theta);
    let lhs = norm_sq.powf_abs(1.5) * 4.0;
    let rhs = trace_derivative(k, energy, lambda, theta).dx.abs();
    NormTraceMargin { k, lhs, rhs, margin: lhs - rhs }
}

/// [`norm_trace_margin`], failing when the relative margin is below
/// `−MARGIN_SLACK`.
pub fn norm_trace_inequality(k: usize, energy: f64, lambda: f64, theta: PhasePoint) -> Result<NormTraceMargin, TransferError> {
    let out = norm_trace_margin(k, energy, lambda, theta);
    let margin = out.margin;
    if out.relative_margin() < -MARGIN_SLACK {
        return Err(TransferError::NegativeMargin {
            k,
            energy,
            theta: theta.to_string(),
            margin: margin.to_string(),
        });
    }
    Ok(out)
}

/// Phase-θ traces compared against phase 0, per level and side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceParity {
    /// `x_k(E, λ, θ)` versus `x_k(E, λ, 0)`.
    pub right: ParityReport,
    /// `y_k(E, λ, θ)` versus `x_k(E, λ, 0)`.
    pub left: ParityReport,
    /// Worst relative deviation over the energy grid, indexed by `k`.
    pub right_max_dev: Vec<f64>,
    pub left_max_dev: Vec<f64>,
}

fn relative_deviation(a: ExtReal, reference: ExtReal) -> f64 {
    let scale = reference.abs().max(ExtReal::ONE);
    ((a - reference).abs() / scale).to_f64()
}

/// Checks, for `k ≤ k_max` and every energy in the grid, whether the phase-θ
/// traces on each half-line reproduce the phase-0 traces; fails if a side
/// has no fully passing parity class.
pub fn phase_trace_parity(
    theta: PhasePoint,
    lambda: f64,
    energies: &[f64],
    k_max: usize,
) -> Result<TraceParity, TransferError> {
    if energies.is_empty() {
        return Err(TransferError::EmptyGrid);
    }
    let mut right_dev = vec![0.0f64; k_max + 1];
    let mut left_dev = vec![0.0f64; k_max + 1];
    for &e in energies {
        let reference = half_line_traces(Side::Right, k_max, e, lambda, PhasePoint::ZERO);
        let right = half_line_traces(Side::Right, k_max, e, lambda, theta);
        let left = half_line_traces(Side::Left, k_max, e, lambda, theta);
        for k in 0..=k_max {
            right_dev[k] = right_dev[k].max(relative_deviation(right[k].x, reference[k].x));
            left_dev[k] = left_dev[k].max(relative_deviation(left[k].x, reference[k].x));
        }
    }
    let report = |side: Side, devs: &[f64]| {
        let entries = devs
            .iter()
            .enumerate()
            .map(|(k, &d)| ParityEntry { k, side, holds: d <= TRACE_MATCH_TOL })
            .collect();
        ParityReport::from_entries(side, entries)
    };
    let out = TraceParity {
        right: report(Side::Right, &right_dev),
        left: report(Side::Left, &left_dev),
        right_max_dev: right_dev,
        left_max_dev: left_dev,
    };
    for r in [&out.right, &out.left] {
        if !r.any_class_ok() {
            return Err(TransferError::TraceParityViolation { side: r.side, theta: theta.to_string() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z: PhasePoint = PhasePoint::ZERO;

    fn assert_matrix(m: TransferMatrix, expected: [f64; 4]) {
        let got = [m.a11, m.a12, m.a21, m.a22];
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-12, "{got:?} != {expected:?}");
        }
    }

    #[test]
    fn local_matrices() {
        assert_matrix(local_matrix(1, 0.0, 2.0, Z), [-2.0, -1.0, 1.0, 0.0]);
        assert_matrix(local_matrix(2, 0.0, 2.0, Z), [0.0, -1.0, 1.0, 0.0]);
        for m in -5..5 {
            assert_matrix(local_matrix(m, 0.7, 0.0, Z), [0.7, -1.0, 1.0, 0.0]);
        }
    }

    #[test]
    fn products_on_both_half_lines() {
        assert_matrix(transfer_product(1, 0.0, 2.0, Z).unwrap().to_matrix(), [-2.0, -1.0, 1.0, 0.0]);
        assert_matrix(transfer_product(2, 0.0, 2.0, Z).unwrap().to_matrix(), [-1.0, 0.0, -2.0, -1.0]);
        assert_matrix(transfer_product(-1, 0.0, 2.0, Z).unwrap().to_matrix(), [0.0, 1.0, -1.0, 0.0]);
        assert_eq!(transfer_product(0, 0.0, 2.0, Z), Err(TransferError::ZeroLength));
    }

    #[test]
    fn right_traces() {
        assert_eq!(trace_x(0, 0.3, 2.0, Z).to_f64(), 0.3 - 2.0);
        assert_eq!(trace_x(1, 0.0, 2.0, Z).to_f64(), -2.0);
        assert_eq!(trace_x(3, 0.0, 2.0, Z).to_f64(), -6.0);
    }

    #[test]
    fn left_traces() {
        assert_eq!(trace_y(1, 0.0, 2.0, Z).to_f64(), -2.0);
        assert_eq!(trace_y(0, 0.4, 2.0, Z).to_f64(), 0.4);
        for k in 0..8 {
            let (x, y) = (trace_x(k, 1.3, 0.0, Z).to_f64(), trace_y(k, 1.3, 0.0, Z).to_f64());
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "k={k}: {x} vs {y}");
        }
    }

    #[test]
    fn recursion_examples() {
        let xs = trace_sequence_recursive(3, 0.0, 2.0);
        let got: Vec<f64> = xs.iter().map(|x| x.to_f64()).collect();
        assert_eq!(got, [-2.0, -2.0, 4.0, -6.0]);
        let fricke = fricke_invariant(xs[2], xs[1], xs[0]).to_f64();
        assert!((fricke - 4.0).abs() < 1e-12);
        for k in 0..10 {
            let direct = trace_x(k, 2.0, 0.0, Z).to_f64();
            let rec = trace_sequence_recursive(10, 2.0, 0.0)[k].to_f64();
            assert!((direct - rec).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn closed_form_seeds_agree_with_products() {
        let (e, lam) = (0.37, 3.0);
        let dual = trace_sequence_dual(12, e, lam);
        let ext = trace_sequence_ext(12, e, lam);
        for k in 0..=12 {
            let direct = trace_derivative(k, e, lam, Z).to_dual();
            assert!((dual[k].value - direct.value).abs() <= 1e-8 * direct.value.abs().max(1.0));
            assert!((dual[k].deriv - direct.deriv).abs() <= 1e-8 * direct.deriv.abs().max(1.0));
            assert!((ext[k + 1].to_f64() - direct.value).abs() <= 1e-8 * direct.value.abs().max(1.0));
        }
    }

    #[test]
    fn derivative_examples() {
        assert_eq!(trace_derivative(0, 0.5, 2.0, Z).dx.to_f64(), 1.0);
        assert_eq!(trace_derivative(1, 0.0, 2.0, Z).dx.to_f64(), -2.0);
    }

    #[test]
    fn cumulative_norm_examples() {
        let unit = 3.0 + 2.0 * 2f64.sqrt();
        assert!((cumulative_norm(1.0, 0.0, 2.0, Z).to_f64() - unit).abs() < 1e-12);
        assert!((cumulative_norm(0.5, 0.0, 2.0, Z).to_f64() - 0.5 * unit).abs() < 1e-12);
        assert!((cumulative_norm(2.0, 0.0, 2.0, Z).to_f64() - 2.0 * unit).abs() < 1e-12);
        assert_eq!(cumulative_norm(0.0, 0.0, 2.0, Z).to_f64(), 0.0);
        // M(−1) = [[0,1],[−1,0]] is orthogonal.
        assert!((cumulative_norm(-1.0, 0.0, 2.0, Z).to_f64() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn margin_examples() {
        let m = norm_trace_inequality(1, 0.0, 2.0, Z).unwrap();
        let expected = 4.0 * (2.0 * (3.0 + 2.0 * 2f64.sqrt())).powf(1.5) - 2.0;
        assert!((m.margin.to_f64() - expected).abs() < 1e-9);
        assert!((m.margin.to_f64() - 157.2).abs() < 0.1);
        assert!(norm_trace_inequality(2, 0.0, 0.0, Z).unwrap().margin.to_f64() > 0.0);
    }

    #[test]
    fn parity_at_phase_zero_is_exact() {
        let grid: Vec<f64> = (0..16).map(|i| -3.0 + i as f64).collect();
        let p = phase_trace_parity(Z, 10.0, &grid, 10).unwrap();
        assert!(p.right.even_ok && p.right.odd_ok);
        assert!(p.right_max_dev.iter().all(|&d| d == 0.0));
        assert!(phase_trace_parity(Z, 10.0, &[], 5).is_err());
    }

    #[test]
    fn overflowing_products_stay_finite() {
        let x = trace_x(25, -3.0, 10.0, Z);
        assert!(x.is_finite());
        assert!(x.log10_abs() > 1000.0);
        let d = transfer_product(100_000, -3.0, 10.0, PhasePoint::from_ratio(1, 3).unwrap()).unwrap();
        let rel = ((d.det() - ExtReal::ONE).abs() / d.spectral_norm_sq()).to_f64();
        assert!(rel < 1e-10);
    }

    #[test]
    fn coupling_validation() {
        assert!(Coupling::new(-1.0).is_err());
        assert!(Coupling::new(f64::NAN).is_err());
        assert!(Coupling::new(10.0).unwrap().in_theorem_regime());
        assert!(!Coupling::new(8.0).unwrap().in_theorem_regime());
    }
}
