//! Trace-condition bands `σ_k = {E : |x_k(E, λ, 0)| ≤ 2}` and growth of
//! `∂x_k/∂E` on them.
//!
//! Bands of level `k` are the spectrum of the `F_k`-periodic operator. Two
//! constructions are used, each followed by a check that every point of a
//! `16·F_k` grid (and its doubling) with `|x_k| < 2` lies in a reported band.
//!
//! * For `λ > 4` the levels nest: every band of `σ_{k+1}` lies inside a band
//!   of `σ_k` or of `σ_{k−1}`, and splitting those parents at the `σ_k`
//!   bands leaves cells holding at most one child each. Bands shrink like
//!   `λ^{-k/2}` and drop below `f64` resolution near `k ≈ 18` at `λ = 40`, so
//!   this path runs in double-double arithmetic.
//! * Otherwise the Dirichlet eigenvalues of one period, which lie one per
//!   closed gap, bracket the bands individually; each bracket holds one zero
//!   of `x_k` with a band edge on either side, found by bisection.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use twofloat::TwoFloat;

use crate::ext::ExtReal;
use crate::phase::PhasePoint;
use crate::transfer::{cumulative_norms, trace_sequence_ext};
use crate::tridiag::{SymTridiagonal, TridiagError};
use crate::words::{fib_len, fib_word};

/// Highest level accepted by [`bands`].
pub const MAX_BAND_LEVEL: usize = 25;

/// Edges are refined until the bracketing interval is at most this wide.
pub const EDGE_TOL: f64 = 1e-12;

/// Bands closer than this are merged.
pub const MERGE_TOL: f64 = 1e-10;

/// Gaps narrower than this whose midpoint has `|x_k| ≤ 2 +
/// CLOSED_GAP_EXCESS` are treated as closed.
const CLOSED_GAP_WIDTH: f64 = 1e-6;
const CLOSED_GAP_EXCESS: f64 = 1e-7;

/// Grid points per period used for validation.
pub const GRID_DENSITY: usize = 16;

/// Couplings above this use the nested double-double construction.
pub const HIERARCHY_MIN_COUPLING: f64 = 4.0;

/// Relative width at which double-double bisection stops.
const FINE_REL_TOL: f64 = 1e-29;

/// Interior probes per cell when the two-point scan misses a band.
const CELL_PROBES: usize = 16;

/// Margin added to `[−2, λ+2]` when searching.
const SEARCH_MARGIN: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("level {k} exceeds the supported maximum {max}")]
    LevelTooLarge { k: usize, max: usize },
    #[error("coupling {0} must be finite and nonnegative")]
    InvalidCoupling(f64),
    #[error(transparent)]
    Eigen(#[from] TridiagError),
    #[error("trace has equal signs {0:e}, {1:e} at consecutive separators; bands not isolated")]
    Unseparated(f64, f64),
    #[error("grid of {points} points finds σ_{k} at E={energy} outside every computed band")]
    GridTooCoarse { k: usize, points: usize, energy: f64 },
    #[error("growth fit rejected: {0}")]
    FitRejected(String),
    #[error("level {level}: found {found} bands, expected {expected}")]
    BandCount { level: usize, found: usize, expected: usize },
    #[error("level {0}: a band straddles a parent band edge")]
    BrokenNesting(usize),
    #[error("empty level range {0}..={1}")]
    EmptyRange(usize, usize),
}

/// A closed interval of `σ_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub k: usize,
    pub lambda: f64,
    pub lo: f64,
    pub hi: f64,
    /// A zero of `x_k` inside the band; the lowest one when bands across
    /// closed gaps were merged.
    pub center: f64,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, e: f64, tol: f64) -> bool {
        e >= self.lo - tol && e <= self.hi + tol
    }
}

/// `x_k(E, λ, 0)` via the trace map; `O(k)` work.
pub fn level_trace(k: usize, energy: f64, lambda: f64) -> ExtReal {
    trace_sequence_ext(k, energy, lambda)[k + 1]
}

fn check_inputs(k: usize, lambda: f64) -> Result<(), SpectrumError> {
    if k > MAX_BAND_LEVEL {
        return Err(SpectrumError::LevelTooLarge { k, max: MAX_BAND_LEVEL });
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(SpectrumError::InvalidCoupling(lambda));
    }
    Ok(())
}

/// Eigenvalues of the operator on sites `1..F_k − 1` with zero boundary
/// values, i.e. the zeros of `M(F_k)_{21}` in `E`.
pub fn dirichlet_eigenvalues(k: usize, lambda: f64) -> Result<Vec<f64>, SpectrumError> {
    check_inputs(k, lambda)?;
    let word = fib_word(k).expect("level checked");
    let p = word.len();
    if p < 2 {
        return Ok(Vec::new());
    }
    let diag: Vec<f64> = (0..p - 1).map(|i| if word.get(i).is_one() { lambda } else { 0.0 }).collect();
    let t = SymTridiagonal::new(diag, vec![1.0; p - 2])?;
    Ok(t.eigenvalues()?)
}

/// Bisection between a point where `inside` holds and one treated as
/// outside. The outer point is never evaluated: a separator sitting on a
/// band edge may round to either side, and treating it as outside makes the
/// search converge to the near edge in both cases.
fn bisect(inside: impl Fn(f64) -> bool, mut inner: f64, mut outer: f64) -> f64 {
    while (outer - inner).abs() > EDGE_TOL {
        let m = 0.5 * (inner + outer);
        if m == inner || m == outer {
            break;
        }
        if inside(m) {
            inner = m;
        } else {
            outer = m;
        }
    }
    0.5 * (inner + outer)
}

/// Bands of `σ_k`, merged where they touch, sorted by energy.
pub fn bands(k: usize, lambda: f64) -> Result<Vec<Band>, SpectrumError> {
    check_inputs(k, lambda)?;
    let merged = if lambda > HIERARCHY_MIN_COUPLING {
        let levels = nested_bands(k, lambda)?;
        levels[k + 1].iter().map(|b| b.to_band(k, lambda)).collect()
    } else {
        merge_closed_gaps(k, lambda, separated_bands(k, lambda)?)
    };
    validate_against_grid(k, lambda, &merged, GRID_DENSITY)?;
    validate_against_grid(k, lambda, &merged, 2 * GRID_DENSITY)?;
    Ok(merged)
}

fn separated_bands(k: usize, lambda: f64) -> Result<Vec<Band>, SpectrumError> {
    let mut seps = vec![-2.0 - SEARCH_MARGIN];
    seps.extend(dirichlet_eigenvalues(k, lambda)?);
    seps.push(lambda + 2.0 + SEARCH_MARGIN);
    let x = |e: f64| level_trace(k, e, lambda);
    let mut out = Vec::with_capacity(seps.len() - 1);
    for w in seps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (xa, xb) = (x(a), x(b));
        let (sa, sb) = (xa.signum(), xb.signum());
        if sa * sb >= 0.0 {
            return Err(SpectrumError::Unseparated(xa.to_f64(), xb.to_f64()));
        }
        let center = bisect(|e| x(e).signum() == sb, b, a);
        let lo = bisect(|e| (x(e) * sa).to_f64() < 2.0, center, a);
        let hi = bisect(|e| (x(e) * sb).to_f64() < 2.0, center, b);
        out.push(Band { k, lambda, lo, hi, center });
    }
    Ok(out)
}

/// A band with double-double endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FineBand {
    pub lo: TwoFloat,
    pub hi: TwoFloat,
    pub center: TwoFloat,
}

impl FineBand {
    fn to_band(self, k: usize, lambda: f64) -> Band {
        Band { k, lambda, lo: self.lo.hi(), hi: self.hi.hi(), center: self.center.hi() }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).hi()
    }
}

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

/// `x_{−1}, …, x_{k_max}` in double-double, from the closed-form seeds.
pub fn trace_orbit_fine(k_max: usize, energy: TwoFloat, lambda: f64) -> Vec<TwoFloat> {
    let x0 = energy - lambda;
    let mut xs = vec![energy, x0, energy * x0 - 2.0];
    while xs.len() < k_max + 2 {
        let n = xs.len();
        xs.push(xs[n - 1] * xs[n - 2] - xs[n - 3]);
    }
    xs.truncate(k_max + 2);
    xs
}

/// `(x_k, ∂x_k/∂E)` for `k = −1..=k_max` in double-double.
pub fn trace_orbit_fine_dual(k_max: usize, energy: TwoFloat, lambda: f64) -> Vec<(TwoFloat, TwoFloat)> {
    let one = dd(1.0);
    let x0 = energy - lambda;
    let mut xs = vec![(energy, one), (x0, one), (energy * x0 - 2.0, energy * 2.0 - lambda)];
    while xs.len() < k_max + 2 {
        let n = xs.len();
        let (a, da) = xs[n - 1];
        let (b, db) = xs[n - 2];
        let (c, dc) = xs[n - 3];
        xs.push((a * b - c, da * b + a * db - dc));
    }
    xs.truncate(k_max + 2);
    xs
}

fn fine_trace(level: usize, energy: TwoFloat, lambda: f64) -> TwoFloat {
    trace_orbit_fine(level, energy, lambda)[level + 1]
}

fn fine_bisect(inside: impl Fn(TwoFloat) -> bool, mut inner: TwoFloat, mut outer: TwoFloat) -> TwoFloat {
    let tol = FINE_REL_TOL * (1.0 + inner.hi().abs());
    while (outer - inner).abs() > tol {
        let m = (inner + outer) * 0.5;
        if m == inner || m == outer {
            break;
        }
        if inside(m) {
            inner = m;
        } else {
            outer = m;
        }
    }
    (inner + outer) * 0.5
}

/// Bands of level `level` (index `level + 1`, with `level = −1` first) inside
/// cells `[a, b]`, each probed at `probes` interior points.
fn bands_in_cells(level: usize, lambda: f64, cells: &[(TwoFloat, TwoFloat)], probes: usize) -> Vec<FineBand> {
    let x = |e: TwoFloat| fine_trace(level, e, lambda);
    let mut out = Vec::new();
    for &(a, b) in cells {
        let pts: Vec<TwoFloat> = (0..=probes + 1).map(|i| a + (b - a) * (i as f64 / (probes + 1) as f64)).collect();
        let vals: Vec<TwoFloat> = pts.iter().map(|&t| x(t)).collect();
        for i in 0..pts.len() - 1 {
            let (s0, s1) = (vals[i].hi().signum(), vals[i + 1].hi().signum());
            if s0 == s1 {
                continue;
            }
            let center = fine_bisect(|e| x(e).hi().signum() == s1, pts[i + 1], pts[i]);
            // Nearest probes outside the band bound the edge searches.
            let left = (0..=i).rev().find(|&j| vals[j].abs() >= 2.0).map_or(a, |j| pts[j]);
            let right = (i + 1..pts.len()).find(|&j| vals[j].abs() >= 2.0).map_or(b, |j| pts[j]);
            let lo = fine_bisect(|e| x(e).abs() < 2.0, center, left);
            let hi = fine_bisect(|e| x(e).abs() < 2.0, center, right);
            out.push(FineBand { lo, hi, center });
        }
    }
    out.sort_by(|p, q| p.lo.partial_cmp(&q.lo).expect("finite"));
    out
}

/// Bands of `σ_{−1}, σ_0, …, σ_{k_max}` for `λ > 4`, built level by level
/// from the nesting of consecutive levels.
pub fn nested_bands(k_max: usize, lambda: f64) -> Result<Vec<Vec<FineBand>>, SpectrumError> {
    check_inputs(k_max, lambda)?;
    let single = |c: f64| vec![FineBand { lo: dd(c - 2.0), hi: dd(c + 2.0), center: dd(c) }];
    let mut levels = vec![single(0.0), single(lambda)];
    for level in 1..=k_max {
        let (older, newer) = (&levels[level - 1], &levels[level]);
        let mut cells: Vec<(TwoFloat, TwoFloat)> = newer.iter().map(|q| (q.lo, q.hi)).collect();
        let mut j = 0;
        for parent in older {
            let mut start = parent.lo;
            while j < newer.len() && newer[j].hi <= parent.lo {
                j += 1;
            }
            while j < newer.len() && newer[j].lo < parent.hi {
                if newer[j].lo < parent.lo || newer[j].hi > parent.hi {
                    return Err(SpectrumError::BrokenNesting(level));
                }
                cells.push((start, newer[j].lo));
                start = newer[j].hi;
                j += 1;
            }
            cells.push((start, parent.hi));
        }
        let expected = fib_len(level as i64);
        let mut found = bands_in_cells(level, lambda, &cells, 0);
        if found.len() != expected {
            found = bands_in_cells(level, lambda, &cells, CELL_PROBES);
        }
        if found.len() != expected {
            return Err(SpectrumError::BandCount { level, found: found.len(), expected });
        }
        levels.push(found);
    }
    Ok(levels)
}

/// Joins neighbours separated by a closed gap. At a closed gap `|x_k| − 2`
/// has a double zero, so bisection on either side stops up to
/// `√ε`-distance short of the touching point; such a sliver is recognised by
/// `|x_k|` barely exceeding 2 at its midpoint.
fn merge_closed_gaps(k: usize, lambda: f64, bands: Vec<Band>) -> Vec<Band> {
    let mut out: Vec<Band> = Vec::with_capacity(bands.len());
    for b in bands {
        match out.last_mut() {
            Some(last)
                if b.lo - last.hi <= CLOSED_GAP_WIDTH
                    && level_trace(k, 0.5 * (b.lo + last.hi), lambda).abs().to_f64() <= 2.0 + CLOSED_GAP_EXCESS =>
            {
                last.hi = b.hi;
            }
            _ => out.push(b),
        }
    }
    out
}

fn merge(bands: Vec<Band>) -> Vec<Band> {
    let mut out: Vec<Band> = Vec::with_capacity(bands.len());
    for b in bands {
        match out.last_mut() {
            Some(last) if b.lo - last.hi <= MERGE_TOL => {
                last.hi = last.hi.max(b.hi);
            }
            _ => out.push(b),
        }
    }
    out
}

/// Every grid point where `|x_k| < 2` must lie inside a reported band.
fn validate_against_grid(k: usize, lambda: f64, bands: &[Band], density: usize) -> Result<(), SpectrumError> {
    let points = density * fib_len(k as i64);
    let (lo, hi) = (-2.0 - SEARCH_MARGIN, lambda + 2.0 + SEARCH_MARGIN);
    let step = (hi - lo) / points as f64;
    let mut cursor = 0;
    for i in 0..=points {
        let e = lo + step * i as f64;
        if level_trace(k, e, lambda).abs().to_f64() >= 2.0 - 1e-9 {
            continue;
        }
        while cursor < bands.len() && bands[cursor].hi + MERGE_TOL < e {
            cursor += 1;
        }
        if cursor == bands.len() || !bands[cursor].contains(e, MERGE_TOL) {
            return Err(SpectrumError::GridTooCoarse { k, points, energy: e });
        }
    }
    Ok(())
}

/// `σ_K ∪ σ_{K+1}`, merged where overlapping: a computable outer proxy for
/// the limiting spectrum, not the spectrum itself.
pub fn spectrum_cover(level: usize, lambda: f64) -> Result<Vec<Band>, SpectrumError> {
    let mut all = bands(level, lambda)?;
    all.extend(bands(level + 1, lambda)?);
    all.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
    Ok(merge(all))
}

/// Band centers of levels `K` and `K+1`, sorted; the sampling set for
/// derivative and norm scans.
pub fn cover_sample_energies(level: usize, lambda: f64) -> Result<Vec<f64>, SpectrumError> {
    Ok(cover_samples_fine(level, lambda)?.iter().map(|e| e.hi()).collect())
}

/// [`cover_sample_energies`] at double-double precision.
pub fn cover_samples_fine(level: usize, lambda: f64) -> Result<Vec<TwoFloat>, SpectrumError> {
    check_inputs(level + 1, lambda)?;
    let mut out: Vec<TwoFloat> = if lambda > HIERARCHY_MIN_COUPLING {
        let levels = nested_bands(level + 1, lambda)?;
        levels[level + 1].iter().chain(&levels[level + 2]).map(|b| b.center).collect()
    } else {
        let mut v: Vec<TwoFloat> = bands(level, lambda)?.iter().map(|b| dd(b.center)).collect();
        v.extend(bands(level + 1, lambda)?.iter().map(|b| dd(b.center)));
        v
    };
    out.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(out)
}

/// Total length of a set of disjoint intervals.
pub fn measure(bands: &[Band]) -> f64 {
    bands.iter().map(Band::width).sum()
}

/// One row of `growth.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    pub k: usize,
    pub min_abs_dx: f64,
    /// Samples that fell inside `σ_k`.
    pub samples: usize,
}

/// Exponential fit `m_k ≈ A·ξ^{k/2}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub lambda: f64,
    pub k_range: (usize, usize),
    pub xi_hat: f64,
    pub zeta_hat: f64,
    /// Root-mean-square residual of the fit in `log m_k`.
    pub residual: f64,
    pub points: Vec<GrowthPoint>,
    /// Levels at which `m_k` failed to increase.
    pub non_monotone: Vec<usize>,
}

/// `log(ω^{-2})`.
pub fn log_inverse_omega_sq() -> f64 {
    let omega = (5f64.sqrt() - 1.0) / 2.0;
    -2.0 * omega.ln()
}

/// Least-squares line through `(t, y)`: `(slope, intercept, rms residual)`.
pub fn fit_line(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
    let sty: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let rss: f64 = t.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Minimum `|∂x_k/∂E|` over cover samples in `σ_k` for each level in
/// `k_min..=k_max` with the given parity, then `log m_k = (k/2) log ξ + c`.
pub fn derivative_growth_scan_parity(
    lambda: f64,
    k_min: usize,
    k_max: usize,
    even: bool,
) -> Result<GrowthFit, SpectrumError> {
    if lambda == 0.0 {
        return Err(SpectrumError::FitRejected("λ = 0: derivatives stay bounded on the free band".into()));
    }
    let levels: Vec<usize> = (k_min..=k_max).filter(|k| (k % 2 == 0) == even).collect();
    if levels.len() < 2 {
        return Err(SpectrumError::EmptyRange(k_min, k_max));
    }
    let samples = cover_samples_fine(k_max, lambda)?;
    let mut mins = vec![f64::INFINITY; k_max + 1];
    let mut counts = vec![0usize; k_max + 1];
    for &e in &samples {
        let orbit = trace_orbit_fine_dual(k_max, e, lambda);
        for &k in &levels {
            let (x, dx) = orbit[k + 1];
            if x.abs() <= 2.0 {
                mins[k] = mins[k].min(dx.abs().hi());
                counts[k] += 1;
            }
        }
    }
    let points: Vec<GrowthPoint> =
        levels.iter().map(|&k| GrowthPoint { k, min_abs_dx: mins[k], samples: counts[k] }).collect();
    if let Some(p) = points.iter().find(|p| p.samples == 0 || !(p.min_abs_dx > 0.0)) {
        return Err(SpectrumError::FitRejected(format!("no usable samples at level {}", p.k)));
    }
    let non_monotone = points.windows(2).filter(|w| w[1].min_abs_dx <= w[0].min_abs_dx).map(|w| w[1].k).collect();
    let t: Vec<f64> = points.iter().map(|p| p.k as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.min_abs_dx.ln()).collect();
    let (slope, _, residual) = fit_line(&t, &y);
    if slope <= 0.0 {
        return Err(SpectrumError::FitRejected(format!("no growth: slope {slope:e}")));
    }
    let xi_hat = (2.0 * slope).exp();
    Ok(GrowthFit {
        lambda,
        k_range: (k_min, k_max),
        xi_hat,
        zeta_hat: xi_hat.ln() / (3.0 * log_inverse_omega_sq()),
        residual,
        points,
        non_monotone,
    })
}

/// Even-level growth fit.
pub fn derivative_growth_scan(lambda: f64, k_min: usize, k_max: usize) -> Result<GrowthFit, SpectrumError> {
    derivative_growth_scan_parity(lambda, k_min, k_max, true)
}

/// One row of a norm-growth table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormGrowthRow {
    pub l: f64,
    pub right: f64,
    pub left: f64,
    /// `C_fit · L^ζ`.
    pub bound: f64,
}

/// `‖M‖²_L` against `C·L^ζ` on both half-lines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormGrowthTable {
    pub lambda: f64,
    pub theta: String,
    pub energy: f64,
    pub zeta: f64,
    pub c_fit_right: f64,
    pub c_fit_left: f64,
    /// Single constant valid on both half-lines.
    pub c_fit: f64,
    pub rows: Vec<NormGrowthRow>,
}

/// The largest `C` with `‖M‖²_L ≥ C·L^ζ` on every listed window.
pub fn norm_growth_check(lambda: f64, theta: PhasePoint, energy: f64, l_grid: &[f64], zeta: f64) -> NormGrowthTable {
    let neg: Vec<f64> = l_grid.iter().map(|l| -l).collect();
    let right = cumulative_norms(l_grid, energy, lambda, theta);
    let left = cumulative_norms(&neg, energy, lambda, theta);
    let ratio = |v: &ExtReal, l: f64| (*v / ExtReal::from_f64(l.powf(zeta))).to_f64();
    let c_fit_right = l_grid.iter().zip(&right).map(|(&l, v)| ratio(v, l)).fold(f64::INFINITY, f64::min);
    let c_fit_left = l_grid.iter().zip(&left).map(|(&l, v)| ratio(v, l)).fold(f64::INFINITY, f64::min);
    let c_fit = c_fit_right.min(c_fit_left);
    let rows = l_grid
        .iter()
        .zip(right.iter().zip(&left))
        .map(|(&l, (r, lf))| NormGrowthRow { l, right: r.to_f64(), left: lf.to_f64(), bound: c_fit * l.powf(zeta) })
        .collect();
    NormGrowthTable { lambda, theta: theta.to_string(), energy, zeta, c_fit_right, c_fit_left, c_fit, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::trace_sequence_dual;

    fn assert_band(b: &Band, lo: f64, hi: f64) {
        assert!((b.lo - lo).abs() < 1e-11 && (b.hi - hi).abs() < 1e-11, "{b:?} vs [{lo}, {hi}]");
    }

    #[test]
    fn level_zero_single_band() {
        let b = bands(0, 2.0).unwrap();
        assert_eq!(b.len(), 1);
        assert_band(&b[0], 0.0, 4.0);
    }

    #[test]
    fn level_one_two_bands() {
        let b = bands(1, 2.0).unwrap();
        assert_eq!(b.len(), 2);
        let r5 = 5f64.sqrt();
        assert_band(&b[0], 1.0 - r5, 0.0);
        assert_band(&b[1], 2.0, 1.0 + r5);
    }

    #[test]
    fn free_case_is_one_interval() {
        for k in [1, 4, 9] {
            let b = bands(k, 0.0).unwrap();
            assert_eq!(b.len(), 1, "k={k}: {b:?}");
            assert_band(&b[0], -2.0, 2.0);
        }
        let cover = spectrum_cover(6, 0.0).unwrap();
        assert_eq!(cover.len(), 1);
    }

    #[test]
    fn one_band_per_period_site_at_strong_coupling() {
        for k in 2..10 {
            let b = bands(k, 10.0).unwrap();
            assert_eq!(b.len(), fib_len(k as i64), "k={k}: {b:?}");
            for band in &b {
                assert!(band.lo < band.center && band.center < band.hi);
                let slope = trace_sequence_dual(k, band.center, 10.0)[k].deriv.abs();
                assert!(level_trace(k, band.center, 10.0).abs().to_f64() <= 1e-11 * slope + 1e-9);
            }
        }
    }

    #[test]
    fn nested_and_dirichlet_constructions_agree() {
        for k in [3, 7, 11] {
            let nested = nested_bands(k, 6.0).unwrap();
            let direct = merge_closed_gaps(k, 6.0, separated_bands(k, 6.0).unwrap());
            assert_eq!(nested[k + 1].len(), direct.len());
            for (a, b) in nested[k + 1].iter().zip(&direct) {
                assert!((a.lo.hi() - b.lo).abs() < 1e-9 && (a.hi.hi() - b.hi).abs() < 1e-9, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn cover_measure_decreases() {
        let m: Vec<f64> = (4..9).map(|k| measure(&spectrum_cover(k, 10.0).unwrap())).collect();
        assert!(m.windows(2).all(|w| w[1] < w[0]), "{m:?}");
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = t.iter().map(|v| 0.5 * v - 1.0).collect();
        let (s, c, r) = fit_line(&t, &y);
        assert!((s - 0.5).abs() < 1e-14 && (c + 1.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn free_growth_fit_rejected() {
        assert!(matches!(derivative_growth_scan(0.0, 2, 10), Err(SpectrumError::FitRejected(_))));
    }

    #[test]
    fn inputs_validated() {
        assert!(bands(26, 1.0).is_err());
        assert!(bands(3, -1.0).is_err());
    }
}
