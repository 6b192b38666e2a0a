//! Wave-packet dynamics on finite boxes `[−N, N]` with Dirichlet edges.
//!
//! The packet starts at `δ_1`. Time averages use the Abel mean
//! `⟨A⟩_T = (2/T) ∫_0^∞ e^{−2t/T} A(t) dt`; for site probabilities it has the
//! closed form `Σ_{j,j'} c_j c_{j'} / (1 + ((E_j − E_{j'})T/2)²)` with
//! `c_j(n) = φ_j(n) φ_j(1)`, which is what headline numbers use. A Simpson
//! rule in the time domain is kept as an independent check.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::PhasePoint;
use crate::tridiag::{SymTridiagonal, TridiagError};
use crate::words::rotation_block;

/// Outermost sites per side whose Abel mass is monitored.
pub const EDGE_SITES: usize = 5;

/// A record is valid when its edge mass stays below this.
pub const EDGE_MASS_LIMIT: f64 = 1e-6;

/// Weight left beyond the Abel cutoff `t_max = (T/2)·ln(1/ε)`.
pub const ABEL_TAIL_EPS: f64 = 1e-8;

/// Cap on the automatically chosen half-width.
pub const MAX_AUTO_HALF_WIDTH: usize = 3000;

/// Mass floor defining the confinement exponent.
pub const DEFAULT_MASS_FLOOR: f64 = 0.5;

/// Eigen-residual tolerance relative to `λ + 2`.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("half-width must be at least 1")]
    ZeroHalfWidth,
    #[error("coupling {0} must be finite and nonnegative")]
    InvalidCoupling(f64),
    #[error("time {0} must be finite and nonnegative")]
    InvalidTime(f64),
    #[error("timescale {0} must be finite and positive")]
    InvalidTimescale(f64),
    #[error("window L={l} needs sites up to ±{needed} but the box has half-width {n}")]
    WindowTooLarge { l: f64, needed: usize, n: usize },
    #[error("site {site} lies outside [−{n}, {n}]")]
    SiteOutOfRange { site: i64, n: usize },
    #[error("eigenpair {index} has residual {residual:e}")]
    Residual { index: usize, residual: f64 },
    #[error(transparent)]
    Eigen(#[from] TridiagError),
    #[error("{0} is empty")]
    EmptyGrid(&'static str),
    #[error("exponent fit needs λ > 8, got {0}")]
    OutsideRegime(f64),
    #[error("no exponent on the grid keeps mass ≥ {floor} at T={t}")]
    NoExponent { floor: f64, t: f64 },
}

/// `H` restricted to `[−N, N]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Truncation {
    pub half_width: usize,
    pub lambda: f64,
    pub theta: PhasePoint,
    /// `λ·v_θ(n)` for `n = −N..=N`.
    pub diagonal: Vec<f64>,
}

pub fn build_truncation(half_width: usize, lambda: f64, theta: PhasePoint) -> Result<Truncation, DynamicsError> {
    if half_width == 0 {
        return Err(DynamicsError::ZeroHalfWidth);
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(DynamicsError::InvalidCoupling(lambda));
    }
    let n = half_width as i64;
    let word = rotation_block(-n, n, theta).expect("nonempty range");
    let diagonal = word.iter().map(|s| if s.is_one() { lambda } else { 0.0 }).collect();
    Ok(Truncation { half_width, lambda, theta, diagonal })
}

impl Truncation {
    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn matrix(&self) -> SymTridiagonal {
        SymTridiagonal::new(self.diagonal.clone(), vec![1.0; self.size() - 1]).expect("consistent shape")
    }

    pub fn index(&self, site: i64) -> Result<usize, DynamicsError> {
        site_index(self.half_width, site)
    }
}

fn site_index(half_width: usize, site: i64) -> Result<usize, DynamicsError> {
    let n = half_width as i64;
    if site < -n || site > n {
        return Err(DynamicsError::SiteOutOfRange { site, n: half_width });
    }
    Ok((site + n) as usize)
}

/// Sorted eigenvalues and orthonormal eigenvectors of a truncation.
#[derive(Clone, Debug)]
pub struct EigenSystem {
    pub half_width: usize,
    pub lambda: f64,
    pub eigenvalues: Vec<f64>,
    /// `vectors[j][n + N] = φ_j(n)`.
    pub vectors: Vec<Vec<f64>>,
    pub max_residual: f64,
}

impl EigenSystem {
    pub fn compute(trunc: &Truncation) -> Result<Self, DynamicsError> {
        let t = trunc.matrix();
        let (eigenvalues, vectors) = t.eigensystem()?;
        let limit = RESIDUAL_TOL * (trunc.lambda + 2.0);
        let mut max_residual = 0.0f64;
        for (j, (v, &e)) in vectors.iter().zip(&eigenvalues).enumerate() {
            let r = t.apply(v).iter().zip(v).map(|(a, b)| (a - e * b).powi(2)).sum::<f64>().sqrt();
            if r > limit {
                return Err(DynamicsError::Residual { index: j, residual: r });
            }
            max_residual = max_residual.max(r);
        }
        Ok(EigenSystem { half_width: trunc.half_width, lambda: trunc.lambda, eigenvalues, vectors, max_residual })
    }

    pub fn size(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `φ_j(site)` for all `j`.
    pub fn site_row(&self, site: i64) -> Result<Vec<f64>, DynamicsError> {
        let i = site_index(self.half_width, site)?;
        Ok(self.vectors.iter().map(|v| v[i]).collect())
    }

    /// `c_j(n) = φ_j(n) φ_j(1)`.
    fn overlaps(&self, site: i64) -> Result<Vec<f64>, DynamicsError> {
        let start = self.site_row(1)?;
        Ok(self.site_row(site)?.iter().zip(&start).map(|(a, b)| a * b).collect())
    }
}

/// `e^{−itH} δ_1` on the box.
#[derive(Clone, Debug, PartialEq)]
pub struct WavePacket {
    pub half_width: usize,
    pub time: f64,
    pub amplitudes: Vec<Complex64>,
}

impl WavePacket {
    pub fn amplitude(&self, site: i64) -> Result<Complex64, DynamicsError> {
        Ok(self.amplitudes[site_index(self.half_width, site)?])
    }

    pub fn norm_sq(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probability(&self, site: i64) -> Result<f64, DynamicsError> {
        Ok(self.amplitude(site)?.norm_sqr())
    }
}

pub fn evolve(sys: &EigenSystem, t: f64) -> Result<WavePacket, DynamicsError> {
    if !t.is_finite() || t < 0.0 {
        return Err(DynamicsError::InvalidTime(t));
    }
    let start = site_index(sys.half_width, 1)?;
    let size = sys.vectors.first().map_or(0, Vec::len);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); size];
    for (v, &e) in sys.vectors.iter().zip(&sys.eigenvalues) {
        let phase = Complex64::from_polar(v[start], -t * e);
        for (a, &x) in amplitudes.iter_mut().zip(v) {
            *a += phase * x;
        }
    }
    Ok(WavePacket { half_width: sys.half_width, time: t, amplitudes })
}

/// `Σ_{|n| ≤ ⌊L⌋} p(n) + (L − ⌊L⌋)(p(−⌊L⌋−1) + p(⌊L⌋+1))`.
pub fn window_sum(l: f64, p: impl Fn(i64) -> f64) -> f64 {
    let fl = l.floor() as i64;
    let frac = l - fl as f64;
    let mut s: f64 = (-fl..=fl).map(&p).sum();
    if frac > 0.0 {
        s += frac * (p(-fl - 1) + p(fl + 1));
    }
    s
}

/// Largest site index a window of radius `L` touches.
pub fn window_reach(l: f64) -> usize {
    let fl = l.floor();
    if l > fl {
        fl as usize + 1
    } else {
        fl as usize
    }
}

fn check_window(l: f64, half_width: usize) -> Result<(), DynamicsError> {
    if !(l >= 0.0) || !l.is_finite() || l + 1.0 > half_width as f64 {
        return Err(DynamicsError::WindowTooLarge { l, needed: l.floor() as usize + 1, n: half_width });
    }
    Ok(())
}

/// `‖ψ‖²_L`; requires `L + 1 ≤ N`.
pub fn windowed_norm(psi: &WavePacket, l: f64) -> Result<f64, DynamicsError> {
    check_window(l, psi.half_width)?;
    Ok(window_sum(l, |n| psi.probability(n).expect("inside window")))
}

/// Abel cutoff `(T/2)·ln(1/ε)`.
pub fn abel_cutoff(t_scale: f64) -> f64 {
    0.5 * t_scale * (1.0 / ABEL_TAIL_EPS).ln()
}

/// `⟨A⟩_T` by composite Simpson on `[0, t_max]` with step at most
/// `min(T/200, 0.05)`.
pub fn abel_average(a: impl Fn(f64) -> f64, t_scale: f64) -> Result<f64, DynamicsError> {
    if !(t_scale > 0.0) || !t_scale.is_finite() {
        return Err(DynamicsError::InvalidTimescale(t_scale));
    }
    let t_max = abel_cutoff(t_scale);
    let h_max = (t_scale / 200.0).min(0.05);
    let mut intervals = (t_max / h_max).ceil() as usize;
    intervals += intervals % 2;
    let h = t_max / intervals as f64;
    let rate = 2.0 / t_scale;
    let f = |t: f64| (-rate * t).exp() * a(t);
    let mut s = f(0.0) + f(t_max);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    Ok(rate * s * h / 3.0)
}

/// `1 / (1 + (ΔT/2)²)`: real part of the Abel transform of `e^{−itΔ}`.
fn abel_kernel(delta: f64, t_scale: f64) -> f64 {
    let x = 0.5 * delta * t_scale;
    1.0 / (1.0 + x * x)
}

/// `⟨|ψ_t(n)|²⟩_T` from the eigenpair double sum.
pub fn abel_closed_form(sys: &EigenSystem, site: i64, t_scale: f64) -> Result<f64, DynamicsError> {
    Ok(abel_site_masses(sys, &[site], t_scale)?[0])
}

/// Closed-form Abel masses for several sites sharing one pass over pairs.
pub fn abel_site_masses(sys: &EigenSystem, sites: &[i64], t_scale: f64) -> Result<Vec<f64>, DynamicsError> {
    if !(t_scale > 0.0) || !t_scale.is_finite() {
        return Err(DynamicsError::InvalidTimescale(t_scale));
    }
    let c: Vec<Vec<f64>> = sites.iter().map(|&s| sys.overlaps(s)).collect::<Result<_, _>>()?;
    let m = sys.size();
    let ev = &sys.eigenvalues;
    let mut acc = vec![0.0; sites.len()];
    let mut weights = vec![0.0; m];
    for j in 0..m {
        for jp in j + 1..m {
            weights[jp] = abel_kernel(ev[jp] - ev[j], t_scale);
        }
        for (a, cs) in acc.iter_mut().zip(&c) {
            let cross: f64 = cs[j + 1..].iter().zip(&weights[j + 1..]).map(|(x, w)| x * w).sum();
            *a += cs[j] * (cs[j] + 2.0 * cross);
        }
    }
    Ok(acc.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// Abel mass on the `EDGE_SITES` outermost sites of each side.
pub fn edge_mass(sys: &EigenSystem, t_scale: f64) -> Result<f64, DynamicsError> {
    let n = sys.half_width as i64;
    let k = (EDGE_SITES as i64).min(n + 1);
    let sites: Vec<i64> = (0..k).flat_map(|i| [-n + i, n - i]).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    Ok(abel_site_masses(sys, &sites, t_scale)?.iter().sum())
}

/// Half-width from the ballistic bound `⌈2·t_max⌉ + 100`, capped at
/// [`MAX_AUTO_HALF_WIDTH`]; the edge monitor polices the cap.
pub fn auto_half_width(t_scale: f64) -> usize {
    let ballistic = (2.0 * abel_cutoff(t_scale)).ceil() as usize + 100;
    ballistic.min(MAX_AUTO_HALF_WIDTH)
}

/// One cell of the bound table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbelRecord {
    pub lambda: f64,
    pub theta: String,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub mass: f64,
    pub edge_mass: f64,
    pub valid: bool,
    /// Half-width of the box that produced the record.
    pub half_width: usize,
}

/// Abel masses for a fixed box, computed site by site on demand.
pub struct AbelProfile<'a> {
    sys: &'a EigenSystem,
    t_scale: f64,
    /// `masses[r]` holds the pair `(m(−r), m(r))` for `r` already computed.
    masses: Vec<(f64, f64)>,
}

impl<'a> AbelProfile<'a> {
    pub fn new(sys: &'a EigenSystem, t_scale: f64) -> Result<Self, DynamicsError> {
        if !(t_scale > 0.0) || !t_scale.is_finite() {
            return Err(DynamicsError::InvalidTimescale(t_scale));
        }
        Ok(AbelProfile { sys, t_scale, masses: Vec::new() })
    }

    /// Makes sites up to `±radius` available, at least doubling the
    /// computed range each time so repeated growth stays cheap.
    fn ensure(&mut self, radius: usize) -> Result<(), DynamicsError> {
        if radius < self.masses.len() {
            return Ok(());
        }
        let target = radius.max(2 * self.masses.len()).min(self.sys.half_width);
        if radius > target {
            return Err(DynamicsError::SiteOutOfRange { site: radius as i64, n: self.sys.half_width });
        }
        let from = self.masses.len();
        let sites: Vec<i64> = (from..=target).flat_map(|r| [-(r as i64), r as i64]).collect();
        let m = abel_site_masses(self.sys, &sites, self.t_scale)?;
        for pair in m.chunks(2) {
            self.masses.push((pair[0], pair[1]));
        }
        Ok(())
    }

    /// `⟨‖ψ_t‖²_L⟩_T`.
    pub fn window_mass(&mut self, l: f64) -> Result<f64, DynamicsError> {
        check_window(l, self.sys.half_width)?;
        self.ensure(window_reach(l))?;
        let masses = &self.masses;
        Ok(window_sum(l, |n| {
            let (neg, pos) = masses[n.unsigned_abs() as usize];
            if n < 0 {
                neg
            } else {
                pos
            }
        }))
    }
}

/// Constants and grids for one bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lambda: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    pub p_used: f64,
    #[serde(rename = "G_emp")]
    pub g_emp: f64,
    pub theta_list: Vec<String>,
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<f64>,
    pub table: Vec<AbelRecord>,
    pub all_valid: bool,
    /// `max/min` of mass across phases at each `T`.
    pub theta_spread: Vec<f64>,
}

/// Options shared by the dynamics drivers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxPolicy {
    /// Fixed half-width; `None` applies [`auto_half_width`] to the largest `T`.
    pub half_width: Option<usize>,
    /// Retry once with a doubled box when an edge mass is too large.
    pub retry: bool,
}

impl Default for BoxPolicy {
    fn default() -> Self {
        BoxPolicy { half_width: None, retry: true }
    }
}

fn check_grid(t_grid: &[f64]) -> Result<(), DynamicsError> {
    if t_grid.is_empty() {
        return Err(DynamicsError::EmptyGrid("T grid"));
    }
    if let Some(&t) = t_grid.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(DynamicsError::InvalidTimescale(t));
    }
    Ok(())
}

fn phase_records(
    lambda: f64,
    theta: PhasePoint,
    t_grid: &[f64],
    windows: &[f64],
    half_width: usize,
) -> Result<Vec<AbelRecord>, DynamicsError> {
    let trunc = build_truncation(half_width, lambda, theta)?;
    let sys = EigenSystem::compute(&trunc)?;
    t_grid
        .iter()
        .zip(windows)
        .map(|(&t, &l)| {
            let mass = AbelProfile::new(&sys, t)?.window_mass(l)?;
            let edge = edge_mass(&sys, t)?;
            Ok(AbelRecord {
                lambda,
                theta: theta.to_string(),
                t,
                l,
                mass,
                edge_mass: edge,
                valid: edge < EDGE_MASS_LIMIT,
                half_width,
            })
        })
        .collect()
}

/// Abel-averaged mass in the window `L = C1·T^p` for every phase and
/// timescale. Phases run in parallel; the table keeps input order.
pub fn dynamical_bound_check(
    lambda: f64,
    theta_list: &[PhasePoint],
    t_grid: &[f64],
    c1: f64,
    p_used: f64,
    policy: BoxPolicy,
) -> Result<BoundReport, DynamicsError> {
    check_grid(t_grid)?;
    if theta_list.is_empty() {
        return Err(DynamicsError::EmptyGrid("phase list"));
    }
    let windows: Vec<f64> = t_grid.iter().map(|t| c1 * t.powf(p_used)).collect();
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let base = policy.half_width.unwrap_or_else(|| auto_half_width(t_max));
    let per_phase: Vec<Vec<AbelRecord>> = theta_list
        .par_iter()
        .map(|&theta| {
            let first = phase_records(lambda, theta, t_grid, &windows, base)?;
            if policy.retry && first.iter().any(|r| !r.valid) {
                phase_records(lambda, theta, t_grid, &windows, 2 * base)
            } else {
                Ok(first)
            }
        })
        .collect::<Result<_, _>>()?;
    let table: Vec<AbelRecord> = per_phase.into_iter().flatten().collect();
    let g_emp = table.iter().map(|r| r.mass).fold(f64::INFINITY, f64::min);
    let theta_spread = (0..t_grid.len())
        .map(|i| {
            let masses = table.iter().skip(i).step_by(t_grid.len()).map(|r| r.mass);
            let (lo, hi) = masses.fold((f64::INFINITY, 0.0f64), |(lo, hi), m| (lo.min(m), hi.max(m)));
            hi / lo
        })
        .collect();
    Ok(BoundReport {
        lambda,
        c1,
        p_used,
        g_emp,
        theta_list: theta_list.iter().map(|t| t.to_string()).collect(),
        t_grid: t_grid.to_vec(),
        all_valid: table.iter().all(|r| r.valid),
        table,
        theta_spread,
    })
}

/// The default exponent grid `0.05, 0.10, …, 1.00`.
pub fn exponent_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 * 0.05).collect()
}

/// One row of the exponent trend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub lambda: f64,
    pub p_fit: f64,
    /// `p_fit · ln λ`.
    pub p_log_lambda: f64,
    /// Smallest grid exponent meeting the floor at each `T`.
    pub per_t: Vec<f64>,
    pub half_width: usize,
    pub max_edge_mass: f64,
}

/// Smallest grid exponent `p` with `⟨‖ψ‖²_{T^p}⟩_T ≥ floor` for every `T`.
pub fn confinement_exponent(
    lambda: f64,
    theta: PhasePoint,
    t_grid: &[f64],
    floor: f64,
    half_width: Option<usize>,
) -> Result<ExponentFit, DynamicsError> {
    check_grid(t_grid)?;
    if let Some(&t) = t_grid.iter().find(|t| **t <= 1.0) {
        return Err(DynamicsError::InvalidTimescale(t));
    }
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let n = half_width.unwrap_or_else(|| auto_half_width(t_max));
    let sys = EigenSystem::compute(&build_truncation(n, lambda, theta)?)?;
    let grid = exponent_grid();
    let mut per_t = Vec::with_capacity(t_grid.len());
    let mut max_edge = 0.0f64;
    for &t in t_grid {
        let mut profile = AbelProfile::new(&sys, t)?;
        let mut found = None;
        for &p in &grid {
            if profile.window_mass(t.powf(p))? >= floor {
                found = Some(p);
                break;
            }
        }
        per_t.push(found.ok_or(DynamicsError::NoExponent { floor, t })?);
        max_edge = max_edge.max(edge_mass(&sys, t)?);
    }
    let p_fit = per_t.iter().copied().fold(0.0, f64::max);
    Ok(ExponentFit { lambda, p_fit, p_log_lambda: p_fit * lambda.ln(), per_t, half_width: n, max_edge_mass: max_edge })
}

/// [`confinement_exponent`] across couplings, each required to exceed 8.
pub fn exponent_trend(
    lambdas: &[f64],
    theta: PhasePoint,
    t_grid: &[f64],
    floor: f64,
    half_width: Option<usize>,
) -> Result<Vec<ExponentFit>, DynamicsError> {
    if let Some(&l) = lambdas.iter().find(|l| !(**l > 8.0)) {
        return Err(DynamicsError::OutsideRegime(l));
    }
    lambdas.par_iter().map(|&l| confinement_exponent(l, theta, t_grid, floor, half_width)).collect()
}
