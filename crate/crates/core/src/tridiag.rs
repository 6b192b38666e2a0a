//! Real symmetric tridiagonal eigenproblems.
//!
//! Eigenvalues by implicit QL with Wilkinson shifts (`O(n²)`), Sturm counts
//! for bracketing, and eigenvectors by inverse iteration with a pivoted
//! tridiagonal LU. Nearly degenerate eigenvalues are grouped into clusters
//! whose vectors are explicitly reorthogonalized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Consecutive eigenvalues closer than this, relative to the matrix scale,
/// share a cluster.
pub const CLUSTER_REL_GAP: f64 = 1e-5;

const MAX_QL_ITERATIONS: usize = 60;
const MAX_INVERSE_ITERATIONS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TridiagError {
    #[error("matrix is empty")]
    Empty,
    #[error("off-diagonal has length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("QL iteration did not converge for eigenvalue {0}")]
    NoConvergence(usize),
    #[error("inverse iteration for eigenvalue {index} left residual {residual:e}")]
    PoorEigenvector { index: usize, residual: f64 },
}

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`
/// (`off[i]` couples rows `i` and `i+1`).
#[derive(Clone, Debug, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self, TridiagError> {
        if diag.is_empty() {
            return Err(TridiagError::Empty);
        }
        if off.len() + 1 != diag.len() {
            return Err(TridiagError::ShapeMismatch { expected: diag.len() - 1, got: off.len() });
        }
        Ok(SymTridiagonal { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    /// Gershgorin interval containing every eigenvalue.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
            let right = if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - left - right);
            hi = hi.max(self.diag[i] + left + right);
        }
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn sturm_count(&self, x: f64) -> usize {
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + x.abs());
        let mut count = 0;
        let mut q = self.diag[0] - x;
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
        for i in 1..self.len() {
            let e = self.off[i - 1];
            q = self.diag[i] - x - e * e / q;
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `(T y)_i`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * y[i];
                if i > 0 {
                    s += self.off[i - 1] * y[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * y[i + 1];
                }
                s
            })
            .collect()
    }

    /// All eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>, TridiagError> {
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        ql_implicit(&mut d, &mut e)?;
        d.sort_by(|a, b| a.total_cmp(b));
        Ok(d)
    }

    /// Eigenvalues and orthonormal eigenvectors.
    pub fn eigensystem(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>), TridiagError> {
        let values = self.eigenvalues()?;
        let vectors = self.eigenvectors(&values)?;
        Ok((values, vectors))
    }

    /// Eigenvectors for sorted eigenvalues, by inverse iteration.
    pub fn eigenvectors(&self, values: &[f64]) -> Result<Vec<Vec<f64>>, TridiagError> {
        let n = self.len();
        let scale = self.norm_bound().max(f64::MIN_POSITIVE);
        let cluster_gap = CLUSTER_REL_GAP * scale;
        let separation = 10.0 * f64::EPSILON * scale;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_7d1a);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        let mut cluster_start = 0;
        let mut prev_shift = f64::NEG_INFINITY;
        for (j, &lambda) in values.iter().enumerate() {
            if j > 0 && lambda - values[j - 1] > cluster_gap {
                cluster_start = j;
            }
            // Separate coincident shifts so each solve targets a different vector.
            let shift = if j > cluster_start && lambda - prev_shift < separation { prev_shift + separation } else { lambda };
            prev_shift = shift;
            let lu = TridiagLu::factor(self, shift, scale);
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut x);
            let mut residual = f64::INFINITY;
            let mut converged = 0;
            for _ in 0..MAX_INVERSE_ITERATIONS {
                lu.solve(&mut x);
                for v in &vectors[cluster_start..j] {
                    let c = dot(v, &x);
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi -= c * vi;
                    }
                }
                normalize(&mut x);
                residual = residual_norm(self, &x, lambda);
                // One further solve after convergence sharpens orthogonality.
                if residual <= 1e-12 * scale {
                    converged += 1;
                    if converged == 2 {
                        break;
                    }
                }
            }
            if residual > 1e-9 * scale {
                return Err(TridiagError::PoorEigenvector { index: j, residual });
            }
            fix_sign(&mut x);
            vectors.push(x);
        }
        Ok(vectors)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let norm = dot(x, x).sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
}

/// Largest-magnitude entry made positive (first one on ties).
fn fix_sign(x: &mut [f64]) {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if v.abs() > x[best].abs() {
            best = i;
        }
    }
    if x[best] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

fn residual_norm(t: &SymTridiagonal, x: &[f64], lambda: f64) -> f64 {
    t.apply(x).iter().zip(x).map(|(tx, xi)| (tx - lambda * xi).powi(2)).sum::<f64>().sqrt()
}

/// Implicit QL on `(d, e)` with `e[i]` coupling `i, i+1` and `e[n-1] = 0`;
/// eigenvalues are left in `d`, unsorted.
fn ql_implicit(d: &mut [f64], e: &mut [f64]) -> Result<(), TridiagError> {
    let n = d.len();
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > MAX_QL_ITERATIONS {
                return Err(TridiagError::NoConvergence(l));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `P(T − σI) = LU` with partial pivoting; `U` has two superdiagonals.
struct TridiagLu {
    lower: Vec<f64>,
    diag: Vec<f64>,
    up1: Vec<f64>,
    up2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(t: &SymTridiagonal, shift: f64, scale: f64) -> Self {
        let n = t.len();
        let mut lower = t.off.clone();
        let mut diag: Vec<f64> = t.diag.iter().map(|d| d - shift).collect();
        let mut up1 = t.off.clone();
        let mut up2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if diag[i].abs() >= lower[i].abs() {
                if diag[i] != 0.0 {
                    let f = lower[i] / diag[i];
                    lower[i] = f;
                    diag[i + 1] -= f * up1[i];
                }
            } else {
                let f = diag[i] / lower[i];
                diag[i] = lower[i];
                lower[i] = f;
                let tmp = up1[i];
                up1[i] = diag[i + 1];
                diag[i + 1] = tmp - f * diag[i + 1];
                if i + 2 < n {
                    up2[i] = up1[i + 1];
                    up1[i + 1] *= -f;
                }
                swapped[i] = true;
            }
        }
        // Exactly singular pivots are nudged so the solve amplifies the null direction.
        let floor = f64::EPSILON * scale;
        for d in diag.iter_mut() {
            if d.abs() < floor {
                *d = if *d < 0.0 { -floor } else { floor };
            }
        }
        TridiagLu { lower, diag, up1, up2, swapped }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.lower[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.up1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.up2[i] * b[i + 2];
            }
            b[i] = s / self.diag[i];
        }
        // Keep magnitudes bounded across iterations.
        let m = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if m > 0.0 && m.is_finite() {
            b.iter_mut().for_each(|v| *v /= m);
        }
    }
}
