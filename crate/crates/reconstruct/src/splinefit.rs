//! Cubic B-spline evaluation and penalized least-squares fitting with
//! variable knots.
//!
//! The smoothing criterion bounds the weighted residual
//! `delta = sum_r (w_r y_r - sum_i p_i w_r B_i(x_r))^2` by
//! `s = lambda * Var(y)`: the larger the spread of the target values, the
//! more fitting error is allowed and the smoother the curve. While the
//! residual exceeds the bound, knots are inserted one at a time into the
//! span with the largest residual contribution, each placed by golden-section
//! search to minimize `eps(t) = delta(t) + p * P(t)` where
//! `P(t) = sum 1/(t_{i+1} - t_i)` penalizes coinciding knots.
//!
//! Open (clamped) fits solve banded normal equations; closed (periodic)
//! fits solve the small cyclic system densely. Choosing `lambda` is not a
//! fully automated process: the default suits boundary loops at embedding
//! scale, but data sets may need tuning.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pointcloud::Point2;

/// Interior knots added by the smoothing loop are capped at
/// `max(4, data points / 3)` so jagged, overfit boundaries cannot absorb
/// every noise wiggle.
pub fn max_interior_knots(n_points: usize) -> usize {
    (n_points / 3).max(4)
}

/// Default smoothing factor for boundary fits.
pub const DEFAULT_LAMBDA: f64 = 2.4;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("invalid knot vector: {0}")]
    BadKnots(String),
    #[error("invalid fit input: {0}")]
    BadInput(String),
    #[error("basis function {0} has no data in its support (Schoenberg-Whitney violated)")]
    EmptySupport(usize),
    #[error("normal equations are rank deficient")]
    RankDeficient,
    #[error("parameter {t} outside the curve domain [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("degenerate ring: total chord length is zero")]
    DegenerateRing,
    #[error("curve is not closed")]
    NotClosed,
}

/// Clamped knot vector: `degree + 1` copies of each end plus `g` interior
/// knots strictly inside the domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    pub degree: usize,
    pub knots: Vec<f64>,
}

impl KnotVector {
    pub fn clamped(degree: usize, a: f64, b: f64, interior: &[f64]) -> Result<Self, SplineError> {
        // NaN domains must fail validation, so the negation is load-bearing.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(a < b) {
            return Err(SplineError::BadKnots(format!("empty domain [{a}, {b}]")));
        }
        let mut knots = vec![a; degree + 1];
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(b, degree + 1));
        let kv = Self { degree, knots };
        kv.validate()?;
        Ok(kv)
    }

    pub fn validate(&self) -> Result<(), SplineError> {
        let k = self.degree;
        if self.knots.len() < 2 * (k + 1) {
            return Err(SplineError::BadKnots("too few knots for the degree".into()));
        }
        if self.knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(SplineError::BadKnots("knots must be non-decreasing".into()));
        }
        let (a, b) = self.domain();
        for &t in &self.knots[k + 1..self.knots.len() - k - 1] {
            if t <= a || t >= b {
                return Err(SplineError::BadKnots(format!(
                    "interior knot {t} not strictly inside ({a}, {b})"
                )));
            }
        }
        // No interior multiplicity beyond the degree.
        let interior = self.interior();
        let mut run = 1;
        for w in interior.windows(2) {
            run = if w[0] == w[1] { run + 1 } else { 1 };
            if run > k {
                return Err(SplineError::BadKnots(format!(
                    "interior knot {} repeated more than degree times",
                    w[0]
                )));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.knots.len() - 1 - self.degree])
    }

    /// Interior knots (between the clamped ends).
    pub fn interior(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.knots.len() - self.degree - 1]
    }

    /// Number of basis functions / control coefficients.
    pub fn basis_count(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct breakpoints `a, interior..., b` (for the knot penalty).
    pub fn distinct(&self) -> Vec<f64> {
        let (a, b) = self.domain();
        let mut out = vec![a];
        for &t in self.interior() {
            if *out.last().unwrap() != t {
                out.push(t);
            }
        }
        out.push(b);
        out
    }
}

/// Cox-de Boor recursion on a raw knot slice. The domain end `end` is
/// treated as belonging to the last non-empty span so evaluation at the
/// right boundary works.
fn basis_raw(knots: &[f64], i: usize, k: usize, x: f64, end: f64) -> f64 {
    if k == 0 {
        let in_span = knots[i] <= x && x < knots[i + 1];
        let at_end = x == end && knots[i] < knots[i + 1] && knots[i + 1] == end;
        return if in_span || at_end { 1.0 } else { 0.0 };
    }
    let mut acc = 0.0;
    let d1 = knots[i + k] - knots[i];
    if d1 > 0.0 {
        acc += (x - knots[i]) / d1 * basis_raw(knots, i, k - 1, x, end);
    }
    let d2 = knots[i + k + 1] - knots[i + 1];
    if d2 > 0.0 {
        acc += (knots[i + k + 1] - x) / d2 * basis_raw(knots, i + 1, k - 1, x, end);
    }
    acc
}

/// Value of the i-th clamped basis function `B_i^degree(x)`. Out of support
/// evaluates to 0.
pub fn basis(kv: &KnotVector, i: usize, x: f64) -> f64 {
    let (_, b) = kv.domain();
    basis_raw(&kv.knots, i, kv.degree, x, b)
}

/// Periodic basis over distinct breakpoints in `[0, 1)` with period 1.
/// Values of all `N` periodic basis functions at `x`, accumulated from the
/// extended (unrolled) clamped construction.
fn periodic_basis_row(degree: usize, breaks: &[f64], x: f64) -> Vec<f64> {
    let n = breaks.len();
    debug_assert!(n > degree, "periodic basis needs more breaks than the degree");
    let x = wrap_unit(x);
    // Extended knots t_j for j in -degree ..= n+degree, stored with offset.
    let ext: Vec<f64> = (0..=(n + 2 * degree))
        .map(|m| {
            let j = m as isize - degree as isize;
            let (q, r) = (j.div_euclid(n as isize), j.rem_euclid(n as isize));
            breaks[r as usize] + q as f64
        })
        .collect();
    // Span s: largest break index with breaks[s] <= x.
    let s = breaks.partition_point(|&u| u <= x) - 1;
    let mut row = vec![0.0; n];
    for e in (s as isize - degree as isize)..=(s as isize) {
        let idx = (e + degree as isize) as usize;
        let val = basis_raw(&ext, idx, degree, x, f64::INFINITY);
        let wrapped = e.rem_euclid(n as isize) as usize;
        row[wrapped] += val;
    }
    row
}

fn wrap_unit(t: f64) -> f64 {
    let w = t - t.floor();
    if w == 1.0 {
        0.0
    } else {
        w
    }
}

/// A planar B-spline curve.
///
/// Open curves store the full clamped knot vector in `knots`; closed
/// (periodic) curves store the distinct breakpoints in `[0, 1)` and have
/// one control point per breakpoint, wrapping `degree` controls around the
/// seam during evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineCurve {
    pub degree: usize,
    pub knots: Vec<f64>,
    pub control: Vec<Point2>,
    pub closed: bool,
}

impl BSplineCurve {
    pub fn domain(&self) -> (f64, f64) {
        if self.closed {
            (0.0, 1.0)
        } else {
            (self.knots[self.degree], self.knots[self.knots.len() - 1 - self.degree])
        }
    }

    /// Evaluates the curve. Closed curves wrap the parameter modulo the
    /// period, so `eval(t)` and `eval(t + 1)` agree exactly.
    pub fn eval(&self, t: f64) -> Result<Point2, SplineError> {
        if self.closed {
            let row = periodic_basis_row(self.degree, &self.knots, t);
            let mut u = 0.0;
            let mut v = 0.0;
            for (c, b) in self.control.iter().zip(&row) {
                u += c.u * b;
                v += c.v * b;
            }
            Ok(Point2::new(u, v))
        } else {
            let (a, b) = self.domain();
            if t < a || t > b {
                return Err(SplineError::OutOfDomain { t, a, b });
            }
            let kv = KnotVector { degree: self.degree, knots: self.knots.clone() };
            let mut u = 0.0;
            let mut v = 0.0;
            for (i, c) in self.control.iter().enumerate() {
                let w = basis(&kv, i, t);
                u += c.u * w;
                v += c.v * w;
            }
            Ok(Point2::new(u, v))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("curve serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SplineError> {
        serde_json::from_str(text).map_err(|e| SplineError::BadInput(e.to_string()))
    }

    /// Sampled polyline as CSV (`u,v` per line) at `n` uniform parameters.
    pub fn to_polyline_csv(&self, n: usize) -> Result<String, SplineError> {
        let (a, b) = self.domain();
        let mut out = String::from("u,v\n");
        for i in 0..n {
            let t = if self.closed {
                i as f64 / n as f64
            } else {
                a + (b - a) * i as f64 / (n - 1).max(1) as f64
            };
            let p = self.eval(t)?;
            out.push_str(&format!("{},{}\n", p.u, p.v));
        }
        Ok(out)
    }
}

/// Weighted 1D fit data: parameters `x`, targets `y`, and positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInput {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub weights: Vec<f64>,
}

impl FitInput {
    pub fn unweighted(x: Vec<f64>, y: Vec<f64>) -> Self {
        let w = vec![1.0; x.len()];
        Self { x, y, weights: w }
    }

    fn validate_open(&self) -> Result<(), SplineError> {
        if self.x.len() != self.y.len() || self.x.len() != self.weights.len() {
            return Err(SplineError::BadInput("x, y, weights must have equal length".into()));
        }
        if self.x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SplineError::BadInput("x must be strictly increasing".into()));
        }
        // NaN weights must fail validation, so the negation is load-bearing.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if self.weights.iter().any(|&w| !(w > 0.0)) {
            return Err(SplineError::BadInput("weights must be positive".into()));
        }
        Ok(())
    }
}

/// Fixed-knot weighted least squares for an open clamped spline, solved via
/// banded Cholesky on the normal equations. Returns the coefficients and
/// the achieved residual `delta`.
pub fn lsq_fit_fixed_knots(
    input: &FitInput,
    kv: &KnotVector,
) -> Result<(Vec<f64>, f64), SplineError> {
    input.validate_open()?;
    kv.validate()?;
    let n = kv.basis_count();
    let m = input.x.len();
    if m < n {
        return Err(SplineError::BadInput(format!(
            "need at least as many observations ({m}) as coefficients ({n})"
        )));
    }

    // Weighted design rows; bandwidth degree.
    let rows: Vec<Vec<f64>> = input
        .x
        .iter()
        .map(|&x| (0..n).map(|i| basis(kv, i, x)).collect())
        .collect();

    // Schoenberg-Whitney: every basis needs a supporting data site.
    for i in 0..n {
        if !rows.iter().any(|r| r[i] > 0.0) {
            return Err(SplineError::EmptySupport(i));
        }
    }

    let k = kv.degree;
    // Banded normal matrix: band[i][d] = N[i][i+d], d in 0..=k.
    let mut band = vec![vec![0.0; k + 1]; n];
    let mut rhs = vec![0.0; n];
    for (r, row) in rows.iter().enumerate() {
        let w2 = input.weights[r] * input.weights[r];
        for i in 0..n {
            if row[i] == 0.0 {
                continue;
            }
            rhs[i] += w2 * row[i] * input.y[r];
            for d in 0..=k {
                if i + d < n && row[i + d] != 0.0 {
                    band[i][d] += w2 * row[i] * row[i + d];
                }
            }
        }
    }

    let coeffs = solve_banded_cholesky(&band, &rhs, k)?;

    let mut delta = 0.0;
    for (r, row) in rows.iter().enumerate() {
        let fit: f64 = row.iter().zip(&coeffs).map(|(b, c)| b * c).sum();
        let e = input.weights[r] * (input.y[r] - fit);
        delta += e * e;
    }
    Ok((coeffs, delta))
}

/// Cholesky factorization and solve for a symmetric positive-definite
/// banded matrix given as upper band rows.
fn solve_banded_cholesky(
    band: &[Vec<f64>],
    rhs: &[f64],
    bandwidth: usize,
) -> Result<Vec<f64>, SplineError> {
    let n = band.len();
    // Lower-triangular factor, band storage: low[i][d] = L[i][i-d].
    let mut low = vec![vec![0.0; bandwidth + 1]; n];
    for i in 0..n {
        let j0 = i.saturating_sub(bandwidth);
        for j in j0..=i {
            // A[j][i] from the upper band of row j.
            let a = band[j][i - j];
            let mut sum = a;
            let p0 = j0.max(j.saturating_sub(bandwidth));
            for p in p0..j {
                sum -= low[i][i - p] * low[j][j - p];
            }
            if j == i {
                if sum <= 1e-300 {
                    return Err(SplineError::RankDeficient);
                }
                low[i][0] = sum.sqrt();
            } else {
                low[i][i - j] = sum / low[j][0];
            }
        }
    }
    // Forward solve L z = rhs.
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut sum = rhs[i];
        for p in i.saturating_sub(bandwidth)..i {
            sum -= low[i][i - p] * z[p];
        }
        z[i] = sum / low[i][0];
    }
    // Backward solve L^T c = z.
    let mut c = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = z[i];
        for p in (i + 1)..n.min(i + bandwidth + 1) {
            sum -= low[p][p - i] * c[p];
        }
        c[i] = sum / low[i][0];
    }
    Ok(c)
}

/// Weighted least squares for a periodic spline over distinct breaks in
/// `[0, 1)`. The cyclic normal system is small and solved densely.
fn lsq_fit_periodic(
    x: &[f64],
    y: &[f64],
    weights: &[f64],
    degree: usize,
    breaks: &[f64],
) -> Result<(Vec<f64>, f64), SplineError> {
    let n = breaks.len();
    let m = x.len();
    if n <= degree {
        return Err(SplineError::BadKnots("periodic fit needs more breaks than the degree".into()));
    }
    if m < n {
        return Err(SplineError::BadInput(format!(
            "need at least as many observations ({m}) as coefficients ({n})"
        )));
    }
    let rows: Vec<Vec<f64>> = x.iter().map(|&t| periodic_basis_row(degree, breaks, t)).collect();
    for i in 0..n {
        if !rows.iter().any(|r| r[i] > 0.0) {
            return Err(SplineError::EmptySupport(i));
        }
    }
    let mut normal = DMatrix::zeros(n, n);
    let mut rhs = DVector::zeros(n);
    for (r, row) in rows.iter().enumerate() {
        let w2 = weights[r] * weights[r];
        for i in 0..n {
            if row[i] == 0.0 {
                continue;
            }
            rhs[i] += w2 * row[i] * y[r];
            for j in 0..n {
                if row[j] != 0.0 {
                    normal[(i, j)] += w2 * row[i] * row[j];
                }
            }
        }
    }
    let chol = normal.cholesky().ok_or(SplineError::RankDeficient)?;
    let coeffs = chol.solve(&rhs);

    let mut delta = 0.0;
    for (r, row) in rows.iter().enumerate() {
        let fit: f64 = row.iter().zip(coeffs.iter()).map(|(b, c)| b * c).sum();
        let e = weights[r] * (y[r] - fit);
        delta += e * e;
    }
    Ok((coeffs.iter().copied().collect(), delta))
}

/// Knot penalty `P(t) = sum 1/(t_{i+1} - t_i)` over a strictly increasing
/// distinct-knot sequence (boundary-to-interior gaps included).
pub fn knot_penalty(distinct: &[f64]) -> Result<f64, SplineError> {
    if distinct.len() < 2 {
        return Err(SplineError::BadKnots("penalty needs at least two knots".into()));
    }
    let mut p = 0.0;
    for w in distinct.windows(2) {
        let gap = w[1] - w[0];
        if gap <= 0.0 {
            return Err(SplineError::BadKnots(format!(
                "coinciding knots {} and {} have no defined penalty",
                w[0], w[1]
            )));
        }
        p += 1.0 / gap;
    }
    Ok(p)
}

/// Smoothing bound of the variance heuristic: `s = lambda * Var(y)` with
/// the population variance `Var(y) = sum (y_i - mean)^2 / n`.
pub fn smoothing_bound(y: &[f64], lambda: f64) -> f64 {
    assert!(!y.is_empty());
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / y.len() as f64;
    lambda * var
}

/// Outcome summary of a smoothing fit (per channel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Weighted residual `delta` of this channel.
    pub residual: f64,
    /// Knot penalty `P(t)` of the shared knot sequence.
    pub penalty: f64,
    /// Objective `eps = delta + p * P(t)`.
    pub objective: f64,
    /// Penalty weight used (shared across channels).
    pub p: f64,
    /// Smoothing bound `s = lambda * Var(y)` for this channel.
    pub bound: f64,
    /// Number of knots inserted by the smoothing loop.
    pub inserted_knots: usize,
    /// Set when the knot budget ran out while the residual still exceeded
    /// the bound.
    pub budget_exhausted: bool,
    /// Total residual (all channels) after each fit, first entry being the
    /// knot-free configuration.
    pub residual_history: Vec<f64>,
}

/// One-dimensional spline produced by [`fit_smoothing`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spline1 {
    pub knots: KnotVector,
    pub coeffs: Vec<f64>,
}

impl Spline1 {
    pub fn eval(&self, x: f64) -> Result<f64, SplineError> {
        let (a, b) = self.knots.domain();
        if x < a || x > b {
            return Err(SplineError::OutOfDomain { t: x, a, b });
        }
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * basis(&self.knots, i, x))
            .sum())
    }
}

/// Configuration of the shared-knot multi-channel smoothing engine.
struct SmoothProblem<'a> {
    x: &'a [f64],
    channels: &'a [&'a [f64]],
    weights: &'a [f64],
    degree: usize,
    closed: bool,
    /// Open: interior knots. Closed: breaks in [0,1).
    breaks: Vec<f64>,
    domain: (f64, f64),
}

impl SmoothProblem<'_> {
    /// Distinct knot sequence for the penalty: open fits span [a, b]; closed
    /// fits wrap the last gap around the period.
    fn penalty_of(&self, breaks: &[f64]) -> Result<f64, SplineError> {
        if self.closed {
            let mut seq = breaks.to_vec();
            seq.push(breaks[0] + 1.0);
            knot_penalty(&seq)
        } else {
            let mut seq = vec![self.domain.0];
            seq.extend_from_slice(breaks);
            seq.push(self.domain.1);
            knot_penalty(&seq)
        }
    }

    /// Fits every channel on the candidate knots. Returns per-channel
    /// coefficients, per-channel residuals and per-point total residuals.
    #[allow(clippy::type_complexity)]
    fn fit(
        &self,
        breaks: &[f64],
    ) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<f64>), SplineError> {
        let mut coeffs = Vec::with_capacity(self.channels.len());
        let mut residuals = Vec::with_capacity(self.channels.len());
        let mut per_point = vec![0.0; self.x.len()];
        for y in self.channels {
            let (c, d) = if self.closed {
                lsq_fit_periodic(self.x, y, self.weights, self.degree, breaks)?
            } else {
                let kv = KnotVector::clamped(self.degree, self.domain.0, self.domain.1, breaks)?;
                let input = FitInput {
                    x: self.x.to_vec(),
                    y: y.to_vec(),
                    weights: self.weights.to_vec(),
                };
                lsq_fit_fixed_knots(&input, &kv)?
            };
            // Per-point contributions for span selection.
            for (r, &xr) in self.x.iter().enumerate() {
                let fit_val = if self.closed {
                    let row = periodic_basis_row(self.degree, breaks, xr);
                    row.iter().zip(&c).map(|(b, cc)| b * cc).sum::<f64>()
                } else {
                    let kv =
                        KnotVector::clamped(self.degree, self.domain.0, self.domain.1, breaks)?;
                    c.iter().enumerate().map(|(i, cc)| cc * basis(&kv, i, xr)).sum::<f64>()
                };
                let e = self.weights[r] * (y[r] - fit_val);
                per_point[r] += e * e;
            }
            coeffs.push(c);
            residuals.push(d);
        }
        Ok((coeffs, residuals, per_point))
    }

    fn basis_count(&self, breaks: &[f64]) -> usize {
        if self.closed {
            breaks.len()
        } else {
            breaks.len() + self.degree + 1
        }
    }

    /// Spans eligible for insertion: (lo, hi) pairs of consecutive breaks
    /// (closed fits wrap the final span past 1).
    fn spans(&self, breaks: &[f64]) -> Vec<(f64, f64)> {
        if self.closed {
            let mut s: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
            s.push((breaks[breaks.len() - 1], breaks[0] + 1.0));
            s
        } else {
            let mut seq = vec![self.domain.0];
            seq.extend_from_slice(breaks);
            seq.push(self.domain.1);
            seq.windows(2).map(|w| (w[0], w[1])).collect()
        }
    }

    fn insert(&self, breaks: &[f64], xi: f64) -> Vec<f64> {
        let xi = if self.closed { wrap_unit(xi) } else { xi };
        let mut out = breaks.to_vec();
        let pos = out.partition_point(|&u| u < xi);
        out.insert(pos, xi);
        out
    }
}

/// Shared engine: inserts knots until every channel's residual drops below
/// its variance bound or the budget runs out.
fn fit_smoothing_channels(
    problem: &mut SmoothProblem<'_>,
    lambda: f64,
    p_override: Option<f64>,
) -> Result<(Vec<Vec<f64>>, Vec<FitReport>), SplineError> {
    let m = problem.x.len();
    let bounds: Vec<f64> =
        problem.channels.iter().map(|y| smoothing_bound(y, lambda)).collect();
    let budget = max_interior_knots(m);

    let (mut coeffs, mut residuals, mut per_point) = problem.fit(&problem.breaks)?;
    let mut history = vec![residuals.iter().sum::<f64>()];
    let mut inserted = 0usize;
    let mut p_used = p_override.unwrap_or(0.0);
    let mut p_fixed = p_override.is_some();
    let mut exhausted = false;

    loop {
        let satisfied =
            residuals.iter().zip(&bounds).all(|(d, s)| d <= s);
        if satisfied {
            break;
        }
        if inserted >= budget || problem.basis_count(&problem.breaks) + 1 > m {
            exhausted = true;
            break;
        }

        // Rank spans by their residual contribution.
        let spans = problem.spans(&problem.breaks);
        let mut span_residuals: Vec<(f64, (f64, f64))> = spans
            .iter()
            .map(|&(lo, hi)| {
                let total: f64 = problem
                    .x
                    .iter()
                    .zip(&per_point)
                    .filter(|(&xr, _)| {
                        let xw = if problem.closed && xr < lo { xr + 1.0 } else { xr };
                        xw >= lo && xw < hi
                    })
                    .map(|(_, r)| *r)
                    .sum();
                (total, (lo, hi))
            })
            .collect();
        span_residuals
            .sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite residuals"));

        let mut accepted = None;
        for &(span_res, (lo, hi)) in &span_residuals {
            if span_res <= 0.0 {
                break;
            }
            let width = hi - lo;
            if width < 1e-9 {
                continue;
            }
            // Keep new knots away from the span ends; coinciding knots are
            // exactly what the penalty exists to prevent.
            let (glo, ghi) = (lo + 0.1 * width, hi - 0.1 * width);

            if !p_fixed {
                // Penalty weight: residual and penalty enter at comparable
                // magnitude for the first candidate configuration.
                let mid = problem.insert(&problem.breaks, 0.5 * (lo + hi));
                let p0 = problem.penalty_of(&mid)?;
                let d0: f64 = residuals.iter().sum();
                p_used = if p0 > 0.0 { d0 / p0 } else { 0.0 };
                p_fixed = true;
            }

            let objective = |xi: f64| -> f64 {
                let cand = problem.insert(&problem.breaks, xi);
                match (problem.fit(&cand), problem.penalty_of(&cand)) {
                    (Ok((_, res, _)), Ok(pen)) => {
                        res.iter().sum::<f64>() + p_used * pen
                    }
                    _ => f64::INFINITY,
                }
            };

            // Golden-section search for the knot position.
            let inv_phi = 0.618_033_988_749_894_8;
            let (mut a, mut b) = (glo, ghi);
            let mut c = b - inv_phi * (b - a);
            let mut d = a + inv_phi * (b - a);
            let (mut fc, mut fd) = (objective(c), objective(d));
            for _ in 0..28 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - inv_phi * (b - a);
                    fc = objective(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + inv_phi * (b - a);
                    fd = objective(d);
                }
            }
            let xi = if fc < fd { c } else { d };
            if objective(xi).is_finite() {
                accepted = Some(xi);
                break;
            }
        }

        let Some(xi) = accepted else {
            exhausted = true;
            break;
        };
        problem.breaks = problem.insert(&problem.breaks, xi);
        inserted += 1;
        let refit = problem.fit(&problem.breaks)?;
        coeffs = refit.0;
        residuals = refit.1;
        per_point = refit.2;
        history.push(residuals.iter().sum::<f64>());
    }

    let penalty = problem.penalty_of(&problem.breaks)?;
    let reports = residuals
        .iter()
        .zip(&bounds)
        .map(|(&residual, &bound)| FitReport {
            residual,
            penalty,
            objective: residual + p_used * penalty,
            p: p_used,
            bound,
            inserted_knots: inserted,
            budget_exhausted: exhausted,
            residual_history: history.clone(),
        })
        .collect();
    Ok((coeffs, reports))
}

/// Variance-bounded smoothing fit of an open cubic spline to weighted 1D
/// data. Starts from a knot-free fit and inserts knots (largest-residual
/// span, golden-section placement) until `delta <= lambda * Var(y)` or the
/// budget is exhausted (flagged in the report).
///
/// `p_override` replaces the automatic penalty weight `p = delta0 / P0`.
pub fn fit_smoothing(
    input: &FitInput,
    lambda: f64,
    p_override: Option<f64>,
) -> Result<(Spline1, FitReport), SplineError> {
    input.validate_open()?;
    let degree = 3;
    if input.x.len() < degree + 1 {
        return Err(SplineError::BadInput("need at least 4 points for a cubic fit".into()));
    }
    let domain = (input.x[0], input.x[input.x.len() - 1]);
    let channel: &[f64] = &input.y;
    let mut problem = SmoothProblem {
        x: &input.x,
        channels: &[channel],
        weights: &input.weights,
        degree,
        closed: false,
        breaks: Vec::new(),
        domain,
    };
    let (mut coeffs, mut reports) = fit_smoothing_channels(&mut problem, lambda, p_override)?;
    let kv = KnotVector::clamped(degree, domain.0, domain.1, &problem.breaks)?;
    Ok((Spline1 { knots: kv, coeffs: coeffs.remove(0) }, reports.remove(0)))
}

/// Fits a closed (periodic) cubic loop through boundary ring points.
/// Parameters are assigned by normalized cumulative chord length; both
/// coordinates share one knot sequence and each is bounded by its own
/// variance criterion.
pub fn fit_closed_boundary(
    ring: &[Point2],
    lambda: f64,
) -> Result<(BSplineCurve, [FitReport; 2]), SplineError> {
    let degree = 3;
    let distinct: Vec<Point2> = {
        let mut out: Vec<Point2> = Vec::with_capacity(ring.len());
        for p in ring {
            if out.last().is_none_or(|q: &Point2| q.distance(p) > 0.0) {
                out.push(*p);
            }
        }
        while out.len() > 1 && out[0].distance(out.last().unwrap()) == 0.0 {
            out.pop();
        }
        out
    };
    if distinct.len() < 4 {
        return Err(SplineError::BadInput(format!(
            "closed fit needs at least 4 distinct ring points, got {}",
            distinct.len()
        )));
    }

    // Chord-length parameters on [0, 1).
    let m = distinct.len();
    let mut chord = Vec::with_capacity(m + 1);
    chord.push(0.0);
    for i in 1..m {
        chord.push(chord[i - 1] + distinct[i - 1].distance(&distinct[i]));
    }
    let total = chord[m - 1] + distinct[m - 1].distance(&distinct[0]);
    if total <= 0.0 {
        return Err(SplineError::DegenerateRing);
    }
    let x: Vec<f64> = chord.iter().map(|c| c / total).collect();

    let us: Vec<f64> = distinct.iter().map(|p| p.u).collect();
    let vs: Vec<f64> = distinct.iter().map(|p| p.v).collect();
    let weights = vec![1.0; m];

    // Initial loop resolution: up to 8 uniform spans, never more than the
    // data can determine.
    let n0 = 8.min(m).max(degree + 1);
    let breaks: Vec<f64> = (0..n0).map(|i| i as f64 / n0 as f64).collect();

    let channels: [&[f64]; 2] = [&us, &vs];
    let mut problem = SmoothProblem {
        x: &x,
        channels: &channels,
        weights: &weights,
        degree,
        closed: true,
        breaks,
        domain: (0.0, 1.0),
    };
    let (coeffs, reports) = fit_smoothing_channels(&mut problem, lambda, None)?;

    let control: Vec<Point2> = coeffs[0]
        .iter()
        .zip(&coeffs[1])
        .map(|(&u, &v)| Point2::new(u, v))
        .collect();
    let curve = BSplineCurve { degree, knots: problem.breaks, control, closed: true };
    let [ru, rv]: [FitReport; 2] = match reports.try_into() {
        Ok(arr) => arr,
        Err(_) => unreachable!("two channels produce two reports"),
    };
    Ok((curve, [ru, rv]))
}
