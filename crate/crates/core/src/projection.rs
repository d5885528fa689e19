//! Hard and soft binary-argmax@k.
//!
//! [`project`] computes `argmin_{y ∈ Δ(n,k)} ‖y - x/τ‖²` exactly. The KKT
//! conditions give `y_i = clip(u_i - θ, 0, 1)` with `u = x/τ`, so the only
//! unknown is the scalar offset `θ`. The map `θ ↦ Σ clip(u_i - θ, 0, 1)` is
//! continuous, nonincreasing and piecewise linear with breakpoints at `u_i`
//! (coordinate leaves zero) and `u_i - 1` (coordinate reaches one). Sorting
//! `u` once orders both breakpoint families, and a merged scan locates the
//! linear piece on which the sum equals `k`.

use std::ops::Deref;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Distance from a box bound below which a solved coordinate is treated as
/// sitting on the bound.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// The `(n, k, τ)` triple parameterizing soft binary-argmax@k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypersimplexSpec {
    pub n: usize,
    pub k: usize,
    pub tau: f64,
}

impl HypersimplexSpec {
    pub fn new(n: usize, k: usize, tau: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("dimension n must be at least 1"));
        }
        if k > n {
            return Err(Error::arg(format!("k = {k} exceeds n = {n}")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::arg(format!("temperature must be positive and finite, got {tau}")));
        }
        Ok(Self { n, k, tau })
    }
}

/// A score vector with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "score vector")?;
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Output of the projection together with the index partition induced by it.
///
/// `theta` is the clip offset: every coordinate satisfies
/// `y_i = clip(x_i / τ - theta, 0, 1)`. In Lagrangian terms it is half the
/// multiplier of the sum constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionResult {
    pub y: Vec<f64>,
    /// Indices with `0 < y_i < 1`, ascending.
    pub active: Vec<usize>,
    pub at_one: Vec<usize>,
    pub at_zero: Vec<usize>,
    pub theta: f64,
    pub spec: HypersimplexSpec,
}

impl ProjectionResult {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// True when `0 < k < n` but every coordinate sits on a bound. The
    /// Jacobian is then the zero map and the projection is locally constant
    /// only from one side.
    pub fn is_saturated(&self) -> bool {
        self.active.is_empty() && self.spec.k > 0 && self.spec.k < self.spec.n
    }
}

pub(crate) fn check_finite(x: &[f64], what: &str) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::arg(format!("{what} has non-finite entry {} at index {i}", x[i]))),
        None => Ok(()),
    }
}

/// The `k`-th largest entry of `x`, counting duplicates with multiplicity.
pub fn kth_largest(x: &[f64], k: usize) -> Result<f64> {
    check_finite(x, "score vector")?;
    if k == 0 || k > x.len() {
        return Err(Error::arg(format!("k = {k} outside 1..={}", x.len())));
    }
    let mut work = x.to_vec();
    let (_, kth, _) = work.select_nth_unstable_by(k - 1, |a, b| b.partial_cmp(a).unwrap());
    Ok(*kth)
}

/// Indicator of the `k` largest entries of `x`.
///
/// Entries tied with the `k`-th largest value are admitted in ascending index
/// order until exactly `k` ones have been placed.
pub fn hard_topk(x: &[f64], k: usize) -> Result<Vec<f64>> {
    check_finite(x, "score vector")?;
    let n = x.len();
    if k > n {
        return Err(Error::arg(format!("k = {k} exceeds n = {n}")));
    }
    if k == 0 {
        return Ok(vec![0.0; n]);
    }
    let threshold = kth_largest(x, k)?;
    let above = x.iter().filter(|&&v| v > threshold).count();
    let mut ties_left = k - above;
    Ok(x.iter()
        .map(|&v| {
            if v > threshold {
                1.0
            } else if v == threshold && ties_left > 0 {
                ties_left -= 1;
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

fn scaled_input(x: &[f64], spec: &HypersimplexSpec) -> Result<Vec<f64>> {
    if x.len() != spec.n {
        return Err(Error::arg(format!(
            "input has length {} but spec.n = {}",
            x.len(),
            spec.n
        )));
    }
    check_finite(x, "score vector")?;
    let u: Vec<f64> = x.iter().map(|&v| v / spec.tau).collect();
    check_finite(&u, "scaled input x/tau")?;
    Ok(u)
}

/// Vertex solutions for `k = 0` and `k = n`, where the hypersimplex is a point.
fn vertex_solution(u: &[f64], spec: &HypersimplexSpec) -> Option<ProjectionResult> {
    let n = u.len();
    let all: Vec<usize> = (0..n).collect();
    if spec.k == 0 {
        let theta = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(ProjectionResult {
            y: vec![0.0; n],
            active: Vec::new(),
            at_one: Vec::new(),
            at_zero: all,
            theta,
            spec: *spec,
        })
    } else if spec.k == n {
        let theta = u.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
        Some(ProjectionResult {
            y: vec![1.0; n],
            active: Vec::new(),
            at_one: all,
            at_zero: Vec::new(),
            theta,
            spec: *spec,
        })
    } else {
        None
    }
}

/// Soft binary-argmax@k: the Euclidean projection of `x / τ` onto `Δ(n, k)`.
///
/// Runs in `O(n log n)` (one sort of the scaled input plus a linear scan).
pub fn project(x: &[f64], spec: &HypersimplexSpec) -> Result<ProjectionResult> {
    let u = scaled_input(x, spec)?;
    if let Some(vertex) = vertex_solution(&u, spec) {
        return Ok(vertex);
    }
    // Only the offset is solved in sorted order; it is then applied to `u`
    // in input order, so no permutation needs to be carried.
    let mut sorted = u.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let theta = scan_threshold(&sorted, spec.k);
    Ok(finalize(&u, theta, spec))
}

/// Walks the breakpoints of `θ ↦ Σ clip(s_i - θ, 0, 1)` from `+∞` downwards
/// and returns the `θ` at which the sum first reaches `k`.
///
/// `sorted` must be nonincreasing and `0 < k < n`.
fn scan_threshold(sorted: &[f64], k: usize) -> f64 {
    let n = sorted.len();
    let target = k as f64;
    // entered = #{s_i > θ}, saturated = #{s_i - 1 >= θ}; the coordinates
    // in between are the active ones and `active_sum` is their Σ s_i.
    let (mut entered, mut saturated) = (0usize, 0usize);
    let mut active_sum = 0.0;
    loop {
        let next_enter = sorted.get(entered).copied().unwrap_or(f64::NEG_INFINITY);
        let next_saturate = sorted
            .get(saturated)
            .map(|s| s - 1.0)
            .unwrap_or(f64::NEG_INFINITY);
        let event = next_enter.max(next_saturate);
        if event == f64::NEG_INFINITY {
            // Unreachable for k < n; kept so the loop cannot run off the end.
            return sorted[n - 1] - 1.0;
        }
        let width = (entered - saturated) as f64;
        let mass = saturated as f64 + active_sum - width * event;
        if mass >= target {
            if entered == saturated {
                return event;
            }
            return (active_sum - (target - saturated as f64)) / width;
        }
        if next_enter >= next_saturate {
            active_sum += sorted[entered];
            entered += 1;
        } else {
            active_sum -= sorted[saturated];
            saturated += 1;
        }
    }
}

/// Builds the result for an offset `theta` known to be (up to rounding) the
/// solution: clips, snaps near-bound coordinates, and re-solves `θ` exactly on
/// the resulting active set so that the sum constraint holds to rounding.
pub(crate) fn finalize(u: &[f64], theta: f64, spec: &HypersimplexSpec) -> ProjectionResult {
    let n = u.len();
    let mut y = vec![0.0; n];
    let mut active = Vec::new();
    let mut n_one = 0usize;
    for (i, &ui) in u.iter().enumerate() {
        let v = ui - theta;
        if v >= 1.0 - BOUNDARY_TOL {
            y[i] = 1.0;
            n_one += 1;
        } else if v <= BOUNDARY_TOL {
            y[i] = 0.0;
        } else {
            active.push(i);
        }
    }

    let mut theta = theta;
    if !active.is_empty() {
        let sum: f64 = active.iter().map(|&i| u[i]).sum();
        theta = (sum - (spec.k as f64 - n_one as f64)) / active.len() as f64;
        for &i in &active {
            y[i] = (u[i] - theta).clamp(0.0, 1.0);
        }
    }

    let (mut active_out, mut at_one, mut at_zero) = (Vec::new(), Vec::new(), Vec::new());
    for (i, &yi) in y.iter().enumerate() {
        if yi >= 1.0 {
            at_one.push(i);
        } else if yi <= 0.0 {
            at_zero.push(i);
        } else {
            active_out.push(i);
        }
    }

    ProjectionResult {
        y,
        active: active_out,
        at_one,
        at_zero,
        theta,
        spec: *spec,
    }
}

/// Same projection as [`project`], found by bisection on `θ` over
/// `[min(u) - 1, max(u)]` instead of a breakpoint scan.
///
/// Iterates until the clipped sum is within `tol` of `k`, then recomputes `θ`
/// exactly for the partition the bisection landed in.
pub fn project_bisect(x: &[f64], spec: &HypersimplexSpec, tol: f64) -> Result<ProjectionResult> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::arg(format!("tolerance must be positive, got {tol}")));
    }
    let u = scaled_input(x, spec)?;
    if let Some(vertex) = vertex_solution(&u, spec) {
        return Ok(vertex);
    }
    let k = spec.k as f64;
    let mass = |theta: f64| -> f64 { u.iter().map(|&v| (v - theta).clamp(0.0, 1.0)).sum() };

    let mut lo = u.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..2000 {
        theta = 0.5 * (lo + hi);
        let g = mass(theta);
        if (g - k).abs() <= tol || theta <= lo || theta >= hi {
            break;
        }
        if g > k {
            lo = theta;
        } else {
            hi = theta;
        }
    }

    // Snap to the segment: exact θ for the partition at the bisection point.
    let (mut n_one, mut n_active, mut active_sum) = (0usize, 0usize, 0.0);
    for &v in &u {
        let t = v - theta;
        if t >= 1.0 {
            n_one += 1;
        } else if t > 0.0 {
            n_active += 1;
            active_sum += v;
        }
    }
    if n_active > 0 {
        theta = (active_sum - (k - n_one as f64)) / n_active as f64;
    }
    Ok(finalize(&u, theta, spec))
}

/// Row-wise [`project`]. Rows are independent; results do not depend on the
/// number of worker threads.
pub fn project_batch<R>(rows: &[R], spec: &HypersimplexSpec) -> Result<Vec<ProjectionResult>>
where
    R: AsRef<[f64]> + Sync,
{
    rows.par_iter().map(|row| project(row.as_ref(), spec)).collect()
}
