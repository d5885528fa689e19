//! Brute-force references for the fast paths.
//!
//! Nothing here shares logic with [`crate::projection`] beyond calling
//! [`project`] where a finite-difference probe needs the forward map. The
//! projection oracle enumerates every assignment of coordinates to
//! `{zero, active, one}` and checks the KKT system directly.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::projection::{check_finite, project, HypersimplexSpec, ProjectionResult, BOUNDARY_TOL};

pub const MAX_BRUTE_FORCE_N: usize = 12;
pub const MAX_EXHAUSTIVE_TOPK_N: usize = 20;
/// A certificate is accepted when its worst KKT residual is at most this.
pub const KKT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    pub y: Vec<f64>,
    /// Clip offset. Not unique when no coordinate is strictly interior; the
    /// midpoint of the admissible interval is reported then.
    pub theta: f64,
    /// Largest residual over stationarity, primal feasibility and the sign
    /// conditions on the bound multipliers.
    pub max_violation: f64,
    pub active: Vec<usize>,
}

impl KktCertificate {
    pub fn is_valid(&self) -> bool {
        self.max_violation <= KKT_TOL
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Slot {
    Zero,
    Active,
    One,
}

/// Midpoint of the θ interval `[max over zeros of u, min over ones of u - 1]`
/// left open by an assignment with no interior coordinate.
fn free_theta(slots: &[Slot], u: &[f64]) -> f64 {
    let lo = slots
        .iter()
        .zip(u)
        .filter(|(s, _)| **s == Slot::Zero)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = slots
        .iter()
        .zip(u)
        .filter(|(s, _)| **s == Slot::One)
        .map(|(_, &v)| v - 1.0)
        .fold(f64::INFINITY, f64::min);
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo,
        (false, true) => hi,
        (false, false) => unreachable!("n >= 1"),
    }
}

/// Exact projection by enumerating all `3^n` active-set assignments.
pub fn brute_force_project(x: &[f64], spec: &HypersimplexSpec) -> Result<KktCertificate> {
    let n = x.len();
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::Size {
            n,
            max: MAX_BRUTE_FORCE_N,
        });
    }
    if n != spec.n {
        return Err(Error::arg(format!("input has length {n} but spec.n = {}", spec.n)));
    }
    check_finite(x, "score vector")?;
    let u: Vec<f64> = x.iter().map(|&v| v / spec.tau).collect();
    let k = spec.k as f64;

    let mut slots = [Slot::Zero; MAX_BRUTE_FORCE_N];
    let mut best: Option<(f64, f64, [Slot; MAX_BRUTE_FORCE_N])> = None;
    let total = 3usize.pow(n as u32);

    for code in 0..total {
        let mut c = code;
        let (mut n_one, mut n_active, mut active_sum) = (0usize, 0usize, 0.0);
        for (slot, &ui) in slots.iter_mut().zip(&u) {
            *slot = match c % 3 {
                0 => Slot::Zero,
                1 => {
                    n_active += 1;
                    active_sum += ui;
                    Slot::Active
                }
                _ => {
                    n_one += 1;
                    Slot::One
                }
            };
            c /= 3;
        }

        let theta = if n_active > 0 {
            (active_sum - (k - n_one as f64)) / n_active as f64
        } else {
            if n_one != spec.k {
                continue;
            }
            free_theta(&slots[..n], &u)
        };

        let mut violation = 0.0f64;
        for (slot, &ui) in slots[..n].iter().zip(&u) {
            let t = ui - theta;
            let r = match slot {
                // y = 0 needs a nonnegative lower-bound multiplier: t <= 0.
                Slot::Zero => t.max(0.0),
                // y = 1 needs a nonnegative upper-bound multiplier: t >= 1.
                Slot::One => (1.0 - t).max(0.0),
                Slot::Active => (-t).max(t - 1.0).max(0.0),
            };
            violation = violation.max(r);
        }
        if best.as_ref().is_none_or(|(v, _, _)| violation < *v) {
            best = Some((violation, theta, slots));
        }
    }

    let (max_violation, mut theta, mut slots) = best.expect("k <= n admits an assignment");
    // An "active" slot whose value lands on a bound is really on that bound;
    // without a strictly interior coordinate θ is only pinned to an interval.
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = match slots[i] {
            Slot::Zero => 0.0,
            Slot::One => 1.0,
            Slot::Active => {
                let v = (u[i] - theta).clamp(0.0, 1.0);
                if v <= BOUNDARY_TOL {
                    slots[i] = Slot::Zero;
                    0.0
                } else if v >= 1.0 - BOUNDARY_TOL {
                    slots[i] = Slot::One;
                    1.0
                } else {
                    v
                }
            }
        };
    }
    let active: Vec<usize> = (0..n).filter(|&i| slots[i] == Slot::Active).collect();
    if active.is_empty() {
        theta = free_theta(&slots[..n], &u);
    }
    Ok(KktCertificate {
        y,
        theta,
        max_violation,
        active,
    })
}

/// Central-difference Jacobian of `x ↦ project(x).y`, `J[i][j] = ∂y_i/∂x_j`.
///
/// This differentiates with respect to the unscaled input, so it carries the
/// `1/τ` factor that [`crate::backward::jvp`] leaves out.
pub fn fd_jacobian(x: &[f64], spec: &HypersimplexSpec, h: f64) -> Result<Vec<Vec<f64>>> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(Error::arg(format!("step h = {h} outside [1e-8, 1e-4]")));
    }
    let n = x.len();
    let mut jac = vec![vec![0.0; n]; n];
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = project(&probe, spec)?.y;
        probe[j] = x[j] - h;
        let minus = project(&probe, spec)?.y;
        probe[j] = x[j];
        for i in 0..n {
            jac[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Central difference of `project` along direction `v` in the scaled
/// coordinates `u = x/τ`: `(F(x + hτv) - F(x - hτv)) / 2h`.
pub fn fd_directional(x: &[f64], spec: &HypersimplexSpec, v: &[f64], h: f64) -> Result<Vec<f64>> {
    let step = h * spec.tau;
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + step * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - step * b).collect();
    let yp = project(&plus, spec)?.y;
    let ym = project(&minus, spec)?.y;
    Ok(yp.iter().zip(&ym).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// Central-difference gradient of a scalar function.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|j| {
            probe[j] = x[j] + h;
            let plus = f(&probe);
            probe[j] = x[j] - h;
            let minus = f(&probe);
            probe[j] = x[j];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Distance (in `u = x/τ` units) from the nearest change of active set:
/// `min_i min(|u_i - θ|, |u_i - θ - 1|)`.
pub fn boundary_margin(x: &[f64], result: &ProjectionResult) -> f64 {
    x.iter()
        .map(|&v| {
            let t = v / result.spec.tau - result.theta;
            t.abs().min((t - 1.0).abs())
        })
        .fold(f64::INFINITY, f64::min)
}

/// Maximizes `<x, y>` over all binary `y` with exactly `k` ones.
///
/// Subsets are visited in lexicographic order and only a strictly better
/// inner product replaces the incumbent, so ties resolve to the smallest
/// indices, same as [`crate::hard_topk`].
pub fn exhaustive_topk(x: &[f64], k: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n > MAX_EXHAUSTIVE_TOPK_N {
        return Err(Error::Size {
            n,
            max: MAX_EXHAUSTIVE_TOPK_N,
        });
    }
    if k > n {
        return Err(Error::arg(format!("k = {k} exceeds n = {n}")));
    }
    check_finite(x, "score vector")?;
    if k == 0 {
        return Ok(vec![0.0; n]);
    }

    let mut idx: Vec<usize> = (0..k).collect();
    let mut best_idx = idx.clone();
    let mut best = f64::NEG_INFINITY;
    let scale = 1.0 + x.iter().map(|v| v.abs()).sum::<f64>();
    loop {
        let score: f64 = idx.iter().map(|&i| x[i]).sum();
        if score > best + 1e-12 * scale {
            best = score;
            best_idx.copy_from_slice(&idx);
        }
        // advance to the next k-subset in lexicographic order
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }

    let mut y = vec![0.0; n];
    for i in best_idx {
        y[i] = 1.0;
    }
    Ok(y)
}
