//! Pool-adjacent-violators and the sorted-input form of the projection.
//!
//! Because the projection preserves order, on nonincreasing input it also
//! solves the isotonic problem
//!
//! ```text
//! argmin ‖u - y‖²  s.t.  y ∈ [0,1]^n, Σ y = k, y_1 ≥ … ≥ y_n
//! ```
//!
//! [`project_sorted_via_isotonic`] solves that problem on its own path: PAV
//! followed by a binary search over the breakpoints of the clipped sum using
//! prefix sums.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::projection::{check_finite, HypersimplexSpec};

/// A pooled run `[start, end]` (inclusive, 0-based) and its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Block {
    pub start: usize,
    pub end: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotonicFit {
    pub fitted: Vec<f64>,
    pub blocks: Vec<Block>,
}

/// Least-squares nonincreasing fit of `v`.
///
/// Single pass with a stack of blocks; each element is pushed once and
/// merged at most once, so the cost is `O(n)`.
pub fn pav_decreasing(v: &[f64]) -> Result<IsotonicFit> {
    check_finite(v, "isotonic input")?;
    // (start, len, sum)
    let mut stack: Vec<(usize, usize, f64)> = Vec::with_capacity(v.len());
    for (i, &value) in v.iter().enumerate() {
        let mut block = (i, 1usize, value);
        while let Some(&(start, len, sum)) = stack.last() {
            // violation: the new block's mean exceeds its left neighbour's
            if block.2 * len as f64 > sum * block.1 as f64 {
                stack.pop();
                block = (start, len + block.1, sum + block.2);
            } else {
                break;
            }
        }
        stack.push(block);
    }

    let mut fitted = Vec::with_capacity(v.len());
    let blocks = stack
        .into_iter()
        .map(|(start, len, sum)| {
            let mean = sum / len as f64;
            fitted.extend(std::iter::repeat_n(mean, len));
            Block {
                start,
                end: start + len - 1,
                mean,
            }
        })
        .collect();
    Ok(IsotonicFit { fitted, blocks })
}

/// The projection of `x_sorted_desc / τ` onto the monotone part of the
/// hypersimplex. Input must be nonincreasing.
pub fn project_sorted_via_isotonic(x_sorted_desc: &[f64], spec: &HypersimplexSpec) -> Result<Vec<f64>> {
    let n = x_sorted_desc.len();
    if n != spec.n {
        return Err(Error::arg(format!("input has length {n} but spec.n = {}", spec.n)));
    }
    check_finite(x_sorted_desc, "sorted input")?;
    if let Some(i) = x_sorted_desc.windows(2).position(|w| w[0] < w[1]) {
        return Err(Error::arg(format!("input is not nonincreasing at index {}", i + 1)));
    }
    let u: Vec<f64> = x_sorted_desc.iter().map(|&v| v / spec.tau).collect();
    // Identity on sorted input; kept so the monotone constraint is enforced by
    // construction rather than assumed.
    let w = pav_decreasing(&u)?.fitted;

    let k = spec.k;
    if k == 0 {
        return Ok(vec![0.0; n]);
    }
    if k == n {
        return Ok(vec![1.0; n]);
    }

    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &v in &w {
        prefix.push(prefix.last().unwrap() + v);
    }
    // With w nonincreasing: #{w_i > θ} and #{w_i - 1 >= θ} by binary search.
    let counts = |theta: f64| {
        let above = w.partition_point(|&v| v > theta);
        let ones = w.partition_point(|&v| v - 1.0 >= theta);
        (ones, above)
    };
    let mass = |theta: f64| {
        let (ones, above) = counts(theta);
        ones as f64 + (prefix[above] - prefix[ones]) - (above - ones) as f64 * theta
    };
    let target = k as f64;

    // Breakpoints θ ∈ {w_i} ∪ {w_i - 1}, each family nonincreasing in i. The
    // mass is nonincreasing in θ, hence nondecreasing along each family.
    let first_reaching = |family: &dyn Fn(usize) -> f64| -> Option<f64> {
        let (mut lo, mut hi) = (0usize, n);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if mass(family(mid)) < target {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        (lo < n).then(|| family(lo))
    };
    let lo = [
        first_reaching(&|i| w[i]),
        first_reaching(&|i| w[i] - 1.0),
    ]
    .into_iter()
    .flatten()
    .fold(f64::NEG_INFINITY, f64::max);

    // On the piece just above `lo` the partition is fixed; pick a probe inside
    // it and solve the linear equation for θ.
    let hi = w
        .iter()
        .flat_map(|&v| [v, v - 1.0])
        .filter(|&b| b > lo)
        .fold(f64::INFINITY, f64::min);
    let probe = if hi.is_finite() { 0.5 * (lo + hi) } else { lo + 1.0 };
    let (ones, above) = counts(probe);
    let theta = if above > ones {
        (prefix[above] - prefix[ones] - (target - ones as f64)) / (above - ones) as f64
    } else {
        lo
    };
    Ok(w.iter().map(|&v| (v - theta).clamp(0.0, 1.0)).collect())
}
