//! Derivatives of the projection.
//!
//! On the active set `A` the projection is `y_A = u_A - θ(u)` with
//! `θ = (Σ_A u - k + |at_one|) / |A|`, so its Jacobian with respect to
//! `u = x/τ` is the centering matrix `I - 11ᵀ/|A|` on `A` and zero
//! elsewhere. It is symmetric and idempotent, and `jvp` and `vjp` coincide.
//!
//! Both products here differentiate with respect to `u`. The `1/τ` from the
//! chain rule is applied only in [`loss_grad_from_residual`].

use crate::error::{Error, Result};
use crate::projection::{check_finite, ProjectionResult};

fn center_on_active(result: &ProjectionResult, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != result.n() {
        return Err(Error::arg(format!(
            "tangent has length {} but the projection has n = {}",
            v.len(),
            result.n()
        )));
    }
    check_finite(v, "tangent vector")?;
    let mut out = vec![0.0; v.len()];
    if result.active.is_empty() {
        return Ok(out);
    }
    let mean = result.active.iter().map(|&i| v[i]).sum::<f64>() / result.active.len() as f64;
    for &i in &result.active {
        out[i] = v[i] - mean;
    }
    Ok(out)
}

/// Jacobian-vector product `(∂y/∂u) v`.
pub fn jvp(result: &ProjectionResult, v: &[f64]) -> Result<Vec<f64>> {
    center_on_active(result, v)
}

/// Vector-Jacobian product `uᵀ (∂y/∂u)`. Equal to [`jvp`] since the Jacobian
/// is symmetric.
pub fn vjp(result: &ProjectionResult, u: &[f64]) -> Result<Vec<f64>> {
    center_on_active(result, u)
}

/// Gradient of `½‖ŷ - y‖²` with respect to the unscaled scores `x`, given
/// `residual = ŷ - y`.
///
/// Coordinates on a bound get zero. That is the one-sided choice at points
/// where the projection is only directionally differentiable.
pub fn loss_grad_from_residual(result: &ProjectionResult, residual: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::arg(format!("temperature must be positive and finite, got {tau}")));
    }
    let mut g = vjp(result, residual)?;
    let inv = 1.0 / tau;
    g.iter_mut().for_each(|v| *v *= inv);
    Ok(g)
}
