//! Browser bindings for the interactive page in `www/`.
//!
//! Each exported function is a thin wrapper over a plain Rust function of
//! the same name with a `_impl` suffix, so the logic is testable natively.

use wasm_bindgen::prelude::*;

use hypersimplex::losses::hypersimplex_loss;
use hypersimplex::{hard_topk, project, HypersimplexSpec};

fn spec_for(n: usize, k: usize, tau: f64) -> Result<HypersimplexSpec, String> {
    HypersimplexSpec::new(n, k, tau).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub struct Projection {
    y: Vec<f64>,
    hard: Vec<f64>,
    theta: f64,
    active: Vec<u32>,
}

#[wasm_bindgen]
impl Projection {
    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    /// Hard top-k indicator of the same scores.
    #[wasm_bindgen(getter)]
    pub fn hard(&self) -> Vec<f64> {
        self.hard.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn theta(&self) -> f64 {
        self.theta
    }

    #[wasm_bindgen(getter)]
    pub fn active(&self) -> Vec<u32> {
        self.active.clone()
    }
}

pub fn soft_topk_impl(x: &[f64], k: usize, tau: f64) -> Result<Projection, String> {
    let r = project(x, &spec_for(x.len(), k, tau)?).map_err(|e| e.to_string())?;
    Ok(Projection {
        hard: hard_topk(x, k).map_err(|e| e.to_string())?,
        theta: r.theta,
        active: r.active.iter().map(|&i| i as u32).collect(),
        y: r.y,
    })
}

/// Projection of `x` at temperature `tau`.
#[wasm_bindgen]
pub fn soft_topk(x: &[f64], k: usize, tau: f64) -> Result<Projection, JsError> {
    soft_topk_impl(x, k, tau).map_err(|e| JsError::new(&e))
}

pub fn tau_path_impl(x: &[f64], k: usize, tau_min: f64, tau_max: f64, steps: usize) -> Result<Vec<f64>, String> {
    if !(tau_min > 0.0 && tau_max >= tau_min && tau_max.is_finite()) || steps < 2 {
        return Err("need 0 < tau_min <= tau_max and at least two steps".into());
    }
    let (lo, hi) = (tau_min.ln(), tau_max.ln());
    let mut out = Vec::with_capacity(steps * (x.len() + 1));
    for s in 0..steps {
        let tau = (lo + (hi - lo) * s as f64 / (steps - 1) as f64).exp();
        out.push(tau);
        out.extend(project(x, &spec_for(x.len(), k, tau)?).map_err(|e| e.to_string())?.y);
    }
    Ok(out)
}

/// Projections on a log-spaced temperature grid. Row `s` of the flat result
/// is `[tau_s, y_1, ..., y_n]`.
#[wasm_bindgen]
pub fn tau_path(x: &[f64], k: usize, tau_min: f64, tau_max: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    tau_path_impl(x, k, tau_min, tau_max, steps).map_err(|e| JsError::new(&e))
}

pub fn loss_and_gradient_impl(x: &[f64], target: &[f64], tau: f64) -> Result<Vec<f64>, String> {
    let k = target.iter().filter(|&&t| t == 1.0).count();
    let eval = hypersimplex_loss(x, target, &spec_for(x.len(), k, tau)?).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(x.len() + 1);
    out.push(eval.value);
    out.extend(eval.grad);
    Ok(out)
}

/// HyperSimplex loss against a binary target, with `k` taken from the
/// target. Returns `[loss, dL/dx_1, ..., dL/dx_n]`.
#[wasm_bindgen]
pub fn loss_and_gradient(x: &[f64], target: &[f64], tau: f64) -> Result<Vec<f64>, JsError> {
    loss_and_gradient_impl(x, target, tau).map_err(|e| JsError::new(&e))
}
