//! Soft binary-argmax@k and the HyperSimplex loss.
//!
//! The central operator maps a score vector `x` to the Euclidean projection
//! of `x / tau` onto the `(n, k)`-hypersimplex
//!
//! ```text
//! Δ(n, k) = { y ∈ [0, 1]^n : Σ y_i = k }
//! ```
//!
//! As `tau -> 0` the projection collapses onto the indicator of the `k`
//! largest scores (binary-argmax@k); larger `tau` pulls the output into the
//! interior of the polytope. The solution has the closed form
//! `y_i = clip(x_i / tau - theta, 0, 1)` with `theta` chosen so that the
//! coordinates sum to `k`, which makes the forward pass a sort plus a linear
//! scan and the Jacobian a centering operator on the active coordinates.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`projection`] | hard top-k, the breakpoint-scan projection, a bisection cross-check |
//! | [`isotonic`] | pool-adjacent-violators and the sorted-input reduction |
//! | [`backward`] | JVP / VJP of the projection and the loss-gradient assembly |
//! | [`losses`] | HyperSimplex loss (binary and multiclass) and the baselines |
//! | [`oracle`] | brute-force references used by the tests and the CLI |
//! | [`trainer`] | a small MLP harness for batch-size sweeps |
//! | [`stats`] | paired t-test |
//! | [`bench`] | median-of-R timing and doubling-ratio scaling study |
//! | [`verify`] | randomized check suite behind `verify` and `gradcheck` |
//!
//! ```
//! use hypersimplex::{project, HypersimplexSpec};
//!
//! let spec = HypersimplexSpec::new(4, 2, 1.0).unwrap();
//! let r = project(&[3.0, 1.0, 0.5, -2.0], &spec).unwrap();
//! assert_eq!(r.y, vec![1.0, 0.75, 0.25, 0.0]);
//! assert_eq!(r.active, vec![1, 2]);
//! ```

pub mod backward;
pub mod bench;
mod error;
pub mod isotonic;
pub mod losses;
pub mod oracle;
pub mod projection;
pub mod stats;
pub mod trainer;
pub mod verify;

pub use backward::{jvp, loss_grad_from_residual, vjp};
pub use error::{Error, Result};
pub use projection::{
    hard_topk, kth_largest, project, project_batch, project_bisect, HypersimplexSpec,
    ProjectionResult, ScoreVector,
};
