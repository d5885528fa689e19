//! Randomized verification suite shared by the CLI and the acceptance tests.
//!
//! Every check draws its instances from the caller's generator and reports
//! the number of cases, the number of failures and the worst observed error
//! against its tolerance.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::backward::jvp;
use crate::error::{Error, Result};
use crate::isotonic::{pav_decreasing, project_sorted_via_isotonic};
use crate::losses::{estimate_k_per_class, one_hot};
use crate::oracle::{boundary_margin, brute_force_project, fd_directional, fd_gradient, MAX_BRUTE_FORCE_N};
use crate::projection::{project, project_bisect, HypersimplexSpec, ProjectionResult};
use crate::trainer::{loss_layer, LossKind, MlpModel};

/// A forward solver under test. Normally [`project`]; the CLI swaps in a
/// deliberately broken one to exercise the failure path.
pub type Solver<'a> = &'a dyn Fn(&[f64], &HypersimplexSpec) -> Result<ProjectionResult>;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub worst: f64,
    pub tol: f64,
}

impl CheckOutcome {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            cases: 0,
            failures: 0,
            worst: 0.0,
            tol,
        }
    }

    fn record(&mut self, err: f64) {
        self.cases += 1;
        if err.is_nan() || err > self.tol {
            self.failures += 1;
        }
        if err.is_nan() || err > self.worst {
            self.worst = err;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Random scores of length `n`. About one vector in five is drawn from a
/// small integer grid so ties are common.
pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    if rng.random_bool(0.2) {
        (0..n).map(|_| f64::from(rng.random_range(-3i32..=3))).collect()
    } else {
        let scale = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
    }
}

/// `(x, spec)` with `n ∈ [n_min, n_max]`, `k ∈ [0, n]` and `τ` from `taus`.
pub fn random_instance<R: Rng>(
    rng: &mut R,
    n_min: usize,
    n_max: usize,
    taus: &[f64],
) -> Result<(Vec<f64>, HypersimplexSpec)> {
    let n = rng.random_range(n_min..=n_max);
    let k = rng.random_range(0..=n);
    let tau = taus[rng.random_range(0..taus.len())];
    Ok((random_vector(rng, n), HypersimplexSpec::new(n, k, tau)?))
}

/// Fast solver against the enumerated KKT oracle: max-norm gap in `y`, and in
/// `θ` whenever some coordinate is strictly inside the box.
pub fn oracle_agreement<R: Rng>(
    rng: &mut R,
    cases: usize,
    n_max: usize,
    taus: &[f64],
    solver: Solver,
) -> Result<CheckOutcome> {
    if n_max > MAX_BRUTE_FORCE_N {
        return Err(Error::Size {
            n: n_max,
            max: MAX_BRUTE_FORCE_N,
        });
    }
    let mut out = CheckOutcome::new("oracle agreement", 1e-8);
    for _ in 0..cases {
        let (x, spec) = random_instance(rng, 2, n_max.max(2), taus)?;
        let fast = solver(&x, &spec)?;
        let cert = brute_force_project(&x, &spec)?;
        let mut err = max_abs_diff(&fast.y, &cert.y);
        if !cert.active.is_empty() {
            err = err.max((fast.theta - cert.theta).abs());
        }
        if !cert.is_valid() {
            err = f64::NAN;
        }
        out.record(err);
    }
    Ok(out)
}

/// Box and sum constraints, plus the clip form `y_i = clip(u_i - θ, 0, 1)`.
pub fn feasibility<R: Rng>(rng: &mut R, cases: usize, n_max: usize, solver: Solver) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("feasibility", 1e-9);
    for _ in 0..cases {
        let (x, spec) = random_instance(rng, 1, n_max, &[0.1, 1.0, 10.0])?;
        let r = solver(&x, &spec)?;
        let sum_err = (r.y.iter().sum::<f64>() - spec.k as f64).abs();
        let box_err = r.y.iter().map(|&v| (-v).max(v - 1.0).max(0.0)).fold(0.0, f64::max);
        let clip_err = if r.active.is_empty() {
            0.0
        } else {
            r.active
                .iter()
                .map(|&i| (r.y[i] - (x[i] / spec.tau - r.theta)).abs())
                .fold(0.0, f64::max)
        };
        out.record(sum_err.max(box_err).max(clip_err));
    }
    Ok(out)
}

/// Counts inversions (`x_i >= x_j` but `y_i < y_j`) between neighbours in
/// score order. By transitivity zero means no pair at all is inverted.
pub fn order_preservation<R: Rng>(rng: &mut R, cases: usize, n_max: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("order preservation", 0.0);
    for _ in 0..cases {
        let (x, spec) = random_instance(rng, 2, n_max, &[0.1, 0.5, 1.0, 2.0, 10.0])?;
        let y = project(&x, &spec)?.y;
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[b].total_cmp(&x[a]));
        let inversions = idx.windows(2).filter(|w| y[w[0]] < y[w[1]]).count();
        out.record(inversions as f64);
    }
    Ok(out)
}

pub fn translation_invariance<R: Rng>(rng: &mut R, cases: usize, n_max: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("translation invariance", 1e-9);
    for _ in 0..cases {
        let (x, spec) = random_instance(rng, 1, n_max, &[0.5, 1.0, 2.0])?;
        let c: f64 = rng.random_range(-50.0..50.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        out.record(max_abs_diff(&project(&x, &spec)?.y, &project(&shifted, &spec)?.y));
    }
    Ok(out)
}

/// Worst excess of `‖F(x) - F(z)‖` over `‖x - z‖/τ`. Half the pairs are
/// independent draws, half small perturbations.
pub fn lipschitz<R: Rng>(rng: &mut R, cases: usize, n_max: usize, tau: f64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("lipschitz", 1e-9);
    for _ in 0..cases {
        let (x, spec) = random_instance(rng, 1, n_max, &[tau])?;
        let z: Vec<f64> = if rng.random_bool(0.5) {
            random_vector(rng, x.len())
        } else {
            let eps: f64 = rng.random_range(1e-6..1.0);
            x.iter().map(|v| v + eps * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let fx = project(&x, &spec)?.y;
        let fz = project(&z, &spec)?.y;
        let lhs = norm(&fx.iter().zip(&fz).map(|(a, b)| a - b).collect::<Vec<_>>());
        let rhs = norm(&x.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>()) / tau;
        out.record((lhs - rhs).max(0.0));
    }
    Ok(out)
}

/// Breakpoint scan against bisection, and against the sorted-input solver on
/// the sorted copy.
pub fn solver_agreement<R: Rng>(rng: &mut R, cases: usize, n_max: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("solver agreement", 1e-9);
    for _ in 0..cases {
        let (x, spec) = random_instance(rng, 1, n_max, &[0.1, 1.0, 10.0])?;
        let fast = project(&x, &spec)?;
        let bisect = project_bisect(&x, &spec, 1e-12)?;
        let mut sorted = x.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let fast_sorted = project(&sorted, &spec)?.y;
        let iso = project_sorted_via_isotonic(&sorted, &spec)?;
        out.record(max_abs_diff(&fast.y, &bisect.y).max(max_abs_diff(&fast_sorted, &iso)));
    }
    Ok(out)
}

/// Projection of a point already on the polytope returns it, at `τ = 1`.
pub fn idempotence<R: Rng>(rng: &mut R, cases: usize, n_max: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("idempotence", 1e-9);
    for _ in 0..cases {
        let (x, spec) = random_instance(rng, 1, n_max, &[1.0])?;
        let y = project(&x, &spec)?.y;
        out.record(max_abs_diff(&project(&y, &spec)?.y, &y));
    }
    Ok(out)
}

/// Sorted-input solver equals the general one; PAV is idempotent and keeps
/// the sum of its input.
pub fn isotonic_reduction<R: Rng>(rng: &mut R, cases: usize, n_max: usize) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("isotonic reduction", 1e-9);
    for _ in 0..cases {
        let (mut x, spec) = random_instance(rng, 1, n_max, &[0.1, 1.0, 10.0])?;
        let raw = x.clone();
        x.sort_by(|a, b| b.total_cmp(a));
        let reduction = max_abs_diff(&project_sorted_via_isotonic(&x, &spec)?, &project(&x, &spec)?.y);

        let fit = pav_decreasing(&raw)?;
        let again = pav_decreasing(&fit.fitted)?;
        let scale = 1.0 + raw.iter().map(|v| v.abs()).sum::<f64>();
        let mean_err = (fit.fitted.iter().sum::<f64>() - raw.iter().sum::<f64>()).abs() / scale;
        out.record(reduction.max(max_abs_diff(&again.fitted, &fit.fitted)).max(mean_err));
    }
    Ok(out)
}

/// Relative error `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let denom = norm(a).max(norm(b));
    if denom < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / denom
    }
}

/// Analytic JVP against central differences at `h = 1e-6` (in `u` units),
/// for points whose every coordinate is at least `1e-3` from a breakpoint.
pub fn jvp_gradcheck<R: Rng>(rng: &mut R, cases: usize, n_max: usize) -> Result<CheckOutcome> {
    const MARGIN: f64 = 1e-3;
    let mut out = CheckOutcome::new("jvp vs finite differences", 1e-5);
    let mut draws = 0usize;
    while out.cases < cases {
        draws += 1;
        if draws > 1000 * cases.max(1) {
            return Err(Error::arg("could not draw enough screened points"));
        }
        let n = rng.random_range(2..=n_max.max(2));
        let k = rng.random_range(1..n);
        let tau = [0.1, 0.5, 1.0, 2.0, 10.0][rng.random_range(0..5)];
        let spec = HypersimplexSpec::new(n, k, tau)?;
        let x: Vec<f64> = (0..n).map(|_| tau * 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let r = project(&x, &spec)?;
        if r.active.is_empty() || boundary_margin(&x, &r) < MARGIN {
            continue;
        }
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let analytic = jvp(&r, &v)?;
        let fd = fd_directional(&x, &spec, &v, 1e-6)?;
        out.record(relative_error(&analytic, &fd));
    }
    Ok(out)
}

/// Backward pass of a `5 → 4 → 3` network on a batch of 8 against central
/// differences of the loss, for each loss in turn. Batches where a
/// projection coordinate sits within `1e-4` of a breakpoint are redrawn.
pub fn mlp_gradcheck<R: Rng>(rng: &mut R, cases: usize) -> Result<CheckOutcome> {
    let (d, h, classes, batch) = (5, 4, 3, 8);
    let labels: Vec<usize> = (0..batch).map(|i| i % classes).collect();
    let k_per_class = estimate_k_per_class(one_hot(&labels, classes)?.view())?;
    let mut out = CheckOutcome::new("network gradient vs finite differences", 1e-4);
    let mut draws = 0usize;
    while out.cases < cases * LossKind::ALL.len() {
        draws += 1;
        if draws > 1000 * cases.max(1) {
            return Err(Error::arg("could not draw enough screened networks"));
        }
        let tau = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let model = MlpModel::init(d, h, classes, rng);
        let x = Array2::from_shape_fn((batch, d), |_| rng.random_range(-1.0..1.0));
        let logits = model.logits(x.view());
        let mut near_boundary = false;
        for (c, &k) in k_per_class.iter().enumerate() {
            let col = logits.column(c).to_vec();
            let r = project(&col, &HypersimplexSpec::new(batch, k, tau)?)?;
            near_boundary |= boundary_margin(&col, &r) < 1e-4;
        }
        if near_boundary {
            continue;
        }
        for kind in LossKind::ALL {
            let (_, g) = model.loss_and_grads(x.view(), &labels, kind, tau)?;
            let f = |p: &[f64]| {
                let mut m = model.clone();
                m.set_params(p);
                loss_layer(kind, m.logits(x.view()).view(), &labels, tau).map_or(f64::NAN, |v| v.0)
            };
            let fd = fd_gradient(f, &model.params(), 1e-6);
            out.record(relative_error(&g.flatten(), &fd));
        }
    }
    Ok(out)
}
