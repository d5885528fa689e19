//! The HyperSimplex loss and the baseline classification losses.
//!
//! Baselines take an `n × C` score matrix and class labels and reduce by the
//! mean over samples. The HyperSimplex loss is a plain sum, matching its
//! definition; the trainer rescales it by the batch size.

use ndarray::{Array2, ArrayView2, Axis};

use crate::backward::loss_grad_from_residual;
use crate::error::{Error, Result};
use crate::projection::{project, HypersimplexSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval<G> {
    pub value: f64,
    pub grad: G,
    /// Number of projections that came out fully saturated with `0 < k < n`
    /// (zero Jacobian). Always zero for the baselines.
    pub saturated: usize,
}

/// Logits, one-hot targets and the per-class `(k_c, τ_c)` for the
/// multiclass loss. Column `c` of `logits` is the score vector projected for
/// class `c`, so the projection runs over the batch dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBatch {
    pub logits: Array2<f64>,
    pub targets: Array2<f64>,
    pub k_per_class: Vec<usize>,
    pub tau_per_class: Vec<f64>,
}

impl ClassBatch {
    pub fn new(
        logits: Array2<f64>,
        targets: Array2<f64>,
        k_per_class: Vec<usize>,
        tau_per_class: Vec<f64>,
    ) -> Result<Self> {
        if logits.dim() != targets.dim() {
            return Err(Error::arg(format!(
                "logits {:?} and targets {:?} differ in shape",
                logits.dim(),
                targets.dim()
            )));
        }
        let (n, classes) = logits.dim();
        if k_per_class.len() != classes || tau_per_class.len() != classes {
            return Err(Error::arg(format!(
                "expected {classes} per-class k and tau values, got {} and {}",
                k_per_class.len(),
                tau_per_class.len()
            )));
        }
        check_one_hot(targets.view())?;
        if let Some(&k) = k_per_class.iter().find(|&&k| k > n) {
            return Err(Error::arg(format!("k_c = {k} exceeds batch size {n}")));
        }
        if let Some(&t) = tau_per_class.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::arg(format!("tau_c must be positive, got {t}")));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("logits contain non-finite entries"));
        }
        Ok(Self {
            logits,
            targets,
            k_per_class,
            tau_per_class,
        })
    }

    /// Targets from labels, `k_c` from the batch's class counts, one shared `τ`.
    pub fn from_labels(logits: Array2<f64>, labels: &[usize], tau: f64) -> Result<Self> {
        let targets = one_hot(labels, logits.ncols())?;
        if targets.nrows() != logits.nrows() {
            return Err(Error::arg(format!(
                "{} labels for {} logit rows",
                labels.len(),
                logits.nrows()
            )));
        }
        let k = estimate_k_per_class(targets.view())?;
        let classes = logits.ncols();
        Self::new(logits, targets, k, vec![tau; classes])
    }
}

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((labels.len(), classes));
    for (i, &c) in labels.iter().enumerate() {
        if c >= classes {
            return Err(Error::arg(format!("label {c} at row {i} out of range for {classes} classes")));
        }
        out[[i, c]] = 1.0;
    }
    Ok(out)
}

fn check_one_hot(targets: ArrayView2<f64>) -> Result<()> {
    for (i, row) in targets.rows().into_iter().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::arg(format!("target row {i} is not one-hot")));
        }
    }
    Ok(())
}

fn check_scores(scores: ArrayView2<f64>, labels: &[usize]) -> Result<()> {
    let (n, classes) = scores.dim();
    if classes < 2 {
        return Err(Error::arg(format!("need at least 2 classes, got {classes}")));
    }
    if labels.len() != n {
        return Err(Error::arg(format!("{} labels for {n} score rows", labels.len())));
    }
    if let Some((i, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= classes) {
        return Err(Error::arg(format!("label {c} at row {i} out of range for {classes} classes")));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("scores contain non-finite entries"));
    }
    Ok(())
}

/// Row argmax, ties to the smallest class index.
pub fn argmax_rows(scores: ArrayView2<f64>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Fraction of rows whose argmax differs from the label.
pub fn zero_one_loss(scores: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    check_scores(scores, labels)?;
    if labels.is_empty() {
        return Ok(0.0);
    }
    let wrong = argmax_rows(scores)
        .into_iter()
        .zip(labels)
        .filter(|(p, y)| p != *y)
        .count();
    Ok(wrong as f64 / labels.len() as f64)
}

/// `(1/n) Σ_i Σ_c (s_ic - [y_i = c])²`.
pub fn squared_loss(scores: ArrayView2<f64>, labels: &[usize]) -> Result<LossEval<Array2<f64>>> {
    check_scores(scores, labels)?;
    let n = labels.len().max(1) as f64;
    let diff = &scores - &one_hot(labels, scores.ncols())?;
    Ok(LossEval {
        value: diff.iter().map(|d| d * d).sum::<f64>() / n,
        grad: diff * (2.0 / n),
        saturated: 0,
    })
}

/// Mean negative log-softmax of the true class.
pub fn cross_entropy_loss(scores: ArrayView2<f64>, labels: &[usize]) -> Result<LossEval<Array2<f64>>> {
    check_scores(scores, labels)?;
    let n = labels.len().max(1) as f64;
    let mut grad = Array2::zeros(scores.dim());
    let mut value = 0.0;
    for (i, (row, mut g)) in scores.rows().into_iter().zip(grad.rows_mut()).enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + z.ln();
        value += log_z - row[labels[i]];
        for (c, gc) in g.iter_mut().enumerate() {
            *gc = (row[c] - log_z).exp() / n;
        }
        g[labels[i]] -= 1.0 / n;
    }
    Ok(LossEval {
        value: value / n,
        grad,
        saturated: 0,
    })
}

/// Multiclass margin loss `(1/n) Σ_i Σ_{c≠y_i} max(0, 1 + s_ic - s_iy_i)`.
pub fn hinge_loss(scores: ArrayView2<f64>, labels: &[usize]) -> Result<LossEval<Array2<f64>>> {
    check_scores(scores, labels)?;
    let n = labels.len().max(1) as f64;
    let mut grad = Array2::zeros(scores.dim());
    let mut value = 0.0;
    for (i, (row, mut g)) in scores.rows().into_iter().zip(grad.rows_mut()).enumerate() {
        let y = labels[i];
        for c in 0..row.len() {
            if c == y {
                continue;
            }
            let margin = 1.0 + row[c] - row[y];
            if margin > 0.0 {
                value += margin;
                g[c] += 1.0 / n;
                g[y] -= 1.0 / n;
            }
        }
    }
    Ok(LossEval {
        value: value / n,
        grad,
        saturated: 0,
    })
}

/// `½‖project(x, spec).y - y‖²` and its gradient in `x`.
pub fn hypersimplex_loss(x: &[f64], y: &[f64], spec: &HypersimplexSpec) -> Result<LossEval<Vec<f64>>> {
    if y.len() != x.len() {
        return Err(Error::arg(format!("target has length {} but x has {}", y.len(), x.len())));
    }
    if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::arg(format!("target entry {} at index {i} is not binary", y[i])));
    }
    let r = project(x, spec)?;
    let residual: Vec<f64> = r.y.iter().zip(y).map(|(a, b)| a - b).collect();
    let value = 0.5 * residual.iter().map(|d| d * d).sum::<f64>();
    let grad = loss_grad_from_residual(&r, &residual, spec.tau)?;
    Ok(LossEval {
        value,
        grad,
        saturated: usize::from(r.is_saturated()),
    })
}

/// `k_c` = number of rows labelled `c`.
pub fn estimate_k_per_class(targets: ArrayView2<f64>) -> Result<Vec<usize>> {
    check_one_hot(targets)?;
    Ok(targets
        .sum_axis(Axis(0))
        .iter()
        .map(|&s| s.round() as usize)
        .collect())
}

/// `½ Σ_c ‖p_c - y_c‖²` with `p_c` the projection of logit column `c` onto
/// the `(n, k_c)`-hypersimplex at temperature `τ_c`.
pub fn hypersimplex_loss_multiclass(batch: &ClassBatch) -> Result<LossEval<Array2<f64>>> {
    let (n, classes) = batch.logits.dim();
    let mut grad = Array2::zeros((n, classes));
    let mut value = 0.0;
    let mut saturated = 0;
    for c in 0..classes {
        let x = batch.logits.column(c).to_vec();
        let y = batch.targets.column(c).to_vec();
        let spec = HypersimplexSpec::new(n, batch.k_per_class[c], batch.tau_per_class[c])?;
        let eval = hypersimplex_loss(&x, &y, &spec)?;
        value += eval.value;
        saturated += eval.saturated;
        grad.column_mut(c)
            .iter_mut()
            .zip(eval.grad)
            .for_each(|(g, v)| *g = v);
    }
    Ok(LossEval {
        value,
        grad,
        saturated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::fd_gradient;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / norm(a).max(norm(b)).max(1e-12)
    }

    type MatrixLoss = fn(ArrayView2<f64>, &[usize]) -> Result<LossEval<Array2<f64>>>;

    fn fd_check(loss: MatrixLoss, scores: &Array2<f64>, labels: &[usize]) -> f64 {
        let shape = scores.dim();
        let analytic = loss(scores.view(), labels).unwrap().grad;
        let f = |flat: &[f64]| {
            let m = Array2::from_shape_vec(shape, flat.to_vec()).unwrap();
            loss(m.view(), labels).unwrap().value
        };
        let flat: Vec<f64> = scores.iter().copied().collect();
        let fd = fd_gradient(f, &flat, 1e-6);
        rel_err(&analytic.iter().copied().collect::<Vec<_>>(), &fd)
    }

    #[test]
    fn zero_one_examples() {
        let perfect = array![[2.0, 0.0], [0.0, 3.0]];
        assert_eq!(zero_one_loss(perfect.view(), &[0, 1]).unwrap(), 0.0);
        assert_eq!(zero_one_loss(perfect.view(), &[1, 0]).unwrap(), 1.0);
        let s = array![[0.0, 1.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 5.0]];
        assert!((zero_one_loss(s.view(), &[1, 1, 2]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // ties go to the smallest class
        assert_eq!(zero_one_loss(array![[1.0, 1.0]].view(), &[0]).unwrap(), 0.0);
        assert!(zero_one_loss(perfect.view(), &[0, 2]).is_err());
        assert!(zero_one_loss(array![[1.0], [2.0]].view(), &[0, 0]).is_err());
    }

    #[test]
    fn squared_examples() {
        let s = array![[1.0, 0.0], [0.0, 1.0]];
        let e = squared_loss(s.view(), &[0, 1]).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.grad.iter().all(|&g| g == 0.0));
        let e = squared_loss(array![[0.5, 0.5]].view(), &[0]).unwrap();
        assert!((e.value - 0.5).abs() < 1e-15);
        assert_eq!(e.grad, array![[-1.0, 1.0]]);
    }

    #[test]
    fn cross_entropy_and_hinge_examples() {
        for c in 2..6 {
            let e = cross_entropy_loss(Array2::zeros((3, c)).view(), &[0, 1, 0]).unwrap();
            assert!((e.value - (c as f64).ln()).abs() < 1e-12);
        }
        let s = array![[3.0, 1.5, 2.0], [0.0, 4.0, -1.0]];
        let e = hinge_loss(s.view(), &[0, 1]).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.grad.iter().all(|&g| g == 0.0));
        // large logits stay finite
        let e = cross_entropy_loss(array![[1000.0, -1000.0]].view(), &[1]).unwrap();
        assert!((e.value - 2000.0).abs() < 1e-9);
    }

    #[test]
    fn baseline_gradients_match_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let (n, c) = (rng.random_range(1..8), rng.random_range(2..6));
            let scores = Array2::from_shape_fn((n, c), |_| rng.random_range(-2.0..2.0));
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
            assert!(fd_check(squared_loss, &scores, &labels) < 1e-6);
            assert!(fd_check(cross_entropy_loss, &scores, &labels) < 1e-6);
            assert!(fd_check(hinge_loss, &scores, &labels) < 1e-6);
        }
    }

    #[test]
    fn hypersimplex_reference_instance() {
        let x = [3.0, 1.0, 0.5, -2.0];
        let y = [1.0, 1.0, 0.0, 0.0];
        let spec = HypersimplexSpec::new(4, 2, 1.0).unwrap();
        let e = hypersimplex_loss(&x, &y, &spec).unwrap();
        assert!((e.value - 0.0625).abs() < 1e-12);
        for (a, b) in e.grad.iter().zip(&[0.0, -0.25, 0.25, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let fd = fd_gradient(|x| hypersimplex_loss(x, &y, &spec).unwrap().value, &x, 1e-6);
        assert!(rel_err(&e.grad, &fd) < 1e-6);
    }

    #[test]
    fn hypersimplex_zero_and_saturated() {
        let spec = HypersimplexSpec::new(3, 1, 1.0).unwrap();
        let e = hypersimplex_loss(&[5.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &spec).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.grad, vec![0.0; 3]);
        let spec = HypersimplexSpec::new(4, 2, 1.0).unwrap();
        let e = hypersimplex_loss(&[5.0, 5.0, 0.0, 0.0], &[1.0, 1.0, 0.0, 0.0], &spec).unwrap();
        assert_eq!(e.grad, vec![0.0; 4]);
        assert_eq!(e.saturated, 1);
        assert!(hypersimplex_loss(&[1.0, 2.0], &[0.5, 0.5], &HypersimplexSpec::new(2, 1, 1.0).unwrap()).is_err());
    }

    #[test]
    fn estimate_k_examples() {
        let t = one_hot(&[0, 0, 1, 2], 3).unwrap();
        assert_eq!(estimate_k_per_class(t.view()).unwrap(), vec![2, 1, 1]);
        let t = one_hot(&[1, 1, 1], 3).unwrap();
        assert_eq!(estimate_k_per_class(t.view()).unwrap(), vec![0, 3, 0]);
        assert!(estimate_k_per_class(array![[1.0, 1.0]].view()).is_err());
        assert!(estimate_k_per_class(array![[0.5, 0.5]].view()).is_err());
    }

    #[test]
    fn multiclass_at_vertex_is_zero() {
        let labels = [0, 2, 1, 2];
        let logits = one_hot(&labels, 3).unwrap() * 10.0;
        let batch = ClassBatch::from_labels(logits, &labels, 1.0).unwrap();
        let e = hypersimplex_loss_multiclass(&batch).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn multiclass_single_class_matches_binary() {
        let x = [3.0, 1.0, 0.5, -2.0];
        let y = [1.0, 1.0, 0.0, 0.0];
        let batch = ClassBatch::new(
            Array2::from_shape_vec((4, 1), x.to_vec()).unwrap(),
            Array2::from_shape_vec((4, 1), vec![1.0; 4]).unwrap(),
            vec![2],
            vec![1.0],
        );
        // With one class every one-hot row is [1]; swap in a binary column
        // afterwards to compare against the binary loss.
        let binary = hypersimplex_loss(&x, &y, &HypersimplexSpec::new(4, 2, 1.0).unwrap()).unwrap();
        let mut b = batch.unwrap();
        b.targets = Array2::from_shape_vec((4, 1), y.to_vec()).unwrap();
        let multi = hypersimplex_loss_multiclass(&b).unwrap();
        assert_eq!(multi.value, binary.value);
        assert_eq!(multi.grad.column(0).to_vec(), binary.grad);
    }

    #[test]
    fn multiclass_gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let labels: Vec<usize> = vec![0, 1, 2, 0, 1, 2, 2, 1];
        let mut checked = 0;
        while checked < 10 {
            let logits = Array2::from_shape_fn((8, 3), |_| rng.random_range(-2.0..2.0));
            let batch = ClassBatch::from_labels(logits.clone(), &labels, 0.8).unwrap();
            // screen points near an active-set change
            let near_boundary = (0..3).any(|c| {
                let col = logits.column(c).to_vec();
                let spec = HypersimplexSpec::new(8, batch.k_per_class[c], 0.8).unwrap();
                let r = project(&col, &spec).unwrap();
                crate::oracle::boundary_margin(&col, &r) < 1e-3
            });
            if near_boundary {
                continue;
            }
            let e = hypersimplex_loss_multiclass(&batch).unwrap();
            for c in 0..3 {
                assert!(e.grad.column(c).sum().abs() < 1e-12);
            }
            let flat: Vec<f64> = logits.iter().copied().collect();
            let f = |v: &[f64]| {
                let mut b = batch.clone();
                b.logits = Array2::from_shape_vec((8, 3), v.to_vec()).unwrap();
                hypersimplex_loss_multiclass(&b).unwrap().value
            };
            let fd = fd_gradient(f, &flat, 1e-6);
            assert!(rel_err(&e.grad.iter().copied().collect::<Vec<_>>(), &fd) < 1e-5);
            checked += 1;
        }
    }

    #[test]
    fn batch_validation() {
        let logits = Array2::zeros((2, 2));
        assert!(ClassBatch::from_labels(logits.clone(), &[0], 1.0).is_err());
        assert!(ClassBatch::from_labels(logits.clone(), &[0, 2], 1.0).is_err());
        assert!(ClassBatch::from_labels(logits.clone(), &[0, 1], 0.0).is_err());
        let t = one_hot(&[0, 1], 2).unwrap();
        assert!(ClassBatch::new(logits, t, vec![3, 0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn hypersimplex_value_bounded_and_shift_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let n = rng.random_range(1..20);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
            let y: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..2u8))).collect();
            let k = y.iter().sum::<f64>() as usize;
            let spec = HypersimplexSpec::new(n, k, 0.5).unwrap();
            let e = hypersimplex_loss(&x, &y, &spec).unwrap();
            assert!(e.value >= 0.0 && e.value <= 0.5 * n as f64);
            let c = rng.random_range(-10.0..10.0);
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let e2 = hypersimplex_loss(&shifted, &y, &spec).unwrap();
            assert!((e.value - e2.value).abs() < 1e-9);
        }
    }
}
