//! Two-layer rectifier network with a hand-written backward pass.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{cross_entropy_loss, hinge_loss, hypersimplex_loss_multiclass, squared_loss, ClassBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Hinge,
    Mse,
    Hypersimplex,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Ce, LossKind::Hinge, LossKind::Mse, LossKind::Hypersimplex];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Ce => "ce",
            LossKind::Hinge => "hinge",
            LossKind::Mse => "mse",
            LossKind::Hypersimplex => "hypersimplex",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ce" => Ok(LossKind::Ce),
            "hinge" => Ok(LossKind::Hinge),
            "mse" => Ok(LossKind::Mse),
            "hypersimplex" | "hs" => Ok(LossKind::Hypersimplex),
            other => Err(Error::arg(format!("unknown loss '{other}'"))),
        }
    }
}

/// Loss value and `∂L/∂logits`, both averaged over the batch.
pub fn loss_layer(kind: LossKind, logits: ArrayView2<f64>, labels: &[usize], tau: f64) -> Result<(f64, Array2<f64>)> {
    let eval = match kind {
        LossKind::Ce => cross_entropy_loss(logits, labels)?,
        LossKind::Hinge => hinge_loss(logits, labels)?,
        LossKind::Mse => squared_loss(logits, labels)?,
        LossKind::Hypersimplex => {
            let batch = ClassBatch::from_labels(logits.to_owned(), labels, tau)?;
            let mut eval = hypersimplex_loss_multiclass(&batch)?;
            // per-sample mean, to keep one learning rate across batch sizes
            let scale = 1.0 / labels.len().max(1) as f64;
            eval.value *= scale;
            eval.grad *= scale;
            eval
        }
    };
    Ok((eval.value, eval.grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

pub struct ForwardCache {
    pub pre: Array2<f64>,
    pub hidden: Array2<f64>,
    pub logits: Array2<f64>,
}

impl MlpModel {
    /// He-uniform weights, zero biases.
    pub fn init<R: Rng>(inputs: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let limit = (6.0 / fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
        };
        let w1 = uniform(inputs, hidden, inputs);
        let w2 = uniform(hidden, classes, hidden);
        Self {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(classes),
        }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.w1.nrows(), self.w1.ncols(), self.w2.ncols())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> ForwardCache {
        let pre = x.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(|v| v.max(0.0));
        let logits = hidden.dot(&self.w2) + &self.b2;
        ForwardCache { pre, hidden, logits }
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Array2<f64> {
        self.forward(x).logits
    }

    pub fn backward(&self, x: ArrayView2<f64>, cache: &ForwardCache, dlogits: &Array2<f64>) -> Gradients {
        let w2 = cache.hidden.t().dot(dlogits);
        let b2 = dlogits.sum_axis(Axis(0));
        let mut dpre = dlogits.dot(&self.w2.t());
        dpre.zip_mut_with(&cache.pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0;
            }
        });
        let w1 = x.t().dot(&dpre);
        let b1 = dpre.sum_axis(Axis(0));
        Gradients { w1, b1, w2, b2 }
    }

    pub fn loss_and_grads(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
        kind: LossKind,
        tau: f64,
    ) -> Result<(f64, Gradients)> {
        let cache = self.forward(x);
        let (value, dlogits) = loss_layer(kind, cache.logits.view(), labels, tau)?;
        Ok((value, self.backward(x, &cache, &dlogits)))
    }

    pub fn sgd_step(&mut self, g: &Gradients, lr: f64) {
        self.w1.scaled_add(-lr, &g.w1);
        self.b1.scaled_add(-lr, &g.b1);
        self.w2.scaled_add(-lr, &g.w2);
        self.b2.scaled_add(-lr, &g.b2);
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    /// All parameters, in the order w1, b1, w2, b2 (row-major).
    pub fn params(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
            .collect()
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.params().len(), "parameter count");
        let mut it = flat.iter().copied();
        for v in self
            .w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
        {
            *v = it.next().unwrap();
        }
    }
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
            .collect()
    }
}
