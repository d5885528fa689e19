//! Datasets: IDX files (Fashion-MNIST layout) and Gaussian blobs.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const IDX_CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// `m × d`, one sample per row.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        train: Vec<usize>,
        test: Vec<usize>,
    ) -> Result<Self> {
        let m = features.nrows();
        if labels.len() != m {
            return Err(Error::arg(format!("{} labels for {m} samples", labels.len())));
        }
        if let Some(&c) = labels.iter().find(|&&c| c >= num_classes) {
            return Err(Error::arg(format!("label {c} out of range for {num_classes} classes")));
        }
        let mut seen = vec![false; m];
        for &i in train.iter().chain(&test) {
            if i >= m || seen[i] {
                return Err(Error::arg(format!("split index {i} is out of range or repeated")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::arg("train and test splits must cover every sample"));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            num_classes,
            train,
            test,
        })
    }

    pub fn dims(&self) -> usize {
        self.features.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> (Array2<f64>, Vec<usize>) {
        (
            self.features.select(Axis(0), idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(offset as u64, "file ends inside the header"))
}

/// `(count, rows, cols, pixels)` from an IDX3 image file.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(0, format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let need = count * rows * cols;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated image data: header promises {need} bytes, found {}", body.len()),
        ));
    }
    Ok((count, rows, cols, &body[..need]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8]> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(0, format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}")));
    }
    let count = read_u32(bytes, 4)? as usize;
    let body = &bytes[8..];
    if body.len() < count {
        return Err(Error::format(
            bytes.len() as u64,
            format!("truncated label data: header promises {count} labels, found {}", body.len()),
        ));
    }
    if let Some(i) = body[..count].iter().position(|&l| l as usize >= IDX_CLASSES) {
        return Err(Error::format((8 + i) as u64, format!("label {} out of range", body[i])));
    }
    Ok(&body[..count])
}

/// Reads an image/label IDX pair. Pixels are scaled to `[0, 1]`, only the
/// first `limit` records are kept, and every sample is placed in the train
/// split.
pub fn load_idx(images_path: &Path, labels_path: &Path, limit: Option<usize>) -> Result<Dataset> {
    let image_bytes = fs::read(images_path)?;
    let label_bytes = fs::read(labels_path)?;
    let (count, rows, cols, pixels) = parse_idx_images(&image_bytes)?;
    let labels = parse_idx_labels(&label_bytes)?;
    if labels.len() != count {
        return Err(Error::format(
            4,
            format!("{count} images but {} labels", labels.len()),
        ));
    }
    let m = limit.map_or(count, |l| l.min(count));
    let d = rows * cols;
    let features = Array2::from_shape_fn((m, d), |(i, j)| f64::from(pixels[i * d + j]) / 255.0);
    let labels: Vec<usize> = labels[..m].iter().map(|&l| l as usize).collect();
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, features, labels, IDX_CLASSES, (0..m).collect(), Vec::new())
}

/// Fashion-MNIST from `dir`, using the standard file names, truncated to the
/// first `train_size` training and `test_size` test records.
pub fn load_fashion_mnist(dir: &Path, train_size: usize, test_size: usize) -> Result<Dataset> {
    let train = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
        Some(train_size),
    )?;
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
        Some(test_size),
    )?;
    if train.dims() != test.dims() {
        return Err(Error::arg("train and test images differ in size"));
    }
    let (m_train, m_test) = (train.labels.len(), test.labels.len());
    let features = ndarray::concatenate(Axis(0), &[train.features.view(), test.features.view()])
        .expect("column counts checked");
    let mut labels = train.labels;
    labels.extend(test.labels);
    Dataset::new(
        "fashion-mnist",
        features,
        labels,
        IDX_CLASSES,
        (0..m_train).collect(),
        (m_train..m_train + m_test).collect(),
    )
}

/// `classes` Gaussian blobs with identity covariance, centered at
/// `separation · e_c` for random unit vectors `e_c`. Labels are balanced and
/// the samples shuffled; the first 80% form the train split.
pub fn make_synthetic(classes: usize, m: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || m < classes || d == 0 {
        return Err(Error::arg("synthetic data needs classes >= 2, m >= classes and d >= 1"));
    }
    if !separation.is_finite() || separation < 0.0 {
        return Err(Error::arg(format!("separation must be nonnegative, got {separation}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Array2::<f64>::zeros((classes, d));
    for mut row in means.rows_mut() {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        row.iter_mut().zip(&dir).for_each(|(r, v)| *r = separation * v / norm);
    }
    let mut labels: Vec<usize> = (0..m).map(|i| i % classes).collect();
    labels.shuffle(&mut rng);
    let mut features = Array2::<f64>::zeros((m, d));
    for (mut row, &c) in features.rows_mut().into_iter().zip(&labels) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = means[[c, j]] + rng.sample::<f64, _>(StandardNormal);
        }
    }
    let m_train = (m * 4) / 5;
    Dataset::new(
        format!("synthetic-c{classes}-d{d}-s{separation}"),
        features,
        labels,
        classes,
        (0..m_train).collect(),
        (m_train..m).collect(),
    )
}
