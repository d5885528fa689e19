//! Median-of-R wall-clock timing and doubling-ratio scaling study for the
//! forward projection and its JVP.

use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::backward::jvp;
use crate::error::{Error, Result};
use crate::isotonic::project_sorted_via_isotonic;
use crate::projection::{project, HypersimplexSpec};

/// Median wall time of `reps` calls of `f`, in nanoseconds. One untimed
/// warm-up call is made first.
pub fn median_ns<F: FnMut()>(reps: usize, mut f: F) -> f64 {
    f();
    let mut samples: Vec<f64> = (0..reps.max(1))
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_nanos() as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        0.5 * (samples[mid - 1] + samples[mid])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub project_ns: f64,
    pub jvp_ns: f64,
    /// Sorting the scaled input alone.
    pub sort_ns: f64,
    /// PAV plus threshold solve on already-sorted input.
    pub isotonic_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingRatio {
    pub n_from: usize,
    pub n_to: usize,
    pub project: f64,
    pub jvp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub reps: usize,
    pub seed: u64,
    pub tau: f64,
    /// `k = max(1, n * k_fraction)`.
    pub k_fraction: f64,
    /// Also time the sort and isotonic phases.
    pub phases: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            reps: 21,
            seed: 0,
            tau: 1.0,
            k_fraction: 0.25,
            phases: true,
        }
    }
}

pub fn random_scores(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

pub fn time_size(n: usize, cfg: &BenchConfig) -> Result<ScalingRow> {
    if n < 2 {
        return Err(Error::arg("benchmark size must be at least 2"));
    }
    let x = random_scores(n, cfg.seed ^ n as u64);
    let k = ((n as f64 * cfg.k_fraction) as usize).clamp(1, n - 1);
    let spec = HypersimplexSpec::new(n, k, cfg.tau)?;
    let result = project(&x, &spec)?;
    let v = random_scores(n, cfg.seed.wrapping_add(1));

    let project_ns = median_ns(cfg.reps, || {
        black_box(project(black_box(&x), &spec).unwrap());
    });
    let jvp_ns = median_ns(cfg.reps, || {
        black_box(jvp(black_box(&result), black_box(&v)).unwrap());
    });

    let (mut sort_ns, mut isotonic_ns) = (f64::NAN, f64::NAN);
    if cfg.phases {
        sort_ns = median_ns(cfg.reps, || {
            let mut s = black_box(&x).clone();
            s.sort_unstable_by(|a, b| b.total_cmp(a));
            black_box(s);
        });
        let mut sorted = x.clone();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        isotonic_ns = median_ns(cfg.reps, || {
            black_box(project_sorted_via_isotonic(black_box(&sorted), &spec).unwrap());
        });
    }

    Ok(ScalingRow {
        n,
        project_ns,
        jvp_ns,
        sort_ns,
        isotonic_ns,
    })
}

pub fn scaling_study(sizes: &[usize], cfg: &BenchConfig) -> Result<Vec<ScalingRow>> {
    sizes.iter().map(|&n| time_size(n, cfg)).collect()
}

/// Ratios of consecutive rows' medians.
pub fn doubling_ratios(rows: &[ScalingRow]) -> Vec<DoublingRatio> {
    rows.windows(2)
        .map(|w| DoublingRatio {
            n_from: w[0].n,
            n_to: w[1].n,
            project: w[1].project_ns / w[0].project_ns,
            jvp: w[1].jvp_ns / w[0].jvp_ns,
        })
        .collect()
}
