//! Run-record CSV and the batch-wise comparison table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{LossKind, RunRecord};
use crate::error::{Error, Result};
use crate::stats::{paired_t_test, TTestResult};

pub const CSV_HEADER: &str = "dataset,loss,batch,seed,tau,lr,epochs,best_test_acc,final_train_loss";

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordRow {
    pub dataset: String,
    pub loss: LossKind,
    pub batch: usize,
    pub seed: u64,
    pub tau: f64,
    pub lr: f64,
    pub epochs: usize,
    pub best_test_acc: f64,
    pub final_train_loss: f64,
}

impl From<&RunRecord> for RecordRow {
    fn from(r: &RunRecord) -> Self {
        Self {
            dataset: r.dataset.clone(),
            loss: r.loss,
            batch: r.batch_size,
            seed: r.seed,
            tau: r.tau,
            lr: r.lr,
            epochs: r.epochs,
            best_test_acc: r.best_test_accuracy,
            final_train_loss: r.final_train_loss,
        }
    }
}

pub fn write_records_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(RecordRow::from(r))?;
    }
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<RecordRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::format(0, format!("unexpected CSV header '{}'", header.join(","))));
    }
    r.deserialize()
        .map(|row| {
            row.map_err(|e| {
                let offset = e.position().map_or(0, |p| p.byte());
                Error::format(offset, e.to_string())
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub batch: usize,
    pub baseline_mean: f64,
    pub candidate_mean: f64,
    /// `candidate_mean - baseline_mean`.
    pub delta: f64,
    /// `None` with fewer than two seeds present for both losses.
    pub test: Option<TTestResult>,
}

fn short_name(loss: LossKind) -> &'static str {
    match loss {
        LossKind::Ce => "CE",
        LossKind::Hinge => "Hinge",
        LossKind::Mse => "MSE",
        LossKind::Hypersimplex => "HS",
    }
}

/// Per batch size: mean best accuracy of each loss over the seeds both have,
/// and a paired t-test of candidate against baseline.
pub fn summarize(rows: &[RecordRow], baseline: LossKind, candidate: LossKind) -> Result<Vec<SummaryRow>> {
    let mut acc: BTreeMap<(usize, LossKind), BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows {
        acc.entry((r.batch, r.loss)).or_default().insert(r.seed, r.best_test_acc);
    }
    let batches: BTreeSet<usize> = rows.iter().map(|r| r.batch).collect();
    let mut out = Vec::new();
    for batch in batches {
        let (Some(base), Some(cand)) = (acc.get(&(batch, baseline)), acc.get(&(batch, candidate))) else {
            continue;
        };
        let (a, b): (Vec<f64>, Vec<f64>) = base
            .iter()
            .filter_map(|(seed, &x)| cand.get(seed).map(|&y| (x, y)))
            .unzip();
        if a.is_empty() {
            continue;
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let test = if a.len() >= 2 { Some(paired_t_test(&a, &b)?) } else { None };
        out.push(SummaryRow {
            batch,
            baseline_mean: mean(&a),
            candidate_mean: mean(&b),
            delta: mean(&b) - mean(&a),
            test,
        });
    }
    Ok(out)
}

/// Comma-separated table `Batch,<baseline>,<candidate>,Δ,t-stat,p-val`. A
/// trailing `*` on the p-value marks significance at the 10% level.
pub fn format_summary(rows: &[SummaryRow], baseline: LossKind, candidate: LossKind) -> String {
    let mut s = format!("Batch,{},{},Δ,t-stat,p-val\n", short_name(baseline), short_name(candidate));
    for r in rows {
        let (t, p) = match &r.test {
            Some(t) => (
                format!("{:.2}", t.t_stat),
                format!("{:.3}{}", t.p_value, if t.significant_at_10pct { "*" } else { "" }),
            ),
            None => ("n/a".into(), "n/a".into()),
        };
        let _ = writeln!(
            s,
            "{},{:.4},{:.4},{:.4},{},{}",
            r.batch, r.baseline_mean, r.candidate_mean, r.delta, t, p
        );
    }
    s
}
