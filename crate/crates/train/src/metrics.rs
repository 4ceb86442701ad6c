use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

/// One scalar result, keyed for machine-readable aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub model: String,
    pub split: String,
    pub metric: String,
    pub value: f64,
    pub seed: u64,
}

impl MetricRow {
    pub fn new(
        model: impl Into<String>,
        split: impl Into<String>,
        metric: impl Into<String>,
        value: f64,
        seed: u64,
    ) -> Self {
        MetricRow {
            model: model.into(),
            split: split.into(),
            metric: metric.into(),
            value,
            seed,
        }
    }
}

fn sorted(rows: &[MetricRow]) -> Vec<&MetricRow> {
    let mut refs: Vec<&MetricRow> = rows.iter().collect();
    refs.sort_by(|a, b| {
        (&a.model, &a.split, &a.metric, a.seed)
            .cmp(&(&b.model, &b.split, &b.metric, b.seed))
            .then_with(|| a.value.total_cmp(&b.value))
    });
    refs
}

/// Renders the canonical comma-separated table: a fixed header then one row
/// per metric, sorted by (model, split, metric, seed) so aggregation order
/// never changes the bytes.
pub fn render_table(rows: &[MetricRow]) -> String {
    let mut out = String::from("model,split,metric,value,seed\n");
    for r in sorted(rows) {
        let _ = writeln!(out, "{},{},{},{},{}", r.model, r.split, r.metric, r.value, r.seed);
    }
    out
}

/// Renders the line-oriented human report with one aligned line per metric.
pub fn render_report(rows: &[MetricRow]) -> String {
    let mut out = String::new();
    for r in sorted(rows) {
        let _ = writeln!(
            out,
            "{:<12} {:<14} {:<24} seed={:<4} {:.6e}",
            r.model, r.split, r.metric, r.seed, r.value
        );
    }
    out
}

/// Writes [`render_table`] output through a temporary file and an atomic
/// rename so readers never observe a half-written table.
pub fn write_metrics(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, render_table(rows))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
