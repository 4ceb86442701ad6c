use std::path::{Path, PathBuf};

use ssop_dynsys::{read_dataset, TrajectoryDataset};
use ssop_train::{train, MetricRow, RunMetrics, TrainConfig};

use crate::artifacts::{guard_overwrite, save_checkpoint, write_curve, write_loss_curve};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub fn load_required(path: &Path) -> Result<TrajectoryDataset> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    Ok(read_dataset(path)?)
}

pub fn checkpoint_path(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("model_seed{seed}.ckpt"))
}

/// Per-seed scalar rows for one finished run.
pub fn metric_rows(model: &str, seed: u64, metrics: &RunMetrics) -> Vec<MetricRow> {
    let mut rows = vec![
        MetricRow::new(model, "train", "final_loss", *metrics.train_loss.last().unwrap(), seed),
        MetricRow::new(model, "train", "wall_seconds", metrics.wall_seconds, seed),
        MetricRow::new(model, "train", "param_count", metrics.param_count as f64, seed),
        MetricRow::new(
            model,
            "train",
            "diverged",
            if metrics.outcome.diverged() { 1.0 } else { 0.0 },
            seed,
        ),
    ];
    if let Some(mse) = metrics.final_test_mse {
        rows.push(MetricRow::new(model, "test", "mse", mse, seed));
    }
    if let Some(rel) = metrics.final_test_rel_l2 {
        rows.push(MetricRow::new(model, "test", "rel_l2", rel, seed));
    }
    rows
}

/// Mean/std rows over the per-seed values of each (model, split, metric).
pub fn aggregate_rows(rows: &[MetricRow]) -> Vec<MetricRow> {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.model.clone(), r.split.clone(), r.metric.clone()))
            .or_default()
            .push(r.value);
    }
    let mut out = Vec::new();
    for ((model, split, metric), values) in groups {
        if values.len() < 2 {
            continue;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        out.push(MetricRow::new(&model, &split, format!("{metric}.mean"), mean, 0));
        out.push(MetricRow::new(&model, &split, format!("{metric}.std"), var.sqrt(), 0));
        out.push(MetricRow::new(&model, &split, format!("{metric}.median"), median, 0));
    }
    out
}

/// Trains one model per seed, writing a checkpoint, a loss curve, a per-time
/// error curve, and a metrics table. Returns the seeds that diverged.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    out: &Path,
    seeds: &[u64],
    force: bool,
) -> Result<Vec<u64>> {
    let train_set = load_required(&out.join("train.ds"))?;
    let test_set = load_required(&out.join("test.ds"))?;
    for &seed in seeds {
        guard_overwrite(&checkpoint_path(out, seed), force)?;
    }

    let mut rows = Vec::new();
    let mut diverged = Vec::new();
    for &seed in seeds {
        let tc = TrainConfig { seed, ..cfg.train.clone() };
        let (model, metrics) = train(&cfg.model, &train_set, Some(&test_set), &tc)?;
        save_checkpoint(
            &checkpoint_path(out, seed),
            &model,
            seed,
            train_set.in_dim(),
            train_set.len(),
        )?;
        write_loss_curve(&out.join(format!("loss_seed{seed}.csv")), &metrics.train_loss)?;
        if let Some(curve) = &metrics.per_time_rel_l2 {
            write_curve(
                &out.join(format!("per_time_seed{seed}.csv")),
                "t,rel_l2",
                &test_set.grid,
                curve,
            )?;
        }
        if metrics.outcome.diverged() {
            diverged.push(seed);
        }
        rows.extend(metric_rows(cfg.model.name(), seed, &metrics));
    }
    rows.extend(aggregate_rows(&rows));
    ssop_train::write_metrics(&out.join("metrics.csv"), &rows)?;
    Ok(diverged)
}
