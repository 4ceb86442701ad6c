use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::artifacts::atomic_write;
use crate::error::{CliError, Result};

const METRICS_HEADER: &str = "model,split,metric,value,seed";

struct ParsedRow {
    model: String,
    split: String,
    metric: String,
    value: f64,
}

fn is_aggregate(metric: &str) -> bool {
    metric.ends_with(".mean") || metric.ends_with(".std") || metric.ends_with(".median")
}

/// Error-style metrics are ranked ascending; capacity/cost metrics are not
/// ranked at all.
fn rankable(metric: &str) -> bool {
    metric.contains("mse") || metric.contains("rel_l2") || metric.contains("loss")
}

/// Reads one run's metrics table, dropping the per-run aggregate rows (they
/// are recomputed over the union of runs).
fn parse_metrics_file(path: &Path) -> Result<Vec<ParsedRow>> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != METRICS_HEADER {
                return Err(CliError::Usage(format!(
                    "{}: expected header `{METRICS_HEADER}`, got `{line}`",
                    path.display()
                )));
            }
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(CliError::Usage(format!(
                "{} line {}: expected 5 comma-separated fields",
                path.display(),
                i + 1
            )));
        }
        let value: f64 = parts[3].parse().map_err(|_| {
            CliError::Usage(format!(
                "{} line {}: cannot parse value `{}`",
                path.display(),
                i + 1,
                parts[3]
            ))
        })?;
        if is_aggregate(parts[2]) {
            continue;
        }
        rows.push(ParsedRow {
            model: parts[0].to_string(),
            split: parts[1].to_string(),
            metric: parts[2].to_string(),
            value,
        });
    }
    Ok(rows)
}

fn key_set(rows: &[ParsedRow]) -> BTreeSet<(String, String)> {
    rows.iter().map(|r| (r.split.clone(), r.metric.clone())).collect()
}

struct Cell {
    mean: f64,
    std: f64,
    n: usize,
    rank: usize, // 0 = unranked
}

/// Aggregates metrics tables from several finished runs into one comparison
/// table ranked per (split, metric) column, plus a merged per-time error
/// curve file. Rerunning over the same dirs reproduces the bytes exactly.
pub fn cmd_report(dirs: &[PathBuf], out: &Path) -> Result<()> {
    if dirs.is_empty() {
        return Err(CliError::Usage("report needs at least one run directory".to_string()));
    }
    let mut per_dir = Vec::new();
    for dir in dirs {
        per_dir.push((dir.clone(), parse_metrics_file(&dir.join("metrics.csv"))?));
    }

    // Every run must describe the same (split, metric) grid, or the table
    // columns would silently mix different experiments.
    let base_keys = key_set(&per_dir[0].1);
    for (dir, rows) in &per_dir[1..] {
        let keys = key_set(rows);
        if keys != base_keys {
            let mut msg = format!(
                "incompatible metric sets between {} and {}:",
                per_dir[0].0.display(),
                dir.display()
            );
            for (split, metric) in base_keys.difference(&keys) {
                let _ = write!(msg, " missing ({split}, {metric});");
            }
            for (split, metric) in keys.difference(&base_keys) {
                let _ = write!(msg, " extra ({split}, {metric});");
            }
            return Err(CliError::Usage(msg));
        }
    }

    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for (_, rows) in &per_dir {
        for r in rows {
            groups
                .entry((r.model.clone(), r.split.clone(), r.metric.clone()))
                .or_default()
                .push(r.value);
        }
    }
    let mut cells: BTreeMap<(String, String, String), Cell> = groups
        .into_iter()
        .map(|(key, values)| {
            let n = values.len();
            let mean = values.iter().sum::<f64>() / n as f64;
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            (key, Cell { mean, std: var.sqrt(), n, rank: 0 })
        })
        .collect();

    // Rank models inside each error column by ascending mean.
    let mut columns: BTreeMap<(String, String), Vec<(f64, String)>> = BTreeMap::new();
    for ((model, split, metric), cell) in &cells {
        if rankable(metric) {
            columns
                .entry((split.clone(), metric.clone()))
                .or_default()
                .push((cell.mean, model.clone()));
        }
    }
    for ((split, metric), mut entrants) in columns {
        entrants.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for (place, (_, model)) in entrants.into_iter().enumerate().take(3) {
            cells.get_mut(&(model, split.clone(), metric.clone())).unwrap().rank = place + 1;
        }
    }

    let mut csv = String::from("model,split,metric,mean,std,n,rank\n");
    for ((model, split, metric), cell) in &cells {
        let rank = if cell.rank > 0 { cell.rank.to_string() } else { String::new() };
        let _ = writeln!(
            csv,
            "{model},{split},{metric},{},{},{},{rank}",
            cell.mean, cell.std, cell.n
        );
    }
    atomic_write(&out.join("report.csv"), csv.as_bytes())?;
    atomic_write(&out.join("report.txt"), render_text(&cells).as_bytes())?;

    // Merge the plot-ready per-time error curves, tagged by origin.
    let mut curves = String::from("source,t,rel_l2\n");
    for (dir, _) in &per_dir {
        let mut names: Vec<String> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.starts_with("per_time") && n.ends_with(".csv"))
            .collect();
        names.sort();
        for name in names {
            let text = std::fs::read_to_string(dir.join(&name))?;
            let source = format!("{}/{}", dir.display(), name.trim_end_matches(".csv"));
            for line in text.lines().skip(1) {
                let _ = writeln!(curves, "{source},{line}");
            }
        }
    }
    atomic_write(&out.join("curves.csv"), curves.as_bytes())?;
    Ok(())
}

/// One aligned table per split: models as rows, metrics as columns, with
/// (1)/(2)/(3) markers on the best three entries of each ranked column.
fn render_text(cells: &BTreeMap<(String, String, String), Cell>) -> String {
    let mut splits: BTreeMap<&str, (BTreeSet<&str>, BTreeSet<&str>)> = BTreeMap::new();
    for (model, split, metric) in cells.keys() {
        let entry = splits.entry(split).or_default();
        entry.0.insert(model);
        entry.1.insert(metric);
    }
    let mut text = String::new();
    for (split, (models, metrics)) in splits {
        let _ = writeln!(text, "split: {split}");
        let model_w = models.iter().map(|m| m.len()).max().unwrap_or(5).max(5) + 2;
        let col_w: Vec<usize> = metrics.iter().map(|m| m.len().max(16) + 2).collect();
        let _ = write!(text, "{:<model_w$}", "model");
        for (metric, w) in metrics.iter().zip(&col_w) {
            let _ = write!(text, "{metric:>w$}");
        }
        text.push('\n');
        for model in &models {
            let _ = write!(text, "{model:<model_w$}");
            for (metric, w) in metrics.iter().zip(&col_w) {
                let rendered = match cells.get(&(
                    model.to_string(),
                    split.to_string(),
                    metric.to_string(),
                )) {
                    None => "-".to_string(),
                    Some(cell) => {
                        let marker = if cell.rank > 0 {
                            format!("({})", cell.rank)
                        } else {
                            String::new()
                        };
                        format!("{:.3e}{marker}", cell.mean)
                    }
                };
                let _ = write!(text, "{rendered:>w$}");
            }
            text.push('\n');
        }
        text.push('\n');
    }
    text
}
