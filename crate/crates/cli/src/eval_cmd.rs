use std::fmt::Write as _;
use std::path::Path;

use ssop_dynsys::{gen_deeponet_horizon, gen_lorenz_ivp, TrajectoryDataset};
use ssop_train::{
    eval_ex_sweep, eval_interpolation, eval_length_extrapolation, eval_long_time, LongTimeBudget,
    MetricRow,
};

use crate::artifacts::{atomic_write, load_checkpoint, write_curve};
use crate::config::{ExperimentConfig, Protocol, SystemChoice};
use crate::error::{CliError, Result};
use crate::train_cmd::{checkpoint_path, load_required};

pub const EX_SWEEP_SCALES: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

fn driven_kind(cfg: &ExperimentConfig) -> Result<&ssop_dynsys::SystemConfig> {
    match &cfg.system {
        SystemChoice::Driven(kind) => Ok(kind),
        _ => Err(CliError::Usage(format!(
            "protocol {} needs a forcing-driven system (antiderivative, nonlinear_ode, \
             gravity_pendulum), got {}",
            cfg.protocol.name(),
            cfg.system_kind
        ))),
    }
}

/// Renders the long-sequence rows with the N.A. convention for entries the
/// budget refused.
pub fn render_long_time(rows: &[ssop_train::LongTimeRow]) -> String {
    let mut text = String::from("model,length,wall_seconds,graph_bytes,rel_l2,note\n");
    for r in rows {
        let fmt = |v: Option<f64>| v.map_or("N.A.".to_string(), |x| x.to_string());
        let bytes = r.graph_bytes.map_or("N.A.".to_string(), |b| b.to_string());
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            r.model,
            r.length,
            fmt(r.wall_seconds),
            bytes,
            fmt(r.rel_l2),
            r.note
        );
    }
    text
}

/// Runs the config's evaluation protocol against a stored checkpoint (the
/// long-sequence protocol times fresh models instead). Writes one metrics
/// table per protocol plus plot-ready curve files.
pub fn cmd_eval(
    cfg: &ExperimentConfig,
    out: &Path,
    seed: u64,
    budget_seconds: Option<f64>,
    budget_mem_mb: Option<usize>,
) -> Result<()> {
    let name = cfg.model.name();
    match cfg.protocol {
        Protocol::Interpolation => {
            let test = load_required(&out.join("test.ds"))?;
            let model = load_checkpoint(&checkpoint_path(out, seed), &cfg.model)?;
            let report = eval_interpolation(&model, &test)?;
            let rows = vec![
                MetricRow::new(name, "test", "mse", report.mse, seed),
                MetricRow::new(name, "test", "rel_l2", report.rel_l2, seed),
            ];
            ssop_train::write_metrics(&out.join("metrics_interpolation.csv"), &rows)?;
            if let Some(curve) = &report.per_time_rel_l2 {
                write_curve(
                    &out.join(format!("per_time_eval_seed{seed}.csv")),
                    "t,rel_l2",
                    &test.grid,
                    curve,
                )?;
            }
        }
        Protocol::LengthExtrapolation => {
            let kind = driven_kind(cfg)?;
            let model = load_checkpoint(&checkpoint_path(out, seed), &cfg.model)?;
            let suites: Vec<TrajectoryDataset> = (1..=4)
                .map(|t| {
                    gen_deeponet_horizon(kind, cfg.n_test, cfg.length_scale, t, cfg.seed + 1)
                })
                .collect::<std::result::Result<_, _>>()?;
            let horizon_rows = eval_length_extrapolation(&model, &suites)?;
            let mut rows = Vec::new();
            for r in &horizon_rows {
                let split = format!("T{}", r.horizon);
                rows.push(MetricRow::new(name, &split, "rel_l2", r.rel_l2, seed));
                rows.push(MetricRow::new(name, &split, "mse", r.mse, seed));
            }
            ssop_train::write_metrics(&out.join("metrics_length_extrapolation.csv"), &rows)?;
        }
        Protocol::ExSweep => {
            let kind = driven_kind(cfg)?;
            let model = load_checkpoint(&checkpoint_path(out, seed), &cfg.model)?;
            let sweep = eval_ex_sweep(&model, kind, cfg.n_test, cfg.seed + 1, &EX_SWEEP_SCALES)?;
            let rows: Vec<MetricRow> = sweep
                .iter()
                .map(|r| MetricRow::new(name, format!("l_{}", r.l_test), "rel_l2", r.rel_l2, seed))
                .collect();
            ssop_train::write_metrics(&out.join("metrics_ex_sweep.csv"), &rows)?;
        }
        Protocol::LongTime => {
            if !matches!(cfg.system, SystemChoice::LorenzIvp) {
                return Err(CliError::Usage(
                    "protocol long-time runs on system.kind = lorenz_ivp".to_string(),
                ));
            }
            let mut budget = LongTimeBudget::default();
            if let Some(s) = budget_seconds {
                budget.max_seconds = s;
            }
            if let Some(mb) = budget_mem_mb {
                budget.max_graph_bytes = mb * 1_000_000;
            }
            let suites: Vec<TrajectoryDataset> = cfg
                .lengths
                .iter()
                .map(|&l| gen_lorenz_ivp(1, l as f64 * 1e-3, cfg.seed + 1))
                .collect::<std::result::Result<_, _>>()?;
            let rows = eval_long_time(&[cfg.model.clone()], &suites, &budget, seed)?;
            atomic_write(&out.join("long_time.csv"), render_long_time(&rows).as_bytes())?;
        }
        Protocol::PkpdLimitedData | Protocol::PkpdScheduleExt | Protocol::PkpdPhysics => {
            return Err(CliError::Usage(format!(
                "protocol {} trains multiple models; run it with `ssop sweep`",
                cfg.protocol.name()
            )));
        }
    }
    Ok(())
}
