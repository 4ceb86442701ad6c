use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ssop_dynsys::{gen_deeponet_horizon, gen_lorenz_ivp, gen_pk_only, gen_pkpd, ScheduleSpace};
use ssop_train::{
    eval_ex_sweep, eval_interpolation, eval_length_extrapolation, eval_long_time, train,
    LongTimeBudget, MetricRow,
};

use crate::artifacts::{atomic_write, guard_overwrite, save_checkpoint, write_curve, write_loss_curve};
use crate::config::{ExperimentConfig, Protocol, SystemChoice};
use crate::error::{CliError, Result};
use crate::eval_cmd::{render_long_time, EX_SWEEP_SCALES};
use crate::train_cmd::{aggregate_rows, checkpoint_path, load_required, metric_rows};

/// Worker cap for sweep cells, from SSOP_THREADS (default 1, clamped to 16).
pub fn sweep_threads() -> usize {
    std::env::var("SSOP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(1)
        .clamp(1, 16)
}

/// What one sweep cell reports back: its metric rows and, when training
/// diverged, the offending seed.
struct CellOut {
    rows: Vec<MetricRow>,
    diverged: Option<u64>,
}

/// Runs `n` cells through a fixed-size worker pool and returns their outputs
/// in cell-index order. Errors surface in index order too, so a parallel run
/// fails the same way a serial one does.
fn run_cells<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = sweep_threads().min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = f(i);
                *slots[i].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker pool covered every cell"))
        .collect()
}

fn finish(out: &Path, cells: Vec<CellOut>) -> Result<Vec<u64>> {
    let mut rows = Vec::new();
    let mut diverged = Vec::new();
    for cell in cells {
        rows.extend(cell.rows);
        if let Some(seed) = cell.diverged {
            diverged.push(seed);
        }
    }
    rows.extend(aggregate_rows(&rows));
    ssop_train::write_metrics(&out.join("metrics.csv"), &rows)?;
    diverged.sort_unstable();
    diverged.dedup();
    Ok(diverged)
}

/// Runs the config's full experiment grid: one training cell per seed (and
/// per protocol-specific arm), evaluated and merged into a single metrics
/// table with mean/std/median aggregates. Returns the seeds that diverged.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    out: &Path,
    seeds: &[u64],
    force: bool,
    budget_seconds: Option<f64>,
    budget_mem_mb: Option<usize>,
) -> Result<Vec<u64>> {
    let name = cfg.model.name();
    match cfg.protocol {
        Protocol::Interpolation | Protocol::LengthExtrapolation | Protocol::ExSweep => {
            let train_set = load_required(&out.join("train.ds"))?;
            let test_set = load_required(&out.join("test.ds"))?;
            for &seed in seeds {
                guard_overwrite(&checkpoint_path(out, seed), force)?;
            }
            let driven_kind = match (&cfg.protocol, &cfg.system) {
                (Protocol::Interpolation, _) => None,
                (_, SystemChoice::Driven(kind)) => Some(kind),
                _ => {
                    return Err(CliError::Usage(format!(
                        "protocol {} needs a forcing-driven system, got {}",
                        cfg.protocol.name(),
                        cfg.system_kind
                    )))
                }
            };
            let horizon_suites = match (cfg.protocol, driven_kind) {
                (Protocol::LengthExtrapolation, Some(kind)) => (1..=4)
                    .map(|t| {
                        gen_deeponet_horizon(kind, cfg.n_test, cfg.length_scale, t, cfg.seed + 1)
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?,
                _ => Vec::new(),
            };

            let cells = run_cells(seeds.len(), |i| {
                let seed = seeds[i];
                let tc = ssop_train::TrainConfig { seed, ..cfg.train.clone() };
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
                let mut rows = metric_rows(name, seed, &metrics);
                if !metrics.outcome.diverged() {
                    match cfg.protocol {
                        Protocol::LengthExtrapolation => {
                            for r in eval_length_extrapolation(&model, &horizon_suites)? {
                                let split = format!("T{}", r.horizon);
                                rows.push(MetricRow::new(name, &split, "rel_l2", r.rel_l2, seed));
                                rows.push(MetricRow::new(name, &split, "mse", r.mse, seed));
                            }
                        }
                        Protocol::ExSweep => {
                            let kind = driven_kind.expect("checked above");
                            let sweep =
                                eval_ex_sweep(&model, kind, cfg.n_test, cfg.seed + 1, &EX_SWEEP_SCALES)?;
                            for r in sweep {
                                let split = format!("l_{}", r.l_test);
                                rows.push(MetricRow::new(name, &split, "rel_l2", r.rel_l2, seed));
                            }
                        }
                        _ => {}
                    }
                }
                Ok(CellOut {
                    rows,
                    diverged: metrics.outcome.diverged().then_some(seed),
                })
            })?;
            finish(out, cells)
        }

        Protocol::LongTime => {
            if !matches!(cfg.system, SystemChoice::LorenzIvp) {
                return Err(CliError::Usage(
                    "protocol long-time runs on system.kind = lorenz_ivp".to_string(),
                ));
            }
            guard_overwrite(&out.join("metrics.csv"), force)?;
            let mut budget = LongTimeBudget::default();
            if let Some(s) = budget_seconds {
                budget.max_seconds = s;
            }
            if let Some(mb) = budget_mem_mb {
                budget.max_graph_bytes = mb * 1_000_000;
            }
            let suites = cfg
                .lengths
                .iter()
                .map(|&l| gen_lorenz_ivp(1, l as f64 * 1e-3, cfg.seed + 1))
                .collect::<std::result::Result<Vec<_>, _>>()?;

            let cells = run_cells(seeds.len(), |i| {
                let seed = seeds[i];
                let long_rows = eval_long_time(&[cfg.model.clone()], &suites, &budget, seed)?;
                atomic_write(
                    &out.join(format!("long_time_seed{seed}.csv")),
                    render_long_time(&long_rows).as_bytes(),
                )?;
                let mut rows = Vec::new();
                for r in &long_rows {
                    let split = format!("L{}", r.length);
                    if let Some(w) = r.wall_seconds {
                        rows.push(MetricRow::new(name, &split, "wall_seconds", w, seed));
                    }
                    if let Some(b) = r.graph_bytes {
                        rows.push(MetricRow::new(name, &split, "graph_bytes", b as f64, seed));
                    }
                    if let Some(rel) = r.rel_l2 {
                        rows.push(MetricRow::new(name, &split, "rel_l2", rel, seed));
                    }
                }
                Ok(CellOut { rows, diverged: None })
            })?;
            finish(out, cells)
        }

        Protocol::PkpdPhysics => {
            if !matches!(cfg.system, SystemChoice::PkOnly) {
                return Err(CliError::Usage(
                    "protocol pkpd-physics runs on system.kind = pk_two_compartment".to_string(),
                ));
            }
            guard_overwrite(&out.join("metrics.csv"), force)?;
            let train_all = load_required(&out.join("train.ds"))?;
            let test_set = load_required(&out.join("test.ds"))?;
            let total = cfg.labeled + cfg.unlabeled;
            if total > train_all.n() {
                return Err(CliError::Usage(format!(
                    "labeled + unlabeled = {total} exceeds the {} generated trajectories",
                    train_all.n()
                )));
            }
            let pure_set = train_all.subset(0..cfg.labeled)?;
            let hybrid_set = train_all.subset(0..total)?;

            let cells = run_cells(seeds.len() * 2, |i| {
                let seed = seeds[i / 2];
                let hybrid = i % 2 == 1;
                let arm = if hybrid { "hybrid" } else { "pure" };
                let mut tc = ssop_train::TrainConfig { seed, ..cfg.train.clone() };
                let set = if hybrid {
                    tc.physics_weight =
                        if cfg.train.physics_weight > 0.0 { cfg.train.physics_weight } else { 1.0 };
                    // The kinetic residual is written in raw units.
                    tc.standardize_outputs = false;
                    tc.labeled = Some(cfg.labeled);
                    &hybrid_set
                } else {
                    tc.physics_weight = 0.0;
                    tc.labeled = None;
                    &pure_set
                };
                let (model, metrics) = train(&cfg.model, set, Some(&test_set), &tc)?;
                write_loss_curve(
                    &out.join(format!("loss_{arm}_seed{seed}.csv")),
                    &metrics.train_loss,
                )?;
                let mut rows = vec![MetricRow::new(
                    name,
                    format!("{arm}_train"),
                    "final_loss",
                    *metrics.train_loss.last().unwrap(),
                    seed,
                )];
                if !metrics.outcome.diverged() {
                    let report = eval_interpolation(&model, &test_set)?;
                    rows.push(MetricRow::new(name, arm, "mse", report.mse, seed));
                    rows.push(MetricRow::new(name, arm, "rel_l2", report.rel_l2, seed));
                    if let Some(curve) = &report.per_time_rel_l2 {
                        write_curve(
                            &out.join(format!("per_time_{arm}_seed{seed}.csv")),
                            "t,rel_l2",
                            &test_set.grid,
                            curve,
                        )?;
                    }
                }
                Ok(CellOut {
                    rows,
                    diverged: metrics.outcome.diverged().then_some(seed),
                })
            })?;
            finish(out, cells)
        }

        Protocol::PkpdLimitedData => {
            if !matches!(cfg.system, SystemChoice::Pkpd | SystemChoice::PkOnly) {
                return Err(CliError::Usage(
                    "protocol pkpd-limited-data runs on the kinetic systems".to_string(),
                ));
            }
            guard_overwrite(&out.join("metrics.csv"), force)?;
            let train_all = load_required(&out.join("train.ds"))?;
            let test_set = load_required(&out.join("test.ds"))?;
            let counts = &cfg.labeled_list;
            let mut slices = Vec::new();
            for &count in counts {
                if count > train_all.n() {
                    return Err(CliError::Usage(format!(
                        "labeled budget {count} exceeds the {} generated trajectories",
                        train_all.n()
                    )));
                }
                slices.push(train_all.subset(0..count)?);
            }

            let cells = run_cells(seeds.len() * counts.len(), |i| {
                let seed = seeds[i / counts.len()];
                let which = i % counts.len();
                let count = counts[which];
                let mut tc = ssop_train::TrainConfig { seed, ..cfg.train.clone() };
                tc.physics_weight = 0.0;
                tc.labeled = None;
                let (model, metrics) = train(&cfg.model, &slices[which], Some(&test_set), &tc)?;
                write_loss_curve(
                    &out.join(format!("loss_labeled{count}_seed{seed}.csv")),
                    &metrics.train_loss,
                )?;
                let split = format!("labeled_{count}");
                let mut rows = vec![MetricRow::new(
                    name,
                    format!("{split}_train"),
                    "final_loss",
                    *metrics.train_loss.last().unwrap(),
                    seed,
                )];
                if !metrics.outcome.diverged() {
                    let report = eval_interpolation(&model, &test_set)?;
                    rows.push(MetricRow::new(name, &split, "mse", report.mse, seed));
                    rows.push(MetricRow::new(name, &split, "rel_l2", report.rel_l2, seed));
                }
                Ok(CellOut {
                    rows,
                    diverged: metrics.outcome.diverged().then_some(seed),
                })
            })?;
            finish(out, cells)
        }

        Protocol::PkpdScheduleExt => {
            if !matches!(cfg.system, SystemChoice::Pkpd | SystemChoice::PkOnly) {
                return Err(CliError::Usage(
                    "protocol pkpd-schedule-ext runs on the kinetic systems".to_string(),
                ));
            }
            let train_set = load_required(&out.join("train.ds"))?;
            let test_set = load_required(&out.join("test.ds"))?;
            for &seed in seeds {
                guard_overwrite(&checkpoint_path(out, seed), force)?;
            }
            // Dose levels past the training schedule space.
            let ext_space =
                ScheduleSpace { doses: vec![50.0, 55.0, 60.0], ..ScheduleSpace::default() };
            let ext_set = match cfg.system {
                SystemChoice::Pkpd => gen_pkpd(cfg.n_test, cfg.seed + 2, &ext_space)?,
                _ => gen_pk_only(cfg.n_test, cfg.seed + 2, &ext_space)?,
            };

            let cells = run_cells(seeds.len(), |i| {
                let seed = seeds[i];
                let tc = ssop_train::TrainConfig { seed, ..cfg.train.clone() };
                let (model, metrics) = train(&cfg.model, &train_set, Some(&test_set), &tc)?;
                save_checkpoint(
                    &checkpoint_path(out, seed),
                    &model,
                    seed,
                    train_set.in_dim(),
                    train_set.len(),
                )?;
                write_loss_curve(&out.join(format!("loss_seed{seed}.csv")), &metrics.train_loss)?;
                let mut rows = metric_rows(name, seed, &metrics);
                if !metrics.outcome.diverged() {
                    for (split, set) in [("schedule_iid", &test_set), ("schedule_ext", &ext_set)] {
                        let report = eval_interpolation(&model, set)?;
                        rows.push(MetricRow::new(name, split, "mse", report.mse, seed));
                        rows.push(MetricRow::new(name, split, "rel_l2", report.rel_l2, seed));
                    }
                }
                Ok(CellOut {
                    rows,
                    diverged: metrics.outcome.diverged().then_some(seed),
                })
            })?;
            finish(out, cells)
        }
    }
}
